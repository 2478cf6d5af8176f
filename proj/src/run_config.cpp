#include "kvtrim/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kvtrim {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field \"" + key + "\" has the wrong type");
    }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ConfigError("missing required field \"" + key + "\" in " + where);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field \"" + key + "\" in " + where + " has the wrong type");
    }
}

Criterion parse_criterion(const std::string& name) {
    if (name == "l1") return Criterion::L1;
    if (name == "l2") return Criterion::L2;
    if (name == "query") return Criterion::QueryDriven;
    if (name == "value") return Criterion::ValueDriven;
    throw ConfigError("criterion must be one of l1, l2, query, value");
}

PolicyKind parse_policy_kind(const std::string& name) {
    if (name == "none") return PolicyKind::None;
    if (name == "h2o") return PolicyKind::H2O;
    if (name == "snapkv") return PolicyKind::SnapKV;
    throw ConfigError("policy kind must be one of none, h2o, snapkv");
}

Generator parse_generator(const std::string& name) {
    if (name == "gaussian") return Generator::Gaussian;
    if (name == "lowrank") return Generator::LowRank;
    throw ConfigError("workload generator must be gaussian or lowrank");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    reject_unknown_keys(root, "config",
                        {"cache", "policy", "criterion", "quantization", "workload",
                         "output_dir", "sweep"});

    RunConfig cfg;

    const json cache = require<json>(root, "cache", "config");
    if (!cache.is_object()) throw ConfigError("\"cache\" must be an object");
    reject_unknown_keys(cache, "cache",
                        {"batch", "seq_len", "layers", "heads", "head_dim", "dtype_bits",
                         "key_prune_ratio", "value_prune_ratio", "obs_window", "residual_len",
                         "kv_budget"});
    cfg.cache.batch = get_or<std::uint32_t>(cache, "batch", 1);
    cfg.cache.layers = get_or<std::uint32_t>(cache, "layers", 1);
    cfg.cache.heads = get_or<std::uint32_t>(cache, "heads", 1);
    cfg.cache.head_dim = require<std::uint32_t>(cache, "head_dim", "cache");
    cfg.cache.dtype_bits = get_or<std::uint32_t>(cache, "dtype_bits", 16);
    cfg.cache.key_prune_ratio = get_or<double>(cache, "key_prune_ratio", 0.0);
    cfg.cache.value_prune_ratio = get_or<double>(cache, "value_prune_ratio", 0.0);
    cfg.cache.residual_len = get_or<std::uint32_t>(cache, "residual_len", 32);

    if (root.contains("workload")) {
        const json wl = root.at("workload");
        if (!wl.is_object()) throw ConfigError("\"workload\" must be an object");
        reject_unknown_keys(wl, "workload",
                            {"seed", "s_prefill", "decode_steps", "generator", "rank"});
        cfg.workload.seed = get_or<std::uint64_t>(wl, "seed", 0);
        cfg.workload.s_prefill = require<std::uint32_t>(wl, "s_prefill", "workload");
        cfg.workload.decode_steps = get_or<std::uint32_t>(wl, "decode_steps", 0);
        cfg.workload.generator = parse_generator(get_or<std::string>(wl, "generator", "gaussian"));
        cfg.workload.rank = get_or<std::uint32_t>(wl, "rank", 1);
    }

    // seq_len defaults to the workload extent so run configs only state it
    // when modeling a different geometry.
    const std::uint32_t workload_len = cfg.workload.s_prefill + cfg.workload.decode_steps;
    cfg.cache.seq_len = get_or<std::uint32_t>(cache, "seq_len", workload_len);
    if (cfg.cache.seq_len == 0) {
        throw ConfigError("cache.seq_len is required when no workload is given");
    }
    cfg.cache.obs_window =
        get_or<std::uint32_t>(cache, "obs_window", std::min<std::uint32_t>(32, cfg.cache.seq_len));
    cfg.cache.kv_budget = get_or<std::uint32_t>(cache, "kv_budget", 0);

    if (root.contains("policy")) {
        const json pol = root.at("policy");
        if (!pol.is_object()) throw ConfigError("\"policy\" must be an object");
        reject_unknown_keys(pol, "policy", {"kind", "kv_budget", "obs_window", "pool_kernel"});
        cfg.policy.kind = parse_policy_kind(get_or<std::string>(pol, "kind", "none"));
        cfg.policy.kv_budget = get_or<std::uint32_t>(pol, "kv_budget",
                                                     cfg.cache.effective_budget());
        cfg.policy.obs_window = get_or<std::uint32_t>(pol, "obs_window", cfg.cache.obs_window);
        cfg.policy.pool_kernel = get_or<std::uint32_t>(pol, "pool_kernel", 7);
    } else {
        cfg.policy.kind = PolicyKind::None;
        cfg.policy.kv_budget = cfg.cache.effective_budget();
        cfg.policy.obs_window = cfg.cache.obs_window;
    }
    if (cfg.policy.kind != PolicyKind::None) {
        cfg.cache.kv_budget = std::min<std::uint32_t>(cfg.policy.kv_budget, cfg.cache.seq_len);
    }

    cfg.criterion = parse_criterion(get_or<std::string>(root, "criterion", "query"));

    if (root.contains("quantization") && !root.at("quantization").is_null()) {
        const json q = root.at("quantization");
        if (!q.is_object()) throw ConfigError("\"quantization\" must be an object or null");
        reject_unknown_keys(q, "quantization", {"bits_k", "bits_v", "group_size"});
        QuantSpec spec;
        spec.bits_k = require<std::uint32_t>(q, "bits_k", "quantization");
        spec.bits_v = require<std::uint32_t>(q, "bits_v", "quantization");
        spec.group_size = get_or<std::uint32_t>(q, "group_size", 32);
        cfg.quant = spec;
    }

    cfg.output_dir = get_or<std::string>(root, "output_dir", "out");

    if (root.contains("sweep")) {
        const json sweep = root.at("sweep");
        if (!sweep.is_array()) throw ConfigError("\"sweep\" must be an array of prune ratios");
        for (const auto& v : sweep) {
            if (!v.is_number()) throw ConfigError("sweep entries must be numbers");
            cfg.sweep.push_back(v.get<double>());
        }
    }

    // Surface invariant violations as config errors with the module message.
    try {
        cfg.cache.validate();
        cfg.policy.validate();
        if (cfg.quant) cfg.quant->validate();
        if (root.contains("workload")) cfg.workload.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

}  // namespace kvtrim
