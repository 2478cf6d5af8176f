#include "kvtrim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kvtrim/analysis.hpp"
#include "kvtrim/memory_model.hpp"

namespace kvtrim {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::size_t thread_cap(std::size_t jobs) {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KVTRIM_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && parsed > 0) {
            cap = parsed;
        }
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

// Runs fn(i) for i in [0, jobs) across the capped thread pool. Results must
// be written to independent slots; ordering is re-established by index.
template <typename Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
    const std::size_t workers = thread_cap(jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(content.data()),
              static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
}

fs::path prepare_output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory " + dir.string());
    }
    return dir;
}

std::string criterion_name(Criterion c) {
    switch (c) {
        case Criterion::L1: return "l1";
        case Criterion::L2: return "l2";
        case Criterion::QueryDriven: return "query";
        case Criterion::ValueDriven: return "value";
    }
    return "query";
}

std::string policy_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::None: return "none";
        case PolicyKind::H2O: return "h2o";
        case PolicyKind::SnapKV: return "snapkv";
    }
    return "none";
}

ordered_json geometry_json(const CacheConfig& c) {
    return ordered_json{{"batch", c.batch},
                        {"seq_len", c.seq_len},
                        {"layers", c.layers},
                        {"heads", c.heads},
                        {"head_dim", c.head_dim},
                        {"dtype_bits", c.dtype_bits},
                        {"key_prune_ratio", c.key_prune_ratio},
                        {"value_prune_ratio", c.value_prune_ratio},
                        {"obs_window", c.obs_window},
                        {"residual_len", c.residual_len},
                        {"kv_budget", c.effective_budget()}};
}

ordered_json memory_json(const MemoryReport& r) {
    return ordered_json{{"dense_bytes", r.dense_bytes},
                        {"key_bytes", r.key_bytes},
                        {"value_bytes", r.value_bytes},
                        {"mask_bytes", r.mask_bytes},
                        {"quant_overhead_bytes", r.quant_overhead_bytes},
                        {"reduction_fraction", r.reduction_fraction},
                        {"equal_memory_kv_budget", r.equal_memory_kv_budget}};
}

MemoryReport model_for(const RunConfig& cfg) {
    const std::uint32_t bits_k = cfg.quant ? cfg.quant->bits_k : cfg.cache.dtype_bits;
    const std::uint32_t bits_v = cfg.quant ? cfg.quant->bits_v : cfg.cache.dtype_bits;
    const std::uint32_t group = cfg.quant ? cfg.quant->group_size : 32;
    return report(cfg.cache, bits_k, bits_v, cfg.cache.key_prune_ratio,
                  cfg.cache.value_prune_ratio, cfg.cache.effective_budget(), group);
}

struct PipelineOutcome {
    double max_deviation = 0.0;
    FlopCounter flops;
    std::uint64_t head_bytes = 0;
    std::vector<std::uint8_t> snapshot;
};

PipelineOutcome run_one_pipeline(const RunConfig& cfg, std::uint32_t layer, std::uint32_t head) {
    const Criterion key_criterion = cfg.criterion == Criterion::ValueDriven
                                        ? Criterion::QueryDriven
                                        : cfg.criterion;
    HeadPipeline pipeline(cfg.cache, cfg.policy, key_criterion, cfg.quant);
    const HeadWorkload w = make_head_workload(cfg.workload, cfg.cache.head_dim, layer, head);

    PipelineOutcome out;
    pipeline.prefill(w.prefill_q, w.prefill_k, w.prefill_v);
    for (std::uint32_t step = 0; step < cfg.workload.decode_steps; ++step) {
        const auto expected = pipeline.reference().decode_reference(w.decode_q.row(step));
        const auto got =
            pipeline.decode_step(w.decode_q.row(step), w.decode_k.row(step), w.decode_v.row(step));
        for (std::size_t i = 0; i < got.size(); ++i) {
            out.max_deviation = std::max(out.max_deviation, std::abs(got[i] - expected[i]));
        }
    }
    out.flops = pipeline.flops();
    out.head_bytes = pipeline.key_cache().head_bytes(cfg.cache.dtype_bits) +
                     pipeline.value_cache().head_bytes(cfg.cache.dtype_bits);
    out.snapshot = serialize_cache(pipeline.key_cache(), cfg.cache);
    const auto value_blob = serialize_cache(pipeline.value_cache(), cfg.cache);
    out.snapshot.insert(out.snapshot.end(), value_blob.begin(), value_blob.end());
    return out;
}

}  // namespace

int cmd_run(const RunConfig& cfg) {
    if (cfg.workload.s_prefill == 0) {
        throw ConfigError("run needs a workload with s_prefill >= 1");
    }
    const fs::path dir = prepare_output_dir(cfg);
    const std::size_t jobs = static_cast<std::size_t>(cfg.cache.layers) * cfg.cache.heads;

    std::vector<PipelineOutcome> outcomes(jobs);
    parallel_for(jobs, [&](std::size_t i) {
        const std::uint32_t layer = static_cast<std::uint32_t>(i / cfg.cache.heads);
        const std::uint32_t head = static_cast<std::uint32_t>(i % cfg.cache.heads);
        outcomes[i] = run_one_pipeline(cfg, layer, head);
    });

    CheckResult check;
    FlopCounter flops;
    std::uint64_t all_head_bytes = 0;
    std::vector<std::uint8_t> snapshot;
    for (const auto& o : outcomes) {
        check.max_deviation = std::max(check.max_deviation, o.max_deviation);
        flops.prefill_attention += o.flops.prefill_attention;
        flops.scoring += o.flops.scoring;
        flops.decode_attention += o.flops.decode_attention;
        all_head_bytes += o.head_bytes;
        snapshot.insert(snapshot.end(), o.snapshot.begin(), o.snapshot.end());
    }
    if (!cfg.quant) {
        check.has_tolerance = true;
        check.tolerance = (cfg.cache.key_prune_ratio == 0.0 && cfg.cache.value_prune_ratio == 0.0)
                              ? 1e-12
                              : 1e-10;
    }

    const MemoryReport model = model_for(cfg);
    const std::uint64_t actual_bytes = cfg.cache.batch * all_head_bytes;
    const std::uint64_t dense_total =
        2ull * cfg.cache.batch * cfg.cache.layers * cfg.cache.heads *
        (cfg.workload.s_prefill + cfg.workload.decode_steps) * cfg.cache.head_dim *
        (cfg.cache.dtype_bits / 8);

    ordered_json report_json{
        {"geometry", geometry_json(cfg.cache)},
        {"policy",
         ordered_json{{"kind", policy_name(cfg.policy.kind)},
                      {"kv_budget", cfg.policy.kv_budget},
                      {"obs_window", cfg.policy.obs_window},
                      {"pool_kernel", cfg.policy.pool_kernel}}},
        {"criterion", criterion_name(cfg.criterion)},
        {"quantization", cfg.quant ? ordered_json{{"bits_k", cfg.quant->bits_k},
                                                  {"bits_v", cfg.quant->bits_v},
                                                  {"group_size", cfg.quant->group_size}}
                                   : ordered_json(nullptr)},
        {"workload",
         ordered_json{{"seed", cfg.workload.seed},
                      {"s_prefill", cfg.workload.s_prefill},
                      {"decode_steps", cfg.workload.decode_steps},
                      {"generator",
                       cfg.workload.generator == Generator::Gaussian ? "gaussian" : "lowrank"},
                      {"rank", cfg.workload.rank}}},
        {"checks", ordered_json{{"max_deviation", check.max_deviation},
                                {"tolerance",
                                 check.has_tolerance ? ordered_json(check.tolerance)
                                                     : ordered_json(nullptr)},
                                {"passed", check.passed()}}},
        {"flops", ordered_json{{"prefill_attention", flops.prefill_attention},
                               {"scoring", flops.scoring},
                               {"decode_attention", flops.decode_attention},
                               {"total", flops.total()}}},
        {"memory_model", memory_json(model)},
        {"cache_bytes_actual", actual_bytes},
        {"dense_bytes_actual", dense_total},
        {"byte_ratio", dense_total == 0
                           ? 0.0
                           : static_cast<double>(actual_bytes) / static_cast<double>(dense_total)}};

    write_file(dir / "run_report.json", report_json.dump(2) + "\n");
    write_file(dir / "cache_snapshot.bin", snapshot);

    if (!check.passed()) {
        std::cerr << "numerical check failed: max deviation " << check.max_deviation
                  << " exceeds tolerance " << check.tolerance << "\n";
        return kExitNumericalError;
    }
    return kExitOk;
}

int cmd_analyze(const RunConfig& cfg) {
    if (cfg.workload.s_prefill == 0) {
        throw ConfigError("analyze needs a workload with s_prefill >= 1");
    }
    const fs::path dir = prepare_output_dir(cfg);
    for (std::uint32_t layer = 0; layer < cfg.cache.layers; ++layer) {
        for (std::uint32_t head = 0; head < cfg.cache.heads; ++head) {
            const HeadWorkload w =
                make_head_workload(cfg.workload, cfg.cache.head_dim, layer, head);
            const EnergySpectrum spectrum = attention_energy(w.prefill_q, w.prefill_k);

            const bool canonical = layer == 0 && head == 0;
            const std::string suffix =
                "_l" + std::to_string(layer) + "_h" + std::to_string(head);
            write_file(dir / ("energy" + (canonical ? "" : suffix) + ".csv"),
                       energy_csv(spectrum));
            write_file(dir / ("key_magnitude" + (canonical ? "" : suffix) + ".csv"),
                       matrix_csv(magnitude_map(w.prefill_k)));
            write_file(dir / ("value_magnitude" + (canonical ? "" : suffix) + ".csv"),
                       matrix_csv(magnitude_map(w.prefill_v)));
        }
    }
    return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
    if (cfg.sweep.empty()) {
        throw ConfigError("report needs a non-empty \"sweep\" of key prune ratios");
    }
    const fs::path dir = prepare_output_dir(cfg);
    const std::uint32_t bits_k = cfg.quant ? cfg.quant->bits_k : cfg.cache.dtype_bits;
    const std::uint32_t bits_v = cfg.quant ? cfg.quant->bits_v : cfg.cache.dtype_bits;
    const std::uint32_t group = cfg.quant ? cfg.quant->group_size : 32;

    ordered_json entries = ordered_json::array();
    for (double lambda : cfg.sweep) {
        MemoryReport r;
        try {
            r = report(cfg.cache, bits_k, bits_v, lambda, cfg.cache.value_prune_ratio,
                       cfg.cache.effective_budget(), group);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sweep entry rejected: ") + e.what());
        }
        ordered_json entry{{"lambda_k", lambda}};
        entry.update(memory_json(r));
        entries.push_back(std::move(entry));
    }

    ordered_json out{{"geometry", geometry_json(cfg.cache)},
                     {"bits_k", bits_k},
                     {"bits_v", bits_v},
                     {"group_size", group},
                     {"sweep", entries}};
    write_file(dir / "memory_report.json", out.dump(2) + "\n");
    return kExitOk;
}

}  // namespace kvtrim
