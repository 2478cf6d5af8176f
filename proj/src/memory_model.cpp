#include "kvtrim/memory_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvtrim {

namespace {

// Payload bytes for one head storing `tokens` rows of `width` channels.
// Quantized payloads are one continuous bit stream per head; groups run
// along the quantized axis and never straddle a line.
std::uint64_t head_payload_bytes(std::uint64_t tokens, std::uint64_t width, std::uint32_t bits) {
    return (tokens * width * bits + 7) / 8;
}

std::uint64_t head_group_count(std::uint64_t tokens, std::uint64_t width, bool per_channel,
                               std::uint32_t group_size) {
    const std::uint64_t line_len = per_channel ? tokens : width;
    const std::uint64_t line_count = per_channel ? width : tokens;
    if (line_len == 0) return 0;
    return line_count * ((line_len + group_size - 1) / group_size);
}

}  // namespace

MemoryReport report(const CacheConfig& cfg, std::uint32_t bits_k, std::uint32_t bits_v,
                    double lambda_k, double lambda_v, std::uint32_t budget,
                    std::uint32_t group_size) {
    cfg.validate();
    if (group_size == 0) {
        throw std::invalid_argument("group_size must be positive");
    }
    if (lambda_k < 0.0 || lambda_k >= 1.0 || lambda_v < 0.0 || lambda_v >= 1.0) {
        throw std::invalid_argument("prune ratios must lie in [0, 1)");
    }
    const std::uint64_t replicas =
        static_cast<std::uint64_t>(cfg.batch) * cfg.layers * cfg.heads;
    const std::uint64_t tokens =
        std::min<std::uint64_t>(budget == 0 ? cfg.seq_len : budget, cfg.seq_len);
    const std::uint64_t keep_k = kept_channels(lambda_k, cfg.head_dim);
    const std::uint64_t keep_v = kept_channels(lambda_v, cfg.head_dim);
    const std::uint64_t mask_per_head = (cfg.head_dim + 7) / 8;

    MemoryReport r;
    r.dense_bytes = 2 * replicas *
                    head_payload_bytes(cfg.seq_len, cfg.head_dim, cfg.dtype_bits);
    r.key_bytes = replicas * head_payload_bytes(tokens, keep_k, bits_k);
    r.value_bytes = replicas * head_payload_bytes(tokens, keep_v, bits_v);
    r.mask_bytes = replicas * ((lambda_k > 0.0 ? mask_per_head : 0) +
                               (lambda_v > 0.0 ? mask_per_head : 0));
    std::uint64_t groups = 0;
    if (bits_k < cfg.dtype_bits) {
        groups += head_group_count(tokens, keep_k, /*per_channel=*/true, group_size);
    }
    if (bits_v < cfg.dtype_bits) {
        groups += head_group_count(tokens, keep_v, /*per_channel=*/false, group_size);
    }
    r.quant_overhead_bytes = replicas * groups * 4;  // scale + zero point as f16

    r.reduction_fraction =
        1.0 - static_cast<double>(r.key_bytes + r.value_bytes) /
                  static_cast<double>(r.dense_bytes);
    r.equal_memory_kv_budget =
        equal_memory_budget(cfg, lambda_k, static_cast<std::uint32_t>(tokens));
    return r;
}

std::uint32_t equal_memory_budget(const CacheConfig& cfg, double lambda_k,
                                  std::uint32_t reference_budget) {
    if (lambda_k < 0.0 || lambda_k >= 1.0) {
        throw std::invalid_argument("lambda_k must lie in [0, 1)");
    }
    if (lambda_k == 0.0 || reference_budget == 0) {
        return reference_budget;
    }
    const std::uint64_t dim = cfg.head_dim;
    const std::uint64_t keep = kept_channels(lambda_k, dim);
    const std::uint64_t recent = std::min<std::uint64_t>(cfg.obs_window, reference_budget);
    const std::uint64_t frozen = reference_budget - recent;

    // Per-head bytes of the pruned configuration: frozen keys at T channels,
    // the recent window at D, the mask, and the untouched value cache.
    const std::uint64_t pruned_bytes =
        head_payload_bytes(frozen, keep, cfg.dtype_bits) +
        head_payload_bytes(recent, dim, cfg.dtype_bits) + (dim + 7) / 8 +
        head_payload_bytes(reference_budget, dim, cfg.dtype_bits);

    const std::uint64_t dense_per_token = 2 * head_payload_bytes(1, dim, cfg.dtype_bits);
    return static_cast<std::uint32_t>(pruned_bytes / dense_per_token);
}

std::uint64_t batch_size_headroom(std::uint64_t total_gpu_bytes, std::uint64_t weight_bytes,
                                  std::uint64_t per_seq_kv_bytes) {
    if (per_seq_kv_bytes == 0) {
        throw std::invalid_argument("per-sequence KV bytes must be positive");
    }
    if (weight_bytes >= total_gpu_bytes) {
        throw std::invalid_argument("weights do not fit in the given memory");
    }
    return (total_gpu_bytes - weight_bytes) / per_seq_kv_bytes;
}

}  // namespace kvtrim
