#pragma once

#include <cstdint>

#include "kvtrim/kv_cache.hpp"

namespace kvtrim {

// Closed-form byte accounting for a cache configuration. key_bytes and
// value_bytes are steady-state payloads (every retained token stored at the
// pruned width); mask and quantization overheads are itemized separately,
// and reduction_fraction compares payloads only.
struct MemoryReport {
    std::uint64_t dense_bytes = 0;
    std::uint64_t key_bytes = 0;
    std::uint64_t value_bytes = 0;
    std::uint64_t mask_bytes = 0;
    std::uint64_t quant_overhead_bytes = 0;
    double reduction_fraction = 0.0;
    std::uint32_t equal_memory_kv_budget = 0;
};

// Analytic totals for the given widths, ratios and token budget. bits of 16
// mean unquantized storage at cfg.dtype_bits; 2 or 4 mean group-quantized
// payloads with two f16 values (scale, zero point) per group of group_size.
MemoryReport report(const CacheConfig& cfg, std::uint32_t bits_k, std::uint32_t bits_v,
                    double lambda_k, double lambda_v, std::uint32_t budget,
                    std::uint32_t group_size = 32);

// Largest dense (unpruned) kv budget whose bytes do not exceed a pruned
// configuration at reference_budget, where the pruned side keeps the last
// obs_window tokens at full width plus its channel mask. lambda_k of zero
// returns the reference budget unchanged.
std::uint32_t equal_memory_budget(const CacheConfig& cfg, double lambda_k,
                                  std::uint32_t reference_budget);

// floor((total - weights) / per_seq_kv). Throws std::invalid_argument when
// per_seq_kv_bytes is zero or the weights do not fit.
std::uint64_t batch_size_headroom(std::uint64_t total_gpu_bytes, std::uint64_t weight_bytes,
                                  std::uint64_t per_seq_kv_bytes);

}  // namespace kvtrim
