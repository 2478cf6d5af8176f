#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kvtrim/attention.hpp"
#include "kvtrim/channel_mask.hpp"
#include "kvtrim/evictor.hpp"
#include "kvtrim/kv_cache.hpp"
#include "kvtrim/pruner.hpp"
#include "kvtrim/quant.hpp"

namespace kvtrim {

struct QuantSpec {
    std::uint32_t bits_k = 4;
    std::uint32_t bits_v = 4;
    std::uint32_t group_size = 32;

    void validate() const;
};

// Work model: a multiply-accumulate is two flops, one softmax logit costs
// four (exp, add, div, max scan). Used for the scoring-overhead and decode
// bandwidth numbers in run reports; nothing here is wall-clock.
struct FlopCounter {
    std::uint64_t prefill_attention = 0;
    std::uint64_t scoring = 0;
    std::uint64_t decode_attention = 0;

    std::uint64_t total() const { return prefill_attention + scoring + decode_attention; }
};

// Mirrors one head's retained tokens at full width and recomputes each
// decode step densely, zero-masking the key channels that the segmented
// cache dropped for frozen rows. With full masks this is plain dense
// attention, which is what the identity checks compare against.
class ReferenceTracker {
public:
    ReferenceTracker() = default;
    ReferenceTracker(ChannelMask key_mask, ChannelMask value_mask);

    void set_prefill(Matrix retained_keys, Matrix retained_values, std::size_t frozen_rows);
    void append(std::span<const double> key_row, std::span<const double> value_row);
    void freeze_to(std::size_t frozen_rows);

    // Output over the value mask's kept channels, like the engine's.
    std::vector<double> decode_reference(std::span<const double> query_row) const;

private:
    ChannelMask key_mask_;
    ChannelMask value_mask_;
    Matrix keys_;
    Matrix values_;
    std::size_t frozen_rows_ = 0;
};

// One (layer, head) lane of the engine: dense prefill, eviction, channel
// pruning, then segmented decode against the pruned + recent cache.
class HeadPipeline {
public:
    HeadPipeline(const CacheConfig& cfg, EvictionPolicy policy, Criterion key_criterion,
                 std::optional<QuantSpec> quant);

    // Runs the full prefill pass. The returned output is computed from the
    // uncompressed cache; compression only affects later decode steps.
    Matrix prefill(const Matrix& q, const Matrix& k, const Matrix& v);

    // One decode step: attends over the current cache, then appends the new
    // key/value row (freezing the recent segment once it reaches G rows).
    // Output covers the value mask's kept channels.
    std::vector<double> decode_step(std::span<const double> query_row,
                                    std::span<const double> key_row,
                                    std::span<const double> value_row);

    const SegmentedCache& key_cache() const { return keys_; }
    const SegmentedCache& value_cache() const { return values_; }
    const ChannelMask& key_mask() const { return key_mask_; }
    const ChannelMask& value_mask() const { return value_mask_; }
    const std::vector<std::size_t>& retained_indices() const { return retained_; }
    const FlopCounter& flops() const { return flops_; }
    const ReferenceTracker& reference() const { return reference_; }

private:
    void freeze_caches();

    CacheConfig cfg_;
    EvictionPolicy policy_;
    Criterion key_criterion_;
    std::optional<QuantSpec> quant_;

    SegmentedCache keys_;
    SegmentedCache values_;
    ChannelMask key_mask_;
    ChannelMask value_mask_;
    std::vector<std::size_t> retained_;
    ReferenceTracker reference_;
    FlopCounter flops_;
    bool prefilled_ = false;
};

}  // namespace kvtrim
