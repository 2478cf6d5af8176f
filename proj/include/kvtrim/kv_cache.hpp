#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kvtrim/channel_mask.hpp"
#include "kvtrim/matrix.hpp"

namespace kvtrim {

// Geometry and compression knobs for one run. B/S/L/N/D follow the usual
// cache-size product; dtype_bits is the storage width (arithmetic stays f64).
struct CacheConfig {
    std::uint32_t batch = 1;        // B
    std::uint32_t seq_len = 0;      // S
    std::uint32_t layers = 1;       // L
    std::uint32_t heads = 1;        // N
    std::uint32_t head_dim = 0;     // D
    std::uint32_t dtype_bits = 16;
    double key_prune_ratio = 0.0;   // lambda_k
    double value_prune_ratio = 0.0; // lambda_v
    std::uint32_t obs_window = 1;   // S_obs
    std::uint32_t residual_len = 1; // G
    std::uint32_t kv_budget = 0;    // retained tokens per head; 0 means seq_len

    std::uint32_t effective_budget() const { return kv_budget == 0 ? seq_len : kv_budget; }

    // Throws std::invalid_argument when any invariant is violated.
    void validate() const;
};

// T = floor((1 - lambda) * D); the number of channels that survive pruning.
std::size_t kept_channels(double prune_ratio, std::size_t head_dim);

// Per-head token cache split into a frozen segment stored at mask width and
// a recent segment at full width. Token order: every pruned-segment token
// precedes every recent-segment token. Used for both keys and values; the
// two only differ in which mask they are given.
class SegmentedCache {
public:
    SegmentedCache() = default;
    explicit SegmentedCache(std::size_t dim);

    std::size_t dim() const { return dim_; }
    const Matrix& pruned() const { return pruned_; }
    const Matrix& recent() const { return recent_; }
    const std::optional<ChannelMask>& mask() const { return mask_; }
    std::size_t retained_tokens() const { return pruned_.rows() + recent_.rows(); }

    // Appends one full-width row to the recent segment.
    void append(std::span<const double> row);

    // Column-gathers the recent segment by `mask` and moves it below the
    // pruned segment. The first freeze stores the mask; every later freeze
    // must present an equal one.
    void freeze_recent(const ChannelMask& mask);

    // Same, but `transform` is applied to the gathered chunk before it is
    // concatenated (the prune-then-quantize hook). Must preserve the shape.
    void freeze_recent(const ChannelMask& mask,
                       const std::function<Matrix(const Matrix&)>& transform);

    // Storage bytes for this head: payload at dtype_bits plus ceil(D/8) for
    // the mask when one is stored and actually prunes.
    std::uint64_t head_bytes(std::uint32_t dtype_bits) const;

    bool operator==(const SegmentedCache& other) const = default;

private:
    std::size_t dim_ = 0;
    Matrix pruned_;
    Matrix recent_;
    std::optional<ChannelMask> mask_;
};

// head_bytes summed over batch * layers * heads replicas of this cache.
std::uint64_t cache_bytes(const SegmentedCache& cache, const CacheConfig& cfg);

// Snapshot format: "KVTR", u16 version, then B,S,L,N,D,T,S_p,S_r as
// little-endian u32, mask bytes, then the pruned and recent segments as
// row-major f16. A cache that never froze serializes with T = D and a full
// mask, and deserializes back to the no-stored-mask state.
std::vector<std::uint8_t> serialize_cache(const SegmentedCache& cache, const CacheConfig& cfg);

// Consumes one snapshot starting at `offset`, advancing it past the blob.
// Validates the header against cfg geometry; throws std::runtime_error on a
// malformed or mismatched snapshot.
SegmentedCache deserialize_cache(std::span<const std::uint8_t> bytes, const CacheConfig& cfg,
                                 std::size_t& offset);

}  // namespace kvtrim
