#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kvtrim/matrix.hpp"

namespace kvtrim {

enum class PolicyKind { None, H2O, SnapKV };

struct EvictionPolicy {
    PolicyKind kind = PolicyKind::None;
    std::uint32_t kv_budget = 0;
    std::uint32_t obs_window = 1;
    std::uint32_t pool_kernel = 7;  // SnapKV max-pool width, must be odd

    void validate() const;
};

// Heavy-hitter retention: the last `recent` tokens plus the (budget - recent)
// prefix tokens with the largest attention column sums. `attn` is the full
// S x S causal weight matrix. Ties prefer the lower index. Result is
// ascending, length min(budget, S).
std::vector<std::size_t> evict_h2o(const Matrix& attn, std::size_t budget, std::size_t recent);

// SnapKV retention: per-prefix-position votes are the column sums of the
// observation-window rows, max-pooled along the token axis (same length,
// clamped edges), then the top (budget - obs_window) prefix positions are
// kept together with the window itself.
std::vector<std::size_t> evict_snapkv(const Matrix& attn_obs, std::size_t budget,
                                      std::size_t obs_window, std::size_t pool_kernel);

}  // namespace kvtrim
