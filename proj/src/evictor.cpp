#include "kvtrim/evictor.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace kvtrim {

namespace {
// Top `count` positions by vote, ties toward the lower index, returned
// ascending.
std::vector<std::size_t> top_positions(const std::vector<double>& votes, std::size_t count) {
    std::vector<std::size_t> order(votes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (votes[a] != votes[b]) return votes[a] > votes[b];
        return a < b;
    });
    order.resize(std::min(count, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}
}  // namespace

void EvictionPolicy::validate() const {
    if (kind == PolicyKind::None) return;
    if (kv_budget < obs_window) {
        throw std::invalid_argument("eviction budget must cover the observation window");
    }
    if (kind == PolicyKind::SnapKV && pool_kernel % 2 == 0) {
        throw std::invalid_argument("SnapKV pool kernel must be odd");
    }
}

std::vector<std::size_t> evict_h2o(const Matrix& attn, std::size_t budget, std::size_t recent) {
    const std::size_t seq = attn.cols();
    if (budget > seq) budget = seq;
    if (recent > budget) {
        throw std::invalid_argument("h2o recent count exceeds the budget");
    }

    const std::size_t prefix = seq - std::min(recent, seq);
    std::vector<double> votes(prefix, 0.0);
    for (std::size_t i = 0; i < attn.rows(); ++i) {
        for (std::size_t j = 0; j < prefix; ++j) {
            votes[j] += attn.at(i, j);
        }
    }

    std::vector<std::size_t> kept = top_positions(votes, budget - recent);
    for (std::size_t j = prefix; j < seq; ++j) kept.push_back(j);
    return kept;
}

std::vector<std::size_t> evict_snapkv(const Matrix& attn_obs, std::size_t budget,
                                      std::size_t obs_window, std::size_t pool_kernel) {
    if (pool_kernel % 2 == 0 || pool_kernel == 0) {
        throw std::invalid_argument("SnapKV pool kernel must be odd");
    }
    if (attn_obs.rows() != obs_window) {
        throw std::invalid_argument("attn_obs row count must equal obs_window");
    }
    const std::size_t seq = attn_obs.cols();
    if (budget < obs_window) {
        throw std::invalid_argument("budget must cover the observation window");
    }
    if (budget > seq) budget = seq;

    const std::size_t prefix = seq - std::min(obs_window, seq);
    std::vector<double> votes(prefix, 0.0);
    for (std::size_t i = 0; i < obs_window; ++i) {
        for (std::size_t j = 0; j < prefix; ++j) {
            votes[j] += attn_obs.at(i, j);
        }
    }

    // Same-length 1-D max pool with clamped borders.
    const std::size_t half = (pool_kernel - 1) / 2;
    std::vector<double> pooled(prefix, 0.0);
    for (std::size_t j = 0; j < prefix; ++j) {
        const std::size_t lo = j >= half ? j - half : 0;
        const std::size_t hi = std::min(prefix - 1, j + half);
        double mx = votes[lo];
        for (std::size_t k = lo + 1; k <= hi; ++k) mx = std::max(mx, votes[k]);
        pooled[j] = mx;
    }

    const std::size_t prefix_quota = budget > obs_window ? budget - obs_window : 0;
    std::vector<std::size_t> kept = top_positions(pooled, prefix_quota);
    for (std::size_t j = prefix; j < seq; ++j) kept.push_back(j);
    return kept;
}

}  // namespace kvtrim
