#pragma once

#include <cstddef>
#include <vector>

#include "kvtrim/channel_mask.hpp"
#include "kvtrim/matrix.hpp"

namespace kvtrim {

enum class Criterion { L1, L2, QueryDriven, ValueDriven };

struct ChannelScores {
    Criterion criterion = Criterion::L2;
    std::vector<double> values;  // one non-negative score per channel

    std::size_t dim() const { return values.size(); }
};

// score[d] = l_p norm of key column d (p is 1 or 2).
ChannelScores score_magnitude(const Matrix& keys, int p);

// score[j] = ||Q[-obs_window:, j]|| * ||K[:, j]||, the closed form of the
// Frobenius norm of the rank-1 interaction Q[-w:, j] K[:, j]^T. Queries and
// keys may have different row counts (keys cover all retained tokens, the
// query window covers only the tail; with grouped queries the rows of all
// group members are simply concatenated).
ChannelScores score_query_driven(const Matrix& queries, const Matrix& keys,
                                 std::size_t obs_window);

// score[j] = || softmax(Q[-obs_window:] K^T / scale) V[:, j] ||. The softmax
// scale is sqrt(D) at the call sites.
ChannelScores score_value_driven(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                 std::size_t obs_window, double scale);

// Keeps the T highest-scoring channels; equal scores break toward the lower
// channel index. 1 <= T <= D.
ChannelMask select_top_t(const ChannelScores& scores, std::size_t keep);

// || Q K^T - Q_S (K_S)^T ||_F for the channels kept by `mask` (the pruned
// attention-weight residual both the greedy criterion and the exhaustive
// oracle minimize).
double attention_residual(const Matrix& queries, const Matrix& keys, const ChannelMask& mask);

struct SubsetSearchResult {
    ChannelMask mask;
    double loss = 0.0;
};

// Exhaustive minimizer of attention_residual over all C(D, T) channel
// subsets; ties resolve to the lexicographically smallest kept-index set.
// Guarded to D <= 20.
SubsetSearchResult oracle_best_subset(const Matrix& queries, const Matrix& keys,
                                      std::size_t keep);

}  // namespace kvtrim
