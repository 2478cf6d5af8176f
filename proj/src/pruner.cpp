#include "kvtrim/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace kvtrim {

namespace {
double column_norm(const Matrix& m, std::size_t col, std::size_t first_row) {
    double sum = 0.0;
    for (std::size_t r = first_row; r < m.rows(); ++r) {
        sum += m.at(r, col) * m.at(r, col);
    }
    return std::sqrt(sum);
}
}  // namespace

ChannelScores score_magnitude(const Matrix& keys, int p) {
    if (keys.empty()) {
        throw std::invalid_argument("score_magnitude on empty keys");
    }
    if (p != 1 && p != 2) {
        throw std::invalid_argument("score_magnitude supports p = 1 or 2");
    }
    ChannelScores out;
    out.criterion = p == 1 ? Criterion::L1 : Criterion::L2;
    out.values.resize(keys.cols());
    for (std::size_t j = 0; j < keys.cols(); ++j) {
        if (p == 1) {
            double s = 0.0;
            for (std::size_t r = 0; r < keys.rows(); ++r) s += std::abs(keys.at(r, j));
            out.values[j] = s;
        } else {
            out.values[j] = column_norm(keys, j, 0);
        }
    }
    return out;
}

ChannelScores score_query_driven(const Matrix& queries, const Matrix& keys,
                                 std::size_t obs_window) {
    if (obs_window == 0 || obs_window > queries.rows()) {
        throw std::invalid_argument("obs_window must lie in [1, queries.rows]");
    }
    if (queries.cols() != keys.cols()) {
        throw std::invalid_argument("queries and keys disagree on channel count");
    }
    ChannelScores out;
    out.criterion = Criterion::QueryDriven;
    out.values.resize(keys.cols());
    const std::size_t first = queries.rows() - obs_window;
    for (std::size_t j = 0; j < keys.cols(); ++j) {
        out.values[j] = column_norm(queries, j, first) * column_norm(keys, j, 0);
    }
    return out;
}

ChannelScores score_value_driven(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                 std::size_t obs_window, double scale) {
    if (obs_window == 0 || obs_window > queries.rows()) {
        throw std::invalid_argument("obs_window must lie in [1, queries.rows]");
    }
    if (queries.cols() != keys.cols() || keys.rows() != values.rows()) {
        throw std::invalid_argument("query/key/value shapes are inconsistent");
    }
    Matrix window(obs_window, queries.cols());
    const std::size_t first = queries.rows() - obs_window;
    for (std::size_t r = 0; r < obs_window; ++r) {
        for (std::size_t c = 0; c < queries.cols(); ++c) {
            window.at(r, c) = queries.at(first + r, c);
        }
    }
    const Matrix attn = row_softmax(matmul(window, transpose(keys)), scale);
    const Matrix weighted = matmul(attn, values);

    ChannelScores out;
    out.criterion = Criterion::ValueDriven;
    out.values.resize(values.cols());
    for (std::size_t j = 0; j < values.cols(); ++j) {
        out.values[j] = column_norm(weighted, j, 0);
    }
    return out;
}

ChannelMask select_top_t(const ChannelScores& scores, std::size_t keep) {
    const std::size_t dim = scores.dim();
    if (keep < 1 || keep > dim) {
        throw std::invalid_argument("select_top_t keep count " + std::to_string(keep) +
                                    " out of range for dim " + std::to_string(dim));
    }
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
        return a < b;
    });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return ChannelMask(dim, order);
}

double attention_residual(const Matrix& queries, const Matrix& keys, const ChannelMask& mask) {
    if (queries.cols() != keys.cols() || mask.dim() != keys.cols()) {
        throw std::invalid_argument("attention_residual shape mismatch");
    }
    const Matrix full = matmul(queries, transpose(keys));
    const auto kept = mask.kept_indices();
    const Matrix pruned = matmul(gather_cols(queries, kept), transpose(gather_cols(keys, kept)));
    double sum = 0.0;
    for (std::size_t i = 0; i < full.rows(); ++i) {
        for (std::size_t j = 0; j < full.cols(); ++j) {
            const double d = full.at(i, j) - pruned.at(i, j);
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

SubsetSearchResult oracle_best_subset(const Matrix& queries, const Matrix& keys,
                                      std::size_t keep) {
    const std::size_t dim = keys.cols();
    if (dim > 20) {
        throw std::invalid_argument("oracle_best_subset is limited to D <= 20 (got " +
                                    std::to_string(dim) + ")");
    }
    if (keep < 1 || keep > dim) {
        throw std::invalid_argument("oracle keep count out of range");
    }

    // Enumerate ascending index vectors in lexicographic order; a strict
    // improvement rule then yields the lexicographically smallest tie winner.
    std::vector<std::size_t> combo(keep);
    std::iota(combo.begin(), combo.end(), 0);

    SubsetSearchResult best;
    bool have_best = false;
    while (true) {
        ChannelMask mask(dim, combo);
        const double loss = attention_residual(queries, keys, mask);
        if (!have_best || loss < best.loss) {
            best = {std::move(mask), loss};
            have_best = true;
        }

        // next combination
        std::size_t i = keep;
        while (i > 0) {
            --i;
            if (combo[i] != i + dim - keep) {
                ++combo[i];
                for (std::size_t j = i + 1; j < keep; ++j) combo[j] = combo[j - 1] + 1;
                break;
            }
            if (i == 0) return best;
        }
    }
}

}  // namespace kvtrim
