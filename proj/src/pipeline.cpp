#include "kvtrim/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace kvtrim {

void QuantSpec::validate() const {
    if (bits_k != 2 && bits_k != 4) {
        throw std::invalid_argument("bits_k must be 2 or 4");
    }
    if (bits_v != 2 && bits_v != 4) {
        throw std::invalid_argument("bits_v must be 2 or 4");
    }
    if (group_size == 0) {
        throw std::invalid_argument("group_size must be positive");
    }
}

ReferenceTracker::ReferenceTracker(ChannelMask key_mask, ChannelMask value_mask)
    : key_mask_(std::move(key_mask)), value_mask_(std::move(value_mask)) {}

void ReferenceTracker::set_prefill(Matrix retained_keys, Matrix retained_values,
                                   std::size_t frozen_rows) {
    keys_ = std::move(retained_keys);
    values_ = std::move(retained_values);
    frozen_rows_ = frozen_rows;
}

void ReferenceTracker::append(std::span<const double> key_row,
                              std::span<const double> value_row) {
    keys_.append_row(key_row);
    values_.append_row(value_row);
}

void ReferenceTracker::freeze_to(std::size_t frozen_rows) {
    if (frozen_rows < frozen_rows_ || frozen_rows > keys_.rows()) {
        throw std::invalid_argument("reference frozen row count out of range");
    }
    frozen_rows_ = frozen_rows;
}

std::vector<double> ReferenceTracker::decode_reference(std::span<const double> query_row) const {
    const std::size_t dim = keys_.cols();
    if (query_row.size() != dim) {
        throw std::invalid_argument("reference query length mismatch");
    }
    const double scale = std::sqrt(static_cast<double>(dim));
    const std::size_t tokens = keys_.rows();

    std::vector<double> logits(tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
        double dot = 0.0;
        if (t < frozen_rows_ && !key_mask_.is_full()) {
            for (std::size_t d = 0; d < dim; ++d) {
                if (key_mask_.contains(d)) dot += query_row[d] * keys_.at(t, d);
            }
        } else {
            for (std::size_t d = 0; d < dim; ++d) dot += query_row[d] * keys_.at(t, d);
        }
        logits[t] = dot / scale;
    }

    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }

    const auto kept = value_mask_.kept_indices();
    std::vector<double> out(kept.size(), 0.0);
    for (std::size_t t = 0; t < tokens; ++t) {
        const double w = logits[t] / sum;
        for (std::size_t j = 0; j < kept.size(); ++j) {
            out[j] += w * values_.at(t, kept[j]);
        }
    }
    return out;
}

HeadPipeline::HeadPipeline(const CacheConfig& cfg, EvictionPolicy policy,
                           Criterion key_criterion, std::optional<QuantSpec> quant)
    : cfg_(cfg),
      policy_(policy),
      key_criterion_(key_criterion),
      quant_(quant),
      keys_(cfg.head_dim),
      values_(cfg.head_dim) {
    cfg_.validate();
    policy_.validate();
    if (quant_) quant_->validate();
    if (key_criterion_ == Criterion::ValueDriven) {
        throw std::invalid_argument("the value-driven score applies to the value cache");
    }
}

Matrix HeadPipeline::prefill(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (prefilled_) {
        throw std::runtime_error("prefill may only run once per pipeline");
    }
    const std::size_t seq = q.rows();
    const std::size_t dim = cfg_.head_dim;
    if (q.cols() != dim || k.cols() != dim || v.cols() != dim || k.rows() != seq ||
        v.rows() != seq) {
        throw std::invalid_argument("prefill tensors must all be S x D");
    }

    // Full uncompressed forward pass; its output is returned unchanged.
    const Matrix weights = causal_attention_weights(q, k);
    const Matrix output = matmul(weights, v);
    const std::uint64_t visible = seq * (seq + 1) / 2;
    flops_.prefill_attention += 2 * visible * dim + 4 * visible + 2 * visible * dim;

    // The channel scores and the recent segment use the cache's observation
    // window; the eviction vote uses the policy's own window.
    const std::size_t window = std::min<std::size_t>(cfg_.obs_window, seq);
    const std::size_t evict_window = std::min<std::size_t>(policy_.obs_window, seq);
    const std::size_t budget = std::min<std::size_t>(policy_.kind == PolicyKind::None
                                                         ? seq
                                                         : policy_.kv_budget,
                                                     seq);

    retained_.clear();
    switch (policy_.kind) {
        case PolicyKind::None:
            for (std::size_t i = 0; i < seq; ++i) retained_.push_back(i);
            break;
        case PolicyKind::H2O:
            retained_ = evict_h2o(weights, budget, std::min<std::size_t>(evict_window, budget));
            break;
        case PolicyKind::SnapKV: {
            Matrix obs(evict_window, seq);
            for (std::size_t i = 0; i < evict_window; ++i) {
                for (std::size_t j = 0; j < seq; ++j) {
                    obs.at(i, j) = weights.at(seq - evict_window + i, j);
                }
            }
            retained_ = evict_snapkv(obs, std::max<std::size_t>(budget, evict_window),
                                     evict_window, policy_.pool_kernel);
            break;
        }
    }

    const Matrix retained_keys = gather_rows(k, retained_);
    const Matrix retained_values = gather_rows(v, retained_);
    const std::size_t n_ret = retained_.size();

    // Channel masks come from the prefill scores and stay fixed afterwards.
    const std::size_t keep_k = kept_channels(cfg_.key_prune_ratio, dim);
    if (keep_k == dim) {
        key_mask_ = ChannelMask::full(dim);
    } else {
        ChannelScores scores;
        switch (key_criterion_) {
            case Criterion::L1:
                scores = score_magnitude(retained_keys, 1);
                flops_.scoring += 2 * n_ret * dim;
                break;
            case Criterion::L2:
                scores = score_magnitude(retained_keys, 2);
                flops_.scoring += 2 * n_ret * dim;
                break;
            default:
                scores = score_query_driven(q, retained_keys, window);
                flops_.scoring += 2 * (window + n_ret) * dim + dim;
                break;
        }
        key_mask_ = select_top_t(scores, keep_k);
    }

    const std::size_t keep_v = kept_channels(cfg_.value_prune_ratio, dim);
    if (keep_v == dim) {
        value_mask_ = ChannelMask::full(dim);
    } else {
        const ChannelScores vscores = score_value_driven(q, retained_keys, retained_values,
                                                         window,
                                                         std::sqrt(static_cast<double>(dim)));
        flops_.scoring += 4 * window * n_ret * dim + 4 * window * n_ret;
        value_mask_ = select_top_t(vscores, keep_v);
    }

    // Retained tokens older than the observation window freeze immediately;
    // the window itself stays unpruned in the recent segment.
    const std::size_t recent_rows = std::min<std::size_t>(window, n_ret);
    const std::size_t frozen_rows = n_ret - recent_rows;
    for (std::size_t r = 0; r < frozen_rows; ++r) {
        keys_.append(retained_keys.row(r));
        values_.append(retained_values.row(r));
    }
    if (frozen_rows > 0) {
        freeze_caches();
    }
    for (std::size_t r = frozen_rows; r < n_ret; ++r) {
        keys_.append(retained_keys.row(r));
        values_.append(retained_values.row(r));
    }

    reference_ = ReferenceTracker(key_mask_, value_mask_);
    reference_.set_prefill(retained_keys, retained_values, frozen_rows);

    prefilled_ = true;
    return output;
}

std::vector<double> HeadPipeline::decode_step(std::span<const double> query_row,
                                              std::span<const double> key_row,
                                              std::span<const double> value_row) {
    if (!prefilled_) {
        throw std::runtime_error("decode_step before prefill");
    }
    const std::size_t dim = cfg_.head_dim;
    if (query_row.size() != dim || key_row.size() != dim || value_row.size() != dim) {
        throw std::invalid_argument("decode rows must have length D");
    }

    const Matrix& pruned_k = keys_.pruned();
    const Matrix& recent_k = keys_.recent();
    const std::size_t n_p = pruned_k.rows();
    const std::size_t n_r = recent_k.rows();
    const std::size_t tokens = n_p + n_r;
    if (tokens == 0) {
        throw std::runtime_error("decode_step on an empty cache");
    }

    // The sqrt(D) scale uses the full head dim for both segments; the pruned
    // logits approximate the full-width product, not a T-dim one.
    const double scale = std::sqrt(static_cast<double>(dim));
    const auto kept_k = key_mask_.kept_indices();

    std::vector<double> logits(tokens);
    for (std::size_t t = 0; t < n_p; ++t) {
        double dot = 0.0;
        for (std::size_t j = 0; j < kept_k.size(); ++j) {
            dot += query_row[kept_k[j]] * pruned_k.at(t, j);
        }
        logits[t] = dot / scale;
    }
    for (std::size_t t = 0; t < n_r; ++t) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            dot += query_row[d] * recent_k.at(t, d);
        }
        logits[n_p + t] = dot / scale;
    }
    flops_.decode_attention += 2 * (n_p * kept_k.size() + n_r * dim);

    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    flops_.decode_attention += 4 * tokens;

    const Matrix& pruned_v = values_.pruned();
    const Matrix& recent_v = values_.recent();
    const auto kept_v = value_mask_.kept_indices();
    std::vector<double> out(kept_v.size(), 0.0);
    for (std::size_t t = 0; t < n_p; ++t) {
        const double w = logits[t] / sum;
        for (std::size_t j = 0; j < kept_v.size(); ++j) {
            out[j] += w * pruned_v.at(t, j);
        }
    }
    for (std::size_t t = 0; t < n_r; ++t) {
        const double w = logits[n_p + t] / sum;
        for (std::size_t j = 0; j < kept_v.size(); ++j) {
            out[j] += w * recent_v.at(t, kept_v[j]);
        }
    }
    flops_.decode_attention += 2 * tokens * kept_v.size();

    keys_.append(key_row);
    values_.append(value_row);
    reference_.append(key_row, value_row);
    if (keys_.recent().rows() >= cfg_.residual_len) {
        freeze_caches();
        reference_.freeze_to(keys_.pruned().rows());
    }
    return out;
}

void HeadPipeline::freeze_caches() {
    std::function<Matrix(const Matrix&)> key_hook;
    std::function<Matrix(const Matrix&)> value_hook;
    if (quant_) {
        const QuantSpec qs = *quant_;
        key_hook = [qs](const Matrix& chunk) {
            return dequantize(quantize(chunk, qs.bits_k, qs.group_size, QuantAxis::Channel));
        };
        value_hook = [qs](const Matrix& chunk) {
            return dequantize(quantize(chunk, qs.bits_v, qs.group_size, QuantAxis::Token));
        };
    }
    keys_.freeze_recent(key_mask_, key_hook);
    values_.freeze_recent(value_mask_, value_hook);
}

}  // namespace kvtrim
