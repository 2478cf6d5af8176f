#include "kvtrim/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kvtrim {

Matrix causal_attention_weights(const Matrix& q, const Matrix& k) {
    if (q.cols() != k.cols()) {
        throw std::invalid_argument("query/key channel mismatch");
    }
    if (q.rows() > k.rows()) {
        throw std::invalid_argument("more query rows than key rows");
    }
    if (q.empty() || k.rows() == 0) {
        throw std::invalid_argument("attention on empty inputs");
    }
    const double scale = std::sqrt(static_cast<double>(q.cols()));
    const std::size_t offset = k.rows() - q.rows();

    Matrix weights(q.rows(), k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const std::size_t visible = offset + i + 1;
        double mx = -std::numeric_limits<double>::infinity();
        std::vector<double> logits(visible);
        for (std::size_t j = 0; j < visible; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < q.cols(); ++d) dot += q.at(i, d) * k.at(j, d);
            logits[j] = dot / scale;
            mx = std::max(mx, logits[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < visible; ++j) {
            logits[j] = std::exp(logits[j] - mx);
            sum += logits[j];
        }
        for (std::size_t j = 0; j < visible; ++j) {
            weights.at(i, j) = logits[j] / sum;
        }
    }
    return weights;
}

Matrix dense_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (k.rows() != v.rows()) {
        throw std::invalid_argument("key/value token mismatch");
    }
    return matmul(causal_attention_weights(q, k), v);
}

}  // namespace kvtrim
