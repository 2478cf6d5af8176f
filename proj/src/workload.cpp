#include "kvtrim/workload.hpp"

#include <cmath>
#include <stdexcept>

namespace kvtrim {

namespace {

double unit_uniform(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// splitmix64 finalizer; decorrelates per-pipeline seeds.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Matrix gaussian_matrix(GaussianSource& src, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m.at(i, j) = src.next();
        }
    }
    return m;
}

}  // namespace

void WorkloadSpec::validate() const {
    if (s_prefill == 0) {
        throw std::invalid_argument("s_prefill must be positive");
    }
    if (generator == Generator::LowRank && rank == 0) {
        throw std::invalid_argument("low-rank workloads need rank >= 1");
    }
}

double GaussianSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Marsaglia polar method: only sqrt and log touch libm.
    double u, v, s;
    do {
        u = 2.0 * unit_uniform(engine_) - 1.0;
        v = 2.0 * unit_uniform(engine_) - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

HeadWorkload make_head_workload(const WorkloadSpec& spec, std::uint32_t head_dim,
                                std::uint32_t layer, std::uint32_t head) {
    spec.validate();
    if (head_dim == 0) {
        throw std::invalid_argument("head_dim must be positive");
    }
    GaussianSource src(mix(spec.seed + mix(static_cast<std::uint64_t>(layer) << 32 | head)));

    HeadWorkload w;
    const std::size_t total = spec.s_prefill + spec.decode_steps;

    if (spec.generator == Generator::Gaussian) {
        w.prefill_q = gaussian_matrix(src, spec.s_prefill, head_dim);
        w.prefill_k = gaussian_matrix(src, spec.s_prefill, head_dim);
        w.prefill_v = gaussian_matrix(src, spec.s_prefill, head_dim);
        w.decode_q = gaussian_matrix(src, spec.decode_steps, head_dim);
        w.decode_k = gaussian_matrix(src, spec.decode_steps, head_dim);
        w.decode_v = gaussian_matrix(src, spec.decode_steps, head_dim);
        return w;
    }

    // LowRank: the first `rank` tokens carry orthogonal one-hot keys; every
    // query points hard at anchor (i mod rank), so each causal softmax row
    // is numerically one-hot and the attention matrix has `rank` distinct
    // rows. The logit gap of 80 leaves contamination around exp(-80).
    const std::uint32_t rank =
        std::min<std::uint32_t>(spec.rank, std::min<std::uint32_t>(spec.s_prefill, head_dim));
    const double gap = 80.0 * std::sqrt(static_cast<double>(head_dim));

    Matrix q(total, head_dim);
    Matrix k(total, head_dim);
    for (std::size_t i = 0; i < total; ++i) {
        q.at(i, i % rank) = gap;
        if (i < rank) k.at(i, i) = 1.0;
    }
    Matrix v = gaussian_matrix(src, total, head_dim);

    auto split = [&](const Matrix& m, Matrix& pre, Matrix& dec) {
        pre = Matrix(spec.s_prefill, head_dim);
        dec = Matrix(spec.decode_steps, head_dim);
        for (std::size_t i = 0; i < total; ++i) {
            for (std::size_t j = 0; j < head_dim; ++j) {
                if (i < spec.s_prefill) {
                    pre.at(i, j) = m.at(i, j);
                } else {
                    dec.at(i - spec.s_prefill, j) = m.at(i, j);
                }
            }
        }
    };
    split(q, w.prefill_q, w.decode_q);
    split(k, w.prefill_k, w.decode_k);
    split(v, w.prefill_v, w.decode_v);
    return w;
}

}  // namespace kvtrim
