#include "kvtrim/svd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kvtrim {

namespace {
constexpr double kOffDiagTol = 1e-10;
constexpr int kMaxSweeps = 64;
}  // namespace

std::vector<double> svd_values(const Matrix& a) {
    if (a.empty()) {
        throw std::invalid_argument("svd_values on empty matrix");
    }
    // Work on the tall orientation so columns are the short axis.
    Matrix m = a.rows() >= a.cols() ? a : transpose(a);
    const std::size_t n = m.cols();
    const std::size_t rows = m.rows();

    auto col_dot = [&](std::size_t p, std::size_t q) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += m.at(r, p) * m.at(r, q);
        return s;
    };

    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = col_dot(p, p);
                const double beta = col_dot(q, q);
                const double gamma = col_dot(p, q);
                if (alpha * beta == 0.0) continue;
                if (std::abs(gamma) < kOffDiagTol * std::sqrt(alpha * beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double vp = m.at(r, p);
                    const double vq = m.at(r, q);
                    m.at(r, p) = c * vp - s * vq;
                    m.at(r, q) = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }
    if (sweep == kMaxSweeps) {
        throw std::runtime_error("one-sided Jacobi did not converge after " +
                                 std::to_string(kMaxSweeps) + " sweeps");
    }

    std::vector<double> values(n);
    for (std::size_t j = 0; j < n; ++j) {
        values[j] = std::sqrt(col_dot(j, j));
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    return values;
}

}  // namespace kvtrim
