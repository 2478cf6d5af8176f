#include "kvtrim/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kvtrim {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw std::invalid_argument("ragged initializer rows");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = values.size();
    }
    if (values.size() != cols_) {
        throw std::invalid_argument("appended row has length " + std::to_string(values.size()) +
                                    ", expected " + std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void Matrix::drop_front_rows(std::size_t count) {
    if (count > rows_) {
        throw std::invalid_argument("cannot drop more rows than present");
    }
    data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(count * cols_));
    rows_ -= count;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous over b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

Matrix row_softmax(const Matrix& a, double scale) {
    if (a.empty()) {
        throw std::invalid_argument("row_softmax on empty matrix");
    }
    if (!(scale > 0.0)) {
        throw std::invalid_argument("row_softmax scale must be positive");
    }
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double mx = a.at(i, 0) / scale;
        for (std::size_t j = 1; j < a.cols(); ++j) {
            mx = std::max(mx, a.at(i, j) / scale);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double e = std::exp(a.at(i, j) / scale - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out.at(i, j) /= sum;
        }
    }
    return out;
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double v : a.data()) sum += v * v;
    return std::sqrt(sum);
}

Matrix gather_cols(const Matrix& a, std::span<const std::size_t> indices) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= a.cols()) {
            throw std::out_of_range("gather_cols index " + std::to_string(indices[i]) +
                                    " out of range for " + std::to_string(a.cols()) + " columns");
        }
        if (i > 0 && indices[i] <= indices[i - 1]) {
            throw std::invalid_argument("gather_cols indices must be strictly ascending");
        }
    }
    Matrix out(a.rows(), indices.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < indices.size(); ++j) {
            out.at(i, j) = a.at(i, indices[j]);
        }
    }
    return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= a.rows()) {
            throw std::out_of_range("gather_rows index out of range");
        }
        if (i > 0 && indices[i] <= indices[i - 1]) {
            throw std::invalid_argument("gather_rows indices must be strictly ascending");
        }
    }
    Matrix out(indices.size(), a.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out.at(i, j) = a.at(indices[i], j);
        }
    }
    return out;
}

bool all_finite(const Matrix& a) {
    for (double v : a.data()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace kvtrim
