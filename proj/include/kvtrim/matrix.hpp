#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kvtrim {

// Dense row-major matrix of doubles. All cache tensors in this project are
// small (token count x head dim), so a plain contiguous buffer is enough.
// Arithmetic stays in f64 even though storage is modeled as f16; byte
// accounting lives in memory_model.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix zeros(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    // Appends one row; the vector length must equal cols (or the matrix must
    // be empty, in which case it adopts the row's width).
    void append_row(std::span<const double> values);

    // Rows [0, count) removed; the remainder shifts up.
    void drop_front_rows(std::size_t count);

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// result(i,j) = sum_k a(i,k) * b(k,j); throws std::invalid_argument on
// inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Softmax of each row of a / scale, computed with per-row max subtraction.
// Requires a non-empty and scale > 0.
Matrix row_softmax(const Matrix& a, double scale);

double frobenius_norm(const Matrix& a);

// Copies the listed columns, in order. Indices must be strictly ascending
// and in range; an empty list yields a rows x 0 matrix.
Matrix gather_cols(const Matrix& a, std::span<const std::size_t> indices);

// Row counterpart of gather_cols, used for token eviction.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices);

bool all_finite(const Matrix& a);

}  // namespace kvtrim
