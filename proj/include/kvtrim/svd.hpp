#pragma once

#include <vector>

#include "kvtrim/matrix.hpp"

namespace kvtrim {

// Singular values of a, descending, length min(rows, cols). One-sided Jacobi
// on the columns (values only, no vectors); sweeps until every column pair
// satisfies |a_i . a_j| < 1e-10 * ||a_i|| * ||a_j||. Throws std::runtime_error
// with the sweep count if the cap is hit.
std::vector<double> svd_values(const Matrix& a);

}  // namespace kvtrim
