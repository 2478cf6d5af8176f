#pragma once

#include "kvtrim/matrix.hpp"

namespace kvtrim {

// softmax(q k^T / sqrt(D)) with causal masking. Query rows are aligned to
// the end of the key sequence: row i of an m-row query block attends to key
// positions [0, k.rows - m + i]. A single-row query therefore sees every
// key, which is the decode case.
Matrix causal_attention_weights(const Matrix& q, const Matrix& k);

// causal_attention_weights(q, k) * v.
Matrix dense_attention(const Matrix& q, const Matrix& k, const Matrix& v);

}  // namespace kvtrim
