#pragma once

#include <cstdint>
#include <vector>

#include "kvtrim/channel_mask.hpp"
#include "kvtrim/matrix.hpp"

namespace kvtrim {

enum class QuantAxis { Channel, Token };

// Asymmetric group-quantized matrix. Keys are grouped down each channel
// (axis Channel), values across each token row (axis Token). Codes are one
// continuous LSB-first bit stream in group order, so the packed length is
// exactly ceil(elements * bits / 8).
struct QuantizedBlock {
    std::uint32_t bits = 4;        // 2 or 4
    std::uint32_t group_size = 32;
    QuantAxis axis = QuantAxis::Channel;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> packed;
    std::vector<double> scales;       // (max - min) / (2^bits - 1) per group
    std::vector<double> zero_points;  // group minimum

    std::uint64_t element_count() const {
        return static_cast<std::uint64_t>(rows) * cols;
    }
    std::uint64_t group_count() const { return scales.size(); }

    // Payload plus per-group scale/zero stored as two f16 values.
    std::uint64_t storage_bytes() const {
        return packed.size() + group_count() * 4;
    }
};

// Per group: scale = (max - min) / (2^bits - 1), zero_point = min, code =
// round((x - min) / scale) clamped to [0, 2^bits - 1]. A constant group
// stores scale 0 and code 0 with zero_point equal to the value. Tail groups
// shorter than group_size are allowed; their codes are stored unpadded.
QuantizedBlock quantize(const Matrix& x, std::uint32_t bits, std::uint32_t group_size,
                        QuantAxis axis);

// code * scale + zero_point, original shape restored. Throws
// std::runtime_error when packed/scale lengths are inconsistent.
Matrix dequantize(const QuantizedBlock& q);

// quantize(gather_cols(keys, mask), bits, group_size, Channel), bit-exact.
QuantizedBlock prune_then_quantize(const Matrix& keys, const ChannelMask& mask,
                                   std::uint32_t bits, std::uint32_t group_size);

}  // namespace kvtrim
