#pragma once

#include <cstdint>
#include <cstring>

namespace kvtrim {

// IEEE 754 binary16 conversion used by the cache snapshot format. Round to
// nearest even on the way down; exact on the way up.
inline std::uint16_t f32_to_f16(float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::int32_t exponent = static_cast<std::int32_t>((bits >> 23) & 0xFF) - 127 + 15;
    std::uint32_t mantissa = bits & 0x7FFFFFu;

    if (exponent <= 0) {
        if (exponent < -10) {
            return static_cast<std::uint16_t>(sign);  // underflow to signed zero
        }
        mantissa |= 0x800000u;
        const int shift = 14 - exponent;
        const std::uint32_t rounded = (mantissa + (1u << (shift - 1)) +
                                       ((mantissa >> shift) & 1u) - 1u) >> shift;
        return static_cast<std::uint16_t>(sign | rounded);
    }
    if (exponent >= 31) {
        // Inf, or NaN with the top mantissa bit forced on.
        if (((bits >> 23) & 0xFF) == 0xFF && mantissa != 0) {
            return static_cast<std::uint16_t>(sign | 0x7E00u);
        }
        return static_cast<std::uint16_t>(sign | 0x7C00u);
    }
    const std::uint32_t lsb = (mantissa >> 13) & 1u;
    std::uint32_t half = sign | (static_cast<std::uint32_t>(exponent) << 10) | (mantissa >> 13);
    if ((mantissa & 0x1FFFu) > 0x1000u || ((mantissa & 0x1FFFu) == 0x1000u && lsb)) {
        ++half;  // may carry into the exponent, which is the correct rounding
    }
    return static_cast<std::uint16_t>(half);
}

inline float f16_to_f32(std::uint16_t half) {
    const std::uint32_t sign = static_cast<std::uint32_t>(half & 0x8000u) << 16;
    const std::uint32_t exponent = (half >> 10) & 0x1Fu;
    const std::uint32_t mantissa = half & 0x3FFu;

    std::uint32_t bits;
    if (exponent == 0) {
        if (mantissa == 0) {
            bits = sign;
        } else {
            // subnormal: normalize
            int e = -1;
            std::uint32_t m = mantissa;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400u) == 0);
            bits = sign | static_cast<std::uint32_t>(127 - 15 - e) << 23 | ((m & 0x3FFu) << 13);
        }
    } else if (exponent == 31) {
        bits = sign | 0x7F800000u | (mantissa << 13);
    } else {
        bits = sign | ((exponent - 15 + 127) << 23) | (mantissa << 13);
    }
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

inline std::uint16_t f64_to_f16(double value) { return f32_to_f16(static_cast<float>(value)); }
inline double f16_to_f64(std::uint16_t half) { return static_cast<double>(f16_to_f32(half)); }

}  // namespace kvtrim
