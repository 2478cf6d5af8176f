#include "kvtrim/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kvtrim {

namespace {

// Walks elements in quantization order: down each column for Channel axis,
// across each row for Token axis.
template <typename Fn>
void for_each_in_group_order(std::uint32_t rows, std::uint32_t cols, QuantAxis axis, Fn&& fn) {
    if (axis == QuantAxis::Channel) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            for (std::uint32_t r = 0; r < rows; ++r) fn(r, c);
        }
    } else {
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) fn(r, c);
        }
    }
}

class BitWriter {
public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void push(std::uint32_t code, std::uint32_t bits) {
        for (std::uint32_t i = 0; i < bits; ++i) {
            if (bit_ == 0) out_.push_back(0);
            if ((code >> i) & 1u) out_.back() |= static_cast<std::uint8_t>(1u << bit_);
            bit_ = (bit_ + 1) % 8;
        }
    }

private:
    std::vector<std::uint8_t>& out_;
    std::uint32_t bit_ = 0;
};

class BitReader {
public:
    explicit BitReader(const std::vector<std::uint8_t>& in) : in_(in) {}

    std::uint32_t pull(std::uint32_t bits) {
        std::uint32_t code = 0;
        for (std::uint32_t i = 0; i < bits; ++i) {
            code |= static_cast<std::uint32_t>((in_[pos_ / 8] >> (pos_ % 8)) & 1u) << i;
            ++pos_;
        }
        return code;
    }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

}  // namespace

QuantizedBlock quantize(const Matrix& x, std::uint32_t bits, std::uint32_t group_size,
                        QuantAxis axis) {
    if (bits != 2 && bits != 4) {
        throw std::invalid_argument("quantize supports 2 or 4 bits");
    }
    if (group_size == 0) {
        throw std::invalid_argument("group_size must be positive");
    }

    QuantizedBlock q;
    q.bits = bits;
    q.group_size = group_size;
    q.axis = axis;
    q.rows = static_cast<std::uint32_t>(x.rows());
    q.cols = static_cast<std::uint32_t>(x.cols());

    // Flatten into group order once, then quantize group by group.
    std::vector<double> flat;
    flat.reserve(x.rows() * x.cols());
    for_each_in_group_order(q.rows, q.cols, axis,
                            [&](std::uint32_t r, std::uint32_t c) { flat.push_back(x.at(r, c)); });

    const std::uint32_t levels = (1u << bits) - 1u;
    BitWriter writer(q.packed);
    // Groups never straddle a line (a column for Channel, a row for Token);
    // the last group of each line may be short.
    const std::size_t line_len = axis == QuantAxis::Channel ? q.rows : q.cols;
    const std::size_t line_count = axis == QuantAxis::Channel ? q.cols : q.rows;
    for (std::size_t line = 0; line < line_count; ++line) {
        for (std::size_t start = 0; start < line_len; start += group_size) {
            const std::size_t len = std::min<std::size_t>(group_size, line_len - start);
            const double* g = flat.data() + line * line_len + start;
            double lo = g[0], hi = g[0];
            for (std::size_t i = 1; i < len; ++i) {
                lo = std::min(lo, g[i]);
                hi = std::max(hi, g[i]);
            }
            const double scale = (hi - lo) / static_cast<double>(levels);
            q.scales.push_back(scale);
            q.zero_points.push_back(lo);
            for (std::size_t i = 0; i < len; ++i) {
                std::uint32_t code = 0;
                if (scale > 0.0) {
                    const double c = std::round((g[i] - lo) / scale);
                    code = static_cast<std::uint32_t>(
                        std::clamp(c, 0.0, static_cast<double>(levels)));
                }
                writer.push(code, bits);
            }
        }
    }
    return q;
}

Matrix dequantize(const QuantizedBlock& q) {
    const std::uint64_t elems = q.element_count();
    if (q.packed.size() != (elems * q.bits + 7) / 8) {
        throw std::runtime_error("quantized block has a corrupt packed length");
    }
    const std::size_t line_len = q.axis == QuantAxis::Channel ? q.rows : q.cols;
    const std::size_t line_count = q.axis == QuantAxis::Channel ? q.cols : q.rows;
    const std::size_t groups_per_line = line_len == 0 ? 0 : (line_len + q.group_size - 1) / q.group_size;
    if (q.scales.size() != line_count * groups_per_line ||
        q.zero_points.size() != q.scales.size()) {
        throw std::runtime_error("quantized block has a corrupt group count");
    }

    std::vector<double> flat(elems);
    BitReader reader(q.packed);
    for (std::size_t line = 0; line < line_count; ++line) {
        for (std::size_t start = 0; start < line_len; start += q.group_size) {
            const std::size_t len = std::min<std::size_t>(q.group_size, line_len - start);
            const std::size_t group = line * groups_per_line + start / q.group_size;
            for (std::size_t i = 0; i < len; ++i) {
                const std::uint32_t code = reader.pull(q.bits);
                flat[line * line_len + start + i] =
                    static_cast<double>(code) * q.scales[group] + q.zero_points[group];
            }
        }
    }

    Matrix out(q.rows, q.cols);
    std::size_t pos = 0;
    for_each_in_group_order(q.rows, q.cols, q.axis,
                            [&](std::uint32_t r, std::uint32_t c) { out.at(r, c) = flat[pos++]; });
    return out;
}

QuantizedBlock prune_then_quantize(const Matrix& keys, const ChannelMask& mask,
                                   std::uint32_t bits, std::uint32_t group_size) {
    if (mask.dim() != keys.cols()) {
        throw std::invalid_argument("mask dim does not match key channel count");
    }
    const auto kept = mask.kept_indices();
    return quantize(gather_cols(keys, kept), bits, group_size, QuantAxis::Channel);
}

}  // namespace kvtrim
