#include "kvtrim/channel_mask.hpp"

#include <stdexcept>
#include <string>

namespace kvtrim {

ChannelMask::ChannelMask(std::size_t dim, std::span<const std::size_t> kept)
    : dim_(dim), kept_count_(kept.size()), bits_((dim + 7) / 8, 0) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i] >= dim) {
            throw std::out_of_range("mask index " + std::to_string(kept[i]) +
                                    " out of range for dim " + std::to_string(dim));
        }
        if (i > 0 && kept[i] <= kept[i - 1]) {
            throw std::invalid_argument("mask indices must be strictly ascending");
        }
        bits_[kept[i] / 8] |= static_cast<std::uint8_t>(1u << (kept[i] % 8));
    }
}

ChannelMask ChannelMask::full(std::size_t dim) {
    std::vector<std::size_t> all(dim);
    for (std::size_t i = 0; i < dim; ++i) all[i] = i;
    return ChannelMask(dim, all);
}

bool ChannelMask::contains(std::size_t channel) const {
    if (channel >= dim_) return false;
    return (bits_[channel / 8] >> (channel % 8)) & 1u;
}

std::vector<std::size_t> ChannelMask::kept_indices() const {
    std::vector<std::size_t> out;
    out.reserve(kept_count_);
    for (std::size_t d = 0; d < dim_; ++d) {
        if (contains(d)) out.push_back(d);
    }
    return out;
}

ChannelMask ChannelMask::deserialize(std::size_t dim, std::span<const std::uint8_t> bytes) {
    if (bytes.size() != (dim + 7) / 8) {
        throw std::invalid_argument("mask byte length does not match dim");
    }
    ChannelMask m;
    m.dim_ = dim;
    m.bits_.assign(bytes.begin(), bytes.end());
    // Bits beyond dim must be zero; they would otherwise break popcount == T.
    for (std::size_t d = dim; d < m.bits_.size() * 8; ++d) {
        if ((m.bits_[d / 8] >> (d % 8)) & 1u) {
            throw std::invalid_argument("mask has bits set beyond dim");
        }
    }
    m.kept_count_ = 0;
    for (std::size_t d = 0; d < dim; ++d) {
        if (m.contains(d)) ++m.kept_count_;
    }
    return m;
}

}  // namespace kvtrim
