#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kvtrim {

// Bit-packed set of kept channels for one head: the diagonal 0/1 selection
// matrix, stored as ceil(D/8) bytes. Channel d maps to bit (d % 8) of byte
// (d / 8), LSB first.
class ChannelMask {
public:
    ChannelMask() = default;

    // kept must be strictly ascending, every index < dim.
    ChannelMask(std::size_t dim, std::span<const std::size_t> kept);

    static ChannelMask full(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::size_t kept_count() const { return kept_count_; }
    bool is_full() const { return kept_count_ == dim_; }
    bool contains(std::size_t channel) const;

    // Ascending kept-channel indices; this fixes the column order of every
    // pruned tensor.
    std::vector<std::size_t> kept_indices() const;

    std::size_t serialized_size() const { return bits_.size(); }
    std::span<const std::uint8_t> bytes() const { return bits_; }

    static ChannelMask deserialize(std::size_t dim, std::span<const std::uint8_t> bytes);

    bool operator==(const ChannelMask& other) const = default;

private:
    std::size_t dim_ = 0;
    std::size_t kept_count_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace kvtrim
