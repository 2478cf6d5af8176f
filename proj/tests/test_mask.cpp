#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "kvtrim/channel_mask.hpp"

using namespace kvtrim;

TEST_CASE("construction and lookup") {
    const std::vector<std::size_t> kept{0, 2, 5};
    const ChannelMask m(8, kept);
    CHECK(m.dim() == 8);
    CHECK(m.kept_count() == 3);
    CHECK(m.contains(0));
    CHECK(!m.contains(1));
    CHECK(m.contains(2));
    CHECK(m.contains(5));
    CHECK(!m.contains(7));
    CHECK(m.kept_indices() == kept);
}

TEST_CASE("serialized size is ceil(D/8) bytes") {
    CHECK(ChannelMask::full(8).serialized_size() == 1);
    CHECK(ChannelMask::full(9).serialized_size() == 2);
    CHECK(ChannelMask::full(128).serialized_size() == 16);
    CHECK(ChannelMask::full(77).serialized_size() == 10);
}

TEST_CASE("serialization round-trips bit-exactly") {
    std::mt19937 rng(5);
    for (std::size_t dim : {1u, 7u, 8u, 9u, 64u, 77u, 128u}) {
        std::vector<std::size_t> kept;
        for (std::size_t d = 0; d < dim; ++d) {
            if (rng() % 2 == 0) kept.push_back(d);
        }
        if (kept.empty()) kept.push_back(0);
        const ChannelMask m(dim, kept);
        const ChannelMask copy = ChannelMask::deserialize(dim, m.bytes());
        CHECK(copy == m);
        CHECK(copy.kept_indices() == kept);
    }
}

TEST_CASE("full mask") {
    const ChannelMask m = ChannelMask::full(6);
    CHECK(m.is_full());
    CHECK(m.kept_count() == 6);
}

TEST_CASE("construction errors") {
    const std::vector<std::size_t> out_of_range{4};
    const std::vector<std::size_t> unsorted{2, 1};
    CHECK_THROWS_AS(ChannelMask(4, out_of_range), std::out_of_range);
    CHECK_THROWS_AS(ChannelMask(4, unsorted), std::invalid_argument);
}

TEST_CASE("deserialize rejects stray bits and bad lengths") {
    const std::vector<std::uint8_t> stray{0xFF};  // bit 5..7 set for dim 5
    CHECK_THROWS_AS(ChannelMask::deserialize(5, stray), std::invalid_argument);
    const std::vector<std::uint8_t> short_buf{0x01};
    CHECK_THROWS_AS(ChannelMask::deserialize(9, short_buf), std::invalid_argument);
}
