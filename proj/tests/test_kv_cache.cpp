#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "kvtrim/fp16.hpp"
#include "kvtrim/kv_cache.hpp"
#include "oracles.hpp"

using namespace kvtrim;
namespace t = kvtrim::testing;

namespace {

CacheConfig small_config() {
    CacheConfig cfg;
    cfg.batch = 1;
    cfg.seq_len = 16;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.head_dim = 4;
    cfg.obs_window = 4;
    cfg.residual_len = 4;
    return cfg;
}

SegmentedCache cache_with_rows(const Matrix& rows) {
    SegmentedCache c(rows.cols());
    for (std::size_t r = 0; r < rows.rows(); ++r) c.append(rows.row(r));
    return c;
}

}  // namespace

TEST_CASE("append grows the recent segment only") {
    SegmentedCache c(4);
    const std::vector<double> row{1, 2, 3, 4};
    c.append(row);
    CHECK(c.recent().rows() == 1);
    CHECK(c.pruned().rows() == 0);
    CHECK(c.retained_tokens() == 1);
}

TEST_CASE("append preserves token order") {
    std::mt19937 rng(3);
    const Matrix rows = t::random_matrix(rng, 3, 4);
    const SegmentedCache c = cache_with_rows(rows);
    CHECK(c.recent() == rows);
}

TEST_CASE("append rejects wrong row length") {
    SegmentedCache c(4);
    const std::vector<double> row{1, 2, 3};
    CHECK_THROWS_AS(c.append(row), std::invalid_argument);
}

TEST_CASE("freeze with the full mask keeps the rows bit-exactly") {
    std::mt19937 rng(5);
    const Matrix rows = t::random_matrix(rng, 6, 4);
    SegmentedCache c = cache_with_rows(rows);
    c.freeze_recent(ChannelMask::full(4));
    CHECK(c.pruned() == rows);
    CHECK(c.recent().rows() == 0);
}

TEST_CASE("freeze gathers the masked channels") {
    const Matrix rows{{1, 2, 3, 4}, {5, 6, 7, 8}};
    SegmentedCache c = cache_with_rows(rows);
    const std::vector<std::size_t> kept{0, 2};
    c.freeze_recent(ChannelMask(4, kept));
    CHECK(c.pruned() == t::manual_gather_cols(rows, kept));
    CHECK(c.pruned().cols() == c.mask()->kept_count());
}

TEST_CASE("repeated freezes must agree on the mask") {
    const Matrix rows{{1, 2, 3, 4}};
    const std::vector<std::size_t> first{0, 2};
    const std::vector<std::size_t> second{1, 3};

    SegmentedCache c = cache_with_rows(rows);
    c.freeze_recent(ChannelMask(4, first));
    c.append(rows.row(0));
    CHECK_THROWS_AS(c.freeze_recent(ChannelMask(4, second)), std::runtime_error);
    c.freeze_recent(ChannelMask(4, first));  // the stored mask is fine
    CHECK(c.pruned().rows() == 2);
}

TEST_CASE("freeze after G appends empties the recent segment") {
    std::mt19937 rng(7);
    const std::size_t g = 4;
    const Matrix rows = t::random_matrix(rng, g, 4);
    SegmentedCache c = cache_with_rows(rows);
    CHECK(c.recent().rows() == g);
    c.freeze_recent(ChannelMask::full(4));
    CHECK(c.recent().rows() == 0);
    CHECK(c.pruned().rows() == g);
}

TEST_CASE("cache_bytes reproduces the dense size formula") {
    CacheConfig cfg;
    cfg.batch = 13;
    cfg.seq_len = 2048;
    cfg.layers = 32;
    cfg.heads = 32;
    cfg.head_dim = 128;
    cfg.obs_window = 32;
    cfg.residual_len = 32;

    Matrix rows(2048, 128);
    const SegmentedCache keys = cache_with_rows(rows);
    const SegmentedCache values = cache_with_rows(rows);
    const std::uint64_t total = cache_bytes(keys, cfg) + cache_bytes(values, cfg);
    CHECK(total == 13958643712ull);  // 2 * 13 * 2048 * 32 * 32 * 128 * 2 bytes
}

TEST_CASE("full-mask caches cost exactly the dense formula") {
    std::mt19937 rng(11);
    const CacheConfig cfg = small_config();
    const Matrix rows = t::random_matrix(rng, 16, 4);
    SegmentedCache c = cache_with_rows(rows);
    c.freeze_recent(ChannelMask::full(4));
    CHECK(cache_bytes(c, cfg) == 16ull * 4 * 2);  // no mask overhead at lambda = 0
}

TEST_CASE("pruned key bytes scale by kept/D plus the mask") {
    CacheConfig cfg;
    cfg.batch = 1;
    cfg.seq_len = 256;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.head_dim = 128;
    cfg.key_prune_ratio = 0.4;
    cfg.obs_window = 32;
    cfg.residual_len = 32;

    std::mt19937 rng(13);
    const Matrix rows = t::random_matrix(rng, 256, 128);
    const std::size_t keep = kept_channels(0.4, 128);
    CHECK(keep == 76);

    std::vector<std::size_t> kept(keep);
    for (std::size_t i = 0; i < keep; ++i) kept[i] = i;
    SegmentedCache keys = cache_with_rows(rows);
    keys.freeze_recent(ChannelMask(128, kept));
    const SegmentedCache values = cache_with_rows(rows);

    const double dense_key = 256.0 * 128 * 2;
    CHECK(static_cast<double>(cache_bytes(keys, cfg)) ==
          doctest::Approx(dense_key * 76 / 128 + 16));
    const double ratio =
        static_cast<double>(cache_bytes(keys, cfg) + cache_bytes(values, cfg)) / (2 * dense_key);
    CHECK(ratio == doctest::Approx(0.8).epsilon(0.01));  // ~20% total reduction
}

TEST_CASE("cache_bytes is monotone non-increasing in the prune ratio") {
    std::mt19937 rng(17);
    const Matrix rows = t::random_matrix(rng, 64, 32);
    const CacheConfig cfg = [] {
        CacheConfig c;
        c.seq_len = 64;
        c.head_dim = 32;
        c.obs_window = 8;
        c.residual_len = 8;
        return c;
    }();

    std::uint64_t previous = ~0ull;
    for (double lambda : {0.0, 0.2, 0.4, 0.6, 0.8}) {
        const std::size_t keep = kept_channels(lambda, 32);
        std::vector<std::size_t> kept(keep);
        for (std::size_t i = 0; i < keep; ++i) kept[i] = i;
        SegmentedCache c = cache_with_rows(rows);
        c.freeze_recent(ChannelMask(32, kept));
        const std::uint64_t bytes = cache_bytes(c, cfg);
        CHECK(bytes <= previous);
        previous = bytes;
    }
}

TEST_CASE("snapshot round-trips a pruned cache") {
    CacheConfig cfg = small_config();

    // f16-exact values so the payload survives the narrowing.
    Matrix rows(5, 4);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            rows.at(i, j) = static_cast<double>(i) - 0.5 * static_cast<double>(j);
        }
    }
    SegmentedCache c = cache_with_rows(rows);
    const std::vector<std::size_t> kept{0, 2};
    c.freeze_recent(ChannelMask(4, kept));
    c.append(rows.row(0));
    c.append(rows.row(1));

    const auto blob = serialize_cache(c, cfg);
    std::size_t offset = 0;
    const SegmentedCache copy = deserialize_cache(blob, cfg, offset);
    CHECK(offset == blob.size());
    CHECK(copy == c);
}

TEST_CASE("snapshot round-trips an unfrozen dense cache") {
    CacheConfig cfg = small_config();
    Matrix rows(3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) rows.at(i, j) = static_cast<double>(i + j);
    }
    const SegmentedCache c = cache_with_rows(rows);
    const auto blob = serialize_cache(c, cfg);
    std::size_t offset = 0;
    const SegmentedCache copy = deserialize_cache(blob, cfg, offset);
    CHECK(copy == c);
    CHECK(!copy.mask().has_value());
}

TEST_CASE("snapshot rejects corruption") {
    const CacheConfig cfg = small_config();
    const Matrix rows{{1, 2, 3, 4}};
    const SegmentedCache c = cache_with_rows(rows);
    auto blob = serialize_cache(c, cfg);

    std::size_t offset = 0;
    auto truncated = blob;
    truncated.resize(blob.size() - 3);
    CHECK_THROWS_AS(deserialize_cache(truncated, cfg, offset), std::runtime_error);

    offset = 0;
    auto bad_magic = blob;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_cache(bad_magic, cfg, offset), std::runtime_error);

    offset = 0;
    CacheConfig other = cfg;
    other.heads = 2;
    CHECK_THROWS_AS(deserialize_cache(blob, other, offset), std::runtime_error);
}

TEST_CASE("every f16 bit pattern round-trips through f32") {
    for (std::uint32_t h = 0; h <= 0xFFFF; ++h) {
        const auto half = static_cast<std::uint16_t>(h);
        const float f = f16_to_f32(half);
        if (std::isnan(f)) {
            CHECK(std::isnan(f16_to_f32(f32_to_f16(f))));
            continue;
        }
        CHECK(f32_to_f16(f) == half);
    }
}

TEST_CASE("f16 narrowing rounds to nearest even") {
    CHECK(f64_to_f16(1.0) == 0x3C00);
    // exactly halfway between 0x3C00 and 0x3C01: ties to the even code
    CHECK(f64_to_f16(1.0 + 1.0 / 2048.0) == 0x3C00);
    // halfway between 0x3C01 and 0x3C02: again to the even code
    CHECK(f64_to_f16(1.0 + 3.0 / 2048.0) == 0x3C02);
    // smallest subnormal and the tie just below it
    CHECK(f64_to_f16(std::ldexp(1.0, -24)) == 0x0001);
    CHECK(f64_to_f16(std::ldexp(1.0, -25)) == 0x0000);
    CHECK(f64_to_f16(65504.0) == 0x7BFF);  // f16 max
    CHECK(f64_to_f16(1e6) == 0x7C00);      // overflow to +inf
}

TEST_CASE("config invariants") {
    CacheConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());

    CacheConfig bad = cfg;
    bad.key_prune_ratio = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.key_prune_ratio = 0.99;  // floor(0.01 * 4) = 0 kept channels
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.obs_window = 17;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.residual_len = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.kv_budget = 17;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
