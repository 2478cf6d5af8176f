#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kvtrim/analysis.hpp"
#include "kvtrim/workload.hpp"
#include "oracles.hpp"

using namespace kvtrim;
namespace t = kvtrim::testing;

TEST_CASE("a sharply focused attention matrix is numerically rank one") {
    // Every query points hard at token 0, so all softmax rows collapse to
    // (1, 0, ..., 0) up to exp(-gap) leakage.
    const std::size_t seq = 6, dim = 4;
    Matrix q(seq, dim), k(seq, dim);
    for (std::size_t i = 0; i < seq; ++i) q.at(i, 0) = 200.0;
    k.at(0, 0) = 1.0;

    const EnergySpectrum s = attention_energy(q, k);
    REQUIRE(s.energy.size() == seq);
    CHECK(s.energy[0] >= 1.0 - 1e-9);
    CHECK(s.cumulative.back() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a single token yields the trivial spectrum") {
    Matrix q{{1.0, 2.0}};
    Matrix k{{0.5, -1.0}};
    const EnergySpectrum s = attention_energy(q, k);
    REQUIRE(s.energy.size() == 1);
    CHECK(s.energy[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.sigma[0] == doctest::Approx(1.0).epsilon(1e-12));  // one row summing to 1
}

TEST_CASE("the spectrum is complete: cumulative energy reaches one") {
    std::mt19937 rng(3);
    const Matrix q = t::random_matrix(rng, 16, 8);
    const Matrix k = t::random_matrix(rng, 16, 8);
    const EnergySpectrum s = attention_energy(q, k);
    REQUIRE(s.cumulative.size() == 16);
    CHECK(s.cumulative[15] >= 0.999);
    CHECK(std::abs(s.cumulative[15] - 1.0) <= 1e-9);
}

TEST_CASE("energies normalize and accumulate monotonically") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t seq = 4 + trial;
        const Matrix q = t::random_matrix(rng, seq, 6);
        const Matrix k = t::random_matrix(rng, seq, 6);
        const EnergySpectrum s = attention_energy(q, k);

        double sum = 0.0;
        for (std::size_t i = 0; i < s.energy.size(); ++i) {
            CHECK(s.energy[i] >= 0.0);
            sum += s.energy[i];
            if (i > 0) {
                CHECK(s.sigma[i] <= s.sigma[i - 1]);
                CHECK(s.cumulative[i] >= s.cumulative[i - 1]);
            }
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK(std::abs(s.cumulative.back() - 1.0) <= 1e-9);
    }
}

TEST_CASE("planted low-rank workloads concentrate their spectrum") {
    for (std::uint32_t rank : {1u, 2u, 3u}) {
        WorkloadSpec spec;
        spec.seed = 9;
        spec.s_prefill = 24;
        spec.generator = Generator::LowRank;
        spec.rank = rank;
        const HeadWorkload w = make_head_workload(spec, 16, 0, 0);
        const EnergySpectrum s = attention_energy(w.prefill_q, w.prefill_k);
        CHECK(s.cumulative[rank - 1] >= 1.0 - 1e-6);
    }
}

TEST_CASE("magnitude map flips negative entries") {
    Matrix m{{-1, -2}, {-3, -4}};
    const Matrix a = magnitude_map(m);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(a.at(i, j) == -m.at(i, j));
        }
    }
    CHECK(magnitude_map(Matrix(3, 3)) == Matrix(3, 3));
}

TEST_CASE("magnitude map spot checks") {
    std::mt19937 rng(7);
    const Matrix m = t::random_matrix(rng, 8, 8, -5.0, 5.0);
    const Matrix a = magnitude_map(m);
    for (int probe = 0; probe < 10; ++probe) {
        const std::size_t i = rng() % 8, j = rng() % 8;
        CHECK(a.at(i, j) == std::abs(m.at(i, j)));
    }
}

TEST_CASE("energy CSV round-trips through its parser") {
    std::mt19937 rng(11);
    const Matrix q = t::random_matrix(rng, 8, 4);
    const Matrix k = t::random_matrix(rng, 8, 4);
    const EnergySpectrum s = attention_energy(q, k);

    const std::string text = energy_csv(s);
    CHECK(text.rfind("index,sigma,energy,cumulative\n", 0) == 0);
    const EnergySpectrum parsed = parse_energy_csv(text);
    REQUIRE(parsed.sigma.size() == s.sigma.size());
    for (std::size_t i = 0; i < s.sigma.size(); ++i) {
        CHECK(parsed.sigma[i] == s.sigma[i]);  // %.17g round-trips exactly
        CHECK(parsed.energy[i] == s.energy[i]);
        CHECK(parsed.cumulative[i] == s.cumulative[i]);
    }
}

TEST_CASE("matrix CSV uses one row per token") {
    Matrix m{{1.5, 2.5}, {3.5, 4.5}};
    CHECK(matrix_csv(m) == "1.5,2.5\n3.5,4.5\n");
}
