#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "kvtrim/matrix.hpp"

namespace kvtrim {

enum class Generator { Gaussian, LowRank };

struct WorkloadSpec {
    std::uint64_t seed = 0;
    std::uint32_t s_prefill = 0;
    std::uint32_t decode_steps = 0;
    Generator generator = Generator::Gaussian;
    std::uint32_t rank = 1;  // LowRank only

    void validate() const;
};

// One head's synthetic tensors: prefill blocks plus one q/k/v row per
// decode step.
struct HeadWorkload {
    Matrix prefill_q;
    Matrix prefill_k;
    Matrix prefill_v;
    Matrix decode_q;
    Matrix decode_k;
    Matrix decode_v;
};

// Standard normals from an mt19937_64 stream via Box-Muller. The engine
// algorithm is pinned here (std::normal_distribution is free to differ
// between standard libraries, which would break replayable runs).
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}
    double next();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Deterministic workload for pipeline (layer, head). Gaussian fills every
// tensor with unit normals. LowRank plants `rank` anchor tokens at the
// start of the prefill and points every query hard at its anchor, so the
// causal attention matrix is numerically rank `rank`.
HeadWorkload make_head_workload(const WorkloadSpec& spec, std::uint32_t head_dim,
                                std::uint32_t layer, std::uint32_t head);

}  // namespace kvtrim
