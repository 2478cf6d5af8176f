#pragma once

#include <string>
#include <vector>

#include "kvtrim/matrix.hpp"

namespace kvtrim {

// Normalized squared singular values of an attention matrix: energy_i =
// sigma_i^2 / sum sigma^2, with the running cumulative sum.
struct EnergySpectrum {
    std::vector<double> sigma;       // descending
    std::vector<double> energy;
    std::vector<double> cumulative;  // non-decreasing, ends at 1
};

// Spectrum of softmax(q k^T / sqrt(D)) with causal masking, matching the
// decoder attention the spectra describe.
EnergySpectrum attention_energy(const Matrix& q, const Matrix& k);

// Elementwise |entries|.
Matrix magnitude_map(const Matrix& cache);

// "index,sigma,energy,cumulative" rows; floats printed with 17 significant
// digits so files are byte-stable.
std::string energy_csv(const EnergySpectrum& spectrum);
EnergySpectrum parse_energy_csv(const std::string& text);

// One row per token, comma-separated channels.
std::string matrix_csv(const Matrix& m);

std::string format_double(double v);

}  // namespace kvtrim
