#include "kvtrim/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "kvtrim/attention.hpp"
#include "kvtrim/svd.hpp"

namespace kvtrim {

EnergySpectrum attention_energy(const Matrix& q, const Matrix& k) {
    const Matrix weights = causal_attention_weights(q, k);
    EnergySpectrum s;
    s.sigma = svd_values(weights);

    double total = 0.0;
    for (double v : s.sigma) total += v * v;
    s.energy.resize(s.sigma.size());
    s.cumulative.resize(s.sigma.size());
    double running = 0.0;
    for (std::size_t i = 0; i < s.sigma.size(); ++i) {
        s.energy[i] = s.sigma[i] * s.sigma[i] / total;
        running += s.energy[i];
        s.cumulative[i] = running;
    }
    return s;
}

Matrix magnitude_map(const Matrix& cache) {
    Matrix out(cache.rows(), cache.cols());
    for (std::size_t i = 0; i < cache.rows(); ++i) {
        for (std::size_t j = 0; j < cache.cols(); ++j) {
            out.at(i, j) = std::abs(cache.at(i, j));
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string energy_csv(const EnergySpectrum& spectrum) {
    std::string out = "index,sigma,energy,cumulative\n";
    for (std::size_t i = 0; i < spectrum.sigma.size(); ++i) {
        out += std::to_string(i) + "," + format_double(spectrum.sigma[i]) + "," +
               format_double(spectrum.energy[i]) + "," + format_double(spectrum.cumulative[i]) +
               "\n";
    }
    return out;
}

EnergySpectrum parse_energy_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "index,sigma,energy,cumulative") {
        throw std::runtime_error("unexpected energy CSV header");
    }
    EnergySpectrum s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');  // index, implied by position
        std::getline(row, field, ',');
        s.sigma.push_back(std::stod(field));
        std::getline(row, field, ',');
        s.energy.push_back(std::stod(field));
        std::getline(row, field, ',');
        s.cumulative.push_back(std::stod(field));
    }
    return s;
}

std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j > 0) out += ",";
            out += format_double(m.at(i, j));
        }
        out += "\n";
    }
    return out;
}

}  // namespace kvtrim
