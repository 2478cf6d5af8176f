#pragma once

#include <string>

#include "kvtrim/run_config.hpp"

namespace kvtrim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalError = 3;

// Per-run equivalence summary. Without quantization the segmented decode
// must match its reference: 1e-12 when both masks are full, 1e-10 otherwise.
// Quantized runs report the deviation without enforcing a bound.
struct CheckResult {
    double max_deviation = 0.0;
    bool has_tolerance = false;
    double tolerance = 0.0;

    bool passed() const { return !has_tolerance || max_deviation <= tolerance; }
};

// Executes the prefill + decode pipelines for every (layer, head), writes
// run_report.json and cache_snapshot.bin into cfg.output_dir, and returns
// the exit code. Parallelism is capped by the KVTRIM_THREADS env var.
int cmd_run(const RunConfig& cfg);

// Writes energy and magnitude CSVs for the workload tensors.
int cmd_analyze(const RunConfig& cfg);

// Writes memory_report.json for the lambda sweep in the config.
int cmd_report(const RunConfig& cfg);

}  // namespace kvtrim
