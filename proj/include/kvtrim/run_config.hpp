#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kvtrim/evictor.hpp"
#include "kvtrim/kv_cache.hpp"
#include "kvtrim/pipeline.hpp"
#include "kvtrim/pruner.hpp"
#include "kvtrim/workload.hpp"

namespace kvtrim {

// Raised for anything wrong with a config file; the CLI maps it to exit 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    CacheConfig cache;
    EvictionPolicy policy;
    // Key-cache selection criterion. The value cache always scores with the
    // attention-weighted column norm when value pruning is enabled.
    Criterion criterion = Criterion::QueryDriven;
    std::optional<QuantSpec> quant;
    WorkloadSpec workload;
    std::string output_dir = "out";
    std::vector<double> sweep;
};

// Parses and validates the JSON text of a config file. Unknown keys and
// out-of-range values are ConfigErrors with the offending field named.
RunConfig parse_run_config(const std::string& json_text);

RunConfig load_run_config(const std::string& path);

}  // namespace kvtrim
