#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tofsim/oracle.hpp"
#include "tofsim/setup.hpp"
#include "tofsim/sweep.hpp"
#include "tofsim/tof.hpp"

namespace tofsim {

using Json = nlohmann::json;

// Momentum grid request for the density tables of the condition command.
struct DistributionBlock {
    double p_min = 0.0;
    double p_max = 0.0;
    int points = 0;
    std::string out; // CSV path
};

struct ConditionBlock {
    double p_out = 0.0;
    std::optional<DistributionBlock> distribution;
};

struct OracleBlock {
    GridSpec grid;
    std::optional<double> p_out; // conditioning value; defaults to setup.P0
};

struct OptimizeBlock {
    std::vector<OptimizeBound> free_params;
};

// One fully parsed configuration document. Exactly one command block is
// consumed per invocation (selected by the subcommand); setup is shared.
struct RunConfig {
    ToFSetup setup;
    std::optional<ConditionBlock> condition;
    std::optional<SweepSpec> sweep; // base filled from setup
    std::optional<OracleBlock> oracle;
    std::optional<OptimizeBlock> optimize;
};

RunConfig parse_config(const Json& doc);
Json config_to_json(const RunConfig& config);

// Sets `path` (dot-separated keys) in `doc` to the JSON-parsed `value`
// (falls back to a string leaf when the value does not parse as JSON).
void apply_override(Json& doc, const std::string& path, const std::string& value);

// %.17g rendering used for every float in emitted files.
std::string format_g17(double v);

// JSON serialization with all floating point numbers at 17 significant
// digits; key order and layout are deterministic.
std::string dump_json(const Json& doc, int indent = 2);

// CSV emission per the fixed schema: one '#' metadata line echoing the base
// setup, a header row, then data rows, '.' decimal, %.17g numbers.
std::string sweep_to_csv(const SweepResult& result);
std::string densities_to_csv(const ToFSetup& setup, const DistributionSamples& samples);

// Subcommand bodies. Each returns the JSON report (which embeds the echoed
// config); file emission and exit codes are handled by the binary.
Json cmd_simulate(const RunConfig& config);
Json cmd_condition(const RunConfig& config);
DistributionSamples condition_densities(const RunConfig& config);
SweepResult cmd_sweep(const RunConfig& config);
Json cmd_oracle_check(const RunConfig& config); // report["pass"] gates exit 4
Json cmd_optimize(const RunConfig& config);

} // namespace tofsim
