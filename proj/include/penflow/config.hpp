#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "penflow/diagnostics.hpp"
#include "penflow/problems.hpp"

namespace penflow {

using Json = nlohmann::ordered_json;

// Raised for malformed configs; the message names the offending field path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Declarative run description. The problem subtree is kept as validated JSON
// so that parse -> serialize -> parse is the identity.
struct RunConfig {
    Json problem;  // {"builtin": id} | {"random": {...}} | {"inline": {...}}
    Schedule schedule;
    IntegrateOptions integrator;
    std::optional<Vec> x0;  // nullopt = zeros
    std::string trajectory_csv = "trajectory.csv";
    std::string report_json = "report.json";
    std::optional<long> discrete_N;
    bool discrete_use_h1 = true;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);
Json to_json(const RunConfig& cfg);
std::string serialize_config(const RunConfig& cfg);

// The problem a config names, with solution/certificate when the source
// provides them (builtin and random problems do, inline ones do not).
struct MaterializedProblem {
    std::string id;
    ProblemInstance instance;
    std::optional<std::variant<Vec, ConvexSet>> solution;
    std::optional<GraphPoint> certificate;
};

MaterializedProblem materialize_problem(const Json& problem);

// Descriptor (de)serialization, shared by inline configs and tests.
Json set_to_json(const ConvexSet& C);
ConvexSet set_from_json(const Json& j, const std::string& path);
Json instance_to_json(const ProblemInstance& pr);
ProblemInstance instance_from_json(const Json& j, const std::string& path);

// JSON-safe number: infinities and NaN become the strings "+inf", "-inf",
// "nan" (JSON has no encoding for them).
Json json_number(double v);

Json hypothesis_json(const HypothesisReport& rep);
Json lyapunov_json(const LyapunovReport& rep);
Json convergence_json(const ConvergenceReport& rep);

}  // namespace penflow
