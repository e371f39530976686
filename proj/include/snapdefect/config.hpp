#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapdefect/defect.hpp"
#include "snapdefect/estimators.hpp"
#include "snapdefect/model.hpp"
#include "snapdefect/sse.hpp"

namespace snapdefect {

enum class SampleSource { SSE, Exact };

struct AnalysisConfig {
    double chi2_threshold = 2.0;
    int max_drops = 2;
    double nu = 1.0;
    double D_fixed = 0.125;
    double window_lo = 0.0;
    double window_hi = 1.0;
    double max_relative_error = 0.5;
    int crossing_bootstrap = 200;
    int fit_bootstrap = 200;
};

/// Fully resolved run configuration. Every key has a default; a config file
/// only overrides what it names.
struct RunConfig {
    ModelSpec model;                  // L is replaced per size
    std::vector<int> sizes;
    std::vector<double> tuning_grid;  // h (Ising) or detuning (Rydberg); empty: model value only

    SampleSource source = SampleSource::SSE;
    sse::SamplerConfig sampling;
    int ed_max_sites = 16;

    std::string defect_kind = "zeeman";  // zeeman | energy | twocopy
    std::string inner_kind = "intercopy";  // twocopy only: intercopy | zeeman | energy
    double delta = 0.5;
    std::vector<double> deltas;  // fixed-point scan
    SpinMapping mapping;
    ErrorMethod error;

    AnalysisConfig analysis;

    std::uint64_t seed = 1;
    int threads = 1;

    /// Defect on a chain with the model's boundary condition.
    DefectSpec defect(double delta_value) const;
    DefectSpec defect() const { return defect(delta); }

    ModelSpec model_at(int L, double tuning) const;
    std::vector<double> tunings() const;

    nlohmann::json to_json() const;
    /// SHA-256 (hex) of the canonical JSON of the resolved configuration.
    std::string hash() const;
};

/// Parses the sectioned key = value text format. Unknown sections or keys and
/// malformed values throw ConfigError naming the key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::string to_string(SampleSource s);

} // namespace snapdefect
