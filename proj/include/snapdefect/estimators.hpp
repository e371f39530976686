#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "snapdefect/defect.hpp"
#include "snapdefect/snapshots.hpp"

namespace snapdefect {

struct ErrorMethod {
    enum class Kind { Bootstrap, Jackknife };
    Kind kind = Kind::Bootstrap;
    int resamples = 200;  // bootstrap resamples B, or jackknife blocks

    static ErrorMethod bootstrap(int B = 200) { return {Kind::Bootstrap, B}; }
    static ErrorMethod jackknife(int blocks = 50) { return {Kind::Jackknife, blocks}; }
    std::string describe() const;
};

/// Monte Carlo mean with resampling uncertainty. For positive estimands the
/// log fields carry ln(mean) and sigma / mean.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::optional<double> log_mean;
    std::optional<double> log_std_error;
    std::size_t M_used = 0;
    ErrorMethod method{};
    std::optional<double> n_mean;  // mean occupation used by a staggered mapping
};

void to_json(nlohmann::json& j, const Estimate& e);

/// Fills in n_mean for a staggered mapping from the dataset's grand mean
/// occupation. Throws ConfigError if the data are not occupation snapshots
/// and no n_mean was given.
SpinMapping resolve_mapping(const SnapshotSet& set, const SpinMapping& mapping);

/// Grand mean occupation (1 / (M L)) sum_{m,j} bit_j.
double mean_occupation(const SnapshotSet& set);

/// <O> = (1/M) sum_m O({Z}_m), accumulated in the log domain.
Estimate estimate_defect(const SnapshotSet& set, const DefectSpec& defect, const SpinMapping& mapping,
                         const ErrorMethod& method, std::uint64_t seed);

/// <Z_x Z_x' O> / <O> with jointly resampled numerator and denominator.
Estimate weighted_correlator(const SnapshotSet& set, const DefectSpec& defect, const SpinMapping& mapping, int x,
                             int xp, const ErrorMethod& method, std::uint64_t seed);

/// (1/L^2) <(sum_j Z_j)^2 O> / <O>.
Estimate weighted_m2(const SnapshotSet& set, const DefectSpec& defect, const SpinMapping& mapping,
                     const ErrorMethod& method, std::uint64_t seed);

/// Splits the set into two shuffled halves, pairs them by index and
/// estimates the two-copy weight over the pairs.
Estimate two_copy_estimate(const SnapshotSet& set, const DefectSpec& defect, const SpinMapping& mapping,
                           std::uint64_t seed, const ErrorMethod& method);

struct EntropyPoint {
    int L = 0;
    double log_mean = 0.0;
    double log_std_error = 0.0;
};

/// Per-size ln<O> +- sigma, ready for a linear fit in L.
std::vector<EntropyPoint> defect_entropy_inputs(std::span<const SnapshotSet> sets, const DefectSpec& defect,
                                                const SpinMapping& mapping, const ErrorMethod& method,
                                                std::uint64_t seed);

} // namespace snapdefect
