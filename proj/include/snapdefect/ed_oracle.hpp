#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "snapdefect/defect.hpp"
#include "snapdefect/model.hpp"
#include "snapdefect/snapshots.hpp"

namespace snapdefect::ed {

struct Options {
    int max_sites = 16;          // 2^L amplitudes are stored
    double tolerance = 1e-10;    // eigen-residual ||Hv - Ev||
    int krylov_dim = 30;
    int max_restarts = 500;
    double degeneracy_tilt = 1e-9;
    std::vector<double> start_vector;  // initial Lanczos vector; empty: uniform
};

/// Ground state in the computational Z basis (bit j of the index <-> site j,
/// bit set <-> Z_j = +1). Amplitudes are real and nonnegative: the solver
/// works in the gauge where every transverse term is -|hx| X.
struct GroundState {
    int L = 0;
    std::vector<double> amplitudes;
    double energy = 0.0;
    double residual = 0.0;
    double tilt = 0.0;  // longitudinal tilt applied to lift a classical degeneracy
    std::optional<ModelSpec> model;
};

struct BornDistribution {
    int L = 0;
    std::vector<double> probabilities;
    std::optional<ModelSpec> model;
};

GroundState ground_state(const ModelSpec& spec, const Options& opt = {});
GroundState ground_state(const CouplingTable& table, const Options& opt = {});

BornDistribution born_distribution(const GroundState& gs);

/// <O> = sum_s p(s) O(s) accumulated in extended precision. `log_value` is
/// always finite for a positive weight even when `value` would overflow.
struct ExactExpectation {
    double value = 0.0;
    double log_value = 0.0;
};

ExactExpectation exact_defect_expectation(const BornDistribution& dist, const DefectSpec& defect,
                                          const SpinMapping& mapping = SpinMapping::direct());

/// sum_s p(s) O(s) A(s) / sum_s p(s) O(s) for a diagonal observable A of
/// the mapped spins.
double exact_weighted_average(const BornDistribution& dist, const DefectSpec& defect,
                              const SpinMapping& mapping,
                              const std::function<double(std::span<const double>)>& observable);

/// sum_{s,t} p(s) p(t) O(s, t) for a two-copy defect.
ExactExpectation exact_two_copy_expectation(const BornDistribution& dist, const DefectSpec& defect,
                                            const SpinMapping& mapping = SpinMapping::direct());

/// Mean occupation <n> = sum_s p(s) (1/L) sum_j bit_j(s).
double exact_mean_occupation(const BornDistribution& dist);

/// M i.i.d. configurations by inverse-CDF sampling. Basis is Occupation for
/// Rydberg models, SpinZ otherwise.
SnapshotSet born_sample(const BornDistribution& dist, std::size_t M, std::uint64_t seed);

/// Dense Hamiltonian of the coupling table with the transverse signs as
/// stored (no gauge change). Intended for small L.
Eigen::MatrixXd dense_hamiltonian(const CouplingTable& table);

/// Finite-temperature averages from the full spectrum (L <= 10).
struct ThermalAverages {
    double energy = 0.0;
    double abs_magnetization = 0.0;  // <|sum_j Z_j|> / L
    Eigen::MatrixXd zz;               // <Z_i Z_j>
};

ThermalAverages thermal_averages(const CouplingTable& table, double beta);

} // namespace snapdefect::ed
