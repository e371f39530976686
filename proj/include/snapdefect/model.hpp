#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace snapdefect {

enum class BoundaryKind { Open, Periodic };

struct BoundaryCondition {
    BoundaryKind kind = BoundaryKind::Open;

    bool periodic() const { return kind == BoundaryKind::Periodic; }
    friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;
};

std::string to_string(BoundaryCondition bc);
BoundaryCondition parse_boundary(const std::string& text);

enum class ModelKind { IsingChain, RydbergChain };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Chain Hamiltonian description.
///
/// IsingChain:   H = -J sum_j Z_j Z_{j+1} - h sum_j X_j
/// RydbergChain: H = sum_{i<j} omega (rb_over_a)^6 / d(i,j)^6 n_i n_j
///                   + (omega/2) sum_j X_j - delta_detuning sum_j n_j
///
/// Energies are in units of J (Ising) or omega (Rydberg); distances are in
/// lattice constants. interaction_cutoff == nullopt means "full range".
struct ModelSpec {
    ModelKind kind = ModelKind::IsingChain;
    int L = 2;
    BoundaryCondition bc{};
    double J = 1.0;
    double h = 1.0;
    double omega = 1.0;
    double delta_detuning = 1.0;
    double rb_over_a = 1.920;
    std::optional<int> interaction_cutoff;

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    /// The parameter scanned across a transition: h for Ising, the detuning
    /// for Rydberg.
    double tuning() const { return kind == ModelKind::IsingChain ? h : delta_detuning; }
    void set_tuning(double value);

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

struct Pair {
    int i = 0;
    int j = 0;
    double V = 0.0;
};

struct SiteField {
    int site = 0;
    double longitudinal = 0.0;
    double transverse = 0.0;
};

/// Spin-1/2 form of a chain Hamiltonian:
///
///   H = sum_pairs V_ij Z_i Z_j - sum_j (hz_j Z_j + hx_j X_j) + offset
///
/// with hz = SiteField::longitudinal and hx = SiteField::transverse. The sign
/// of hx is kept as derived; it is a gauge choice (conjugation by Z_j flips
/// it) and does not affect spectra or Born probabilities.
struct CouplingTable {
    int L = 0;
    BoundaryCondition bc{};
    std::vector<Pair> pairs;
    std::vector<SiteField> fields;
    double offset = 0.0;
    std::vector<std::string> warnings;

    /// Diagonal energy of a computational-basis configuration. Bit j of
    /// `state` set means Z_j = +1.
    double diagonal_energy(unsigned long long state) const;
    bool has_longitudinal_fields() const;
};

/// Lattice distance between sites i and j; minimum image when periodic.
int chain_distance(int i, int j, int L, BoundaryCondition bc);

CouplingTable build_ising(int L, double J, double h, BoundaryCondition bc);

/// Rydberg chain rewritten with n_j = (1 + Z_j)/2. Pairs farther apart than
/// `cutoff` are dropped; nullopt keeps all of them.
CouplingTable build_rydberg(int L, double omega, double delta_detuning, double rb_over_a,
                            BoundaryCondition bc, std::optional<int> cutoff);

enum class TableConsumer { ExactDiagonalization, Sampler };

/// Dispatches on spec.kind. When the spec leaves the cutoff unset, exact
/// diagonalization keeps the full range and the sampler uses L/2.
CouplingTable build_table(const ModelSpec& spec, TableConsumer consumer);

} // namespace snapdefect
