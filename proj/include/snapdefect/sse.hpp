#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "snapdefect/model.hpp"
#include "snapdefect/rng.hpp"
#include "snapdefect/snapshots.hpp"

namespace snapdefect::sse {

struct BetaRule {
    enum class Kind { Fixed, ScaleWithL };
    Kind kind = Kind::ScaleWithL;
    double value = 2.0;  // beta itself (Fixed) or beta / L (ScaleWithL)

    static BetaRule fixed(double beta) { return {Kind::Fixed, beta}; }
    static BetaRule scale_with_L(double c) { return {Kind::ScaleWithL, c}; }
    double beta_for(int L) const { return kind == Kind::Fixed ? value : value * L; }
};

/// Off-diagonal update flavour. Multibranch clusters grow through bond
/// vertices and stop at transverse-field vertices; line clusters are
/// single-site imaginary-time segments between transverse-field vertices.
/// Auto picks multibranch without longitudinal fields and line otherwise.
enum class ClusterMode { Auto, Multibranch, Line };

struct SamplerConfig {
    BetaRule beta_rule{};
    int n_therm = 2000;
    int n_decorr = 0;  // 0: auto-tune to >= 2 tau_int(|m|)
    std::size_t M = 1000;
    std::uint64_t seed = 1;
    int chains = 1;
    int threads = 1;
    double epsilon = 1e-3;  // added to every bond constant shift
    ClusterMode cluster = ClusterMode::Auto;
    int periodicity_check_interval = 1000;

    void validate() const;
};

/// Running tallies collected by Sampler::measure().
struct Accumulators {
    std::size_t count = 0;
    double energy_sum = 0.0;
    double abs_mag_sum = 0.0;
};

/// Stochastic series expansion state for
///   H = sum_b V_b Z_i Z_j - sum_j (hz_j Z_j + hx_j X_j) + offset.
///
/// Each coupling pair is a diagonal bond vertex that also carries a share of
/// the longitudinal fields of its two sites (split in proportion to |V|), so
/// the bond weight table is W_b(s_i, s_j) = C_b - [V s_i s_j - f_i s_i - f_j s_j]
/// with C_b the smallest shift making every entry >= epsilon. Transverse
/// fields give a constant vertex and a spin-flip vertex, both of weight |hx_j|.
class Sampler {
public:
    Sampler(const CouplingTable& table, const SamplerConfig& cfg, std::uint64_t seed);

    /// One Monte Carlo sweep: diagonal update, linked-vertex construction,
    /// cluster update, truncation growth.
    void sweep();

    /// Configuration at propagation slice 0 (1 = spin up).
    const std::vector<std::uint8_t>& snapshot() const { return alpha_; }

    int L() const { return L_; }
    double beta() const { return beta_; }
    std::size_t expansion_order() const { return n_ops_; }
    std::size_t truncation() const { return ops_.size(); }
    std::size_t off_diagonal_count() const;
    std::uint64_t sweeps_done() const { return sweeps_; }

    /// Instantaneous energy estimator -n/beta + shift.
    double energy_estimate() const;
    double abs_magnetization() const;

    void measure();
    const Accumulators& accumulators() const { return acc_; }

    /// Propagating slice 0 through the operator string returns slice 0.
    bool periodic_in_imaginary_time() const;

    /// Forces the slice-0 configuration; used by tests for the h = 0 case.
    void set_configuration(const std::vector<std::uint8_t>& alpha);

private:
    struct Bond {
        int a = 0, c = 0;
        double w[4] = {0, 0, 0, 0};  // index (s_a << 1) | s_c
        double wmax = 0.0;
        double shift = 0.0;
    };

    void diagonal_update();
    void grow_truncation();
    void build_vertices();
    void multibranch_update();
    void line_update();
    void write_back();

    bool is_site_op(std::int32_t op) const { return op >= 0 && op < 2 * L_; }
    bool is_bond_op(std::int32_t op) const { return op >= 2 * L_; }

    double bond_weight(int b, std::uint8_t sa, std::uint8_t sc) const { return bonds_[b].w[(sa << 1) | sc]; }

    int L_;
    double beta_;
    double epsilon_;
    ClusterMode mode_;
    int check_interval_;
    std::vector<Bond> bonds_;
    std::vector<double> hx_;  // |transverse| per site
    double energy_shift_ = 0.0;
    double lambda_ = 0.0;
    double lambda_transverse_ = 0.0;

    // Alias table over diagonal insertion candidates: sites 0..L-1 (weight
    // |hx_j|) followed by bonds (weight wmax_b).
    std::vector<double> alias_prob_;
    std::vector<std::int32_t> alias_other_;

    std::vector<std::uint8_t> alpha_;
    std::vector<std::int32_t> ops_;  // -1 identity, 2j / 2j+1 site const / flip, 2L+b bond
    std::size_t n_ops_ = 0;

    // Linked-vertex representation rebuilt every sweep.
    std::vector<std::int32_t> vpos_;
    std::vector<std::int32_t> link_;
    std::vector<std::uint8_t> leg_spin_;
    std::vector<std::int32_t> first_, last_;
    std::vector<std::int32_t> stack_, cluster_legs_;
    std::vector<std::uint8_t> visited_, expanded_;

    Rng rng_;
    Accumulators acc_;
    std::uint64_t sweeps_ = 0;
};

/// Integrated autocorrelation time of the per-sweep |magnetization| after
/// thermalization, and the resulting decorrelation interval.
struct ChainDiagnostics {
    double tau_abs_mag = 0.0;
    int n_decorr = 1;
    double mean_expansion_order = 0.0;
};

/// Thermalizes, then collects cfg.M snapshots spaced n_decorr sweeps apart.
/// With cfg.chains = K, runs K independent chains (seeds seed ^ k) and
/// concatenates their snapshots in chain order.
SnapshotSet run_sampling(const CouplingTable& table, const SamplerConfig& cfg,
                         const std::optional<ModelSpec>& model = std::nullopt,
                         std::vector<ChainDiagnostics>* diagnostics = nullptr);

} // namespace snapdefect::sse
