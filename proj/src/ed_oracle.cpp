#include "snapdefect/ed_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snapdefect/errors.hpp"
#include "snapdefect/rng.hpp"

namespace snapdefect::ed {

namespace {

using Vec = std::vector<double>;

struct SparseHamiltonian {
    int L = 0;
    Vec diag;
    std::vector<std::pair<int, double>> flips;  // (site, |hx|): contributes -|hx| X

    std::size_t dim() const { return diag.size(); }

    // y = H x. Each transverse term pairs the halves of blocks of size 2^(j+1).
    void apply(const double* x, double* y) const {
        const std::size_t n = dim();
        for (std::size_t s = 0; s < n; ++s) y[s] = diag[s] * x[s];
        for (const auto& [j, hx] : flips) {
            const std::size_t stride = std::size_t{1} << j;
            for (std::size_t base = 0; base < n; base += 2 * stride) {
                double* lo = y + base;
                double* hi = y + base + stride;
                const double* xlo = x + base;
                const double* xhi = x + base + stride;
                for (std::size_t i = 0; i < stride; ++i) {
                    lo[i] -= hx * xhi[i];
                    hi[i] -= hx * xlo[i];
                }
            }
        }
    }
};

SparseHamiltonian make_operator(const CouplingTable& table) {
    SparseHamiltonian H;
    H.L = table.L;
    const std::size_t n = std::size_t{1} << table.L;
    H.diag.resize(n);
    for (std::size_t s = 0; s < n; ++s) H.diag[s] = table.diagonal_energy(s);
    for (const auto& f : table.fields)
        if (f.transverse != 0.0) H.flips.emplace_back(f.site, std::abs(f.transverse));
    return H;
}

// Restarted Lanczos with full reorthogonalization; returns the Ritz pair for
// the lowest eigenvalue, restarting from the current Ritz vector.
GroundState lanczos(const SparseHamiltonian& H, const Options& opt) {
    using Eigen::VectorXd;
    const std::size_t n = H.dim();
    const auto N = static_cast<Eigen::Index>(n);
    const int kmax = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opt.krylov_dim), n));
    Eigen::MatrixXd V(N, kmax);
    VectorXd x = VectorXd::Constant(N, 1.0 / std::sqrt(static_cast<double>(n)));
    if (opt.start_vector.size() == n) {
        x = Eigen::Map<const VectorXd>(opt.start_vector.data(), N);
        if (!(x.norm() > 0.0)) throw ConfigError("Lanczos start vector is zero");
        x.normalize();
    }
    VectorXd in(N);
    auto apply = [&](const VectorXd& v, VectorXd& r) {
        in = v;
        r.resize(N);
        H.apply(in.data(), r.data());
    };

    GroundState gs;
    gs.L = H.L;
    VectorXd w(N), hx(N);
    for (int restart = 0; restart < opt.max_restarts; ++restart) {
        std::vector<double> alpha, beta;
        V.col(0) = x;
        int m = 0;
        for (int k = 0; k < kmax; ++k) {
            apply(V.col(k), w);
            const double a = w.dot(V.col(k));
            alpha.push_back(a);
            m = k + 1;
            for (int pass = 0; pass < 2; ++pass) {
                const VectorXd c = V.leftCols(m).transpose() * w;
                w.noalias() -= V.leftCols(m) * c;
            }
            const double b = w.norm();
            if (k + 1 == kmax || b < 1e-13 * std::max(1.0, std::abs(a))) break;
            beta.push_back(b);
            V.col(k + 1) = w / b;
        }
        VectorXd d(m), e(std::max(m - 1, 0));
        for (int i = 0; i < m; ++i) d[i] = alpha[i];
        for (int i = 0; i + 1 < m; ++i) e[i] = beta[i];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        tri.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
        x = V.leftCols(m) * tri.eigenvectors().col(0);
        x.normalize();

        apply(x, hx);
        const double energy = x.dot(hx);
        const double residual = (hx - energy * x).norm();
        gs.energy = energy;
        gs.residual = residual;
        if (residual <= opt.tolerance) {
            gs.amplitudes.assign(x.data(), x.data() + N);
            const auto big = std::max_element(gs.amplitudes.begin(), gs.amplitudes.end(),
                                              [](double a, double b) { return std::abs(a) < std::abs(b); });
            if (*big < 0)
                for (auto& v : gs.amplitudes) v = -v;
            return gs;
        }
    }
    throw NumericError("ground-state solver did not converge: residual " + std::to_string(gs.residual) +
                       " after " + std::to_string(opt.max_restarts) + " restarts");
}

// Independent weight evaluation in extended precision for the oracle sums.
void oracle_spins(std::size_t s, int L, const SpinMapping& mapping, std::vector<long double>& z) {
    for (int j = 0; j < L; ++j) {
        const int bit = static_cast<int>((s >> j) & 1u);
        if (mapping.kind == MappingKind::Direct) {
            z[j] = bit ? 1.0L : -1.0L;
        } else {
            const long double c = bit - static_cast<long double>(*mapping.n_mean);
            z[j] = (j % 2 == 0) ? c : -c;
        }
    }
}

long double oracle_log_weight(const DefectSpec& defect, const std::vector<long double>& z) {
    const int L = static_cast<int>(z.size());
    long double s = 0.0L;
    switch (defect.kind) {
    case DefectKind::ZeemanLine:
        for (int j = 0; j < L; ++j) s += z[j];
        break;
    case DefectKind::EnergyLine:
        for (int j = 0; j + 1 < L; ++j) s += z[j] * z[j + 1];
        if (defect.bc.periodic()) s += z[L - 1] * z[0];
        break;
    default:
        throw ConfigError("oracle_log_weight: single-copy defect required");
    }
    return -static_cast<long double>(defect.delta) * s;
}

long double oracle_log_weight2(const DefectSpec& defect, const std::vector<long double>& z1,
                               const std::vector<long double>& z2) {
    if (defect.kind == DefectKind::TwoCopyProduct)
        return oracle_log_weight(*defect.inner, z1) + oracle_log_weight(*defect.inner, z2);
    if (defect.kind != DefectKind::InterCopy) throw ConfigError("oracle_log_weight2: two-copy defect required");
    long double s = 0.0L;
    for (std::size_t j = 0; j < z1.size(); ++j) s += z1[j] * z2[j];
    return -static_cast<long double>(defect.delta) * s;
}

void check_mapping(const SpinMapping& mapping) {
    if (mapping.kind == MappingKind::StaggeredCentered && !mapping.n_mean)
        throw ConfigError("staggered mapping requires a mean occupation");
}

} // namespace

GroundState ground_state(const ModelSpec& spec, const Options& opt) {
    auto gs = ground_state(build_table(spec, TableConsumer::ExactDiagonalization), opt);
    gs.model = spec;
    return gs;
}

GroundState ground_state(const CouplingTable& table, const Options& opt) {
    if (table.L > opt.max_sites)
        throw ConfigError("exact diagonalization limited to L <= " + std::to_string(opt.max_sites) +
                          ", got L = " + std::to_string(table.L));
    const bool classical = std::all_of(table.fields.begin(), table.fields.end(),
                                       [](const SiteField& f) { return f.transverse == 0.0; });
    if (classical) {
        // Diagonal Hamiltonian: pick the lowest configuration, with a small
        // tilt towards Z = +1 to make the choice unique.
        const std::size_t n = std::size_t{1} << table.L;
        std::size_t best = 0;
        double best_e = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n; ++s) {
            double e = table.diagonal_energy(s);
            for (int j = 0; j < table.L; ++j) e -= opt.degeneracy_tilt * (((s >> j) & 1u) ? 1.0 : -1.0);
            if (e < best_e) {
                best_e = e;
                best = s;
            }
        }
        GroundState gs;
        gs.L = table.L;
        gs.amplitudes.assign(n, 0.0);
        gs.amplitudes[best] = 1.0;
        gs.energy = table.diagonal_energy(best);
        gs.tilt = opt.degeneracy_tilt;
        return gs;
    }
    return lanczos(make_operator(table), opt);
}

BornDistribution born_distribution(const GroundState& gs) {
    BornDistribution d;
    d.L = gs.L;
    d.model = gs.model;
    d.probabilities.resize(gs.amplitudes.size());
    std::transform(gs.amplitudes.begin(), gs.amplitudes.end(), d.probabilities.begin(),
                   [](double a) { return a * a; });
    return d;
}

ExactExpectation exact_defect_expectation(const BornDistribution& dist, const DefectSpec& defect,
                                          const SpinMapping& mapping) {
    check_mapping(mapping);
    const std::size_t n = dist.probabilities.size();
    std::vector<long double> z(dist.L), terms;
    terms.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double p = dist.probabilities[s];
        if (p <= 0.0) continue;
        oracle_spins(s, dist.L, mapping, z);
        terms.push_back(std::log(static_cast<long double>(p)) + oracle_log_weight(defect, z));
    }
    const long double m = *std::max_element(terms.begin(), terms.end());
    long double acc = 0.0L;
    for (const auto t : terms) acc += std::exp(t - m);
    const long double log_value = m + std::log(acc);
    return {static_cast<double>(std::exp(log_value)), static_cast<double>(log_value)};
}

double exact_weighted_average(const BornDistribution& dist, const DefectSpec& defect, const SpinMapping& mapping,
                              const std::function<double(std::span<const double>)>& observable) {
    check_mapping(mapping);
    const std::size_t n = dist.probabilities.size();
    std::vector<long double> z(dist.L);
    std::vector<double> zd(dist.L);
    std::vector<long double> logw(n, -std::numeric_limits<long double>::infinity());
    long double m = -std::numeric_limits<long double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
        if (dist.probabilities[s] <= 0.0) continue;
        oracle_spins(s, dist.L, mapping, z);
        logw[s] = std::log(static_cast<long double>(dist.probabilities[s])) + oracle_log_weight(defect, z);
        m = std::max(m, logw[s]);
    }
    long double num = 0.0L, den = 0.0L;
    for (std::size_t s = 0; s < n; ++s) {
        if (dist.probabilities[s] <= 0.0) continue;
        oracle_spins(s, dist.L, mapping, z);
        for (int j = 0; j < dist.L; ++j) zd[j] = static_cast<double>(z[j]);
        const long double w = std::exp(logw[s] - m);
        num += w * observable(zd);
        den += w;
    }
    return static_cast<double>(num / den);
}

ExactExpectation exact_two_copy_expectation(const BornDistribution& dist, const DefectSpec& defect,
                                            const SpinMapping& mapping) {
    check_mapping(mapping);
    const std::size_t n = dist.probabilities.size();
    std::vector<std::vector<long double>> spins;
    std::vector<long double> logp;
    for (std::size_t s = 0; s < n; ++s) {
        if (dist.probabilities[s] <= 0.0) continue;
        std::vector<long double> z(dist.L);
        oracle_spins(s, dist.L, mapping, z);
        spins.push_back(std::move(z));
        logp.push_back(std::log(static_cast<long double>(dist.probabilities[s])));
    }
    std::vector<long double> terms;
    terms.reserve(spins.size() * spins.size());
    for (std::size_t a = 0; a < spins.size(); ++a)
        for (std::size_t b = 0; b < spins.size(); ++b)
            terms.push_back(logp[a] + logp[b] + oracle_log_weight2(defect, spins[a], spins[b]));
    const long double m = *std::max_element(terms.begin(), terms.end());
    long double acc = 0.0L;
    for (const auto t : terms) acc += std::exp(t - m);
    const long double log_value = m + std::log(acc);
    return {static_cast<double>(std::exp(log_value)), static_cast<double>(log_value)};
}

double exact_mean_occupation(const BornDistribution& dist) {
    long double acc = 0.0L;
    for (std::size_t s = 0; s < dist.probabilities.size(); ++s)
        acc += static_cast<long double>(dist.probabilities[s]) * std::popcount(s);
    return static_cast<double>(acc / dist.L);
}

SnapshotSet born_sample(const BornDistribution& dist, std::size_t M, std::uint64_t seed) {
    if (M < 1) throw ConfigError("born_sample needs M >= 1");
    std::vector<double> cdf(dist.probabilities.size());
    std::partial_sum(dist.probabilities.begin(), dist.probabilities.end(), cdf.begin());
    const double total = cdf.back();

    SnapshotMetadata meta;
    meta.source = SnapshotSource::Exact;
    meta.model = dist.model;
    if (dist.model) {
        meta.bc = dist.model->bc;
        meta.basis = dist.model->kind == ModelKind::RydbergChain ? Basis::Occupation : Basis::SpinZ;
    }
    meta.provenance = "exact ground-state Born sampling";
    meta.seed_info = {{"seed", seed}, {"M", M}};

    SnapshotSet set(dist.L, std::move(meta));
    set.reserve(M);
    Rng rng(seed);
    std::vector<std::uint8_t> rec(dist.L);
    for (std::size_t m = 0; m < M; ++m) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        // Never land on a zero-probability configuration.
        while (it != cdf.begin() && dist.probabilities[static_cast<std::size_t>(it - cdf.begin())] == 0.0) --it;
        const std::size_t s = static_cast<std::size_t>(it - cdf.begin());
        for (int j = 0; j < dist.L; ++j) rec[j] = static_cast<std::uint8_t>((s >> j) & 1u);
        set.append(rec);
    }
    return set;
}

Eigen::MatrixXd dense_hamiltonian(const CouplingTable& table) {
    if (table.L > 12) throw ConfigError("dense Hamiltonian limited to L <= 12");
    const Eigen::Index n = Eigen::Index{1} << table.L;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        H(s, s) = table.diagonal_energy(static_cast<unsigned long long>(s));
        for (const auto& f : table.fields)
            if (f.transverse != 0.0) H(s ^ (Eigen::Index{1} << f.site), s) -= f.transverse;
    }
    return H;
}

ThermalAverages thermal_averages(const CouplingTable& table, double beta) {
    if (table.L > 10) throw ConfigError("full-spectrum thermal averages limited to L <= 10");
    const Eigen::MatrixXd H = dense_hamiltonian(table);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd& E = es.eigenvalues();
    const Eigen::MatrixXd& V = es.eigenvectors();
    const Eigen::Index n = H.rows();
    Eigen::VectorXd w = (-beta * (E.array() - E[0])).exp();
    const double Z = w.sum();

    ThermalAverages out;
    out.energy = (w.array() * E.array()).sum() / Z;
    // Diagonal of the density matrix.
    Eigen::VectorXd rho = (V.array().square().matrix() * w) / Z;
    const int L = table.L;
    out.zz = Eigen::MatrixXd::Zero(L, L);
    for (Eigen::Index s = 0; s < n; ++s) {
        int m = 0;
        for (int j = 0; j < L; ++j) m += ((s >> j) & 1) ? 1 : -1;
        out.abs_magnetization += rho[s] * std::abs(m) / L;
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < L; ++j) {
                const int zi = ((s >> i) & 1) ? 1 : -1;
                const int zj = ((s >> j) & 1) ? 1 : -1;
                out.zz(i, j) += rho[s] * zi * zj;
            }
    }
    return out;
}

} // namespace snapdefect::ed
