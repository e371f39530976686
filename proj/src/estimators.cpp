#include "snapdefect/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "snapdefect/errors.hpp"
#include "snapdefect/numeric.hpp"
#include "snapdefect/rng.hpp"

namespace snapdefect {

std::string ErrorMethod::describe() const {
    std::ostringstream os;
    if (kind == Kind::Bootstrap)
        os << "bootstrap B=" << resamples;
    else
        os << "jackknife blocks=" << resamples;
    return os.str();
}

void to_json(nlohmann::json& j, const Estimate& e) {
    j = nlohmann::json{{"mean", e.mean},
                       {"std_error", e.std_error},
                       {"M_used", e.M_used},
                       {"method", e.method.describe()}};
    if (e.log_mean) j["log_mean"] = *e.log_mean;
    if (e.log_std_error) j["log_std_error"] = *e.log_std_error;
    if (e.n_mean) j["n_mean"] = *e.n_mean;
}

double mean_occupation(const SnapshotSet& set) {
    if (set.empty()) throw DataError("mean occupation of an empty snapshot set");
    const auto bits = set.raw();
    std::uint64_t ones = 0;
    for (const auto b : bits) ones += b;
    return static_cast<double>(ones) / static_cast<double>(bits.size());
}

SpinMapping resolve_mapping(const SnapshotSet& set, const SpinMapping& mapping) {
    if (mapping.kind != MappingKind::StaggeredCentered || mapping.n_mean) return mapping;
    if (set.metadata().basis != Basis::Occupation)
        throw ConfigError("staggered mapping needs occupation-basis snapshots or an explicit n_mean");
    return SpinMapping::staggered(mean_occupation(set));
}

namespace {

void check_method(const ErrorMethod& method) {
    if (method.resamples < 2) throw ConfigError("error method needs at least 2 resamples/blocks");
}

DefectSpec on_chain(DefectSpec defect, const SnapshotSet& set) {
    defect.bc = set.metadata().bc;
    if (defect.inner) {
        auto inner = *defect.inner;
        inner.bc = defect.bc;
        defect.inner = std::make_shared<const DefectSpec>(inner);
    }
    return defect;
}

void check_inputs(const SnapshotSet& set, const DefectSpec& defect, const SpinMapping& mapping,
                  std::size_t min_M) {
    if (set.size() < min_M)
        throw DataError("estimator needs M >= " + std::to_string(min_M) + ", got " + std::to_string(set.size()));
    const bool uses_bonds = defect.kind == DefectKind::EnergyLine ||
                            (defect.kind == DefectKind::TwoCopyProduct && defect.inner &&
                             defect.inner->kind == DefectKind::EnergyLine);
    if (uses_bonds && mapping.kind == MappingKind::StaggeredCentered &&
        set.metadata().bc.periodic() && set.L() % 2 != 0)
        throw ConfigError("periodic energy defect with staggered mapping requires even L, got L=" +
                          std::to_string(set.L()));
}

/// Mapped spins for every record, record-major.
std::vector<double> mapped_spins(const SnapshotSet& set, const SpinMapping& mapping) {
    const std::size_t L = static_cast<std::size_t>(set.L());
    std::vector<double> z(set.size() * L);
    for (std::size_t m = 0; m < set.size(); ++m)
        mapping.apply(set[m], std::span<double>(z.data() + m * L, L));
    return z;
}

std::vector<double> single_copy_log_weights(const std::vector<double>& z, std::size_t L, const DefectSpec& defect) {
    const std::size_t M = z.size() / L;
    std::vector<double> w(M);
    if (defect.delta == 0.0) return w;
    for (std::size_t m = 0; m < M; ++m) w[m] = defect.log_weight(std::span<const double>(z.data() + m * L, L));
    return w;
}

/// Weighted mean summary of a subset described by counts c_m (multiplicities).
struct Accum {
    double max_w = -std::numeric_limits<double>::infinity();
    double den = 0.0;  // sum c_m exp(w_m - max_w)
    double num = 0.0;  // sum c_m exp(w_m - max_w) A_m
    double count = 0.0;
};

Accum weighted_sums(std::span<const double> w, std::span<const double> A, std::span<const std::uint32_t> counts) {
    Accum a;
    for (std::size_t m = 0; m < w.size(); ++m)
        if (counts[m] > 0) a.max_w = std::max(a.max_w, w[m]);
    for (std::size_t m = 0; m < w.size(); ++m) {
        if (counts[m] == 0) continue;
        const double e = static_cast<double>(counts[m]) * std::exp(w[m] - a.max_w);
        a.den += e;
        if (!A.empty()) a.num += e * A[m];
        a.count += counts[m];
    }
    return a;
}

enum class Target { LogMean, Ratio };

/// Statistic of one replicate: ln-mean of the weights, or the weighted ratio.
double statistic(const Accum& a, Target t) {
    if (t == Target::LogMean) return a.max_w + std::log(a.den / a.count);
    return a.num / a.den;
}

std::vector<double> replicate_statistics(std::span<const double> w, std::span<const double> A, Target target,
                                         const ErrorMethod& method, std::uint64_t seed) {
    const std::size_t M = w.size();
    std::vector<std::uint32_t> counts(M);
    std::vector<double> out;
    if (method.kind == ErrorMethod::Kind::Bootstrap) {
        Rng rng(seed);
        out.reserve(static_cast<std::size_t>(method.resamples));
        for (int b = 0; b < method.resamples; ++b) {
            std::fill(counts.begin(), counts.end(), 0u);
            for (std::size_t k = 0; k < M; ++k) ++counts[rng.below(M)];
            out.push_back(statistic(weighted_sums(w, A, counts), target));
        }
    } else {
        const std::size_t K = std::min<std::size_t>(static_cast<std::size_t>(method.resamples), M);
        out.reserve(K);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t lo = k * M / K, hi = (k + 1) * M / K;
            std::fill(counts.begin(), counts.end(), 1u);
            std::fill(counts.begin() + static_cast<std::ptrdiff_t>(lo), counts.begin() + static_cast<std::ptrdiff_t>(hi),
                      0u);
            out.push_back(statistic(weighted_sums(w, A, counts), target));
        }
    }
    return out;
}

double spread(std::span<const double> reps, bool jackknife) {
    if (!jackknife) return std::sqrt(sample_variance(reps));
    const double K = static_cast<double>(reps.size());
    const double m = mean_of(reps);
    double s = 0.0;
    for (const double r : reps) s += (r - m) * (r - m);
    return std::sqrt((K - 1.0) / K * s);
}

Estimate log_mean_estimate(std::span<const double> w, const ErrorMethod& method, std::uint64_t seed) {
    check_method(method);
    const std::size_t M = w.size();
    Estimate e;
    e.M_used = M;
    e.method = method;
    const double lm = log_sum_exp(w) - std::log(static_cast<double>(M));
    if (!std::isfinite(lm)) throw NumericError("defect log-mean is not finite");
    e.log_mean = lm;
    e.mean = std::exp(lm);

    // Relative replicates exp(ln<O>_b - ln<O>) give sigma_O / <O> directly,
    // without forming <O> itself when it would overflow.
    auto reps = replicate_statistics(w, {}, Target::LogMean, method, seed);
    for (auto& r : reps) r = std::exp(r - lm);
    const double rel = spread(reps, method.kind == ErrorMethod::Kind::Jackknife);
    e.log_std_error = rel;
    e.std_error = e.mean * rel;
    return e;
}

Estimate ratio_estimate(std::span<const double> w, std::span<const double> A, const ErrorMethod& method,
                        std::uint64_t seed) {
    check_method(method);
    Estimate e;
    e.M_used = w.size();
    e.method = method;

    // Uniform weights: plain sample mean, summed exactly as the unweighted estimator would.
    const bool uniform = std::all_of(w.begin(), w.end(), [&](double v) { return v == w.front(); });
    if (uniform) {
        e.mean = pairwise_sum(A) / static_cast<double>(A.size());
    } else {
        const double wmax = *std::max_element(w.begin(), w.end());
        std::vector<double> ew(w.size()), ewA(w.size());
        for (std::size_t m = 0; m < w.size(); ++m) {
            ew[m] = std::exp(w[m] - wmax);
            ewA[m] = ew[m] * A[m];
        }
        e.mean = pairwise_sum(std::span<const double>(ewA)) / pairwise_sum(std::span<const double>(ew));
    }
    auto reps = replicate_statistics(w, A, Target::Ratio, method, seed);
    e.std_error = spread(reps, method.kind == ErrorMethod::Kind::Jackknife);
    if (e.mean > 0.0) {
        e.log_mean = std::log(e.mean);
        e.log_std_error = e.std_error / e.mean;
    }
    return e;
}

} // namespace

Estimate estimate_defect(const SnapshotSet& set, const DefectSpec& defect_in, const SpinMapping& mapping_in,
                         const ErrorMethod& method, std::uint64_t seed) {
    if (defect_in.two_copy()) throw ConfigError("two-copy defect passed to the single-copy estimator");
    const auto mapping = resolve_mapping(set, mapping_in);
    const auto defect = on_chain(defect_in, set);
    check_inputs(set, defect, mapping, 2);
    const auto z = mapped_spins(set, mapping);
    const auto w = single_copy_log_weights(z, static_cast<std::size_t>(set.L()), defect);
    auto e = log_mean_estimate(w, method, seed);
    e.n_mean = mapping.n_mean;
    return e;
}

Estimate weighted_correlator(const SnapshotSet& set, const DefectSpec& defect_in, const SpinMapping& mapping_in,
                             int x, int xp, const ErrorMethod& method, std::uint64_t seed) {
    if (x == xp) throw ConfigError("correlator sites must differ");
    if (x < 0 || xp < 0 || x >= set.L() || xp >= set.L())
        throw ConfigError("correlator site out of range for L=" + std::to_string(set.L()));
    if (defect_in.two_copy()) throw ConfigError("two-copy defect passed to a single-copy estimator");
    const auto mapping = resolve_mapping(set, mapping_in);
    const auto defect = on_chain(defect_in, set);
    check_inputs(set, defect, mapping, 2);
    const std::size_t L = static_cast<std::size_t>(set.L());
    const auto z = mapped_spins(set, mapping);
    const auto w = single_copy_log_weights(z, L, defect);
    std::vector<double> A(set.size());
    for (std::size_t m = 0; m < A.size(); ++m) A[m] = z[m * L + static_cast<std::size_t>(x)] * z[m * L + static_cast<std::size_t>(xp)];
    auto e = ratio_estimate(w, A, method, seed);
    e.n_mean = mapping.n_mean;
    return e;
}

Estimate weighted_m2(const SnapshotSet& set, const DefectSpec& defect_in, const SpinMapping& mapping_in,
                     const ErrorMethod& method, std::uint64_t seed) {
    if (defect_in.two_copy()) throw ConfigError("two-copy defect passed to a single-copy estimator");
    const auto mapping = resolve_mapping(set, mapping_in);
    const auto defect = on_chain(defect_in, set);
    check_inputs(set, defect, mapping, 2);
    const std::size_t L = static_cast<std::size_t>(set.L());
    const auto z = mapped_spins(set, mapping);
    const auto w = single_copy_log_weights(z, L, defect);
    const double inv_L2 = 1.0 / (static_cast<double>(L) * static_cast<double>(L));
    std::vector<double> A(set.size());
    for (std::size_t m = 0; m < A.size(); ++m) {
        double s = 0.0;
        for (std::size_t j = 0; j < L; ++j) s += z[m * L + j];
        A[m] = s * s * inv_L2;
    }
    auto e = ratio_estimate(w, A, method, seed);
    e.n_mean = mapping.n_mean;
    return e;
}

Estimate two_copy_estimate(const SnapshotSet& set, const DefectSpec& defect_in, const SpinMapping& mapping_in,
                           std::uint64_t seed, const ErrorMethod& method) {
    if (!defect_in.two_copy()) throw ConfigError("two-copy estimator needs an inter-copy or product defect");
    const auto mapping = resolve_mapping(set, mapping_in);
    const auto defect = on_chain(defect_in, set);
    check_inputs(set, defect, mapping, 4);
    const auto [first, second] = split_halves(set, seed);
    if (first.L() != second.L()) throw DataError("two-copy halves have mismatched L");
    const std::size_t L = static_cast<std::size_t>(set.L());
    const std::size_t pairs = std::min(first.size(), second.size());
    const auto z1 = mapped_spins(first, mapping);
    const auto z2 = mapped_spins(second, mapping);
    std::vector<double> w(pairs);
    for (std::size_t m = 0; m < pairs; ++m)
        w[m] = defect.log_weight(std::span<const double>(z1.data() + m * L, L),
                                 std::span<const double>(z2.data() + m * L, L));
    auto e = log_mean_estimate(w, method, seed ^ 0x9e3779b97f4a7c15ULL);
    e.n_mean = mapping.n_mean;
    return e;
}

std::vector<EntropyPoint> defect_entropy_inputs(std::span<const SnapshotSet> sets, const DefectSpec& defect,
                                                const SpinMapping& mapping, const ErrorMethod& method,
                                                std::uint64_t seed) {
    std::set<int> sizes;
    for (const auto& s : sets) sizes.insert(s.L());
    if (sizes.size() < 3)
        throw DataError("fit-degeneracy: defect entropy needs at least 3 distinct sizes, got " +
                        std::to_string(sizes.size()));
    std::vector<EntropyPoint> out;
    out.reserve(sets.size());
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto e = estimate_defect(sets[k], defect, mapping, method, seed + k);
        out.push_back({sets[k].L(), *e.log_mean, *e.log_std_error});
    }
    std::sort(out.begin(), out.end(), [](const EntropyPoint& a, const EntropyPoint& b) { return a.L < b.L; });
    return out;
}

} // namespace snapdefect
