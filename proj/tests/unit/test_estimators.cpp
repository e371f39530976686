#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "snapdefect/ed_oracle.hpp"
#include "snapdefect/errors.hpp"
#include "snapdefect/estimators.hpp"
#include "snapdefect/numeric.hpp"
#include "snapdefect/rng.hpp"

using namespace snapdefect;

namespace {

const ErrorMethod kBoot = ErrorMethod::bootstrap(200);

SnapshotSet identical(int L, std::size_t M, std::uint8_t bit) {
    SnapshotSet s(L, {});
    const std::vector<std::uint8_t> rec(static_cast<std::size_t>(L), bit);
    for (std::size_t m = 0; m < M; ++m) s.append(rec);
    return s;
}

SnapshotSet random_set(int L, std::size_t M, std::uint64_t seed, Basis basis = Basis::SpinZ) {
    SnapshotMetadata meta;
    meta.basis = basis;
    SnapshotSet s(L, meta);
    Rng rng(seed);
    std::vector<std::uint8_t> rec(static_cast<std::size_t>(L));
    for (std::size_t m = 0; m < M; ++m) {
        for (auto& b : rec) b = rng.uniform() < 0.4 ? 1 : 0;
        s.append(rec);
    }
    return s;
}

struct Critical {
    ed::BornDistribution dist;
    SnapshotSet samples;
};

Critical critical_ising(int L, std::size_t M, std::uint64_t seed, bool periodic = false) {
    ModelSpec spec;
    spec.L = L;
    spec.bc.kind = periodic ? BoundaryKind::Periodic : BoundaryKind::Open;
    auto dist = ed::born_distribution(ed::ground_state(spec));
    auto samples = ed::born_sample(dist, M, seed);
    return {std::move(dist), std::move(samples)};
}

double m2_of(std::span<const double> z) {
    double s = 0.0;
    for (const double v : z) s += v;
    return s * s / static_cast<double>(z.size() * z.size());
}

} // namespace

TEST_CASE("zero defect strength gives exactly one") {
    const auto s = random_set(7, 500, 1);
    for (const auto& method : {kBoot, ErrorMethod::jackknife(20)}) {
        const auto e = estimate_defect(s, DefectSpec::zeeman(0.0), SpinMapping::direct(), method, 3);
        CHECK(e.mean == 1.0);
        CHECK(*e.log_mean == 0.0);
        CHECK(e.std_error == 0.0);
        CHECK(e.M_used == 500);
    }
}

TEST_CASE("identical all-up snapshots") {
    const auto s = identical(4, 100, 1);
    for (const double delta : {0.2, 0.5, -1.5}) {
        const auto e = estimate_defect(s, DefectSpec::zeeman(delta), SpinMapping::direct(), kBoot, 1);
        CHECK(*e.log_mean == doctest::Approx(-4.0 * delta).epsilon(1e-15));
        CHECK(e.mean == doctest::Approx(std::exp(-4.0 * delta)).epsilon(1e-15));
        CHECK(e.std_error <= 1e-15 * e.mean);
    }
    for (int x = 0; x < 4; ++x)
        for (int xp = 0; xp < 4; ++xp)
            if (x != xp)
                CHECK(weighted_correlator(s, DefectSpec::energy(0.3), SpinMapping::direct(), x, xp, kBoot, 1).mean ==
                      doctest::Approx(1.0).epsilon(1e-15));
    CHECK(weighted_m2(s, DefectSpec::energy(0.3), SpinMapping::direct(), kBoot, 1).mean ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("input validation") {
    const auto s = random_set(6, 50, 2);
    CHECK_THROWS_AS(estimate_defect(s, DefectSpec::zeeman(0.1), SpinMapping::staggered(), kBoot, 1), ConfigError);
    CHECK_THROWS_AS(weighted_correlator(s, DefectSpec::zeeman(0.1), SpinMapping::direct(), 2, 2, kBoot, 1), ConfigError);
    CHECK_THROWS_AS(weighted_correlator(s, DefectSpec::zeeman(0.1), SpinMapping::direct(), 0, 6, kBoot, 1), ConfigError);
    CHECK_THROWS_AS(estimate_defect(identical(4, 1, 1), DefectSpec::zeeman(0.1), SpinMapping::direct(), kBoot, 1),
                    DataError);
    CHECK_THROWS_AS(two_copy_estimate(identical(4, 3, 1), DefectSpec::inter_copy(0.1), SpinMapping::direct(), 1, kBoot),
                    DataError);

    SnapshotMetadata odd_meta;
    odd_meta.basis = Basis::Occupation;
    odd_meta.bc.kind = BoundaryKind::Periodic;
    SnapshotSet odd(5, odd_meta);
    for (int m = 0; m < 10; ++m) odd.append(std::vector<std::uint8_t>{1, 0, 1, 0, 0});
    CHECK_THROWS_AS(weighted_m2(odd, DefectSpec::energy(0.1), SpinMapping::staggered(), kBoot, 1), ConfigError);
    CHECK_NOTHROW(weighted_m2(odd, DefectSpec::zeeman(0.1), SpinMapping::staggered(), kBoot, 1));
}

TEST_CASE("staggered mapping uses the dataset mean occupation") {
    const auto s = random_set(8, 400, 5, Basis::Occupation);
    const double n = mean_occupation(s);
    const auto e = weighted_m2(s, DefectSpec::energy(0.2), SpinMapping::staggered(), kBoot, 1);
    REQUIRE(e.n_mean.has_value());
    CHECK(*e.n_mean == n);
    const auto explicit_n = weighted_m2(s, DefectSpec::energy(0.2), SpinMapping::staggered(n), kBoot, 1);
    CHECK(explicit_n.mean == e.mean);
}

TEST_CASE("zero strength reduces exactly to the plain estimators") {
    const auto s = random_set(9, 1000, 7);
    const auto m2 = weighted_m2(s, DefectSpec::energy(0.0), SpinMapping::direct(), kBoot, 1);
    std::vector<double> a, c;
    std::vector<double> z(9);
    for (std::size_t m = 0; m < s.size(); ++m) {
        SpinMapping::direct().apply(s[m], z);
        a.push_back(m2_of(z));
        c.push_back(z[2] * z[5]);
    }
    CHECK(m2.mean == pairwise_sum(std::span<const double>(a)) / 1000.0);
    const auto corr = weighted_correlator(s, DefectSpec::zeeman(0.0), SpinMapping::direct(), 2, 5, kBoot, 1);
    CHECK(corr.mean == pairwise_sum(std::span<const double>(c)) / 1000.0);
}

TEST_CASE("magnetization equals the diagonal plus all pair correlators") {
    const int L = 6;
    const auto s = random_set(L, 800, 9);
    const auto defect = DefectSpec::energy(0.4);
    const double m2 = weighted_m2(s, defect, SpinMapping::direct(), kBoot, 1).mean;
    double pairs = 0.0;
    for (int x = 0; x < L; ++x)
        for (int xp = x + 1; xp < L; ++xp)
            pairs += weighted_correlator(s, defect, SpinMapping::direct(), x, xp, kBoot, 1).mean;
    CHECK(std::abs(m2 * L * L - (L + 2.0 * pairs)) <= 1e-12 * L * L);
}

TEST_CASE("log-domain stability up to |delta| L = 700") {
    const auto up = identical(100, 10, 1);
    const auto e = estimate_defect(up, DefectSpec::zeeman(7.0), SpinMapping::direct(), kBoot, 1);
    CHECK(*e.log_mean == doctest::Approx(-700.0).epsilon(1e-14));

    const int L = 70;
    const auto s = random_set(L, 300, 4);
    for (const double delta : {10.0, -10.0}) {
        const auto r = estimate_defect(s, DefectSpec::zeeman(delta), SpinMapping::direct(), kBoot, 1);
        REQUIRE(std::isfinite(*r.log_mean));
        std::vector<long double> w;
        for (std::size_t m = 0; m < s.size(); ++m) {
            long double sum = 0.0L;
            for (const auto b : s[m]) sum += b ? 1.0L : -1.0L;
            w.push_back(-static_cast<long double>(delta) * sum);
        }
        long double mx = w[0], acc = 0.0L;
        for (const auto v : w) mx = std::max(mx, v);
        for (const auto v : w) acc += std::exp(v - mx);
        const long double ref = mx + std::log(acc / w.size());
        CHECK(std::abs(*r.log_mean - static_cast<double>(ref)) <= 1e-10 * std::abs(static_cast<double>(ref)));
        CHECK(r.mean >= 0.0);
    }
}

TEST_CASE("positivity of defect estimates") {
    const auto s = random_set(12, 300, 11);
    for (const double delta : {-2.0, -0.3, 0.3, 2.0}) {
        CHECK(estimate_defect(s, DefectSpec::zeeman(delta), SpinMapping::direct(), kBoot, 1).mean > 0.0);
        CHECK(estimate_defect(s, DefectSpec::energy(delta), SpinMapping::direct(), kBoot, 1).mean > 0.0);
    }
}

TEST_CASE("Born-sampled critical Ising chains agree with the exact sums") {
    const auto c8 = critical_ising(8, 100000, 31);
    const auto zeeman = DefectSpec::zeeman(0.5);
    const auto e = estimate_defect(c8.samples, zeeman, SpinMapping::direct(), kBoot, 2);
    const auto exact = ed::exact_defect_expectation(c8.dist, zeeman);
    CHECK(std::abs(*e.log_mean - exact.log_value) <= 4.0 * *e.log_std_error);

    const auto energy3 = DefectSpec::energy(0.3);
    const auto corr = weighted_correlator(c8.samples, energy3, SpinMapping::direct(), 1, 6, kBoot, 3);
    const double corr_exact = ed::exact_weighted_average(c8.dist, energy3, SpinMapping::direct(),
                                                         [](std::span<const double> z) { return z[1] * z[6]; });
    CHECK(std::abs(corr.mean - corr_exact) <= 4.0 * corr.std_error);

    const auto energy2 = DefectSpec::energy(0.2);
    const auto m2 = weighted_m2(c8.samples, energy2, SpinMapping::direct(), kBoot, 4);
    const double m2_exact = ed::exact_weighted_average(c8.dist, energy2, SpinMapping::direct(), m2_of);
    CHECK(std::abs(m2.mean - m2_exact) <= 4.0 * m2.std_error);

    const auto c6 = critical_ising(6, 100000, 32);
    const auto inter = DefectSpec::inter_copy(0.2);
    const auto tc = two_copy_estimate(c6.samples, inter, SpinMapping::direct(), 5, kBoot);
    const auto tc_exact = ed::exact_two_copy_expectation(c6.dist, inter);
    CHECK(std::abs(tc.mean - tc_exact.value) <= 4.0 * tc.std_error);
}

TEST_CASE("two-copy estimator") {
    const auto c = critical_ising(6, 20000, 40);
    const auto unit = two_copy_estimate(c.samples, DefectSpec::inter_copy(0.0), SpinMapping::direct(), 1, kBoot);
    CHECK(unit.mean == 1.0);
    CHECK(unit.std_error == 0.0);
    CHECK(unit.M_used == 10000);

    const auto inner = DefectSpec::zeeman(0.3);
    const auto prod = two_copy_estimate(c.samples, DefectSpec::product(inner), SpinMapping::direct(), 6, kBoot);
    const auto [h1, h2] = split_halves(c.samples, 6);
    const auto e1 = estimate_defect(h1, inner, SpinMapping::direct(), kBoot, 7);
    const auto e2 = estimate_defect(h2, inner, SpinMapping::direct(), kBoot, 8);
    const double expect = e1.mean * e2.mean;
    const double sigma = std::hypot(prod.std_error, expect * std::hypot(*e1.log_std_error, *e2.log_std_error));
    CHECK(std::abs(prod.mean - expect) <= 4.0 * sigma);
}

TEST_CASE("bootstrap error shrinks as M^-1/2") {
    ModelSpec spec;
    spec.L = 6;
    const auto dist = ed::born_distribution(ed::ground_state(spec));
    const auto defect = DefectSpec::zeeman(0.1);
    std::vector<double> err;
    for (const std::size_t M : {1000u, 10000u, 100000u}) {
        const auto s = ed::born_sample(dist, M, 50 + M);
        err.push_back(*estimate_defect(s, defect, SpinMapping::direct(), kBoot, 9).log_std_error);
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double ratio = err[k - 1] / err[k];
        CHECK(ratio == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
    }
}

TEST_CASE("jackknife and bootstrap errors agree") {
    const auto c = critical_ising(8, 20000, 60);
    const auto defect = DefectSpec::zeeman(0.5);
    const auto b = estimate_defect(c.samples, defect, SpinMapping::direct(), kBoot, 1);
    const auto j = estimate_defect(c.samples, defect, SpinMapping::direct(), ErrorMethod::jackknife(50), 1);
    CHECK(j.mean == b.mean);
    CHECK(*j.log_std_error == doctest::Approx(*b.log_std_error).epsilon(0.3));
}

TEST_CASE("CSV export and re-ingest leaves estimates unchanged") {
    const auto c = critical_ising(6, 5000, 70);
    const auto path = std::filesystem::temp_directory_path() / "snapdefect_est_roundtrip.csv";
    export_csv(c.samples, path);
    const auto back = ingest_csv(path, 6, Basis::SpinZ, {}, "round trip");
    const auto defect = DefectSpec::zeeman(0.5);
    const auto a = estimate_defect(c.samples, defect, SpinMapping::direct(), kBoot, 3);
    const auto b = estimate_defect(back, defect, SpinMapping::direct(), kBoot, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("defect entropy inputs") {
    // Deterministic all-up sets: ln<O> = -delta L exactly.
    std::vector<SnapshotSet> sets;
    for (const int L : {4, 6, 8, 10}) sets.push_back(identical(L, 20, 1));
    const double delta = 0.3;
    const auto pts = defect_entropy_inputs(sets, DefectSpec::zeeman(delta), SpinMapping::direct(), kBoot, 1);
    REQUIRE(pts.size() == 4);
    for (const auto& p : pts) {
        CHECK(p.log_mean == doctest::Approx(-delta * p.L).epsilon(1e-15));
        CHECK(p.log_std_error == 0.0);
    }
    const std::vector<SnapshotSet> two = {identical(4, 5, 1), identical(6, 5, 1)};
    CHECK_THROWS_AS(defect_entropy_inputs(two, DefectSpec::zeeman(delta), SpinMapping::direct(), kBoot, 1), DataError);
}
