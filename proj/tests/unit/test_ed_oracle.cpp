#include <doctest.h>

#include <cmath>
#include <numeric>

#include "snapdefect/ed_oracle.hpp"
#include "snapdefect/errors.hpp"
#include "snapdefect/rng.hpp"

using namespace snapdefect;

namespace {

ModelSpec ising(int L, bool periodic, double h = 1.0) {
    ModelSpec s;
    s.L = L;
    s.h = h;
    s.bc.kind = periodic ? BoundaryKind::Periodic : BoundaryKind::Open;
    return s;
}

std::size_t index_of(std::initializer_list<int> up_bits) {
    std::size_t s = 0;
    int j = 0;
    for (const int b : up_bits) {
        if (b) s |= std::size_t{1} << j;
        ++j;
    }
    return s;
}

ed::BornDistribution point_mass(int L, std::size_t state) {
    ed::BornDistribution d;
    d.L = L;
    d.probabilities.assign(std::size_t{1} << L, 0.0);
    d.probabilities[state] = 1.0;
    return d;
}

} // namespace

// Reference numbers below come from dense numpy diagonalization of the same
// Hamiltonians, written independently of this library.

TEST_CASE("two-site critical Ising chain") {
    const auto gs = ed::ground_state(ising(2, false));
    CHECK(gs.energy == doctest::Approx(-2.23606797749979).epsilon(1e-12));
    CHECK(gs.residual <= 1e-10);
    const double norm = std::inner_product(gs.amplitudes.begin(), gs.amplitudes.end(), gs.amplitudes.begin(), 0.0);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));

    const auto d = ed::born_distribution(gs);
    const double up_up = d.probabilities[index_of({1, 1})];
    const double dn_dn = d.probabilities[index_of({0, 0})];
    const double up_dn = d.probabilities[index_of({1, 0})];
    const double dn_up = d.probabilities[index_of({0, 1})];
    CHECK(up_up == doctest::Approx(0.36180339887499).epsilon(1e-10));
    CHECK(dn_dn == doctest::Approx(up_up).epsilon(1e-12));
    CHECK(up_dn == doctest::Approx(0.138196601125011).epsilon(1e-10));
    CHECK(dn_up == doctest::Approx(up_dn).epsilon(1e-12));
    CHECK(up_up + dn_dn + up_dn + dn_up == doctest::Approx(1.0).epsilon(1e-12));

    const auto z = ed::exact_defect_expectation(d, DefectSpec::zeeman(0.5));
    CHECK(z.value == doctest::Approx(1.3929768390786839).epsilon(1e-10));
    const auto e = ed::exact_defect_expectation(d, DefectSpec::energy(0.3));
    CHECK(e.value == doctest::Approx(0.9091528987936616).epsilon(1e-10));
}

TEST_CASE("critical Ising ground energies match dense diagonalization") {
    struct Ref {
        int L;
        bool periodic;
        double E;
    };
    for (const auto& r : {Ref{4, true, -5.226251859505504}, Ref{6, true, -7.727406610312549},
                          Ref{8, true, -10.251661790966036}, Ref{8, false, -9.837951447459417},
                          Ref{4, false, -4.758770483143628}}) {
        const auto gs = ed::ground_state(ising(r.L, r.periodic));
        CHECK(gs.energy == doctest::Approx(r.E).epsilon(1e-11));
        CHECK(gs.residual <= 1e-10);
    }
}

TEST_CASE("classical limit picks a single tilted configuration") {
    const auto gs = ed::ground_state(ising(5, false, 0.0));
    CHECK(gs.tilt > 0.0);
    const double norm = std::inner_product(gs.amplitudes.begin(), gs.amplitudes.end(), gs.amplitudes.begin(), 0.0);
    CHECK(norm == doctest::Approx(1.0));
    CHECK(gs.amplitudes[(1u << 5) - 1] == 1.0);  // all up
    CHECK(gs.energy == doctest::Approx(-4.0));
}

TEST_CASE("size cap") {
    CHECK_THROWS_AS(ed::ground_state(ising(20, false)), ConfigError);
    ed::Options o;
    o.max_sites = 4;
    CHECK_THROWS_AS(ed::ground_state(ising(6, false), o), ConfigError);
}

TEST_CASE("Born distribution of simple states") {
    ed::GroundState uniform;
    uniform.L = 3;
    uniform.amplitudes.assign(8, 1.0 / std::sqrt(8.0));
    const auto u = ed::born_distribution(uniform);
    for (const double p : u.probabilities) CHECK(p == doctest::Approx(0.125).epsilon(1e-14));

    ed::GroundState product;
    product.L = 4;
    product.amplitudes.assign(16, 0.0);
    product.amplitudes[15] = 1.0;
    const auto p = ed::born_distribution(product);
    CHECK(p.probabilities[15] == 1.0);
}

TEST_CASE("exact defect expectation: trivial cases and log-domain range") {
    const auto all_up = point_mass(4, 15);
    for (const double delta : {0.1, 0.7, -1.3}) {
        const auto e = ed::exact_defect_expectation(all_up, DefectSpec::zeeman(delta));
        CHECK(e.value == doctest::Approx(std::exp(-4.0 * delta)).epsilon(1e-14));
    }
    const auto d = ed::born_distribution(ed::ground_state(ising(6, true)));
    CHECK(ed::exact_defect_expectation(d, DefectSpec::zeeman(0.0)).value == 1.0);
    CHECK(ed::exact_defect_expectation(d, DefectSpec::energy(0.0, {BoundaryKind::Periodic})).value == 1.0);
    CHECK(ed::exact_two_copy_expectation(d, DefectSpec::inter_copy(0.0)).value == 1.0);

    const auto huge = ed::exact_defect_expectation(all_up, DefectSpec::zeeman(-200.0));
    CHECK(huge.log_value == doctest::Approx(800.0).epsilon(1e-14));
    CHECK(std::isfinite(huge.log_value));
    for (const double delta : {-0.8, 0.3, 2.0}) CHECK(ed::exact_defect_expectation(d, DefectSpec::zeeman(delta)).value > 0.0);
}

TEST_CASE("Zeeman expectation factorizes over a product-state distribution") {
    const int L = 5;
    Rng rng(4);
    std::vector<double> q(L);
    for (auto& v : q) v = 0.1 + 0.8 * rng.uniform();  // P(Z_j = +1)
    ed::BornDistribution d;
    d.L = L;
    d.probabilities.assign(1u << L, 1.0);
    for (std::size_t s = 0; s < d.probabilities.size(); ++s)
        for (int j = 0; j < L; ++j) d.probabilities[s] *= ((s >> j) & 1u) ? q[j] : 1.0 - q[j];
    const double delta = 0.37;
    double expected = 1.0;
    for (int j = 0; j < L; ++j) expected *= q[j] * std::exp(-delta) + (1.0 - q[j]) * std::exp(delta);
    CHECK(ed::exact_defect_expectation(d, DefectSpec::zeeman(delta)).value == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("born_sample") {
    const auto all_up = point_mass(3, 7);
    const auto s = ed::born_sample(all_up, 50, 1);
    REQUIRE(s.size() == 50);
    for (std::size_t m = 0; m < s.size(); ++m)
        for (const auto b : s[m]) CHECK(b == 1);

    const auto d = ed::born_distribution(ed::ground_state(ising(6, false)));
    CHECK(ed::born_sample(d, 1000, 9) == ed::born_sample(d, 1000, 9));
    CHECK_FALSE(ed::born_sample(d, 1000, 9) == ed::born_sample(d, 1000, 10));
}

TEST_CASE("born_sample frequencies") {
    ed::BornDistribution uniform;
    uniform.L = 2;
    uniform.probabilities.assign(4, 0.25);
    const auto s = ed::born_sample(uniform, 1000000, 3);
    std::vector<double> freq(4, 0.0);
    for (std::size_t m = 0; m < s.size(); ++m) freq[s[m][0] | (s[m][1] << 1)] += 1.0 / 1e6;
    for (const double f : freq) CHECK(std::abs(f - 0.25) <= 0.002);

    for (const int L : {2, 4, 6}) {
        const auto d = ed::born_distribution(ed::ground_state(ising(L, false)));
        const std::size_t M = 20000;
        const auto samples = ed::born_sample(d, M, 11);
        std::vector<double> counts(d.probabilities.size(), 0.0);
        for (std::size_t m = 0; m < samples.size(); ++m) {
            std::size_t idx = 0;
            for (int j = 0; j < L; ++j) idx |= static_cast<std::size_t>(samples[m][j]) << j;
            counts[idx] += 1.0;
        }
        double tv = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) tv += 0.5 * std::abs(counts[k] / M - d.probabilities[k]);
        CHECK(tv <= 5.0 * std::sqrt(static_cast<double>(counts.size()) / M));
    }
}

TEST_CASE("full-spectrum thermal energy") {
    const auto table = build_ising(4, 1.0, 1.0, {BoundaryKind::Periodic});
    CHECK(ed::thermal_averages(table, 4.0).energy == doctest::Approx(-5.1589143319030075).epsilon(1e-11));
}

TEST_CASE("Rydberg ground state uses occupation basis snapshots") {
    ModelSpec s;
    s.kind = ModelKind::RydbergChain;
    s.L = 8;
    s.delta_detuning = 1.01;
    const auto gs = ed::ground_state(s);
    CHECK(gs.residual <= 1e-10);
    const auto d = ed::born_distribution(gs);
    const double n = ed::exact_mean_occupation(d);
    CHECK(n > 0.0);
    CHECK(n < 0.5);
    CHECK(ed::born_sample(d, 10, 1).metadata().basis == Basis::Occupation);
}
