#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "snapdefect/ed_oracle.hpp"
#include "snapdefect/errors.hpp"
#include "snapdefect/model.hpp"

using namespace snapdefect;

namespace {

BoundaryCondition open_bc() { return {BoundaryKind::Open}; }
BoundaryCondition periodic_bc() { return {BoundaryKind::Periodic}; }

const Pair* find_pair(const CouplingTable& t, int i, int j) {
    for (const auto& p : t.pairs)
        if ((p.i == i && p.j == j) || (p.i == j && p.j == i)) return &p;
    return nullptr;
}

// Occupation-basis Rydberg Hamiltonian written out term by term, independent
// of the spin rewrite. Bit j set <-> n_j = 1.
Eigen::MatrixXd occupation_hamiltonian(int L, double omega, double detuning, double rb, bool periodic) {
    const int n = 1 << L;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s) {
        double e = 0.0;
        for (int i = 0; i < L; ++i) {
            const int ni = (s >> i) & 1;
            e -= detuning * ni;
            for (int j = i + 1; j < L; ++j) {
                int d = j - i;
                if (periodic) d = std::min(d, L - d);
                e += omega * std::pow(rb, 6) / std::pow(d, 6) * ni * ((s >> j) & 1);
            }
            H(s ^ (1 << i), s) += omega / 2.0;
        }
        H(s, s) += e;
    }
    return H;
}

} // namespace

TEST_CASE("open Ising chain has L-1 ferromagnetic bonds and uniform transverse field") {
    const auto t = build_ising(4, 1.0, 1.0, open_bc());
    REQUIRE(t.pairs.size() == 3);
    for (const auto& p : t.pairs) CHECK(p.V == -1.0);
    REQUIRE(t.fields.size() == 4);
    for (const auto& f : t.fields) {
        CHECK(std::abs(f.transverse) == 1.0);
        CHECK(f.longitudinal == 0.0);
    }
}

TEST_CASE("periodic Ising chain adds the wrap bond") {
    const auto t = build_ising(4, 1.0, 1.0, periodic_bc());
    CHECK(t.pairs.size() == 4);
    CHECK(find_pair(t, 3, 0) != nullptr);
    CHECK_THROWS_AS(build_ising(2, 1.0, 1.0, periodic_bc()), ConfigError);
    CHECK_THROWS_AS(build_ising(1, 1.0, 1.0, open_bc()), ConfigError);
}

TEST_CASE("Rydberg couplings follow (Rb/a)^6 / d^6") {
    // Occupation-basis couplings U = 1.92^6 = 50.0965 and U / 64 = 0.78276;
    // the spin form stores V = U / 4.
    const auto t = build_rydberg(3, 1.0, 1.01, 1.920, open_bc(), std::nullopt);
    const auto* p01 = find_pair(t, 0, 1);
    const auto* p12 = find_pair(t, 1, 2);
    const auto* p02 = find_pair(t, 0, 2);
    REQUIRE(p01);
    REQUIRE(p12);
    REQUIRE(p02);
    CHECK(4.0 * p01->V == doctest::Approx(50.09649854054399).epsilon(1e-12));
    CHECK(4.0 * p12->V == doctest::Approx(50.09649854054399).epsilon(1e-12));
    CHECK(4.0 * p02->V == doctest::Approx(0.7827577896959999).epsilon(1e-12));
}

TEST_CASE("Rydberg cutoff filters pairs and clamps with a warning on open chains") {
    const auto nn = build_rydberg(6, 1.0, 1.0, 1.92, open_bc(), 1);
    CHECK(nn.pairs.size() == 5);
    for (const auto& p : nn.pairs) CHECK(std::abs(p.i - p.j) == 1);
    const auto clamped = build_rydberg(4, 1.0, 1.0, 1.92, open_bc(), 10);
    CHECK(clamped.pairs.size() == 6);
    CHECK_FALSE(clamped.warnings.empty());
    CHECK_THROWS_AS(build_rydberg(4, 1.0, 1.0, 0.0, open_bc(), std::nullopt), ConfigError);
}

TEST_CASE("periodic Rydberg table is translation invariant") {
    const int L = 9;
    const auto t = build_rydberg(L, 1.0, 1.0, 1.92, periodic_bc(), std::nullopt);
    for (int r = 1; r <= L / 2; ++r) {
        const auto* ref = find_pair(t, 0, r);
        REQUIRE(ref);
        for (int i = 1; i < L; ++i) {
            const auto* p = find_pair(t, i, (i + r) % L);
            REQUIRE(p);
            CHECK(p->V == ref->V);
        }
    }
    for (const auto& f : t.fields) CHECK(f.longitudinal == doctest::Approx(t.fields.front().longitudinal).epsilon(1e-13));
}

TEST_CASE("spin rewrite preserves the occupation-basis spectrum") {
    for (const bool periodic : {false, true}) {
        for (const int L : {3, 5, 8}) {
            const double omega = 1.3, det = 0.7, rb = 1.92;
            const auto table = build_rydberg(L, omega, det, rb, periodic ? periodic_bc() : open_bc(), std::nullopt);
            const Eigen::VectorXd a = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ed::dense_hamiltonian(table)).eigenvalues();
            const Eigen::VectorXd b =
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(occupation_hamiltonian(L, omega, det, rb, periodic)).eigenvalues();
            const double scale = b.cwiseAbs().maxCoeff();
            CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10 * scale);
        }
    }
}

TEST_CASE("doubling omega, detuning and couplings doubles every table energy") {
    const auto a = build_rydberg(6, 1.0, 1.2, 1.92, open_bc(), std::nullopt);
    // rb^6 doubles when rb is scaled by 2^(1/6) at fixed omega; instead double
    // omega and detuning, which doubles V too.
    const auto b = build_rydberg(6, 2.0, 2.4, 1.92, open_bc(), std::nullopt);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t k = 0; k < a.pairs.size(); ++k) CHECK(b.pairs[k].V == 2.0 * a.pairs[k].V);
    for (std::size_t k = 0; k < a.fields.size(); ++k) {
        CHECK(b.fields[k].longitudinal == 2.0 * a.fields[k].longitudinal);
        CHECK(b.fields[k].transverse == 2.0 * a.fields[k].transverse);
    }
    CHECK(b.offset == 2.0 * a.offset);
}

TEST_CASE("model spec validation and JSON round trip") {
    ModelSpec s;
    s.kind = ModelKind::RydbergChain;
    s.L = 7;
    s.bc = periodic_bc();
    s.delta_detuning = 1.015;
    s.interaction_cutoff = 3;
    nlohmann::json j;
    to_json(j, s);
    ModelSpec back;
    from_json(j, back);
    CHECK(back == s);

    ModelSpec bad;
    bad.L = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.L = 4;
    bad.rb_over_a = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.rb_over_a = 1.92;
    bad.h = std::nan("");
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("minimum-image distance on periodic chains") {
    CHECK(chain_distance(0, 7, 8, periodic_bc()) == 1);
    CHECK(chain_distance(0, 7, 8, open_bc()) == 7);
    CHECK(chain_distance(2, 6, 8, periodic_bc()) == 4);
}

TEST_CASE("sampler tables default to a cutoff of L/2") {
    ModelSpec s;
    s.kind = ModelKind::RydbergChain;
    s.L = 10;
    const auto ed_table = build_table(s, TableConsumer::ExactDiagonalization);
    const auto mc_table = build_table(s, TableConsumer::Sampler);
    CHECK(ed_table.pairs.size() == 45);
    for (const auto& p : mc_table.pairs) CHECK(std::abs(p.i - p.j) <= 5);
}
