#include "snapdefect/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

#include <json.hpp>

#include "snapdefect/errors.hpp"

namespace snapdefect {

std::string to_string(BoundaryCondition bc) { return bc.periodic() ? "periodic" : "open"; }

BoundaryCondition parse_boundary(const std::string& text) {
    if (text == "open") return {BoundaryKind::Open};
    if (text == "periodic") return {BoundaryKind::Periodic};
    throw ConfigError("unknown boundary condition '" + text + "' (expected open|periodic)");
}

std::string to_string(ModelKind kind) { return kind == ModelKind::IsingChain ? "ising" : "rydberg"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "ising") return ModelKind::IsingChain;
    if (text == "rydberg") return ModelKind::RydbergChain;
    throw ConfigError("unknown model kind '" + text + "' (expected ising|rydberg)");
}

namespace {

void check_size(int L, BoundaryCondition bc) {
    if (L < 2) throw ConfigError("chain length L must be >= 2, got " + std::to_string(L));
    if (bc.periodic() && L < 3)
        throw ConfigError("periodic chains require L >= 3, got " + std::to_string(L));
    if (L > 62) throw ConfigError("chain length L must be <= 62, got " + std::to_string(L));
}

void check_finite(double x, const char* name) {
    if (!std::isfinite(x)) throw ConfigError(std::string("parameter ") + name + " must be finite");
}

} // namespace

void ModelSpec::validate() const {
    check_size(L, bc);
    check_finite(J, "J");
    check_finite(h, "h");
    check_finite(omega, "omega");
    check_finite(delta_detuning, "detuning");
    check_finite(rb_over_a, "rb_over_a");
    if (!(rb_over_a > 0.0))
        throw ConfigError("rb_over_a must be positive");
    if (interaction_cutoff && *interaction_cutoff < 1)
        throw ConfigError("interaction cutoff must be >= 1 or full");
}

void ModelSpec::set_tuning(double value) {
    if (kind == ModelKind::IsingChain)
        h = value;
    else
        delta_detuning = value;
}

void to_json(nlohmann::json& j, const ModelSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)}, {"L", spec.L}, {"bc", to_string(spec.bc)}};
    if (spec.kind == ModelKind::IsingChain) {
        j["J"] = spec.J;
        j["h"] = spec.h;
    } else {
        j["omega"] = spec.omega;
        j["detuning"] = spec.delta_detuning;
        j["rb_over_a"] = spec.rb_over_a;
        if (spec.interaction_cutoff)
            j["cutoff"] = *spec.interaction_cutoff;
        else
            j["cutoff"] = "full";
    }
}

void from_json(const nlohmann::json& j, ModelSpec& spec) {
    spec = ModelSpec{};
    spec.kind = parse_model_kind(j.at("kind").get<std::string>());
    spec.L = j.at("L").get<int>();
    spec.bc = parse_boundary(j.at("bc").get<std::string>());
    if (spec.kind == ModelKind::IsingChain) {
        spec.J = j.at("J").get<double>();
        spec.h = j.at("h").get<double>();
    } else {
        spec.omega = j.at("omega").get<double>();
        spec.delta_detuning = j.at("detuning").get<double>();
        spec.rb_over_a = j.at("rb_over_a").get<double>();
        const auto& c = j.at("cutoff");
        if (c.is_number_integer()) spec.interaction_cutoff = c.get<int>();
    }
}

double CouplingTable::diagonal_energy(unsigned long long state) const {
    double e = offset;
    for (const auto& p : pairs) {
        const int zi = (state >> p.i) & 1ULL ? 1 : -1;
        const int zj = (state >> p.j) & 1ULL ? 1 : -1;
        e += p.V * zi * zj;
    }
    for (const auto& f : fields) {
        const int z = (state >> f.site) & 1ULL ? 1 : -1;
        e -= f.longitudinal * z;
    }
    return e;
}

bool CouplingTable::has_longitudinal_fields() const {
    return std::any_of(fields.begin(), fields.end(),
                       [](const SiteField& f) { return f.longitudinal != 0.0; });
}

int chain_distance(int i, int j, int L, BoundaryCondition bc) {
    const int d = std::abs(i - j);
    return bc.periodic() ? std::min(d, L - d) : d;
}

CouplingTable build_ising(int L, double J, double h, BoundaryCondition bc) {
    check_size(L, bc);
    check_finite(J, "J");
    check_finite(h, "h");
    CouplingTable t;
    t.L = L;
    t.bc = bc;
    for (int j = 0; j + 1 < L; ++j) t.pairs.push_back({j, j + 1, -J});
    if (bc.periodic()) t.pairs.push_back({0, L - 1, -J});
    for (int j = 0; j < L; ++j) t.fields.push_back({j, 0.0, h});
    return t;
}

CouplingTable build_rydberg(int L, double omega, double delta_detuning, double rb_over_a,
                            BoundaryCondition bc, std::optional<int> cutoff) {
    check_size(L, bc);
    check_finite(omega, "omega");
    check_finite(delta_detuning, "detuning");
    if (!(rb_over_a > 0.0) || !std::isfinite(rb_over_a))
        throw ConfigError("rb_over_a must be positive and finite");
    CouplingTable t;
    t.L = L;
    t.bc = bc;

    const int max_distance = bc.periodic() ? L / 2 : L - 1;
    int range = max_distance;
    if (cutoff) {
        if (*cutoff < 1) throw ConfigError("interaction cutoff must be >= 1 or full");
        if (*cutoff > max_distance) {
            if (!bc.periodic() && *cutoff >= L)
                t.warnings.push_back("interaction cutoff " + std::to_string(*cutoff) +
                                     " exceeds open chain extent; clamped to " +
                                     std::to_string(max_distance));
        } else {
            range = *cutoff;
        }
    }

    // U n_i n_j = (U/4)(1 + Z_i + Z_j + Z_i Z_j);  -D n_j = -(D/2)(1 + Z_j).
    const double c6 = omega * std::pow(rb_over_a, 6);
    std::vector<double> hz(L, delta_detuning / 2.0);
    t.offset = -delta_detuning * L / 2.0;
    for (int i = 0; i < L; ++i) {
        for (int j = i + 1; j < L; ++j) {
            const int d = chain_distance(i, j, L, bc);
            if (d > range) continue;
            const double U = c6 / std::pow(static_cast<double>(d), 6);
            t.pairs.push_back({i, j, U / 4.0});
            hz[i] -= U / 4.0;
            hz[j] -= U / 4.0;
            t.offset += U / 4.0;
        }
    }
    for (int j = 0; j < L; ++j) t.fields.push_back({j, hz[j], -omega / 2.0});
    return t;
}

CouplingTable build_table(const ModelSpec& spec, TableConsumer consumer) {
    spec.validate();
    if (spec.kind == ModelKind::IsingChain) return build_ising(spec.L, spec.J, spec.h, spec.bc);
    std::optional<int> cutoff = spec.interaction_cutoff;
    if (!cutoff && consumer == TableConsumer::Sampler) cutoff = std::max(1, spec.L / 2);
    return build_rydberg(spec.L, spec.omega, spec.delta_detuning, spec.rb_over_a, spec.bc, cutoff);
}

} // namespace snapdefect
