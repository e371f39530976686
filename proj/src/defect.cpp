#include "snapdefect/defect.hpp"

#include "snapdefect/errors.hpp"

namespace snapdefect {

DefectSpec DefectSpec::zeeman(double delta, BoundaryCondition bc) {
    return {DefectKind::ZeemanLine, delta, bc, nullptr};
}

DefectSpec DefectSpec::energy(double delta, BoundaryCondition bc) {
    return {DefectKind::EnergyLine, delta, bc, nullptr};
}

DefectSpec DefectSpec::inter_copy(double delta, BoundaryCondition bc) {
    return {DefectKind::InterCopy, delta, bc, nullptr};
}

DefectSpec DefectSpec::product(const DefectSpec& inner) {
    if (inner.two_copy()) throw ConfigError("two-copy product needs a single-copy inner defect");
    return {DefectKind::TwoCopyProduct, inner.delta, inner.bc, std::make_shared<DefectSpec>(inner)};
}

double DefectSpec::log_weight(std::span<const double> z) const {
    if (two_copy()) throw ConfigError("two-copy defect evaluated on a single copy");
    if (delta == 0.0) return 0.0;
    const std::size_t L = z.size();
    double s = 0.0;
    if (kind == DefectKind::ZeemanLine) {
        for (const double v : z) s += v;
    } else {
        for (std::size_t j = 0; j + 1 < L; ++j) s += z[j] * z[j + 1];
        if (bc.periodic() && L > 2) s += z[L - 1] * z[0];
    }
    return -delta * s;
}

double DefectSpec::log_weight(std::span<const double> z1, std::span<const double> z2) const {
    if (!two_copy()) throw ConfigError("single-copy defect evaluated on two copies");
    if (z1.size() != z2.size()) throw DataError("two-copy defect on copies of different length");
    if (kind == DefectKind::TwoCopyProduct) return inner->log_weight(z1) + inner->log_weight(z2);
    if (delta == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < z1.size(); ++j) s += z1[j] * z2[j];
    return -delta * s;
}

std::string to_string(DefectKind kind) {
    switch (kind) {
    case DefectKind::ZeemanLine: return "zeeman";
    case DefectKind::EnergyLine: return "energy";
    case DefectKind::InterCopy: return "twocopy";
    case DefectKind::TwoCopyProduct: return "product";
    }
    return "zeeman";
}

DefectKind parse_defect_kind(const std::string& text) {
    if (text == "zeeman") return DefectKind::ZeemanLine;
    if (text == "energy") return DefectKind::EnergyLine;
    if (text == "twocopy") return DefectKind::InterCopy;
    throw ConfigError("unknown defect kind '" + text + "' (expected zeeman|energy|twocopy)");
}

void SpinMapping::apply(std::span<const std::uint8_t> bits, std::span<double> out) const {
    if (kind == MappingKind::Direct) {
        for (std::size_t j = 0; j < bits.size(); ++j) out[j] = bits[j] ? 1.0 : -1.0;
        return;
    }
    if (!n_mean) throw ConfigError("staggered mapping requires a mean occupation");
    const double nm = *n_mean;
    for (std::size_t j = 0; j < bits.size(); ++j) {
        const double c = static_cast<double>(bits[j]) - nm;
        out[j] = (j % 2 == 0) ? c : -c;
    }
}

std::string to_string(MappingKind kind) { return kind == MappingKind::Direct ? "direct" : "staggered"; }

MappingKind parse_mapping_kind(const std::string& text) {
    if (text == "direct") return MappingKind::Direct;
    if (text == "staggered") return MappingKind::StaggeredCentered;
    throw ConfigError("unknown spin mapping '" + text + "' (expected direct|staggered)");
}

} // namespace snapdefect
