#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "snapdefect/model.hpp"

namespace snapdefect {

/// Diagonal nonlocal weight O({Z_j}).
///
///   ZeemanLine:       O = exp(-delta sum_j Z_j)
///   EnergyLine:       O = exp(-delta sum_bonds Z_j Z_{j+1})
///   InterCopy:        O = exp(-delta sum_j Z^1_j Z^2_j)            (two copies)
///   TwoCopyProduct:   O = inner(Z^1) * inner(Z^2)                   (two copies)
///
/// Bonds run over j = 0..L-2 for open chains and include (L-1, 0) when
/// periodic.
enum class DefectKind { ZeemanLine, EnergyLine, InterCopy, TwoCopyProduct };

struct DefectSpec {
    DefectKind kind = DefectKind::ZeemanLine;
    double delta = 0.0;
    BoundaryCondition bc{};
    std::shared_ptr<const DefectSpec> inner;  // TwoCopyProduct only

    static DefectSpec zeeman(double delta, BoundaryCondition bc = {});
    static DefectSpec energy(double delta, BoundaryCondition bc = {});
    static DefectSpec inter_copy(double delta, BoundaryCondition bc = {});
    static DefectSpec product(const DefectSpec& inner);

    bool two_copy() const { return kind == DefectKind::InterCopy || kind == DefectKind::TwoCopyProduct; }

    /// ln O for a single copy. Requires !two_copy().
    double log_weight(std::span<const double> z) const;
    /// ln O for a pair of copies. Requires two_copy().
    double log_weight(std::span<const double> z1, std::span<const double> z2) const;
};

std::string to_string(DefectKind kind);
DefectKind parse_defect_kind(const std::string& text);

enum class MappingKind { Direct, StaggeredCentered };

/// Snapshot bits to real spin variables.
///   Direct:             Z_j = 2 bit_j - 1
///   StaggeredCentered:  Z_j = (-1)^j (n_j - n_mean)
struct SpinMapping {
    MappingKind kind = MappingKind::Direct;
    std::optional<double> n_mean;

    static SpinMapping direct() { return {}; }
    static SpinMapping staggered(std::optional<double> n_mean = std::nullopt) {
        return {MappingKind::StaggeredCentered, n_mean};
    }

    /// Writes the mapped spins of one record into `out` (same length).
    /// StaggeredCentered requires n_mean to be set.
    void apply(std::span<const std::uint8_t> bits, std::span<double> out) const;
};

std::string to_string(MappingKind kind);
MappingKind parse_mapping_kind(const std::string& text);

} // namespace snapdefect
