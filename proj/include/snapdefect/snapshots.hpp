#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snapdefect/model.hpp"

namespace snapdefect {

/// Measurement basis of the stored bits. SpinZ: bit 1 means Z = +1.
/// Occupation: bit 1 means a Rydberg-occupied site (n = 1).
enum class Basis { SpinZ, Occupation };
enum class SnapshotSource { SSE, Exact, External };

std::string to_string(Basis b);
std::string to_string(SnapshotSource s);
Basis parse_basis(const std::string& text);
SnapshotSource parse_source(const std::string& text);

struct SnapshotMetadata {
    Basis basis = Basis::SpinZ;
    BoundaryCondition bc{};
    SnapshotSource source = SnapshotSource::External;
    std::optional<ModelSpec> model;
    std::string provenance;
    nlohmann::json seed_info = nlohmann::json::object();
    std::vector<std::string> annotations;
};

/// M projective measurement records of L sites each, one byte (0 or 1) per
/// site in memory.
class SnapshotSet {
public:
    SnapshotSet(int L, SnapshotMetadata metadata);

    int L() const { return L_; }
    std::size_t size() const { return L_ == 0 ? 0 : bits_.size() / static_cast<std::size_t>(L_); }
    bool empty() const { return bits_.empty(); }

    std::span<const std::uint8_t> operator[](std::size_t m) const {
        return {bits_.data() + m * static_cast<std::size_t>(L_), static_cast<std::size_t>(L_)};
    }

    /// Appends one record; throws DataError on wrong length or non-binary values.
    void append(std::span<const std::uint8_t> record);
    void reserve(std::size_t M) { bits_.reserve(M * static_cast<std::size_t>(L_)); }

    const SnapshotMetadata& metadata() const { return meta_; }
    SnapshotMetadata& metadata() { return meta_; }

    /// All bits, record-major.
    std::span<const std::uint8_t> raw() const { return bits_; }

    friend bool operator==(const SnapshotSet& a, const SnapshotSet& b) {
        return a.L_ == b.L_ && a.bits_ == b.bits_;
    }

private:
    int L_;
    SnapshotMetadata meta_;
    std::vector<std::uint8_t> bits_;
};

/// Canonical JSON header (sorted keys) including L and M.
nlohmann::json metadata_to_json(const SnapshotSet& set);
SnapshotMetadata metadata_from_json(const nlohmann::json& j);

// QSNP binary format:
//   "QSNP" | u16 version (LE) | u32 header length (LE) | UTF-8 JSON header |
//   M records of ceil(L/8) bytes, site k -> bit (k % 8) of byte k / 8.
inline constexpr std::uint16_t kQsnpVersion = 1;

std::vector<std::uint8_t> encode_set(const SnapshotSet& set);
SnapshotSet decode_set(std::span<const std::uint8_t> bytes);

void write_set(const SnapshotSet& set, const std::filesystem::path& path);
SnapshotSet read_set(const std::filesystem::path& path);

void export_csv(const SnapshotSet& set, const std::filesystem::path& path);
SnapshotSet ingest_csv(const std::filesystem::path& path, int L, Basis basis, BoundaryCondition bc,
                       const std::string& provenance);

/// Seeded random permutation of the records, then first ceil(M/2) / last
/// floor(M/2). Both halves carry a split annotation.
std::pair<SnapshotSet, SnapshotSet> split_halves(const SnapshotSet& set, std::uint64_t seed);

/// Same permutation split_halves applies, exposed for index-level checks.
std::vector<std::size_t> split_permutation(std::size_t M, std::uint64_t seed);

/// Concatenates sets in the given order. Metadata comes from the first set.
SnapshotSet concatenate(std::span<const SnapshotSet> sets);

} // namespace snapdefect
