#include "snapdefect/snapshots.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "snapdefect/errors.hpp"
#include "snapdefect/rng.hpp"

namespace snapdefect {

std::string to_string(Basis b) { return b == Basis::SpinZ ? "spinz" : "occupation"; }

std::string to_string(SnapshotSource s) {
    switch (s) {
    case SnapshotSource::SSE: return "sse";
    case SnapshotSource::Exact: return "exact";
    case SnapshotSource::External: return "external";
    }
    return "external";
}

Basis parse_basis(const std::string& text) {
    if (text == "spinz") return Basis::SpinZ;
    if (text == "occupation") return Basis::Occupation;
    throw ConfigError("unknown basis '" + text + "' (expected spinz|occupation)");
}

SnapshotSource parse_source(const std::string& text) {
    if (text == "sse") return SnapshotSource::SSE;
    if (text == "exact") return SnapshotSource::Exact;
    if (text == "external") return SnapshotSource::External;
    throw ConfigError("unknown snapshot source '" + text + "' (expected sse|exact|external)");
}

SnapshotSet::SnapshotSet(int L, SnapshotMetadata metadata) : L_(L), meta_(std::move(metadata)) {
    if (L < 1) throw DataError("snapshot length must be positive");
}

void SnapshotSet::append(std::span<const std::uint8_t> record) {
    if (record.size() != static_cast<std::size_t>(L_))
        throw DataError("snapshot has " + std::to_string(record.size()) + " sites, expected " +
                        std::to_string(L_));
    for (const auto b : record)
        if (b > 1) throw DataError("snapshot values must be 0 or 1");
    bits_.insert(bits_.end(), record.begin(), record.end());
}

nlohmann::json metadata_to_json(const SnapshotSet& set) {
    const auto& m = set.metadata();
    nlohmann::json j;
    j["L"] = set.L();
    j["M"] = set.size();
    j["basis"] = to_string(m.basis);
    j["bc"] = to_string(m.bc);
    j["source"] = to_string(m.source);
    j["model"] = m.model ? nlohmann::json(*m.model) : nlohmann::json(nullptr);
    j["provenance"] = m.provenance;
    j["seed_info"] = m.seed_info;
    j["annotations"] = m.annotations;
    return j;
}

SnapshotMetadata metadata_from_json(const nlohmann::json& j) {
    SnapshotMetadata m;
    m.basis = parse_basis(j.at("basis").get<std::string>());
    m.bc = parse_boundary(j.at("bc").get<std::string>());
    m.source = parse_source(j.at("source").get<std::string>());
    if (j.contains("model") && !j["model"].is_null()) m.model = j["model"].get<ModelSpec>();
    m.provenance = j.value("provenance", std::string{});
    m.seed_info = j.value("seed_info", nlohmann::json::object());
    m.annotations = j.value("annotations", std::vector<std::string>{});
    return m;
}

namespace {

constexpr char kMagic[4] = {'Q', 'S', 'N', 'P'};

std::size_t record_bytes(int L) { return (static_cast<std::size_t>(L) + 7) / 8; }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

} // namespace

std::vector<std::uint8_t> encode_set(const SnapshotSet& set) {
    const std::string header = metadata_to_json(set).dump();
    const std::size_t rb = record_bytes(set.L());
    std::vector<std::uint8_t> out;
    out.reserve(10 + header.size() + rb * set.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u16(out, kQsnpVersion);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    for (std::size_t m = 0; m < set.size(); ++m) {
        const auto rec = set[m];
        const std::size_t base = out.size();
        out.resize(base + rb, 0);
        for (std::size_t k = 0; k < rec.size(); ++k)
            if (rec[k]) out[base + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    }
    return out;
}

SnapshotSet decode_set(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                                        [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; }))
        throw FormatError("not a QSNP file (bad magic)");
    if (bytes.size() < 10) throw FormatError("truncated QSNP preamble at byte offset " + std::to_string(bytes.size()));
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (version != kQsnpVersion)
        throw FormatError("unsupported QSNP version " + std::to_string(version));
    std::uint32_t hlen = 0;
    for (int k = 0; k < 4; ++k) hlen |= static_cast<std::uint32_t>(bytes[6 + k]) << (8 * k);
    const std::size_t payload_start = 10 + static_cast<std::size_t>(hlen);
    if (bytes.size() < payload_start)
        throw FormatError("truncated QSNP header: expected " + std::to_string(hlen) +
                          " header bytes, file ends at byte offset " + std::to_string(bytes.size()));

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + static_cast<std::ptrdiff_t>(payload_start));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed QSNP metadata header: ") + e.what());
    }
    int L = 0;
    std::size_t M = 0;
    SnapshotMetadata meta;
    try {
        L = header.at("L").get<int>();
        M = header.at("M").get<std::size_t>();
        meta = metadata_from_json(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("incomplete QSNP metadata header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid QSNP metadata header: ") + e.what());
    }
    if (L < 1) throw FormatError("QSNP header has nonpositive L");

    const std::size_t rb = record_bytes(L);
    const std::size_t expected = payload_start + rb * M;
    if (bytes.size() < expected)
        throw FormatError("truncated QSNP payload: record " + std::to_string((bytes.size() - payload_start) / rb) +
                          " incomplete at byte offset " + std::to_string(bytes.size()) + " (expected " +
                          std::to_string(expected) + " bytes)");
    if (bytes.size() > expected)
        throw FormatError("trailing data after QSNP payload at byte offset " + std::to_string(expected));

    SnapshotSet set(L, std::move(meta));
    set.reserve(M);
    std::vector<std::uint8_t> rec(static_cast<std::size_t>(L));
    for (std::size_t m = 0; m < M; ++m) {
        const std::size_t base = payload_start + m * rb;
        for (int k = 0; k < L; ++k) rec[k] = (bytes[base + k / 8] >> (k % 8)) & 1u;
        set.append(rec);
    }
    return set;
}

void write_set(const SnapshotSet& set, const std::filesystem::path& path) {
    const auto bytes = encode_set(set);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

SnapshotSet read_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open snapshot file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_set(bytes);
}

void export_csv(const SnapshotSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    std::string line;
    for (std::size_t m = 0; m < set.size(); ++m) {
        line.clear();
        const auto rec = set[m];
        for (std::size_t k = 0; k < rec.size(); ++k) {
            if (k) line += ',';
            line += rec[k] ? '1' : '0';
        }
        line += '\n';
        out << line;
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream is(s);
    while (std::getline(is, tok, ',')) out.push_back(trim(tok));
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

} // namespace

SnapshotSet ingest_csv(const std::filesystem::path& path, int L, Basis basis, BoundaryCondition bc,
                       const std::string& provenance) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");
    SnapshotMetadata meta;
    meta.basis = basis;
    meta.bc = bc;
    meta.source = SnapshotSource::External;
    meta.provenance = provenance;
    SnapshotSet set(L, std::move(meta));

    std::string raw;
    std::size_t line_no = 0;
    bool first_content = true;
    std::vector<std::uint8_t> rec(static_cast<std::size_t>(L));
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto tokens = split_commas(line);
        const bool numeric = std::all_of(tokens.begin(), tokens.end(), [](const std::string& t) {
            return !t.empty() && t.find_first_not_of("0123456789+-.eE") == std::string::npos;
        });
        if (first_content && !numeric) {
            first_content = false;  // header row
            continue;
        }
        first_content = false;
        if (tokens.size() != static_cast<std::size_t>(L))
            throw DataError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(L) +
                            " values, found " + std::to_string(tokens.size()));
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            if (tokens[k] == "0")
                rec[k] = 0;
            else if (tokens[k] == "1")
                rec[k] = 1;
            else
                throw DataError("CSV line " + std::to_string(line_no) + ": non-binary value '" + tokens[k] +
                                "' in column " + std::to_string(k + 1));
        }
        set.append(rec);
    }
    if (set.empty()) throw DataError("CSV file '" + path.string() + "' contains no snapshots");
    return set;
}

std::vector<std::size_t> split_permutation(std::size_t M, std::uint64_t seed) {
    std::vector<std::size_t> perm(M);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = M; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
}

std::pair<SnapshotSet, SnapshotSet> split_halves(const SnapshotSet& set, std::uint64_t seed) {
    const std::size_t M = set.size();
    if (M < 2) throw DataError("split_halves needs at least 2 snapshots, got " + std::to_string(M));
    const auto perm = split_permutation(M, seed);
    const std::size_t first = (M + 1) / 2;

    auto make_half = [&](std::size_t begin, std::size_t end, const char* which) {
        SnapshotMetadata meta = set.metadata();
        meta.annotations.push_back(std::string("split:") + which + " seed=" + std::to_string(seed));
        SnapshotSet half(set.L(), std::move(meta));
        half.reserve(end - begin);
        for (std::size_t k = begin; k < end; ++k) half.append(set[perm[k]]);
        return half;
    };
    return {make_half(0, first, "first"), make_half(first, M, "second")};
}

SnapshotSet concatenate(std::span<const SnapshotSet> sets) {
    if (sets.empty()) throw DataError("cannot concatenate an empty list of snapshot sets");
    SnapshotSet out(sets.front().L(), sets.front().metadata());
    std::size_t total = 0;
    for (const auto& s : sets) total += s.size();
    out.reserve(total);
    for (const auto& s : sets) {
        if (s.L() != out.L()) throw DataError("cannot concatenate snapshot sets of different L");
        for (std::size_t m = 0; m < s.size(); ++m) out.append(s[m]);
    }
    return out;
}

} // namespace snapdefect
