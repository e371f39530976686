#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "snapdefect/errors.hpp"
#include "snapdefect/rng.hpp"
#include "snapdefect/snapshots.hpp"

using namespace snapdefect;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "snapdefect_tests";
    fs::create_directories(dir);
    return dir / name;
}

SnapshotSet random_set(int L, std::size_t M, std::uint64_t seed) {
    SnapshotMetadata meta;
    meta.basis = (seed % 2) ? Basis::Occupation : Basis::SpinZ;
    meta.provenance = "random test data";
    meta.seed_info = {{"seed", seed}};
    SnapshotSet s(L, meta);
    Rng rng(seed);
    std::vector<std::uint8_t> rec(static_cast<std::size_t>(L));
    for (std::size_t m = 0; m < M; ++m) {
        for (auto& b : rec) b = rng.coin() ? 1 : 0;
        s.append(rec);
    }
    return s;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace

TEST_CASE("QSNP payload bit order: site 0 is the least significant bit") {
    SnapshotSet s(3, {});
    const std::vector<std::uint8_t> rec = {1, 0, 1};
    s.append(rec);
    const auto bytes = encode_set(s);
    REQUIRE(bytes.size() >= 11);
    CHECK(bytes[0] == 'Q');
    CHECK(bytes[3] == 'P');
    CHECK(bytes[4] == 1);  // version, little endian
    CHECK(bytes[5] == 0);
    CHECK(bytes.back() == 0b00000101);
}

TEST_CASE("QSNP round trip is the identity") {
    Rng pick(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int L = 1 + static_cast<int>(pick.below(64));
        const std::size_t M = 1 + pick.below(1000);
        const auto s = random_set(L, M, 1000 + static_cast<std::uint64_t>(trial));
        const auto path = scratch("roundtrip.qsnp");
        write_set(s, path);
        const auto back = read_set(path);
        CHECK(back == s);
        CHECK(back.metadata().basis == s.metadata().basis);
        CHECK(back.metadata().provenance == s.metadata().provenance);
        CHECK(encode_set(back) == encode_set(s));
    }
}

TEST_CASE("QSNP rejects bad magic and truncated payloads") {
    auto bytes = encode_set(random_set(10, 5, 3));
    auto bad = bytes;
    bad[0] = 'X';
    bad[1] = 'X';
    bad[2] = 'X';
    bad[3] = 'X';
    CHECK_THROWS_AS(decode_set(bad), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(decode_set(bad_version), FormatError);
    bytes.pop_back();
    try {
        decode_set(bytes);
        FAIL("truncated payload accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("records must have length L and binary values") {
    SnapshotSet s(3, {});
    const std::vector<std::uint8_t> short_rec = {1, 0};
    const std::vector<std::uint8_t> bad_rec = {1, 2, 0};
    CHECK_THROWS_AS(s.append(short_rec), DataError);
    CHECK_THROWS_AS(s.append(bad_rec), DataError);
}

TEST_CASE("CSV ingestion") {
    const auto p = scratch("two_rows.csv");
    write_file(p, "1,0,1\n0,1,0\n");
    const auto s = ingest_csv(p, 3, Basis::SpinZ, {}, "lab run 7");
    REQUIRE(s.size() == 2);
    CHECK(s[0][0] == 1);
    CHECK(s[1][1] == 1);
    CHECK(s.metadata().source == SnapshotSource::External);
    CHECK(s.metadata().provenance == "lab run 7");

    const auto with_header = scratch("header.csv");
    write_file(with_header, "s0,s1,s2\n1,1,1\n");
    CHECK(ingest_csv(with_header, 3, Basis::SpinZ, {}, "").size() == 1);

    const auto bad = scratch("bad.csv");
    write_file(bad, "1,2,0\n");
    try {
        ingest_csv(bad, 3, Basis::SpinZ, {}, "");
        FAIL("non-binary token accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    const auto wrong_len = scratch("len.csv");
    write_file(wrong_len, "1,0,1\n1,0\n");
    try {
        ingest_csv(wrong_len, 3, Basis::SpinZ, {}, "");
        FAIL("short row accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    const auto empty = scratch("empty.csv");
    write_file(empty, "");
    CHECK_THROWS_AS(ingest_csv(empty, 3, Basis::SpinZ, {}, ""), DataError);
}

TEST_CASE("CSV export then ingest preserves content") {
    const auto s = random_set(13, 200, 8);
    const auto p = scratch("export.csv");
    export_csv(s, p);
    const auto back = ingest_csv(p, 13, s.metadata().basis, s.metadata().bc, "re-ingested");
    CHECK(back == s);
}

TEST_CASE("split_halves sizes, determinism and permutation property") {
    const auto two = random_set(4, 2, 5);
    const auto [a, b] = split_halves(two, 1);
    CHECK(a.size() == 1);
    CHECK(b.size() == 1);

    const auto s = random_set(6, 101, 6);
    const auto [h1, h2] = split_halves(s, 42);
    CHECK(h1.size() == 51);
    CHECK(h2.size() == 50);
    const auto [g1, g2] = split_halves(s, 42);
    CHECK(g1 == h1);
    CHECK(g2 == h2);
    CHECK_FALSE(h1.metadata().annotations.empty());

    // Index sets are disjoint and exhaustive.
    auto perm = split_permutation(101, 42);
    std::sort(perm.begin(), perm.end());
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);

    // Multiset of records is preserved.
    std::map<std::vector<std::uint8_t>, int> count;
    for (std::size_t m = 0; m < s.size(); ++m) ++count[{s[m].begin(), s[m].end()}];
    for (const auto* h : {&h1, &h2})
        for (std::size_t m = 0; m < h->size(); ++m) --count[{(*h)[m].begin(), (*h)[m].end()}];
    for (const auto& [rec, c] : count) CHECK(c == 0);

    SnapshotSet one(3, {});
    one.append(std::vector<std::uint8_t>{1, 1, 1});
    CHECK_THROWS_AS(split_halves(one, 1), DataError);
}

TEST_CASE("concatenate keeps order") {
    const auto a = random_set(5, 3, 1), b = random_set(5, 4, 2);
    const std::vector<SnapshotSet> parts = {a, b};
    const auto c = concatenate(parts);
    REQUIRE(c.size() == 7);
    for (std::size_t m = 0; m < 3; ++m) CHECK(std::equal(c[m].begin(), c[m].end(), a[m].begin()));
    for (std::size_t m = 0; m < 4; ++m) CHECK(std::equal(c[3 + m].begin(), c[3 + m].end(), b[m].begin()));
}
