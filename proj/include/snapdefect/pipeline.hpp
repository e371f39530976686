#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snapdefect/config.hpp"

namespace snapdefect {

inline constexpr const char* kToolVersion = SNAPDEFECT_VERSION;

/// Provenance record written next to every command's outputs.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string tool_version = kToolVersion;
    nlohmann::json seeds = nlohmann::json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, double>> timings;  // stage -> seconds
    std::string report_text;  // file holding the human-readable report
    std::string report_json;  // file holding the machine-readable report

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

struct CommandResult {
    RunManifest manifest;
    std::filesystem::path manifest_path;
    nlohmann::json report;
    std::string text;
};

/// Where estimate records come from: snapshot files, or a JSONL file written
/// by cmd_estimate.
struct EstimateRecord {
    std::string observable;  // defect | twocopy | m2
    int L = 0;
    std::optional<double> tuning;
    double delta = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
    std::optional<double> log_mean;
    std::optional<double> log_std_error;
    nlohmann::json raw;
};

std::vector<EstimateRecord> read_estimate_records(const std::filesystem::path& jsonl);

std::uint64_t derived_seed(std::uint64_t base, int L, std::size_t grid_index);

/// Snapshot file name for a size and (optional) grid value.
std::string snapshot_file_name(int L, std::optional<double> tuning);

CommandResult cmd_sample(const RunConfig& cfg, const std::filesystem::path& out);
CommandResult cmd_exact(const RunConfig& cfg, const std::filesystem::path& out);

enum class Observable { Defect, M2, Both };
CommandResult cmd_estimate(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs, Observable obs,
                           const std::filesystem::path& out);
CommandResult cmd_entropy(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs,
                          const std::filesystem::path& out);
CommandResult cmd_fit(const RunConfig& cfg, const std::filesystem::path& records, const std::filesystem::path& out);
CommandResult cmd_cross(const RunConfig& cfg, const std::filesystem::path& records, const std::filesystem::path& out);
CommandResult cmd_collapse(const RunConfig& cfg, const std::filesystem::path& records, double delta_c, double D_d,
                           const std::filesystem::path& out);
CommandResult cmd_fixedpoints(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs,
                              const std::filesystem::path& out);
CommandResult cmd_report(const std::vector<std::filesystem::path>& manifests, const std::filesystem::path& out);

/// Expands directories into the *.qsnp files they contain (sorted by name).
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

} // namespace snapdefect
