// Command-line driver: sample -> estimate -> entropy / fixedpoints / cross /
// collapse -> report.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snapdefect/config.hpp"
#include "snapdefect/errors.hpp"
#include "snapdefect/pipeline.hpp"

namespace fs = std::filesystem;
using namespace snapdefect;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out = "out";
};

RunConfig resolve(const Globals& g) {
    RunConfig cfg = g.config.empty() ? parse_config("") : load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    return cfg;
}

void emit(const CommandResult& r) {
    std::cout << r.text;
    std::cout << "manifest: " << r.manifest_path.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"snapdefect: nonlocal defect observables from projective-measurement snapshots"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "base seed (overrides [run].seed)");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output directory");
    app.set_version_flag("--version", std::string(kToolVersion));

    auto* sample = app.add_subcommand("sample", "generate snapshot files for every size (and grid value)");
    auto* exact = app.add_subcommand("exact", "exact ground-state reference values by Lanczos");

    auto* estimate = app.add_subcommand("estimate", "defect / magnetization estimates from snapshot files");
    std::vector<std::string> est_inputs;
    std::string defect_kind, mapping, observable = "defect";
    std::optional<double> delta;
    std::optional<int> bootstrap;
    std::optional<std::uint64_t> est_seed;
    estimate->add_option("inputs", est_inputs, "snapshot files or directories")->required();
    estimate->add_option("--defect", defect_kind, "zeeman|energy|twocopy")
        ->check(CLI::IsMember({"zeeman", "energy", "twocopy"}));
    estimate->add_option("--delta", delta, "defect strength");
    estimate->add_option("--mapping", mapping, "direct|staggered")->check(CLI::IsMember({"direct", "staggered"}));
    estimate->add_option("--bootstrap", bootstrap, "bootstrap resamples")->check(CLI::PositiveNumber);
    estimate->add_option("--observable", observable, "defect|m2|both")
        ->check(CLI::IsMember({"defect", "m2", "both"}));
    estimate->add_option("--seed", est_seed, "resampling seed");

    auto* entropy = app.add_subcommand("entropy", "defect entropy fit ln<O> = a L + gamma from snapshot files");
    std::vector<std::string> ent_inputs;
    entropy->add_option("inputs", ent_inputs, "snapshot files or directories")->required();

    auto* fixedpoints = app.add_subcommand("fixedpoints", "critical point and D_d(delta) along the line of fixed points");
    std::vector<std::string> fp_inputs;
    fixedpoints->add_option("inputs", fp_inputs, "snapshot files or directories")->required();

    auto* fit = app.add_subcommand("fit", "linear fit of ln<O> against L from estimate records");
    std::string fit_records;
    fit->add_option("records", fit_records, "estimates.jsonl")->required()->check(CLI::ExistingFile);

    auto* cross = app.add_subcommand("cross", "crossing point of M2 L^{2D} curves from estimate records");
    std::string cross_records;
    cross->add_option("records", cross_records, "estimates.jsonl")->required()->check(CLI::ExistingFile);

    auto* collapse = app.add_subcommand("collapse", "scaling collapse table from estimate records");
    std::string collapse_records;
    double delta_c = 0.0, D_d = 0.125;
    collapse->add_option("records", collapse_records, "estimates.jsonl")->required()->check(CLI::ExistingFile);
    collapse->add_option("--delta-c", delta_c, "critical tuning value")->required();
    collapse->add_option("--D", D_d, "scaling dimension");

    auto* report = app.add_subcommand("report", "consolidate manifests into one summary");
    std::vector<std::string> manifests;
    report->add_option("manifests", manifests, "manifest files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto paths = [](const std::vector<std::string>& v) { return std::vector<fs::path>(v.begin(), v.end()); };
    try {
        const fs::path out = g.out;
        if (*report) {
            emit(cmd_report(paths(manifests), out));
            return 0;
        }
        RunConfig cfg = resolve(g);
        if (*sample) {
            emit(cmd_sample(cfg, out));
        } else if (*exact) {
            emit(cmd_exact(cfg, out));
        } else if (*estimate) {
            if (!defect_kind.empty()) cfg.defect_kind = defect_kind;
            if (delta) cfg.delta = *delta;
            if (!mapping.empty()) cfg.mapping.kind = parse_mapping_kind(mapping);
            if (bootstrap) cfg.error = ErrorMethod::bootstrap(*bootstrap);
            if (est_seed) cfg.seed = *est_seed;
            const Observable obs = observable == "m2"     ? Observable::M2
                                   : observable == "both" ? Observable::Both
                                                          : Observable::Defect;
            emit(cmd_estimate(cfg, paths(est_inputs), obs, out));
        } else if (*entropy) {
            emit(cmd_entropy(cfg, paths(ent_inputs), out));
        } else if (*fixedpoints) {
            emit(cmd_fixedpoints(cfg, paths(fp_inputs), out));
        } else if (*fit) {
            emit(cmd_fit(cfg, fit_records, out));
        } else if (*cross) {
            emit(cmd_cross(cfg, cross_records, out));
        } else if (*collapse) {
            emit(cmd_collapse(cfg, collapse_records, delta_c, D_d, out));
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
