#include "snapdefect/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "snapdefect/analysis.hpp"
#include "snapdefect/ed_oracle.hpp"
#include "snapdefect/errors.hpp"
#include "snapdefect/estimators.hpp"
#include "snapdefect/snapshots.hpp"
#include "snapdefect/sse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace snapdefect {

json RunManifest::to_json() const {
    json t = json::object();
    for (const auto& [stage, sec] : timings) t[stage] = sec;
    return json{{"command", command},         {"config_hash", config_hash}, {"tool_version", tool_version},
                {"seeds", seeds},             {"inputs", inputs},           {"outputs", outputs},
                {"timings_seconds", t},       {"report_text", report_text}, {"report_json", report_json}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.config_hash = j.value("config_hash", "");
        m.tool_version = j.value("tool_version", "");
        m.seeds = j.value("seeds", json::object());
        m.inputs = j.value("inputs", std::vector<std::string>{});
        m.outputs = j.value("outputs", std::vector<std::string>{});
        const json timings = j.value("timings_seconds", json::object());
        for (const auto& [k, v] : timings.items()) m.timings.emplace_back(k, v.get<double>());
        m.report_text = j.value("report_text", "");
        m.report_json = j.value("report_json", "");
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::uint64_t derived_seed(std::uint64_t base, int L, std::size_t grid_index) {
    return base * 1000003ULL + static_cast<std::uint64_t>(L) * 1009ULL + grid_index * 7919ULL;
}

namespace {

std::string fmt(double x, int precision = 10) {
    std::ostringstream os;
    os << std::setprecision(precision) << x;
    return os.str();
}

std::string tuning_tag(double t) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << t;
    return os.str();
}

class Stopwatch {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes report files and the manifest, and fills in the result.
CommandResult finish(RunManifest manifest, const fs::path& out, const json& report, const std::string& text) {
    fs::create_directories(out);
    const std::string stem = manifest.command;
    manifest.report_json = (out / (stem + "_report.json")).string();
    manifest.report_text = (out / (stem + "_report.txt")).string();
    json rep = report;
    rep["manifest"] = (out / ("manifest_" + stem + ".json")).string();
    rep["config_hash"] = manifest.config_hash;
    write_text(manifest.report_json, rep.dump(2) + "\n");
    write_text(manifest.report_text, text);
    manifest.outputs.push_back(manifest.report_json);
    manifest.outputs.push_back(manifest.report_text);
    const fs::path mpath = out / ("manifest_" + stem + ".json");
    write_text(mpath, manifest.to_json().dump(2) + "\n");
    return {manifest, mpath, rep, text};
}

RunManifest start(const std::string& command, const RunConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.config_hash = cfg.hash();
    m.seeds["base"] = cfg.seed;
    return m;
}

std::string table_header(const RunManifest& m, const std::string& columns) {
    return "# manifest: manifest_" + m.command + ".json\n# config_hash: " + m.config_hash + "\n# " + columns + "\n";
}

std::optional<double> tuning_of(const SnapshotSet& set) {
    if (set.metadata().model) return set.metadata().model->tuning();
    return std::nullopt;
}

ed::Options ed_options(const RunConfig& cfg) {
    ed::Options o;
    o.max_sites = cfg.ed_max_sites;
    return o;
}

DefectSpec single_copy_defect(const RunConfig& cfg, double delta) {
    auto d = cfg.defect(delta);
    if (d.two_copy()) throw ConfigError("[defect].kind: magnetization estimates need a single-copy defect (zeeman|energy)");
    return d;
}

double m2_of(std::span<const double> z) {
    double s = 0.0;
    for (const double v : z) s += v;
    const double L = static_cast<double>(z.size());
    return s * s / (L * L);
}

struct LoadedSet {
    fs::path path;
    SnapshotSet set;
};

std::vector<LoadedSet> load_all(const std::vector<fs::path>& inputs) {
    const auto files = expand_inputs(inputs);
    if (files.empty()) throw DataError("no snapshot files given");
    std::vector<LoadedSet> out;
    for (const auto& f : files) out.push_back({f, read_set(f)});
    return out;
}

json record_json(const std::string& observable, const LoadedSet& ls, double delta, const RunConfig& cfg,
                 const Estimate& e) {
    json est;
    to_json(est, e);
    const auto t = tuning_of(ls.set);
    return json{{"observable", observable},
                {"L", ls.set.L()},
                {"tuning", t ? json(*t) : json(nullptr)},
                {"delta", delta},
                {"defect", cfg.defect_kind},
                {"mapping", to_string(cfg.mapping.kind)},
                {"input", ls.path.string()},
                {"estimate", est}};
}

/// Per-size curves of an observable versus the tuning parameter.
std::vector<SizeCurve> curves_from(const std::vector<EstimateRecord>& recs, const std::string& observable,
                                   double delta) {
    std::map<int, SizeCurve> by_L;
    for (const auto& r : recs) {
        if (r.observable != observable || r.delta != delta) continue;
        if (!r.tuning) throw DataError("estimate record for L=" + std::to_string(r.L) + " has no tuning value");
        auto& c = by_L[r.L];
        c.L = r.L;
        c.points.push_back({*r.tuning, r.mean, r.std_error});
    }
    std::vector<SizeCurve> out;
    for (auto& [L, c] : by_L) {
        std::sort(c.points.begin(), c.points.end(), [](const DataPoint& a, const DataPoint& b) { return a.x < b.x; });
        out.push_back(std::move(c));
    }
    return out;
}

/// Linear interpolation of a curve (value and error) at x.
DataPoint value_at(const SizeCurve& c, double x) {
    const auto& p = c.points;
    for (std::size_t k = 0; k < p.size(); ++k)
        if (p[k].x == x) return {static_cast<double>(c.L), p[k].y, p[k].sigma};
    for (std::size_t k = 1; k < p.size(); ++k) {
        if (p[k - 1].x < x && x < p[k].x) {
            const double t = (x - p[k - 1].x) / (p[k].x - p[k - 1].x);
            const double y = (1 - t) * p[k - 1].y + t * p[k].y;
            const double s = std::sqrt((1 - t) * (1 - t) * p[k - 1].sigma * p[k - 1].sigma +
                                       t * t * p[k].sigma * p[k].sigma);
            return {static_cast<double>(c.L), y, s};
        }
    }
    throw DataError("tuning value " + fmt(x) + " lies outside the scanned range for L=" + std::to_string(c.L));
}

std::string collapse_table(const RunManifest& m, const CollapseResult& c) {
    std::string t = table_header(m, "L delta x y sigma");
    for (const auto& p : c.table)
        t += std::to_string(p.L) + " " + fmt(p.delta) + " " + fmt(p.x) + " " + fmt(p.y) + " " + fmt(p.sigma) + "\n";
    return t;
}

} // namespace

std::string snapshot_file_name(int L, std::optional<double> tuning) {
    std::string name = "snap_L" + std::to_string(L);
    if (tuning) name += "_x" + tuning_tag(*tuning);
    return name + ".qsnp";
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> out;
    for (const auto& p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.path().extension() == ".qsnp") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            if (!fs::exists(p)) throw DataError("missing input file " + p.string());
            out.push_back(p);
        }
    }
    return out;
}

std::vector<EstimateRecord> read_estimate_records(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<EstimateRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            EstimateRecord r;
            r.observable = j.at("observable").get<std::string>();
            r.L = j.at("L").get<int>();
            if (!j.at("tuning").is_null()) r.tuning = j.at("tuning").get<double>();
            r.delta = j.at("delta").get<double>();
            const auto& e = j.at("estimate");
            r.mean = e.at("mean").get<double>();
            r.std_error = e.at("std_error").get<double>();
            if (e.contains("log_mean")) r.log_mean = e.at("log_mean").get<double>();
            if (e.contains("log_std_error")) r.log_std_error = e.at("log_std_error").get<double>();
            r.raw = j;
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

CommandResult cmd_sample(const RunConfig& cfg, const fs::path& out) {
    auto m = start("sample", cfg);
    Stopwatch sw;
    fs::create_directories(out);
    const auto tunings = cfg.tunings();
    const bool tagged = !cfg.tuning_grid.empty();
    json report = {{"command", "sample"}, {"source", to_string(cfg.source)}, {"files", json::array()}};
    std::string text = "sample: source=" + to_string(cfg.source) + " M=" + std::to_string(cfg.sampling.M) + "\n";
    for (const int L : cfg.sizes) {
        for (std::size_t g = 0; g < tunings.size(); ++g) {
            const auto model = cfg.model_at(L, tunings[g]);
            const auto seed = derived_seed(cfg.seed, L, g);
            std::optional<SnapshotSet> set;
            json entry = {{"L", L}, {"tuning", tunings[g]}, {"seed", seed}};
            if (cfg.source == SampleSource::Exact) {
                if (L > cfg.ed_max_sites)
                    throw ConfigError("[sampling].source = exact: L=" + std::to_string(L) + " exceeds ed_max_sites=" +
                                      std::to_string(cfg.ed_max_sites));
                const auto gs = ed::ground_state(model, ed_options(cfg));
                set.emplace(ed::born_sample(ed::born_distribution(gs), cfg.sampling.M, seed));
                entry["ground_energy"] = gs.energy;
            } else {
                auto scfg = cfg.sampling;
                scfg.seed = seed;
                scfg.threads = cfg.threads;
                std::vector<sse::ChainDiagnostics> diag;
                set.emplace(sse::run_sampling(build_table(model, TableConsumer::Sampler), scfg, model, &diag));
                json d = json::array();
                for (const auto& c : diag)
                    d.push_back({{"tau_abs_mag", c.tau_abs_mag},
                                 {"n_decorr", c.n_decorr},
                                 {"mean_expansion_order", c.mean_expansion_order}});
                entry["chains"] = d;
            }
            set->metadata().annotations.push_back("manifest:manifest_sample.json config_hash:" + m.config_hash);
            const fs::path file = out / snapshot_file_name(L, tagged ? std::optional<double>(tunings[g]) : std::nullopt);
            write_set(*set, file);
            m.outputs.push_back(file.string());
            m.seeds[file.filename().string()] = seed;
            entry["file"] = file.string();
            entry["M"] = set->size();
            report["files"].push_back(entry);
            text += "  " + file.filename().string() + "  L=" + std::to_string(L) + " tuning=" + fmt(tunings[g]) +
                    " M=" + std::to_string(set->size()) + "\n";
        }
    }
    m.timings.emplace_back("sample", sw.lap());
    return finish(m, out, report, text);
}

CommandResult cmd_exact(const RunConfig& cfg, const fs::path& out) {
    auto m = start("exact", cfg);
    Stopwatch sw;
    const auto tunings = cfg.tunings();
    json report = {{"command", "exact"}, {"entries", json::array()}};
    std::string text = "exact ground-state values (defect " + cfg.defect_kind + ", delta=" + fmt(cfg.delta) + ")\n";
    text += "L tuning energy ln<O> M2_weighted n_mean\n";
    for (const int L : cfg.sizes) {
        for (const double t : tunings) {
            const auto model = cfg.model_at(L, t);
            const auto gs = ed::ground_state(model, ed_options(cfg));
            const auto dist = ed::born_distribution(gs);
            auto mapping = cfg.mapping;
            const double n_mean = ed::exact_mean_occupation(dist);
            if (mapping.kind == MappingKind::StaggeredCentered && !mapping.n_mean) mapping.n_mean = n_mean;
            const auto defect = cfg.defect();
            const auto ex = defect.two_copy() ? ed::exact_two_copy_expectation(dist, defect, mapping)
                                              : ed::exact_defect_expectation(dist, defect, mapping);
            const auto m2_defect = defect.two_copy() ? DefectSpec::zeeman(0.0, cfg.model.bc) : defect;
            const double m2 = ed::exact_weighted_average(dist, m2_defect, mapping, m2_of);
            report["entries"].push_back({{"L", L},
                                         {"tuning", t},
                                         {"energy", gs.energy},
                                         {"residual", gs.residual},
                                         {"tilt", gs.tilt},
                                         {"defect_value", ex.value},
                                         {"defect_log_value", ex.log_value},
                                         {"m2_weighted", m2},
                                         {"n_mean", n_mean}});
            text += std::to_string(L) + " " + fmt(t) + " " + fmt(gs.energy, 12) + " " + fmt(ex.log_value, 12) + " " +
                    fmt(m2, 12) + " " + fmt(n_mean, 12) + "\n";
        }
    }
    m.timings.emplace_back("exact", sw.lap());
    return finish(m, out, report, text);
}

CommandResult cmd_estimate(const RunConfig& cfg, const std::vector<fs::path>& inputs, Observable obs,
                           const fs::path& out) {
    auto m = start("estimate", cfg);
    Stopwatch sw;
    const auto sets = load_all(inputs);
    m.timings.emplace_back("load", sw.lap());
    fs::create_directories(out);
    std::string jsonl;
    std::string table = table_header(m, "file L tuning observable delta mean std_error log_mean log_std_error");
    json report = {{"command", "estimate"}, {"records", json::array()}};
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto& ls = sets[k];
        m.inputs.push_back(ls.path.string());
        const std::uint64_t seed = cfg.seed + k;
        std::vector<json> recs;
        const auto defect = cfg.defect();
        if (obs != Observable::M2) {
            const auto e = defect.two_copy() ? two_copy_estimate(ls.set, defect, cfg.mapping, seed, cfg.error)
                                             : estimate_defect(ls.set, defect, cfg.mapping, cfg.error, seed);
            recs.push_back(record_json(defect.two_copy() ? "twocopy" : "defect", ls, cfg.delta, cfg, e));
        }
        if (obs != Observable::Defect) {
            const auto e = weighted_m2(ls.set, single_copy_defect(cfg, cfg.delta), cfg.mapping, cfg.error, seed);
            recs.push_back(record_json("m2", ls, cfg.delta, cfg, e));
        }
        for (auto& r : recs) {
            r["manifest"] = "manifest_estimate.json";
            jsonl += r.dump() + "\n";
            report["records"].push_back(r);
            const auto& e = r["estimate"];
            table += ls.path.filename().string() + " " + std::to_string(ls.set.L()) + " " +
                     (r["tuning"].is_null() ? std::string("-") : fmt(r["tuning"].get<double>())) + " " +
                     r["observable"].get<std::string>() + " " + fmt(cfg.delta) + " " + fmt(e["mean"].get<double>()) +
                     " " + fmt(e["std_error"].get<double>()) + " " +
                     (e.contains("log_mean") ? fmt(e["log_mean"].get<double>()) : std::string("-")) + " " +
                     (e.contains("log_std_error") ? fmt(e["log_std_error"].get<double>()) : std::string("-")) + "\n";
        }
    }
    m.timings.emplace_back("estimate", sw.lap());
    const fs::path rec_path = out / "estimates.jsonl", tab_path = out / "estimates.txt";
    write_text(rec_path, jsonl);
    write_text(tab_path, table);
    m.outputs = {rec_path.string(), tab_path.string()};
    return finish(m, out, report, table);
}

namespace {

CommandResult entropy_report(RunManifest m, const RunConfig& cfg, const std::vector<DataPoint>& pts,
                             const fs::path& out) {
    const auto fit = fit_defect_entropy(pts, cfg.analysis.chi2_threshold, cfg.analysis.max_drops);
    json fit_j;
    to_json(fit_j, fit);
    json report = {{"command", m.command}, {"fit", fit_j}, {"delta", cfg.delta}, {"defect", cfg.defect_kind}};
    std::string table = table_header(m, "L ln<O> sigma fit used");
    for (const auto& p : pts) {
        const bool used = std::find(fit.points_used.begin(), fit.points_used.end(), p.x) != fit.points_used.end();
        table += fmt(p.x) + " " + fmt(p.y) + " " + fmt(p.sigma) + " " + fmt(fit.slope * p.x + fit.intercept) + " " +
                 (used ? "1" : "0") + "\n";
    }
    const fs::path tab = out / (m.command + "_table.txt");
    fs::create_directories(out);
    write_text(tab, table);
    m.outputs.push_back(tab.string());
    std::string text = m.command + ": ln<O> = a L + gamma\n";
    text += "  a     = " + fmt(fit.slope, 8) + " +- " + fmt(fit.slope_err, 4) + "\n";
    text += "  gamma = " + fmt(fit.intercept, 8) + " +- " + fmt(fit.intercept_err, 4) + "\n";
    text += "  chi2/dof = " + fmt(fit.chi2_per_dof, 6) + "\n  sizes used:";
    for (const double x : fit.points_used) text += " " + fmt(x);
    text += "\n";
    if (!fit.dropped.empty()) {
        text += "  dropped:";
        for (const double x : fit.dropped) text += " " + fmt(x);
        text += "\n";
    }
    return finish(m, out, report, text);
}

} // namespace

CommandResult cmd_entropy(const RunConfig& cfg, const std::vector<fs::path>& inputs, const fs::path& out) {
    auto m = start("entropy", cfg);
    Stopwatch sw;
    const auto loaded = load_all(inputs);
    std::vector<SnapshotSet> sets;
    std::set<double> tunings;
    for (const auto& ls : loaded) {
        m.inputs.push_back(ls.path.string());
        sets.push_back(ls.set);
        if (const auto t = tuning_of(ls.set)) tunings.insert(*t);
    }
    if (tunings.size() > 1) throw DataError("entropy inputs mix several tuning values");
    const auto defect = cfg.defect();
    if (defect.two_copy()) throw ConfigError("[defect].kind: the entropy fit uses a single-copy defect");
    const auto inputs_e = defect_entropy_inputs(sets, defect, cfg.mapping, cfg.error, cfg.seed);
    std::vector<DataPoint> pts;
    for (const auto& p : inputs_e) pts.push_back({static_cast<double>(p.L), p.log_mean, p.log_std_error});
    m.timings.emplace_back("estimate", sw.lap());
    return entropy_report(m, cfg, pts, out);
}

CommandResult cmd_fit(const RunConfig& cfg, const fs::path& records, const fs::path& out) {
    auto m = start("fit", cfg);
    m.inputs.push_back(records.string());
    std::vector<DataPoint> pts;
    for (const auto& r : read_estimate_records(records)) {
        if (r.observable == "m2") continue;
        if (!r.log_mean || !r.log_std_error) throw DataError("fit: record without log fields");
        pts.push_back({static_cast<double>(r.L), *r.log_mean, *r.log_std_error});
    }
    return entropy_report(m, cfg, pts, out);
}

CommandResult cmd_cross(const RunConfig& cfg, const fs::path& records, const fs::path& out) {
    auto m = start("cross", cfg);
    m.inputs.push_back(records.string());
    const auto recs = read_estimate_records(records);
    const auto curves = curves_from(recs, "m2", recs.empty() ? 0.0 : recs.front().delta);
    const auto c = crossing_point(curves, cfg.analysis.D_fixed, cfg.analysis.crossing_bootstrap, cfg.seed);
    json cj;
    to_json(cj, c);
    json report = {{"command", "cross"}, {"D_fixed", cfg.analysis.D_fixed}, {"crossing", cj}};
    std::string table = table_header(m, "tuning L value sigma (value = M2 L^{2D})");
    for (const auto& cv : curves)
        for (const auto& p : cv.points) {
            const double s = std::pow(static_cast<double>(cv.L), 2.0 * cfg.analysis.D_fixed);
            table += fmt(p.x) + " " + std::to_string(cv.L) + " " + fmt(p.y * s) + " " + fmt(p.sigma * s) + "\n";
        }
    fs::create_directories(out);
    write_text(out / "cross_table.txt", table);
    m.outputs.push_back((out / "cross_table.txt").string());
    std::string text = "cross: D = " + fmt(cfg.analysis.D_fixed) + "\n  delta_c = " + fmt(c.delta_c, 8) +
                       " +- " + fmt(c.sigma_spread, 4) + " (pair spread), +- " + fmt(c.sigma_bootstrap, 4) +
                       " (bootstrap)\n";
    for (const auto& p : c.pairs)
        text += "  pair L=" + std::to_string(p.L1) + ",L=" + std::to_string(p.L2) + ": " + fmt(p.x, 8) + " +- " +
                fmt(p.sigma, 4) + "\n";
    return finish(m, out, report, text);
}

CommandResult cmd_collapse(const RunConfig& cfg, const fs::path& records, double delta_c, double D_d,
                           const fs::path& out) {
    auto m = start("collapse", cfg);
    m.inputs.push_back(records.string());
    const auto recs = read_estimate_records(records);
    const auto curves = curves_from(recs, "m2", recs.empty() ? 0.0 : recs.front().delta);
    const auto c = scaling_collapse(curves, delta_c, D_d, cfg.analysis.nu);
    json cj;
    to_json(cj, c);
    fs::create_directories(out);
    write_text(out / "collapse_table.txt", collapse_table(m, c));
    m.outputs.push_back((out / "collapse_table.txt").string());
    const std::string text = "collapse: delta_c=" + fmt(delta_c) + " D=" + fmt(D_d) + " nu=" + fmt(cfg.analysis.nu) +
                             "\n  quality = " + fmt(c.quality, 6) + "\n";
    return finish(m, out, json{{"command", "collapse"}, {"collapse", cj}}, text);
}

CommandResult cmd_fixedpoints(const RunConfig& cfg, const std::vector<fs::path>& inputs, const fs::path& out) {
    auto m = start("fixedpoints", cfg);
    Stopwatch sw;
    const auto sets = load_all(inputs);
    for (const auto& ls : sets) m.inputs.push_back(ls.path.string());

    // Weighted M^2 per file for delta = 0 and every requested delta.
    std::vector<double> deltas = {0.0};
    for (const double d : cfg.deltas)
        if (d != 0.0) deltas.push_back(d);
    std::vector<EstimateRecord> recs;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto t = tuning_of(sets[k].set);
        if (!t) throw DataError(sets[k].path.string() + ": fixed-point analysis needs model metadata");
        for (const double d : deltas) {
            const auto e = weighted_m2(sets[k].set, single_copy_defect(cfg, d), cfg.mapping, cfg.error, cfg.seed + k);
            EstimateRecord r;
            r.observable = "m2";
            r.L = sets[k].set.L();
            r.tuning = t;
            r.delta = d;
            r.mean = e.mean;
            r.std_error = e.std_error;
            recs.push_back(r);
        }
    }
    m.timings.emplace_back("estimate", sw.lap());

    json report = {{"command", "fixedpoints"}, {"nu", cfg.analysis.nu}};
    std::string text = "fixedpoints\n";
    const auto base = curves_from(recs, "m2", 0.0);
    std::set<double> grid;
    for (const auto& c : base)
        for (const auto& p : c.points) grid.insert(p.x);
    double delta_c = 0.0;
    if (grid.size() == 1) {
        delta_c = *grid.begin();
        report["crossing"] = {{"delta_c", delta_c}, {"note", "single tuning value; used as the critical point"}};
        text += "  critical point taken as the only tuning value " + fmt(delta_c) + "\n";
    } else {
        const auto c = crossing_point(base, cfg.analysis.D_fixed, cfg.analysis.crossing_bootstrap, cfg.seed);
        json cj;
        to_json(cj, c);
        report["crossing"] = cj;
        delta_c = c.delta_c;
        text += "  crossing (D = " + fmt(cfg.analysis.D_fixed) + "): delta_c = " + fmt(c.delta_c, 8) + " +- " +
                fmt(c.sigma_spread, 4) + " (pair spread), +- " + fmt(c.sigma_bootstrap, 4) + " (bootstrap)\n";
        std::string ct = table_header(m, "tuning L value sigma (value = M2 L^{2D}, delta = 0)");
        for (const auto& cv : base)
            for (const auto& p : cv.points) {
                const double s = std::pow(static_cast<double>(cv.L), 2.0 * cfg.analysis.D_fixed);
                ct += fmt(p.x) + " " + std::to_string(cv.L) + " " + fmt(p.y * s) + " " + fmt(p.sigma * s) + "\n";
            }
        fs::create_directories(out);
        write_text(out / "fixedpoints_cross_table.txt", ct);
        m.outputs.push_back((out / "fixedpoints_cross_table.txt").string());
    }

    json rows = json::array();
    std::string dtab = table_header(m, "delta D_d sigma theory");
    for (const double d : cfg.deltas) {
        const auto curves = curves_from(recs, "m2", d);
        std::vector<DataPoint> at_c;
        double worst = 0.0;
        for (const auto& cv : curves) {
            at_c.push_back(value_at(cv, delta_c));
            worst = std::max(worst, at_c.back().sigma / at_c.back().y);
        }
        if (worst > cfg.analysis.max_relative_error) {
            rows.push_back({{"delta", d},
                            {"refused", "relative M2 error " + fmt(worst, 4) + " exceeds threshold " +
                                            fmt(cfg.analysis.max_relative_error)}});
            text += "  delta=" + fmt(d) + ": refused, relative M2 error " + fmt(worst, 4) + " exceeds " +
                    fmt(cfg.analysis.max_relative_error) + "\n";
            continue;
        }
        const auto r = fit_scaling_dimension(at_c, cfg.analysis.window_lo, cfg.analysis.window_hi,
                                             cfg.analysis.fit_bootstrap, cfg.seed);
        json row = {{"delta", d}, {"D_d", r.D}, {"sigma", r.sigma}, {"theory", theoretical_Dd(d)},
                    {"variance_at_min", r.variance_at_min}};
        text += "  delta=" + fmt(d) + ": D_d = " + fmt(r.D, 6) + " +- " + fmt(r.sigma, 3) +
                "  (theory " + fmt(theoretical_Dd(d), 6) + ")\n";
        dtab += fmt(d) + " " + fmt(r.D) + " " + fmt(r.sigma) + " " + fmt(theoretical_Dd(d)) + "\n";
        if (grid.size() >= 2) {
            const auto c = scaling_collapse(curves, delta_c, r.D, cfg.analysis.nu);
            const std::string name = "collapse_delta" + tuning_tag(d) + ".txt";
            write_text(out / name, collapse_table(m, c));
            m.outputs.push_back((out / name).string());
            row["collapse_quality"] = c.quality;
        }
        rows.push_back(row);
    }
    report["line"] = rows;
    if (!cfg.deltas.empty()) {
        fs::create_directories(out);
        write_text(out / "fixedpoints_table.txt", dtab);
        m.outputs.push_back((out / "fixedpoints_table.txt").string());
    }
    m.timings.emplace_back("analysis", sw.lap());
    return finish(m, out, report, text);
}

CommandResult cmd_report(const std::vector<fs::path>& manifests, const fs::path& out) {
    if (manifests.empty()) throw DataError("report needs at least one manifest");
    RunManifest m;
    m.command = "report";
    json report = {{"command", "report"}, {"sections", json::array()}, {"warnings", json::array()}};
    std::string text;
    std::set<std::string> versions;
    for (const auto& path : manifests) {
        const auto mf = RunManifest::from_json(json::parse(read_text(path), nullptr, false));
        m.inputs.push_back(path.string());
        versions.insert(mf.tool_version);
        for (const auto& f : mf.outputs)
            if (!fs::exists(f)) throw DataError("manifest " + path.string() + " references missing file " + f);
        if (mf.report_text.empty() || mf.report_json.empty())
            throw DataError("manifest " + path.string() + " has no report");
        text += read_text(mf.report_text);
        auto sub = json::parse(read_text(mf.report_json), nullptr, false);
        if (sub.is_discarded()) throw FormatError("malformed report " + mf.report_json);
        report["sections"].push_back({{"manifest", path.string()}, {"result", sub}});
        m.config_hash += (m.config_hash.empty() ? "" : ",") + mf.config_hash;
    }
    if (versions.size() > 1) {
        std::string w = "warning: manifests come from different tool versions:";
        for (const auto& v : versions) w += " " + v;
        report["warnings"].push_back(w);
        text += w + "\n";
    }
    return finish(m, out, report, text);
}

} // namespace snapdefect
