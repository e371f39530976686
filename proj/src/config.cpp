#include "snapdefect/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/sha.h>

#include "snapdefect/errors.hpp"

namespace snapdefect {

std::string to_string(SampleSource s) { return s == SampleSource::SSE ? "sse" : "exact"; }

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double as_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "") throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

long long as_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "") throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

int as_positive_int(const std::string& key, const std::string& v) {
    const auto x = as_int(key, v);
    if (x <= 0 || x > 1'000'000'000) throw ConfigError(key + ": expected a positive integer, got '" + v + "'");
    return static_cast<int>(x);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> as_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(as_double(key, s));
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.kind", [](RunConfig& c, auto&, auto& v) { c.model.kind = parse_model_kind(v); }},
        {"model.sizes",
         [](RunConfig& c, auto& k, auto& v) {
             c.sizes.clear();
             for (const auto& s : split_list(v)) c.sizes.push_back(as_positive_int(k, s));
         }},
        {"model.bc", [](RunConfig& c, auto&, auto& v) { c.model.bc = parse_boundary(v); }},
        {"model.J", [](RunConfig& c, auto& k, auto& v) { c.model.J = as_double(k, v); }},
        {"model.h", [](RunConfig& c, auto& k, auto& v) { c.model.h = as_double(k, v); }},
        {"model.omega", [](RunConfig& c, auto& k, auto& v) { c.model.omega = as_double(k, v); }},
        {"model.detuning", [](RunConfig& c, auto& k, auto& v) { c.model.delta_detuning = as_double(k, v); }},
        {"model.rb_over_a", [](RunConfig& c, auto& k, auto& v) { c.model.rb_over_a = as_double(k, v); }},
        {"model.cutoff", [](RunConfig& c, auto& k, auto& v) { c.model.interaction_cutoff = as_positive_int(k, v); }},
        {"model.grid", [](RunConfig& c, auto& k, auto& v) { c.tuning_grid = as_double_list(k, v); }},

        {"sampling.source",
         [](RunConfig& c, auto& k, auto& v) {
             if (v == "sse")
                 c.source = SampleSource::SSE;
             else if (v == "exact")
                 c.source = SampleSource::Exact;
             else
                 throw ConfigError(k + ": expected sse|exact, got '" + v + "'");
         }},
        {"sampling.M", [](RunConfig& c, auto& k, auto& v) { c.sampling.M = static_cast<std::size_t>(as_positive_int(k, v)); }},
        {"sampling.beta", [](RunConfig& c, auto& k, auto& v) { c.sampling.beta_rule = sse::BetaRule::fixed(as_double(k, v)); }},
        {"sampling.beta_per_L",
         [](RunConfig& c, auto& k, auto& v) { c.sampling.beta_rule = sse::BetaRule::scale_with_L(as_double(k, v)); }},
        {"sampling.n_therm", [](RunConfig& c, auto& k, auto& v) { c.sampling.n_therm = static_cast<int>(as_int(k, v)); }},
        {"sampling.n_decorr", [](RunConfig& c, auto& k, auto& v) { c.sampling.n_decorr = static_cast<int>(as_int(k, v)); }},
        {"sampling.chains", [](RunConfig& c, auto& k, auto& v) { c.sampling.chains = as_positive_int(k, v); }},
        {"sampling.epsilon", [](RunConfig& c, auto& k, auto& v) { c.sampling.epsilon = as_double(k, v); }},
        {"sampling.cluster",
         [](RunConfig& c, auto& k, auto& v) {
             if (v == "auto")
                 c.sampling.cluster = sse::ClusterMode::Auto;
             else if (v == "multibranch")
                 c.sampling.cluster = sse::ClusterMode::Multibranch;
             else if (v == "line")
                 c.sampling.cluster = sse::ClusterMode::Line;
             else
                 throw ConfigError(k + ": expected auto|multibranch|line, got '" + v + "'");
         }},
        {"sampling.check_interval",
         [](RunConfig& c, auto& k, auto& v) { c.sampling.periodicity_check_interval = as_positive_int(k, v); }},
        {"sampling.ed_max_sites", [](RunConfig& c, auto& k, auto& v) { c.ed_max_sites = as_positive_int(k, v); }},

        {"defect.kind",
         [](RunConfig& c, auto&, auto& v) {
             parse_defect_kind(v);
             c.defect_kind = v;
         }},
        {"defect.inner",
         [](RunConfig& c, auto& k, auto& v) {
             if (v != "intercopy" && v != "zeeman" && v != "energy")
                 throw ConfigError(k + ": expected intercopy|zeeman|energy, got '" + v + "'");
             c.inner_kind = v;
         }},
        {"defect.delta", [](RunConfig& c, auto& k, auto& v) { c.delta = as_double(k, v); }},
        {"defect.deltas", [](RunConfig& c, auto& k, auto& v) { c.deltas = as_double_list(k, v); }},
        {"defect.mapping", [](RunConfig& c, auto&, auto& v) { c.mapping.kind = parse_mapping_kind(v); }},
        {"defect.n_mean", [](RunConfig& c, auto& k, auto& v) { c.mapping.n_mean = as_double(k, v); }},
        {"defect.error",
         [](RunConfig& c, auto& k, auto& v) {
             if (v == "bootstrap")
                 c.error.kind = ErrorMethod::Kind::Bootstrap;
             else if (v == "jackknife")
                 c.error.kind = ErrorMethod::Kind::Jackknife;
             else
                 throw ConfigError(k + ": expected bootstrap|jackknife, got '" + v + "'");
         }},
        {"defect.resamples", [](RunConfig& c, auto& k, auto& v) { c.error.resamples = as_positive_int(k, v); }},

        {"analysis.chi2_threshold", [](RunConfig& c, auto& k, auto& v) { c.analysis.chi2_threshold = as_double(k, v); }},
        {"analysis.max_drops", [](RunConfig& c, auto& k, auto& v) { c.analysis.max_drops = static_cast<int>(as_int(k, v)); }},
        {"analysis.nu", [](RunConfig& c, auto& k, auto& v) { c.analysis.nu = as_double(k, v); }},
        {"analysis.D_fixed", [](RunConfig& c, auto& k, auto& v) { c.analysis.D_fixed = as_double(k, v); }},
        {"analysis.window",
         [](RunConfig& c, auto& k, auto& v) {
             const auto w = as_double_list(k, v);
             if (w.size() != 2) throw ConfigError(k + ": expected 'lo, hi'");
             c.analysis.window_lo = w[0];
             c.analysis.window_hi = w[1];
         }},
        {"analysis.max_relative_error",
         [](RunConfig& c, auto& k, auto& v) { c.analysis.max_relative_error = as_double(k, v); }},
        {"analysis.crossing_bootstrap",
         [](RunConfig& c, auto& k, auto& v) { c.analysis.crossing_bootstrap = as_positive_int(k, v); }},
        {"analysis.fit_bootstrap", [](RunConfig& c, auto& k, auto& v) { c.analysis.fit_bootstrap = as_positive_int(k, v); }},

        {"run.seed",
         [](RunConfig& c, auto& k, auto& v) {
             const auto s = as_int(k, v);
             if (s < 0) throw ConfigError(k + ": seed must be nonnegative");
             c.seed = static_cast<std::uint64_t>(s);
         }},
        {"run.threads", [](RunConfig& c, auto& k, auto& v) { c.threads = as_positive_int(k, v); }},
    };
    return table;
}

void validate(const RunConfig& c) {
    for (const int L : c.sizes) {
        auto m = c.model;
        m.L = L;
        m.validate();
    }
    c.sampling.validate();
    if (c.ed_max_sites > 24) throw ConfigError("sampling.ed_max_sites: at most 24 sites");
    if (c.analysis.nu <= 0.0) throw ConfigError("analysis.nu: must be positive");
    if (!(c.analysis.window_lo >= 0.0 && c.analysis.window_hi <= 1.0 && c.analysis.window_lo < c.analysis.window_hi))
        throw ConfigError("analysis.window: must satisfy 0 <= lo < hi <= 1");
    if (c.error.resamples < 2) throw ConfigError("defect.resamples: need at least 2");
}

} // namespace

DefectSpec RunConfig::defect(double d) const {
    const auto bc = model.bc;
    if (defect_kind == "zeeman") return DefectSpec::zeeman(d, bc);
    if (defect_kind == "energy") return DefectSpec::energy(d, bc);
    if (inner_kind == "zeeman") return DefectSpec::product(DefectSpec::zeeman(d, bc));
    if (inner_kind == "energy") return DefectSpec::product(DefectSpec::energy(d, bc));
    return DefectSpec::inter_copy(d, bc);
}

ModelSpec RunConfig::model_at(int L, double tuning) const {
    auto m = model;
    m.L = L;
    m.set_tuning(tuning);
    return m;
}

std::vector<double> RunConfig::tunings() const {
    if (!tuning_grid.empty()) return tuning_grid;
    return {model.tuning()};
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json model_j;
    snapdefect::to_json(model_j, model);
    model_j.erase("L");
    nlohmann::json j;
    j["model"] = model_j;
    j["sizes"] = sizes;
    j["grid"] = tuning_grid;
    j["sampling"] = {{"source", to_string(source)},
                     {"M", sampling.M},
                     {"beta_rule", sampling.beta_rule.kind == sse::BetaRule::Kind::Fixed ? "fixed" : "per_L"},
                     {"beta_value", sampling.beta_rule.value},
                     {"n_therm", sampling.n_therm},
                     {"n_decorr", sampling.n_decorr},
                     {"chains", sampling.chains},
                     {"epsilon", sampling.epsilon},
                     {"cluster", static_cast<int>(sampling.cluster)},
                     {"check_interval", sampling.periodicity_check_interval},
                     {"ed_max_sites", ed_max_sites}};
    j["defect"] = {{"kind", defect_kind},
                   {"inner", inner_kind},
                   {"delta", delta},
                   {"deltas", deltas},
                   {"mapping", to_string(mapping.kind)},
                   {"error", error.describe()}};
    if (mapping.n_mean) j["defect"]["n_mean"] = *mapping.n_mean;
    j["analysis"] = {{"chi2_threshold", analysis.chi2_threshold},
                     {"max_drops", analysis.max_drops},
                     {"nu", analysis.nu},
                     {"D_fixed", analysis.D_fixed},
                     {"window", {analysis.window_lo, analysis.window_hi}},
                     {"max_relative_error", analysis.max_relative_error},
                     {"crossing_bootstrap", analysis.crossing_bootstrap},
                     {"fit_bootstrap", analysis.fit_bootstrap}};
    j["seed"] = seed;
    return j;
}

std::string RunConfig::hash() const {
    const std::string text = to_json().dump();
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
    std::ostringstream os;
    for (const unsigned char b : digest) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
    return os.str();
}

RunConfig parse_config(const std::string& text) {
    // Accept '#' comments in addition to the ';' comments the INI reader knows.
    std::istringstream in(text);
    std::ostringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        cleaned << (t.starts_with('#') ? std::string{} : line) << '\n';
    }
    boost::property_tree::ptree tree;
    std::istringstream src(cleaned.str());
    try {
        boost::property_tree::ini_parser::read_ini(src, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }

    RunConfig c;
    c.sizes = {8};
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
        for (const auto& [key, value] : body) {
            const std::string path = section + "." + key;
            const auto it = table.find(path);
            if (it == table.end()) throw ConfigError("config: unknown key [" + section + "]." + key);
            it->second(c, "[" + section + "]." + key, trim(value.data()));
        }
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace snapdefect
