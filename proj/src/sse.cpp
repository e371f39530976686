#include "snapdefect/sse.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "snapdefect/errors.hpp"
#include "snapdefect/stats.hpp"

namespace snapdefect::sse {

void SamplerConfig::validate() const {
    if (!(beta_rule.value > 0.0) || !std::isfinite(beta_rule.value))
        throw ConfigError("beta must be positive and finite");
    if (n_therm < 1) throw ConfigError("n_therm must be >= 1");
    if (n_decorr < 0) throw ConfigError("n_decorr must be >= 1 (or 0 for auto)");
    if (M < 1) throw ConfigError("M must be >= 1");
    if (chains < 1) throw ConfigError("chains must be >= 1");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative");
}

Sampler::Sampler(const CouplingTable& table, const SamplerConfig& cfg, std::uint64_t seed)
    : L_(table.L),
      beta_(cfg.beta_rule.beta_for(table.L)),
      epsilon_(cfg.epsilon),
      mode_(cfg.cluster),
      check_interval_(std::max(1, cfg.periodicity_check_interval)),
      rng_(seed) {
    cfg.validate();
    if (L_ < 2) throw ConfigError("sampler needs L >= 2");

    std::vector<double> hz(L_, 0.0);
    hx_.assign(L_, 0.0);
    for (const auto& f : table.fields) {
        hz[f.site] += f.longitudinal;
        hx_[f.site] = std::abs(f.transverse);
    }

    // Share of each site's longitudinal field carried by each of its bonds.
    std::vector<double> coupling_sum(L_, 0.0);
    std::vector<int> degree(L_, 0);
    for (const auto& p : table.pairs) {
        coupling_sum[p.i] += std::abs(p.V);
        coupling_sum[p.j] += std::abs(p.V);
        ++degree[p.i];
        ++degree[p.j];
    }
    for (int j = 0; j < L_; ++j)
        if (hz[j] != 0.0 && degree[j] == 0)
            throw ConfigError("sampler: site " + std::to_string(j) + " carries a longitudinal field but no bond");
    auto share = [&](int site, double V) {
        if (hz[site] == 0.0) return 0.0;
        if (coupling_sum[site] > 0.0) return hz[site] * std::abs(V) / coupling_sum[site];
        return hz[site] / degree[site];
    };

    energy_shift_ = table.offset;
    for (const auto& p : table.pairs) {
        Bond b;
        b.a = p.i;
        b.c = p.j;
        const double fa = share(p.i, p.V), fc = share(p.j, p.V);
        if (p.V == 0.0 && fa == 0.0 && fc == 0.0) continue;
        double h[4];
        for (int sa = 0; sa < 2; ++sa)
            for (int sc = 0; sc < 2; ++sc) {
                const double za = sa ? 1.0 : -1.0, zc = sc ? 1.0 : -1.0;
                h[(sa << 1) | sc] = p.V * za * zc - fa * za - fc * zc;
            }
        b.shift = *std::max_element(h, h + 4) + epsilon_;
        for (int k = 0; k < 4; ++k) b.w[k] = b.shift - h[k];
        b.wmax = *std::max_element(b.w, b.w + 4);
        energy_shift_ += b.shift;
        bonds_.push_back(b);
    }
    for (int j = 0; j < L_; ++j) {
        energy_shift_ += hx_[j];
        lambda_transverse_ += hx_[j];
    }

    // Walker alias table over insertion candidates.
    std::vector<double> weights(hx_);
    for (const auto& b : bonds_) weights.push_back(b.wmax);
    lambda_ = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(lambda_ > 0.0)) throw ConfigError("sampler: Hamiltonian has no operators to sample");
    const std::size_t K = weights.size();
    alias_prob_.assign(K, 0.0);
    alias_other_.assign(K, 0);
    std::vector<double> scaled(K);
    std::vector<std::int32_t> small, large;
    for (std::size_t k = 0; k < K; ++k) {
        scaled[k] = weights[k] * static_cast<double>(K) / lambda_;
        (scaled[k] < 1.0 ? small : large).push_back(static_cast<std::int32_t>(k));
    }
    while (!small.empty() && !large.empty()) {
        const auto s = small.back();
        small.pop_back();
        const auto l = large.back();
        alias_prob_[s] = scaled[s];
        alias_other_[s] = l;
        scaled[l] -= 1.0 - scaled[s];
        if (scaled[l] < 1.0) {
            large.pop_back();
            small.push_back(l);
        }
    }
    for (const auto k : large) alias_prob_[k] = 1.0, alias_other_[k] = k;
    for (const auto k : small) alias_prob_[k] = 1.0, alias_other_[k] = k;

    if (mode_ == ClusterMode::Auto)
        mode_ = table.has_longitudinal_fields() ? ClusterMode::Line : ClusterMode::Multibranch;

    alpha_.resize(L_);
    for (auto& s : alpha_) s = rng_.coin() ? 1 : 0;
    const std::size_t initial = std::max<std::size_t>(16, static_cast<std::size_t>(L_) * 4);
    ops_.assign(initial, -1);
    first_.assign(L_, -1);
    last_.assign(L_, -1);
}

void Sampler::set_configuration(const std::vector<std::uint8_t>& alpha) {
    if (alpha.size() != static_cast<std::size_t>(L_)) throw DataError("configuration length mismatch");
    alpha_ = alpha;
    // Keep the operator string consistent: remove every off-diagonal vertex.
    for (auto& op : ops_)
        if (is_site_op(op) && (op & 1)) op ^= 1;
}

std::size_t Sampler::off_diagonal_count() const {
    return static_cast<std::size_t>(
        std::count_if(ops_.begin(), ops_.end(), [this](std::int32_t op) { return is_site_op(op) && (op & 1); }));
}

double Sampler::energy_estimate() const { return -static_cast<double>(n_ops_) / beta_ + energy_shift_; }

double Sampler::abs_magnetization() const {
    int m = 0;
    for (const auto s : alpha_) m += s ? 1 : -1;
    return std::abs(m) / static_cast<double>(L_);
}

void Sampler::measure() {
    ++acc_.count;
    acc_.energy_sum += energy_estimate();
    acc_.abs_mag_sum += abs_magnetization();
}

bool Sampler::periodic_in_imaginary_time() const {
    std::vector<std::uint8_t> s = alpha_;
    for (const auto op : ops_)
        if (is_site_op(op) && (op & 1)) s[op >> 1] ^= 1;
    return s == alpha_;
}

void Sampler::sweep() {
    diagonal_update();
    grow_truncation();
    build_vertices();
    // Without transverse fields the Hamiltonian is diagonal and every
    // configuration is an eigenstate; the sampler then keeps its state.
    if (lambda_transverse_ > 0.0) {
        if (mode_ == ClusterMode::Line)
            line_update();
        else
            multibranch_update();
        write_back();
    }
    ++sweeps_;
#ifndef NDEBUG
    const bool check = true;
#else
    const bool check = sweeps_ % static_cast<std::uint64_t>(check_interval_) == 0;
#endif
    if (check && !periodic_in_imaginary_time())
        throw NumericError("SSE worldline periodicity violated after sweep " + std::to_string(sweeps_));
}

void Sampler::diagonal_update() {
    std::vector<std::uint8_t> s = alpha_;
    const double cut = static_cast<double>(ops_.size());
    const double bl = beta_ * lambda_;
    const std::size_t K = alias_prob_.size();
    for (auto& op : ops_) {
        if (op < 0) {
            if (rng_.uniform() * (cut - static_cast<double>(n_ops_)) >= bl) continue;
            std::size_t k = rng_.below(K);
            if (rng_.uniform() >= alias_prob_[k]) k = static_cast<std::size_t>(alias_other_[k]);
            if (k < static_cast<std::size_t>(L_)) {
                op = static_cast<std::int32_t>(2 * k);
                ++n_ops_;
            } else {
                const std::size_t b = k - static_cast<std::size_t>(L_);
                const Bond& bond = bonds_[b];
                if (rng_.uniform() * bond.wmax < bond.w[(s[bond.a] << 1) | s[bond.c]]) {
                    op = static_cast<std::int32_t>(2 * L_ + b);
                    ++n_ops_;
                }
            }
        } else if (is_site_op(op) && (op & 1)) {
            s[op >> 1] ^= 1;
        } else {
            if (rng_.uniform() * bl < cut - static_cast<double>(n_ops_) + 1.0) {
                op = -1;
                --n_ops_;
            }
        }
    }
}

void Sampler::grow_truncation() {
    std::size_t cut = ops_.size();
    if (4 * n_ops_ <= 3 * cut) return;
    while (4 * n_ops_ > 3 * cut) cut = cut + cut / 2 + 1;
    // Uniformly random interleaving of the existing string with the new
    // identities.
    std::vector<std::int32_t> grown;
    grown.reserve(cut);
    std::size_t old_left = ops_.size(), new_left = cut - ops_.size(), k = 0;
    while (old_left + new_left > 0) {
        if (rng_.uniform() * static_cast<double>(old_left + new_left) < static_cast<double>(old_left)) {
            grown.push_back(ops_[k++]);
            --old_left;
        } else {
            grown.push_back(-1);
            --new_left;
        }
    }
    ops_.swap(grown);
}

void Sampler::build_vertices() {
    vpos_.clear();
    for (std::size_t p = 0; p < ops_.size(); ++p)
        if (ops_[p] >= 0) vpos_.push_back(static_cast<std::int32_t>(p));
    const std::size_t nv = vpos_.size();
    link_.assign(4 * nv, -1);
    leg_spin_.assign(4 * nv, 0);
    std::fill(first_.begin(), first_.end(), -1);
    std::fill(last_.begin(), last_.end(), -1);

    std::vector<std::uint8_t> s = alpha_;
    auto attach = [&](int site, std::int32_t in_leg, std::int32_t out_leg) {
        if (last_[site] >= 0) {
            link_[in_leg] = last_[site];
            link_[last_[site]] = in_leg;
        } else {
            first_[site] = in_leg;
        }
        last_[site] = out_leg;
    };
    for (std::size_t v = 0; v < nv; ++v) {
        const std::int32_t op = ops_[vpos_[v]];
        const std::int32_t l0 = static_cast<std::int32_t>(4 * v);
        if (is_site_op(op)) {
            const int j = op >> 1;
            attach(j, l0, l0 + 2);
            leg_spin_[l0] = s[j];
            if (op & 1) s[j] ^= 1;
            leg_spin_[l0 + 2] = s[j];
        } else {
            const Bond& b = bonds_[op - 2 * L_];
            attach(b.a, l0, l0 + 2);
            attach(b.c, l0 + 1, l0 + 3);
            leg_spin_[l0] = leg_spin_[l0 + 2] = s[b.a];
            leg_spin_[l0 + 1] = leg_spin_[l0 + 3] = s[b.c];
        }
    }
    for (int j = 0; j < L_; ++j) {
        if (first_[j] >= 0) {
            link_[first_[j]] = last_[j];
            link_[last_[j]] = first_[j];
        }
    }
}

void Sampler::multibranch_update() {
    const std::size_t nlegs = link_.size();
    visited_.assign(nlegs, 0);
    expanded_.assign(vpos_.size(), 0);
    for (std::size_t start = 0; start < nlegs; ++start) {
        if (link_[start] < 0 || visited_[start]) continue;

        stack_.clear();
        cluster_legs_.clear();
        double log_ratio = 0.0;
        stack_.push_back(static_cast<std::int32_t>(start));
        visited_[start] = 1;
        while (!stack_.empty()) {
            const std::int32_t leg = stack_.back();
            stack_.pop_back();
            cluster_legs_.push_back(leg);
            const std::int32_t v = leg / 4;
            const std::int32_t op = ops_[vpos_[v]];
            if (is_bond_op(op) && !expanded_[v]) {
                expanded_[v] = 1;
                for (int k = 0; k < 4; ++k) {
                    const std::int32_t l = 4 * v + k;
                    if (!visited_[l]) {
                        visited_[l] = 1;
                        stack_.push_back(l);
                    }
                }
                const auto sa = leg_spin_[4 * v], sc = leg_spin_[4 * v + 1];
                const int b = op - 2 * L_;
                log_ratio += std::log(bond_weight(b, sa ^ 1, sc ^ 1)) - std::log(bond_weight(b, sa, sc));
            }
            const std::int32_t next = link_[leg];
            if (!visited_[next]) {
                visited_[next] = 1;
                stack_.push_back(next);
            }
        }
        // Heat-bath flip probability r / (1 + r).
        const double p_flip = log_ratio == 0.0 ? 0.5 : 1.0 / (1.0 + std::exp(-log_ratio));
        if (rng_.uniform() < p_flip)
            for (const auto l : cluster_legs_) leg_spin_[l] ^= 1;
    }
}

void Sampler::line_update() {
    const std::size_t nv = vpos_.size();
    auto flip_segment = [&](std::int32_t begin_leg, auto&& stop) {
        // Walks forward from begin_leg through bond vertices, collecting legs
        // until stop(leg) holds for an incoming leg.
        cluster_legs_.clear();
        double log_ratio = 0.0;
        std::int32_t leg = link_[begin_leg];
        while (!stop(leg)) {
            const std::int32_t v = leg / 4;
            const int b = ops_[vpos_[v]] - 2 * L_;
            const bool on_a = (leg % 2) == 0;
            const auto sa = leg_spin_[4 * v], sc = leg_spin_[4 * v + 1];
            const double w_old = bond_weight(b, sa, sc);
            const double w_new = on_a ? bond_weight(b, sa ^ 1, sc) : bond_weight(b, sa, sc ^ 1);
            log_ratio += std::log(w_new) - std::log(w_old);
            cluster_legs_.push_back(leg);
            cluster_legs_.push_back(leg + 2);
            leg = link_[leg + 2];
        }
        return std::make_pair(leg, log_ratio);
    };
    auto accept = [&](double log_ratio) {
        const double p_flip = log_ratio == 0.0 ? 0.5 : 1.0 / (1.0 + std::exp(-log_ratio));
        return rng_.uniform() < p_flip;
    };

    // Segments between transverse-field vertices.
    for (std::size_t v = 0; v < nv; ++v) {
        if (!is_site_op(ops_[vpos_[v]])) continue;
        const std::int32_t out_leg = static_cast<std::int32_t>(4 * v + 2);
        auto [end_leg, log_ratio] = flip_segment(out_leg, [&](std::int32_t leg) {
            return is_site_op(ops_[vpos_[leg / 4]]);
        });
        if (accept(log_ratio)) {
            leg_spin_[out_leg] ^= 1;
            for (const auto l : cluster_legs_) leg_spin_[l] ^= 1;
            leg_spin_[end_leg] ^= 1;
        }
    }
    // Sites whose worldline carries no transverse-field vertex: flip the
    // whole loop.
    for (int j = 0; j < L_; ++j) {
        if (first_[j] < 0) continue;
        bool has_site_op = false;
        std::int32_t leg = first_[j];
        do {
            const std::int32_t v = leg / 4;
            if (is_site_op(ops_[vpos_[v]])) {
                has_site_op = true;
                break;
            }
            leg = link_[leg + 2];
        } while (leg != first_[j]);
        if (has_site_op) continue;
        // Walk once around: start just before first_[j].
        const std::int32_t start = link_[first_[j]];  // last out-leg on site j
        bool wrapped = false;
        auto [end_leg, log_ratio] = flip_segment(start, [&](std::int32_t l) {
            if (l == first_[j] && wrapped) return true;
            wrapped = true;
            return false;
        });
        (void)end_leg;
        if (accept(log_ratio))
            for (const auto l : cluster_legs_) leg_spin_[l] ^= 1;
    }
}

void Sampler::write_back() {
    for (std::size_t v = 0; v < vpos_.size(); ++v) {
        auto& op = ops_[vpos_[v]];
        if (is_site_op(op)) {
            const bool flips = leg_spin_[4 * v] != leg_spin_[4 * v + 2];
            op = static_cast<std::int32_t>(((op >> 1) << 1) | (flips ? 1 : 0));
        }
    }
    for (int j = 0; j < L_; ++j) {
        if (first_[j] >= 0)
            alpha_[j] = leg_spin_[first_[j]];
        else if (rng_.coin())
            alpha_[j] ^= 1;  // no vertex touches this site: its spin is free
    }
}

namespace {

struct ChainResult {
    std::vector<std::vector<std::uint8_t>> records;
    ChainDiagnostics diag;
};

ChainResult run_chain(const CouplingTable& table, const SamplerConfig& cfg, std::uint64_t seed, std::size_t M) {
    Sampler sampler(table, cfg, seed);
    std::vector<double> series;
    series.reserve(static_cast<std::size_t>(cfg.n_therm));
    const int half = cfg.n_therm / 2;
    for (int t = 0; t < cfg.n_therm; ++t) {
        sampler.sweep();
        if (t >= half) series.push_back(sampler.abs_magnetization());
    }
    ChainResult out;
    out.diag.tau_abs_mag = integrated_autocorrelation_time(series);
    out.diag.n_decorr = cfg.n_decorr > 0 ? cfg.n_decorr
                                         : std::max(1, static_cast<int>(std::ceil(2.0 * out.diag.tau_abs_mag)));
    out.records.reserve(M);
    double order_sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        for (int k = 0; k < out.diag.n_decorr; ++k) sampler.sweep();
        order_sum += static_cast<double>(sampler.expansion_order());
        out.records.push_back(sampler.snapshot());
    }
    out.diag.mean_expansion_order = M ? order_sum / static_cast<double>(M) : 0.0;
    return out;
}

} // namespace

SnapshotSet run_sampling(const CouplingTable& table, const SamplerConfig& cfg, const std::optional<ModelSpec>& model,
                         std::vector<ChainDiagnostics>* diagnostics) {
    cfg.validate();
    const int K = cfg.chains;
    std::vector<std::size_t> per_chain(K, cfg.M / K);
    for (std::size_t k = 0; k < cfg.M % K; ++k) ++per_chain[k];

    std::vector<ChainResult> results(K);
    if (cfg.threads > 1 && K > 1) {
        std::vector<std::future<ChainResult>> futures;
        for (int k = 0; k < K; ++k)
            futures.push_back(std::async(std::launch::async, run_chain, std::cref(table), std::cref(cfg),
                                         chain_seed(cfg.seed, k), per_chain[k]));
        for (int k = 0; k < K; ++k) results[k] = futures[k].get();
    } else {
        for (int k = 0; k < K; ++k) results[k] = run_chain(table, cfg, chain_seed(cfg.seed, k), per_chain[k]);
    }

    SnapshotMetadata meta;
    meta.source = SnapshotSource::SSE;
    meta.bc = table.bc;
    meta.model = model;
    meta.basis = (model && model->kind == ModelKind::RydbergChain) ? Basis::Occupation : Basis::SpinZ;
    meta.provenance = "stochastic series expansion";
    nlohmann::json chains = nlohmann::json::array();
    for (int k = 0; k < K; ++k)
        chains.push_back({{"seed", chain_seed(cfg.seed, k)},
                          {"M", per_chain[k]},
                          {"n_decorr", results[k].diag.n_decorr},
                          {"tau_abs_mag", results[k].diag.tau_abs_mag}});
    meta.seed_info = {{"seed", cfg.seed},
                      {"beta", cfg.beta_rule.beta_for(table.L)},
                      {"n_therm", cfg.n_therm},
                      {"n_decorr", cfg.n_decorr},
                      {"epsilon", cfg.epsilon},
                      {"chains", chains}};

    SnapshotSet set(table.L, std::move(meta));
    set.reserve(cfg.M);
    for (int k = 0; k < K; ++k) {
        for (const auto& rec : results[k].records) set.append(rec);
        if (diagnostics) diagnostics->push_back(results[k].diag);
    }
    return set;
}

} // namespace snapdefect::sse
