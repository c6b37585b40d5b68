#pragma once

// Sampling from the Gibbs measure P(pi) ∝ exp(-beta W(pi)) on S:
// exact samplers per family and Metropolis chains with local moves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/rng.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

enum class SampleMethod { wilson, sequential_exact, dp_backward, mcmc };

inline std::string sample_method_name(SampleMethod m) {
    switch (m) {
        case SampleMethod::wilson: return "wilson";
        case SampleMethod::sequential_exact: return "sequential_exact";
        case SampleMethod::dp_backward: return "dp_backward";
        case SampleMethod::mcmc: return "mcmc";
    }
    return "?";
}

struct ChainMeta {
    std::uint64_t steps = 0;
    double acceptance_rate = 0.0;
};

struct GibbsSample {
    Configuration config;
    double weight = 0.0;
    SampleMethod method = SampleMethod::sequential_exact;
    std::optional<ChainMeta> chain_meta;
};

/// (W(pi) + m psi'(beta)) / sqrt(m).
inline double typical_weight_observable(const GibbsSample& sample, const ProblemModel& model,
                                        const WeightDistribution& dist, double beta) {
    if (!std::isfinite(sample.weight)) throw InvalidArgument("typical-weight observable needs a finite-weight sample");
    const double m = static_cast<double>(model.config_size());
    return (sample.weight + m * psi_prime(dist, beta)) / std::sqrt(m);
}

// ---------------------------------------------------------------------------
// Wilson's algorithm on K_n with conductances.

/// Walker/Vose alias table over a fixed discrete law.
class AliasTable {
public:
    AliasTable() = default;
    explicit AliasTable(const std::vector<double>& weights) : prob_(weights.size()), alias_(weights.size()) {
        const std::size_t k = weights.size();
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        if (k == 0 || !(total > 0.0)) throw InvalidArgument("alias table needs positive total mass");
        std::vector<double> scaled(k);
        std::vector<std::uint32_t> small;
        std::vector<std::uint32_t> large;
        for (std::size_t i = 0; i < k; ++i) {
            scaled[i] = weights[i] * static_cast<double>(k) / total;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back();
            small.pop_back();
            const auto l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (auto i : large) {
            prob_[i] = 1.0;
            alias_[i] = i;
        }
        for (auto i : small) {
            // Leftovers from rounding: keep them only if they carry mass.
            prob_[i] = weights[i] > 0.0 ? 1.0 : 0.0;
            alias_[i] = i;
            if (prob_[i] == 0.0) alias_[i] = large.empty() ? first_positive(weights) : large.front();
        }
    }

    std::uint32_t draw(RandomStream& rng) const {
        const auto i = static_cast<std::uint32_t>(rng.below(prob_.size()));
        return rng.uniform() < prob_[i] ? i : alias_[i];
    }

private:
    static std::uint32_t first_positive(const std::vector<double>& w) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) return static_cast<std::uint32_t>(i);
        }
        return 0;
    }
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

/// Random spanning tree of K_n with P(T) ∝ prod_{e in T} c_e, by loop-erased
/// random walks (Wilson). Zero-conductance edges are never walked.
class WilsonSampler {
public:
    static constexpr int kAliasLimit = 2000;

    WilsonSampler(const ProblemModel& model, std::vector<double> conductance)
        : model_(model), conductance_(std::move(conductance)) {
        const int n = model.n();
        uniform_ = std::all_of(conductance_.begin(), conductance_.end(),
                               [&](double c) { return c == conductance_.front(); }) &&
                   conductance_.front() > 0.0;
        detail::DisjointSets ds(n);
        for (std::uint32_t e = 0; e < conductance_.size(); ++e) {
            if (conductance_[e] > 0.0) {
                const auto [u, v] = model.endpoints(e);
                ds.unite(u, v);
            }
        }
        if (ds.component_size(0) != n) throw AllInfiniteInstance("finite-weight edges do not connect K_n");
        if (!uniform_ && n <= kAliasLimit) {
            tables_.reserve(n);
            std::vector<double> row(n - 1);
            for (int u = 0; u < n; ++u) {
                for (int v = 0, slot = 0; v < n; ++v) {
                    if (v == u) continue;
                    row[slot++] = conductance_[model.edge_index(u, v)];
                }
                tables_.emplace_back(row);
            }
        }
    }

    /// Edge indices of one tree, sorted.
    std::vector<std::uint32_t> sample(RandomStream& rng) const {
        const int n = model_.n();
        std::vector<char> in_tree(n, 0);
        std::vector<int> next(n, -1);
        const int root = static_cast<int>(rng.below(n));
        in_tree[root] = 1;
        for (int start = 0; start < n; ++start) {
            int u = start;
            while (!in_tree[u]) {
                next[u] = neighbour(u, rng);
                u = next[u];
            }
            u = start;
            while (!in_tree[u]) {
                in_tree[u] = 1;
                u = next[u];
            }
        }
        std::vector<std::uint32_t> edges;
        edges.reserve(n - 1);
        for (int v = 0; v < n; ++v) {
            if (v != root) edges.push_back(model_.edge_index(v, next[v]));
        }
        std::sort(edges.begin(), edges.end());
        return edges;
    }

private:
    int neighbour(int u, RandomStream& rng) const {
        const int n = model_.n();
        int slot = 0;
        if (uniform_) {
            slot = static_cast<int>(rng.below(n - 1));
        } else if (!tables_.empty()) {
            slot = static_cast<int>(tables_[u].draw(rng));
        } else {
            double total = 0.0;
            for (int v = 0; v < n; ++v) {
                if (v != u) total += conductance_[model_.edge_index(u, v)];
            }
            double target = rng.uniform() * total;
            int last_positive = -1;
            for (int v = 0; v < n; ++v) {
                if (v == u) continue;
                const double c = conductance_[model_.edge_index(u, v)];
                if (c > 0.0) last_positive = v;
                target -= c;
                if (target < 0.0 && c > 0.0) return v;
            }
            return last_positive;
        }
        return slot < u ? slot : slot + 1;
    }

    ProblemModel model_;
    std::vector<double> conductance_;
    bool uniform_ = false;
    std::vector<AliasTable> tables_;
};

// ---------------------------------------------------------------------------
// Exact samplers.

/// Size caps of the exact samplers.
struct SamplerCaps {
    static constexpr int tree_n = 5000;
    static constexpr int bipartite_n = 20;
    static constexpr int tsp_n = 18;
};

/// Precomputes per-instance tables once, then draws independent exact
/// samples. One instance per thread; the weights are copied in.
class ExactSampler {
public:
    ExactSampler(const ProblemModel& model, const WeightVector& weights, double beta)
        : model_(model), weights_(weights), beta_(beta) {
        detail::check_instance(model, weights, beta);
        const auto scaled = detail::scaled_factors(model, weights, beta);
        if (!scaled.any_finite) throw AllInfiniteInstance("every configuration has infinite weight");
        std::vector<double> factors(weights.size());
        for (std::size_t e = 0; e < factors.size(); ++e) factors[e] = scaled.factors[e].v;
        const int n = model.n();
        switch (model.family()) {
            case Family::spanning_tree:
                if (n > SamplerCaps::tree_n) throw CapExceeded("tree sampler supports n <= 5000");
                impl_ = WilsonSampler(model, std::move(factors));
                method_ = SampleMethod::wilson;
                break;
            case Family::matching_bipartite:
                if (n > SamplerCaps::bipartite_n) throw CapExceeded("bipartite matching sampler supports n <= 20");
                impl_ = PermanentTable(std::move(factors), n);
                if (!(std::get<PermanentTable>(impl_).permanent() > 0.0))
                    throw AllInfiniteInstance("every matching has infinite weight");
                method_ = SampleMethod::sequential_exact;
                break;
            case Family::traveling_salesman:
                if (n > SamplerCaps::tsp_n) throw CapExceeded("tsp sampler supports n <= 18");
                impl_ = TspTable<double>(model, factors);
                if (!(std::get<TspTable<double>>(impl_).total() > 0.0))
                    throw AllInfiniteInstance("every cycle has infinite weight");
                method_ = SampleMethod::dp_backward;
                break;
            case Family::matching_complete:
                impl_ = HafnianTable<double>(model, factors);
                if (!(std::get<HafnianTable<double>>(impl_).total() > 0.0))
                    throw AllInfiniteInstance("every matching has infinite weight");
                method_ = SampleMethod::sequential_exact;
                break;
            case Family::k_factor: {
                auto table = std::make_shared<KFactorSum<double>>(
                    model, [f = std::move(factors)](std::uint32_t e) { return f[e]; });
                if (!(table->total() > 0.0)) throw AllInfiniteInstance("every k-factor has infinite weight");
                impl_ = std::move(table);
                method_ = SampleMethod::sequential_exact;
                break;
            }
        }
    }

    [[nodiscard]] SampleMethod method() const noexcept { return method_; }
    [[nodiscard]] const ProblemModel& model() const noexcept { return model_; }

    GibbsSample sample(RandomStream& rng) {
        std::vector<std::uint32_t> edges;
        if (auto* w = std::get_if<WilsonSampler>(&impl_)) {
            edges = w->sample(rng);
        } else if (auto* p = std::get_if<PermanentTable>(&impl_)) {
            const auto cols = p->sample(rng);
            const int n = model_.n();
            for (int i = 0; i < n; ++i) edges.push_back(static_cast<std::uint32_t>(i * n + cols[i]));
        } else if (auto* t = std::get_if<TspTable<double>>(&impl_)) {
            edges = t->sample(rng);
        } else if (auto* h = std::get_if<HafnianTable<double>>(&impl_)) {
            edges = h->sample(rng);
        } else {
            edges = std::get<std::shared_ptr<KFactorSum<double>>>(impl_)->sample(rng);
        }
        Configuration config(model_, std::move(edges));
        const double w = config_weight(config, weights_);
        return GibbsSample{std::move(config), w, method_, std::nullopt};
    }

private:
    ProblemModel model_;
    WeightVector weights_;
    double beta_;
    SampleMethod method_ = SampleMethod::sequential_exact;
    std::variant<std::monostate, WilsonSampler, PermanentTable, TspTable<double>, HafnianTable<double>,
                 std::shared_ptr<KFactorSum<double>>>
        impl_;
};

/// One exact Gibbs sample (builds the sampler tables each call; reuse
/// ExactSampler for repeated draws).
inline GibbsSample sample_exact(const ProblemModel& model, const WeightVector& weights, double beta, RandomStream& rng) {
    ExactSampler sampler(model, weights, beta);
    return sampler.sample(rng);
}

// ---------------------------------------------------------------------------
// Metropolis chains.
//
// Moves (all proposals symmetric, accepted with min(1, exp(-beta dW))):
//   bipartite matching: swap the columns of two rows
//   K_2n matching:      re-pair two matched pairs (one of two ways)
//   tsp:                2-opt: drop two non-adjacent tour edges, reconnect
//   spanning tree:      add a non-tree edge, drop another edge of the cycle
//   k-factor:           switch two edges along an alternating 4-cycle

/// Default chain lengths: burn-in 50 m proposals, thinning m proposals.
struct ChainSchedule {
    std::uint64_t burn_in = 0;
    std::uint64_t thin = 0;
    static ChainSchedule defaults(const ProblemModel& model) {
        const auto m = model.config_size();
        return {50 * m, m};
    }
};

class MetropolisChain {
public:
    MetropolisChain(const ProblemModel& model, const WeightVector& weights, double beta, std::uint64_t seed,
                    const std::optional<Configuration>& initial = std::nullopt)
        : model_(model), weights_(weights), beta_(beta), rng_(seed) {
        detail::check_instance(model, weights, beta);
        if (initial) {
            if (!(initial->model() == model) || !is_valid_config(*initial))
                throw InvalidArgument("initial configuration is not a member of S");
            load(initial->edges());
        } else {
            load(default_state());
        }
    }

    /// One proposal. Returns true if accepted.
    bool step() {
        ++steps_;
        bool accepted = false;
        switch (model_.family()) {
            case Family::matching_bipartite: accepted = step_bipartite(); break;
            case Family::matching_complete: accepted = step_complete(); break;
            case Family::traveling_salesman: accepted = step_tsp(); break;
            case Family::spanning_tree: accepted = step_tree(); break;
            case Family::k_factor: accepted = step_kfactor(); break;
        }
        if (accepted) ++accepted_;
        return accepted;
    }

    void advance(std::uint64_t proposals) {
        for (std::uint64_t i = 0; i < proposals; ++i) step();
    }

    [[nodiscard]] Configuration current() const { return Configuration(model_, current_edges()); }

    [[nodiscard]] GibbsSample sample() const {
        Configuration config = current();
        const double w = config_weight(config, weights_);
        return GibbsSample{std::move(config), w, SampleMethod::mcmc, ChainMeta{steps_, acceptance_rate()}};
    }

    [[nodiscard]] std::uint64_t steps() const noexcept { return steps_; }
    [[nodiscard]] double acceptance_rate() const noexcept {
        return steps_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(steps_);
    }

    /// Full proposal kernel q(x -> .) from configuration x, as a map from the
    /// proposed edge set to its probability (entries for x itself collect
    /// null moves).
    [[nodiscard]] static std::map<std::vector<std::uint32_t>, double> proposal_distribution(const ProblemModel& model,
                                                                                          const Configuration& x) {
        std::map<std::vector<std::uint32_t>, double> out;
        auto add = [&](std::vector<std::uint32_t> edges, double prob) {
            std::sort(edges.begin(), edges.end());
            out[edges] += prob;
        };
        const auto& xe = x.edges();
        switch (model.family()) {
            case Family::matching_bipartite: {
                const int n = model.n();
                std::vector<int> col(n);
                for (auto e : xe) col[e / n] = static_cast<int>(e % n);
                const double q = 1.0 / (n * (n - 1) / 2.0);
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) {
                        auto c = col;
                        std::swap(c[i], c[j]);
                        std::vector<std::uint32_t> edges;
                        for (int r = 0; r < n; ++r) edges.push_back(static_cast<std::uint32_t>(r * n + c[r]));
                        add(edges, q);
                    }
                }
                break;
            }
            case Family::matching_complete:
            case Family::k_factor: {
                const std::size_t m = xe.size();
                const double q = 1.0 / (m * (m - 1) / 2.0) / 2.0;
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = i + 1; j < m; ++j) {
                        for (int option = 0; option < 2; ++option) {
                            auto y = switched(model, x, i, j, option);
                            add(y ? *y : xe, q);
                        }
                    }
                }
                break;
            }
            case Family::traveling_salesman: {
                const int n = model.n();
                if (n < 4) {
                    add(xe, 1.0);
                    break;
                }
                const auto tour = tour_order(model, xe);
                const double q = 2.0 / (n * (n - 3.0));
                for (int a = 0; a < n; ++a) {
                    for (int b = a + 2; b < n; ++b) {
                        if (a == 0 && b == n - 1) continue;
                        auto t = tour;
                        std::reverse(t.begin() + a + 1, t.begin() + b + 1);
                        add(tour_edges(model, t), q);
                    }
                }
                break;
            }
            case Family::spanning_tree: {
                const auto E = static_cast<std::uint32_t>(model.edge_count());
                const double q_edge = 1.0 / static_cast<double>(E - xe.size());
                for (std::uint32_t e = 0; e < E; ++e) {
                    if (x.contains(e)) continue;
                    const auto path = tree_path_edges(model, xe, e);
                    for (auto f : path) {
                        std::vector<std::uint32_t> y;
                        for (auto g : xe) {
                            if (g != f) y.push_back(g);
                        }
                        y.push_back(e);
                        add(y, q_edge / static_cast<double>(path.size()));
                    }
                }
                break;
            }
        }
        return out;
    }

    /// Metropolis acceptance probability for a move x -> y.
    [[nodiscard]] double acceptance_probability(const Configuration& x, const Configuration& y) const {
        return accept_prob(config_weight(x, weights_), config_weight(y, weights_));
    }

private:
    // Infinite weights: moves that remove infinite edges are always taken,
    // moves into states with more of them never; this targets the Gibbs law
    // restricted to finite configurations.
    [[nodiscard]] double accept_prob(double w_from, double w_to) const {
        if (w_to == kInfiniteWeight) return w_from == kInfiniteWeight ? 1.0 : 0.0;
        if (w_from == kInfiniteWeight) return 1.0;
        return std::min(1.0, std::exp(-beta_ * (w_to - w_from)));
    }

    bool metropolis(double delta_finite, int delta_infinite) {
        if (delta_infinite > 0) return false;
        if (delta_infinite < 0) return true;
        if (delta_finite <= 0.0) return true;
        return rng_.uniform() < std::exp(-beta_ * delta_finite);
    }

    // Weight change split into finite part and change in the number of +inf edges.
    struct Delta {
        double finite = 0.0;
        int infinite = 0;
        void add(double w) { (w == kInfiniteWeight) ? void(++infinite) : void(finite += w); }
        void remove(double w) { (w == kInfiniteWeight) ? void(--infinite) : void(finite -= w); }
    };

    [[nodiscard]] double w(int u, int v) const { return weights_[model_.edge_index(u, v)]; }

    bool step_bipartite() {
        const int n = model_.n();
        const int i = static_cast<int>(rng_.below(n));
        int j = static_cast<int>(rng_.below(n - 1));
        if (j >= i) ++j;
        Delta d;
        d.add(weights_[i * n + perm_[j]]);
        d.add(weights_[j * n + perm_[i]]);
        d.remove(weights_[i * n + perm_[i]]);
        d.remove(weights_[j * n + perm_[j]]);
        if (!metropolis(d.finite, d.infinite)) return false;
        std::swap(perm_[i], perm_[j]);
        return true;
    }

    bool step_complete() {
        // perm_ holds the partner of each vertex.
        const int n = model_.n();
        const int V = 2 * n;
        // Pick two distinct matched pairs via their lower endpoints.
        const int a_idx = static_cast<int>(rng_.below(n));
        int b_idx = static_cast<int>(rng_.below(n - 1));
        if (b_idx >= a_idx) ++b_idx;
        std::vector<int> lows;
        lows.reserve(n);
        for (int v = 0; v < V; ++v) {
            if (v < perm_[v]) lows.push_back(v);
        }
        const int a = lows[a_idx];
        const int b = perm_[a];
        int c = lows[b_idx];
        int d = perm_[c];
        if (rng_.below(2)) std::swap(c, d);
        Delta delta;
        delta.add(w(a, c));
        delta.add(w(b, d));
        delta.remove(w(a, b));
        delta.remove(w(c, d));
        if (!metropolis(delta.finite, delta.infinite)) return false;
        perm_[a] = c;
        perm_[c] = a;
        perm_[b] = d;
        perm_[d] = b;
        return true;
    }

    bool step_tsp() {
        const int n = model_.n();
        if (n < 4) return false;
        // Two non-adjacent tour edges (a, a+1) and (b, b+1), uniformly.
        int a = 0;
        int b = 0;
        do {
            a = static_cast<int>(rng_.below(n));
            b = static_cast<int>(rng_.below(n - 1));
            if (b >= a) ++b;
            if (a > b) std::swap(a, b);
        } while (b - a < 2 || (a == 0 && b == n - 1));
        const int after = perm_[(b + 1) % n];
        Delta delta;
        delta.remove(w(perm_[a], perm_[a + 1]));
        delta.remove(w(perm_[b], after));
        delta.add(w(perm_[a], perm_[b]));
        delta.add(w(perm_[a + 1], after));
        if (!metropolis(delta.finite, delta.infinite)) return false;
        std::reverse(perm_.begin() + a + 1, perm_.begin() + b + 1);
        return true;
    }

    bool step_tree() {
        const auto E = model_.edge_count();
        std::uint32_t e = 0;
        do {
            e = static_cast<std::uint32_t>(rng_.below(E));
        } while (in_config_[e]);
        const auto path = tree_path_edges(model_, tree_edges_, e);
        const std::uint32_t f = path[rng_.below(path.size())];
        Delta delta;
        delta.add(weights_[e]);
        delta.remove(weights_[f]);
        if (!metropolis(delta.finite, delta.infinite)) return false;
        in_config_[e] = 1;
        in_config_[f] = 0;
        *std::find(tree_edges_.begin(), tree_edges_.end(), f) = e;
        return true;
    }

    bool step_kfactor() {
        const std::size_t m = kf_edges_.size();
        const auto i = static_cast<std::size_t>(rng_.below(m));
        auto j = static_cast<std::size_t>(rng_.below(m - 1));
        if (j >= i) ++j;
        const int option = static_cast<int>(rng_.below(2));
        auto [a, b] = model_.endpoints(kf_edges_[i]);
        auto [c, d] = model_.endpoints(kf_edges_[j]);
        if (option == 1) std::swap(c, d);
        if (a == c || a == d || b == c || b == d) return false;
        const auto e1 = model_.edge_index(a, c);
        const auto e2 = model_.edge_index(b, d);
        if (in_config_[e1] || in_config_[e2]) return false;
        Delta delta;
        delta.add(weights_[e1]);
        delta.add(weights_[e2]);
        delta.remove(weights_[kf_edges_[i]]);
        delta.remove(weights_[kf_edges_[j]]);
        if (!metropolis(delta.finite, delta.infinite)) return false;
        in_config_[kf_edges_[i]] = 0;
        in_config_[kf_edges_[j]] = 0;
        in_config_[e1] = 1;
        in_config_[e2] = 1;
        kf_edges_[i] = e1;
        kf_edges_[j] = e2;
        return true;
    }

    /// Result of switching edges i and j of x (option 0: (a,c),(b,d); option 1:
    /// (a,d),(b,c)), or nullopt when the switch is not a valid move.
    static std::optional<std::vector<std::uint32_t>> switched(const ProblemModel& model, const Configuration& x,
                                                              std::size_t i, std::size_t j, int option) {
        const auto& xe = x.edges();
        auto [a, b] = model.endpoints(xe[i]);
        auto [c, d] = model.endpoints(xe[j]);
        if (option == 1) std::swap(c, d);
        if (a == c || a == d || b == c || b == d) return std::nullopt;
        const auto e1 = model.edge_index(a, c);
        const auto e2 = model.edge_index(b, d);
        if (x.contains(e1) || x.contains(e2)) return std::nullopt;
        std::vector<std::uint32_t> y;
        for (std::size_t t = 0; t < xe.size(); ++t) {
            if (t != i && t != j) y.push_back(xe[t]);
        }
        y.push_back(e1);
        y.push_back(e2);
        return y;
    }

    /// Vertex order of a Hamiltonian cycle, starting at 0.
    static std::vector<int> tour_order(const ProblemModel& model, const std::vector<std::uint32_t>& edges) {
        const int n = model.n();
        std::vector<std::vector<int>> adj(n);
        for (auto e : edges) {
            const auto [u, v] = model.endpoints(e);
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        std::vector<int> order{0};
        int prev = -1;
        int cur = 0;
        while (static_cast<int>(order.size()) < n) {
            const int nxt = adj[cur][0] != prev ? adj[cur][0] : adj[cur][1];
            prev = cur;
            cur = nxt;
            order.push_back(cur);
        }
        return order;
    }

    static std::vector<std::uint32_t> tour_edges(const ProblemModel& model, const std::vector<int>& order) {
        std::vector<std::uint32_t> edges;
        const int n = static_cast<int>(order.size());
        for (int i = 0; i < n; ++i) edges.push_back(model.edge_index(order[i], order[(i + 1) % n]));
        std::sort(edges.begin(), edges.end());
        return edges;
    }

    /// Edges of the tree path joining the endpoints of non-tree edge e.
    static std::vector<std::uint32_t> tree_path_edges(const ProblemModel& model, const std::vector<std::uint32_t>& tree,
                                                      std::uint32_t e) {
        const int n = model.n();
        std::vector<std::vector<std::pair<int, std::uint32_t>>> adj(n);
        for (auto t : tree) {
            const auto [u, v] = model.endpoints(t);
            adj[u].emplace_back(v, t);
            adj[v].emplace_back(u, t);
        }
        const auto [src, dst] = model.endpoints(e);
        std::vector<int> parent(n, -1);
        std::vector<std::uint32_t> via(n, 0);
        std::vector<int> stack{src};
        parent[src] = src;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            if (u == dst) break;
            for (const auto& [v, t] : adj[u]) {
                if (parent[v] != -1) continue;
                parent[v] = u;
                via[v] = t;
                stack.push_back(v);
            }
        }
        std::vector<std::uint32_t> path;
        for (int v = dst; v != src; v = parent[v]) path.push_back(via[v]);
        return path;
    }

    [[nodiscard]] std::vector<std::uint32_t> default_state() const {
        const int n = model_.n();
        std::vector<std::uint32_t> edges;
        switch (model_.family()) {
            case Family::matching_bipartite:
                for (int i = 0; i < n; ++i) edges.push_back(static_cast<std::uint32_t>(i * n + i));
                break;
            case Family::matching_complete:
                for (int i = 0; i < n; ++i) edges.push_back(model_.edge_index(2 * i, 2 * i + 1));
                break;
            case Family::traveling_salesman:
                for (int i = 0; i < n; ++i) edges.push_back(model_.edge_index(i, (i + 1) % n));
                break;
            case Family::spanning_tree:
                for (int i = 1; i < n; ++i) edges.push_back(model_.edge_index(0, i));
                break;
            case Family::k_factor: {
                // Circulant graph on 2n vertices: offsets 1..k/2, plus the
                // antipodal matching when k is odd.
                const int V = 2 * n;
                const int k = model_.k();
                for (int off = 1; off <= k / 2; ++off) {
                    for (int v = 0; v < V; ++v) edges.push_back(model_.edge_index(v, (v + off) % V));
                }
                if (k % 2) {
                    for (int v = 0; v < n; ++v) edges.push_back(model_.edge_index(v, v + n));
                }
                std::sort(edges.begin(), edges.end());
                edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
                break;
            }
        }
        return edges;
    }

    void load(const std::vector<std::uint32_t>& edges) {
        const int n = model_.n();
        in_config_.assign(model_.edge_count(), 0);
        for (auto e : edges) in_config_[e] = 1;
        switch (model_.family()) {
            case Family::matching_bipartite:
                perm_.assign(n, 0);
                for (auto e : edges) perm_[e / n] = static_cast<int>(e % n);
                break;
            case Family::matching_complete:
                perm_.assign(2 * n, 0);
                for (auto e : edges) {
                    const auto [u, v] = model_.endpoints(e);
                    perm_[u] = v;
                    perm_[v] = u;
                }
                break;
            case Family::traveling_salesman: perm_ = tour_order(model_, edges); break;
            case Family::spanning_tree: tree_edges_ = edges; break;
            case Family::k_factor: kf_edges_ = edges; break;
        }
    }

    [[nodiscard]] std::vector<std::uint32_t> current_edges() const {
        const int n = model_.n();
        std::vector<std::uint32_t> edges;
        switch (model_.family()) {
            case Family::matching_bipartite:
                for (int i = 0; i < n; ++i) edges.push_back(static_cast<std::uint32_t>(i * n + perm_[i]));
                break;
            case Family::matching_complete:
                for (int v = 0; v < 2 * n; ++v) {
                    if (v < perm_[v]) edges.push_back(model_.edge_index(v, perm_[v]));
                }
                break;
            case Family::traveling_salesman: return tour_edges(model_, perm_);
            case Family::spanning_tree: edges = tree_edges_; break;
            case Family::k_factor: edges = kf_edges_; break;
        }
        std::sort(edges.begin(), edges.end());
        return edges;
    }

    ProblemModel model_;
    WeightVector weights_;
    double beta_;
    RandomStream rng_;
    std::uint64_t steps_ = 0;
    std::uint64_t accepted_ = 0;
    std::vector<int> perm_;
    std::vector<char> in_config_;
    std::vector<std::uint32_t> tree_edges_;
    std::vector<std::uint32_t> kf_edges_;
};

/// Runs `steps` proposals, discards the first `burn_in`, and keeps every
/// `thin`-th state after that (thin = 0 means the default, m).
inline std::vector<GibbsSample> mcmc_run(const ProblemModel& model, const WeightVector& weights, double beta,
                                         std::uint64_t steps, std::uint64_t burn_in, std::uint64_t seed,
                                         std::uint64_t thin = 0,
                                         const std::optional<Configuration>& initial = std::nullopt) {
    if (!(steps > burn_in)) throw InvalidArgument("mcmc needs steps > burn_in");
    if (thin == 0) thin = ChainSchedule::defaults(model).thin;
    MetropolisChain chain(model, weights, beta, seed, initial);
    chain.advance(burn_in);
    std::vector<GibbsSample> out;
    out.reserve((steps - burn_in) / thin);
    for (std::uint64_t done = burn_in; done + thin <= steps; done += thin) {
        chain.advance(thin);
        out.push_back(chain.sample());
    }
    return out;
}

}  // namespace gibbslab
