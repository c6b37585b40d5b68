#pragma once

// The five configuration families on complete (bipartite) graphs, their
// constants, exact counts, containment probabilities and brute-force
// enumeration.
//
// Edge indexing:
//   complete graph K_V: edge (i, j), i < j, in lexicographic order
//   bipartite K_{n,n}:  row i, column j  ->  i * n + j
//                       (row i is vertex i, column j is vertex n + j)

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gibbslab/errors.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

enum class Family { matching_bipartite, matching_complete, traveling_salesman, spanning_tree, k_factor };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::matching_bipartite: return "matching-bipartite";
        case Family::matching_complete: return "matching-complete";
        case Family::traveling_salesman: return "tsp";
        case Family::spanning_tree: return "spanning-tree";
        case Family::k_factor: return "k-factor";
    }
    return "?";
}

inline Family parse_family(const std::string& name) {
    if (name == "matching-bipartite" || name == "bipartite-matching") return Family::matching_bipartite;
    if (name == "matching-complete" || name == "complete-matching") return Family::matching_complete;
    if (name == "tsp" || name == "traveling-salesman") return Family::traveling_salesman;
    if (name == "spanning-tree" || name == "tree") return Family::spanning_tree;
    if (name == "k-factor" || name == "kfactor") return Family::k_factor;
    throw InvalidArgument("unknown model '" + name +
                          "' (expected matching-bipartite, matching-complete, tsp, spanning-tree or k-factor)");
}

struct ModelConstants {
    std::uint64_t edge_count = 0;
    std::uint64_t m = 0;
    double p = 0.0;
    double gamma = 0.0;
};

/// A configuration family together with its size parameters.
class ProblemModel {
public:
    ProblemModel(Family family, int n, int k = 1) : family_(family), n_(n), k_(family == Family::k_factor ? k : 1) {
        const int min_n = family == Family::traveling_salesman ? 3 : 2;
        if (n < min_n) throw InvalidArgument(family_name(family) + " needs n >= " + std::to_string(min_n));
        if (family == Family::k_factor && (k < 1 || k > 2 * n - 1))
            throw InvalidArgument("k-factor needs 1 <= k <= 2n-1");
        if (n > 1'000'000) throw InvalidArgument("n too large");
    }

    static ProblemModel matching_bipartite(int n) { return {Family::matching_bipartite, n}; }
    static ProblemModel matching_complete(int n) { return {Family::matching_complete, n}; }
    static ProblemModel traveling_salesman(int n) { return {Family::traveling_salesman, n}; }
    static ProblemModel spanning_tree(int n) { return {Family::spanning_tree, n}; }
    static ProblemModel k_factor(int n, int k) { return {Family::k_factor, n, k}; }

    [[nodiscard]] Family family() const noexcept { return family_; }
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int k() const noexcept { return k_; }
    [[nodiscard]] bool bipartite() const noexcept { return family_ == Family::matching_bipartite; }

    [[nodiscard]] int vertex_count() const noexcept {
        switch (family_) {
            case Family::traveling_salesman:
            case Family::spanning_tree: return n_;
            default: return 2 * n_;
        }
    }

    [[nodiscard]] std::uint64_t edge_count() const noexcept {
        if (bipartite()) return std::uint64_t(n_) * n_;
        const std::uint64_t v = vertex_count();
        return v * (v - 1) / 2;
    }

    /// Number of edges in every configuration.
    [[nodiscard]] std::uint64_t config_size() const noexcept {
        switch (family_) {
            case Family::spanning_tree: return std::uint64_t(n_) - 1;
            case Family::k_factor: return std::uint64_t(n_) * k_;
            default: return std::uint64_t(n_);
        }
    }

    /// p = m / |E|, the single-edge containment probability.
    [[nodiscard]] double edge_prob() const noexcept {
        return static_cast<double>(config_size()) / static_cast<double>(edge_count());
    }

    /// Limiting value of m^2 / (2|E|).
    [[nodiscard]] double gamma() const noexcept {
        switch (family_) {
            case Family::matching_bipartite: return 0.5;
            case Family::matching_complete: return 0.25;
            case Family::traveling_salesman:
            case Family::spanning_tree: return 1.0;
            case Family::k_factor: return k_ * k_ / 4.0;
        }
        return 0.0;
    }

    [[nodiscard]] ModelConstants constants() const { return {edge_count(), config_size(), edge_prob(), gamma()}; }

    /// Index of the edge joining vertices u and v (order irrelevant). For the
    /// bipartite family u must be a row vertex and v a column vertex (n..2n-1),
    /// or vice versa.
    [[nodiscard]] std::uint32_t edge_index(int u, int v) const {
        if (bipartite()) {
            if (u > v) std::swap(u, v);
            if (u < 0 || u >= n_ || v < n_ || v >= 2 * n_) throw InvalidArgument("not a bipartite edge");
            return static_cast<std::uint32_t>(u * n_ + (v - n_));
        }
        if (u == v) throw InvalidArgument("self-loop is not an edge");
        if (u > v) std::swap(u, v);
        const std::int64_t V = vertex_count();
        if (u < 0 || v >= V) throw InvalidArgument("vertex out of range");
        return static_cast<std::uint32_t>(std::int64_t(u) * V - std::int64_t(u) * (u + 1) / 2 + (v - u - 1));
    }

    /// Endpoints (u, v), u < v, of edge e.
    [[nodiscard]] std::pair<int, int> endpoints(std::uint64_t e) const {
        if (e >= edge_count()) throw InvalidArgument("edge index out of range");
        if (bipartite()) return {static_cast<int>(e / n_), n_ + static_cast<int>(e % n_)};
        const std::int64_t V = vertex_count();
        // Row u starts at offset(u) = u*V - u(u+1)/2; invert the quadratic, then fix rounding.
        const double b = 2.0 * V - 1.0;
        auto u = static_cast<std::int64_t>((b - std::sqrt(b * b - 8.0 * double(e))) / 2.0);
        auto offset = [V](std::int64_t r) { return r * V - r * (r + 1) / 2; };
        u = std::clamp<std::int64_t>(u, 0, V - 2);
        while (u > 0 && offset(u) > std::int64_t(e)) --u;
        while (u + 1 <= V - 2 && offset(u + 1) <= std::int64_t(e)) ++u;
        const std::int64_t v = std::int64_t(e) - offset(u) + u + 1;
        return {static_cast<int>(u), static_cast<int>(v)};
    }

    [[nodiscard]] std::string describe() const {
        std::string s = family_name(family_) + "(n=" + std::to_string(n_);
        if (family_ == Family::k_factor) s += ", k=" + std::to_string(k_);
        return s + ")";
    }

    friend bool operator==(const ProblemModel& a, const ProblemModel& b) {
        return a.family_ == b.family_ && a.n_ == b.n_ && a.k_ == b.k_;
    }

private:
    Family family_;
    int n_;
    int k_;
};

/// Fixed-width mirror of an edge set, valid when |E| <= 128.
struct EdgeMask {
    std::array<std::uint64_t, 2> words{0, 0};

    void set(std::uint32_t e) { words[e >> 6] |= std::uint64_t{1} << (e & 63); }
    [[nodiscard]] int intersect_count(const EdgeMask& o) const {
        return std::popcount(words[0] & o.words[0]) + std::popcount(words[1] & o.words[1]);
    }
    friend bool operator==(const EdgeMask&, const EdgeMask&) = default;
};

/// A (possibly partial) set of edges of a model, stored sorted.
class Configuration {
public:
    Configuration(const ProblemModel& model, std::vector<std::uint32_t> edges) : model_(model), edges_(std::move(edges)) {
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw InvalidArgument("configuration lists an edge twice");
        if (!edges_.empty() && edges_.back() >= model_.edge_count()) throw InvalidArgument("edge index out of range");
        if (model_.edge_count() <= 128) {
            mask_.emplace();
            for (auto e : edges_) mask_->set(e);
        }
    }

    [[nodiscard]] const ProblemModel& model() const noexcept { return model_; }
    [[nodiscard]] const std::vector<std::uint32_t>& edges() const& noexcept { return edges_; }
    [[nodiscard]] std::vector<std::uint32_t> edges() && noexcept { return std::move(edges_); }
    [[nodiscard]] std::size_t size() const noexcept { return edges_.size(); }
    [[nodiscard]] const std::optional<EdgeMask>& mask() const noexcept { return mask_; }
    [[nodiscard]] bool contains(std::uint32_t e) const { return std::binary_search(edges_.begin(), edges_.end(), e); }

    friend bool operator==(const Configuration& a, const Configuration& b) {
        return a.model_ == b.model_ && a.edges_ == b.edges_;
    }

private:
    ProblemModel model_;
    std::vector<std::uint32_t> edges_;
    std::optional<EdgeMask> mask_;
};

/// |a ∩ b|, the number of shared edges.
inline std::size_t overlap(const Configuration& a, const Configuration& b) {
    if (!(a.model() == b.model())) throw InvalidArgument("overlap of configurations from different models");
    if (a.mask() && b.mask()) return static_cast<std::size_t>(a.mask()->intersect_count(*b.mask()));
    std::size_t count = 0;
    auto i = a.edges().begin();
    auto j = b.edges().begin();
    while (i != a.edges().end() && j != b.edges().end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

/// W(pi) = sum of member edge weights; +inf if any member weight is +inf.
inline double config_weight(const Configuration& config, const WeightVector& weights) {
    if (weights.size() != config.model().edge_count()) throw InvalidArgument("weight vector length differs from |E|");
    double total = 0.0;
    for (auto e : config.edges()) {
        if (weights[e] == kInfiniteWeight) return kInfiniteWeight;
        total += weights[e];
    }
    return total;
}

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(int n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }
    int component_size(int x) { return size_[find(x)]; }

private:
    std::vector<int> parent_;
    std::vector<int> size_;
};

inline std::vector<int> degrees(const ProblemModel& model, const std::vector<std::uint32_t>& edges) {
    std::vector<int> deg(model.vertex_count(), 0);
    for (auto e : edges) {
        const auto [u, v] = model.endpoints(e);
        ++deg[u];
        ++deg[v];
    }
    return deg;
}

inline void check_edge_set(const ProblemModel& model, const std::vector<std::uint32_t>& edges) {
    for (auto e : edges) {
        if (e >= model.edge_count()) throw InvalidArgument("edge index out of range");
    }
    std::vector<std::uint32_t> sorted(edges);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw InvalidArgument("duplicate edge");
}

inline BigInt factorial(unsigned n) {
    BigInt r = 1;
    for (unsigned i = 2; i <= n; ++i) r *= i;
    return r;
}

inline BigInt power(unsigned base, unsigned exp) {
    BigInt r = 1;
    for (unsigned i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace detail

/// True when no two edges share a vertex.
inline bool is_partial_matching(const ProblemModel& model, const std::vector<std::uint32_t>& edges) {
    const auto deg = detail::degrees(model, edges);
    return std::all_of(deg.begin(), deg.end(), [](int d) { return d <= 1; });
}

/// Membership test for the family's configuration set S.
inline bool is_valid_config(const ProblemModel& model, const std::vector<std::uint32_t>& edges) {
    for (auto e : edges) {
        if (e >= model.edge_count()) return false;
    }
    std::vector<std::uint32_t> sorted(edges);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
    if (sorted.size() != model.config_size()) return false;
    const auto deg = detail::degrees(model, sorted);
    switch (model.family()) {
        case Family::matching_bipartite:
        case Family::matching_complete:
            return std::all_of(deg.begin(), deg.end(), [](int d) { return d == 1; });
        case Family::k_factor:
            return std::all_of(deg.begin(), deg.end(), [&](int d) { return d == model.k(); });
        case Family::traveling_salesman: {
            if (!std::all_of(deg.begin(), deg.end(), [](int d) { return d == 2; })) return false;
            detail::DisjointSets ds(model.vertex_count());
            for (auto e : sorted) {
                const auto [u, v] = model.endpoints(e);
                ds.unite(u, v);
            }
            return ds.component_size(0) == model.vertex_count();
        }
        case Family::spanning_tree: {
            detail::DisjointSets ds(model.vertex_count());
            for (auto e : sorted) {
                const auto [u, v] = model.endpoints(e);
                if (!ds.unite(u, v)) return false;
            }
            return true;
        }
    }
    return false;
}

inline bool is_valid_config(const Configuration& config) { return is_valid_config(config.model(), config.edges()); }

// ---------------------------------------------------------------------------
// k-factor dynamic programme over degree deficits.
//
// Vertices are processed in increasing order; the lowest vertex with a
// positive deficit picks exactly that many partners among higher vertices that
// still have positive deficit. Once every vertex below v has deficit 0, the
// remaining subproblem depends only on the deficit vector, which is the memo
// key (4 bits per vertex, so at most 16 vertices and k <= 15).

inline constexpr int kKFactorMaxVertices = 16;

template <class T>
class KFactorSum {
public:
    /// factor(e) is the weight of choosing edge e; edges with `forbidden[e]`
    /// are never chosen; edges in `forced` are pre-included (their factor is
    /// multiplied in and their endpoints' deficits reduced).
    KFactorSum(const ProblemModel& model, std::function<T(std::uint32_t)> factor,
               const std::vector<std::uint32_t>& forced = {}, const std::vector<bool>& forbidden = {})
        : model_(model), factor_(std::move(factor)) {
        if (model.family() != Family::k_factor) throw InvalidArgument("KFactorSum needs a k-factor model");
        const int V = model.vertex_count();
        if (V > kKFactorMaxVertices || model.k() > 15)
            throw CapExceeded("k-factor dynamic programme supports at most 16 vertices and k <= 15");
        allowed_.assign(model.edge_count(), true);
        if (!forbidden.empty()) {
            for (std::size_t e = 0; e < allowed_.size(); ++e) allowed_[e] = !forbidden[e];
        }
        std::vector<int> deficit(V, model.k());
        prefactor_ = T(1);
        for (auto e : forced) {
            const auto [u, v] = model.endpoints(e);
            if (!allowed_[e]) feasible_ = false;
            allowed_[e] = false;
            if (--deficit[u] < 0 || --deficit[v] < 0) feasible_ = false;
            prefactor_ = prefactor_ * factor_(e);
        }
        for (int v = 0; v < V; ++v) root_ |= std::uint64_t(std::max(deficit[v], 0)) << (4 * v);
    }

    [[nodiscard]] T total() {
        if (!feasible_) return T(0);
        return prefactor_ * solve(root_);
    }

    /// Draws one configuration with probability proportional to the product
    /// of factors (T must be real-valued). Includes the forced edges.
    template <class Rng>
    std::vector<std::uint32_t> sample(Rng& rng) {
        static_assert(std::is_convertible_v<T, double>);
        if (!feasible_ || !(static_cast<double>(solve(root_)) > 0.0)) throw AllInfiniteInstance("k-factor instance has zero mass");
        std::vector<std::uint32_t> out;
        std::uint64_t state = root_;
        while (state != 0) {
            const int v = lowest(state);
            std::vector<std::pair<double, std::vector<int>>> options;
            for_each_choice(state, v, [&](const std::vector<int>& chosen, T weight, std::uint64_t next) {
                options.emplace_back(static_cast<double>(weight * solve(next)), chosen);
            });
            double total = 0.0;
            for (const auto& o : options) total += o.first;
            double r = rng.uniform() * total;
            std::size_t pick = 0;
            for (; pick + 1 < options.size(); ++pick) {
                r -= options[pick].first;
                if (r < 0.0) break;
            }
            while (options[pick].first <= 0.0 && pick > 0) --pick;
            for (int w : options[pick].second) out.push_back(model_.edge_index(v, w));
            for (int w : options[pick].second) state -= (std::uint64_t{1} << (4 * w));
            state &= ~(std::uint64_t{0xF} << (4 * v));
        }
        return out;
    }

private:
    static int lowest(std::uint64_t state) {
        int v = 0;
        while (((state >> (4 * v)) & 0xF) == 0) ++v;
        return v;
    }

    template <class Fn>
    void for_each_choice(std::uint64_t state, int v, Fn&& fn) {
        const int V = model_.vertex_count();
        const int need = static_cast<int>((state >> (4 * v)) & 0xF);
        std::vector<int> candidates;
        std::vector<T> factors;
        for (int w = v + 1; w < V; ++w) {
            if (((state >> (4 * w)) & 0xF) == 0) continue;
            const auto e = model_.edge_index(v, w);
            if (!allowed_[e]) continue;
            candidates.push_back(w);
            factors.push_back(factor_(e));
        }
        if (static_cast<int>(candidates.size()) < need) return;
        const std::uint64_t cleared = state & ~(std::uint64_t{0xF} << (4 * v));
        std::vector<int> chosen;
        std::function<void(std::size_t, T, std::uint64_t)> rec = [&](std::size_t start, T weight, std::uint64_t next) {
            if (static_cast<int>(chosen.size()) == need) {
                fn(chosen, weight, next);
                return;
            }
            const std::size_t remaining = need - chosen.size();
            for (std::size_t i = start; i + remaining <= candidates.size(); ++i) {
                chosen.push_back(candidates[i]);
                rec(i + 1, weight * factors[i], next - (std::uint64_t{1} << (4 * candidates[i])));
                chosen.pop_back();
            }
        };
        rec(0, T(1), cleared);
    }

    T solve(std::uint64_t state) {
        if (state == 0) return T(1);
        if (auto it = memo_.find(state); it != memo_.end()) return it->second;
        T acc(0);
        for_each_choice(state, lowest(state),
                        [&](const std::vector<int>&, T weight, std::uint64_t next) { acc = acc + weight * solve(next); });
        memo_.emplace(state, acc);
        return acc;
    }

    ProblemModel model_;
    std::function<T(std::uint32_t)> factor_;
    std::vector<bool> allowed_;
    T prefactor_{1};
    bool feasible_ = true;
    std::uint64_t root_ = 0;
    std::unordered_map<std::uint64_t, T> memo_;
};

// ---------------------------------------------------------------------------
// Counts.

inline constexpr int kKFactorExactCountMaxVertices = 12;

struct ConfigCount {
    std::optional<BigInt> exact;  ///< empty when only the asymptotic value is known
    double log_count = 0.0;       ///< natural log of the (exact or approximate) count
    bool approximate = false;
};

namespace detail {

inline double log_factorial(double n) { return std::lgamma(n + 1.0); }

inline BigInt kfactor_exact_count(const ProblemModel& model, const std::vector<std::uint32_t>& forced = {}) {
    KFactorSum<unsigned __int128> dp(model, [](std::uint32_t) { return static_cast<unsigned __int128>(1); }, forced);
    const unsigned __int128 c = dp.total();
    BigInt out = static_cast<std::uint64_t>(c >> 64);
    out <<= 64;
    out += static_cast<std::uint64_t>(c);
    return out;
}

/// Configuration-model count with the simple-graph correction exp(-(k^2-1)/4).
inline double kfactor_log_count_asymptotic(int n, int k) {
    const double nk = double(n) * k;
    return log_factorial(2.0 * nk) - nk * std::log(2.0) - log_factorial(nk) - 2.0 * n * log_factorial(k) -
           (double(k) * k - 1.0) / 4.0;
}

inline double big_log(const BigInt& x) {
    // Splits off a power of two so the conversion never overflows.
    const auto bits = boost::multiprecision::msb(x);
    if (bits < 1000) return std::log(x.convert_to<double>());
    const unsigned shift = static_cast<unsigned>(bits - 900);
    const BigInt top = x >> shift;
    return std::log(top.convert_to<double>()) + shift * std::log(2.0);
}

}  // namespace detail

enum class CountMode { allow_approximate, exact_only };

/// |S| for the model. Exact for the first four families at any n; the k-factor
/// family is counted exactly for 2n <= 12 and otherwise by its asymptotic
/// formula (flagged approximate), or rejected in exact_only mode.
inline ConfigCount count_configs(const ProblemModel& model, CountMode mode = CountMode::allow_approximate) {
    const unsigned n = static_cast<unsigned>(model.n());
    ConfigCount out;
    switch (model.family()) {
        case Family::matching_bipartite:
            out.log_count = detail::log_factorial(n);
            if (n <= 5000) out.exact = detail::factorial(n);
            return out;
        case Family::matching_complete:
            out.log_count = detail::log_factorial(2.0 * n) - n * std::log(2.0) - detail::log_factorial(n);
            if (n <= 2500) out.exact = detail::factorial(2 * n) / (detail::power(2, n) * detail::factorial(n));
            return out;
        case Family::traveling_salesman:
            out.log_count = detail::log_factorial(n - 1.0) - std::log(2.0);
            if (n <= 5000) out.exact = detail::factorial(n - 1) / 2;
            return out;
        case Family::spanning_tree:
            out.log_count = (n - 2.0) * std::log(double(n));
            if (n <= 5000) out.exact = detail::power(n, n - 2);
            return out;
        case Family::k_factor:
            if (model.vertex_count() <= kKFactorExactCountMaxVertices) {
                out.exact = detail::kfactor_exact_count(model);
                out.log_count = *out.exact > 0 ? detail::big_log(*out.exact) : -kInfiniteWeight;
                return out;
            }
            if (mode == CountMode::exact_only)
                throw CapExceeded("exact k-factor counts are limited to 2n <= " +
                                  std::to_string(kKFactorExactCountMaxVertices));
            out.log_count = detail::kfactor_log_count_asymptotic(model.n(), model.k());
            out.approximate = true;
            return out;
    }
    return out;
}

/// Generalized Cayley formula: spanning trees of K_n containing a fixed
/// spanning forest with component sizes s_1..s_t number n^{t-2} * prod s_i.
inline BigInt cayley_extension_count(int n, const std::vector<int>& component_sizes) {
    if (component_sizes.empty()) throw InvalidArgument("need at least one component");
    long long total = 0;
    for (int s : component_sizes) {
        if (s < 1) throw InvalidArgument("component sizes must be positive");
        total += s;
    }
    if (total != n) throw InvalidArgument("component sizes must sum to n");
    const auto t = static_cast<unsigned>(component_sizes.size());
    BigInt prod = 1;
    for (int s : component_sizes) prod *= s;
    if (t == 1) return prod / n;  // n^{-1} * n
    return detail::power(static_cast<unsigned>(n), t - 2) * prod;
}

/// Component vertex counts (including singletons) of the forest spanned by
/// `edges` on the model's vertex set; empty optional when `edges` has a cycle.
inline std::optional<std::vector<int>> forest_component_sizes(const ProblemModel& model,
                                                              const std::vector<std::uint32_t>& edges) {
    detail::DisjointSets ds(model.vertex_count());
    for (auto e : edges) {
        const auto [u, v] = model.endpoints(e);
        if (!ds.unite(u, v)) return std::nullopt;
    }
    std::vector<int> sizes;
    for (int v = 0; v < model.vertex_count(); ++v) {
        if (ds.find(v) == v) sizes.push_back(ds.component_size(v));
    }
    return sizes;
}

/// P(Gamma ⊆ pi) for pi uniform on S, as an exact rational.
inline Rational containment_prob(const ProblemModel& model, const std::vector<std::uint32_t>& gamma_set) {
    detail::check_edge_set(model, gamma_set);
    const auto k = static_cast<unsigned>(gamma_set.size());
    const unsigned n = static_cast<unsigned>(model.n());
    if (k == 0) return Rational(1);
    switch (model.family()) {
        case Family::matching_bipartite: {
            if (!is_partial_matching(model, gamma_set)) return Rational(0);
            // (n-k)!/n! = 1/(n)_k
            BigInt falling = 1;
            for (unsigned i = 0; i < k; ++i) falling *= (n - i);
            return Rational(BigInt(1), falling);
        }
        case Family::matching_complete: {
            if (!is_partial_matching(model, gamma_set)) return Rational(0);
            BigInt denom = 1;
            for (unsigned i = 0; i < k; ++i) denom *= (2 * n - 2 * i - 1);
            return Rational(BigInt(1), denom);
        }
        case Family::traveling_salesman: {
            const auto deg = detail::degrees(model, gamma_set);
            if (std::any_of(deg.begin(), deg.end(), [](int d) { return d > 2; })) return Rational(0);
            const auto sizes = forest_component_sizes(model, gamma_set);
            const BigInt cycles = detail::factorial(n - 1) / 2;
            if (!sizes) {
                // A cycle inside Gamma extends only if it is itself Hamiltonian.
                if (k != n) return Rational(0);
                detail::DisjointSets ds(static_cast<int>(n));
                for (auto e : gamma_set) {
                    const auto [u, v] = model.endpoints(e);
                    ds.unite(u, v);
                }
                return ds.component_size(0) == static_cast<int>(n) ? Rational(BigInt(1), cycles) : Rational(0);
            }
            unsigned paths = 0;
            for (int s : *sizes) paths += s > 1 ? 1 : 0;
            // 2^{s-1} (n-k-1)! Hamiltonian cycles contain a linear forest with s paths and k edges.
            const BigInt containing = detail::power(2, paths - 1) * detail::factorial(n - k - 1);
            return Rational(containing, cycles);
        }
        case Family::spanning_tree: {
            const auto sizes = forest_component_sizes(model, gamma_set);
            if (!sizes) return Rational(0);
            return Rational(cayley_extension_count(static_cast<int>(n), *sizes), detail::power(n, n - 2));
        }
        case Family::k_factor: {
            if (model.vertex_count() > kKFactorExactCountMaxVertices)
                throw CapExceeded("k-factor containment probabilities are computed by enumeration only (2n <= " +
                                  std::to_string(kKFactorExactCountMaxVertices) + ")");
            const auto deg = detail::degrees(model, gamma_set);
            if (std::any_of(deg.begin(), deg.end(), [&](int d) { return d > model.k(); })) return Rational(0);
            const BigInt total = detail::kfactor_exact_count(model);
            return Rational(detail::kfactor_exact_count(model, gamma_set), total);
        }
    }
    return Rational(0);
}

// ---------------------------------------------------------------------------
// Brute-force enumeration.

inline constexpr double kEnumerationCap = 1e7;

namespace detail {

inline void enumerate_bipartite(const ProblemModel& model, const std::function<void(std::vector<std::uint32_t>&&)>& emit) {
    const int n = model.n();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        std::vector<std::uint32_t> edges(n);
        for (int i = 0; i < n; ++i) edges[i] = static_cast<std::uint32_t>(i * n + perm[i]);
        emit(std::move(edges));
    } while (std::next_permutation(perm.begin(), perm.end()));
}

inline void enumerate_complete_matchings(const ProblemModel& model,
                                         const std::function<void(std::vector<std::uint32_t>&&)>& emit) {
    const int V = model.vertex_count();
    std::vector<bool> used(V, false);
    std::vector<std::uint32_t> edges;
    std::function<void()> rec = [&]() {
        int i = 0;
        while (i < V && used[i]) ++i;
        if (i == V) {
            std::vector<std::uint32_t> out(edges);
            std::sort(out.begin(), out.end());
            emit(std::move(out));
            return;
        }
        used[i] = true;
        for (int j = i + 1; j < V; ++j) {
            if (used[j]) continue;
            used[j] = true;
            edges.push_back(model.edge_index(i, j));
            rec();
            edges.pop_back();
            used[j] = false;
        }
        used[i] = false;
    };
    rec();
}

inline void enumerate_cycles(const ProblemModel& model, const std::function<void(std::vector<std::uint32_t>&&)>& emit) {
    const int n = model.n();
    // Tours 0 -> perm[0] -> ... -> perm[n-2] -> 0; perm[0] < perm[n-2] fixes the orientation.
    std::vector<int> perm(n - 1);
    std::iota(perm.begin(), perm.end(), 1);
    do {
        if (perm.front() > perm.back()) continue;
        std::vector<std::uint32_t> edges;
        edges.reserve(n);
        int prev = 0;
        for (int v : perm) {
            edges.push_back(model.edge_index(prev, v));
            prev = v;
        }
        edges.push_back(model.edge_index(prev, 0));
        std::sort(edges.begin(), edges.end());
        emit(std::move(edges));
    } while (std::next_permutation(perm.begin(), perm.end()));
}

inline std::vector<std::uint32_t> decode_pruefer(const ProblemModel& model, const std::vector<int>& code) {
    const int n = model.n();
    std::vector<int> degree(n, 1);
    for (int c : code) ++degree[c];
    std::vector<std::uint32_t> edges;
    edges.reserve(n - 1);
    for (int c : code) {
        int leaf = 0;
        while (degree[leaf] != 1) ++leaf;
        edges.push_back(model.edge_index(leaf, c));
        --degree[leaf];
        --degree[c];
    }
    int u = -1;
    for (int v = 0; v < n; ++v) {
        if (degree[v] == 1) {
            if (u < 0) {
                u = v;
            } else {
                edges.push_back(model.edge_index(u, v));
                break;
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

inline void enumerate_trees(const ProblemModel& model, const std::function<void(std::vector<std::uint32_t>&&)>& emit) {
    const int n = model.n();
    std::vector<int> code(n - 2, 0);
    while (true) {
        emit(decode_pruefer(model, code));
        int pos = n - 3;
        while (pos >= 0 && code[pos] == n - 1) code[pos--] = 0;
        if (pos < 0) break;
        ++code[pos];
    }
}

inline void enumerate_kfactors(const ProblemModel& model, const std::function<void(std::vector<std::uint32_t>&&)>& emit) {
    // Include/exclude each edge in index order, pruning on degree.
    const int V = model.vertex_count();
    const int k = model.k();
    const auto E = static_cast<std::uint32_t>(model.edge_count());
    std::vector<std::pair<int, int>> ends(E);
    std::vector<std::uint32_t> last_edge_of(V, 0);
    for (std::uint32_t e = 0; e < E; ++e) {
        ends[e] = model.endpoints(e);
        last_edge_of[ends[e].first] = std::max(last_edge_of[ends[e].first], e);
        last_edge_of[ends[e].second] = std::max(last_edge_of[ends[e].second], e);
    }
    std::vector<int> deg(V, 0);
    std::vector<std::uint32_t> chosen;
    std::function<void(std::uint32_t)> rec = [&](std::uint32_t e) {
        if (e == E) {
            if (std::all_of(deg.begin(), deg.end(), [k](int d) { return d == k; })) emit(std::vector<std::uint32_t>(chosen));
            return;
        }
        const auto [u, v] = ends[e];
        if (deg[u] < k && deg[v] < k) {
            ++deg[u];
            ++deg[v];
            chosen.push_back(e);
            rec(e + 1);
            chosen.pop_back();
            --deg[u];
            --deg[v];
        }
        // Skipping e is only viable if u and v can still reach degree k later.
        if ((e == last_edge_of[u] && deg[u] < k) || (e == last_edge_of[v] && deg[v] < k)) return;
        rec(e + 1);
    };
    rec(0);
}

inline double enumeration_size(const ProblemModel& model) {
    if (model.family() == Family::k_factor) {
        if (model.vertex_count() > kKFactorExactCountMaxVertices) return kInfiniteWeight;
        return count_configs(model).exact->convert_to<double>();
    }
    return std::exp(count_configs(model).log_count);
}

}  // namespace detail

/// Calls `visit` once per member of S (brute force). Rejects models with more
/// than 10^7 configurations.
inline void for_each_config(const ProblemModel& model, const std::function<void(const Configuration&)>& visit) {
    if (detail::enumeration_size(model) > kEnumerationCap * (1.0 + 1e-9))
        throw CapExceeded("enumeration of " + model.describe() + " exceeds the 10^7 configuration cap");
    auto emit = [&](std::vector<std::uint32_t>&& edges) { visit(Configuration(model, std::move(edges))); };
    switch (model.family()) {
        case Family::matching_bipartite: detail::enumerate_bipartite(model, emit); break;
        case Family::matching_complete: detail::enumerate_complete_matchings(model, emit); break;
        case Family::traveling_salesman: detail::enumerate_cycles(model, emit); break;
        case Family::spanning_tree: detail::enumerate_trees(model, emit); break;
        case Family::k_factor: detail::enumerate_kfactors(model, emit); break;
    }
}

inline std::vector<Configuration> enumerate_configs(const ProblemModel& model) {
    std::vector<Configuration> out;
    for_each_config(model, [&](const Configuration& c) { out.push_back(c); });
    return out;
}

}  // namespace gibbslab
