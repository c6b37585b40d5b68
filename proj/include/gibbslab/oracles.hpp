#pragma once

// Exact partition functions
//   Z(beta) = |S|^{-1} sum_{pi in S} exp(-beta W(pi))
// with d(log Z)/d(beta), and exact Gibbs edge marginals.
//
// Every recursion runs on per-edge factors exp(-beta (w_e - s_e)), where the
// shift s_e is chosen so that sum_{e in pi} s_e is the same constant for every
// configuration (a global minimum weight, or per-row minima for the
// permanent). The factors are then <= 1 and the constant is added back in
// log space.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gibbslab/dual.hpp"
#include "gibbslab/errors.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

enum class PartitionMethod { permanent, subset_dp, matrix_tree, brute_force, hafnian_bruteforce };

inline std::string method_name(PartitionMethod m) {
    switch (m) {
        case PartitionMethod::permanent: return "permanent";
        case PartitionMethod::subset_dp: return "subset_dp";
        case PartitionMethod::matrix_tree: return "matrix_tree";
        case PartitionMethod::brute_force: return "brute_force";
        case PartitionMethod::hafnian_bruteforce: return "hafnian_bruteforce";
    }
    return "?";
}

enum class PartitionOutcome { finite, all_infinite };

struct PartitionResult {
    double log_z = 0.0;        ///< -inf when every configuration has infinite weight
    double dlogz_dbeta = 0.0;  ///< = -<W(pi)>_beta; NaN when all-infinite or not requested
    PartitionMethod method = PartitionMethod::brute_force;
    PartitionOutcome outcome = PartitionOutcome::finite;
    double beta = 0.0;
    std::uint64_t instance_seed = 0;

    [[nodiscard]] bool all_infinite() const noexcept { return outcome == PartitionOutcome::all_infinite; }
    /// Gibbs average <W(pi)>_beta.
    [[nodiscard]] double gibbs_mean_weight() const noexcept { return -dlogz_dbeta; }
};

/// Size caps of the specialised oracles.
struct OracleCaps {
    static constexpr int permanent_n = 18;
    static constexpr int tsp_n = 20;
    static constexpr int tree_n = 5000;
    static constexpr int hafnian_n = 10;  // 2n <= 20 vertices
    static constexpr int kfactor_vertices = kKFactorExactCountMaxVertices;
};

struct LogDual {
    double log_value = 0.0;
    double dlog = 0.0;
};

// ---------------------------------------------------------------------------
// Permanent (Ryser, Gray-code order).

inline constexpr double kCancellationTolerance = 1e-6;

/// Ryser's formula on an n x n row-major matrix. `rel_error_bound` receives a
/// running bound on the relative rounding error of the result.
template <class T>
T ryser_permanent(const std::vector<T>& a, int n, double* rel_error_bound = nullptr) {
    if (n == 0) return T(1);
    if (static_cast<int>(a.size()) != n * n) throw InvalidArgument("matrix size mismatch");
    if (n > 30) throw CapExceeded("Ryser permanent is limited to n <= 30");
    std::vector<T> row_sum(n, T(0));
    CompensatedSum value_sum;
    CompensatedSum deriv_sum;
    const std::uint64_t subsets = std::uint64_t{1} << n;
    std::uint64_t gray = 0;
    for (std::uint64_t g = 1; g < subsets; ++g) {
        const int col = std::countr_zero(g);
        const bool adding = ((gray >> col) & 1u) == 0;
        gray ^= std::uint64_t{1} << col;
        for (int i = 0; i < n; ++i) {
            if (adding) {
                row_sum[i] += a[i * n + col];
            } else {
                row_sum[i] -= a[i * n + col];
            }
        }
        T prod = row_sum[0];
        for (int i = 1; i < n; ++i) prod *= row_sum[i];
        const bool negative = ((n - std::popcount(gray)) & 1) != 0;
        if constexpr (std::is_same_v<T, Dual>) {
            value_sum.add(negative ? -prod.v : prod.v);
            deriv_sum.add(negative ? -prod.d : prod.d);
        } else {
            value_sum.add(negative ? -prod : prod);
        }
    }
    const double value = value_sum.value();
    if (rel_error_bound) {
        const double eps = std::numeric_limits<double>::epsilon();
        *rel_error_bound = value == 0.0 ? std::numeric_limits<double>::infinity()
                                        : 2.0 * (n + 2) * eps * value_sum.abs_total() / std::abs(value);
    }
    if constexpr (std::is_same_v<T, Dual>) {
        return Dual{value, deriv_sum.value()};
    } else {
        return value;
    }
}

/// log of the permanent of a nonnegative matrix of (entry, d entry/d beta)
/// pairs, and the derivative of that log. Rows are rescaled to unit maximum
/// first. Throws NumericalError when cancellation makes the result unreliable.
inline LogDual permanent_log_deriv(std::vector<Dual> matrix, int n) {
    if (n > OracleCaps::permanent_n) throw CapExceeded("permanent oracle is limited to n <= 18");
    if (static_cast<int>(matrix.size()) != n * n) throw InvalidArgument("matrix size mismatch");
    LogDual out;
    for (int i = 0; i < n; ++i) {
        double row_max = 0.0;
        for (int j = 0; j < n; ++j) {
            const Dual& x = matrix[i * n + j];
            if (!(x.v >= 0.0) || !std::isfinite(x.v) || !std::isfinite(x.d))
                throw InvalidArgument("permanent entries must be finite and nonnegative");
            row_max = std::max(row_max, x.v);
        }
        if (row_max == 0.0) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
        // Scaling by a constant leaves d(log perm) unchanged.
        for (int j = 0; j < n; ++j) {
            matrix[i * n + j].v /= row_max;
            matrix[i * n + j].d /= row_max;
        }
        out.log_value += std::log(row_max);
    }
    double bound = 0.0;
    const Dual perm = ryser_permanent(matrix, n, &bound);
    if (perm.v <= 0.0) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
    if (bound > kCancellationTolerance)
        throw NumericalError("Ryser cancellation: relative error bound " + std::to_string(bound) + " exceeds 1e-6");
    out.log_value += std::log(perm.v);
    out.dlog = perm.d / perm.v;
    return out;
}

/// Permanents of every (column-subset, leading-rows) minor: h[mask] sums over
/// assignments of rows 0..|mask|-1 to the columns in mask. Nonnegative
/// entries, so no cancellation; used for sequential sampling.
class PermanentTable {
public:
    PermanentTable(std::vector<double> a, int n) : a_(std::move(a)), n_(n), h_(std::size_t{1} << n, 0.0) {
        if (n > 24) throw CapExceeded("permanent table is limited to n <= 24");
        h_[0] = 1.0;
        for (std::uint32_t mask = 1; mask < h_.size(); ++mask) {
            const int row = std::popcount(mask) - 1;
            double acc = 0.0;
            for (std::uint32_t rest = mask; rest; rest &= rest - 1) {
                const int j = std::countr_zero(rest);
                acc += a_[row * n_ + j] * h_[mask ^ (1u << j)];
            }
            h_[mask] = acc;
        }
    }

    [[nodiscard]] double permanent() const { return h_.back(); }

    /// Column assigned to each row, drawn with probability proportional to
    /// the product of the chosen entries.
    template <class Rng>
    std::vector<int> sample(Rng& rng) const {
        std::vector<int> col_of_row(n_);
        std::uint32_t mask = static_cast<std::uint32_t>(h_.size() - 1);
        for (int row = n_ - 1; row >= 0; --row) {
            const double target = rng.uniform() * h_[mask];
            double acc = 0.0;
            int pick = -1;
            for (std::uint32_t rest = mask; rest; rest &= rest - 1) {
                const int j = std::countr_zero(rest);
                const double w = a_[row * n_ + j] * h_[mask ^ (1u << j)];
                if (w <= 0.0) continue;
                pick = j;
                acc += w;
                if (target < acc) break;
            }
            col_of_row[row] = pick;
            mask ^= 1u << pick;
        }
        return col_of_row;
    }

private:
    std::vector<double> a_;
    int n_;
    std::vector<double> h_;
};

// ---------------------------------------------------------------------------
// Hamiltonian cycles: subset DP over (visited set, endpoint).

/// f[S][j]: sum over paths starting at vertex 0, visiting exactly {0} ∪ S and
/// ending at j ∈ S, of the product of edge factors. Vertex v >= 1 is bit v-1.
template <class T>
class TspTable {
public:
    TspTable(const ProblemModel& model, const std::vector<T>& factors) : model_(model), factors_(factors) {
        const int n = model.n();
        if (n > OracleCaps::tsp_n) throw CapExceeded("TSP subset DP is limited to n <= 20");
        const int bits = n - 1;
        f_.assign((std::size_t{1} << bits) * bits, T(0));
        for (int j = 0; j < bits; ++j) f_[index(1u << j, j)] = factor(0, j + 1);
        for (std::uint32_t set = 1; set < (1u << bits); ++set) {
            if (std::popcount(set) < 2) continue;
            for (std::uint32_t rest = set; rest; rest &= rest - 1) {
                const int j = std::countr_zero(rest);
                const std::uint32_t prev = set ^ (1u << j);
                T acc(0);
                for (std::uint32_t r2 = prev; r2; r2 &= r2 - 1) {
                    const int i = std::countr_zero(r2);
                    acc += f_[index(prev, i)] * factor(i + 1, j + 1);
                }
                f_[index(set, j)] = acc;
            }
        }
    }

    /// Sum over undirected Hamiltonian cycles of the product of factors.
    [[nodiscard]] T total() const {
        const int bits = model_.n() - 1;
        const std::uint32_t full = (1u << bits) - 1;
        T acc(0);
        for (int j = 0; j < bits; ++j) acc += f_[index(full, j)] * factor(j + 1, 0);
        // Each cycle appears once per orientation.
        return acc * T(0.5);
    }

    /// Backward sampling of a cycle (real-valued T only). Returns edge indices.
    template <class Rng>
    std::vector<std::uint32_t> sample(Rng& rng) const {
        const int bits = model_.n() - 1;
        std::uint32_t set = (1u << bits) - 1;
        auto value = [](const T& x) -> double {
            if constexpr (std::is_same_v<T, Dual>) return x.v; else return static_cast<double>(x);
        };
        auto choose = [&](auto&& weight_of) {
            double total = 0.0;
            for (std::uint32_t r = set; r; r &= r - 1) total += weight_of(std::countr_zero(r));
            const double target = rng.uniform() * total;
            double acc = 0.0;
            int pick = -1;
            for (std::uint32_t r = set; r; r &= r - 1) {
                const int i = std::countr_zero(r);
                const double w = weight_of(i);
                if (w <= 0.0) continue;
                pick = i;
                acc += w;
                if (target < acc) break;
            }
            if (pick < 0) throw AllInfiniteInstance("TSP instance has zero mass");
            return pick;
        };
        std::vector<std::uint32_t> edges;
        int last = choose([&](int j) { return value(f_[index(set, j)] * factor(j + 1, 0)); });
        edges.push_back(model_.edge_index(last + 1, 0));
        while (std::popcount(set) > 1) {
            const std::uint32_t prev = set ^ (1u << last);
            set = prev;
            const int cur = last;
            const int i = choose([&](int i2) { return value(f_[index(prev, i2)] * factor(i2 + 1, cur + 1)); });
            edges.push_back(model_.edge_index(i + 1, cur + 1));
            last = i;
        }
        edges.push_back(model_.edge_index(0, last + 1));
        std::sort(edges.begin(), edges.end());
        return edges;
    }

private:
    [[nodiscard]] std::size_t index(std::uint32_t set, int j) const {
        return std::size_t(set) * (model_.n() - 1) + j;
    }
    [[nodiscard]] const T& factor(int u, int v) const { return factors_[model_.edge_index(u, v)]; }

    ProblemModel model_;
    std::vector<T> factors_;
    std::vector<T> f_;
};

// ---------------------------------------------------------------------------
// Perfect matchings of K_{2n}: memoised expansion along the lowest free vertex.

template <class T>
class HafnianTable {
public:
    HafnianTable(const ProblemModel& model, const std::vector<T>& factors) : model_(model), factors_(factors) {
        const int V = model.vertex_count();
        if (model.n() > OracleCaps::hafnian_n) throw CapExceeded("K_2n matching oracle is limited to n <= 10");
        h_.assign(std::size_t{1} << V, T(0));
        h_[0] = T(1);
        for (std::uint32_t mask = 3; mask < h_.size(); ++mask) {
            if (std::popcount(mask) % 2) continue;
            const int i = std::countr_zero(mask);
            const std::uint32_t rest = mask ^ (1u << i);
            T acc(0);
            for (std::uint32_t r = rest; r; r &= r - 1) {
                const int j = std::countr_zero(r);
                acc += factors_[model.edge_index(i, j)] * h_[rest ^ (1u << j)];
            }
            h_[mask] = acc;
        }
    }

    [[nodiscard]] T total() const { return h_.back(); }

    template <class Rng>
    std::vector<std::uint32_t> sample(Rng& rng) const {
        auto value = [](const T& x) -> double {
            if constexpr (std::is_same_v<T, Dual>) return x.v; else return static_cast<double>(x);
        };
        std::vector<std::uint32_t> edges;
        std::uint32_t mask = static_cast<std::uint32_t>(h_.size() - 1);
        while (mask) {
            const int i = std::countr_zero(mask);
            const std::uint32_t rest = mask ^ (1u << i);
            double total = 0.0;
            for (std::uint32_t r = rest; r; r &= r - 1) {
                const int j = std::countr_zero(r);
                total += value(factors_[model_.edge_index(i, j)] * h_[rest ^ (1u << j)]);
            }
            if (!(total > 0.0)) throw AllInfiniteInstance("matching instance has zero mass");
            const double target = rng.uniform() * total;
            double acc = 0.0;
            int pick = -1;
            for (std::uint32_t r = rest; r; r &= r - 1) {
                const int j = std::countr_zero(r);
                const double w = value(factors_[model_.edge_index(i, j)] * h_[rest ^ (1u << j)]);
                if (w <= 0.0) continue;
                pick = j;
                acc += w;
                if (target < acc) break;
            }
            edges.push_back(model_.edge_index(i, pick));
            mask = rest ^ (1u << pick);
        }
        std::sort(edges.begin(), edges.end());
        return edges;
    }

private:
    ProblemModel model_;
    std::vector<T> factors_;
    std::vector<T> h_;
};

// ---------------------------------------------------------------------------
// Spanning trees: weighted matrix-tree theorem.

inline constexpr double kConditionLimit = 1e12;

struct MatrixTreeResult {
    double log_det = 0.0;  ///< log det of the reduced Laplacian (conductances as given)
    double dlog_det = 0.0;
    std::vector<double> marginals;  ///< P(e in T), filled when requested
};

/// log det of the reduced weighted Laplacian of K_n for conductances c_e,
/// with d(log det) = sum_e c'_e R_e where R_e is the effective resistance
/// of edge e; optionally also the marginals c_e R_e. Returns -inf when the
/// positive-conductance graph is disconnected.
inline MatrixTreeResult matrix_tree(const ProblemModel& model, const std::vector<double>& conductance,
                                    const std::vector<double>* conductance_deriv, bool want_marginals) {
    const int n = model.n();
    MatrixTreeResult out;
    {
        detail::DisjointSets ds(n);
        for (std::uint32_t e = 0; e < conductance.size(); ++e) {
            if (conductance[e] > 0.0) {
                const auto [u, v] = model.endpoints(e);
                ds.unite(u, v);
            }
        }
        if (ds.component_size(0) != n) {
            out.log_det = -std::numeric_limits<double>::infinity();
            out.dlog_det = std::numeric_limits<double>::quiet_NaN();
            return out;
        }
    }
    // Vertex 0 is grounded; reduced index of vertex v is v - 1.
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n - 1, n - 1);
    std::uint32_t e = 0;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v, ++e) {
            const double c = conductance[e];
            if (c == 0.0) continue;
            if (u > 0) {
                lap(u - 1, u - 1) += c;
                lap(u - 1, v - 1) -= c;
                lap(v - 1, u - 1) -= c;
            }
            lap(v - 1, v - 1) += c;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(lap);
    if (llt.info() != Eigen::Success) throw NumericalError("reduced Laplacian is not positive definite");
    const double rcond = llt.rcond();
    if (!(rcond > 0.0) || 1.0 / rcond > kConditionLimit)
        throw NumericalError("reduced Laplacian is ill-conditioned (condition estimate > 1e12)");
    const Eigen::MatrixXd& factor = llt.matrixLLT();
    for (int i = 0; i < n - 1; ++i) out.log_det += 2.0 * std::log(factor(i, i));
    if (!conductance_deriv && !want_marginals) return out;

    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
    auto resistance = [&inv](int u, int v) {
        const double uu = u > 0 ? inv(u - 1, u - 1) : 0.0;
        const double vv = v > 0 ? inv(v - 1, v - 1) : 0.0;
        const double uv = (u > 0 && v > 0) ? inv(u - 1, v - 1) : 0.0;
        return uu + vv - 2.0 * uv;
    };
    if (want_marginals) out.marginals.assign(conductance.size(), 0.0);
    CompensatedSum trace;
    e = 0;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v, ++e) {
            const double r = resistance(u, v);
            if (conductance_deriv) trace.add((*conductance_deriv)[e] * r);
            if (want_marginals) out.marginals[e] = std::clamp(conductance[e] * r, 0.0, 1.0);
        }
    }
    out.dlog_det = trace.value();
    return out;
}

// ---------------------------------------------------------------------------
// Dispatch.

struct PartitionOptions {
    bool derivative = true;
};

namespace detail {

/// Edge factors exp(-beta (w_e - shift_e)) with derivative -(w_e - shift_e) * factor,
/// and the per-configuration constant sum_{e in pi} shift_e.
struct ScaledFactors {
    std::vector<Dual> factors;
    double config_shift = 0.0;
    bool any_finite = false;
};

inline ScaledFactors scaled_factors(const ProblemModel& model, const WeightVector& weights, double beta) {
    ScaledFactors out;
    const std::size_t E = weights.size();
    out.factors.resize(E);
    if (model.family() == Family::matching_bipartite) {
        const int n = model.n();
        for (int i = 0; i < n; ++i) {
            double row_min = kInfiniteWeight;
            for (int j = 0; j < n; ++j) row_min = std::min(row_min, weights[i * n + j]);
            if (row_min == kInfiniteWeight) row_min = 0.0;
            out.config_shift += row_min;
            for (int j = 0; j < n; ++j) {
                const double w = weights[i * n + j];
                if (w == kInfiniteWeight) continue;
                out.any_finite = true;
                out.factors[i * n + j] = boltzmann_factor(beta, w - row_min);
            }
        }
        return out;
    }
    double lo = kInfiniteWeight;
    for (double w : weights.values) lo = std::min(lo, w);
    if (lo == kInfiniteWeight) return out;
    out.any_finite = true;
    for (std::size_t e = 0; e < E; ++e) {
        if (weights[e] == kInfiniteWeight) continue;
        out.factors[e] = boltzmann_factor(beta, weights[e] - lo);
    }
    out.config_shift = lo * static_cast<double>(model.config_size());
    return out;
}

inline void check_instance(const ProblemModel& model, const WeightVector& weights, double beta) {
    detail::require_beta(beta);
    if (weights.size() != model.edge_count()) throw InvalidArgument("weight vector length differs from |E|");
}

inline PartitionMethod specialised_method(Family f) {
    switch (f) {
        case Family::matching_bipartite: return PartitionMethod::permanent;
        case Family::traveling_salesman: return PartitionMethod::subset_dp;
        case Family::spanning_tree: return PartitionMethod::matrix_tree;
        case Family::matching_complete: return PartitionMethod::hafnian_bruteforce;
        case Family::k_factor: return PartitionMethod::subset_dp;
    }
    return PartitionMethod::brute_force;
}

inline void check_caps(const ProblemModel& model) {
    const int n = model.n();
    switch (model.family()) {
        case Family::matching_bipartite:
            if (n > OracleCaps::permanent_n) throw CapExceeded("matching-bipartite oracle supports n <= 18");
            break;
        case Family::traveling_salesman:
            if (n > OracleCaps::tsp_n) throw CapExceeded("tsp oracle supports n <= 20");
            break;
        case Family::spanning_tree:
            if (n > OracleCaps::tree_n) throw CapExceeded("spanning-tree oracle supports n <= 5000");
            break;
        case Family::matching_complete:
            if (n > OracleCaps::hafnian_n) throw CapExceeded("matching-complete oracle supports n <= 10");
            break;
        case Family::k_factor:
            if (model.vertex_count() > OracleCaps::kfactor_vertices)
                throw CapExceeded("k-factor oracle supports 2n <= 12");
            break;
    }
}

/// Sum over S of the product of (dual) factors, by the family's specialised recursion.
inline Dual specialised_sum(const ProblemModel& model, const std::vector<Dual>& factors) {
    switch (model.family()) {
        case Family::matching_bipartite: {
            double bound = 0.0;
            const Dual perm = ryser_permanent(factors, model.n(), &bound);
            if (perm.v > 0.0 && bound > kCancellationTolerance)
                throw NumericalError("Ryser cancellation: relative error bound exceeds 1e-6");
            return perm;
        }
        case Family::traveling_salesman: return TspTable<Dual>(model, factors).total();
        case Family::matching_complete: return HafnianTable<Dual>(model, factors).total();
        case Family::k_factor:
            return KFactorSum<Dual>(model, [&factors](std::uint32_t e) { return factors[e]; }).total();
        case Family::spanning_tree: break;
    }
    throw InvalidArgument("no dual-number recursion for spanning trees");
}

inline double log_config_count(const ProblemModel& model) {
    const auto count = count_configs(model);
    if (model.family() == Family::k_factor) return detail::big_log(*count.exact);
    return count.log_count;
}

inline PartitionResult all_infinite_result(PartitionMethod method, double beta, std::uint64_t seed) {
    PartitionResult r;
    r.log_z = -std::numeric_limits<double>::infinity();
    r.dlogz_dbeta = std::numeric_limits<double>::quiet_NaN();
    r.method = method;
    r.outcome = PartitionOutcome::all_infinite;
    r.beta = beta;
    r.instance_seed = seed;
    return r;
}

inline bool all_finite(const WeightVector& weights) {
    return std::none_of(weights.values.begin(), weights.values.end(), [](double w) { return w == kInfiniteWeight; });
}

}  // namespace detail

/// log Z(beta) including the 1/|S| normalisation, by the family's
/// specialised exact method.
inline PartitionResult log_partition(const ProblemModel& model, const WeightVector& weights, double beta,
                                     PartitionOptions options = {}) {
    detail::check_instance(model, weights, beta);
    detail::check_caps(model);
    const PartitionMethod method = detail::specialised_method(model.family());
    PartitionResult r;
    r.method = method;
    r.beta = beta;
    r.instance_seed = weights.source_seed;

    if (beta == 0.0 && detail::all_finite(weights)) {
        // Z(0) = 1; <W>_0 is the uniform average, p * sum_e w_e by edge transitivity.
        CompensatedSum total;
        for (double w : weights.values) total.add(w);
        r.log_z = 0.0;
        r.dlogz_dbeta = -model.edge_prob() * total.value();
        return r;
    }

    const auto scaled = detail::scaled_factors(model, weights, beta);
    if (!scaled.any_finite) return detail::all_infinite_result(method, beta, weights.source_seed);

    double log_sum = 0.0;
    double dlog_sum = 0.0;
    if (model.family() == Family::spanning_tree) {
        std::vector<double> c(weights.size());
        std::vector<double> dc(weights.size());
        for (std::size_t e = 0; e < c.size(); ++e) {
            c[e] = scaled.factors[e].v;
            dc[e] = scaled.factors[e].d;
        }
        const auto mt = matrix_tree(model, c, options.derivative ? &dc : nullptr, false);
        if (mt.log_det == -std::numeric_limits<double>::infinity())
            return detail::all_infinite_result(method, beta, weights.source_seed);
        log_sum = mt.log_det;
        dlog_sum = options.derivative ? mt.dlog_det : std::numeric_limits<double>::quiet_NaN();
    } else {
        const Dual sum = detail::specialised_sum(model, scaled.factors);
        if (!(sum.v > 0.0)) return detail::all_infinite_result(method, beta, weights.source_seed);
        log_sum = std::log(sum.v);
        dlog_sum = options.derivative ? sum.d / sum.v : std::numeric_limits<double>::quiet_NaN();
    }
    r.log_z = log_sum - beta * scaled.config_shift - detail::log_config_count(model);
    r.dlogz_dbeta = dlog_sum - scaled.config_shift;
    return r;
}

/// log Z(beta) by exhaustive enumeration of S (the independent reference).
inline PartitionResult log_partition_brute_force(const ProblemModel& model, const WeightVector& weights, double beta) {
    detail::check_instance(model, weights, beta);
    // Streaming log-sum-exp over configurations.
    double best = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    double weighted = 0.0;
    std::uint64_t count = 0;
    for_each_config(model, [&](const Configuration& c) {
        ++count;
        const double w = config_weight(c, weights);
        if (w == kInfiniteWeight) return;
        const double x = -beta * w;
        if (x > best) {
            const double scale = std::exp(best - x);
            sum *= scale;
            weighted *= scale;
            best = x;
        }
        const double f = std::exp(x - best);
        sum += f;
        weighted += -w * f;
    });
    if (!(sum > 0.0)) return detail::all_infinite_result(PartitionMethod::brute_force, beta, weights.source_seed);
    PartitionResult r;
    r.method = PartitionMethod::brute_force;
    r.beta = beta;
    r.instance_seed = weights.source_seed;
    r.log_z = best + std::log(sum) - std::log(static_cast<double>(count));
    r.dlogz_dbeta = weighted / sum;
    return r;
}

/// Exact Gibbs marginals P_{beta,omega}(e in pi) for every edge.
inline std::vector<double> edge_marginals(const ProblemModel& model, const WeightVector& weights, double beta) {
    detail::check_instance(model, weights, beta);
    detail::check_caps(model);
    const auto scaled = detail::scaled_factors(model, weights, beta);
    if (!scaled.any_finite) throw AllInfiniteInstance("every configuration has infinite weight");
    const std::size_t E = weights.size();
    std::vector<double> out(E, 0.0);
    if (model.family() == Family::spanning_tree) {
        std::vector<double> c(E);
        for (std::size_t e = 0; e < E; ++e) c[e] = scaled.factors[e].v;
        auto mt = matrix_tree(model, c, nullptr, true);
        if (mt.log_det == -std::numeric_limits<double>::infinity())
            throw AllInfiniteInstance("every configuration has infinite weight");
        return mt.marginals;
    }
    // Marking: give edge e the derivative slot equal to its own factor; the
    // propagated derivative is then the mass of configurations containing e.
    std::vector<Dual> marked(E);
    for (std::size_t e = 0; e < E; ++e) marked[e] = Dual{scaled.factors[e].v, 0.0};
    const double total = detail::specialised_sum(model, marked).v;
    if (!(total > 0.0)) throw AllInfiniteInstance("every configuration has infinite weight");
    for (std::size_t e = 0; e < E; ++e) {
        if (marked[e].v == 0.0) continue;
        marked[e].d = marked[e].v;
        out[e] = std::clamp(detail::specialised_sum(model, marked).d / total, 0.0, 1.0);
        marked[e].d = 0.0;
    }
    return out;
}

inline double edge_marginal(const ProblemModel& model, const WeightVector& weights, double beta, std::uint32_t edge) {
    if (edge >= model.edge_count()) throw InvalidArgument("edge index out of range");
    if (model.family() == Family::spanning_tree) return edge_marginals(model, weights, beta)[edge];
    detail::check_instance(model, weights, beta);
    detail::check_caps(model);
    const auto scaled = detail::scaled_factors(model, weights, beta);
    if (!scaled.any_finite) throw AllInfiniteInstance("every configuration has infinite weight");
    std::vector<Dual> marked(weights.size());
    for (std::size_t e = 0; e < marked.size(); ++e) marked[e] = Dual{scaled.factors[e].v, 0.0};
    marked[edge].d = marked[edge].v;
    const Dual s = detail::specialised_sum(model, marked);
    if (!(s.v > 0.0)) throw AllInfiniteInstance("every configuration has infinite weight");
    return std::clamp(s.d / s.v, 0.0, 1.0);
}

/// First-order cluster prediction of a Gibbs edge marginal, p(1+xi)/(1+p xi).
inline double marginal_approximation(double p, double xi_value) {
    return p * (1.0 + xi_value) / (1.0 + p * xi_value);
}

}  // namespace gibbslab
