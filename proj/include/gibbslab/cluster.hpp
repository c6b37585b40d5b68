#pragma once

// Normalised partition function Zhat = Z / E Z = Z e^{-m psi} and its
// first-order cluster surrogate prod_e (1 + p xi_e).

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/rng.hpp"
#include "gibbslab/samplers.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

struct ClusterDiagnostics {
    double log_zhat_exact = 0.0;
    double log_product = 0.0;
    double diff_linear = 0.0;  // prod(1 + p xi) - Zhat
    std::uint64_t m = 0;
};

/// log Zhat = log Z - m psi(beta).
inline double log_zhat_exact(const ProblemModel& model, const WeightVector& weights, double beta) {
    const auto r = log_partition(model, weights, beta, PartitionOptions{false});
    if (r.all_infinite()) throw AllInfiniteInstance("every configuration has infinite weight");
    const auto& dist = *weights.distribution;
    return r.log_z - static_cast<double>(model.config_size()) * psi(dist, beta);
}

/// sum_e log(1 + p xi_e); +inf weights contribute log(1 - p).
inline double log_product(const WeightVector& weights, double beta, double p, const WeightDistribution& dist) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("log_product needs p in (0,1)");
    detail::require_beta(beta);
    const double psi_b = psi(dist, beta);
    CompensatedSum total;
    for (double w : weights.values) {
        const double x = w == kInfiniteWeight ? -1.0 : std::expm1(-beta * w - psi_b);
        total.add(std::log1p(p * x));
    }
    return total.value();
}

inline ClusterDiagnostics cluster_diagnostics(const ProblemModel& model, const WeightVector& weights, double beta) {
    ClusterDiagnostics d;
    d.m = model.config_size();
    d.log_zhat_exact = log_zhat_exact(model, weights, beta);
    d.log_product = log_product(weights, beta, model.edge_prob(), *weights.distribution);
    // e^{a} - e^{b} = e^{b} expm1(a - b)
    d.diff_linear = std::exp(d.log_zhat_exact) * std::expm1(d.log_product - d.log_zhat_exact);
    return d;
}

struct ClusterErrorStat {
    double mean_sq_diff = 0.0;
    double m_times_mean_sq_diff = 0.0;
    std::uint64_t m = 0;
    std::size_t replicates = 0;
    std::size_t dropped = 0;
    std::vector<double> diffs;
};

/// Average of (prod(1 + p xi) - Zhat)^2 over independent weight instances,
/// instance r drawn from derive_seed(seed, r).
inline ClusterErrorStat cluster_error_stat(const ProblemModel& model, const WeightDistribution& dist, double beta,
                                           std::size_t replicates, std::uint64_t seed) {
    if (replicates == 0) throw InvalidArgument("cluster_error_stat needs at least one replicate");
    ClusterErrorStat out;
    out.m = model.config_size();
    CompensatedSum sq;
    for (std::size_t r = 0; r < replicates; ++r) {
        const auto w = sample_weights(dist, model.edge_count(), derive_seed(seed, r));
        try {
            const auto d = cluster_diagnostics(model, w, beta);
            out.diffs.push_back(d.diff_linear);
            sq.add(d.diff_linear * d.diff_linear);
        } catch (const AllInfiniteInstance&) {
            ++out.dropped;
        }
    }
    out.replicates = out.diffs.size();
    if (out.replicates == 0) throw AllInfiniteInstance("every replicate was all-infinite");
    out.mean_sq_diff = sq.value() / static_cast<double>(out.replicates);
    out.m_times_mean_sq_diff = static_cast<double>(out.m) * out.mean_sq_diff;
    return out;
}

struct SecondMomentEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double predicted = 0.0;  // exp(2 gamma v^2)
};

/// Monte Carlo estimate of E Zhat^2 = E_{pi,pi'} (1 + v^2)^{|pi ∩ pi'|} over
/// independent uniform configurations.
inline SecondMomentEstimate second_moment_estimate(const ProblemModel& model, const WeightDistribution& dist,
                                                   double beta, std::size_t pairs, std::uint64_t seed) {
    if (pairs < 2) throw InvalidArgument("second_moment_estimate needs at least two pairs");
    const double v2 = v_squared(dist, beta);
    const double log_base = std::log1p(v2);
    ExactSampler uniform(model, make_weights(std::vector<double>(model.edge_count(), 0.0), dist), 0.0);
    RandomStream rng(seed);
    CompensatedSum s1;
    CompensatedSum s2;
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto a = uniform.sample(rng);
        const auto b = uniform.sample(rng);
        const double x = std::exp(log_base * static_cast<double>(overlap(a.config, b.config)));
        s1.add(x);
        s2.add(x * x);
    }
    const double n = static_cast<double>(pairs);
    SecondMomentEstimate out;
    out.estimate = s1.value() / n;
    const double var = std::max(0.0, (s2.value() - n * out.estimate * out.estimate) / (n - 1.0));
    out.std_error = std::sqrt(var / n);
    out.predicted = std::exp(2.0 * model.gamma() * v2);
    return out;
}

}  // namespace gibbslab
