#pragma once

// Goodness-of-fit statistics and the replicated experiment driver.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gibbslab/cluster.hpp"
#include "gibbslab/errors.hpp"
#include "gibbslab/limits.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/rng.hpp"
#include "gibbslab/samplers.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

// ---------------------------------------------------------------------------
// Statistics.

inline double normal_cdf(double x, double mean, double variance) {
    if (!(variance > 0.0)) return x < mean ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

inline double poisson_pmf(int k, double lambda) {
    if (k < 0) return 0.0;
    if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// `sorted` and `cdf`, evaluated on both sides of every jump.
inline double ks_statistic(const std::vector<double>& sorted, const std::function<double(double)>& cdf) {
    if (sorted.size() < 2) throw InvalidArgument("ks_statistic needs at least two samples");
    if (!std::is_sorted(sorted.begin(), sorted.end())) throw InvalidArgument("ks_statistic needs sorted samples");
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double f = cdf(sorted[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(j) / n - f));
        i = j;
    }
    return d;
}

/// TV distance between an empirical count histogram (counts[k] = number of
/// observations equal to k) and Poi(lambda). Poisson mass beyond the last
/// bin is added in full.
inline double tv_distance_poisson(const std::vector<std::uint64_t>& counts, double lambda) {
    if (!(lambda > 0.0)) throw InvalidArgument("tv_distance_poisson needs lambda > 0");
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    if (!(total > 0.0)) throw InvalidArgument("tv_distance_poisson needs a non-empty histogram");
    CompensatedSum diff;
    CompensatedSum covered;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double q = poisson_pmf(static_cast<int>(k), lambda);
        covered.add(q);
        diff.add(std::abs(static_cast<double>(counts[k]) / total - q));
    }
    diff.add(std::max(0.0, 1.0 - covered.value()));
    return 0.5 * diff.value();
}

inline std::vector<std::uint64_t> histogram(const std::vector<double>& values) {
    std::vector<std::uint64_t> counts;
    for (double v : values) {
        if (!(v >= 0.0) || v != std::floor(v)) throw InvalidArgument("histogram needs nonnegative integer values");
        const auto k = static_cast<std::size_t>(v);
        if (k >= counts.size()) counts.resize(k + 1, 0);
        ++counts[k];
    }
    return counts;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
};

inline Moments moments(const std::vector<double>& values) {
    if (values.empty()) throw InvalidArgument("moments of an empty sample");
    CompensatedSum s;
    for (double v : values) s.add(v);
    Moments m;
    m.mean = s.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
        CompensatedSum q;
        for (double v : values) q.add((v - m.mean) * (v - m.mean));
        m.variance = q.value() / static_cast<double>(values.size() - 1);
    }
    return m;
}

/// (sample mean - mean) / sqrt(variance / R).
inline double mean_z_score(const std::vector<double>& values, double mean, double variance) {
    const auto m = moments(values);
    return (m.mean - mean) / std::sqrt(variance / static_cast<double>(values.size()));
}

inline double variance_ratio(const std::vector<double>& values, double variance) {
    return moments(values).variance / variance;
}

// ---------------------------------------------------------------------------
// Worker pool.

/// Resolves a requested thread count: positive values are taken as is,
/// otherwise GIBBSLAB_THREADS, otherwise the machine's parallelism.
inline unsigned resolve_threads(int requested) {
    if (requested > 0) return static_cast<unsigned>(requested);
    if (const char* env = std::getenv("GIBBSLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(index, worker) for index in [0, count) on `threads` workers.
/// Results must be written by index so output does not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t, unsigned)>& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i, w);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Experiments.

enum class Observable { logz, cluster, overlap, typical, gibbsavg, free_energy_lln, ust_stein_chen };

inline std::string observable_name(Observable o) {
    switch (o) {
        case Observable::logz: return "logz";
        case Observable::cluster: return "cluster";
        case Observable::overlap: return "overlap";
        case Observable::typical: return "typical";
        case Observable::gibbsavg: return "gibbsavg";
        case Observable::free_energy_lln: return "free-energy-lln";
        case Observable::ust_stein_chen: return "ust-stein-chen";
    }
    return "?";
}

inline Observable parse_observable(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    std::replace(s.begin(), s.end(), '_', '-');
    static const std::map<std::string, Observable> names{
        {"logz", Observable::logz},         {"cluster", Observable::cluster},
        {"overlap", Observable::overlap},   {"typical", Observable::typical},
        {"gibbsavg", Observable::gibbsavg}, {"free-energy-lln", Observable::free_energy_lln},
        {"lln", Observable::free_energy_lln}, {"ust-stein-chen", Observable::ust_stein_chen}};
    const auto it = names.find(s);
    if (it == names.end())
        throw InvalidArgument("unknown observable '" + s +
                              "' (expected logz, cluster, overlap, typical, gibbsavg, free-energy-lln, ust-stein-chen)");
    return it->second;
}

enum class SamplerKind { exact, mcmc };

struct Tolerances {
    double max_abs_z = 3.0;
    double var_ratio_lo = 0.8;
    double var_ratio_hi = 1.2;
    double ks_max = 0.06;
    double tv_max = 0.06;
    double lln_max = 0.01;
};

struct ExperimentSpec {
    Observable observable = Observable::logz;
    Family family = Family::spanning_tree;
    int n = 10;
    int k = 1;
    std::string distribution = "exp:1";
    double beta = 1.0;
    std::size_t replicates = 100;      // weight instances (logz, cluster, gibbsavg, lln)
    std::size_t instances = 3;         // fixed instances for quenched observables
    std::size_t gibbs_samples = 1000;  // samples (typical) or pairs (overlap) per instance
    SamplerKind sampler = SamplerKind::exact;
    std::uint64_t mcmc_burn_in = 0;    // 0 = default 50 m
    std::uint64_t mcmc_thin = 0;       // 0 = default m
    std::uint64_t seed = 1;
    int threads = 0;
    Tolerances tol;

    [[nodiscard]] ProblemModel model() const { return ProblemModel(family, n, k); }
    [[nodiscard]] WeightDistribution dist() const { return parse_distribution(distribution); }

    /// Checks sizes and oracle/sampler caps before any computation.
    void validate() const {
        detail::require_beta(beta);
        const auto mdl = model();
        const auto d = dist();
        (void)d;
        switch (observable) {
            case Observable::logz:
            case Observable::cluster:
            case Observable::gibbsavg:
            case Observable::free_energy_lln:
                if (replicates == 0) throw InvalidArgument("replicates must be >= 1");
                detail::check_caps(mdl);
                break;
            case Observable::ust_stein_chen:
                if (family != Family::spanning_tree) throw InvalidArgument("ust-stein-chen needs model spanning-tree");
                [[fallthrough]];
            case Observable::overlap:
            case Observable::typical:
                if (gibbs_samples == 0) throw InvalidArgument("gibbs_samples must be >= 1");
                if (instances == 0) throw InvalidArgument("instances must be >= 1");
                if (sampler == SamplerKind::exact) check_sampler_caps(mdl);
                break;
        }
        if (observable == Observable::cluster && !(mdl.edge_prob() < 1.0))
            throw InvalidArgument("cluster observable needs p < 1");
        if ((observable == Observable::logz || observable == Observable::gibbsavg || observable == Observable::typical) &&
            !(beta > 0.0))
            throw InvalidArgument(observable_name(observable) + " needs beta > 0");
    }

    static void check_sampler_caps(const ProblemModel& mdl) {
        const int n = mdl.n();
        switch (mdl.family()) {
            case Family::spanning_tree:
                if (n > SamplerCaps::tree_n) throw CapExceeded("tree sampler supports n <= 5000");
                break;
            case Family::matching_bipartite:
                if (n > SamplerCaps::bipartite_n) throw CapExceeded("bipartite matching sampler supports n <= 20");
                break;
            case Family::traveling_salesman:
                if (n > SamplerCaps::tsp_n) throw CapExceeded("tsp sampler supports n <= 18");
                break;
            case Family::matching_complete:
            case Family::k_factor: detail::check_caps(mdl); break;
        }
    }
};

/// Statistics for one group of values (one weight instance for quenched
/// observables, all replicates otherwise).
struct GroupReport {
    std::uint64_t instance_seed = 0;
    std::vector<double> values;
    double sample_mean = 0.0;
    double sample_variance = 0.0;
    double mean_z = 0.0;
    double var_ratio = 0.0;
    double ks_stat = std::numeric_limits<double>::quiet_NaN();
    double tv_stat = std::numeric_limits<double>::quiet_NaN();
    double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, bool> checks;
    bool pass = false;
};

struct ExperimentReport {
    ExperimentSpec spec;
    std::string observable;
    LimitLaw predicted;
    std::vector<GroupReport> groups;
    std::size_t requested = 0;
    std::size_t dropped_replicates = 0;
    std::map<std::string, double> extra;  // observable-specific summary numbers
    double runtime_ms = 0.0;
    bool pass = false;
};

namespace detail {

inline void summarise_group(GroupReport& g, const LimitLaw& law, const Tolerances& tol) {
    const auto m = moments(g.values);
    g.sample_mean = m.mean;
    g.sample_variance = m.variance;
    g.mean_z = (m.mean - law.mean) / std::sqrt(law.variance / static_cast<double>(g.values.size()));
    g.var_ratio = m.variance / law.variance;
    if (law.kind == LawKind::normal) {
        auto sorted = g.values;
        std::sort(sorted.begin(), sorted.end());
        g.ks_stat = ks_statistic(sorted, [&](double x) { return normal_cdf(x, law.mean, law.variance); });
        g.checks["mean_z"] = std::abs(g.mean_z) <= tol.max_abs_z;
        g.checks["var_ratio"] = g.var_ratio >= tol.var_ratio_lo && g.var_ratio <= tol.var_ratio_hi;
        g.checks["ks"] = g.ks_stat <= tol.ks_max;
    } else {
        g.tv_stat = tv_distance_poisson(histogram(g.values), law.lambda());
        g.checks["tv"] = g.tv_stat <= tol.tv_max;
    }
    g.pass = std::all_of(g.checks.begin(), g.checks.end(), [](const auto& kv) { return kv.second; });
}

/// Per-replicate oracle values; nullopt marks an all-infinite instance.
inline std::vector<std::optional<PartitionResult>> oracle_replicates(const ExperimentSpec& spec, bool derivative) {
    const auto mdl = spec.model();
    const auto d = spec.dist();
    std::vector<std::optional<PartitionResult>> out(spec.replicates);
    parallel_for(spec.replicates, resolve_threads(spec.threads), [&](std::size_t r, unsigned) {
        const auto w = sample_weights(d, mdl.edge_count(), derive_seed(spec.seed, r));
        auto res = log_partition(mdl, w, spec.beta, PartitionOptions{derivative});
        if (!res.all_infinite()) out[r] = res;
    });
    return out;
}

/// Gibbs observables on one fixed instance: either samples (typical) or
/// overlaps of independent pairs (overlap).
inline GroupReport quenched_group(const ExperimentSpec& spec, std::size_t instance, bool pairs, double beta) {
    const auto mdl = spec.model();
    const auto d = spec.dist();
    GroupReport g;
    g.instance_seed = derive_seed(spec.seed, instance);
    const auto w = sample_weights(d, mdl.edge_count(), g.instance_seed);
    const std::size_t count = spec.gibbs_samples;
    g.values.assign(count, 0.0);
    const double m = static_cast<double>(mdl.config_size());
    const double shift = pairs ? 0.0 : m * psi_prime(d, beta);
    auto observe = [&](const GibbsSample& s) {
        if (!std::isfinite(s.weight)) throw AllInfiniteInstance("sample with infinite weight");
        return (s.weight + shift) / std::sqrt(m);
    };
    if (spec.sampler == SamplerKind::exact) {
        const unsigned threads = resolve_threads(spec.threads);
        std::vector<std::optional<ExactSampler>> samplers(threads);
        parallel_for(count, threads, [&](std::size_t j, unsigned worker) {
            if (!samplers[worker]) samplers[worker].emplace(mdl, w, beta);
            RandomStream rng(derive_seed(g.instance_seed, j));
            auto& smp = *samplers[worker];
            if (pairs) {
                const auto a = smp.sample(rng);
                const auto b = smp.sample(rng);
                g.values[j] = static_cast<double>(overlap(a.config, b.config));
            } else {
                g.values[j] = observe(smp.sample(rng));
            }
        });
    } else {
        const auto sched = ChainSchedule::defaults(mdl);
        const std::uint64_t burn = spec.mcmc_burn_in ? spec.mcmc_burn_in : sched.burn_in;
        const std::uint64_t thin = spec.mcmc_thin ? spec.mcmc_thin : sched.thin;
        MetropolisChain chain(mdl, w, beta, derive_seed(g.instance_seed, 0));
        if (pairs) {
            MetropolisChain other(mdl, w, beta, derive_seed(g.instance_seed, 1));
            chain.advance(burn);
            other.advance(burn);
            for (std::size_t j = 0; j < count; ++j) {
                chain.advance(thin);
                other.advance(thin);
                g.values[j] = static_cast<double>(overlap(chain.current(), other.current()));
            }
            g.acceptance_rate = 0.5 * (chain.acceptance_rate() + other.acceptance_rate());
        } else {
            chain.advance(burn);
            for (std::size_t j = 0; j < count; ++j) {
                chain.advance(thin);
                g.values[j] = observe(chain.sample());
            }
            g.acceptance_rate = chain.acceptance_rate();
        }
    }
    return g;
}

}  // namespace detail

/// Runs one replicated experiment and tests it against its limit law.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto mdl = spec.model();
    const auto d = spec.dist();
    const double m = static_cast<double>(mdl.config_size());
    ExperimentReport rep;
    rep.spec = spec;
    rep.observable = observable_name(spec.observable);

    switch (spec.observable) {
        case Observable::logz:
        case Observable::gibbsavg:
        case Observable::free_energy_lln: {
            const bool want_deriv = spec.observable == Observable::gibbsavg;
            const auto results = detail::oracle_replicates(spec, want_deriv);
            rep.requested = spec.replicates;
            GroupReport g;
            g.instance_seed = spec.seed;
            const double psi_b = psi(d, spec.beta);
            const double psi_p = spec.beta > 0.0 ? psi_prime(d, spec.beta) : 0.0;
            for (const auto& r : results) {
                if (!r) {
                    ++rep.dropped_replicates;
                    continue;
                }
                switch (spec.observable) {
                    case Observable::logz: g.values.push_back(r->log_z - m * psi_b); break;
                    case Observable::gibbsavg: g.values.push_back(-r->dlogz_dbeta + m * psi_p); break;
                    default: g.values.push_back(r->log_z / m - psi_b); break;
                }
            }
            if (g.values.empty()) throw AllInfiniteInstance("every replicate was all-infinite");
            if (spec.observable == Observable::free_energy_lln) {
                rep.predicted = LimitLaw::normal(0.0, 0.0, "(1/m) log Z - psi(beta)", "divide by m");
                const auto mo = moments(g.values);
                g.sample_mean = mo.mean;
                g.sample_variance = mo.variance;
                double worst = 0.0;
                for (double v : g.values) worst = std::max(worst, std::abs(v));
                rep.extra["max_abs_gap"] = worst;
                g.checks["lln_gap"] = worst <= spec.tol.lln_max;
                g.pass = g.checks["lln_gap"];
            } else {
                rep.predicted = spec.observable == Observable::logz ? logz_limit(mdl, d, spec.beta)
                                                                    : gibbs_avg_clt(mdl, d, spec.beta);
                detail::summarise_group(g, rep.predicted, spec.tol);
            }
            rep.groups.push_back(std::move(g));
            break;
        }
        case Observable::cluster: {
            const auto stat = cluster_error_stat(mdl, d, spec.beta, spec.replicates, spec.seed);
            rep.requested = spec.replicates;
            rep.dropped_replicates = stat.dropped;
            rep.predicted = LimitLaw::normal(0.0, 0.0, "prod(1+p*xi) - Zhat", "squared, times m");
            rep.extra["mean_sq_diff"] = stat.mean_sq_diff;
            rep.extra["m_times_mean_sq_diff"] = stat.m_times_mean_sq_diff;
            GroupReport g;
            g.instance_seed = spec.seed;
            g.values = stat.diffs;
            const auto mo = moments(g.values);
            g.sample_mean = mo.mean;
            g.sample_variance = mo.variance;
            g.checks["finite"] = std::isfinite(stat.m_times_mean_sq_diff);
            g.pass = g.checks["finite"];
            rep.groups.push_back(std::move(g));
            break;
        }
        case Observable::overlap:
        case Observable::typical:
        case Observable::ust_stein_chen: {
            const bool pairs = spec.observable != Observable::typical;
            const double beta = spec.observable == Observable::ust_stein_chen ? 0.0 : spec.beta;
            rep.predicted = pairs ? overlap_lambda(mdl, d, beta) : typical_clt(d, beta);
            rep.requested = spec.instances;
            for (std::size_t i = 0; i < spec.instances; ++i) {
                try {
                    auto g = detail::quenched_group(spec, i, pairs, beta);
                    detail::summarise_group(g, rep.predicted, spec.tol);
                    rep.groups.push_back(std::move(g));
                } catch (const AllInfiniteInstance&) {
                    ++rep.dropped_replicates;
                }
            }
            if (rep.groups.empty()) throw AllInfiniteInstance("every instance was all-infinite");
            break;
        }
    }
    rep.pass = std::all_of(rep.groups.begin(), rep.groups.end(), [](const GroupReport& g) { return g.pass; });
    rep.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

}  // namespace gibbslab
