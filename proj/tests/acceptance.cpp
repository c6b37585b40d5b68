// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gibbslab/cluster.hpp"
#include "gibbslab/limits.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/samplers.hpp"
#include "gibbslab/stats.hpp"

using namespace gibbslab;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

const auto kExp = WeightDistribution::exponential();

struct TinyCase {
    Family family;
    int n;
    int k;
};

std::vector<TinyCase> tiny_cases() {
    std::vector<TinyCase> out;
    for (int n = 2; n <= 7; ++n) out.push_back({Family::matching_bipartite, n, 1});
    for (int n = 3; n <= 8; ++n) out.push_back({Family::traveling_salesman, n, 1});
    for (int n = 2; n <= 7; ++n) out.push_back({Family::spanning_tree, n, 1});
    for (int n = 2; n <= 5; ++n) out.push_back({Family::matching_complete, n, 1});
    for (int n = 2; n <= 5; ++n) out.push_back({Family::k_factor, n, 2});
    for (int n = 2; n <= 4; ++n) out.push_back({Family::k_factor, n, 3});
    return out;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// 1. Specialised oracles against enumeration, and derivative against finite differences.
void oracle_equivalence(Outcome& o) {
    double worst_z = 0.0;
    double worst_d = 0.0;
    int checked = 0;
    for (const auto& c : tiny_cases()) {
        const ProblemModel model(c.family, c.n, c.k);
        if (detail::enumeration_size(model) > kEnumerationCap) continue;
        for (int r = 0; r < 20; ++r) {
            const auto w = sample_weights(kExp, model.edge_count(), derive_seed(101, r));
            for (double beta : {0.25, 1.0, 3.0}) {
                const auto fast = log_partition(model, w, beta);
                const auto brute = log_partition_brute_force(model, w, beta);
                worst_z = std::max(worst_z, rel_gap(fast.log_z, brute.log_z));
                const double h = 1e-5;
                const double fd =
                    (log_partition(model, w, beta + h, {false}).log_z - log_partition(model, w, beta - h, {false}).log_z) /
                    (2 * h);
                worst_d = std::max(worst_d, rel_gap(fast.dlogz_dbeta, fd));
                ++checked;
            }
        }
    }
    o.detail << checked << " (instance, beta) pairs, max log Z rel gap " << worst_z << ", max derivative rel gap "
             << worst_d << " ";
    o.check(worst_z <= 1e-9, "log Z within 1e-9");
    o.check(worst_d <= 1e-6, "derivative within 1e-6");
}

// 2. Z(0) = 1.
void z_at_zero(Outcome& o) {
    double worst = 0.0;
    for (const auto& c : tiny_cases()) {
        const ProblemModel model(c.family, c.n, c.k);
        if (detail::enumeration_size(model) > kEnumerationCap) continue;
        for (int r = 0; r < 20; ++r) {
            const auto w = sample_weights(kExp, model.edge_count(), derive_seed(202, r));
            worst = std::max(worst, std::abs(log_partition(model, w, 0.0).log_z));
            worst = std::max(worst, std::abs(log_partition_brute_force(model, w, 0.0).log_z));
        }
    }
    o.detail << "max |log Z(0)| " << worst << " ";
    o.check(worst <= 1e-12, "|log Z(0)| <= 1e-12");
}

ExperimentSpec tree_spec(Observable obs, int n) {
    ExperimentSpec s;
    s.observable = obs;
    s.family = Family::spanning_tree;
    s.n = n;
    s.beta = 1.0;
    s.distribution = "exp:1";
    return s;
}

// 3. log Z CLT on spanning trees.
void logz_tree(Outcome& o) {
    auto s = tree_spec(Observable::logz, 400);
    s.replicates = 1000;
    s.seed = 303;
    const auto rep = run_experiment(s);
    const auto& g = rep.groups.at(0);
    o.detail << "mean " << g.sample_mean << " (target -1/3 +- " << 3 * std::sqrt((2.0 / 3.0) / 1000) << "), var ratio "
             << g.var_ratio << ", KS " << g.ks_stat << " ";
    o.check(std::abs(g.sample_mean + 1.0 / 3.0) <= 3 * std::sqrt((2.0 / 3.0) / 1000), "mean");
    o.check(g.var_ratio >= 0.8 && g.var_ratio <= 1.2, "variance ratio");
    o.check(g.ks_stat <= 0.06, "KS");
}

// 4. log Z CLT on bipartite matchings.
void logz_bipartite(Outcome& o) {
    ExperimentSpec s;
    s.observable = Observable::logz;
    s.family = Family::matching_bipartite;
    s.n = 12;
    s.replicates = 2000;
    s.seed = 404;
    const auto rep = run_experiment(s);
    const auto& g = rep.groups.at(0);
    o.detail << "mean " << g.sample_mean << " (target -1/6 +- 0.10), var ratio " << g.var_ratio << " ";
    o.check(std::abs(g.sample_mean + 1.0 / 6.0) <= 0.10, "mean");
    o.check(g.var_ratio >= 0.7 && g.var_ratio <= 1.3, "variance ratio");
}

// 5. Cluster-expansion error does not grow with n.
void cluster_error(Outcome& o) {
    std::vector<double> scaled;
    for (int n : {50, 100, 200, 400}) {
        const auto st = cluster_error_stat(ProblemModel(Family::spanning_tree, n), kExp, 1.0, 500, derive_seed(505, n));
        scaled.push_back(st.m_times_mean_sq_diff);
        o.detail << "n=" << n << ": m E diff^2 = " << st.m_times_mean_sq_diff << "; ";
    }
    for (std::size_t i = 1; i < scaled.size(); ++i) {
        const double ratio = scaled[i] / scaled[i - 1];
        o.detail << "ratio " << ratio << "; ";
        o.check(ratio >= 0.3 && ratio <= 3.0, "successive ratio in [0.3, 3]");
    }
}

// 6. Uniform spanning tree overlap against Poi(2).
void ust_overlap(Outcome& o) {
    std::map<int, double> tv;
    for (int n : {50, 200}) {
        auto s = tree_spec(Observable::ust_stein_chen, n);
        s.instances = 1;
        s.gibbs_samples = 10000;
        s.seed = 606;
        tv[n] = run_experiment(s).groups.at(0).tv_stat;
        o.detail << "n=" << n << ": TV " << tv[n] << "; ";
    }
    o.check(tv[200] <= 0.06, "TV <= 0.06 at n=200");
    o.check(tv[200] < tv[50], "TV smaller at n=200 than at n=50");
}

// 7. Gibbs overlap at beta = 1 against Poi(8/3).
void gibbs_overlap(Outcome& o) {
    auto s = tree_spec(Observable::overlap, 300);
    s.instances = 3;
    s.gibbs_samples = 10000;
    s.seed = 707;
    const auto rep = run_experiment(s);
    o.detail << "lambda " << rep.predicted.lambda() << "; ";
    for (const auto& g : rep.groups) {
        o.detail << "TV " << g.tv_stat << "; ";
        o.check(g.tv_stat <= 0.08, "TV <= 0.08");
    }
    o.check(rep.groups.size() == 3, "three instances");
}

// 8. Typical-weight CLT on one instance.
void typical_weight(Outcome& o) {
    auto s = tree_spec(Observable::typical, 400);
    s.instances = 1;
    s.gibbs_samples = 5000;
    s.seed = 808;
    const auto& g = run_experiment(s).groups.at(0);
    o.detail << "KS " << g.ks_stat << " vs Normal(0, 1/4) ";
    o.check(g.ks_stat <= 0.06, "KS <= 0.06");
}

// 9. Gibbs-average CLT, checked against the stated law N(-4/9, 10/27). The
// fitted law (mean +4/9) is reported alongside.
void gibbs_average(Outcome& o) {
    auto s = tree_spec(Observable::gibbsavg, 400);
    s.replicates = 1000;
    s.seed = 909;
    const auto rep = run_experiment(s);
    const auto& g = rep.groups.at(0);
    const double half = 3 * std::sqrt((10.0 / 27.0) / 1000);
    auto sorted = g.values;
    std::sort(sorted.begin(), sorted.end());
    const double ks_stated = ks_statistic(sorted, [](double x) { return normal_cdf(x, -4.0 / 9.0, 10.0 / 27.0); });
    o.detail << "mean " << g.sample_mean << " (target -4/9 +- " << half << "), var ratio " << g.var_ratio
             << ", KS vs N(-4/9, 10/27) " << ks_stated << "; library law " << rep.predicted.describe()
             << ": mean z " << g.mean_z << ", KS " << g.ks_stat << " ";
    o.check(std::abs(g.sample_mean + 4.0 / 9.0) <= half, "mean");
    o.check(g.var_ratio >= 0.75 && g.var_ratio <= 1.25, "variance ratio");
    o.check(ks_stated <= 0.07, "KS");
}

// 10. Free-energy LLN.
void free_energy(Outcome& o) {
    std::vector<double> gaps;
    for (int n : {100, 400, 1600}) {
        const ProblemModel model(Family::spanning_tree, n);
        const auto w = sample_weights(kExp, model.edge_count(), derive_seed(1010, n));
        const double gap = std::abs(log_partition(model, w, 1.0, {false}).log_z / (n - 1) - psi(kExp, 1.0));
        gaps.push_back(gap);
        o.detail << "n=" << n << ": gap " << gap << "; ";
    }
    o.check(gaps[0] > gaps[1] && gaps[1] > gaps[2], "decreasing in n");
    o.check(gaps[2] <= 0.01, "gap <= 0.01 at n=1600");
}

// 11. Generalised Cayley formula against tree enumeration.
void cayley(Outcome& o) {
    std::size_t forests = 0;
    std::size_t mismatches = 0;
    for (int n = 2; n <= 7; ++n) {
        const ProblemModel model(Family::spanning_tree, n);
        const std::uint32_t E = static_cast<std::uint32_t>(model.edge_count());
        std::unordered_map<std::uint32_t, std::uint64_t> contained;
        detail::enumerate_trees(model, [&](std::vector<std::uint32_t>&& t) {
            const std::size_t k = t.size();
            for (std::uint32_t sub = 0; sub < (1u << k); ++sub) {
                std::uint32_t mask = 0;
                for (std::size_t i = 0; i < k; ++i)
                    if (sub >> i & 1u) mask |= 1u << t[i];
                ++contained[mask];
            }
        });
        for (std::uint32_t mask = 0; mask < (1u << E); ++mask) {
            std::vector<std::uint32_t> edges;
            for (std::uint32_t e = 0; e < E; ++e)
                if (mask >> e & 1u) edges.push_back(e);
            const auto sizes = forest_component_sizes(model, edges);
            if (!sizes) continue;
            ++forests;
            const auto it = contained.find(mask);
            const BigInt seen = it == contained.end() ? BigInt(0) : BigInt(it->second);
            if (cayley_extension_count(n, *sizes) != seen) ++mismatches;
        }
    }
    o.detail << forests << " forests on n <= 7, " << mismatches << " mismatches ";
    o.check(mismatches == 0, "exact equality");
}

// 12. Sampler laws against enumeration.
double empirical_tv(const ProblemModel& model, const WeightVector& w, double beta,
                    const std::function<std::vector<std::uint32_t>()>& draw, std::size_t count) {
    std::map<std::vector<std::uint32_t>, double> law;
    double lo = kInfiniteWeight;
    const auto configs = enumerate_configs(model);
    for (const auto& c : configs) lo = std::min(lo, config_weight(c, w));
    double total = 0.0;
    for (const auto& c : configs) {
        const double f = std::exp(-beta * (config_weight(c, w) - lo));
        law[c.edges()] = f;
        total += f;
    }
    std::map<std::vector<std::uint32_t>, double> freq;
    for (std::size_t i = 0; i < count; ++i) freq[draw()] += 1.0;
    double d = 0.0;
    for (const auto& [k, p] : law) {
        const auto it = freq.find(k);
        d += std::abs((it == freq.end() ? 0.0 : it->second / count) - p / total);
    }
    for (const auto& [k, c] : freq)
        if (!law.count(k)) d += c / count;
    return 0.5 * d;
}

void sampler_laws(Outcome& o) {
    const std::vector<TinyCase> cases = {{Family::spanning_tree, 5, 1},      {Family::matching_bipartite, 5, 1},
                                         {Family::matching_complete, 4, 1},  {Family::traveling_salesman, 6, 1},
                                         {Family::k_factor, 3, 2}};
    for (const auto& c : cases) {
        const ProblemModel model(c.family, c.n, c.k);
        const auto w = sample_weights(kExp, model.edge_count(), derive_seed(1212, static_cast<int>(c.family)));
        ExactSampler sampler(model, w, 1.0);
        RandomStream rng(derive_seed(1213, static_cast<int>(c.family)));
        const double tv =
            empirical_tv(model, w, 1.0, [&] { return sampler.sample(rng).config.edges(); }, 1000000);
        o.detail << model.describe() << " " << sample_method_name(sampler.method()) << " TV " << tv << "; ";
        o.check(tv <= 0.01, model.describe() + " exact TV <= 0.01");
    }
    const ProblemModel tsp(Family::traveling_salesman, 8);
    const auto w = sample_weights(kExp, tsp.edge_count(), 1214);
    const auto sched = ChainSchedule::defaults(tsp);
    MetropolisChain chain(tsp, w, 1.0, 1215);
    chain.advance(sched.burn_in);
    const double tv = empirical_tv(
        tsp, w, 1.0,
        [&] {
            chain.advance(sched.thin);
            return chain.current().edges();
        },
        1000000);
    o.detail << "tsp(n=8) mcmc TV " << tv << " (acceptance " << chain.acceptance_rate() << ") ";
    o.check(tv <= 0.05, "mcmc TV <= 0.05");
}

// 13. Containment probabilities: bipartite bound and closed forms against enumeration.
std::vector<std::vector<std::uint32_t>> small_subsets(std::uint32_t E, std::size_t max_size) {
    std::vector<std::vector<std::uint32_t>> out{{}};
    std::vector<std::uint32_t> cur;
    std::function<void(std::uint32_t)> rec = [&](std::uint32_t start) {
        for (std::uint32_t e = start; e < E; ++e) {
            cur.push_back(e);
            out.push_back(cur);
            if (cur.size() < max_size) rec(e + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

void containment(Outcome& o) {
    {
        const ProblemModel model(Family::matching_bipartite, 10);
        const Rational p = Rational(1, 10);
        for (std::size_t k = 1; k <= 3; ++k) {
            std::size_t total = 0;
            std::size_t violations = 0;
            double worst = 0.0;
            for (const auto& g : small_subsets(static_cast<std::uint32_t>(model.edge_count()), k)) {
                if (g.size() != k || !is_partial_matching(model, g)) continue;
                ++total;
                Rational pk = 1;
                for (std::size_t i = 0; i < k; ++i) pk *= p;
                Rational dev = containment_prob(model, g) / pk - 1;
                if (dev < 0) dev = -dev;
                const Rational bound = Rational(static_cast<long>(k * (k - 1)), static_cast<long>(2 * (10 - k + 1)));
                worst = std::max(worst, static_cast<double>(dev));
                if (dev > bound) ++violations;
            }
            o.detail << "bipartite n=10 k=" << k << ": " << total << " matchings, max dev " << worst << " vs bound "
                     << static_cast<double>(k * (k - 1)) / (2.0 * (10 - k + 1)) << ", " << violations
                     << " violations; ";
            o.check(violations == 0, "bipartite bound at k=" + std::to_string(k));
        }
    }
    const std::vector<TinyCase> cases = {{Family::matching_bipartite, 5, 1},
                                         {Family::matching_complete, 4, 1},
                                         {Family::traveling_salesman, 6, 1},
                                         {Family::spanning_tree, 5, 1}};
    for (const auto& c : cases) {
        const ProblemModel model(c.family, c.n, c.k);
        const auto configs = enumerate_configs(model);
        std::size_t mismatches = 0;
        std::size_t checked = 0;
        for (const auto& g : small_subsets(static_cast<std::uint32_t>(model.edge_count()), 3)) {
            std::size_t hits = 0;
            for (const auto& cfg : configs)
                if (std::includes(cfg.edges().begin(), cfg.edges().end(), g.begin(), g.end())) ++hits;
            ++checked;
            if (containment_prob(model, g) != Rational(static_cast<long>(hits), static_cast<long>(configs.size())))
                ++mismatches;
        }
        o.detail << model.describe() << ": " << checked << " subsets, " << mismatches << " mismatches; ";
        o.check(mismatches == 0, model.describe() + " closed form");
    }
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"Z(0) = 1", z_at_zero},
        {"log Z CLT, spanning tree n=400", logz_tree},
        {"log Z CLT, bipartite matching n=12", logz_bipartite},
        {"cluster error scaling", cluster_error},
        {"uniform tree overlap vs Poi(2)", ust_overlap},
        {"Gibbs tree overlap vs Poi(8/3)", gibbs_overlap},
        {"typical weight CLT", typical_weight},
        {"Gibbs average CLT", gibbs_average},
        {"free energy LLN", free_energy},
        {"generalised Cayley formula", cayley},
        {"sampler laws", sampler_laws},
        {"containment probabilities", containment},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("criterion %2zu %s: %s (%.1f s) %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    secs, o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}
