#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gibbslab/oracles.hpp"

using namespace gibbslab;

namespace {

double brute_permanent(const std::vector<double>& a, int n) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double total = 0.0;
    do {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= a[i * n + perm[i]];
        total += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return total;
}

// Gibbs probabilities and <W> by direct enumeration.
struct EnumeratedLaw {
    std::vector<Configuration> configs;
    std::vector<double> prob;
    double mean_weight = 0.0;
};

EnumeratedLaw enumerate_law(const ProblemModel& model, const WeightVector& w, double beta) {
    EnumeratedLaw law;
    law.configs = enumerate_configs(model);
    double lo = kInfiniteWeight;
    for (const auto& c : law.configs) lo = std::min(lo, config_weight(c, w));
    double total = 0.0;
    for (const auto& c : law.configs) {
        const double x = config_weight(c, w);
        law.prob.push_back(x == kInfiniteWeight ? 0.0 : std::exp(-beta * (x - lo)));
        total += law.prob.back();
    }
    for (std::size_t i = 0; i < law.prob.size(); ++i) {
        law.prob[i] /= total;
        if (law.prob[i] > 0.0) law.mean_weight += law.prob[i] * config_weight(law.configs[i], w);
    }
    return law;
}

std::vector<ProblemModel> tiny_models() {
    return {ProblemModel(Family::matching_bipartite, 5), ProblemModel(Family::matching_complete, 4),
            ProblemModel(Family::traveling_salesman, 6), ProblemModel(Family::spanning_tree, 5),
            ProblemModel(Family::k_factor, 4, 2),        ProblemModel(Family::k_factor, 3, 3)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(Permanent, SmallCases) {
    const std::vector<Dual> two{Dual(2.0), Dual(3.0), Dual(5.0), Dual(7.0)};
    EXPECT_NEAR(permanent_log_deriv(two, 2).log_value, std::log(2.0 * 7.0 + 3.0 * 5.0), 1e-15);
    for (int n = 1; n <= 8; ++n) {
        std::vector<Dual> id(n * n, Dual(0.0));
        for (int i = 0; i < n; ++i) id[i * n + i] = Dual(1.0);
        EXPECT_EQ(permanent_log_deriv(id, n).log_value, 0.0);
    }
}

TEST(Permanent, RandomAgainstBruteForce) {
    RandomStream rng(3);
    for (int n = 2; n <= 7; ++n) {
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> a(n * n);
            for (auto& x : a) x = 1.0 - rng.uniform();
            const double brute = brute_permanent(a, n);
            EXPECT_NEAR(ryser_permanent(a, n) / brute, 1.0, 1e-12);
            double bound = 0.0;
            ryser_permanent(a, n, &bound);
            EXPECT_LT(bound, 1e-10);
        }
    }
}

TEST(Permanent, TableMatchesRyser) {
    RandomStream rng(4);
    const int n = 8;
    std::vector<double> a(n * n);
    for (auto& x : a) x = rng.uniform();
    EXPECT_NEAR(PermanentTable(a, n).permanent() / ryser_permanent(a, n), 1.0, 1e-12);
}

TEST(Permanent, ZeroRowGivesMinusInfinity) {
    std::vector<Dual> a{Dual(0.0), Dual(0.0), Dual(1.0), Dual(1.0)};
    EXPECT_EQ(permanent_log_deriv(a, 2).log_value, -std::numeric_limits<double>::infinity());
}

TEST(LogPartition, BetaZeroIsExactlyZero) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), 17);
        EXPECT_EQ(log_partition(model, w, 0.0).log_z, 0.0) << model.describe();
    }
    const ProblemModel big(Family::spanning_tree, 300);
    EXPECT_EQ(log_partition(big, sample_weights(WeightDistribution::uniform(), big.edge_count(), 1), 0.0).log_z, 0.0);
}

TEST(LogPartition, RawRecursionsCountConfigurationsAtBetaZero) {
    for (const auto& model : tiny_models()) {
        if (model.family() == Family::spanning_tree) continue;
        const std::vector<Dual> ones(model.edge_count(), Dual(1.0));
        EXPECT_NEAR(detail::specialised_sum(model, ones).v, static_cast<double>(*count_configs(model).exact), 1e-6)
            << model.describe();
    }
    const ProblemModel tsp(Family::traveling_salesman, 4);
    EXPECT_DOUBLE_EQ(TspTable<double>(tsp, std::vector<double>(6, 1.0)).total(), 3.0);
    for (int n = 2; n < 30; ++n) {
        const ProblemModel t(Family::spanning_tree, n);
        const auto mt = matrix_tree(t, std::vector<double>(t.edge_count(), 1.0), nullptr, false);
        EXPECT_NEAR(mt.log_det, (n - 2) * std::log(double(n)), 1e-10);
    }
}

TEST(LogPartition, SingleTriangle) {
    const ProblemModel tsp(Family::traveling_salesman, 3);
    const auto w = make_weights({0.3, 1.7, 0.9});
    for (double beta : {0.5, 2.0}) {
        const auto r = log_partition(tsp, w, beta);
        EXPECT_NEAR(r.log_z, -beta * 2.9, 1e-14);
        EXPECT_NEAR(r.dlogz_dbeta, -2.9, 1e-14);
    }
}

TEST(LogPartition, ConstantTspWeights) {
    const ProblemModel tsp(Family::traveling_salesman, 9);
    const auto w = make_weights(std::vector<double>(tsp.edge_count(), 0.7));
    EXPECT_NEAR(log_partition(tsp, w, 1.3).log_z, -1.3 * 0.7 * 9, 1e-12);
}

TEST(LogPartition, TreesAgainstBruteForce) {
    for (int n : {5, 6}) {
        const ProblemModel t(Family::spanning_tree, n);
        const auto w = sample_weights(WeightDistribution::exponential(), t.edge_count(), 100 + n);
        const auto a = log_partition(t, w, 1.0);
        const auto b = log_partition_brute_force(t, w, 1.0);
        EXPECT_EQ(a.method, PartitionMethod::matrix_tree);
        EXPECT_LE(std::abs(a.log_z - b.log_z) / std::abs(b.log_z), 1e-10);
    }
}

TEST(LogPartition, SpecialisedMatchesBruteForce) {
    for (const auto& model : tiny_models()) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), derive_seed(5, rep));
            for (double beta : {0.25, 1.0, 3.0}) {
                const auto a = log_partition(model, w, beta);
                const auto b = log_partition_brute_force(model, w, beta);
                EXPECT_LE(rel(a.log_z, b.log_z), 1e-9) << model.describe();
                EXPECT_LE(rel(a.dlogz_dbeta, b.dlogz_dbeta), 1e-9) << model.describe();
            }
        }
    }
}

TEST(LogPartition, DerivativeMatchesFiniteDifference) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::uniform(), model.edge_count(), 77);
        for (double beta : {0.25, 1.0, 3.0}) {
            const double h = 1e-5;
            const double fd = (log_partition(model, w, beta + h).log_z - log_partition(model, w, beta - h).log_z) / (2 * h);
            EXPECT_NEAR(log_partition(model, w, beta).dlogz_dbeta, fd, 1e-6) << model.describe();
        }
    }
}

TEST(LogPartition, GibbsAverageIdentity) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), 78);
        const auto law = enumerate_law(model, w, 1.0);
        EXPECT_NEAR(-log_partition(model, w, 1.0).dlogz_dbeta, law.mean_weight, 1e-9) << model.describe();
        EXPECT_NEAR(log_partition(model, w, 1.0).gibbs_mean_weight(), law.mean_weight, 1e-9);
    }
}

TEST(LogPartition, BetaZeroDerivativeIsUniformAverage) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), 79);
        EXPECT_NEAR(log_partition(model, w, 0.0).dlogz_dbeta, log_partition_brute_force(model, w, 0.0).dlogz_dbeta, 1e-12);
    }
}

TEST(LogPartition, CensoredMatchesRestrictedSum) {
    const auto dist = WeightDistribution::censored(WeightDistribution::exponential(), 0.6);
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(dist, model.edge_count(), 80);
        const auto configs = enumerate_configs(model);
        double sum = 0.0;
        for (const auto& c : configs) {
            bool finite = true;
            double wt = 0.0;
            for (auto e : c.edges()) {
                finite = finite && std::isfinite(w[e]);
                wt += w[e];
            }
            if (finite) sum += std::exp(-1.0 * wt);
        }
        const auto r = log_partition(model, w, 1.0);
        if (sum == 0.0) {
            EXPECT_TRUE(r.all_infinite()) << model.describe();
        } else {
            EXPECT_NEAR(r.log_z, std::log(sum / static_cast<double>(configs.size())), 1e-9) << model.describe();
        }
    }
}

TEST(LogPartition, AllInfiniteOutcome) {
    for (const auto& model : tiny_models()) {
        const auto w = make_weights(std::vector<double>(model.edge_count(), kInfiniteWeight));
        for (double beta : {0.0, 1.0}) {
            const auto r = log_partition(model, w, beta);
            EXPECT_TRUE(r.all_infinite()) << model.describe();
            EXPECT_EQ(r.log_z, -std::numeric_limits<double>::infinity());
        }
    }
    // Finite edges form a star on three of five vertices: no spanning tree.
    const ProblemModel t(Family::spanning_tree, 5);
    std::vector<double> v(t.edge_count(), kInfiniteWeight);
    v[t.edge_index(0, 1)] = 1.0;
    v[t.edge_index(0, 2)] = 1.0;
    EXPECT_TRUE(log_partition(t, make_weights(v), 1.0).all_infinite());
}

TEST(LogPartition, CapsAndArguments) {
    const ProblemModel tsp(Family::traveling_salesman, 25);
    const auto w = sample_weights(WeightDistribution::exponential(), tsp.edge_count(), 1);
    EXPECT_THROW(log_partition(tsp, w, 1.0), CapExceeded);
    const ProblemModel mb(Family::matching_bipartite, 19);
    EXPECT_THROW(log_partition(mb, sample_weights(WeightDistribution::exponential(), mb.edge_count(), 1), 1.0),
                 CapExceeded);
    const ProblemModel t(Family::spanning_tree, 5);
    EXPECT_THROW(log_partition(t, make_weights({1.0, 2.0}), 1.0), InvalidArgument);
    EXPECT_THROW(log_partition(t, sample_weights(WeightDistribution::exponential(), 10, 1), -0.5), InvalidArgument);
}

TEST(LogPartition, IllConditionedLaplacianSignals) {
    const ProblemModel t(Family::spanning_tree, 6);
    const auto w = sample_weights(WeightDistribution::exponential(), t.edge_count(), 9);
    EXPECT_THROW(log_partition(t, w, 400.0), NumericalError);
}

TEST(LogPartition, LargerBipartiteStable) {
    const ProblemModel mb(Family::matching_bipartite, 14);
    const auto w = sample_weights(WeightDistribution::exponential(), mb.edge_count(), 10);
    const auto r = log_partition(mb, w, 1.0);
    EXPECT_TRUE(std::isfinite(r.log_z));
    // Permanent table (no cancellation) as a second route.
    const auto scaled = detail::scaled_factors(mb, w, 1.0);
    std::vector<double> f(mb.edge_count());
    for (std::size_t e = 0; e < f.size(); ++e) f[e] = scaled.factors[e].v;
    const double log_table =
        std::log(PermanentTable(f, 14).permanent()) - scaled.config_shift - detail::log_config_count(mb);
    EXPECT_NEAR(r.log_z, log_table, 1e-9);
}

TEST(Marginals, TreeOnThreeVertices) {
    const ProblemModel t(Family::spanning_tree, 3);
    const auto m = edge_marginals(t, make_weights({0.0, 0.0, 0.0}), 1.0);
    for (double x : m) EXPECT_NEAR(x, 2.0 / 3.0, 1e-14);
}

TEST(Marginals, BetaZeroGivesP) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), 81);
        for (double x : edge_marginals(model, w, 0.0)) EXPECT_NEAR(x, model.edge_prob(), 1e-12) << model.describe();
    }
}

TEST(Marginals, MatchEnumerationAndSumToM) {
    for (const auto& model : tiny_models()) {
        const auto w = sample_weights(WeightDistribution::exponential(), model.edge_count(), 82);
        const auto law = enumerate_law(model, w, 1.5);
        std::vector<double> expect(model.edge_count(), 0.0);
        for (std::size_t i = 0; i < law.configs.size(); ++i) {
            for (auto e : law.configs[i].edges()) expect[e] += law.prob[i];
        }
        const auto got = edge_marginals(model, w, 1.5);
        double sum = 0.0;
        for (std::size_t e = 0; e < got.size(); ++e) {
            EXPECT_NEAR(got[e], expect[e], 1e-10) << model.describe();
            EXPECT_GE(got[e], 0.0);
            EXPECT_LE(got[e], 1.0);
            sum += got[e];
        }
        EXPECT_NEAR(sum, static_cast<double>(model.config_size()), 1e-8);
        EXPECT_NEAR(edge_marginal(model, w, 1.5, 2), expect[2], 1e-10);
    }
}

TEST(Marginals, LargeTreeApproximationGap) {
    // Exact marginals against p(1+xi)/(1+p xi); the gap should shrink with n.
    const auto dist = WeightDistribution::exponential();
    double previous = 1.0;
    for (int n : {25, 100}) {
        const ProblemModel t(Family::spanning_tree, n);
        const auto w = sample_weights(dist, t.edge_count(), 83);
        const auto exact = edge_marginals(t, w, 1.0);
        double gap = 0.0;
        for (std::size_t e = 0; e < exact.size(); ++e)
            gap = std::max(gap, std::abs(exact[e] - marginal_approximation(t.edge_prob(), xi(w[e], dist, 1.0))));
        EXPECT_LT(gap, previous);
        previous = gap;
    }
}
