#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/limits.hpp"

using namespace gibbslab;

namespace {
const auto kExp = WeightDistribution::exponential();
const auto kUnif = WeightDistribution::uniform();
}  // namespace

TEST(LogzLimit, ExponentialAtOne) {
    const auto mb = logz_limit(ProblemModel(Family::matching_bipartite, 10), kExp, 1.0);
    EXPECT_EQ(mb.kind, LawKind::normal);
    EXPECT_NEAR(mb.mean, -1.0 / 6.0, 1e-15);
    EXPECT_NEAR(mb.variance, 1.0 / 3.0, 1e-15);
    const auto tree = logz_limit(ProblemModel(Family::spanning_tree, 10), kExp, 1.0);
    EXPECT_NEAR(tree.mean, -1.0 / 3.0, 1e-15);
    EXPECT_NEAR(tree.variance, 2.0 / 3.0, 1e-15);
}

TEST(LogzLimit, VarianceIsMinusTwiceMean) {
    for (const auto& model : {ProblemModel(Family::matching_bipartite, 10), ProblemModel(Family::matching_complete, 10),
                              ProblemModel(Family::traveling_salesman, 10), ProblemModel(Family::spanning_tree, 10),
                              ProblemModel(Family::k_factor, 10, 3)}) {
        for (const auto& d : {kExp, kUnif}) {
            for (double beta : {0.1, 1.0, 4.0}) {
                const auto law = logz_limit(model, d, beta);
                EXPECT_EQ(law.variance, -2.0 * law.mean);
            }
        }
    }
}

TEST(LogzLimit, BetaZeroIsDegenerate) {
    const auto law = logz_limit(ProblemModel(Family::spanning_tree, 10), kExp, 0.0);
    EXPECT_EQ(law.mean, 0.0);
    EXPECT_EQ(law.variance, 0.0);
}

TEST(OverlapLambda, Values) {
    const auto law = overlap_lambda(ProblemModel(Family::spanning_tree, 10), kExp, 1.0);
    EXPECT_EQ(law.kind, LawKind::poisson);
    EXPECT_NEAR(law.lambda(), 8.0 / 3.0, 1e-15);
    EXPECT_NEAR(overlap_lambda(ProblemModel(Family::matching_bipartite, 10), kExp, 0.0).lambda(), 1.0, 1e-15);
    EXPECT_NEAR(overlap_lambda(ProblemModel(Family::matching_complete, 10), kExp, 0.0).lambda(), 0.5, 1e-15);
    EXPECT_NEAR(overlap_lambda(ProblemModel(Family::traveling_salesman, 10), kExp, 0.0).lambda(), 2.0, 1e-15);
}

TEST(TypicalClt, Values) {
    EXPECT_NEAR(typical_clt(kExp, 1.0).variance, 0.25, 1e-15);
    EXPECT_NEAR(typical_clt(kExp, 0.0).variance, 1.0, 1e-15);
    EXPECT_NEAR(typical_clt(kUnif, 0.0).variance, 1.0 / 12.0, 1e-12);
    EXPECT_EQ(typical_clt(kExp, 1.0).mean, 0.0);
}

TEST(GibbsAvgClt, ExponentialAtOne) {
    const auto tree = gibbs_avg_clt(ProblemModel(Family::spanning_tree, 10), kExp, 1.0);
    EXPECT_NEAR(tree.mean, 4.0 / 9.0, 1e-14);
    EXPECT_NEAR(tree.variance, 10.0 / 27.0, 1e-14);
    const auto mb = gibbs_avg_clt(ProblemModel(Family::matching_bipartite, 10), kExp, 1.0);
    EXPECT_NEAR(mb.mean, 2.0 / 9.0, 1e-14);
    EXPECT_NEAR(mb.variance, 5.0 / 27.0, 1e-14);
}

TEST(GibbsAvgClt, MeanIsGammaTimesDerivativeOfVSquared) {
    // d/dbeta of the log Z mean -gamma v^2 gives -E<W> - m psi'.
    const ProblemModel model(Family::matching_complete, 10);
    for (const auto& d : {kExp, kUnif}) {
        for (double beta : {0.3, 1.0, 2.5}) {
            const double h = 1e-5;
            const double dv2 = (v_squared(d, beta + h) - v_squared(d, beta - h)) / (2 * h);
            EXPECT_NEAR(gibbs_avg_clt(model, d, beta).mean, model.gamma() * dv2, 1e-7);
        }
    }
}

TEST(GibbsAvgClt, MeanVanishesAtBetaZero) {
    const auto law = gibbs_avg_clt(ProblemModel(Family::spanning_tree, 10), kExp, 0.0);
    EXPECT_EQ(law.mean, 0.0);
    EXPECT_NEAR(law.variance, 2.0, 1e-12);  // 2 gamma Var(w)
}

TEST(Multipartite, TwoBlockExample) {
    const auto law = multipartite_logz_limit({{100, 0.5, kExp}, {50, 0.25, kUnif}}, 1.0);
    EXPECT_NEAR(law.mean, -0.187160843384, 1e-11);
    EXPECT_EQ(law.variance, -2.0 * law.mean);
}

TEST(Multipartite, ReducesToSingleBlock) {
    const ProblemModel model(Family::spanning_tree, 30);
    const auto one = multipartite_logz_limit({{29, 1.0, kUnif}}, 0.7);
    const auto split = multipartite_logz_limit({{15, 0.5, kUnif}, {14, 0.5, kUnif}}, 0.7);
    const auto ref = logz_limit(model, kUnif, 0.7);
    EXPECT_NEAR(one.mean, ref.mean, 1e-15);
    EXPECT_NEAR(split.mean, ref.mean, 1e-15);
}

TEST(Multipartite, Rejects) {
    EXPECT_THROW(multipartite_logz_limit({}, 1.0), InvalidArgument);
    EXPECT_THROW(multipartite_logz_limit({{10, 0.0, kExp}}, 1.0), InvalidArgument);
}

TEST(LimitLaw, Describe) {
    EXPECT_EQ(LimitLaw::poisson(2.0).describe(), "Poisson(2)");
    EXPECT_EQ(LimitLaw::normal(-0.5, 1.0, "", "").describe(), "Normal(-0.5, 1)");
}
