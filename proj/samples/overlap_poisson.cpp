// Overlap of two independent Gibbs spanning trees on one weight instance.

#include <iostream>

#include "gibbslab/limits.hpp"
#include "gibbslab/samplers.hpp"
#include "gibbslab/stats.hpp"

int main() {
    using namespace gibbslab;
    const ProblemModel model(Family::spanning_tree, 150);
    const auto dist = WeightDistribution::exponential();
    const double beta = 1.0;
    const auto weights = sample_weights(dist, model.edge_count(), 11);

    ExactSampler sampler(model, weights, beta);
    RandomStream rng(12);
    std::vector<double> overlaps;
    for (int i = 0; i < 4000; ++i) {
        const auto a = sampler.sample(rng);
        const auto b = sampler.sample(rng);
        overlaps.push_back(static_cast<double>(overlap(a.config, b.config)));
    }
    const auto law = overlap_lambda(model, dist, beta);
    std::cout << "predicted " << law.describe() << ", sample mean " << moments(overlaps).mean
              << ", TV " << tv_distance_poisson(histogram(overlaps), law.lambda()) << '\n';
}
