// Fluctuations of log Z for random spanning trees of K_n, compared with
// the Normal(-gamma v^2, 2 gamma v^2) limit.

#include <iostream>

#include "gibbslab/stats.hpp"

int main() {
    using namespace gibbslab;
    ExperimentSpec spec;
    spec.observable = Observable::logz;
    spec.family = Family::spanning_tree;
    spec.n = 200;
    spec.beta = 1.0;
    spec.replicates = 500;
    spec.seed = 7;
    const auto rep = run_experiment(spec);
    const auto& g = rep.groups.front();
    std::cout << "predicted " << rep.predicted.describe() << '\n'
              << "sample mean " << g.sample_mean << ", variance " << g.sample_variance << '\n'
              << "KS " << g.ks_stat << (rep.pass ? "  (pass)" : "  (fail)") << '\n';
}
