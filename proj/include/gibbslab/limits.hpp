#pragma once

// Limit-law parameters, all computed from (gamma, psi, psi', psi'').

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/weights.hpp"

namespace gibbslab {

enum class LawKind { normal, poisson };

struct LimitLaw {
    LawKind kind = LawKind::normal;
    double mean = 0.0;      // Normal mean, or Poisson lambda
    double variance = 0.0;  // Normal variance, or Poisson lambda
    std::string centering;
    std::string scaling;

    static LimitLaw normal(double mean, double variance, std::string centering, std::string scaling) {
        return {LawKind::normal, mean, variance, std::move(centering), std::move(scaling)};
    }
    static LimitLaw poisson(double lambda, std::string centering = "none", std::string scaling = "none") {
        return {LawKind::poisson, lambda, lambda, std::move(centering), std::move(scaling)};
    }

    [[nodiscard]] double lambda() const { return mean; }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(10);
        if (kind == LawKind::normal) {
            os << "Normal(" << mean << ", " << variance << ")";
        } else {
            os << "Poisson(" << mean << ")";
        }
        return os.str();
    }
};

/// log Z - m psi(beta) => N(-gamma v^2, 2 gamma v^2).
inline LimitLaw logz_limit(const ProblemModel& model, const WeightDistribution& dist, double beta) {
    const double gv = model.gamma() * v_squared(dist, beta);
    return LimitLaw::normal(-gv, 2.0 * gv, "log Z - m*psi(beta)", "none");
}

/// |pi ∩ pi'| => Poi(2 gamma e^{psi(2 beta) - 2 psi(beta)}).
inline LimitLaw overlap_lambda(const ProblemModel& model, const WeightDistribution& dist, double beta) {
    const double lambda = 2.0 * model.gamma() * (1.0 + v_squared(dist, beta));
    return LimitLaw::poisson(lambda);
}

/// (W + m psi'(beta)) / sqrt(m) => N(0, psi''(beta)).
inline LimitLaw typical_clt(const WeightDistribution& dist, double beta) {
    return LimitLaw::normal(0.0, psi_double_prime(dist, beta), "W + m*psi'(beta)", "divide by sqrt(m)");
}

/// <W>_beta + m psi'(beta) => N(mu, sigma^2) with
/// mu = 2 gamma (psi'(2 beta) - psi'(beta)) e^{psi(2 beta) - 2 psi(beta)} = gamma d(v^2)/d(beta).
inline LimitLaw gibbs_avg_clt(const ProblemModel& model, const WeightDistribution& dist, double beta) {
    const double tilt = 1.0 + v_squared(dist, beta);
    const double gap = psi_prime(dist, beta) - psi_prime(dist, 2.0 * beta);
    const double g2 = 2.0 * model.gamma();
    return LimitLaw::normal(-g2 * gap * tilt, g2 * (gap * gap + psi_double_prime(dist, 2.0 * beta)) * tilt,
                            "<W>_beta + m*psi'(beta)", "none");
}

struct Block {
    double m = 0.0;
    double gamma = 0.0;
    WeightDistribution dist = WeightDistribution::exponential();
};

/// Multipartite log Z: N(-sum gamma_st v_st^2, 2 sum gamma_st v_st^2),
/// centred by sum m_st psi_st(beta).
inline LimitLaw multipartite_logz_limit(const std::vector<Block>& blocks, double beta) {
    if (blocks.empty()) throw InvalidArgument("multipartite limit needs at least one block");
    double s = 0.0;
    for (const auto& b : blocks) {
        if (!(b.gamma > 0.0)) throw InvalidArgument("block gamma must be positive");
        s += b.gamma * v_squared(b.dist, beta);
    }
    return LimitLaw::normal(-s, 2.0 * s, "log Z - sum m_st*psi_st(beta)", "none");
}

}  // namespace gibbslab
