#pragma once

// Edge-weight laws and their cumulant generating function
//   psi(beta) = log E exp(-beta * omega)
// together with the centred tilted weights xi and weight sampling.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/rng.hpp"

namespace gibbslab {

inline constexpr double kInfiniteWeight = std::numeric_limits<double>::infinity();

class WeightDistribution;

struct ExponentialLaw {
    double rate = 1.0;
};

struct UniformLaw {
    double lower = 0.0;
    double upper = 1.0;
};

/// Base law kept with probability keep_prob, otherwise the edge weight is +inf.
struct CensoredLaw {
    std::shared_ptr<const WeightDistribution> base;
    double keep_prob = 1.0;
};

/// User-supplied law. The cgf must be finite on [0, inf); derivatives are
/// taken numerically.
struct CustomLaw {
    std::string name;
    std::function<double(double)> cgf;
    std::function<double(RandomStream&)> sampler;
};

class WeightDistribution {
public:
    using Kind = std::variant<ExponentialLaw, UniformLaw, CensoredLaw, CustomLaw>;

    static WeightDistribution exponential(double rate = 1.0) {
        if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("exponential rate must be positive and finite");
        return WeightDistribution(ExponentialLaw{rate});
    }

    static WeightDistribution uniform(double lower = 0.0, double upper = 1.0) {
        if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
            throw InvalidArgument("uniform law needs finite lower < upper");
        return WeightDistribution(UniformLaw{lower, upper});
    }

    static WeightDistribution censored(const WeightDistribution& base, double keep_prob) {
        if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw InvalidArgument("censoring keep probability must lie in (0, 1]");
        return WeightDistribution(CensoredLaw{std::make_shared<const WeightDistribution>(base), keep_prob});
    }

    static WeightDistribution custom(std::string name, std::function<double(double)> cgf,
                                     std::function<double(RandomStream&)> sampler) {
        if (!cgf || !sampler) throw InvalidArgument("custom law needs both a cgf and a sampler");
        return WeightDistribution(CustomLaw{std::move(name), std::move(cgf), std::move(sampler)});
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    /// True when psi and its derivatives are available in closed form.
    [[nodiscard]] bool closed_form_cgf() const {
        if (const auto* c = std::get_if<CensoredLaw>(&kind_)) return c->base->closed_form_cgf();
        return !std::holds_alternative<CustomLaw>(kind_);
    }

    /// True when the law can produce +inf weights.
    [[nodiscard]] bool may_be_infinite() const {
        if (const auto* c = std::get_if<CensoredLaw>(&kind_)) return c->keep_prob < 1.0 || c->base->may_be_infinite();
        return false;
    }

    /// Descriptor in the CLI syntax, e.g. "exp:1", "uniform:0:1", "censored:0.5:exp:1".
    [[nodiscard]] std::string descriptor() const {
        std::ostringstream os;
        os.precision(17);
        std::visit(
            [&os](const auto& law) {
                using T = std::decay_t<decltype(law)>;
                if constexpr (std::is_same_v<T, ExponentialLaw>) {
                    os << "exp:" << law.rate;
                } else if constexpr (std::is_same_v<T, UniformLaw>) {
                    os << "uniform:" << law.lower << ':' << law.upper;
                } else if constexpr (std::is_same_v<T, CensoredLaw>) {
                    os << "censored:" << law.keep_prob << ':' << law.base->descriptor();
                } else {
                    os << "custom:" << law.name;
                }
            },
            kind_);
        return os.str();
    }

private:
    explicit WeightDistribution(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

namespace detail {

inline void require_beta(double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and >= 0");
}

// f(t) = log((1 - e^{-t}) / t) and its first two derivatives, the cgf of
// Uniform(0,1) evaluated at t. Series branches keep full precision near 0.
inline double uniform_log_mgf(double t) {
    if (t < 1e-4) return -t / 2.0 + t * t / 24.0;
    return std::log(-std::expm1(-t) / t);
}

inline double uniform_log_mgf_d1(double t) {
    if (t < 1e-3) return -0.5 + t / 12.0 - t * t * t / 720.0;
    return 1.0 / std::expm1(t) - 1.0 / t;
}

inline double uniform_log_mgf_d2(double t) {
    if (t < 1e-3) return 1.0 / 12.0 - t * t / 240.0;
    if (t > 700.0) return 1.0 / (t * t);
    const double em1 = std::expm1(t);
    return -(em1 + 1.0) / (em1 * em1) + 1.0 / (t * t);
}

}  // namespace detail

/// psi(beta) = log E exp(-beta * omega).
inline double psi(const WeightDistribution& dist, double beta) {
    detail::require_beta(beta);
    if (beta == 0.0 && !dist.may_be_infinite()) return 0.0;
    return std::visit(
        [beta](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, ExponentialLaw>) {
                return -std::log1p(beta / law.rate);
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                return -beta * law.lower + detail::uniform_log_mgf(beta * (law.upper - law.lower));
            } else if constexpr (std::is_same_v<T, CensoredLaw>) {
                return std::log(law.keep_prob) + psi(*law.base, beta);
            } else {
                return law.cgf(beta);
            }
        },
        dist.kind());
}

/// Central difference of psi with one Richardson refinement. Step
/// h = eps^{1/3} max(1, beta), shrunk so that beta - h stays >= 0.
inline double numeric_psi_prime(const WeightDistribution& dist, double beta) {
    double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, beta);
    if (beta - h < 0.0) h = beta / 2.0;
    if (!(h > 0.0)) throw InvalidArgument("numeric derivative needs beta > 0");
    auto central = [&](double step) { return (psi(dist, beta + step) - psi(dist, beta - step)) / (2.0 * step); };
    return (4.0 * central(h / 2.0) - central(h)) / 3.0;
}

/// Second central difference of psi with one Richardson refinement. The
/// step is eps^{1/4} max(1, beta), the balanced choice for a second difference.
inline double numeric_psi_double_prime(const WeightDistribution& dist, double beta) {
    double h = std::sqrt(std::sqrt(std::numeric_limits<double>::epsilon())) * std::max(1.0, beta);
    if (beta - h < 0.0) h = beta / 2.0;
    if (!(h > 0.0)) throw InvalidArgument("numeric derivative needs beta > 0");
    const double centre = psi(dist, beta);
    auto second = [&](double step) {
        return (psi(dist, beta + step) - 2.0 * centre + psi(dist, beta - step)) / (step * step);
    };
    return (4.0 * second(h / 2.0) - second(h)) / 3.0;
}

/// psi'(beta) = -(tilted mean of omega). Defined at beta = 0 for closed-form laws.
inline double psi_prime(const WeightDistribution& dist, double beta) {
    detail::require_beta(beta);
    return std::visit(
        [&](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, ExponentialLaw>) {
                return -1.0 / (law.rate + beta);
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                const double width = law.upper - law.lower;
                return -law.lower + width * detail::uniform_log_mgf_d1(beta * width);
            } else if constexpr (std::is_same_v<T, CensoredLaw>) {
                return psi_prime(*law.base, beta);
            } else {
                return numeric_psi_prime(dist, beta);
            }
        },
        dist.kind());
}

/// psi''(beta) = tilted variance of omega.
inline double psi_double_prime(const WeightDistribution& dist, double beta) {
    detail::require_beta(beta);
    return std::visit(
        [&](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, ExponentialLaw>) {
                const double s = law.rate + beta;
                return 1.0 / (s * s);
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                const double width = law.upper - law.lower;
                return width * width * detail::uniform_log_mgf_d2(beta * width);
            } else if constexpr (std::is_same_v<T, CensoredLaw>) {
                return psi_double_prime(*law.base, beta);
            } else {
                return numeric_psi_double_prime(dist, beta);
            }
        },
        dist.kind());
}

/// v^2(beta) = E xi^2 = exp(psi(2 beta) - 2 psi(beta)) - 1.
inline double v_squared(const WeightDistribution& dist, double beta) {
    return std::expm1(psi(dist, 2.0 * beta) - 2.0 * psi(dist, beta));
}

/// xi = exp(-beta omega - psi(beta)) - 1; an infinite weight maps to -1.
inline double xi(double omega, const WeightDistribution& dist, double beta) {
    detail::require_beta(beta);
    if (omega == kInfiniteWeight) return -1.0;
    return std::expm1(-beta * omega - psi(dist, beta));
}

/// One i.i.d. weight per edge, with provenance.
struct WeightVector {
    std::vector<double> values;
    std::uint64_t source_seed = 0;
    std::shared_ptr<const WeightDistribution> distribution;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

namespace detail {

inline double draw_weight(const WeightDistribution& dist, RandomStream& rng) {
    return std::visit(
        [&rng](const auto& law) -> double {
            using T = std::decay_t<decltype(law)>;
            if constexpr (std::is_same_v<T, ExponentialLaw>) {
                return rng.exponential(law.rate);
            } else if constexpr (std::is_same_v<T, UniformLaw>) {
                return law.lower + (law.upper - law.lower) * rng.uniform();
            } else if constexpr (std::is_same_v<T, CensoredLaw>) {
                // One uniform decides censoring, the base draw follows only when kept.
                if (rng.uniform() >= law.keep_prob) return kInfiniteWeight;
                return draw_weight(*law.base, rng);
            } else {
                return law.sampler(rng);
            }
        },
        dist.kind());
}

}  // namespace detail

inline WeightVector sample_weights(const WeightDistribution& dist, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw InvalidArgument("weight count must be >= 1");
    WeightVector out;
    out.values.resize(count);
    out.source_seed = seed;
    out.distribution = std::make_shared<const WeightDistribution>(dist);
    RandomStream rng(seed);
    for (auto& w : out.values) w = detail::draw_weight(dist, rng);
    return out;
}

/// Wraps externally supplied weights (tests, hand-built instances).
inline WeightVector make_weights(std::vector<double> values, const WeightDistribution& dist = WeightDistribution::exponential()) {
    for (double w : values) {
        if (std::isnan(w) || w == -kInfiniteWeight) throw InvalidArgument("weights must be real or +inf");
    }
    WeightVector out;
    out.values = std::move(values);
    out.distribution = std::make_shared<const WeightDistribution>(dist);
    return out;
}

/// Parses "exp:RATE", "exp" (rate 1), "uniform:LO:HI", "uniform" (0,1),
/// "censored:KEEP:<base descriptor>".
inline WeightDistribution parse_distribution(std::string_view text) {
    auto fail = [&]() -> WeightDistribution {
        throw InvalidArgument("bad distribution descriptor '" + std::string(text) +
                              "' (expected exp[:rate], uniform[:lo:hi] or censored:keep:<base>)");
    };
    auto take = [](std::string_view& rest) {
        const auto pos = rest.find(':');
        std::string_view head = rest.substr(0, pos);
        rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
        return std::string(head);
    };
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            fail();
        }
        if (used != s.size()) fail();
        return v;
    };
    std::string_view rest = text;
    const std::string kind = take(rest);
    if (kind == "exp" || kind == "exponential") {
        if (rest.empty()) return WeightDistribution::exponential(1.0);
        const double rate = number(take(rest));
        if (!rest.empty()) fail();
        return WeightDistribution::exponential(rate);
    }
    if (kind == "uniform") {
        if (rest.empty()) return WeightDistribution::uniform(0.0, 1.0);
        const double lo = number(take(rest));
        if (rest.empty()) fail();
        const double hi = number(take(rest));
        if (!rest.empty()) fail();
        return WeightDistribution::uniform(lo, hi);
    }
    if (kind == "censored") {
        if (rest.empty()) fail();
        const double keep = number(take(rest));
        if (rest.empty()) fail();
        return WeightDistribution::censored(parse_distribution(rest), keep);
    }
    return fail();
}

}  // namespace gibbslab
