#pragma once

// CSV and JSON output for experiment reports.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gibbslab/errors.hpp"
#include "gibbslab/limits.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/stats.hpp"

namespace gibbslab {

inline std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

/// One row per value: group, instance_seed, index, value.
inline void write_values_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "group,instance_seed,index,value\n";
    for (std::size_t g = 0; g < rep.groups.size(); ++g) {
        const auto& grp = rep.groups[g];
        for (std::size_t i = 0; i < grp.values.size(); ++i) {
            os << g << ',' << grp.instance_seed << ',' << i << ',' << format_real(grp.values[i]) << '\n';
        }
    }
}

/// Tidy plot data: Poisson histograms (k, empirical, predicted) or normal QQ
/// points (empirical quantile, predicted quantile) per group.
inline void write_plot_csv(std::ostream& os, const ExperimentReport& rep) {
    const auto& law = rep.predicted;
    if (law.kind == LawKind::poisson && law.lambda() > 0.0) {
        os << "group,k,empirical,predicted\n";
        for (std::size_t g = 0; g < rep.groups.size(); ++g) {
            const auto counts = histogram(rep.groups[g].values);
            const double total = static_cast<double>(rep.groups[g].values.size());
            const std::size_t kmax = std::max<std::size_t>(counts.size(), static_cast<std::size_t>(law.lambda() * 3 + 10));
            for (std::size_t k = 0; k < kmax; ++k) {
                const double emp = k < counts.size() ? static_cast<double>(counts[k]) / total : 0.0;
                os << g << ',' << k << ',' << format_real(emp) << ',' << format_real(poisson_pmf(static_cast<int>(k), law.lambda()))
                   << '\n';
            }
        }
        return;
    }
    os << "group,probability,empirical_quantile,predicted_quantile\n";
    if (!(law.variance > 0.0)) return;
    for (std::size_t g = 0; g < rep.groups.size(); ++g) {
        auto sorted = rep.groups[g].values;
        std::sort(sorted.begin(), sorted.end());
        const double n = static_cast<double>(sorted.size());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const double prob = (static_cast<double>(i) + 0.5) / n;
            // Inverse normal CDF by bisection on erfc; plot data only.
            double lo = -40.0;
            double hi = 40.0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (normal_cdf(mid, 0.0, 1.0) < prob ? lo : hi) = mid;
            }
            const double q = law.mean + std::sqrt(law.variance) * 0.5 * (lo + hi);
            os << g << ',' << format_real(prob) << ',' << format_real(sorted[i]) << ',' << format_real(q) << '\n';
        }
    }
}

inline nlohmann::json to_json(const LimitLaw& law) {
    nlohmann::json j;
    if (law.kind == LawKind::normal) {
        j["kind"] = "normal";
        j["mean"] = law.mean;
        j["variance"] = law.variance;
    } else {
        j["kind"] = "poisson";
        j["lambda"] = law.lambda();
    }
    j["centering"] = law.centering;
    j["scaling"] = law.scaling;
    return j;
}

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    j["observable"] = observable_name(s.observable);
    j["model"] = family_name(s.family);
    j["n"] = s.n;
    j["k"] = s.k;
    j["dist"] = s.distribution;
    j["beta"] = s.beta;
    j["replicates"] = s.replicates;
    j["instances"] = s.instances;
    j["gibbs_samples"] = s.gibbs_samples;
    j["sampler"] = s.sampler == SamplerKind::exact ? "exact" : "mcmc";
    j["mcmc_burn_in"] = s.mcmc_burn_in;
    j["mcmc_thin"] = s.mcmc_thin;
    j["seed"] = s.seed;
    j["threads"] = s.threads;
    j["tolerances"] = {{"max_abs_z", s.tol.max_abs_z}, {"var_ratio_lo", s.tol.var_ratio_lo},
                       {"var_ratio_hi", s.tol.var_ratio_hi}, {"ks_max", s.tol.ks_max},
                       {"tv_max", s.tol.tv_max},         {"lln_max", s.tol.lln_max}};
    return j;
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
    nlohmann::json j;
    j["spec"] = to_json(rep.spec);
    j["observable"] = rep.observable;
    j["predicted"] = to_json(rep.predicted);
    j["requested"] = rep.requested;
    j["dropped_replicates"] = rep.dropped_replicates;
    j["runtime_ms"] = rep.runtime_ms;
    j["pass"] = rep.pass;
    for (const auto& [k, v] : rep.extra) j["extra"][k] = finite_or_null(v);
    j["groups"] = nlohmann::json::array();
    for (const auto& g : rep.groups) {
        nlohmann::json gj;
        gj["instance_seed"] = g.instance_seed;
        gj["count"] = g.values.size();
        gj["sample_mean"] = finite_or_null(g.sample_mean);
        gj["sample_variance"] = finite_or_null(g.sample_variance);
        gj["mean_z"] = finite_or_null(g.mean_z);
        gj["var_ratio"] = finite_or_null(g.var_ratio);
        gj["ks_stat"] = finite_or_null(g.ks_stat);
        gj["tv_stat"] = finite_or_null(g.tv_stat);
        gj["acceptance_rate"] = finite_or_null(g.acceptance_rate);
        gj["checks"] = g.checks;
        gj["pass"] = g.pass;
        j["groups"].push_back(gj);
    }
    return j;
}

inline nlohmann::json to_json(const PartitionResult& r) {
    nlohmann::json j;
    j["outcome"] = r.all_infinite() ? "all_infinite" : "finite";
    j["log_z"] = finite_or_null(r.log_z);
    j["dlogz_dbeta"] = finite_or_null(r.dlogz_dbeta);
    j["method"] = method_name(r.method);
    j["beta"] = r.beta;
    j["instance_seed"] = r.instance_seed;
    return j;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
    out << content;
}

}  // namespace gibbslab
