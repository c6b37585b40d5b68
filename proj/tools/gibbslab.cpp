// gibbslab command-line driver.
//
// Exit status: 0 pass, 1 statistical failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gibbslab/cluster.hpp"
#include "gibbslab/io.hpp"
#include "gibbslab/limits.hpp"
#include "gibbslab/models.hpp"
#include "gibbslab/oracles.hpp"
#include "gibbslab/samplers.hpp"
#include "gibbslab/stats.hpp"
#include "gibbslab/weights.hpp"

namespace {

using namespace gibbslab;
using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Settings {
    std::string observable = "logz";
    std::string model = "spanning-tree";
    int n = 10;
    int k = 1;
    std::string dist = "exp:1";
    double beta = 1.0;
    std::size_t replicates = 100;
    std::size_t instances = 3;
    std::size_t gibbs_samples = 1000;
    std::string sampler = "exact";
    std::uint64_t mcmc_burn_in = 0;
    std::uint64_t mcmc_thin = 0;
    std::uint64_t seed = 1;
    int threads = 0;
    double max_abs_z = 3.0;
    double var_ratio_lo = 0.8;
    double var_ratio_hi = 1.2;
    double ks_max = 0.06;
    double tv_max = 0.06;
    double lln_max = 0.01;
    std::string csv;
    std::string json_out;
    std::string plot;
    std::string config;
    std::string method = "specialised";
    bool marginals = false;
    std::size_t count = 10;
    bool edges = false;
};

/// Binds a setting to a CLI option and to a JSON config key of the same name.
class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    void bind(const std::string& key, T& target, const std::string& help) {
        auto* opt = app_->add_option("--" + key, target, help)->capture_default_str();
        from_json_[key] = [&target, opt, key](const json& v) {
            if (opt->count() > 0) return;  // flags win over the file
            try {
                target = v.get<T>();
            } catch (const json::exception&) {
                throw InvalidArgument("config key '" + key + "' has the wrong type");
            }
        };
    }

    void apply_file(const std::string& path) const {
        if (path.empty()) return;
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw InvalidArgument("config file '" + path + "' is not valid JSON: " + e.what());
        }
        if (!doc.is_object()) throw InvalidArgument("config file must hold a JSON object");
        for (const auto& [key, value] : doc.items()) {
            auto norm = key;
            std::replace(norm.begin(), norm.end(), '_', '-');
            const auto it = from_json_.find(norm);
            if (it == from_json_.end()) {
                std::string valid;
                for (const auto& [k, f] : from_json_) valid += (valid.empty() ? "" : ", ") + k;
                throw InvalidArgument("unknown config key '" + key + "' (valid keys: " + valid + ")");
            }
            it->second(value);
        }
    }

private:
    CLI::App* app_;
    std::map<std::string, std::function<void(const json&)>> from_json_;
};

void bind_instance(Binder& b, Settings& s) {
    b.bind("model", s.model, "matching-bipartite | matching-complete | tsp | spanning-tree | k-factor");
    b.bind("n", s.n, "size parameter");
    b.bind("k", s.k, "degree (k-factor only)");
    b.bind("dist", s.dist, "exp[:rate] | uniform[:lo:hi] | censored:keep:<base>");
    b.bind("beta", s.beta, "inverse temperature (>= 0)");
    b.bind("seed", s.seed, "master seed");
}

ExperimentSpec make_spec(const Settings& s) {
    ExperimentSpec spec;
    spec.observable = parse_observable(s.observable);
    spec.family = parse_family(s.model);
    spec.n = s.n;
    spec.k = s.k;
    spec.distribution = s.dist;
    spec.beta = s.beta;
    spec.replicates = s.replicates;
    spec.instances = s.instances;
    spec.gibbs_samples = s.gibbs_samples;
    if (s.sampler == "exact") {
        spec.sampler = SamplerKind::exact;
    } else if (s.sampler == "mcmc") {
        spec.sampler = SamplerKind::mcmc;
    } else {
        throw InvalidArgument("unknown sampler '" + s.sampler + "' (expected exact or mcmc)");
    }
    spec.mcmc_burn_in = s.mcmc_burn_in;
    spec.mcmc_thin = s.mcmc_thin;
    spec.seed = s.seed;
    spec.threads = s.threads;
    spec.tol = Tolerances{s.max_abs_z, s.var_ratio_lo, s.var_ratio_hi, s.ks_max, s.tv_max, s.lln_max};
    spec.validate();
    return spec;
}

int cmd_oracle(const Settings& s) {
    const ProblemModel model(parse_family(s.model), s.n, s.k);
    const auto dist = parse_distribution(s.dist);
    detail::require_beta(s.beta);
    const auto w = sample_weights(dist, model.edge_count(), s.seed);
    PartitionResult r;
    if (s.method == "specialised" || s.method == "specialized") {
        r = log_partition(model, w, s.beta);
    } else if (s.method == "brute-force") {
        r = log_partition_brute_force(model, w, s.beta);
    } else {
        throw InvalidArgument("unknown method '" + s.method + "' (expected specialised or brute-force)");
    }
    json out = to_json(r);
    out["model"] = model.describe();
    out["dist"] = dist.descriptor();
    out["log_zhat"] = r.all_infinite() ? json(nullptr)
                                       : json(r.log_z - static_cast<double>(model.config_size()) * psi(dist, s.beta));
    if (s.marginals && !r.all_infinite()) out["edge_marginals"] = edge_marginals(model, w, s.beta);
    std::cout << out.dump(2) << '\n';
    return kExitPass;
}

int cmd_sample(const Settings& s) {
    const ProblemModel model(parse_family(s.model), s.n, s.k);
    const auto dist = parse_distribution(s.dist);
    detail::require_beta(s.beta);
    const auto w = sample_weights(dist, model.edge_count(), s.seed);
    std::ostringstream os;
    os << "index,weight,typical" << (s.edges ? ",edges" : "") << '\n';
    auto emit = [&](std::size_t i, const GibbsSample& g) {
        const double typ = std::isfinite(g.weight) && s.beta > 0.0 ? typical_weight_observable(g, model, dist, s.beta)
                                                                  : std::nan("");
        os << i << ',' << format_real(g.weight) << ',' << format_real(typ);
        if (s.edges) {
            os << ',';
            for (std::size_t e = 0; e < g.config.edges().size(); ++e) os << (e ? " " : "") << g.config.edges()[e];
        }
        os << '\n';
    };
    if (s.sampler == "exact") {
        ExactSampler sampler(model, w, s.beta);
        for (std::size_t i = 0; i < s.count; ++i) {
            RandomStream rng(derive_seed(s.seed, i + 1));
            emit(i, sampler.sample(rng));
        }
    } else if (s.sampler == "mcmc") {
        const auto sched = ChainSchedule::defaults(model);
        const auto burn = s.mcmc_burn_in ? s.mcmc_burn_in : sched.burn_in;
        const auto thin = s.mcmc_thin ? s.mcmc_thin : sched.thin;
        const auto out = mcmc_run(model, w, s.beta, burn + thin * s.count, burn, derive_seed(s.seed, 1), thin);
        for (std::size_t i = 0; i < out.size(); ++i) emit(i, out[i]);
    } else {
        throw InvalidArgument("unknown sampler '" + s.sampler + "' (expected exact or mcmc)");
    }
    if (s.csv.empty()) {
        std::cout << os.str();
    } else {
        write_file(s.csv, os.str());
    }
    return kExitPass;
}

int cmd_verify(const Settings& s) {
    const auto spec = make_spec(s);
    const auto rep = run_experiment(spec);
    const json summary = to_json(rep);
    if (!s.csv.empty()) {
        std::ostringstream os;
        write_values_csv(os, rep);
        write_file(s.csv, os.str());
    }
    if (!s.plot.empty()) {
        std::ostringstream os;
        write_plot_csv(os, rep);
        write_file(s.plot, os.str());
    }
    if (!s.json_out.empty()) write_file(s.json_out, summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    std::cerr << rep.observable << ": " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return rep.pass ? kExitPass : kExitFail;
}

int cmd_limits(const Settings& s) {
    const ProblemModel model(parse_family(s.model), s.n, s.k);
    const auto dist = parse_distribution(s.dist);
    detail::require_beta(s.beta);
    json out;
    out["model"] = family_name(model.family());
    out["gamma"] = model.gamma();
    out["dist"] = dist.descriptor();
    out["beta"] = s.beta;
    out["psi"] = psi(dist, s.beta);
    out["v_squared"] = v_squared(dist, s.beta);
    out["overlap"] = to_json(overlap_lambda(model, dist, s.beta));
    if (s.beta > 0.0) {
        out["psi_prime"] = psi_prime(dist, s.beta);
        out["psi_double_prime"] = psi_double_prime(dist, s.beta);
        out["logz"] = to_json(logz_limit(model, dist, s.beta));
        out["typical"] = to_json(typical_clt(dist, s.beta));
        out["gibbsavg"] = to_json(gibbs_avg_clt(model, dist, s.beta));
    }
    std::cout << out.dump(2) << '\n';
    return kExitPass;
}

/// Tiny-n equivalence of the specialised oracles against enumeration.
int cmd_selftest(const Settings& s) {
    struct Case {
        Family family;
        int n;
        int k;
    };
    const Case cases[] = {{Family::matching_bipartite, 6, 1}, {Family::matching_complete, 4, 1},
                          {Family::traveling_salesman, 7, 1}, {Family::spanning_tree, 6, 1},
                          {Family::k_factor, 4, 2},          {Family::k_factor, 3, 3}};
    const auto dist = WeightDistribution::exponential();
    int failures = 0;
    for (const auto& c : cases) {
        const ProblemModel model(c.family, c.n, c.k);
        double worst = 0.0;
        for (int rep = 0; rep < 5; ++rep) {
            const auto w = sample_weights(dist, model.edge_count(), derive_seed(s.seed, rep));
            for (double beta : {0.0, 0.25, 1.0, 3.0}) {
                const auto a = log_partition(model, w, beta);
                const auto b = log_partition_brute_force(model, w, beta);
                worst = std::max(worst, std::abs(a.log_z - b.log_z) / std::max(1.0, std::abs(b.log_z)));
                worst = std::max(worst, std::abs(a.dlogz_dbeta - b.dlogz_dbeta) / std::max(1.0, std::abs(b.dlogz_dbeta)));
            }
        }
        const bool ok = worst <= 1e-9;
        failures += ok ? 0 : 1;
        std::cout << (ok ? "PASS " : "FAIL ") << model.describe() << " max relative gap " << worst << '\n';
    }
    return failures == 0 ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gibbs measures on combinatorial configuration families"};
    app.require_subcommand(1);
    Settings s;

    auto* oracle = app.add_subcommand("oracle", "exact log Z for one random instance");
    Binder ob(oracle);
    bind_instance(ob, s);
    ob.bind("method", s.method, "specialised | brute-force");
    oracle->add_flag("--marginals", s.marginals, "also print exact edge marginals");
    oracle->add_option("--config", s.config, "JSON config file");

    auto* sample = app.add_subcommand("sample", "Gibbs samples for one random instance");
    Binder sb(sample);
    bind_instance(sb, s);
    sb.bind("count", s.count, "number of samples");
    sb.bind("sampler", s.sampler, "exact | mcmc");
    sb.bind("mcmc-burn-in", s.mcmc_burn_in, "burn-in proposals (0 = 50 m)");
    sb.bind("mcmc-thin", s.mcmc_thin, "proposals between samples (0 = m)");
    sb.bind("csv", s.csv, "output CSV path (default stdout)");
    sample->add_flag("--edges", s.edges, "include edge lists");
    sample->add_option("--config", s.config, "JSON config file");

    auto* verify = app.add_subcommand("verify", "replicated experiment against its limit law");
    Binder vb(verify);
    bind_instance(vb, s);
    vb.bind("observable", s.observable, "logz | cluster | overlap | typical | gibbsavg | free-energy-lln | ust-stein-chen");
    vb.bind("replicates", s.replicates, "weight instances");
    vb.bind("instances", s.instances, "fixed instances for quenched observables");
    vb.bind("gibbs-samples", s.gibbs_samples, "samples (or pairs) per instance");
    vb.bind("sampler", s.sampler, "exact | mcmc");
    vb.bind("mcmc-burn-in", s.mcmc_burn_in, "burn-in proposals (0 = 50 m)");
    vb.bind("mcmc-thin", s.mcmc_thin, "proposals between samples (0 = m)");
    vb.bind("threads", s.threads, "worker threads (0 = GIBBSLAB_THREADS or all cores)");
    vb.bind("max-abs-z", s.max_abs_z, "mean z-score tolerance");
    vb.bind("var-ratio-lo", s.var_ratio_lo, "variance ratio lower bound");
    vb.bind("var-ratio-hi", s.var_ratio_hi, "variance ratio upper bound");
    vb.bind("ks-max", s.ks_max, "KS tolerance");
    vb.bind("tv-max", s.tv_max, "TV tolerance");
    vb.bind("lln-max", s.lln_max, "free-energy gap tolerance");
    vb.bind("csv", s.csv, "raw values CSV");
    vb.bind("json", s.json_out, "summary JSON");
    vb.bind("plot", s.plot, "plot-data CSV");
    verify->add_option("--config", s.config, "JSON config file");

    auto* limits = app.add_subcommand("limits", "limit-law parameters");
    Binder lb(limits);
    bind_instance(lb, s);
    limits->add_option("--config", s.config, "JSON config file");

    auto* selftest = app.add_subcommand("selftest", "tiny-n oracle equivalence suite");
    Binder tb(selftest);
    tb.bind("seed", s.seed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    try {
        if (oracle->parsed()) {
            ob.apply_file(s.config);
            return cmd_oracle(s);
        }
        if (sample->parsed()) {
            sb.apply_file(s.config);
            return cmd_sample(s);
        }
        if (verify->parsed()) {
            vb.apply_file(s.config);
            return cmd_verify(s);
        }
        if (limits->parsed()) {
            lb.apply_file(s.config);
            return cmd_limits(s);
        }
        return cmd_selftest(s);
    } catch (const gibbslab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
