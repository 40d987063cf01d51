#include "ipsavg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ipsavg/io.hpp"
#include "ipsavg/minimal_semigroup.hpp"
#include "ipsavg/simulator.hpp"
#include "ipsavg/stats.hpp"

namespace ips {

using nlohmann::json;

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "ibp-test") return ExperimentKind::ibp_test;
    if (s == "lyapunov") return ExperimentKind::lyapunov;
    if (s == "averaging-sweep") return ExperimentKind::averaging_sweep;
    if (s == "delta-sweep") return ExperimentKind::delta_sweep;
    if (s == "mc-compare") return ExperimentKind::mc_compare;
    if (s == "moment-bound") return ExperimentKind::moment_bound;
    if (s == "resolvent-check") return ExperimentKind::resolvent_check;
    if (s == "stochasticity-probe") return ExperimentKind::stochasticity_probe;
    throw std::invalid_argument("unknown experiment: " + s);
}

std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::ibp_test: return "ibp-test";
        case ExperimentKind::lyapunov: return "lyapunov";
        case ExperimentKind::averaging_sweep: return "averaging-sweep";
        case ExperimentKind::delta_sweep: return "delta-sweep";
        case ExperimentKind::mc_compare: return "mc-compare";
        case ExperimentKind::moment_bound: return "moment-bound";
        case ExperimentKind::resolvent_check: return "resolvent-check";
        case ExperimentKind::stochasticity_probe: return "stochasticity-probe";
    }
    return "?";
}

EnvChain EnvChainSpec::build(const Domain& dom) const {
    Point w(static_cast<std::size_t>(dom.dim), 0.0);
    if (kind == "two_state") return EnvChain::two_state(z, w);
    if (kind == "two_state_mean") return EnvChain::two_state_mean(mean, w);
    if (kind == "two_state_sizes")
        return EnvChain::two_state_sizes(size_a, size_b, dom);
    if (kind == "resample_poisson")
        return EnvChain::resample_poisson(z, K, dom);
    throw std::invalid_argument("unknown env_chain kind: " + kind);
}

namespace {

json kernel_to_json(const KernelFunction& k) {
    return json{{"shape", to_string(k.shape)},
                {"amplitude", k.amplitude},
                {"range", k.range}};
}

KernelFunction kernel_from_json(const json& j, const KernelFunction& dflt) {
    KernelFunction k = dflt;
    if (j.contains("shape"))
        k.shape = kernel_shape_from_string(j.at("shape").get<std::string>());
    k.amplitude = j.value("amplitude", k.amplitude);
    k.range = j.value("range", k.range);
    return k;
}

json config_to_json(const ExperimentConfig& c) {
    // note: the output directory is delivery plumbing and stays out of the
    // canonical form, so artifacts verify regardless of where they landed
    json j;
    j["experiment"] = to_string(c.experiment);
    j["seed"] = c.seed;
    j["domain"] = json{{"dim", c.domain.dim}, {"side", c.domain.side}};
    j["model"] = json{{"m0", c.model.m0},
                      {"lambda0", c.model.lambda0},
                      {"z", c.model.z},
                      {"delta", c.model.delta},
                      {"a_plus", kernel_to_json(c.model.a_plus)},
                      {"a_minus", kernel_to_json(c.model.a_minus)},
                      {"kappa", kernel_to_json(c.model.kappa)},
                      {"psi", kernel_to_json(c.model.psi)}};
    j["env"] = json{{"kind", to_string(c.env.kind)},
                    {"z", c.env.z},
                    {"epsilon", c.env.epsilon}};
    j["env_chain"] = json{{"kind", c.env_chain.kind},
                          {"z", c.env_chain.z},
                          {"mean", c.env_chain.mean},
                          {"size_a", c.env_chain.size_a},
                          {"size_b", c.env_chain.size_b},
                          {"K", c.env_chain.K}};
    j["truncation"] = json{{"M", c.truncation.M}, {"N", c.truncation.N}};
    j["sweep"] = json{{"epsilons", c.epsilons}, {"deltas", c.deltas}};
    j["time"] = json{{"horizon", c.horizon}, {"points", c.time_points}};
    j["mc"] = json{{"samples", c.samples},
                   {"replicas", c.replicas},
                   {"initial_population", c.initial_population},
                   {"max_population", c.max_population}};
    j["evolve_tol"] = c.evolve_tol;
    j["lyapunov"] = json{{"phi", c.phi},
                         {"c", c.lyapunov_c},
                         {"grid_points", c.grid_points},
                         {"grid_halfwidth", c.grid_halfwidth}};
    j["probe"] = json{{"sizes", c.probe_sizes}, {"time", c.probe_time}};
    return j;
}

}  // namespace

std::string ExperimentConfig::canonical_json() const {
    return config_to_json(*this).dump();
}

std::string ExperimentConfig::hash() const {
    return to_hex(fnv1a64(canonical_json()));
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config JSON parse error: ") +
                                    e.what());
    }
    ExperimentConfig c;
    c.experiment =
        experiment_kind_from_string(j.at("experiment").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.output = j.value("output", c.output);
    if (j.contains("domain")) {
        const auto& d = j["domain"];
        c.domain = Domain(d.value("dim", 1), d.value("side", 1.0));
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.m0 = m.value("m0", c.model.m0);
        c.model.lambda0 = m.value("lambda0", c.model.lambda0);
        c.model.z = m.value("z", c.model.z);
        c.model.delta = m.value("delta", c.model.delta);
        if (m.contains("a_plus"))
            c.model.a_plus = kernel_from_json(m["a_plus"], c.model.a_plus);
        if (m.contains("a_minus"))
            c.model.a_minus = kernel_from_json(m["a_minus"], c.model.a_minus);
        if (m.contains("kappa"))
            c.model.kappa = kernel_from_json(m["kappa"], c.model.kappa);
        if (m.contains("psi"))
            c.model.psi = kernel_from_json(m["psi"], c.model.psi);
    }
    if (j.contains("env")) {
        const auto& e = j["env"];
        if (e.contains("kind"))
            c.env.kind = env_kind_from_string(e["kind"].get<std::string>());
        c.env.z = e.value("z", c.env.z);
        c.env.epsilon = e.value("epsilon", c.env.epsilon);
    }
    if (j.contains("env_chain")) {
        const auto& e = j["env_chain"];
        c.env_chain.kind = e.value("kind", c.env_chain.kind);
        c.env_chain.z = e.value("z", c.env_chain.z);
        c.env_chain.mean = e.value("mean", c.env_chain.mean);
        c.env_chain.size_a = e.value("size_a", c.env_chain.size_a);
        c.env_chain.size_b = e.value("size_b", c.env_chain.size_b);
        c.env_chain.K = e.value("K", c.env_chain.K);
    }
    if (j.contains("truncation")) {
        c.truncation.M = j["truncation"].value("M", c.truncation.M);
        c.truncation.N = j["truncation"].value("N", c.truncation.N);
    }
    if (j.contains("sweep")) {
        if (j["sweep"].contains("epsilons"))
            c.epsilons = j["sweep"]["epsilons"].get<std::vector<double>>();
        if (j["sweep"].contains("deltas"))
            c.deltas = j["sweep"]["deltas"].get<std::vector<double>>();
    }
    if (j.contains("time")) {
        c.horizon = j["time"].value("horizon", c.horizon);
        c.time_points = j["time"].value("points", c.time_points);
    }
    if (j.contains("mc")) {
        const auto& m = j["mc"];
        c.samples = m.value("samples", c.samples);
        c.replicas = m.value("replicas", c.replicas);
        c.initial_population = m.value("initial_population", c.initial_population);
        c.max_population = m.value("max_population", c.max_population);
    }
    c.evolve_tol = j.value("evolve_tol", c.evolve_tol);
    if (j.contains("lyapunov")) {
        const auto& l = j["lyapunov"];
        c.phi = l.value("phi", c.phi);
        c.lyapunov_c = l.value("c", c.lyapunov_c);
        c.grid_points = l.value("grid_points", c.grid_points);
        c.grid_halfwidth = l.value("grid_halfwidth", c.grid_halfwidth);
    }
    if (j.contains("probe")) {
        if (j["probe"].contains("sizes"))
            c.probe_sizes = j["probe"]["sizes"].get<std::vector<int>>();
        c.probe_time = j["probe"].value("time", c.probe_time);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config(read_file(path));
}

namespace {

void check_kernel(const KernelFunction& k, const std::string& path,
                  double side, std::vector<Violation>& out) {
    if (k.amplitude < 0.0)
        out.push_back({path + ".amplitude", "amplitude must be >= 0", false});
    if (!(k.range > 0.0))
        out.push_back({path + ".range", "range must be > 0", false});
    if (k.range > 0.5 * side)
        out.push_back({path + ".range",
                       "kernel range exceeds half the torus side; "
                       "minimum-image periodization is crude",
                       true});
}

}  // namespace

std::vector<Violation> validate(const ExperimentConfig& c) {
    std::vector<Violation> v;
    if (c.domain.dim < 1)
        v.push_back({"domain.dim", "dim must be >= 1", false});
    if (!(c.domain.side > 0.0))
        v.push_back({"domain.side", "side must be > 0", false});
    if (c.model.m0 < 0.0) v.push_back({"model.m0", "must be >= 0", false});
    if (c.model.lambda0 < 0.0)
        v.push_back({"model.lambda0", "must be >= 0", false});
    if (c.model.z < 0.0) v.push_back({"model.z", "must be >= 0", false});
    if (c.model.delta < 0.0)
        v.push_back({"model.delta", "must be >= 0", false});
    check_kernel(c.model.a_plus, "model.a_plus", c.domain.side, v);
    check_kernel(c.model.a_minus, "model.a_minus", c.domain.side, v);
    check_kernel(c.model.kappa, "model.kappa", c.domain.side, v);
    check_kernel(c.model.psi, "model.psi", c.domain.side, v);
    if (c.model.a_plus.range > 0.0 &&
        std::fabs(kernel_mass(c.model.a_plus, c.domain.dim) - 1.0) > 1e-9)
        v.push_back(
            {"model.a_plus", "a_plus must be a probability density", false});
    if (!(c.env.epsilon > 0.0))
        v.push_back({"env.epsilon", "epsilon must be positive", false});
    else if (c.env.epsilon > 1.0)
        v.push_back({"env.epsilon", "epsilon must be in (0,1]", false});
    if (c.env.z < 0.0) v.push_back({"env.z", "must be >= 0", false});
    if (c.truncation.M < 1 || c.truncation.M > 24)
        v.push_back({"truncation.M", "M must be in [1,24]", false});
    if (c.truncation.N < 0)
        v.push_back({"truncation.N", "N must be >= 0", false});
    else if (c.truncation.N > c.truncation.M)
        v.push_back({"truncation.N", "N must not exceed M", false});
    if (c.epsilons.empty())
        v.push_back({"sweep.epsilons", "must not be empty", false});
    for (double e : c.epsilons)
        if (!(e > 0.0)) {
            v.push_back({"sweep.epsilons", "epsilon must be positive", false});
            break;
        }
    for (double d : c.deltas)
        if (d < 0.0) {
            v.push_back({"sweep.deltas", "delta must be >= 0", false});
            break;
        }
    if (!(c.horizon > 0.0))
        v.push_back({"time.horizon", "must be > 0", false});
    if (c.time_points < 2)
        v.push_back({"time.points", "need at least 2 grid points", false});
    if (c.samples < 1) v.push_back({"mc.samples", "must be >= 1", false});
    if (c.replicas < 1) v.push_back({"mc.replicas", "must be >= 1", false});
    if (c.initial_population < 0)
        v.push_back({"mc.initial_population", "must be >= 0", false});
    if (c.max_population < 1)
        v.push_back({"mc.max_population", "must be >= 1", false});
    if (c.experiment == ExperimentKind::averaging_sweep ||
        c.experiment == ExperimentKind::delta_sweep ||
        c.experiment == ExperimentKind::moment_bound) {
        if (c.initial_population > c.truncation.N)
            v.push_back({"mc.initial_population",
                         "exceeds the truncation cap N", false});
    }
    if (c.env_chain.kind != "two_state" &&
        c.env_chain.kind != "two_state_mean" &&
        c.env_chain.kind != "two_state_sizes" &&
        c.env_chain.kind != "resample_poisson")
        v.push_back({"env_chain.kind", "unknown chain kind", false});
    if (c.env_chain.kind == "two_state" && !(c.env_chain.z > 0.0))
        v.push_back({"env_chain.z", "two_state chain needs z > 0", false});
    if (c.env_chain.kind == "two_state_mean" &&
        !(c.env_chain.mean > 0.0 && c.env_chain.mean < 1.0))
        v.push_back({"env_chain.mean", "mean must be in (0,1)", false});
    if (c.env_chain.kind == "resample_poisson" && c.env_chain.K < 2)
        v.push_back({"env_chain.K", "resample chain needs K >= 2", false});
    if (c.phi != "constant" && c.phi != "one_plus_sq")
        v.push_back({"lyapunov.phi", "unknown phi", false});
    if (c.grid_points < 1)
        v.push_back({"lyapunov.grid_points", "must be >= 1", false});
    if (!(c.grid_halfwidth > 0.0))
        v.push_back({"lyapunov.grid_halfwidth", "must be > 0", false});
    if (c.probe_sizes.size() < 2)
        v.push_back({"probe.sizes", "need at least two sizes", false});
    for (std::size_t i = 0; i + 1 < c.probe_sizes.size(); ++i)
        if (c.probe_sizes[i] >= c.probe_sizes[i + 1]) {
            v.push_back({"probe.sizes", "sizes must be strictly increasing",
                         false});
            break;
        }
    if (!c.probe_sizes.empty() && c.probe_sizes.front() < 2)
        v.push_back({"probe.sizes", "sizes must be >= 2", false});
    if (!(c.probe_time > 0.0))
        v.push_back({"probe.time", "must be > 0", false});
    if (!(c.evolve_tol > 0.0))
        v.push_back({"evolve_tol", "must be > 0", false});
    return v;
}

namespace {

namespace fs = std::filesystem;

// Fixed spec thresholds for the sweep experiments.
constexpr double kAveragingThreshold = 1e-2;
constexpr double kDeltaThreshold = 1e-3;
constexpr double kSlopeThreshold = 0.9;

std::vector<double> make_t_grid(double horizon, int points) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[static_cast<std::size_t>(i)] =
            horizon * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

std::vector<std::pair<std::string, std::string>> stanza_of(
    const ExperimentConfig& cfg) {
    // the integration window is spelled out so every artifact is
    // self-describing about the box it was computed on
    return {{"experiment", to_string(cfg.experiment)},
            {"config_hash", cfg.hash()},
            {"seed", std::to_string(cfg.seed)},
            {"version", kVersion},
            {"window",
             "dim=" + std::to_string(cfg.domain.dim) +
                 ",side=" + format_double(cfg.domain.side)}};
}

std::string artifact_path(const std::string& out_dir, const std::string& name) {
    return (fs::path(out_dir) / name).string();
}

DensityVector initial_density(const TruncatedSpace& sp, int population) {
    if (population < 0 || population > sp.cap())
        throw std::invalid_argument(
            "initial population outside the truncation");
    const std::uint32_t mask =
        population == 0 ? 0u : ((1u << population) - 1u);
    return DensityVector::point_mass(sp.size(), sp.index_of(mask));
}

struct ExperimentOutcome {
    bool pass = false;
    json detail;
    std::vector<std::string> artifacts;
};

// ---------------------------------------------------------------- ibp-test

ExperimentOutcome run_ibp(const ExperimentConfig& cfg,
                          const std::string& out_dir, Exec exec) {
    using G2 = std::function<double(const Configuration&, const Configuration&)>;
    struct Item {
        std::string name;
        G2 g;
    };
    std::vector<Item> battery;
    battery.push_back(
        {"indicator_both_empty", [](const Configuration& xi, const Configuration& eta) {
             return (xi.empty() && eta.empty()) ? 1.0 : 0.0;
         }});
    battery.push_back(
        {"geometric_half_half", [](const Configuration& xi, const Configuration& eta) {
             return std::pow(0.5, static_cast<double>(xi.size())) *
                    std::pow(0.5, static_cast<double>(eta.size()));
         }});
    battery.push_back(
        {"size_times_empty", [](const Configuration& xi, const Configuration& eta) {
             return eta.empty() ? static_cast<double>(xi.size()) : 0.0;
         }});
    // two random separable products f^xi * g^eta with smooth positive factors
    Rng gen_rng = Rng::derive(cfg.seed, 901);
    for (int r = 0; r < 2; ++r) {
        const double a1 = gen_rng.uniform(0.2, 0.6);
        const double b1 = gen_rng.uniform(0.0, 0.4);
        const double a2 = gen_rng.uniform(0.2, 0.6);
        const double b2 = gen_rng.uniform(0.0, 0.4);
        const double L = cfg.domain.side;
        battery.push_back(
            {"random_separable_" + std::to_string(r + 1),
             [a1, b1, a2, b2, L](const Configuration& xi, const Configuration& eta) {
                 double prod = 1.0;
                 for (const Point& x : xi.points)
                     prod *= a1 + b1 * std::sin(2.0 * std::numbers::pi * x[0] / L) *
                                      std::sin(2.0 * std::numbers::pi * x[0] / L);
                 for (const Point& y : eta.points)
                     prod *= a2 + b2 * std::cos(2.0 * std::numbers::pi * y[0] / L) *
                                      std::cos(2.0 * std::numbers::pi * y[0] / L);
                 return prod;
             }});
    }

    CsvWriter csv(artifact_path(out_dir, "ibp_test.csv"), stanza_of(cfg),
                  {"g_id", "description", "lhs", "lhs_se", "rhs", "rhs_se",
                   "combined_se", "abs_diff", "pass"});
    ExperimentOutcome out;
    out.pass = true;
    json items = json::array();
    for (std::size_t i = 0; i < battery.size(); ++i) {
        Rng rng = Rng::derive(cfg.seed, 910 + i);
        const IbpReport rep =
            verify_ibp(battery[i].g, cfg.domain, cfg.samples, rng, exec);
        csv.row({std::to_string(i), battery[i].name, format_double(rep.lhs),
                 format_double(rep.lhs_se), format_double(rep.rhs),
                 format_double(rep.rhs_se), format_double(rep.combined_se),
                 format_double(std::fabs(rep.lhs - rep.rhs)),
                 rep.pass ? "1" : "0"});
        items.push_back(json{{"name", battery[i].name},
                             {"lhs", rep.lhs},
                             {"rhs", rep.rhs},
                             {"combined_se", rep.combined_se},
                             {"pass", rep.pass}});
        if (!rep.pass) out.pass = false;
    }
    csv.close();
    out.detail["battery"] = items;
    out.artifacts.push_back(artifact_path(out_dir, "ibp_test.csv"));
    return out;
}

// ---------------------------------------------------------------- lyapunov

ExperimentOutcome run_lyapunov(const ExperimentConfig& cfg,
                               const std::string& out_dir, Exec) {
    CsvWriter csv(artifact_path(out_dir, "lyapunov.csv"), stanza_of(cfg),
                  {"check", "index", "x", "margin", "holds"});

    std::function<double(const Point&)> phi;
    if (cfg.phi == "constant")
        phi = [](const Point&) { return 1.0; };
    else
        phi = [](const Point& x) {
            double s = 0.0;
            for (double c : x) s += c * c;
            return 1.0 + s;
        };
    std::vector<Point> grid;
    for (int i = 0; i < cfg.grid_points; ++i) {
        const double x = cfg.grid_points == 1
                             ? 0.0
                             : -cfg.grid_halfwidth +
                                   2.0 * cfg.grid_halfwidth *
                                       static_cast<double>(i) /
                                       static_cast<double>(cfg.grid_points - 1);
        grid.push_back(Point{x});
    }
    const LyapunovReport log_rep = lyapunov_check_logistic(
        cfg.model, cfg.domain.dim, phi, grid, cfg.lyapunov_c);
    csv.row({"logistic", "0",
             log_rep.worst_x.empty() ? "" : format_double(log_rep.worst_x[0]),
             format_double(log_rep.worst_margin), log_rep.holds ? "1" : "0"});

    // drift of V = |eta| for the built averaged generator; c covers the
    // worst-site net growth of the chain-averaged rates
    const SiteLattice lat = SiteLattice::uniform(cfg.domain, cfg.truncation.M);
    const TruncatedSpace sp =
        TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
    const EnvChain chain = cfg.env_chain.build(cfg.domain);
    const SparseGenerator Q =
        build_averaged_generator(sp, lat, chain, cfg.model, cfg.domain, 0.0);
    double lam_max = 0.0, m_min = std::numeric_limits<double>::infinity();
    for (const Point& site : lat.sites) {
        double lam = 0.0, m = 0.0;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            lam += chain.mu[k] * fecundity(site, chain.states[k], cfg.model,
                                           cfg.domain);
            double death = cfg.model.m0;
            for (const Point& w : chain.states[k].points)
                death += eval_kernel(cfg.model.kappa, cfg.domain, site, w);
            m += chain.mu[k] * death;
        }
        lam_max = std::max(lam_max, lam);
        m_min = std::min(m_min, m);
    }
    const double c_drift = std::max(0.0, lam_max - m_min);
    std::vector<double> V(sp.size());
    for (std::size_t s = 0; s < sp.size(); ++s)
        V[s] = static_cast<double>(sp.popcount(s));
    const GeneratorDriftReport drift_rep =
        generic_lyapunov_check(Q, V, c_drift, 0.0);
    csv.row({"generic", std::to_string(drift_rep.worst_row), "",
             format_double(drift_rep.worst_margin),
             drift_rep.holds ? "1" : "0"});
    csv.close();

    ExperimentOutcome out;
    out.pass = log_rep.holds && drift_rep.holds;
    out.detail["logistic"] = json{{"holds", log_rep.holds},
                                  {"worst_margin", log_rep.worst_margin}};
    out.detail["generic"] = json{{"holds", drift_rep.holds},
                                 {"worst_margin", drift_rep.worst_margin},
                                 {"c", c_drift}};
    out.artifacts.push_back(artifact_path(out_dir, "lyapunov.csv"));
    return out;
}

// ---------------------------------------------------------- averaging-sweep

ExperimentOutcome run_averaging(const ExperimentConfig& cfg,
                                const std::string& out_dir, Exec exec) {
    const SiteLattice lat = SiteLattice::uniform(cfg.domain, cfg.truncation.M);
    const TruncatedSpace sp =
        TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
    const EnvChain chain = cfg.env_chain.build(cfg.domain);
    const std::vector<double> t_grid = make_t_grid(cfg.horizon, cfg.time_points);
    const DensityVector rho0 = initial_density(sp, cfg.initial_population);

    const SweepTable table =
        averaging_error(sp, lat, chain, cfg.model, cfg.domain, cfg.epsilons,
                        cfg.model.delta, t_grid, rho0, cfg.evolve_tol, exec);

    CsvWriter csv(artifact_path(out_dir, "averaging_sweep.csv"), stanza_of(cfg),
                  {"epsilon", "t", "error", "tv_error"});
    for (const SweepRow& r : table.rows)
        csv.row_values({r.param, r.t, r.error, r.tv_error});
    csv.close();
    CsvWriter sup_csv(artifact_path(out_dir, "averaging_sweep_sup.csv"),
                      stanza_of(cfg), {"epsilon", "sup_error"});
    std::vector<double> eps_sorted = cfg.epsilons;
    std::sort(eps_sorted.rbegin(), eps_sorted.rend());
    for (double e : eps_sorted) sup_csv.row_values({e, table.sup_error.at(e)});
    sup_csv.close();
    build_averaged_generator(sp, lat, chain, cfg.model, cfg.domain,
                             cfg.model.delta)
        .write_triplet_csv(
            artifact_path(out_dir, "averaging_generator_triplets.csv"),
            stanza_of(cfg));

    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < eps_sorted.size(); ++i)
        if (!(table.sup_error.at(eps_sorted[i + 1]) <
              table.sup_error.at(eps_sorted[i])))
            decreasing = false;
    const double final_error = table.sup_error.at(eps_sorted.back());

    // norm bound of every damped forward system generator used by the sweep
    bool norms_pass = true;
    double worst_norm_margin = std::numeric_limits<double>::infinity();
    if (cfg.model.delta > 0.0) {
        for (const Configuration& gamma : chain.states) {
            const SparseGenerator g =
                build_system_generator(sp, lat, gamma, cfg.model, cfg.domain,
                                       cfg.model.delta)
                    .transposed();
            const NormCheckReport nc = operator_norm_check(g, cfg.model.delta);
            norms_pass = norms_pass && nc.pass;
            worst_norm_margin = std::min(worst_norm_margin, nc.bound - nc.norm);
        }
    }

    ExperimentOutcome out;
    out.pass = decreasing && final_error < kAveragingThreshold && norms_pass;
    out.detail["strictly_decreasing"] = decreasing;
    out.detail["final_epsilon"] = eps_sorted.back();
    out.detail["final_sup_error"] = final_error;
    out.detail["threshold"] = kAveragingThreshold;
    out.detail["norm_checks_pass"] = norms_pass;
    if (cfg.model.delta > 0.0)
        out.detail["worst_norm_margin"] = worst_norm_margin;
    out.artifacts = {
        artifact_path(out_dir, "averaging_sweep.csv"),
        artifact_path(out_dir, "averaging_sweep_sup.csv"),
        artifact_path(out_dir, "averaging_generator_triplets.csv")};
    return out;
}

// -------------------------------------------------------------- delta-sweep

ExperimentOutcome run_delta(const ExperimentConfig& cfg,
                            const std::string& out_dir, Exec exec) {
    const SiteLattice lat = SiteLattice::uniform(cfg.domain, cfg.truncation.M);
    const TruncatedSpace sp =
        TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
    const EnvChain chain = cfg.env_chain.build(cfg.domain);
    const std::vector<double> t_grid = make_t_grid(cfg.horizon, cfg.time_points);
    const DensityVector rho0 = initial_density(sp, cfg.initial_population);

    const SweepTable table =
        delta_error(sp, lat, chain, cfg.model, cfg.domain, cfg.deltas, t_grid,
                    rho0, cfg.evolve_tol, exec);

    CsvWriter csv(artifact_path(out_dir, "delta_sweep.csv"), stanza_of(cfg),
                  {"delta", "t", "error"});
    for (const SweepRow& r : table.rows) csv.row_values({r.param, r.t, r.error});
    csv.close();
    CsvWriter sup_csv(artifact_path(out_dir, "delta_sweep_sup.csv"),
                      stanza_of(cfg), {"delta", "sup_error"});
    std::vector<double> deltas_sorted = cfg.deltas;
    std::sort(deltas_sorted.rbegin(), deltas_sorted.rend());
    for (double d : deltas_sorted)
        sup_csv.row_values({d, table.sup_error.at(d)});
    sup_csv.close();

    bool decreasing = true;
    std::vector<double> log_d, log_e;
    for (std::size_t i = 0; i < deltas_sorted.size(); ++i) {
        const double d = deltas_sorted[i];
        const double e = table.sup_error.at(d);
        if (i + 1 < deltas_sorted.size() &&
            !(table.sup_error.at(deltas_sorted[i + 1]) < e))
            decreasing = false;
        if (d > 0.0 && e > 0.0) {
            log_d.push_back(std::log(d));
            log_e.push_back(std::log(e));
        }
    }
    const double slope =
        log_d.size() >= 2 ? ols_slope(log_d, log_e) : 0.0;
    double final_error = 0.0;
    for (double d : deltas_sorted)
        if (d > 0.0) final_error = table.sup_error.at(d);

    bool norms_pass = true;
    for (double d : cfg.deltas) {
        if (!(d > 0.0)) continue;
        for (const Configuration& gamma : chain.states) {
            const SparseGenerator g =
                build_system_generator(sp, lat, gamma, cfg.model, cfg.domain, d)
                    .transposed();
            norms_pass = norms_pass && operator_norm_check(g, d).pass;
        }
    }

    ExperimentOutcome out;
    out.pass = decreasing && slope >= kSlopeThreshold &&
               final_error < kDeltaThreshold && norms_pass;
    out.detail["strictly_decreasing"] = decreasing;
    out.detail["slope"] = slope;
    out.detail["slope_threshold"] = kSlopeThreshold;
    out.detail["final_sup_error"] = final_error;
    out.detail["threshold"] = kDeltaThreshold;
    out.detail["norm_checks_pass"] = norms_pass;
    out.artifacts = {artifact_path(out_dir, "delta_sweep.csv"),
                     artifact_path(out_dir, "delta_sweep_sup.csv")};
    return out;
}

// --------------------------------------------------------------- mc-compare

ExperimentOutcome run_mc_compare(const ExperimentConfig& cfg,
                                 const std::string& out_dir, Exec exec) {
    const int n0 = cfg.initial_population;
    const InitSampler init = [n0](const Domain& dom, Rng& rng) {
        std::vector<Point> pts;
        for (int i = 0; i < n0; ++i) {
            Point x(static_cast<std::size_t>(dom.dim));
            for (int d = 0; d < dom.dim; ++d) x[d] = rng.uniform(0.0, dom.side);
            pts.push_back(std::move(x));
        }
        return Configuration(std::move(pts));
    };
    SimConfig sim;
    sim.horizon = cfg.horizon;
    sim.record_times = make_t_grid(cfg.horizon, cfg.time_points);
    sim.max_population = cfg.max_population;

    const auto coupled = run_ensemble(
        cfg.replicas, Rng::mix(cfg.seed ^ 0x11), exec,
        [&](Rng& rng, std::size_t) {
            return simulate_coupled(cfg.model, cfg.env, init, sim,
                                    cfg.domain, rng);
        });
    EnvSpec quenched_env = cfg.env;
    quenched_env.kind = EnvKind::frozen;
    const auto quenched = run_ensemble(
        cfg.replicas, Rng::mix(cfg.seed ^ 0x22), exec,
        [&](Rng& rng, std::size_t) {
            return simulate_coupled(cfg.model, quenched_env, init, sim,
                                    cfg.domain, rng);
        });
    const auto averaged = run_ensemble(
        cfg.replicas, Rng::mix(cfg.seed ^ 0x33), exec,
        [&](Rng& rng, std::size_t) {
            return simulate_averaged(cfg.model, init, sim, cfg.domain, rng);
        });

    // exact forward-equation marginal of the population at the horizon
    if (cfg.truncation.M < n0)
        throw std::invalid_argument(
            "mc-compare: truncation.M must cover the initial population");
    const SiteLattice lat = SiteLattice::uniform(cfg.domain, cfg.truncation.M);
    const TruncatedSpace sp =
        TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
    const EnvChain chain = cfg.env_chain.build(cfg.domain);
    const SparseGenerator G_joint =
        build_joint_generator(sp, lat, chain, cfg.model, cfg.domain,
                              cfg.env.epsilon, 0.0);
    const std::size_t S = sp.size();
    DensityVector joint0;
    joint0.values.assign(S * chain.size(), 0.0);
    const DensityVector sys0 = initial_density(sp, n0);
    for (std::size_t k = 0; k < chain.size(); ++k)
        for (std::size_t s = 0; s < S; ++s)
            joint0.values[s + S * k] = sys0.values[s] * chain.mu[k];
    const DensityVector joint_t =
        evolve(joint0, G_joint, cfg.horizon, EvolveMethod::uniformization,
               cfg.evolve_tol, exec);
    std::vector<double> fp_probs(static_cast<std::size_t>(n0) + 1, 0.0);
    for (std::size_t k = 0; k < chain.size(); ++k)
        for (std::size_t s = 0; s < S; ++s) {
            const int n = sp.popcount(s);
            if (n <= n0) fp_probs[static_cast<std::size_t>(n)] +=
                joint_t.values[s + S * k];
        }

    const auto histogram = [&](const std::vector<Trajectory>& ens) {
        std::vector<std::size_t> h(static_cast<std::size_t>(n0) + 1, 0);
        for (const Trajectory& tr : ens) {
            const std::size_t n = tr.population_at(cfg.horizon);
            if (n < h.size()) ++h[n];
        }
        return h;
    };
    const auto h_coupled = histogram(coupled);
    const auto h_quenched = histogram(quenched);
    const auto h_averaged = histogram(averaged);

    const Chi2Result chi_coupled = chi2_gof(h_coupled, fp_probs);
    const Chi2Result chi_quenched = chi2_gof(h_quenched, fp_probs);

    Rng boot_rng = Rng::derive(cfg.seed, 944);
    const DistanceReport dist =
        compare_ensembles(coupled, averaged, cfg.horizon, cfg.domain, boot_rng);
    std::vector<double> pop_coupled(coupled.size()), pop_avg(averaged.size());
    for (std::size_t i = 0; i < coupled.size(); ++i)
        pop_coupled[i] =
            static_cast<double>(coupled[i].population_at(cfg.horizon));
    for (std::size_t i = 0; i < averaged.size(); ++i)
        pop_avg[i] = static_cast<double>(averaged[i].population_at(cfg.horizon));
    const double ks_pop = ks_statistic(pop_coupled, pop_avg);
    const double ks_crit = ks_critical(1e-3, coupled.size(), averaged.size());

    // artifacts
    CsvWriter hist_csv(artifact_path(out_dir, "mc_compare_hist.csv"),
                       stanza_of(cfg),
                       {"k", "fp_prob", "coupled", "quenched", "averaged"});
    for (int k = 0; k <= n0; ++k)
        hist_csv.row({std::to_string(k),
                      format_double(fp_probs[static_cast<std::size_t>(k)]),
                      std::to_string(h_coupled[static_cast<std::size_t>(k)]),
                      std::to_string(h_quenched[static_cast<std::size_t>(k)]),
                      std::to_string(h_averaged[static_cast<std::size_t>(k)])});
    hist_csv.close();

    CsvWriter rep_csv(artifact_path(out_dir, "mc_compare_replicas.csv"),
                      stanza_of(cfg),
                      {"ensemble", "seed", "t", "population",
                       "subwindow_count", "nn_distance"});
    const auto dump_ensemble = [&](const char* name,
                                   const std::vector<Trajectory>& ens) {
        for (std::size_t r = 0; r < ens.size(); ++r) {
            for (std::size_t ti = 0; ti < ens[r].record_times.size(); ++ti) {
                const Configuration& c = ens[r].states[ti];
                rep_csv.row({name, std::to_string(ens[r].seed),
                             format_double(ens[r].record_times[ti]),
                             format_double(observable_population(c, cfg.domain)),
                             format_double(observable_subwindow(c, cfg.domain)),
                             format_double(observable_nn_distance(c, cfg.domain))});
            }
        }
    };
    dump_ensemble("coupled", coupled);
    dump_ensemble("quenched", quenched);
    dump_ensemble("averaged", averaged);
    rep_csv.close();

    CsvWriter dist_csv(artifact_path(out_dir, "mc_compare_distances.csv"),
                       stanza_of(cfg),
                       {"observable", "ks", "ks_lo", "ks_hi", "w1", "w1_lo",
                        "w1_hi"});
    for (const DistanceRow& r : dist.rows)
        dist_csv.row({r.observable, format_double(r.ks), format_double(r.ks_lo),
                      format_double(r.ks_hi), format_double(r.w1),
                      format_double(r.w1_lo), format_double(r.w1_hi)});
    dist_csv.close();

    const double model_beta = beta(cfg.model, cfg.domain.dim);
    const bool coupled_pass = chi_coupled.p_value > 1e-3;
    const bool quenched_pass =
        model_beta == 0.0 ? true : chi_quenched.p_value < 1e-3;
    const bool ks_pass = ks_pop <= ks_crit;

    ExperimentOutcome out;
    out.pass = coupled_pass && quenched_pass && ks_pass;
    out.detail["chi2_coupled"] = json{{"stat", chi_coupled.stat},
                                      {"df", chi_coupled.df},
                                      {"p_value", chi_coupled.p_value},
                                      {"pass", coupled_pass}};
    out.detail["chi2_quenched"] = json{{"stat", chi_quenched.stat},
                                       {"df", chi_quenched.df},
                                       {"p_value", chi_quenched.p_value},
                                       {"pass", quenched_pass}};
    out.detail["ks_coupled_vs_averaged"] =
        json{{"ks", ks_pop}, {"critical", ks_crit}, {"pass", ks_pass}};
    out.detail["beta"] = model_beta;
    out.artifacts = {artifact_path(out_dir, "mc_compare_hist.csv"),
                     artifact_path(out_dir, "mc_compare_replicas.csv"),
                     artifact_path(out_dir, "mc_compare_distances.csv")};
    return out;
}

// ------------------------------------------------------------- moment-bound

ExperimentOutcome run_moment_bound(const ExperimentConfig& cfg,
                                   const std::string& out_dir, Exec) {
    const SiteLattice lat = SiteLattice::uniform(cfg.domain, cfg.truncation.M);
    const TruncatedSpace sp =
        TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
    const EnvChain chain = cfg.env_chain.build(cfg.domain);
    const std::vector<double> t_grid = make_t_grid(cfg.horizon, cfg.time_points);
    const DensityVector rho0 = initial_density(sp, cfg.initial_population);

    const MomentBoundReport rep = moment_bound_check(
        sp, lat, chain, cfg.model, cfg.domain, rho0, t_grid, 1e-8);

    CsvWriter csv(artifact_path(out_dir, "moment_bound.csv"), stanza_of(cfg),
                  {"t", "moment", "bound", "boundary_mass", "ok"});
    for (const MomentBoundRow& r : rep.rows)
        csv.row({format_double(r.t), format_double(r.moment),
                 format_double(r.bound), format_double(r.boundary_mass),
                 r.ok ? "1" : "0"});
    csv.close();

    ExperimentOutcome out;
    out.pass = rep.holds && !rep.truncation_limited;
    out.detail["beta"] = rep.beta;
    out.detail["holds"] = rep.holds;
    out.detail["truncation_limited"] = rep.truncation_limited;
    out.artifacts.push_back(artifact_path(out_dir, "moment_bound.csv"));
    return out;
}

// ---------------------------------------------------------- resolvent-check

ExperimentOutcome run_resolvent(const ExperimentConfig& cfg,
                                const std::string& out_dir, Exec) {
    CsvWriter csv(artifact_path(out_dir, "resolvent_check.csv"), stanza_of(cfg),
                  {"instance", "size", "value", "reference", "abs_error"});
    ExperimentOutcome out;
    out.pass = true;

    const auto compare_with_dense = [&](const std::string& name,
                                        const SplitGenerator& sg,
                                        const DensityVector& nu, double a,
                                        int n_terms) {
        const DensityVector series = resolvent_series(sg, a, 1.0, nu, n_terms);
        // dense solve of (a - G) x = nu
        const std::size_t n = sg.dim();
        std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
        for (const Triplet& t : sg.to_forward().to_triplets())
            A[t.row][t.col] -= t.value;
        for (std::size_t i = 0; i < n; ++i) A[i][i] += a;
        const std::vector<double> x = dense_solve(A, nu.values);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            err = std::max(err, std::fabs(series.values[i] - x[i]));
        double series_mass = 0.0, dense_mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            series_mass += series.values[i];
            dense_mass += x[i];
        }
        csv.row({name, std::to_string(n), format_double(series_mass),
                 format_double(dense_mass), format_double(err)});
        out.detail[name] = json{{"max_abs_error", err}};
        if (err > 1e-8) out.pass = false;
    };

    // conservative three-state cycle
    {
        SplitGenerator cycle;
        cycle.q = {1.0, 1.0, 1.0};
        cycle.B = SparseGenerator::from_triplets(
            3, Orientation::forward,
            {Triplet{1, 0, 1.0}, Triplet{2, 1, 1.0}, Triplet{0, 2, 1.0}},
            false);
        DensityVector nu = DensityVector::point_mass(3, 0);
        compare_with_dense("cycle3", cycle, nu, 1.0, 200);
    }
    // conservative lattice instance
    {
        const SiteLattice lat =
            SiteLattice::uniform(cfg.domain, cfg.truncation.M);
        const TruncatedSpace sp =
            TruncatedSpace::enumerate(cfg.truncation.M, cfg.truncation.N);
        const EnvChain chain = cfg.env_chain.build(cfg.domain);
        const SparseGenerator G =
            build_averaged_generator(sp, lat, chain, cfg.model, cfg.domain, 0.0)
                .transposed();
        const SplitGenerator sg = SplitGenerator::from_forward(G);
        const DensityVector nu = initial_density(sp, cfg.initial_population);
        compare_with_dense("averaged_lattice", sg, nu, 1.0, 400);
    }
    // explosive pure-birth resolvent mass defect across truncations
    {
        json defects = json::array();
        double prev = 1.0;
        bool monotone = true;
        for (int M : cfg.probe_sizes) {
            const SplitGenerator sg = pure_birth_truncation(
                [](int i) { return static_cast<double>(i) * static_cast<double>(i); },
                M);
            const DensityVector nu = DensityVector::point_mass(sg.dim(), 1);
            const DensityVector res = resolvent_series(sg, 1.0, 1.0, nu, M + 2);
            const double defect = 1.0 - res.mass();
            csv.row({"explosive_resolvent", std::to_string(M),
                     format_double(res.mass()), "1", format_double(defect)});
            defects.push_back(json{{"M", M}, {"defect", defect}});
            if (defect > prev + 1e-12) monotone = false;
            prev = defect;
        }
        out.detail["explosive_resolvent"] =
            json{{"defects", defects},
                 {"monotone_nonincreasing", monotone},
                 {"final_defect", prev}};
        if (!monotone || !(prev > 0.1)) out.pass = false;
    }
    csv.close();
    out.artifacts.push_back(artifact_path(out_dir, "resolvent_check.csv"));
    return out;
}

// ----------------------------------------------------- stochasticity-probe

ExperimentOutcome run_probe(const ExperimentConfig& cfg,
                            const std::string& out_dir, Exec) {
    CsvWriter csv(artifact_path(out_dir, "stochasticity_probe.csv"),
                  stanza_of(cfg), {"family", "N", "t", "defect"});
    ExperimentOutcome out;

    const auto run_family = [&](const std::string& name,
                                const std::function<SplitGenerator(int)>& make)
        -> ProbeReport {
        std::vector<SplitGenerator> family;
        for (int n : cfg.probe_sizes) family.push_back(make(n));
        const ProbeReport rep = stochasticity_probe(
            family, cfg.probe_sizes, cfg.probe_time, 1, cfg.evolve_tol, 1e-6);
        for (std::size_t i = 0; i < rep.sizes.size(); ++i)
            csv.row({name, std::to_string(rep.sizes[i]),
                     format_double(cfg.probe_time),
                     format_double(rep.defects[i])});
        out.detail[name] = json{{"verdict", rep.verdict},
                                {"extrapolated_defect", rep.extrapolated_defect},
                                {"final_defect", rep.defects.back()}};
        return rep;
    };

    const ProbeReport linear = run_family("linear_birth_death", [](int n) {
        return birth_death_truncation(
            [](int i) { return 1.0 * static_cast<double>(i); },
            [](int i) { return 0.5 * static_cast<double>(i); }, n);
    });
    const ProbeReport quadratic = run_family("quadratic_pure_birth", [](int n) {
        return pure_birth_truncation(
            [](int i) { return static_cast<double>(i) * static_cast<double>(i); },
            n);
    });
    csv.close();

    out.pass = linear.verdict == "stochastic" &&
               linear.defects.back() < 1e-6 &&
               quadratic.verdict == "possible explosion" &&
               quadratic.defects.back() > 0.1;
    out.artifacts.push_back(artifact_path(out_dir, "stochasticity_probe.csv"));
    return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         Exec exec) {
    RunResult result;
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    ExperimentOutcome outcome;
    try {
        switch (cfg.experiment) {
            case ExperimentKind::ibp_test:
                outcome = run_ibp(cfg, out_dir, exec);
                break;
            case ExperimentKind::lyapunov:
                outcome = run_lyapunov(cfg, out_dir, exec);
                break;
            case ExperimentKind::averaging_sweep:
                outcome = run_averaging(cfg, out_dir, exec);
                break;
            case ExperimentKind::delta_sweep:
                outcome = run_delta(cfg, out_dir, exec);
                break;
            case ExperimentKind::mc_compare:
                outcome = run_mc_compare(cfg, out_dir, exec);
                break;
            case ExperimentKind::moment_bound:
                outcome = run_moment_bound(cfg, out_dir, exec);
                break;
            case ExperimentKind::resolvent_check:
                outcome = run_resolvent(cfg, out_dir, exec);
                break;
            case ExperimentKind::stochasticity_probe:
                outcome = run_probe(cfg, out_dir, exec);
                break;
        }
    } catch (const std::exception& e) {
        result.exit_code = 3;
        result.pass = false;
        json j;
        j["experiment"] = to_string(cfg.experiment);
        j["error"] = e.what();
        result.summary_json = j.dump(2);
        return result;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json summary;
    summary["experiment"] = to_string(cfg.experiment);
    summary["config_hash"] = cfg.hash();
    summary["seed"] = cfg.seed;
    summary["version"] = kVersion;
    summary["pass"] = outcome.pass;
    summary["detail"] = outcome.detail;
    summary["wall_time_s"] = wall;
    summary["artifacts"] = outcome.artifacts;
    result.summary_json = summary.dump(2);
    result.pass = outcome.pass;
    result.exit_code = outcome.pass ? 0 : 1;
    result.artifacts = outcome.artifacts;

    std::ofstream sfile(artifact_path(
        out_dir, to_string(cfg.experiment) + "_summary.json"));
    sfile << result.summary_json << "\n";
    return result;
}

bool verify_artifacts(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::string& detail) {
    const std::string expected = cfg.hash();
    bool all_ok = true;
    bool any = false;
    std::string report;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        if (entry.path().extension() != ".csv") continue;
        const auto stanza = read_csv_stanza(entry.path().string());
        const auto it = stanza.find("config_hash");
        if (it == stanza.end()) continue;
        const auto exp_it = stanza.find("experiment");
        if (exp_it == stanza.end() || exp_it->second != to_string(cfg.experiment))
            continue;
        any = true;
        if (it->second != expected) {
            all_ok = false;
            report += entry.path().filename().string() + ": hash mismatch (" +
                      it->second + " != " + expected + ")\n";
        } else {
            report += entry.path().filename().string() + ": ok\n";
        }
    }
    if (!any) {
        detail = "no artifacts for this experiment in " + out_dir;
        return false;
    }
    detail = report;
    return all_ok;
}

}  // namespace ips
