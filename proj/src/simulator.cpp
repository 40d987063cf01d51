#include "ipsavg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipsavg/stats.hpp"

namespace ips {

std::size_t Trajectory::population_at(double t) const {
    return state_at(t).size();
}

const Configuration& Trajectory::state_at(double t) const {
    for (std::size_t i = 0; i < record_times.size(); ++i)
        if (std::fabs(record_times[i] - t) <= 1e-12) return states[i];
    throw std::invalid_argument("Trajectory: t is not a record time");
}

namespace {

void check_sim_config(const SimConfig& cfg) {
    if (!(cfg.horizon >= 0.0))
        throw std::invalid_argument("SimConfig: horizon must be >= 0");
    if (cfg.max_population < 1)
        throw std::invalid_argument("SimConfig: max_population must be >= 1");
    double prev = -1.0;
    for (double t : cfg.record_times) {
        if (t < 0.0 || t > cfg.horizon || t <= prev)
            throw std::invalid_argument(
                "SimConfig: record_times must be increasing within [0, horizon]");
        prev = t;
    }
    if (cfg.delta < 0.0) throw std::invalid_argument("SimConfig: delta < 0");
}

// Gillespie engine over the joint chain. Per-particle death/fecundity
// contributions are cached and adjusted incrementally on every event; a full
// recomputation audits (and resyncs) the caches periodically.
class Engine {
public:
    Engine(const ModelParams& p, const Domain& dom, double death_base,
           double fec_base, std::optional<EnvSpec> env, const SimConfig& cfg,
           Rng& rng)
        : p_(p),
          dom_(dom),
          death_base_(death_base),
          fec_base_(fec_base),
          env_(std::move(env)),
          cfg_(cfg),
          rng_(rng) {}

    Trajectory run(const Configuration& initial) {
        traj_.record_times = cfg_.record_times;
        if (env_) {
            gamma_ = env_invariant_sample(*env_, dom_, rng_).gamma;
        }
        for (const Point& x : initial.points) insert_particle(x);

        double t = 0.0;
        std::size_t next_record = 0;
        std::size_t events = 0;
        while (true) {
            // cancellation in the incremental sums can leave tiny residue
            // once the population dies out; clamp for rate purposes
            if (pos_.empty()) sum_death_ = sum_fec_ = 0.0;
            const double q_death = std::max(0.0, sum_death_);
            const double q_fec = std::max(0.0, sum_fec_);
            const double q_sys = q_death + q_fec;
            const double env_rate = env_total_rate();
            const double total = q_sys + env_rate;
            const double dt = rng_.exponential(total);
            const double t_next = std::isfinite(dt)
                                      ? t + dt
                                      : std::numeric_limits<double>::infinity();

            while (next_record < cfg_.record_times.size() &&
                   cfg_.record_times[next_record] < t_next &&
                   cfg_.record_times[next_record] <= cfg_.horizon) {
                snapshot();
                ++next_record;
            }
            if (t_next > cfg_.horizon) break;
            t = t_next;

            const double u = rng_.uniform() * total;
            if (u < q_sys) {
                if (cfg_.delta > 0.0 &&
                    rng_.uniform() > std::exp(-cfg_.delta * q_sys)) {
                    ++traj_.rejected;
                } else if (u < q_death) {
                    apply_death(pick_death(u));
                    ++traj_.deaths;
                } else {
                    const std::size_t parent = pick_parent(u - q_death);
                    apply_birth(parent);
                    ++traj_.births;
                    if (pos_.size() > cfg_.max_population) {
                        traj_.exploded = true;
                        traj_.explosion_time = t;
                        break;
                    }
                }
            } else {
                apply_env_event();
                ++traj_.env_events;
            }
            if (++events % cfg_.audit_interval == 0) audit();
        }
        while (next_record < cfg_.record_times.size()) {
            snapshot();
            ++next_record;
        }
        traj_.audits = audits_;
        traj_.max_audit_rel_error = max_audit_err_;
        return std::move(traj_);
    }

private:
    double death_of(std::size_t i) const {
        return death_base_ + d_env_[i] + d_comp_[i];
    }
    double fec_of(std::size_t i) const { return fec_base_ + f_env_[i]; }

    double env_total_rate() const {
        if (!env_) return 0.0;
        switch (env_->kind) {
            case EnvKind::free_glauber:
                return (env_->z * dom_.volume() +
                        static_cast<double>(gamma_.size())) /
                       env_->epsilon;
            case EnvKind::resample:
                return 1.0 / env_->epsilon;
            case EnvKind::frozen:
                return 0.0;
        }
        return 0.0;
    }

    void snapshot() { traj_.states.push_back(Configuration(pos_)); }

    std::size_t pick_death(double u) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            acc += death_of(i);
            if (u < acc) return i;
        }
        return pos_.size() - 1;
    }

    std::size_t pick_parent(double u) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            acc += fec_of(i);
            if (u < acc) return i;
        }
        return pos_.size() - 1;
    }

    void insert_particle(const Point& x) {
        double denv = 0.0, fenv = 0.0;
        for (const Point& w : gamma_.points) {
            denv += eval_kernel(p_.kappa, dom_, x, w);
            fenv += eval_kernel(p_.psi, dom_, x, w);
        }
        double dcomp = 0.0;
        for (std::size_t j = 0; j < pos_.size(); ++j) {
            const double a = eval_kernel(p_.a_minus, dom_, x, pos_[j]);
            dcomp += a;
            d_comp_[j] += a;
            sum_death_ += a;
        }
        pos_.push_back(x);
        d_env_.push_back(denv);
        d_comp_.push_back(dcomp);
        f_env_.push_back(fenv);
        sum_death_ += death_base_ + denv + dcomp;
        sum_fec_ += fec_base_ + fenv;
    }

    void apply_birth(std::size_t parent) {
        insert_particle(sample_displacement(p_.a_plus, dom_, pos_[parent], rng_));
    }

    void apply_death(std::size_t i) {
        sum_death_ -= death_of(i);
        sum_fec_ -= fec_of(i);
        const Point x = pos_[i];
        remove_slot(i);
        for (std::size_t j = 0; j < pos_.size(); ++j) {
            const double a = eval_kernel(p_.a_minus, dom_, pos_[j], x);
            d_comp_[j] -= a;
            sum_death_ -= a;
        }
    }

    void remove_slot(std::size_t i) {
        pos_[i] = pos_.back();
        pos_.pop_back();
        d_env_[i] = d_env_.back();
        d_env_.pop_back();
        d_comp_[i] = d_comp_.back();
        d_comp_.pop_back();
        f_env_[i] = f_env_.back();
        f_env_.pop_back();
    }

    void apply_env_event() {
        switch (env_->kind) {
            case EnvKind::free_glauber: {
                const double birth_rate = env_->z * dom_.volume();
                const double total =
                    birth_rate + static_cast<double>(gamma_.size());
                if (rng_.uniform() * total < birth_rate) {
                    Point w(static_cast<std::size_t>(dom_.dim));
                    for (int d = 0; d < dom_.dim; ++d)
                        w[d] = rng_.uniform(0.0, dom_.side);
                    adjust_env_point(w, +1.0);
                    gamma_.points.push_back(std::move(w));
                } else {
                    const std::size_t i = rng_.uniform_index(gamma_.size());
                    adjust_env_point(gamma_.points[i], -1.0);
                    gamma_.points[i] = gamma_.points.back();
                    gamma_.points.pop_back();
                }
                break;
            }
            case EnvKind::resample: {
                gamma_ = sample_poisson(dom_, env_->z, rng_);
                rebuild_env_caches();
                break;
            }
            case EnvKind::frozen:
                break;
        }
    }

    void adjust_env_point(const Point& w, double sign) {
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            const double dk = sign * eval_kernel(p_.kappa, dom_, pos_[i], w);
            const double dp = sign * eval_kernel(p_.psi, dom_, pos_[i], w);
            d_env_[i] += dk;
            f_env_[i] += dp;
            sum_death_ += dk;
            sum_fec_ += dp;
        }
    }

    void rebuild_env_caches() {
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            double denv = 0.0, fenv = 0.0;
            for (const Point& w : gamma_.points) {
                denv += eval_kernel(p_.kappa, dom_, pos_[i], w);
                fenv += eval_kernel(p_.psi, dom_, pos_[i], w);
            }
            d_env_[i] = denv;
            f_env_[i] = fenv;
        }
        recompute_totals();
    }

    void recompute_totals() {
        sum_death_ = 0.0;
        sum_fec_ = 0.0;
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            sum_death_ += death_of(i);
            sum_fec_ += fec_of(i);
        }
    }

    void audit() {
        ++audits_;
        double death = 0.0, fec = 0.0;
        std::vector<double> denv(pos_.size(), 0.0), dcomp(pos_.size(), 0.0),
            fenv(pos_.size(), 0.0);
        for (std::size_t i = 0; i < pos_.size(); ++i) {
            for (const Point& w : gamma_.points) {
                denv[i] += eval_kernel(p_.kappa, dom_, pos_[i], w);
                fenv[i] += eval_kernel(p_.psi, dom_, pos_[i], w);
            }
            for (std::size_t j = 0; j < pos_.size(); ++j)
                if (j != i)
                    dcomp[i] += eval_kernel(p_.a_minus, dom_, pos_[i], pos_[j]);
            death += death_base_ + denv[i] + dcomp[i];
            fec += fec_base_ + fenv[i];
        }
        const double err = std::max(
            std::fabs(death - sum_death_) / std::max(1.0, std::fabs(death)),
            std::fabs(fec - sum_fec_) / std::max(1.0, std::fabs(fec)));
        max_audit_err_ = std::max(max_audit_err_, err);
        if (err > 1e-9)
            throw std::runtime_error(
                "simulator: rate cache audit failed, relative error " +
                std::to_string(err));
        d_env_ = std::move(denv);
        d_comp_ = std::move(dcomp);
        f_env_ = std::move(fenv);
        sum_death_ = death;
        sum_fec_ = fec;
    }

    const ModelParams& p_;
    const Domain& dom_;
    double death_base_;
    double fec_base_;
    std::optional<EnvSpec> env_;
    const SimConfig& cfg_;
    Rng& rng_;

    std::vector<Point> pos_;
    std::vector<double> d_env_, d_comp_, f_env_;
    Configuration gamma_;
    double sum_death_ = 0.0;
    double sum_fec_ = 0.0;
    Trajectory traj_;
    std::size_t audits_ = 0;
    double max_audit_err_ = 0.0;
};

}  // namespace

Trajectory simulate_coupled(const ModelParams& p, const EnvSpec& env,
                            const InitSampler& init, const SimConfig& cfg,
                            const Domain& dom, Rng& rng) {
    check_sim_config(cfg);
    if (!(env.epsilon > 0.0))
        throw std::invalid_argument("simulate_coupled: epsilon must be > 0");
    Engine engine(p, dom, p.m0, p.lambda0, env, cfg, rng);
    return engine.run(init(dom, rng));
}

Trajectory simulate_averaged(const ModelParams& p, const InitSampler& init,
                             const SimConfig& cfg, const Domain& dom,
                             Rng& rng) {
    check_sim_config(cfg);
    const AveragedRates avg = averaged_rates(p, dom.dim);
    Engine engine(p, dom, avg.m_bar, avg.lambda_bar, std::nullopt, cfg, rng);
    return engine.run(init(dom, rng));
}

std::vector<Trajectory> run_ensemble(
    std::size_t n, std::uint64_t seed, Exec exec,
    const std::function<Trajectory(Rng&, std::size_t)>& make) {
    std::vector<Trajectory> out(n);
    parallel_for(n, exec, [&](std::size_t r) {
        Rng rng = Rng::derive(seed, r);
        out[r] = make(rng, r);
        out[r].seed = r;
    });
    return out;
}

MomentEstimate estimate_moment(const std::vector<Trajectory>& ens, double t,
                               int k) {
    if (ens.empty()) throw std::invalid_argument("estimate_moment: empty ensemble");
    std::vector<double> xs(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) {
        xs[i] = std::pow(static_cast<double>(ens[i].population_at(t)),
                         static_cast<double>(k));
    }
    const MeanSe ms = mean_se(xs);
    return MomentEstimate{ms.mean, 3.0 * ms.se, ms.n};
}

double observable_population(const Configuration& c, const Domain&) {
    return static_cast<double>(c.size());
}

double observable_subwindow(const Configuration& c, const Domain& dom) {
    double n = 0.0;
    for (const Point& x : c.points)
        if (x[0] < 0.5 * dom.side) n += 1.0;
    return n;
}

double observable_nn_distance(const Configuration& c, const Domain& dom) {
    // fewer than two points: report the torus diameter as a sentinel
    const double diameter =
        0.5 * dom.side * std::sqrt(static_cast<double>(dom.dim));
    if (c.size() < 2) return diameter;
    double best = diameter;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j)
            best = std::min(best, torus_distance(dom, c.points[i], c.points[j]));
    return best;
}

DistanceReport compare_ensembles(const std::vector<Trajectory>& a,
                                 const std::vector<Trajectory>& b, double t,
                                 const Domain& dom, Rng& bootstrap_rng,
                                 int n_bootstrap) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("compare_ensembles: empty ensemble");
    using Observable = double (*)(const Configuration&, const Domain&);
    const std::pair<const char*, Observable> observables[] = {
        {"population", &observable_population},
        {"subwindow_count", &observable_subwindow},
        {"nn_distance", &observable_nn_distance},
    };
    DistanceReport rep;
    rep.t = t;
    for (const auto& [name, fn] : observables) {
        std::vector<double> xa(a.size()), xb(b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            xa[i] = fn(a[i].state_at(t), dom);
        for (std::size_t i = 0; i < b.size(); ++i)
            xb[i] = fn(b[i].state_at(t), dom);
        DistanceRow row;
        row.observable = name;
        row.ks = ks_statistic(xa, xb);
        row.w1 = wasserstein1(xa, xb);
        const BootstrapCi ks_ci = bootstrap_ci_two_sample(
            &ks_statistic, xa, xb, n_bootstrap, bootstrap_rng);
        const BootstrapCi w1_ci = bootstrap_ci_two_sample(
            &wasserstein1, xa, xb, n_bootstrap, bootstrap_rng);
        row.ks_lo = ks_ci.lo;
        row.ks_hi = ks_ci.hi;
        row.w1_lo = w1_ci.lo;
        row.w1_hi = w1_ci.hi;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace ips
