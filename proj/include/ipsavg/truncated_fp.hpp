#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ipsavg/environment.hpp"
#include "ipsavg/logistic_model.hpp"
#include "ipsavg/sparse.hpp"

namespace ips {

/// Uniform grid of M sites on the torus (M = m^dim), the discretization the
/// finite-state projection lives on.
struct SiteLattice {
    std::vector<Point> sites;
    double cell_volume = 0.0;

    static SiteLattice uniform(const Domain& dom, int n_sites);
    int size() const { return static_cast<int>(sites.size()); }
};

/// All subsets of M lattice sites with at most N points, indexed by
/// (popcount, bitmask) ascending. The finite surrogate of the configuration
/// space; index <-> bitmask round-trips exactly.
class TruncatedSpace {
public:
    static TruncatedSpace enumerate(int M, int N);

    std::size_t size() const { return masks_.size(); }
    int sites() const { return M_; }
    int cap() const { return N_; }
    std::uint32_t mask(std::size_t index) const { return masks_[index]; }
    std::size_t index_of(std::uint32_t mask) const;
    int popcount(std::size_t index) const;
    Configuration to_configuration(std::size_t index,
                                   const SiteLattice& lat) const;

private:
    int M_ = 0, N_ = 0;
    std::vector<std::uint32_t> masks_;
};

/// Finite irreducible environment chain: K configuration-valued states, a
/// conservative K x K rate matrix and its invariant probability vector.
struct EnvChain {
    std::vector<Configuration> states;
    std::vector<std::vector<double>> rates;  // rates[j][k]: j -> k, row sums 0
    std::vector<double> mu;

    std::size_t size() const { return states.size(); }
    void validate() const;

    /// Two states (empty <-> one point at w) with up-rate z and down-rate 1;
    /// invariant (1/(1+z), z/(1+z)). The one-site immigration-death chain.
    static EnvChain two_state(double z, const Point& w);

    /// Two states with configurable sizes and symmetric switching; invariant
    /// (1/2, 1/2). Points are spread uniformly on the torus.
    static EnvChain two_state_sizes(int size_a, int size_b, const Domain& dom);

    /// Two states (empty <-> one point at w) with rates tuned so the
    /// invariant mean point count equals `mean` (requires mean < 1).
    static EnvChain two_state_mean(double mean, const Point& w);

    /// Resample chain on point counts {0..K-1}: from any state, jump to k at
    /// the truncated-renormalized Poisson(z * volume) weight. Invariant is
    /// that truncated Poisson law.
    static EnvChain resample_poisson(double z, int K, const Domain& dom);
};

/// Sub-probability vector over the truncated space (optionally times the
/// environment states).
struct DensityVector {
    std::vector<double> values;

    double mass() const;
    double min_value() const;
    void validate(double tol = 1e-12) const;

    static DensityVector point_mass(std::size_t dim, std::size_t index);
};

/// Rates-form generator of the damped system dynamics at a frozen
/// environment configuration: deaths eta -> eta \ x, lattice births
/// eta -> eta u {y} at rate [sum_x fecundity(x) a_plus(x-y) h^d], everything
/// multiplied by e^{-delta q(gamma,eta)} with q the model's total rate.
/// Births onto occupied sites or beyond the cap are suppressed with the mass
/// retained in place, so the generator is conservative. The forward
/// (density) generator is the transpose.
SparseGenerator build_system_generator(const TruncatedSpace& sp,
                                       const SiteLattice& lat,
                                       const Configuration& gamma,
                                       const ModelParams& p, const Domain& dom,
                                       double delta);

/// Forward-form generator of the joint (system x environment) evolution:
/// block-diagonal damped system dynamics at each chain state plus the
/// environment chain at speed 1/epsilon acting identically in the system
/// variable. Joint index = system_index + space_size * env_index.
/// Conservative (zero column sums).
SparseGenerator build_joint_generator(const TruncatedSpace& sp,
                                      const SiteLattice& lat,
                                      const EnvChain& env,
                                      const ModelParams& p, const Domain& dom,
                                      double epsilon, double delta);

/// Rates-form mu-average of the damped kernels:
/// rate(eta -> eta') = sum_k mu_k * [rate under gamma_k, including its own
/// e^{-delta q(gamma_k, eta)} factor]. The average of the damped kernel is
/// NOT the damped average — the order matters and is fixed here.
SparseGenerator build_averaged_generator(const TruncatedSpace& sp,
                                         const SiteLattice& lat,
                                         const EnvChain& env,
                                         const ModelParams& p,
                                         const Domain& dom, double delta);

enum class EvolveMethod { uniformization, rk_adaptive };

/// rho_t = e^{tG} rho0 to tolerance tol. G must have nonnegative
/// off-diagonals (any orientation; pass the forward form to evolve
/// densities). Uniformization preserves positivity and the mass structure;
/// the adaptive RK path is the cross-check.
DensityVector evolve(const DensityVector& rho0, const SparseGenerator& G,
                     double t, EvolveMethod method = EvolveMethod::uniformization,
                     double tol = 1e-10, Exec exec = Exec::serial);

struct SweepRow {
    double param = 0.0;  // epsilon or delta
    double t = 0.0;
    double error = 0.0;     // L1(lambda x mu) density error
    double tv_error = 0.0;  // plain L1 error of the system marginal
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::map<double, double> sup_error;  // param -> sup over the t-grid
};

/// Joint evolution with gamma-independent initial datum rho0 x mu versus the
/// averaged evolution, for each epsilon: reports
///   error(eps,t) = sum_{eta,k} | p_t(eta,k) - mu_k rho_bar_t(eta) |
/// (the L1(lambda x mu) norm in density form) and the marginal
/// total-variation error, plus the sup over the t-grid.
SweepTable averaging_error(const TruncatedSpace& sp, const SiteLattice& lat,
                           const EnvChain& env, const ModelParams& p,
                           const Domain& dom,
                           const std::vector<double>& eps_list, double delta,
                           const std::vector<double>& t_grid,
                           const DensityVector& rho0, double tol = 1e-10,
                           Exec exec = Exec::serial);

/// Averaged evolution at each delta versus the undamped (delta = 0) averaged
/// evolution, in L1.
SweepTable delta_error(const TruncatedSpace& sp, const SiteLattice& lat,
                       const EnvChain& env, const ModelParams& p,
                       const Domain& dom, const std::vector<double>& delta_list,
                       const std::vector<double>& t_grid,
                       const DensityVector& rho0, double tol = 1e-10,
                       Exec exec = Exec::serial);

struct NormCheckReport {
    double norm = 0.0;
    double bound = 0.0;
    bool pass = false;
};

/// Induced L1 norm of a forward damped generator against the 2/(e delta)
/// bound. Throws for delta == 0 (the bound is vacuous).
NormCheckReport operator_norm_check(const SparseGenerator& G_fwd, double delta);

struct MomentBoundRow {
    double t = 0.0;
    double moment = 0.0;
    double bound = 0.0;
    double boundary_mass = 0.0;
    bool ok = false;
};

struct MomentBoundReport {
    std::vector<MomentBoundRow> rows;
    double beta = 0.0;
    bool holds = false;              // moment <= bound at every grid time
    bool truncation_limited = false; // boundary occupancy guard tripped
};

/// First-moment growth of the averaged (delta = 0) evolution against
/// e^{beta t} times the initial moment. The guard flags runs where the mass
/// on |eta| in {N-1, N} exceeds 1e-6 (truncation-limited, not failed).
MomentBoundReport moment_bound_check(const TruncatedSpace& sp,
                                     const SiteLattice& lat,
                                     const EnvChain& env, const ModelParams& p,
                                     const Domain& dom,
                                     const DensityVector& rho0,
                                     const std::vector<double>& t_grid,
                                     double tol = 1e-8);

}  // namespace ips
