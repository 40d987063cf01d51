#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ipsavg/sparse.hpp"
#include "ipsavg/truncated_fp.hpp"

namespace ips {

/// Split of a forward generator G = B - diag(q): q holds the total outflow
/// rates, B the nonnegative jump kernel (column j sums to at most q[j];
/// equality means conservative — the truncation boundary may leak to an
/// implicit cemetery).
struct SplitGenerator {
    std::vector<double> q;
    SparseGenerator B;  // forward orientation, off-diagonal kernel

    std::size_t dim() const { return q.size(); }
    void validate(double tol = 1e-12) const;

    SparseGenerator to_forward() const;
    static SplitGenerator from_forward(const SparseGenerator& G);
};

/// Partial sum R(a) sum_{n<=n_terms} r^n (B R(a))^n nu with
/// R(a) = diag(1/(a+q)) — the perturbation series for the minimal resolvent.
/// Every term is nonnegative, so the sum is monotone in n_terms and in r.
DensityVector resolvent_series(const SplitGenerator& sg, double a, double r,
                               const DensityVector& nu, int n_terms);

/// Count-chain truncations used by the probes. States 0..n_states-1; the top
/// state's birth leaks to the cemetery (sub-conservative boundary).
SplitGenerator pure_birth_truncation(const std::function<double(int)>& rate,
                                     int n_states);
SplitGenerator birth_death_truncation(const std::function<double(int)>& birth,
                                      const std::function<double(int)>& death,
                                      int n_states);

struct ProbeReport {
    std::vector<int> sizes;
    std::vector<double> defects;  // 1 - ||rho_t|| per truncation
    double extrapolated_defect = 0.0;
    double tolerance = 0.0;
    std::string verdict;  // "stochastic" or "possible explosion"
};

/// Mass-defect probe over nested truncations of one model: evolves the same
/// initial state under each truncation, checks the defects are nonincreasing
/// in the size (minimality), extrapolates the tail geometrically and decides.
/// The verdict is an extrapolation, never a proof.
ProbeReport stochasticity_probe(const std::vector<SplitGenerator>& family,
                                const std::vector<int>& sizes, double t,
                                std::size_t init_index, double evolve_tol = 1e-10,
                                double defect_tol = 1e-6);

/// Dense linear solve (partial-pivot LU), used for in-tool resolvent
/// self-checks on small instances.
std::vector<double> dense_solve(std::vector<std::vector<double>> A,
                                std::vector<double> b);

}  // namespace ips
