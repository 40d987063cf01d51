#include "ipsavg/minimal_semigroup.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

namespace ips {

void SplitGenerator::validate(double tol) const {
    if (B.orientation() != Orientation::forward)
        throw std::invalid_argument("SplitGenerator: B must be forward-form");
    if (B.dim() != q.size())
        throw std::invalid_argument("SplitGenerator: dimension mismatch");
    for (double v : q)
        if (v < 0.0) throw std::invalid_argument("SplitGenerator: negative q");
    const auto sums = B.column_sums();
    for (std::size_t j = 0; j < q.size(); ++j) {
        if (sums[j] > q[j] + tol)
            throw std::invalid_argument(
                "SplitGenerator: column sum of B exceeds q");
    }
    for (const Triplet& t : B.to_triplets())
        if (t.value < 0.0)
            throw std::invalid_argument("SplitGenerator: B must be nonnegative");
}

SparseGenerator SplitGenerator::to_forward() const {
    std::vector<Triplet> entries = B.to_triplets();
    for (std::uint32_t i = 0; i < q.size(); ++i)
        if (q[i] != 0.0) entries.push_back(Triplet{i, i, -q[i]});
    return SparseGenerator::from_triplets(q.size(), Orientation::forward,
                                          std::move(entries), false);
}

SplitGenerator SplitGenerator::from_forward(const SparseGenerator& G) {
    if (G.orientation() != Orientation::forward)
        throw std::invalid_argument("SplitGenerator: expected forward form");
    SplitGenerator sg;
    sg.q.assign(G.dim(), 0.0);
    std::vector<Triplet> off;
    for (const Triplet& t : G.to_triplets()) {
        if (t.row == t.col)
            sg.q[t.row] = -t.value;
        else
            off.push_back(t);
    }
    sg.B = SparseGenerator::from_triplets(G.dim(), Orientation::forward,
                                          std::move(off), false);
    sg.validate(1e-9);
    return sg;
}

DensityVector resolvent_series(const SplitGenerator& sg, double a, double r,
                               const DensityVector& nu, int n_terms) {
    if (!(a > 0.0)) throw std::invalid_argument("resolvent_series: a must be > 0");
    if (!(r > 0.0 && r <= 1.0))
        throw std::invalid_argument("resolvent_series: r must be in (0,1]");
    if (n_terms < 0)
        throw std::invalid_argument("resolvent_series: n_terms < 0");
    if (nu.values.size() != sg.dim())
        throw std::invalid_argument("resolvent_series: dimension mismatch");
    sg.validate(1e-9);
    for (double v : nu.values)
        if (v < 0.0)
            throw std::invalid_argument("resolvent_series: nu must be >= 0");

    const std::size_t n = sg.dim();
    std::vector<double> term = nu.values;  // (r B R(a))^k nu
    std::vector<double> sum = nu.values;
    std::vector<double> scaled(n), next(n);
    for (int k = 1; k <= n_terms; ++k) {
        for (std::size_t i = 0; i < n; ++i)
            scaled[i] = term[i] / (a + sg.q[i]);
        sg.B.apply(std::span<const double>(scaled), std::span<double>(next));
        double largest = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            term[i] = r * next[i];
            if (term[i] < 0.0)
                throw std::runtime_error("resolvent_series: negative term");
            sum[i] += term[i];
            largest = std::max(largest, term[i]);
        }
        if (largest == 0.0) break;  // B nilpotent direction exhausted
    }
    DensityVector out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = sum[i] / (a + sg.q[i]);
    return out;
}

SplitGenerator pure_birth_truncation(const std::function<double(int)>& rate,
                                     int n_states) {
    if (n_states < 2)
        throw std::invalid_argument("pure_birth_truncation: need >= 2 states");
    SplitGenerator sg;
    sg.q.resize(static_cast<std::size_t>(n_states));
    std::vector<Triplet> b;
    for (int i = 0; i < n_states; ++i) {
        const double r = rate(i);
        if (r < 0.0)
            throw std::invalid_argument("pure_birth_truncation: negative rate");
        sg.q[static_cast<std::size_t>(i)] = r;
        if (i + 1 < n_states && r > 0.0) {
            // top state's birth leaks to the cemetery
            b.push_back(Triplet{static_cast<std::uint32_t>(i + 1),
                                static_cast<std::uint32_t>(i), r});
        }
    }
    sg.B = SparseGenerator::from_triplets(static_cast<std::size_t>(n_states),
                                          Orientation::forward, std::move(b),
                                          false);
    sg.validate();
    return sg;
}

SplitGenerator birth_death_truncation(const std::function<double(int)>& birth,
                                      const std::function<double(int)>& death,
                                      int n_states) {
    if (n_states < 2)
        throw std::invalid_argument("birth_death_truncation: need >= 2 states");
    SplitGenerator sg;
    sg.q.resize(static_cast<std::size_t>(n_states));
    std::vector<Triplet> b;
    for (int i = 0; i < n_states; ++i) {
        const double up = birth(i);
        const double down = death(i);
        if (up < 0.0 || down < 0.0)
            throw std::invalid_argument("birth_death_truncation: negative rate");
        sg.q[static_cast<std::size_t>(i)] = up + down;
        if (i + 1 < n_states && up > 0.0)
            b.push_back(Triplet{static_cast<std::uint32_t>(i + 1),
                                static_cast<std::uint32_t>(i), up});
        if (i > 0 && down > 0.0)
            b.push_back(Triplet{static_cast<std::uint32_t>(i - 1),
                                static_cast<std::uint32_t>(i), down});
    }
    sg.B = SparseGenerator::from_triplets(static_cast<std::size_t>(n_states),
                                          Orientation::forward, std::move(b),
                                          false);
    sg.validate();
    return sg;
}

ProbeReport stochasticity_probe(const std::vector<SplitGenerator>& family,
                                const std::vector<int>& sizes, double t,
                                std::size_t init_index, double evolve_tol,
                                double defect_tol) {
    if (family.size() != sizes.size() || family.size() < 2)
        throw std::invalid_argument("stochasticity_probe: need >= 2 truncations");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i)
        if (sizes[i] >= sizes[i + 1])
            throw std::invalid_argument(
                "stochasticity_probe: sizes must be strictly increasing");

    // nesting: q and the interior B columns of a smaller truncation must be
    // prefixes of the next one (the boundary column is allowed to differ)
    const auto interior_entries = [](const SplitGenerator& sg,
                                     std::size_t n_interior) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, double> m;
        for (const Triplet& t : sg.B.to_triplets())
            if (t.col < n_interior) m[{t.row, t.col}] = t.value;
        return m;
    };
    for (std::size_t i = 0; i + 1 < family.size(); ++i) {
        const SplitGenerator& small = family[i];
        const SplitGenerator& big = family[i + 1];
        if (small.dim() != static_cast<std::size_t>(sizes[i]) ||
            big.dim() != static_cast<std::size_t>(sizes[i + 1]))
            throw std::invalid_argument("stochasticity_probe: size mismatch");
        for (std::size_t j = 0; j + 1 < small.dim(); ++j)
            if (std::fabs(small.q[j] - big.q[j]) > 1e-12)
                throw std::invalid_argument(
                    "stochasticity_probe: non-nested truncations (q)");
        const auto a = interior_entries(small, small.dim() - 1);
        const auto b = interior_entries(big, small.dim() - 1);
        if (a.size() != b.size())
            throw std::invalid_argument(
                "stochasticity_probe: non-nested truncations (B)");
        for (const auto& [key, value] : a) {
            const auto it = b.find(key);
            if (it == b.end() || std::fabs(it->second - value) > 1e-12)
                throw std::invalid_argument(
                    "stochasticity_probe: non-nested truncations (B)");
        }
    }

    ProbeReport rep;
    rep.sizes = sizes;
    rep.tolerance = defect_tol;
    // defects below the numerical floor of the mass accumulation (Poisson
    // tail truncation plus summation drift) are reported as exact zeros
    constexpr double kDefectFloor = 1e-9;
    for (const SplitGenerator& sg : family) {
        const DensityVector rho0 =
            DensityVector::point_mass(sg.dim(), init_index);
        const DensityVector rho_t =
            evolve(rho0, sg.to_forward(), t, EvolveMethod::uniformization,
                   evolve_tol, Exec::parallel);
        const double defect = 1.0 - rho_t.mass();
        rep.defects.push_back(defect < kDefectFloor ? 0.0 : defect);
    }
    for (std::size_t i = 0; i + 1 < rep.defects.size(); ++i) {
        if (rep.defects[i + 1] > rep.defects[i] + 1e-12)
            throw std::runtime_error(
                "stochasticity_probe: defect increased with truncation size");
    }

    // geometric extrapolation of the defect tail
    const std::size_t k = rep.defects.size() - 1;
    double extrapolated = rep.defects[k];
    if (k >= 2) {
        const double d1 = rep.defects[k - 1] - rep.defects[k];
        const double d2 = rep.defects[k - 2] - rep.defects[k - 1];
        if (d1 > 0.0 && d2 > 0.0) {
            const double ratio = std::min(d1 / d2, 0.99);
            extrapolated =
                std::max(0.0, rep.defects[k] - d1 * ratio / (1.0 - ratio));
        }
    }
    rep.extrapolated_defect = extrapolated;
    rep.verdict =
        extrapolated < defect_tol ? "stochastic" : "possible explosion";
    return rep;
}

std::vector<double> dense_solve(std::vector<std::vector<double>> A,
                                std::vector<double> b) {
    const std::size_t n = b.size();
    if (A.size() != n)
        throw std::invalid_argument("dense_solve: shape mismatch");
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(A[r][c]) > std::fabs(A[pivot][c])) pivot = r;
        if (A[pivot][c] == 0.0)
            throw std::runtime_error("dense_solve: singular matrix");
        std::swap(A[c], A[pivot]);
        std::swap(b[c], b[pivot]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t k = ri + 1; k < n; ++k) s -= A[ri][k] * x[k];
        x[ri] = s / A[ri][ri];
    }
    return x;
}

}  // namespace ips
