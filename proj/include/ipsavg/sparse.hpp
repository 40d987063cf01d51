#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipsavg/parallel.hpp"

namespace ips {

struct Triplet {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    double value = 0.0;
};

/// Orientation of a generator matrix:
///   rates   — row = source state; entry (i,j) is the jump rate i -> j and
///             the diagonal is minus the row's outflow (Kolmogorov form,
///             acts on functions).
///   forward — column = source state; acts on density column vectors. The
///             adjoint of a rates-form generator w.r.t. counting measure is
///             exactly its transpose.
enum class Orientation { rates, forward };

/// Immutable CSR rate matrix. Off-diagonals are nonnegative; the diagonal is
/// nonpositive. "Conservative" means zero row sums (rates form) resp. zero
/// column sums (forward form): no mass leaks.
class SparseGenerator {
public:
    SparseGenerator() = default;

    /// Builds from off-diagonal triplets plus explicit diagonal entries.
    /// If balance_diagonal is set, the diagonal is ignored and recomputed as
    /// minus the source-state outflow (making the generator conservative).
    static SparseGenerator from_triplets(std::size_t dim, Orientation orient,
                                         std::vector<Triplet> entries,
                                         bool balance_diagonal);

    std::size_t dim() const { return dim_; }
    std::size_t nnz() const { return col_.size(); }
    Orientation orientation() const { return orient_; }

    /// y = A x. The parallel path partitions rows; results are identical to
    /// the serial path (per-row dot products, no shared accumulation).
    void apply(std::span<const double> x, std::span<double> y,
               Exec exec = Exec::serial) const;

    std::vector<double> apply(const std::vector<double>& x,
                              Exec exec = Exec::serial) const;

    /// Same matrix with rows/columns swapped and the orientation flipped.
    SparseGenerator transposed() const;

    std::vector<double> diagonal() const;
    std::vector<double> row_sums() const;
    std::vector<double> column_sums() const;
    double max_abs_diagonal() const;

    /// max_j sum_i |A_ij| — the induced L1 operator norm.
    double l1_operator_norm() const;

    bool is_conservative(double tol = 1e-12) const;

    std::vector<Triplet> to_triplets() const;  // includes diagonal entries

    /// Entry lookup, O(log row nnz). Intended for tests and small instances.
    double at(std::uint32_t r, std::uint32_t c) const;

    /// Triplet CSV export (row, col, rate), diagonal included.
    void write_triplet_csv(
        const std::string& path,
        const std::vector<std::pair<std::string, std::string>>& stanza) const;

private:
    std::size_t dim_ = 0;
    Orientation orient_ = Orientation::rates;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;
};

}  // namespace ips
