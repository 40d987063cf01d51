#include "ipsavg/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipsavg/io.hpp"

namespace ips {

SparseGenerator SparseGenerator::from_triplets(std::size_t dim,
                                               Orientation orient,
                                               std::vector<Triplet> entries,
                                               bool balance_diagonal) {
    for (const Triplet& t : entries) {
        if (t.row >= dim || t.col >= dim)
            throw std::invalid_argument("SparseGenerator: index out of range");
        if (t.row != t.col && t.value < 0.0)
            throw std::invalid_argument(
                "SparseGenerator: negative off-diagonal rate");
    }
    if (balance_diagonal) {
        // source state is the row in rates form, the column in forward form
        std::vector<double> outflow(dim, 0.0);
        std::vector<Triplet> kept;
        kept.reserve(entries.size() + dim);
        for (const Triplet& t : entries) {
            if (t.row == t.col) continue;
            const std::uint32_t src =
                orient == Orientation::rates ? t.row : t.col;
            outflow[src] += t.value;
            kept.push_back(t);
        }
        for (std::uint32_t i = 0; i < dim; ++i) {
            if (outflow[i] != 0.0)
                kept.push_back(Triplet{i, i, -outflow[i]});
        }
        entries = std::move(kept);
    }
    // coalesce duplicates, sort by (row, col)
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseGenerator g;
    g.dim_ = dim;
    g.orient_ = orient;
    g.row_ptr_.assign(dim + 1, 0);
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i;
        double v = 0.0;
        while (j < entries.size() && entries[j].row == entries[i].row &&
               entries[j].col == entries[i].col) {
            v += entries[j].value;
            ++j;
        }
        if (v != 0.0) {
            g.col_.push_back(entries[i].col);
            g.val_.push_back(v);
            ++g.row_ptr_[entries[i].row + 1];
        }
        i = j;
    }
    for (std::size_t r = 0; r < dim; ++r) g.row_ptr_[r + 1] += g.row_ptr_[r];
    return g;
}

void SparseGenerator::apply(std::span<const double> x, std::span<double> y,
                            Exec exec) const {
    if (x.size() != dim_ || y.size() != dim_)
        throw std::invalid_argument("SparseGenerator::apply: size mismatch");
    const auto row = [&](std::size_t r) {
        double acc = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            acc += val_[k] * x[col_[k]];
        y[r] = acc;
    };
    if (exec == Exec::serial) {
        for (std::size_t r = 0; r < dim_; ++r) row(r);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(dim_); ++r)
        row(static_cast<std::size_t>(r));
}

std::vector<double> SparseGenerator::apply(const std::vector<double>& x,
                                           Exec exec) const {
    std::vector<double> y(dim_, 0.0);
    apply(std::span<const double>(x), std::span<double>(y), exec);
    return y;
}

SparseGenerator SparseGenerator::transposed() const {
    std::vector<Triplet> entries;
    entries.reserve(nnz());
    for (std::uint32_t r = 0; r < dim_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            entries.push_back(Triplet{col_[k], r, val_[k]});
    }
    const Orientation flipped = orient_ == Orientation::rates
                                    ? Orientation::forward
                                    : Orientation::rates;
    return from_triplets(dim_, flipped, std::move(entries), false);
}

std::vector<double> SparseGenerator::diagonal() const {
    std::vector<double> d(dim_, 0.0);
    for (std::uint32_t r = 0; r < dim_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            if (col_[k] == r) d[r] = val_[k];
    return d;
}

std::vector<double> SparseGenerator::row_sums() const {
    std::vector<double> s(dim_, 0.0);
    for (std::uint32_t r = 0; r < dim_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            s[r] += val_[k];
    return s;
}

std::vector<double> SparseGenerator::column_sums() const {
    std::vector<double> s(dim_, 0.0);
    for (std::uint32_t r = 0; r < dim_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            s[col_[k]] += val_[k];
    return s;
}

double SparseGenerator::max_abs_diagonal() const {
    double m = 0.0;
    for (double d : diagonal()) m = std::max(m, std::fabs(d));
    return m;
}

double SparseGenerator::l1_operator_norm() const {
    std::vector<double> s(dim_, 0.0);
    for (std::uint32_t r = 0; r < dim_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            s[col_[k]] += std::fabs(val_[k]);
    double m = 0.0;
    for (double v : s) m = std::max(m, v);
    return m;
}

bool SparseGenerator::is_conservative(double tol) const {
    const std::vector<double> sums =
        orient_ == Orientation::rates ? row_sums() : column_sums();
    for (double s : sums)
        if (std::fabs(s) > tol) return false;
    return true;
}

std::vector<Triplet> SparseGenerator::to_triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::uint32_t r = 0; r < dim_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            out.push_back(Triplet{r, col_[k], val_[k]});
    return out;
}

void SparseGenerator::write_triplet_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& stanza) const {
    CsvWriter csv(path, stanza, {"row", "col", "rate"});
    for (const Triplet& t : to_triplets())
        csv.row({std::to_string(t.row), std::to_string(t.col),
                 format_double(t.value)});
}

double SparseGenerator::at(std::uint32_t r, std::uint32_t c) const {
    if (r >= dim_ || c >= dim_)
        throw std::invalid_argument("SparseGenerator::at: out of range");
    const auto lo = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto hi = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(lo, hi, c);
    if (it != hi && *it == c)
        return val_[static_cast<std::size_t>(it - col_.begin())];
    return 0.0;
}

}  // namespace ips
