#pragma once

// Cell-centred density grids on bounded boxes [0, x_max]^n, n <= 3, and the
// density algebra used by the solver and controllers: Riemann mass, L1
// distance, marginals, max-normalisation, KL divergence and I/O.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "psc/errors.hpp"

namespace psc {

inline constexpr std::size_t kMaxDims = 3;
inline constexpr std::size_t kDefaultCellBudget = std::size_t{1} << 26;  // 512 MiB of doubles
inline constexpr double kMassTolerance = 1e-8;
inline constexpr double kKlFloor = 1e-30;

using Index3 = std::array<std::size_t, kMaxDims>;

class DomainSpec {
public:
    DomainSpec() = default;

    /// Throws ConfigError on an invalid layout or when the cell count exceeds `cell_budget`.
    DomainSpec(std::vector<double> upper, std::vector<std::size_t> cells,
               std::size_t cell_budget = kDefaultCellBudget) {
        if (upper.empty() || upper.size() > kMaxDims)
            throw ConfigError("domain.upper", "dimension count must be 1..3");
        if (upper.size() != cells.size())
            throw ConfigError("domain.cells", "must have one entry per axis");
        dims_ = upper.size();
        std::size_t total = 1;
        for (std::size_t i = 0; i < dims_; ++i) {
            if (!(upper[i] > 0.0) || !std::isfinite(upper[i]))
                throw ConfigError("domain.upper", "x_max must be positive and finite");
            if (cells[i] < 2) throw ConfigError("domain.cells", "need at least 2 cells per axis");
            if (total > cell_budget / cells[i])
                throw ConfigError("domain.cells", "total cell count exceeds the memory budget of " +
                                                      std::to_string(cell_budget) + " cells");
            total *= cells[i];
            upper_[i] = upper[i];
            cells_[i] = cells[i];
        }
        size_ = total;
    }

    std::size_t dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return size_; }
    double upper(std::size_t axis) const noexcept { return upper_[axis]; }
    std::size_t cells(std::size_t axis) const noexcept { return cells_[axis]; }
    double spacing(std::size_t axis) const noexcept { return upper_[axis] / static_cast<double>(cells_[axis]); }
    double center(std::size_t axis, std::size_t k) const noexcept {
        return (static_cast<double>(k) + 0.5) * spacing(axis);
    }
    double cell_volume() const noexcept {
        double v = 1.0;
        for (std::size_t i = 0; i < dims_; ++i) v *= spacing(i);
        return v;
    }
    double volume() const noexcept {
        double v = 1.0;
        for (std::size_t i = 0; i < dims_; ++i) v *= upper_[i];
        return v;
    }

    /// Shape padded with unit axes up to three dimensions (row-major, last axis fastest).
    Index3 shape3() const noexcept { return cells_; }
    std::size_t stride(std::size_t axis) const noexcept {
        std::size_t s = 1;
        for (std::size_t i = axis + 1; i < dims_; ++i) s *= cells_[i];
        return s;
    }
    std::size_t flat(const Index3& idx) const noexcept {
        return (idx[0] * cells_[1] + idx[1]) * cells_[2] + idx[2];
    }
    Index3 unflat(std::size_t flat_index) const noexcept {
        Index3 idx{};
        idx[2] = flat_index % cells_[2];
        flat_index /= cells_[2];
        idx[1] = flat_index % cells_[1];
        idx[0] = flat_index / cells_[1];
        return idx;
    }

    std::vector<double> upper_bounds() const { return {upper_.begin(), upper_.begin() + dims_}; }
    std::vector<std::size_t> cell_counts() const { return {cells_.begin(), cells_.begin() + dims_}; }

    bool operator==(const DomainSpec&) const = default;

private:
    std::size_t dims_ = 0;
    std::size_t size_ = 0;
    std::array<double, kMaxDims> upper_{1.0, 1.0, 1.0};
    Index3 cells_{1, 1, 1};
};

struct DensityGrid {
    DomainSpec domain;
    std::vector<double> values;
    double time = 0.0;  // dimensionless tau = gamma_x * t

    DensityGrid() = default;
    explicit DensityGrid(DomainSpec d, double t = 0.0) : domain(std::move(d)), values(domain.size(), 0.0), time(t) {}

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const noexcept { return values.size(); }
};

inline void require_same_domain(const DensityGrid& p, const DensityGrid& q) {
    if (!(p.domain == q.domain) || p.values.size() != q.values.size())
        throw DomainMismatch("density grids do not share a DomainSpec");
}

/// Compensated (Neumaier) sum of the cell values times the cell volume.
inline double total_mass(const DensityGrid& p) {
    double s = 0.0, comp = 0.0;
    for (double v : p.values) {
        const double t = s + v;
        comp += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
    }
    return (s + comp) * p.domain.cell_volume();
}

inline double l1_distance(const DensityGrid& p, const DensityGrid& q) {
    require_same_domain(p, q);
    double s = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) s += std::abs(p[c] - q[c]);
    return s * p.domain.cell_volume();
}

/// Rescales in place to unit mass. Throws NumericalError for a zero or non-finite mass.
inline void normalize_mass(DensityGrid& p, double target = 1.0) {
    const double m = total_mass(p);
    if (!(m > 0.0) || !std::isfinite(m)) throw NumericalError("cannot normalise a density with mass " + std::to_string(m));
    const double f = target / m;
    for (double& v : p.values) v *= f;
}

/// One-dimensional marginal along `axis`, integrating out the other axes.
inline DensityGrid marginal(const DensityGrid& p, std::size_t axis) {
    const auto& d = p.domain;
    if (d.dims() < 2) throw ConfigError("axis", "marginal needs a grid with at least two axes");
    if (axis >= d.dims()) throw ConfigError("axis", "axis " + std::to_string(axis) + " out of range");
    DensityGrid out(DomainSpec({d.upper(axis)}, {d.cells(axis)}), p.time);
    const double other = d.cell_volume() / d.spacing(axis);
    for (std::size_t c = 0; c < p.size(); ++c) out.values[d.unflat(c)[axis]] += p[c];
    for (double& v : out.values) v *= other;
    return out;
}

/// Divides by the maximum cell value. Throws NumericalError on an all-zero input.
inline DensityGrid normalize_by_max(const DensityGrid& f) {
    const double mx = f.values.empty() ? 0.0 : *std::max_element(f.values.begin(), f.values.end());
    if (!(mx > 0.0)) throw NumericalError("normalize_by_max: input has no positive cell");
    DensityGrid out = f;
    for (double& v : out.values) v /= mx;
    return out;
}

/// Riemann KL divergence D(p || q) with q floored at kKlFloor; clipped below at zero.
inline double kl_divergence(const DensityGrid& p, const DensityGrid& q) {
    require_same_domain(p, q);
    double s = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double pc = p[c];
        if (pc <= 0.0) continue;
        s += pc * std::log(pc / std::max(q[c], kKlFloor));
    }
    return std::max(s * p.domain.cell_volume(), 0.0);
}

/// First cell (in storage order) attaining the maximum value.
inline std::size_t argmax_cell(const DensityGrid& p) {
    return static_cast<std::size_t>(std::max_element(p.values.begin(), p.values.end()) - p.values.begin());
}

inline std::vector<double> cell_center(const DomainSpec& d, std::size_t flat_index) {
    const Index3 idx = d.unflat(flat_index);
    std::vector<double> x(d.dims());
    for (std::size_t i = 0; i < d.dims(); ++i) x[i] = d.center(i, idx[i]);
    return x;
}

struct SnappedPoint {
    std::size_t cell = 0;
    Index3 index{};
    std::vector<double> center;
    double snap_distance = 0.0;
};

/// Nearest cell centre to `x`. Throws ConfigError if `x` lies outside the domain.
inline SnappedPoint snap_to_cell(const DomainSpec& d, std::span<const double> x) {
    if (x.size() != d.dims()) throw ConfigError("target", "point has wrong dimension");
    SnappedPoint s;
    double dist2 = 0.0;
    for (std::size_t i = 0; i < d.dims(); ++i) {
        if (!(x[i] >= 0.0 && x[i] <= d.upper(i))) throw ConfigError("target", "point lies outside the domain");
        auto k = static_cast<std::size_t>(std::floor(x[i] / d.spacing(i)));
        k = std::min(k, d.cells(i) - 1);
        s.index[i] = k;
        s.center.push_back(d.center(i, k));
        dist2 += (x[i] - s.center.back()) * (x[i] - s.center.back());
    }
    s.cell = d.flat(s.index);
    s.snap_distance = std::sqrt(dist2);
    return s;
}

// ---------------------------------------------------------------------------
// Initial-condition shapes.

inline DensityGrid uniform_density(const DomainSpec& d) {
    DensityGrid p(d);
    std::fill(p.values.begin(), p.values.end(), 1.0 / d.volume());
    return p;
}

/// Gaussian bump truncated to the domain and renormalised to unit mass.
inline DensityGrid truncated_gaussian(const DomainSpec& d, std::span<const double> center, std::span<const double> sigma) {
    if (center.size() != d.dims() || sigma.size() != d.dims())
        throw ConfigError("initial", "gaussian center/sigma have wrong dimension");
    for (double s : sigma)
        if (!(s > 0.0)) throw ConfigError("initial.sigma", "must be positive");
    DensityGrid p(d);
    for (std::size_t c = 0; c < p.size(); ++c) {
        const Index3 idx = d.unflat(c);
        double e = 0.0;
        for (std::size_t i = 0; i < d.dims(); ++i) {
            const double z = (d.center(i, idx[i]) - center[i]) / sigma[i];
            e += z * z;
        }
        p[c] = std::exp(-0.5 * e);
    }
    normalize_mass(p);
    return p;
}

/// Uniform over the cells whose centres fall inside [lo, hi]; at least the nearest cell.
inline DensityGrid uniform_box(const DomainSpec& d, std::span<const double> lo, std::span<const double> hi) {
    if (lo.size() != d.dims() || hi.size() != d.dims()) throw ConfigError("initial", "box bounds have wrong dimension");
    DensityGrid p(d);
    for (std::size_t c = 0; c < p.size(); ++c) {
        const Index3 idx = d.unflat(c);
        bool inside = true;
        for (std::size_t i = 0; i < d.dims() && inside; ++i) {
            const double x = d.center(i, idx[i]);
            inside = x >= lo[i] && x <= hi[i];
        }
        if (inside) p[c] = 1.0;
    }
    if (std::all_of(p.values.begin(), p.values.end(), [](double v) { return v == 0.0; })) {
        std::vector<double> mid(d.dims());
        for (std::size_t i = 0; i < d.dims(); ++i) mid[i] = std::clamp(0.5 * (lo[i] + hi[i]), 0.0, d.upper(i));
        p[snap_to_cell(d, mid).cell] = 1.0;
    }
    normalize_mass(p);
    return p;
}

/// All mass in the single cell containing `x`.
inline DensityGrid grid_delta(const DomainSpec& d, std::span<const double> x) {
    DensityGrid p(d);
    p[snap_to_cell(d, x).cell] = 1.0 / d.cell_volume();
    return p;
}

// ---------------------------------------------------------------------------
// Serialisation. Binary layout: u64 n, u64 N_i (n values), f64 x_i,max (n
// values), then f64 cell values in storage order; all little-endian.

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

template <class T>
T read_le(std::istream& is) {
    static_assert(sizeof(T) == 8);
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw ConfigError("grid", "truncated binary grid stream");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const DensityGrid& p) {
    const auto& d = p.domain;
    detail::write_le<std::uint64_t>(os, d.dims());
    for (std::size_t i = 0; i < d.dims(); ++i) detail::write_le<std::uint64_t>(os, d.cells(i));
    for (std::size_t i = 0; i < d.dims(); ++i) detail::write_le<double>(os, d.upper(i));
    for (double v : p.values) detail::write_le<double>(os, v);
}

inline DensityGrid read_binary(std::istream& is) {
    const auto n = detail::read_le<std::uint64_t>(is);
    if (n == 0 || n > kMaxDims) throw ConfigError("grid", "binary grid has invalid dimension count");
    std::vector<std::size_t> cells(n);
    std::vector<double> upper(n);
    for (auto& c : cells) c = static_cast<std::size_t>(detail::read_le<std::uint64_t>(is));
    for (auto& u : upper) u = detail::read_le<double>(is);
    DensityGrid p(DomainSpec(upper, cells));
    for (double& v : p.values) v = detail::read_le<double>(is);
    return p;
}

inline void save_binary(const std::string& path, const DensityGrid& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("output", "cannot open " + path);
    write_binary(os, p);
}

inline DensityGrid load_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("input", "cannot open " + path);
    return read_binary(is);
}

/// One row per cell: x_0[,x_1[,x_2]],value.
inline void write_csv(std::ostream& os, const DensityGrid& p) {
    const auto& d = p.domain;
    for (std::size_t i = 0; i < d.dims(); ++i) os << 'x' << i << ',';
    os << "value\n";
    os.precision(17);
    for (std::size_t c = 0; c < p.size(); ++c) {
        const Index3 idx = d.unflat(c);
        for (std::size_t i = 0; i < d.dims(); ++i) os << d.center(i, idx[i]) << ',';
        os << p[c] << '\n';
    }
}

}  // namespace psc
