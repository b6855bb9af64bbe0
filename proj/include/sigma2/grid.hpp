// grid.hpp - coordinate charts with grid topology, discrete scalar/tensor
// fields, second-order finite-difference calculus and metric quadrature.
//
// Two charts are supported:
//   * Torus3  - periodic box [0,L0) x [0,L1) x [0,L2), nodes at i*h.
//   * S3Band  - Hopf band r in (0, pi/2) with staggered nodes r_j = (j+1/2)h,
//               plus periodic theta/phi axes (size 1 when data only depends
//               on r). Smooth invariant scalars extend evenly across r = 0
//               and r = pi/2, so stencils use reflected ghost values there;
//               derived quantities that extend oddly pass Parity::Odd.
#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <mutex>
#include <thread>
#include <vector>

#include "sigma2/linalg.hpp"

namespace sigma2 {

enum class ChartKind { Torus3, S3Band };

inline constexpr double kPi = 3.14159265358979323846;

struct ChartGrid {
    ChartKind kind = ChartKind::Torus3;
    std::array<int, 3> dims{};
    std::array<double, 3> lo{};
    std::array<double, 3> length{};
    std::array<double, 3> h{};
    std::array<long, 3> stride{};
    long total = 0;

    bool active(int axis) const { return dims[axis] > 1; }
    bool reflective(int axis) const { return kind == ChartKind::S3Band && axis == 0; }

    double coord(int axis, int index) const {
        const double off = reflective(axis) ? 0.5 : 0.0;
        return lo[axis] + (static_cast<double>(index) + off) * h[axis];
    }

    long index(int i, int j, int k) const { return i * stride[0] + j * stride[1] + k * stride[2]; }

    std::array<int, 3> unpack(long n) const {
        std::array<int, 3> c;
        c[0] = static_cast<int>(n / stride[0]);
        const long rem = n % stride[0];
        c[1] = static_cast<int>(rem / stride[1]);
        c[2] = static_cast<int>(rem % stride[1]);
        return c;
    }

    Vec3 node_coords(long n) const {
        const auto c = unpack(n);
        return {coord(0, c[0]), coord(1, c[1]), coord(2, c[2])};
    }

    double max_active_spacing() const {
        double m = 0.0;
        for (int a = 0; a < 3; ++a)
            if (active(a)) m = std::max(m, h[a]);
        return m;
    }
};

using GridPtr = std::shared_ptr<const ChartGrid>;

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Build a chart. Ranges are per-axis [lo, hi); hi - lo is the periodic length
/// on periodic axes and the band width on the S3Band r axis (must be pi/2).
inline GridPtr make_grid(ChartKind kind, const std::array<int, 3>& dims,
                         const std::array<std::array<double, 2>, 3>& ranges) {
    auto g = std::make_shared<ChartGrid>();
    g->kind = kind;
    g->dims = dims;
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw ValidationError("make_grid: axis " + std::to_string(a) + " has no nodes");
        if (dims[a] > 1 && dims[a] < 4)
            throw ValidationError("make_grid: axis " + std::to_string(a) +
                                  " needs at least 4 nodes for second-order stencils");
        const double len = ranges[a][1] - ranges[a][0];
        if (!(len > 0.0)) throw ValidationError("make_grid: axis " + std::to_string(a) + " range is not positive");
        g->lo[a] = ranges[a][0];
        g->length[a] = len;
        g->h[a] = len / dims[a];
    }
    if (kind == ChartKind::S3Band) {
        if (std::abs(ranges[0][0]) > 1e-12 || std::abs(ranges[0][1] - kPi / 2.0) > 1e-12)
            throw ValidationError("make_grid: S3Band r-range must be (0, pi/2)");
    }
    g->stride = {static_cast<long>(dims[1]) * dims[2], dims[2], 1};
    g->total = static_cast<long>(dims[0]) * dims[1] * dims[2];
    return g;
}

inline GridPtr make_torus_grid(int n0, int n1, int n2, double L = 2.0 * kPi) {
    return make_grid(ChartKind::Torus3, {n0, n1, n2}, {{{0.0, L}, {0.0, L}, {0.0, L}}});
}

inline GridPtr make_band_grid(int nr, int ntheta = 1, int nphi = 1) {
    return make_grid(ChartKind::S3Band, {nr, ntheta, nphi},
                     {{{0.0, kPi / 2.0}, {0.0, 2.0 * kPi}, {0.0, 2.0 * kPi}}});
}

// ---------------------------------------------------------------------------
// Optional data parallelism. Thread count comes from SIGMA2_THREADS (default 1);
// loops must be pure per-index maps, reductions stay sequential for determinism.
// ---------------------------------------------------------------------------

inline int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("SIGMA2_THREADS");
        if (!env) return 1;
        const int v = std::atoi(env);
        return v < 1 ? 1 : (v > 64 ? 64 : v);
    }();
    return n;
}

template <typename F>
void parallel_for(long n, F&& body) {
    const int nt = thread_count();
    if (nt <= 1 || n < 4096) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::exception_ptr err;
    std::mutex err_mutex;
    const long chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const long b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, &err, &err_mutex, b, e] {
            try {
                for (long i = b; i < e; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        const double y = v - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

struct ScalarField {
    GridPtr grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(GridPtr g, double fill = 0.0) : grid(std::move(g)), v(grid->total, fill) {}

    long size() const { return static_cast<long>(v.size()); }
    double& operator[](long i) { return v[i]; }
    double operator[](long i) const { return v[i]; }

    void check_finite(const char* what = "ScalarField") const {
        for (long i = 0; i < size(); ++i)
            if (!std::isfinite(v[i]))
                throw NumericalError(std::string(what) + ": non-finite value at node " + std::to_string(i));
    }
};

struct SymTensorField {
    GridPtr grid;
    std::vector<Sym3> v;

    SymTensorField() = default;
    explicit SymTensorField(GridPtr g) : grid(std::move(g)), v(grid->total) {}

    long size() const { return static_cast<long>(v.size()); }
    Sym3& operator[](long i) { return v[i]; }
    const Sym3& operator[](long i) const { return v[i]; }

    void check_finite(const char* what = "SymTensorField") const {
        for (long i = 0; i < size(); ++i)
            if (!v[i].finite())
                throw NumericalError(std::string(what) + ": non-finite entry at node " + std::to_string(i));
    }
};

/// Positive definite metric field. Construction factors every node once and
/// caches the inverse and sqrt(det).
class MetricField {
  public:
    static MetricField make(SymTensorField t) {
        t.check_finite("MetricField");
        MetricField m;
        m.t_ = std::move(t);
        const long n = m.t_.size();
        m.inv_.resize(n);
        m.sqrt_det_.resize(n);
        for (long i = 0; i < n; ++i) {
            const Chol3 c = cholesky(m.t_[i]);
            if (!c.ok)
                throw ValidationError("MetricField: not positive definite at node " + std::to_string(i));
            m.sqrt_det_[i] = c.l11 * c.l22 * c.l33;
            m.inv_[i] = inverse(m.t_[i]);
        }
        return m;
    }

    const GridPtr& grid() const { return t_.grid; }
    const SymTensorField& tensor() const { return t_; }
    const Sym3& at(long i) const { return t_.v[i]; }
    const Sym3& inv(long i) const { return inv_[i]; }
    double sqrt_det(long i) const { return sqrt_det_[i]; }
    long size() const { return t_.size(); }

  private:
    SymTensorField t_;
    std::vector<Sym3> inv_;
    std::vector<double> sqrt_det_;
};

// ---------------------------------------------------------------------------
// Finite differences
//
// All derivative operators are built from one centered first-difference sweep
// per axis; a second derivative is that sweep applied twice. Using a single
// one-axis symbol everywhere keeps the discrete product/Bochner identities
// telescoping in the integral suites.
// ---------------------------------------------------------------------------

enum class Parity { Even, Odd };

/// One centered first-difference sweep along `axis`. `rpar` is the parity of
/// the input data across the S3Band r boundaries (ignored on periodic axes).
/// The output flips parity on that axis. Inactive axes produce zero.
inline void fd1_sweep(const ChartGrid& gr, const double* in, double* out, int axis, Parity rpar) {
    const long n = gr.total;
    if (!gr.active(axis)) {
        for (long i = 0; i < n; ++i) out[i] = 0.0;
        return;
    }
    const int na = gr.dims[axis];
    const long sa = gr.stride[axis];
    const double inv2h = 1.0 / (2.0 * gr.h[axis]);
    const bool refl = gr.reflective(axis);
    const double sgn = (rpar == Parity::Even) ? 1.0 : -1.0;

    parallel_for(n, [&](long idx) {
        const auto c = gr.unpack(idx);
        const int i = c[axis];
        double up, dn;
        if (i + 1 < na) {
            up = in[idx + sa];
        } else {
            up = refl ? sgn * in[idx] : in[idx - static_cast<long>(na - 1) * sa];
        }
        if (i - 1 >= 0) {
            dn = in[idx - sa];
        } else {
            dn = refl ? sgn * in[idx] : in[idx + static_cast<long>(na - 1) * sa];
        }
        out[idx] = (up - dn) * inv2h;
    });
}

inline std::vector<double> fd1(const ChartGrid& gr, const std::vector<double>& in, int axis, Parity rpar) {
    std::vector<double> out(in.size());
    fd1_sweep(gr, in.data(), out.data(), axis, rpar);
    return out;
}

/// Public spec operation: first or second partial of a scalar field.
/// Scalar fields on the S3Band extend evenly across the band ends.
inline ScalarField fd_partial(const ScalarField& f, int axis, int order) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("fd_partial: axis out of range");
    if (!f.grid->active(axis)) throw std::invalid_argument("fd_partial: axis " + std::to_string(axis) + " is inactive");
    if (order != 1 && order != 2) throw std::invalid_argument("fd_partial: order must be 1 or 2");
    ScalarField out(f.grid);
    fd1_sweep(*f.grid, f.v.data(), out.v.data(), axis, Parity::Even);
    if (order == 2) {
        std::vector<double> tmp(out.v);
        fd1_sweep(*f.grid, tmp.data(), out.v.data(), axis, Parity::Odd);
    }
    return out;
}

/// Mixed/pure second partial d_a d_b of an even scalar; tracks r-parity
/// through the composition.
inline std::vector<double> second_partial(const ChartGrid& gr, const std::vector<double>& in, int a, int b) {
    if (!gr.active(a) || !gr.active(b)) return std::vector<double>(in.size(), 0.0);
    std::vector<double> t = fd1(gr, in, b, Parity::Even);
    const Parity p = (gr.reflective(b)) ? Parity::Odd : Parity::Even;
    return fd1(gr, t, a, p);
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Integral of phi dV_g over the chart. Torus3 uses the periodic midpoint rule
/// (phi * sqrt(det g) * h^3). On the S3Band the volume density carries the
/// sin(r)cos(r) coordinate degeneracy; the quadrature weights each node with
/// the exact cell mass of that weight so that constants integrate exactly,
/// and multiplies by the regular part sqrt(det g)/(sin r cos r).
inline double integrate(const ScalarField& phi, const MetricField& g) {
    if (phi.grid.get() != g.grid().get())
        throw std::invalid_argument("integrate: field and metric live on different grids");
    const ChartGrid& gr = *phi.grid;
    KahanSum acc;
    if (gr.kind == ChartKind::Torus3) {
        const double cell = gr.h[0] * gr.h[1] * gr.h[2];
        for (long i = 0; i < gr.total; ++i) acc.add(phi[i] * g.sqrt_det(i) * cell);
        return acc.sum;
    }
    const double cell_ang = gr.h[1] * gr.h[2];
    const double hr = gr.h[0];
    // exact masses of sin(r)cos(r) over the r-cells: 0.5*(sin^2 r_right - sin^2 r_left)
    std::vector<double> mass(gr.dims[0]);
    for (int i = 0; i < gr.dims[0]; ++i) {
        const double rl = i * hr, rr = (i + 1) * hr;
        const double sl = std::sin(rl), sr = std::sin(rr);
        mass[i] = 0.5 * (sr * sr - sl * sl);
    }
    for (long idx = 0; idx < gr.total; ++idx) {
        const auto c = gr.unpack(idx);
        const double r = gr.coord(0, c[0]);
        const double w = std::sin(r) * std::cos(r);
        acc.add(phi[idx] * (g.sqrt_det(idx) / w) * mass[c[0]] * cell_ang);
    }
    return acc.sum;
}

/// Volume of the chart under g.
inline double volume(const MetricField& g) {
    ScalarField one(g.grid(), 1.0);
    return integrate(one, g);
}

// Pointwise helpers used throughout the tensor modules.

inline ScalarField map_field(const GridPtr& g, const std::vector<double>& v) {
    ScalarField f(g);
    f.v = v;
    return f;
}

template <typename F>
ScalarField pointwise(const GridPtr& g, F&& fn) {
    ScalarField out(g);
    parallel_for(g->total, [&](long i) { out[i] = fn(i); });
    return out;
}

template <typename F>
SymTensorField pointwise_sym(const GridPtr& g, F&& fn) {
    SymTensorField out(g);
    parallel_for(g->total, [&](long i) { out[i] = fn(i); });
    return out;
}

inline double sup_abs(const ScalarField& f) {
    double m = 0.0;
    for (long i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
    return m;
}

inline double sup_abs_diff(const SymTensorField& a, const SymTensorField& b) {
    double m = 0.0;
    for (long i = 0; i < a.size(); ++i)
        for (int k = 0; k < 6; ++k) m = std::max(m, std::abs(a[i].comp(k) - b[i].comp(k)));
    return m;
}

}  // namespace sigma2
