// verify.hpp - standing oracle suites for the algebraic and integral
// identities the curvature/conformal machinery rests on. Each suite is
// deterministic given a seed and reports both sides, the gap, the declared
// tolerance and the offending node on failure.
#pragma once

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sigma2/conformal.hpp"
#include "sigma2/curvature.hpp"
#include "sigma2/grid.hpp"

namespace sigma2 {

struct IdentityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_gap = 0.0;
    double rel_gap = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double grid_h = 0.0;
    std::string detail;
};

namespace verify_detail {

inline IdentityReport make_report(std::string name, double lhs, double rhs, double tol,
                                  bool relative, double grid_h, std::string detail = "") {
    IdentityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.abs_gap = std::abs(lhs - rhs);
    const double den = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    r.rel_gap = r.abs_gap / den;
    r.tolerance = tol;
    r.pass = relative ? (r.rel_gap <= tol || r.abs_gap <= tol) : (r.abs_gap <= tol);
    r.grid_h = grid_h;
    r.detail = std::move(detail);
    return r;
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------
// Randomized smooth fields
// ---------------------------------------------------------------------------

/// Random smooth field adapted to the chart. On the band: a cosine polynomial
/// in 2r (even across both ends). On the torus: low trigonometric modes with
/// random phases; modes carrying a second harmonic on any axis are scaled by
/// k2_scale, which controls the size of the discretization defect in the
/// integral identities relative to the identity terms themselves.
inline ScalarField random_smooth_field(const GridPtr& g, std::mt19937_64& rng, double amplitude,
                                       double k2_scale = 0.25) {
    ScalarField f(g);
    if (g->kind == ChartKind::S3Band) {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        std::array<double, 4> a{};
        for (int k = 0; k <= 3; ++k) a[k] = amplitude * U(rng) / (1.0 + k * k);
        for (long i = 0; i < g->total; ++i) {
            const double r = g->node_coords(i)[0];
            double s = 0.0;
            for (int k = 0; k <= 3; ++k) s += a[k] * std::cos(2.0 * k * r);
            f[i] = s;
        }
        return f;
    }
    static const int kv[][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1},
                                {0, 1, 1}, {1, 1, 1}, {2, 0, 0}, {0, 2, 0}, {0, 0, 2}};
    std::uniform_real_distribution<double> Uph(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> Ua(0.5, 1.0);
    for (const auto& k : kv) {
        const int kmax = std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])});
        const double a = amplitude * Ua(rng) * (kmax >= 2 ? k2_scale : 1.0);
        const double p1 = Uph(rng), p2 = Uph(rng), p3 = Uph(rng);
        for (long i = 0; i < g->total; ++i) {
            const Vec3 x = g->node_coords(i);
            f[i] += a * std::cos(k[0] * x[0] + p1) * std::cos(k[1] * x[1] + p2) *
                    std::cos(k[2] * x[2] + p3);
        }
    }
    return f;
}

/// Random symmetric tensor field with entries of order `amp` (smooth, low mode).
inline SymTensorField random_sym_field(const GridPtr& g, std::mt19937_64& rng, double amp) {
    SymTensorField out(g);
    for (int c = 0; c < 6; ++c) {
        ScalarField comp = random_smooth_field(g, rng, amp, 1.0);
        for (long i = 0; i < g->total; ++i) out[i].comp(c) = comp[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// Lemma-style integral transformation of the sigma_2 functional under
/// g~ = e^{-2u} g:
///   int sigma_2(g~^{-1}A^1_{g~}) e^{-4u} dV
///     = int sigma_2 + 1/8 int R|du|^2 - 1/4 int |du|^4
///       + 1/2 int (Lap u)|du|^2 - 1/2 int A^1(du,du),   all against dV_g.
struct Lemma51Data {
    double lhs = 0.0;
    std::array<double, 5> terms{};
    double rhs() const { return terms[0] + terms[1] + terms[2] + terms[3] + terms[4]; }
    double gap() const { return std::abs(lhs - rhs()); }
    double max_term() const {
        double m = 0.0;
        for (const double t : terms) m = std::max(m, std::abs(t));
        return m;
    }
};

inline Lemma51Data lemma51_data(const MetricField& g, const CurvatureBundle& b,
                                const ScalarField& u) {
    const ConformalFactor cf = ConformalFactor::make(u, g, b.gamma);
    const SymTensorField A1 = schouten_t(b, g, 1.0);
    const SymTensorField A1t = transform_schouten_t(A1, cf, g, 1.0);
    const MetricField gt = conformal_metric(g, cf);

    Lemma51Data d;
    const ScalarField lhs_f = pointwise(g.grid(), [&](long i) {
        return sigma12_pencil(A1t[i], gt.inv(i)).s2 * std::exp(-4.0 * u[i]);
    });
    d.lhs = integrate(lhs_f, g);

    ScalarField s1, s2;
    sigma_fields(A1, g, s1, s2);
    d.terms[0] = integrate(s2, g);
    d.terms[1] =
        integrate(pointwise(g.grid(), [&](long i) { return b.scalar[i] * cf.grad_sq[i]; }), g) / 8.0;
    d.terms[2] =
        -integrate(pointwise(g.grid(), [&](long i) { return cf.grad_sq[i] * cf.grad_sq[i]; }), g) / 4.0;
    d.terms[3] =
        integrate(pointwise(g.grid(), [&](long i) { return cf.lap[i] * cf.grad_sq[i]; }), g) / 2.0;
    d.terms[4] =
        -integrate(pointwise(g.grid(), [&](long i) { return quad_form(A1[i], cf.grad_at(i)); }), g) / 2.0;
    return d;
}

inline IdentityReport check_lemma51(const MetricField& g, const CurvatureBundle& b,
                                    const ScalarField& u) {
    const Lemma51Data d = lemma51_data(g, b, u);
    const double h = g.grid()->max_active_spacing();
    const double scale = std::max({d.max_term(), std::abs(d.lhs), 1e-12});
    // O(h^2) envelope, capped so that O(1)-relative defects always fail
    const double tol = scale * std::min(0.25, std::max(15.0 * h * h, 1e-13));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "terms: %.6g %.6g %.6g %.6g %.6g", d.terms[0], d.terms[1],
                  d.terms[2], d.terms[3], d.terms[4]);
    return verify_detail::make_report("lemma51", d.lhs, d.rhs(), tol, false, h, buf);
}

/// Integral Bochner formula: int |Hess u|^2 + int Ric(du,du) - int (Lap u)^2 = 0.
inline IdentityReport check_bochner(const MetricField& g, const CurvatureBundle& b,
                                    const ScalarField& u) {
    const ConformalFactor cf = ConformalFactor::make(u, g, b.gamma);
    const double hess2 = integrate(pointwise(g.grid(), [&](long i) {
        return trace_product(sandwich(g.inv(i), cf.hess[i]), cf.hess[i]);
    }), g);
    const double ric_term = integrate(pointwise(g.grid(), [&](long i) {
        return quad_form(sandwich(g.inv(i), b.ricci[i]), cf.grad_at(i));
    }), g);
    const double lap2 = integrate(pointwise(g.grid(), [&](long i) {
        return cf.lap[i] * cf.lap[i];
    }), g);
    const double h = g.grid()->max_active_spacing();
    const double scale = std::max({hess2, std::abs(ric_term), lap2, 1e-12});
    const double tol = scale * std::min(0.25, std::max(5.0 * h * h, 1e-12));
    return verify_detail::make_report("bochner", hess2 + ric_term, lap2, tol, false, h);
}

/// (1/16)(1-t)(5-3t) = (1/24)(7/10 - t) + P2(t) with
/// P2(t) = 3t^2/16 - 11t/24 + 17/60, and P2 > 0 for all real t
/// (discriminant (11/24)^2 - 4*(3/16)*(17/60) = -7/2880 < 0).
inline IdentityReport check_p2(const std::vector<double>& tsamples) {
    auto p2 = [](double t) { return 3.0 * t * t / 16.0 - 11.0 * t / 24.0 + 17.0 / 60.0; };
    double worst = 0.0, worst_t = 0.0, min_p2 = std::numeric_limits<double>::infinity();
    for (const double t : tsamples) {
        const double lhs = (1.0 - t) * (5.0 - 3.0 * t) / 16.0;
        const double rhs = (7.0 / 10.0 - t) / 24.0 + p2(t);
        const double gap = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        if (gap > worst) {
            worst = gap;
            worst_t = t;
        }
        min_p2 = std::min(min_p2, p2(t));
    }
    const double disc = (11.0 / 24.0) * (11.0 / 24.0) - 4.0 * (3.0 / 16.0) * (17.0 / 60.0);
    IdentityReport r = verify_detail::make_report("p2", worst, 0.0, 1e-13, false, 0.0);
    r.pass = r.pass && min_p2 > 0.0 && disc < 0.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst rel gap %.3g at t=%.4g; min P2 = %.6g; disc = %.6g",
                  worst, worst_t, min_p2, disc);
    r.detail = buf;
    return r;
}

/// sigma_2(g^{-1}A^t) = sigma_2(g^{-1}A^1) + (1-t)(5-3t) sigma_1(g^{-1}A^1)^2
/// where A^t = A^1 + (1-t) sigma_1(g^{-1}A^1) g; machine-precision algebra.
inline IdentityReport check_sigma2_shift(const SymTensorField& A1, const MetricField& g, double t) {
    double worst = 0.0;
    long worst_node = -1;
    for (long i = 0; i < g.size(); ++i) {
        const SigmaPair sp1 = sigma12_pencil(A1[i], g.inv(i));
        const Sym3 At = A1[i] + (1.0 - t) * sp1.s1 * g.at(i);
        const double lhs = sigma12_pencil(At, g.inv(i)).s2;
        const double rhs = sp1.s2 + (1.0 - t) * (5.0 - 3.0 * t) * sp1.s1 * sp1.s1;
        const double den = std::max({std::abs(lhs), std::abs(rhs), 1.0});
        const double gap = std::abs(lhs - rhs) / den;
        if (gap > worst) {
            worst = gap;
            worst_node = i;
        }
    }
    IdentityReport r = verify_detail::make_report("sigma2_shift", worst, 0.0, 1e-12, false, 0.0);
    r.detail = "worst node " + std::to_string(worst_node) + " at t = " + std::to_string(t);
    return r;
}

/// Cone inequalities on Gamma_2^+ samples: -A + sigma_1 I > 0, A + sigma_1/3 I > 0,
/// and Newton's inequality sqrt(3) sigma_2^{1/2} <= sigma_1 (as 3 sigma_2 <= sigma_1^2).
/// Rejection-samples eigenvalue triples, plus full tensor samples against
/// random positive metrics to exercise the pencil route.
inline IdentityReport check_cone_inequalities(int nsamples, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 3.0);
    int violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    int accepted = 0;
    while (accepted < nsamples) {
        const double l1 = U(rng), l2 = U(rng), l3 = U(rng);
        const double s1 = l1 + l2 + l3;
        const double s2 = l1 * l2 + l1 * l3 + l2 * l3;
        if (!(s1 > 0.0 && s2 > 0.0)) continue;
        ++accepted;
        const double lmax = std::max({l1, l2, l3});
        const double lmin = std::min({l1, l2, l3});
        const double m1 = s1 - lmax;           // -A + sigma_1 I
        const double m2 = lmin + s1 / 3.0;     // A + sigma_1/3 I
        const double m3 = s1 * s1 - 3.0 * s2;  // Newton
        min_margin = std::min({min_margin, m1, m2});
        if (!(m1 > 0.0) || !(m2 > 0.0) || m3 < -1e-12 * s1 * s1) ++violations;
    }
    // tensor route: random symmetric A against random SPD g
    std::uniform_real_distribution<double> Us(-0.3, 0.3);
    int tensor_in_cone = 0;
    for (int k = 0; k < nsamples / 10; ++k) {
        Sym3 gm = Sym3::identity();
        for (int c = 0; c < 6; ++c) gm.comp(c) += Us(rng);
        if (!cholesky(gm).ok) continue;
        Sym3 A;
        for (int c = 0; c < 6; ++c) A.comp(c) = U(rng);
        const SigmaPair sp = sigma12_pencil(A, inverse(gm));
        if (!(sp.s1 > 0.0 && sp.s2 > 0.0)) continue;
        ++tensor_in_cone;
        const Sym3 M1 = -1.0 * A + sp.s1 * gm;
        const Sym3 M2 = A + (sp.s1 / 3.0) * gm;
        if (!cholesky(M1).ok || !cholesky(M2).ok) ++violations;
        if (sp.s1 * sp.s1 - 3.0 * sp.s2 < -1e-12 * sp.s1 * sp.s1) ++violations;
    }
    IdentityReport r = verify_detail::make_report("cone_inequalities",
                                                  static_cast<double>(violations), 0.0, 0.5,
                                                  false, 0.0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d triples + %d tensor samples, %d violations, min margin %.4g",
                  accepted, tensor_in_cone, violations, min_margin);
    r.detail = buf;
    return r;
}

/// Pointwise quadratic-form estimate on a conformal solution:
/// A^1_{g~} < (3-2t) sigma_1(g~^{-1}A^1_{g~}) e^{-2u} g whenever A^t_{g~} is in
/// the cone. Checked on solver outputs.
inline IdentityReport check_lemma53(const MetricField& g, const CurvatureBundle& b,
                                    const ScalarField& u, double t) {
    const ConformalFactor cf = ConformalFactor::make(u, g, b.gamma);
    const SymTensorField A1 = schouten_t(b, g, 1.0);
    const SymTensorField A1t = transform_schouten_t(A1, cf, g, 1.0);
    double min_margin = std::numeric_limits<double>::infinity();
    long worst = -1;
    bool cone_ok = true;
    for (long i = 0; i < g.size(); ++i) {
        const double e2u = std::exp(2.0 * u[i]);
        const SigmaPair sp = sigma12_pencil(A1t[i], g.inv(i));  // g~^{-1} A = e^{2u} g^{-1} A
        const Sym3 At = A1t[i] + (1.0 - t) * sp.s1 * g.at(i);
        const SigmaPair spt = sigma12_pencil(At, g.inv(i));
        if (!(spt.s1 > 0.0 && spt.s2 > 0.0)) cone_ok = false;
        const double sig1_tilde = e2u * sp.s1;
        const Sym3 M = (3.0 - 2.0 * t) * sig1_tilde * std::exp(-2.0 * u[i]) * g.at(i) - A1t[i];
        const double m = min_generalized_eig(M, g.at(i));
        if (m < min_margin) {
            min_margin = m;
            worst = i;
        }
    }
    IdentityReport r;
    r.name = "lemma53";
    r.lhs = min_margin;
    r.rhs = 0.0;
    r.abs_gap = std::max(0.0, -min_margin);
    r.rel_gap = r.abs_gap;
    r.tolerance = 0.0;
    r.pass = cone_ok && min_margin > 0.0;
    r.grid_h = g.grid()->max_active_spacing();
    r.detail = std::string("min margin ") + std::to_string(min_margin) + " at node " +
               std::to_string(worst) + (cone_ok ? "" : " (cone precondition violated)");
    return r;
}

/// Q-curvature corollary arithmetic: if Q >= R^2/48 pointwise then
/// int |Ric|^2 <= (23/64) int R^2 and int sigma_2 >= (1/128) int R^2;
/// the integration step int Lap R dV = 0 is checked directly.
inline IdentityReport check_q_corollary(const MetricField& g, const CurvatureBundle& b) {
    const ScalarField Q = q_curvature(b, g);
    double hyp_min = std::numeric_limits<double>::infinity();
    for (long i = 0; i < g.size(); ++i)
        hyp_min = std::min(hyp_min, Q[i] - b.scalar[i] * b.scalar[i] / 48.0);

    const double int_ric2 = integrate(pointwise(g.grid(), [&](long i) {
        return trace_product(sandwich(g.inv(i), b.ricci[i]), b.ricci[i]);
    }), g);
    const double int_R2 = integrate(pointwise(g.grid(), [&](long i) {
        return b.scalar[i] * b.scalar[i];
    }), g);
    const SymTensorField A1 = schouten_t(b, g, 1.0);
    ScalarField s1, s2;
    sigma_fields(A1, g, s1, s2);
    const double int_s2 = integrate(s2, g);

    const ScalarField lapR = laplace_beltrami(b.scalar, g, b.gamma);
    const double int_lapR = integrate(lapR, g);

    const double h = g.grid()->max_active_spacing();
    double supR = 0.0;
    for (long i = 0; i < g.size(); ++i) supR = std::max(supR, std::abs(b.scalar[i]));
    const double div_tol = std::max(1e-10, 20.0 * h * h * (1.0 + supR) * volume(g));
    const bool div_ok = std::abs(int_lapR) <= div_tol;

    const double slack = 1e-9 * std::max(1.0, int_R2);
    const bool hypothesis = hyp_min >= -1e-12;
    const bool ineq1 = int_ric2 <= (23.0 / 64.0) * int_R2 + slack;
    const bool ineq2 = int_s2 >= (1.0 / 128.0) * int_R2 - slack;

    IdentityReport r;
    r.name = "q_corollary";
    r.lhs = int_s2;
    r.rhs = int_R2 / 128.0;
    r.abs_gap = std::abs(int_lapR);
    r.rel_gap = r.abs_gap / std::max(1.0, int_R2);
    r.tolerance = div_tol;
    r.pass = div_ok && (!hypothesis || (ineq1 && ineq2));
    r.grid_h = h;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "min(Q - R^2/48) = %.6g; int|Ric|^2 = %.6g vs 23/64 int R^2 = %.6g; "
                  "int sigma2 = %.6g vs int R^2/128 = %.6g; int LapR = %.3g",
                  hyp_min, int_ric2, 23.0 / 64.0 * int_R2, int_s2, int_R2 / 128.0, int_lapR);
    r.detail = buf;
    return r;
}

/// Dual-route check of the A^t transformation law: law expression vs a full
/// curvature recomputation of the conformal metric, sup norm over nodes and
/// components.
inline IdentityReport check_transformation_laws(const MetricField& g, const CurvatureBundle& b,
                                                const ScalarField& u, double t) {
    const ConformalFactor cf = ConformalFactor::make(u, g, b.gamma);
    const SymTensorField At = schouten_t(b, g, t);
    const SymTensorField law = transform_schouten_t(At, cf, g, t);
    const MetricField gt = conformal_metric(g, cf);
    const CurvatureBundle bt = curvature_of(gt);
    const SymTensorField direct = schouten_t(bt, gt, t);

    double gap = 0.0, scale = 1.0;
    long worst = -1;
    for (long i = 0; i < g.size(); ++i)
        for (int k = 0; k < 6; ++k) {
            const double d = std::abs(law[i].comp(k) - direct[i].comp(k));
            scale = std::max(scale, std::abs(law[i].comp(k)));
            if (d > gap) {
                gap = d;
                worst = i;
            }
        }
    const double h = g.grid()->max_active_spacing();
    const double tol = 5.0 * h * h * scale;
    IdentityReport r = verify_detail::make_report("transformation_laws", gap, 0.0, tol, false, h);
    r.detail = "t = " + std::to_string(t) + ", worst node " + std::to_string(worst);
    return r;
}

/// Dual sigma_2 formula at t = 1: eigenvalue/invariant route against
/// -|Ric|^2/2 + 3R^2/16, relative gap over all nodes.
inline IdentityReport check_sigma2_dual_formula(const MetricField& g, const CurvatureBundle& b) {
    const SymTensorField A1 = schouten_t(b, g, 1.0);
    ScalarField s1, s2;
    sigma_fields(A1, g, s1, s2);
    const ScalarField alt = sigma2_via_norms(b, g);
    double worst = 0.0;
    long worst_node = -1;
    for (long i = 0; i < g.size(); ++i) {
        const double den = std::max({std::abs(s2[i]), std::abs(alt[i]), 1.0});
        const double gap = std::abs(s2[i] - alt[i]) / den;
        if (gap > worst) {
            worst = gap;
            worst_node = i;
        }
    }
    IdentityReport r = verify_detail::make_report("sigma2_dual_formula", worst, 0.0, 1e-12,
                                                  false, g.grid()->max_active_spacing());
    r.detail = "worst node " + std::to_string(worst_node);
    return r;
}

// ---------------------------------------------------------------------------
// Suite runner
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {
        "lemma51", "bochner", "p2", "sigma2_shift", "cone_inequalities",
        "q_corollary", "transformation_laws", "sigma2_dual_formula"};
    return names;
}

/// Run the named suites (or all of them) against a geometry. `u` drives the
/// conformal suites; randomized suites (sigma2_shift, cone) draw from `seed`.
inline std::vector<IdentityReport> run_suites(const std::vector<std::string>& names,
                                              const MetricField& g, const CurvatureBundle& b,
                                              const ScalarField& u, double t, uint64_t seed) {
    std::vector<std::string> todo;
    for (const auto& n : names) {
        if (n == "all") {
            todo = suite_names();
            break;
        }
        bool known = false;
        for (const auto& s : suite_names()) known = known || (s == n);
        if (!known) throw ValidationError("unknown verify suite '" + n + "'");
        todo.push_back(n);
    }
    std::mt19937_64 rng(seed);
    std::vector<IdentityReport> out;
    for (const auto& n : todo) {
        if (n == "lemma51") out.push_back(check_lemma51(g, b, u));
        else if (n == "bochner") out.push_back(check_bochner(g, b, u));
        else if (n == "p2") {
            std::vector<double> ts;
            std::uniform_real_distribution<double> U(-2.0, 1.5);
            for (int i = 0; i < 200; ++i) ts.push_back(U(rng));
            ts.push_back(0.0);
            ts.push_back(1.0);
            ts.push_back(2.0 / 3.0);
            ts.push_back(11.0 / 9.0);
            out.push_back(check_p2(ts));
        } else if (n == "sigma2_shift") {
            std::uniform_real_distribution<double> U(-2.0, 1.0);
            const SymTensorField A = random_sym_field(g.grid(), rng, 1.0);
            out.push_back(check_sigma2_shift(A, g, U(rng)));
        } else if (n == "cone_inequalities") {
            out.push_back(check_cone_inequalities(10000, seed));
        } else if (n == "q_corollary") {
            out.push_back(check_q_corollary(g, b));
        } else if (n == "transformation_laws") {
            out.push_back(check_transformation_laws(g, b, u, t));
        } else if (n == "sigma2_dual_formula") {
            out.push_back(check_sigma2_dual_formula(g, b));
        }
    }
    return out;
}

}  // namespace sigma2
