// solver.hpp - continuation solver for the path of fully nonlinear equations
//
//     sigma_2^{1/2}( g^{-1} A^t_{u_t} ) = f e^{2 u_t},    t in [delta, t0],
//
// with f = sigma_2^{1/2}(g^{-1} A^delta_g) so that u = 0 solves the start of
// the path. The residual is kept in squared form F = sigma_2 - f^2 e^{4u}
// (same roots inside the cone, no square-root derivative blowup near the
// cone boundary). Each t-step runs a damped Newton iteration whose linear
// systems are solved matrix-free by preconditioned BiCGStab; the line search
// only accepts iterates that keep every node inside Gamma_2^+.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sigma2/conformal.hpp"
#include "sigma2/curvature.hpp"
#include "sigma2/grid.hpp"

namespace sigma2 {

struct SolverOptions {
    double delta_margin = 0.1;  // safety margin below the largest admissible delta
    double path_floor = 1.0;    // guaranteed continuation length t0 - delta
    double t0 = 2.0 / 3.0;
    int steps = 64;              // uniform schedule; bisection on failure
    double dt_min_div = 4096.0;  // dt_min = (t0 - delta) / dt_min_div
    double tol_factor = 1e-9;    // residual tolerance = tol_factor * sup f^2
    int max_newton = 30;
    double krylov_rtol = 1e-10;
    int krylov_maxit = 2000;
    double damping_min = 1e-6;
};

struct ProblemSetup {
    MetricField g;
    CurvatureBundle bundle;
    SymTensorField schouten1;  // A^1_g
    ScalarField sigma1_a1;     // sigma_1(g^{-1} A^1_g)
    ScalarField f;
    ScalarField f_sq;
    double delta = 0.0;
    double t0 = 2.0 / 3.0;
    double sup_f_sq = 0.0;
};

/// Largest-margin start parameter: delta* = min over nodes of
/// 4 lambda_min(g^{-1}Ric) / R, capped so the path has length >= path_floor.
/// Requires R > 0 pointwise.
inline double pick_delta(const MetricField& g, const CurvatureBundle& b, double margin,
                         double t0 = 2.0 / 3.0, double path_floor = 1.0) {
    double dstar = std::numeric_limits<double>::infinity();
    for (long i = 0; i < g.size(); ++i) {
        if (!(b.scalar[i] > 0.0))
            throw ValidationError("R_g > 0 required: scalar curvature not positive at node " +
                                  std::to_string(i));
        const double lmin = min_generalized_eig(b.ricci[i], g.at(i));
        dstar = std::min(dstar, 4.0 * lmin / b.scalar[i]);
    }
    const double delta = std::min(dstar - margin, t0 - path_floor);

    const SymTensorField Ad = schouten_t(b, g, delta);
    for (long i = 0; i < g.size(); ++i)
        if (!cholesky(Ad[i]).ok)
            throw NumericalError("pick_delta: A^delta not positive definite at node " +
                                 std::to_string(i));
    return delta;
}

inline ProblemSetup make_setup(MetricField g, CurvatureBundle b, const SolverOptions& opt = {}) {
    if (!(opt.t0 <= 2.0 / 3.0 + 1e-12))
        throw ValidationError("make_setup: t0 must satisfy t0 <= 2/3");
    if (opt.steps < 1) throw ValidationError("make_setup: steps must be positive");
    ProblemSetup s;
    s.delta = pick_delta(g, b, opt.delta_margin, opt.t0, opt.path_floor);
    if (!(s.delta < opt.t0))
        throw ValidationError("make_setup: continuation interval is empty (delta >= t0)");
    s.t0 = opt.t0;
    s.schouten1 = schouten_t(b, g, 1.0);
    ScalarField s1, s2;
    sigma_fields(s.schouten1, g, s1, s2);
    s.sigma1_a1 = std::move(s1);
    const SymTensorField Ad = schouten_t(b, g, s.delta);
    sigma_fields(Ad, g, s1, s2);
    s.f = ScalarField(g.grid());
    s.f_sq = ScalarField(g.grid());
    s.sup_f_sq = 0.0;
    for (long i = 0; i < g.size(); ++i) {
        if (!(s2[i] > 0.0))
            throw NumericalError("make_setup: sigma_2(A^delta) not positive at node " +
                                 std::to_string(i));
        s.f_sq[i] = s2[i];
        s.f[i] = std::sqrt(s2[i]);
        s.sup_f_sq = std::max(s.sup_f_sq, s2[i]);
    }
    s.g = std::move(g);
    s.bundle = std::move(b);
    return s;
}

/// A^t_u at one node from the cached background pieces and the conformal
/// factor derivatives (transformation law of A^t).
inline Sym3 schouten_t_of_u(const ProblemSetup& s, const ConformalFactor& u, double t, long i) {
    const Vec3 d = u.grad_at(i);
    Sym3 dudu;
    for (int k = 0; k < 6; ++k) dudu.comp(k) = d[kSymPairs[k][0]] * d[kSymPairs[k][1]];
    // A^t_g = A^1_g + (1-t) sigma_1(g^{-1}A^1) g
    return s.schouten1[i] + ((1.0 - t) * (s.sigma1_a1[i] + u.lap[i])) * s.g.at(i) + u.hess[i] +
           dudu - 0.5 * (2.0 - t) * u.grad_sq[i] * s.g.at(i);
}

/// Residual field F_t(u) = sigma_2(g^{-1} A^t_u) - f^2 e^{4u}.
inline ScalarField residual(const ProblemSetup& s, const ConformalFactor& u, double t) {
    return pointwise(s.g.grid(), [&](long i) {
        const Sym3 A = schouten_t_of_u(s, u, t, i);
        return sigma12_pencil(A, s.g.inv(i)).s2 - s.f_sq[i] * std::exp(4.0 * u.u[i]);
    });
}

/// Residual plus the cone diagnostics the continuation needs, in one pass.
struct Evaluation {
    ScalarField F;
    double res_sup = 0.0;
    double cone_margin = 0.0;           // min over nodes of min(sigma_1, sigma_2), background g^{-1}
    double cone_margin_conformal = 0.0; // same with the g~-referenced spectrum
    long worst_margin_node = -1;
};

inline Evaluation evaluate(const ProblemSetup& s, const ConformalFactor& u, double t) {
    Evaluation ev;
    ev.F = ScalarField(s.g.grid());
    double margin = std::numeric_limits<double>::infinity();
    double margin_c = std::numeric_limits<double>::infinity();
    long worst = -1;
    for (long i = 0; i < s.g.size(); ++i) {
        const Sym3 A = schouten_t_of_u(s, u, t, i);
        const SigmaPair sp = sigma12_pencil(A, s.g.inv(i));
        const double e2u = std::exp(2.0 * u.u[i]);
        ev.F[i] = sp.s2 - s.f_sq[i] * e2u * e2u;
        ev.res_sup = std::max(ev.res_sup, std::abs(ev.F[i]));
        const double m = std::min(sp.s1, sp.s2);
        if (m < margin) {
            margin = m;
            worst = i;
        }
        margin_c = std::min(margin_c, std::min(sp.s1 * e2u, sp.s2 * e2u * e2u));
    }
    ev.cone_margin = margin;
    ev.cone_margin_conformal = margin_c;
    ev.worst_margin_node = worst;
    return ev;
}

// ---------------------------------------------------------------------------
// Linearization.  dsigma_2[B] = <T_1(g^{-1}A), B> and B collects the u-linear
// part of the transformation law in direction v:
//   B(v) = Hess v + (1-t)(Lap v) g + du (x) dv + dv (x) du - (2-t) <du,dv> g,
// so L[v] = P : Hess v + 2 <w, dv> - 4 f^2 e^{4u} v with
//   P = S + 2 (1-t) sigma_1 g^{-1},  S = sigma_1 g^{-1} - g^{-1} A g^{-1},
//   w^b = S^{ab} du_a - (2-t) sigma_1 (g^{-1} du)^b.
// ---------------------------------------------------------------------------

class LinearizedOperator {
  public:
    LinearizedOperator(const ProblemSetup& s, const ConformalFactor& u, double t) : setup_(s) {
        const long n = s.g.size();
        P_.resize(n);
        w_.resize(n);
        coef0_.resize(n);
        for (long i = 0; i < n; ++i) {
            const Sym3 A = schouten_t_of_u(s, u, t, i);
            const Sym3& gi = s.g.inv(i);
            const double sig1 = sigma12_pencil(A, gi).s1;
            const Sym3 S = sig1 * gi - sandwich(gi, A);
            P_[i] = S + 2.0 * (1.0 - t) * sig1 * gi;
            const Vec3 d = u.grad_at(i);
            const Vec3 Sdu = mat_vec(S, d);
            const Vec3 gdu = mat_vec(gi, d);
            for (int b = 0; b < 3; ++b) w_[i][b] = Sdu[b] - (2.0 - t) * sig1 * gdu[b];
            const double e2u = std::exp(2.0 * u.u[i]);
            coef0_[i] = -4.0 * s.f_sq[i] * e2u * e2u;
        }
    }

    std::vector<double> apply(const std::vector<double>& v) const {
        const ChartGrid& gr = *setup_.g.grid();
        ScalarField vf = map_field(setup_.g.grid(), v);
        const SymTensorField hv = hessian_scalar(vf, setup_.bundle.gamma);
        std::array<std::vector<double>, 3> dv;
        for (int a = 0; a < 3; ++a) dv[a] = fd1(gr, v, a, Parity::Even);

        std::vector<double> out(v.size());
        parallel_for(static_cast<long>(v.size()), [&](long i) {
            double s = trace_product(P_[i], hv[i]) + coef0_[i] * v[i];
            for (int b = 0; b < 3; ++b) s += 2.0 * w_[i][b] * dv[b][i];
            out[i] = s;
        });
        return out;
    }

    /// Approximate diagonal for Jacobi preconditioning: second-difference
    /// diagonal of the principal part plus the zeroth-order coefficient.
    std::vector<double> diagonal() const {
        const ChartGrid& gr = *setup_.g.grid();
        std::vector<double> d(P_.size());
        for (long i = 0; i < static_cast<long>(P_.size()); ++i) {
            double s = coef0_[i];
            for (int a = 0; a < 3; ++a)
                if (gr.active(a)) s -= P_[i](a, a) / (2.0 * gr.h[a] * gr.h[a]);
            d[i] = (std::abs(s) > 1e-300) ? s : 1.0;
        }
        return d;
    }

  private:
    const ProblemSetup& setup_;
    std::vector<Sym3> P_;
    std::vector<Vec3> w_;
    std::vector<double> coef0_;
};

/// Directional derivative L[v] of the residual at (u, t).
inline ScalarField linearize(const ProblemSetup& s, const ConformalFactor& u, double t,
                             const ScalarField& v) {
    LinearizedOperator op(s, u, t);
    return map_field(s.g.grid(), op.apply(v.v));
}

// ---------------------------------------------------------------------------
// Matrix-free BiCGStab with Jacobi preconditioning
// ---------------------------------------------------------------------------

struct KrylovResult {
    std::vector<double> x;
    bool converged = false;
    int iters = 0;
    double rel_res = 0.0;
};

inline KrylovResult bicgstab(const LinearizedOperator& op, const std::vector<double>& rhs,
                             double rtol, int maxit) {
    const long n = static_cast<long>(rhs.size());
    const std::vector<double> diag = op.diagonal();
    auto prec = [&](const std::vector<double>& v) {
        std::vector<double> out(n);
        for (long i = 0; i < n; ++i) out[i] = v[i] / diag[i];
        return out;
    };
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        KahanSum s;
        for (long i = 0; i < n; ++i) s.add(a[i] * b[i]);
        return s.sum;
    };
    auto norm = [&](const std::vector<double>& a) { return std::sqrt(dot(a, a)); };

    KrylovResult res;
    res.x.assign(n, 0.0);
    std::vector<double> r = rhs;  // r = b - A*0
    const double bnorm = norm(rhs);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    std::vector<double> rhat = r, p(n, 0.0), v(n, 0.0);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    for (int it = 0; it < maxit; ++it) {
        const double rho_new = dot(rhat, r);
        if (std::abs(rho_new) < 1e-300) break;
        if (it == 0) {
            p = r;
        } else {
            const double beta = (rho_new / rho) * (alpha / omega);
            for (long i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        rho = rho_new;
        const std::vector<double> ph = prec(p);
        v = op.apply(ph);
        const double rhat_v = dot(rhat, v);
        if (std::abs(rhat_v) < 1e-300) break;
        alpha = rho / rhat_v;
        std::vector<double> sres(n);
        for (long i = 0; i < n; ++i) sres[i] = r[i] - alpha * v[i];
        if (norm(sres) <= rtol * bnorm) {
            for (long i = 0; i < n; ++i) res.x[i] += alpha * ph[i];
            res.converged = true;
            res.iters = it + 1;
            res.rel_res = norm(sres) / bnorm;
            return res;
        }
        const std::vector<double> sh = prec(sres);
        const std::vector<double> tvec = op.apply(sh);
        const double tt = dot(tvec, tvec);
        if (tt < 1e-300) break;
        omega = dot(tvec, sres) / tt;
        for (long i = 0; i < n; ++i) {
            res.x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = sres[i] - omega * tvec[i];
        }
        const double rn = norm(r);
        res.iters = it + 1;
        res.rel_res = rn / bnorm;
        if (rn <= rtol * bnorm) {
            res.converged = true;
            return res;
        }
        if (std::abs(omega) < 1e-300) break;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Newton step and continuation
// ---------------------------------------------------------------------------

struct NewtonOutcome {
    bool accepted = false;
    std::string reason;
    long bad_node = -1;
    ConformalFactor u;
    Evaluation eval;
    double alpha = 0.0;
    int krylov_iters = 0;
};

/// One damped Newton step from (u, t). The damping factor is halved until the
/// residual sup-norm decreases and every node stays strictly inside the cone;
/// underflow of the factor is reported as a cone breach / no descent failure.
inline NewtonOutcome newton_step(const ProblemSetup& s, const ConformalFactor& u, double t,
                                 const Evaluation& ev, const SolverOptions& opt = {}) {
    NewtonOutcome out;
    if (ev.res_sup <= 1e-14 * (1.0 + s.sup_f_sq)) {  // already at the roundoff floor
        out.accepted = true;
        out.u = u;
        out.eval = ev;
        out.alpha = 0.0;
        return out;
    }
    LinearizedOperator op(s, u, t);
    std::vector<double> rhs(ev.F.v);
    for (auto& x : rhs) x = -x;
    const KrylovResult kr = bicgstab(op, rhs, opt.krylov_rtol, opt.krylov_maxit);
    out.krylov_iters = kr.iters;

    double alpha = 1.0;
    long bad = -1;
    while (alpha >= opt.damping_min) {
        ScalarField trial(s.g.grid());
        for (long i = 0; i < trial.size(); ++i) trial[i] = u.u[i] + alpha * kr.x[i];
        ConformalFactor cf = ConformalFactor::make(std::move(trial), s.g, s.bundle.gamma);
        Evaluation ev2 = evaluate(s, cf, t);
        if (ev2.cone_margin > 0.0 && ev2.res_sup < ev.res_sup) {
            out.accepted = true;
            out.u = std::move(cf);
            out.eval = std::move(ev2);
            out.alpha = alpha;
            return out;
        }
        bad = (ev2.cone_margin <= 0.0) ? ev2.worst_margin_node : bad;
        alpha *= 0.5;
    }
    out.reason = "cone breach / no descent";
    out.bad_node = bad;
    out.u = u;
    out.eval = ev;
    return out;
}

struct PathPoint {
    double t = 0.0;
    double residual_sup = 0.0;
    double cone_margin_min = 0.0;
    double cone_margin_min_conformal = 0.0;
    int newton_iters = 0;
    double sup_u = 0.0, inf_u = 0.0, sup_grad_u = 0.0, harnack_gap = 0.0;
};

struct SolveReport {
    std::vector<PathPoint> path;
    ScalarField final_u;
    bool converged = false;
    double last_good_t = 0.0;
    std::string failure_reason;

    bool pinching_ok = false;
    bool ricci_positive = false;
    bool sigma2_positive = false;
    bool scalar_positive = false;
    double pinch_margin_lower = 0.0;  // min pencil eigenvalue of 6 Ric~ - (3t0-2) R~ g~
    double pinch_margin_upper = 0.0;  // min pencil eigenvalue of 3(2-t0) R~ g~ - 6 Ric~
    double ricci_min_eig = 0.0;
    double scalar_min = 0.0;
    double final_residual_sup = 0.0;
    double final_cone_margin = 0.0;
    double final_cone_margin_conformal = 0.0;
    double dual_route_residual_sup = 0.0;  // engine recomputation of the endpoint residual
};

namespace solver_detail {

inline PathPoint path_point(double t, const ConformalFactor& u, const MetricField& g,
                            const Evaluation& ev, int iters) {
    PathPoint p;
    p.t = t;
    p.residual_sup = ev.res_sup;
    p.cone_margin_min = ev.cone_margin;
    p.cone_margin_min_conformal = ev.cone_margin_conformal;
    p.newton_iters = iters;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (long i = 0; i < u.u.size(); ++i) {
        lo = std::min(lo, u.u[i]);
        hi = std::max(hi, u.u[i]);
    }
    p.sup_u = hi;
    p.inf_u = lo;
    p.harnack_gap = hi - lo;
    p.sup_grad_u = u.sup_grad(g);
    return p;
}

}  // namespace solver_detail

/// March t from delta to t0 with warm starts; bisect the step on Newton
/// failure down to dt_min. On success the endpoint metric g~ = e^{-2u} g is
/// checked against the two-sided pinching inequalities
/// (3t0-2) R~ g~ < 6 Ric~ < 3(2-t0) R~ g~ (pointwise pencil eigenvalues),
/// sigma_2 > 0, R~ > 0 and Ric~ > 0, and the endpoint residual is recomputed
/// through the full curvature engine as an independent cross-check.
inline SolveReport continuation(const ProblemSetup& s, const SolverOptions& opt = {}) {
    SolveReport rep;
    const double tol = opt.tol_factor * s.sup_f_sq;
    const double dt0 = (s.t0 - s.delta) / opt.steps;
    const double dt_min = (s.t0 - s.delta) / opt.dt_min_div;

    ConformalFactor u = ConformalFactor::make(ScalarField(s.g.grid(), 0.0), s.g, s.bundle.gamma);
    Evaluation ev = evaluate(s, u, s.delta);
    if (ev.res_sup > 1e-10 * std::max(1.0, s.sup_f_sq))
        throw NumericalError("continuation: u = 0 is not a solution at t = delta (residual " +
                             std::to_string(ev.res_sup) + ")");
    rep.path.push_back(solver_detail::path_point(s.delta, u, s.g, ev, 0));
    rep.last_good_t = s.delta;

    double t_cur = s.delta;
    double dt = dt0;
    while (t_cur < s.t0 - 1e-14) {
        const double t_try = std::min(t_cur + dt, s.t0);
        ConformalFactor u_try = u;
        Evaluation ev_try = evaluate(s, u_try, t_try);
        bool ok = false;
        int iters = 0;
        for (; iters < opt.max_newton; ++iters) {
            if (ev_try.res_sup <= tol && ev_try.cone_margin > 0.0) {
                ok = true;
                break;
            }
            NewtonOutcome st = newton_step(s, u_try, t_try, ev_try, opt);
            if (!st.accepted) {
                rep.failure_reason = st.reason +
                                     (st.bad_node >= 0 ? " at node " + std::to_string(st.bad_node)
                                                       : "");
                break;
            }
            u_try = std::move(st.u);
            ev_try = std::move(st.eval);
        }
        if (ok) {
            u = std::move(u_try);
            ev = std::move(ev_try);
            t_cur = t_try;
            rep.path.push_back(solver_detail::path_point(t_cur, u, s.g, ev, iters));
            rep.last_good_t = t_cur;
            dt = dt0;
            continue;
        }
        dt *= 0.5;
        if (dt < dt_min) {
            if (rep.failure_reason.empty())
                rep.failure_reason = "step bisection exhausted at t = " + std::to_string(t_try);
            rep.final_u = u.u;
            rep.final_residual_sup = ev.res_sup;
            rep.final_cone_margin = ev.cone_margin;
            rep.final_cone_margin_conformal = ev.cone_margin_conformal;
            return rep;  // partial report, converged stays false
        }
    }

    rep.converged = true;
    rep.final_u = u.u;
    rep.final_residual_sup = ev.res_sup;
    rep.final_cone_margin = ev.cone_margin;
    rep.final_cone_margin_conformal = ev.cone_margin_conformal;

    // Endpoint pinching checks on g~ (law route).
    const double t0 = s.t0;
    const SymTensorField A1t = transform_schouten_t(s.schouten1, u, s.g, 1.0);
    const ScalarField Rt = transform_scalar(s.bundle.scalar, u);
    const MetricField gt = conformal_metric(s.g, u);
    double m_lo = std::numeric_limits<double>::infinity();
    double m_hi = m_lo, m_ric = m_lo, m_scal = m_lo;
    for (long i = 0; i < s.g.size(); ++i) {
        const Sym3 ric = A1t[i] + 0.25 * Rt[i] * gt.at(i);
        const Sym3 X = 6.0 * ric - (3.0 * t0 - 2.0) * Rt[i] * gt.at(i);
        const Sym3 Y = 3.0 * (2.0 - t0) * Rt[i] * gt.at(i) - 6.0 * ric;
        m_lo = std::min(m_lo, min_generalized_eig(X, gt.at(i)));
        m_hi = std::min(m_hi, min_generalized_eig(Y, gt.at(i)));
        m_ric = std::min(m_ric, min_generalized_eig(ric, gt.at(i)));
        m_scal = std::min(m_scal, Rt[i]);
    }
    rep.pinch_margin_lower = m_lo;
    rep.pinch_margin_upper = m_hi;
    rep.ricci_min_eig = m_ric;
    rep.scalar_min = m_scal;
    rep.pinching_ok = m_lo > 0.0 && m_hi > 0.0;
    rep.ricci_positive = m_ric > 0.0;
    rep.scalar_positive = m_scal > 0.0;
    rep.sigma2_positive = ev.cone_margin > 0.0 && ev.cone_margin_conformal > 0.0;

    // Independent recheck: rebuild the endpoint curvature by finite
    // differences of g~ and re-evaluate the equation.
    const CurvatureBundle bt = curvature_of(gt);
    const SymTensorField At = schouten_t(bt, gt, t0);
    double recheck = 0.0;
    for (long i = 0; i < s.g.size(); ++i) {
        const double s2 = sigma12_pencil(At[i], s.g.inv(i)).s2;
        recheck = std::max(recheck, std::abs(s2 - s.f_sq[i] * std::exp(4.0 * u.u[i])));
    }
    rep.dual_route_residual_sup = recheck;
    return rep;
}

}  // namespace sigma2
