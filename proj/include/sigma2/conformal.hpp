// conformal.hpp - conformal changes of metric and the integral functionals
// driven by them: the transformation laws of A^t and of the scalar curvature,
// the total sigma_2 functional, the i / I quantities, the Yamabe quotient and
// the pinching margin mu_t.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sigma2/curvature.hpp"
#include "sigma2/grid.hpp"

namespace sigma2 {

/// A conformal factor u together with the background-metric derivatives the
/// transformation laws consume. Immutable; rebuild when u changes.
struct ConformalFactor {
    ScalarField u;
    std::array<ScalarField, 3> du;  // lower-index gradient
    SymTensorField hess;            // covariant Hessian w.r.t. the background
    ScalarField lap;                // g^{ij} hess_ij
    ScalarField grad_sq;            // |grad u|^2_g

    static ConformalFactor make(ScalarField uf, const MetricField& g,
                                const ChristoffelField& gamma) {
        uf.check_finite("ConformalFactor");
        ConformalFactor cf;
        const ChartGrid& gr = *uf.grid;
        for (int a = 0; a < 3; ++a) {
            cf.du[a] = ScalarField(uf.grid);
            fd1_sweep(gr, uf.v.data(), cf.du[a].v.data(), a, Parity::Even);
        }
        cf.hess = hessian_scalar(uf, gamma);
        cf.lap = pointwise(uf.grid, [&](long i) { return trace_product(g.inv(i), cf.hess[i]); });
        cf.grad_sq = pointwise(uf.grid, [&](long i) {
            const Vec3 d{cf.du[0][i], cf.du[1][i], cf.du[2][i]};
            return quad_form(g.inv(i), d);
        });
        cf.u = std::move(uf);
        return cf;
    }

    Vec3 grad_at(long i) const { return {du[0][i], du[1][i], du[2][i]}; }

    double sup_grad(const MetricField&) const {
        double m = 0.0;
        for (long i = 0; i < grad_sq.size(); ++i) m = std::max(m, grad_sq[i]);
        return std::sqrt(m);
    }
};

/// g~ = e^{-2u} g. Guards against overflow of the conformal weight.
inline MetricField conformal_metric(const MetricField& g, const ConformalFactor& u) {
    for (long i = 0; i < u.u.size(); ++i)
        if (std::abs(u.u[i]) > 50.0)
            throw NumericalError("conformal_metric: |u| > 50 at node " + std::to_string(i));
    SymTensorField t(g.grid());
    parallel_for(g.size(), [&](long i) { t[i] = std::exp(-2.0 * u.u[i]) * g.at(i); });
    return MetricField::make(std::move(t));
}

/// Transformation law of the modified Schouten tensor:
/// A^t_{g~} = A^t_g + Hess u + (1-t)(Lap u) g + du (x) du - (2-t)/2 |grad u|^2 g.
inline SymTensorField transform_schouten_t(const SymTensorField& A_t, const ConformalFactor& u,
                                           const MetricField& g, double t) {
    return pointwise_sym(g.grid(), [&](long i) {
        const Vec3 d = u.grad_at(i);
        Sym3 dudu;
        for (int k = 0; k < 6; ++k)
            dudu.comp(k) = d[kSymPairs[k][0]] * d[kSymPairs[k][1]];
        return A_t[i] + u.hess[i] + (1.0 - t) * u.lap[i] * g.at(i) + dudu -
               0.5 * (2.0 - t) * u.grad_sq[i] * g.at(i);
    });
}

/// Scalar curvature law: R_{g~} = e^{2u} (R + 4 Lap u - 2 |grad u|^2).
inline ScalarField transform_scalar(const ScalarField& R, const ConformalFactor& u) {
    return pointwise(R.grid, [&](long i) {
        return std::exp(2.0 * u.u[i]) * (R[i] + 4.0 * u.lap[i] - 2.0 * u.grad_sq[i]);
    });
}

/// Law-route curvature of g~ = e^{-2u} g from the curvature of g: the
/// Schouten transformation gives Ric~ and R~, the conformal Christoffel
/// correction gives Gamma~. FD error enters only through derivatives of u.
inline std::pair<MetricField, CurvatureBundle> conformal_background(const MetricField& g,
                                                                    const CurvatureBundle& b,
                                                                    const ScalarField& u_field) {
    const ConformalFactor cf = ConformalFactor::make(u_field, g, b.gamma);
    MetricField gt = conformal_metric(g, cf);

    const SymTensorField A1 = schouten_t(b, g, 1.0);
    const SymTensorField A1t = transform_schouten_t(A1, cf, g, 1.0);
    const ScalarField Rt = transform_scalar(b.scalar, cf);

    CurvatureBundle bt;
    bt.scalar = Rt;
    bt.ricci = pointwise_sym(g.grid(), [&](long i) {
        return A1t[i] + 0.25 * Rt[i] * gt.at(i);
    });
    bt.gamma = ChristoffelField(g.grid());
    parallel_for(g.size(), [&](long i) {
        const Vec3 d = cf.grad_at(i);
        const Vec3 up = mat_vec(g.inv(i), d);
        for (int k = 0; k < 3; ++k) {
            Sym3 G = b.gamma.v[i][k];
            for (int c = 0; c < 6; ++c) {
                const int a = kSymPairs[c][0], bb = kSymPairs[c][1];
                double corr = 0.0;
                if (k == a) corr -= d[bb];
                if (k == bb) corr -= d[a];
                corr += g.at(i)(a, bb) * up[k];
                G.comp(c) += corr;
            }
            bt.gamma.v[i][k] = G;
        }
    });
    return {std::move(gt), std::move(bt)};
}

// ---------------------------------------------------------------------------
// Catalog dispatcher (adds the conformally perturbed round sphere on top of
// the exact entries in curvature.hpp)
// ---------------------------------------------------------------------------

struct CatalogParams {
    double radius = 1.0;
    double fiber = 1.0;
    ScalarField w;  // conformal factor for conformally_round_s3
    bool has_w = false;
};

inline CatalogEntry make_catalog(const GridPtr& grid, const std::string& name,
                                 const CatalogParams& p = {}) {
    if (name == "flat_torus") return catalog_flat_torus(grid);
    if (name == "round_s3") return catalog_round_s3(grid, p.radius);
    if (name == "berger_s3") return catalog_berger_s3(grid, p.fiber);
    if (name == "conformally_round_s3") {
        if (!p.has_w)
            throw ValidationError("catalog conformally_round_s3 needs a 'w' expression");
        CatalogEntry base = catalog_round_s3(grid, p.radius);
        auto [gt, bt] = conformal_background(base.g, base.bundle, p.w);
        return CatalogEntry{std::move(gt), std::move(bt)};
    }
    throw ValidationError("unknown catalog metric '" + name + "'");
}

// ---------------------------------------------------------------------------
// Integral functionals
// ---------------------------------------------------------------------------

/// F(g) = integral of sigma_2(g^{-1} A^1_g) dV_g.
inline double total_sigma2(const MetricField& g, const CurvatureBundle& b) {
    const SymTensorField A1 = schouten_t(b, g, 1.0);
    ScalarField s1, s2;
    sigma_fields(A1, g, s1, s2);
    return integrate(s2, g);
}

/// i(g') = integral of R_{g'}^2 e^{-phi} dV_{g'} for g' = e^{-2 phi} g,
/// evaluated against the background measure (dV_{g'} = e^{-3 phi} dV_g).
inline double i_functional(const MetricField& g, const CurvatureBundle& b,
                           const ScalarField& phi) {
    const ConformalFactor cf = ConformalFactor::make(phi, g, b.gamma);
    const ScalarField Rp = transform_scalar(b.scalar, cf);
    const ScalarField integrand = pointwise(g.grid(), [&](long i) {
        return Rp[i] * Rp[i] * std::exp(-4.0 * phi[i]);
    });
    return integrate(integrand, g);
}

struct ISample {
    std::string label;
    double value = 0.0;
    double grad_sup = 0.0;
    bool admissible = false;
};

struct IEstimate {
    double value = 0.0;  // min over admissible candidates: an upper bound on I(M,g)
    std::vector<ISample> samples;
    std::vector<std::string> warnings;
};

/// Sampled upper bound on I(M,g) = inf { i(g') : |grad phi| <= grad_cap }.
/// phi = 0 is always admitted; candidates above the gradient cap are skipped
/// with a warning.
inline IEstimate estimate_I(const MetricField& g, const CurvatureBundle& b,
                            const std::vector<std::pair<std::string, ScalarField>>& candidates,
                            double grad_cap) {
    IEstimate out;
    bool have_zero = false;
    std::vector<std::pair<std::string, ScalarField>> all;
    for (const auto& c : candidates) all.push_back(c);
    for (const auto& c : candidates) {
        bool zero = true;
        for (long i = 0; i < c.second.size(); ++i)
            if (c.second[i] != 0.0) { zero = false; break; }
        if (zero) { have_zero = true; break; }
    }
    if (!have_zero) all.insert(all.begin(), {"0", ScalarField(g.grid(), 0.0)});

    double best = 0.0;
    bool any = false;
    for (const auto& [label, phi] : all) {
        const ConformalFactor cf = ConformalFactor::make(phi, g, b.gamma);
        ISample s;
        s.label = label;
        s.grad_sup = cf.sup_grad(g);
        s.admissible = s.grad_sup <= grad_cap * (1.0 + 1e-12);
        if (!s.admissible) {
            out.warnings.push_back("candidate '" + label + "' skipped: sup|grad| = " +
                                   std::to_string(s.grad_sup) + " exceeds cap " +
                                   std::to_string(grad_cap));
            out.samples.push_back(s);
            continue;
        }
        s.value = i_functional(g, b, phi);
        if (!any || s.value < best) best = s.value;
        any = true;
        out.samples.push_back(s);
    }
    if (!any) throw ValidationError("estimate_I: no admissible candidates");
    out.value = best;
    return out;
}

/// Normalized total scalar curvature of this metric (no infimum is taken).
inline double yamabe_quotient(const MetricField& g, const CurvatureBundle& b) {
    const double total_R = integrate(b.scalar, g);
    const double vol = volume(g);
    return total_R / std::cbrt(vol);
}

struct PinchingReport {
    double t = 0.0;
    double total_sigma2 = 0.0;
    std::vector<ISample> i_samples;
    double I_estimate = 0.0;  // sampled upper bound
    double yamabe_quotient = 0.0;
    double mu_t = 0.0;
    bool hypothesis_met = false;
    std::vector<std::string> warnings;
};

/// mu_t = total sigma_2 + (1/24)(7/10 - t) * I_estimate, with the sampled
/// upper bound standing in for the infimum. Requires t <= 2/3.
inline PinchingReport pinching_margin(const MetricField& g, const CurvatureBundle& b, double t,
                                      const std::vector<std::pair<std::string, ScalarField>>& candidates,
                                      double grad_cap = 1.0) {
    if (!(t <= 2.0 / 3.0 + 1e-12))
        throw ValidationError("pinching_margin: t must satisfy t <= 2/3");
    PinchingReport r;
    r.t = t;
    r.total_sigma2 = total_sigma2(g, b);
    IEstimate est = estimate_I(g, b, candidates, grad_cap);
    r.i_samples = std::move(est.samples);
    r.warnings = std::move(est.warnings);
    r.I_estimate = est.value;
    r.yamabe_quotient = yamabe_quotient(g, b);
    r.mu_t = r.total_sigma2 + (1.0 / 24.0) * (7.0 / 10.0 - t) * r.I_estimate;
    r.hypothesis_met = r.mu_t > 0.0;
    return r;
}

}  // namespace sigma2
