// Acceptance suite: end-to-end checks of the solver, the transformation laws,
// the integral identities and the exact cone algebra, each printed as one
// pass/fail line. Exit code is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "sigma2/manifest.hpp"
#include "sigma2/solver.hpp"
#include "sigma2/verify.hpp"

using namespace sigma2;

namespace {

int g_failures = 0;

void criterion(int id, bool pass, const std::string& title, const std::string& detail) {
    std::printf("[%s] criterion %d: %s  (%s)\n", pass ? "PASS" : "FAIL", id, title.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

char buf[512];

// --- 1. round-sphere continuation oracle ----------------------------------
void c1_round_oracle() {
    const auto start = std::chrono::steady_clock::now();
    auto grid = make_band_grid(64);
    auto cat = catalog_round_s3(grid, 1.0);
    SolverOptions opt;  // margin 0.1, floor 1.0, t0 = 2/3, 64 steps
    ProblemSetup setup = make_setup(cat.g, cat.bundle, opt);
    SolveReport rep = continuation(setup, opt);
    const double expect = 0.5 * std::log(0.4);
    double err = 0.0;
    for (long i = 0; i < rep.final_u.size(); ++i)
        err = std::max(err, std::abs(rep.final_u[i] - expect));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = rep.converged && std::abs(setup.delta + 1.0 / 3.0) < 1e-12 &&
                      err <= 1e-8 && secs < 10.0;
    std::snprintf(buf, sizeof(buf),
                  "delta = %.6f, |u - 0.5 ln 0.4|_sup = %.3e, target %.6f, %.2fs",
                  setup.delta, err, expect, secs);
    criterion(1, pass, "round-sphere continuation matches the closed-form factor", buf);
}

// --- 2. pinching inequalities on every successful solve --------------------
void c2_pinching() {
    SolverOptions opt;
    auto grid = make_band_grid(64);
    bool all = true;
    double worst_margin = 1e300;
    std::string summary;
    const auto run = [&](const std::string& name, CatalogEntry cat) {
        ProblemSetup setup = make_setup(std::move(cat.g), std::move(cat.bundle), opt);
        SolveReport rep = continuation(setup, opt);
        const bool ok = rep.converged && rep.pinching_ok && rep.ricci_positive &&
                        rep.sigma2_positive && rep.scalar_positive &&
                        rep.pinch_margin_lower > 0.0 && rep.pinch_margin_upper > 0.0;
        all = all && ok;
        worst_margin = std::min({worst_margin, rep.pinch_margin_lower, rep.pinch_margin_upper});
        summary += name + (ok ? " ok " : " FAIL ");
    };
    run("round", catalog_round_s3(grid, 1.0));
    run("berger", catalog_berger_s3(grid, 1.15));
    CatalogParams p;
    p.w = pointwise(grid, [&](long i) { return 0.05 * std::cos(2.0 * grid->node_coords(i)[0]); });
    p.has_w = true;
    run("conf-round", make_catalog(grid, "conformally_round_s3", p));
    std::snprintf(buf, sizeof(buf), "%s; min eigenvalue margin %.4f", summary.c_str(),
                  worst_margin);
    criterion(2, all, "(3t0-2) Rg < 6 Ric < 3(2-t0) Rg with Ric > 0 at every endpoint", buf);
}

// --- 3. integral transformation identity under refinement ------------------
void c3_lemma51() {
    bool all = true;
    double worst_order_lo = 10.0, worst_order_hi = 0.0, worst_rel = 0.0;
    // flat torus at N = 32, 64
    for (int seed = 1; seed <= 5; ++seed) {
        double gap[2], rel = 0.0;
        int idx = 0;
        for (int N : {32, 64}) {
            auto grid = make_torus_grid(N, N, N);
            auto cat = catalog_flat_torus(grid);
            std::mt19937_64 rng(seed);
            const ScalarField u = random_smooth_field(grid, rng, 0.3, 0.002);
            const Lemma51Data d = lemma51_data(cat.g, cat.bundle, u);
            gap[idx++] = d.gap();
            if (N == 64) rel = d.gap() / d.max_term();
        }
        const double order = std::log2(gap[0] / gap[1]);
        worst_order_lo = std::min(worst_order_lo, order);
        worst_order_hi = std::max(worst_order_hi, order);
        worst_rel = std::max(worst_rel, rel);
        all = all && order >= 1.6 && order <= 2.4 && rel <= 1e-4;
    }
    // band at N = 64, 128
    for (int seed = 1; seed <= 5; ++seed) {
        double gap[2], rel = 0.0;
        int idx = 0;
        for (int N : {64, 128}) {
            auto grid = make_band_grid(N);
            auto cat = catalog_round_s3(grid, 1.0);
            std::mt19937_64 rng(seed * 13);
            const ScalarField u = random_smooth_field(grid, rng, 0.10);
            const Lemma51Data d = lemma51_data(cat.g, cat.bundle, u);
            gap[idx++] = d.gap();
            if (N == 128) rel = d.gap() / d.max_term();
        }
        const double order = std::log2(gap[0] / gap[1]);
        worst_order_lo = std::min(worst_order_lo, order);
        worst_order_hi = std::max(worst_order_hi, order);
        worst_rel = std::max(worst_rel, rel);
        all = all && order >= 1.6 && order <= 2.4 && rel <= 1e-4;
    }
    std::snprintf(buf, sizeof(buf), "orders in [%.2f, %.2f], worst fine-grid relative gap %.2e",
                  worst_order_lo, worst_order_hi, worst_rel);
    criterion(3, all, "sigma_2 integral transformation: order 2 and below 1e-4 relative", buf);
}

// --- 4. dual-route transformation law --------------------------------------
void c4_dual_route() {
    bool all = true;
    double worst_lo = 10.0, worst_hi = 0.0;
    const double tvals[3] = {0.0, 2.0 / 3.0, 1.0};

    // torus: engine curvature of e^{-2u} g reused across t values
    {
        double gaps[2][3];
        int idx = 0;
        for (int N : {24, 48}) {
            auto grid = make_torus_grid(N, N, N);
            auto cat = catalog_flat_torus(grid);
            std::mt19937_64 rng(7);
            const ScalarField u = random_smooth_field(grid, rng, 0.06, 0.3);
            const ConformalFactor cf = ConformalFactor::make(u, cat.g, cat.bundle.gamma);
            const MetricField gt = conformal_metric(cat.g, cf);
            const CurvatureBundle bt = curvature_of(gt);
            for (int k = 0; k < 3; ++k) {
                const SymTensorField At = schouten_t(cat.bundle, cat.g, tvals[k]);
                const SymTensorField law = transform_schouten_t(At, cf, cat.g, tvals[k]);
                const SymTensorField direct = schouten_t(bt, gt, tvals[k]);
                gaps[idx][k] = sup_abs_diff(law, direct);
            }
            ++idx;
        }
        for (int k = 0; k < 3; ++k) {
            const double order = std::log2(gaps[0][k] / gaps[1][k]);
            worst_lo = std::min(worst_lo, order);
            worst_hi = std::max(worst_hi, order);
            all = all && order >= 1.6 && order <= 2.4;
        }
    }
    // band
    {
        double gaps[2][3];
        int idx = 0;
        for (int N : {48, 96}) {
            auto grid = make_band_grid(N);
            auto cat = catalog_round_s3(grid, 1.0);
            std::mt19937_64 rng(11);
            const ScalarField u = random_smooth_field(grid, rng, 0.1);
            const ConformalFactor cf = ConformalFactor::make(u, cat.g, cat.bundle.gamma);
            const MetricField gt = conformal_metric(cat.g, cf);
            const CurvatureBundle bt = curvature_of(gt);
            for (int k = 0; k < 3; ++k) {
                const SymTensorField At = schouten_t(cat.bundle, cat.g, tvals[k]);
                const SymTensorField law = transform_schouten_t(At, cf, cat.g, tvals[k]);
                const SymTensorField direct = schouten_t(bt, gt, tvals[k]);
                gaps[idx][k] = sup_abs_diff(law, direct);
            }
            ++idx;
        }
        for (int k = 0; k < 3; ++k) {
            const double order = std::log2(gaps[0][k] / gaps[1][k]);
            worst_lo = std::min(worst_lo, order);
            worst_hi = std::max(worst_hi, order);
            all = all && order >= 1.6 && order <= 2.4;
        }
    }
    std::snprintf(buf, sizeof(buf), "orders across charts and t in {0, 2/3, 1}: [%.2f, %.2f]",
                  worst_lo, worst_hi);
    criterion(4, all, "transformation law vs full curvature recomputation at order 2", buf);
}

// --- 5. exact algebra sweep -------------------------------------------------
void c5_exact_algebra() {
    std::mt19937_64 rng(20240501);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    std::uniform_real_distribution<double> Ug(-0.3, 0.3);
    std::uniform_real_distribution<double> Ut(-2.0, 1.0);

    long dual_bad = 0, shift_bad = 0, p2_bad = 0;
    double dual_worst = 0.0, shift_worst = 0.0;
    const int n = 12000;
    for (int k = 0; k < n; ++k) {
        Sym3 gm = Sym3::identity();
        for (int c = 0; c < 6; ++c) gm.comp(c) += Ug(rng);
        if (!cholesky(gm).ok) {
            gm = Sym3::identity();
        }
        const Sym3 gi = inverse(gm);
        Sym3 ric;
        for (int c = 0; c < 6; ++c) ric.comp(c) = U(rng);
        const double R = trace_product(gi, ric);
        // dual sigma_2 formula at t = 1
        const Sym3 A1 = ric - 0.25 * R * gm;
        const double s2_pencil = sigma12_pencil(A1, gi).s2;
        const double ric2 = trace_product(sandwich(gi, ric), ric);
        const double s2_norms = -0.5 * ric2 + (3.0 / 16.0) * R * R;
        const double dual_gap = std::abs(s2_pencil - s2_norms) /
                                std::max({std::abs(s2_pencil), std::abs(s2_norms), 1.0});
        dual_worst = std::max(dual_worst, dual_gap);
        if (dual_gap > 1e-12) ++dual_bad;
        // shift identity at random t
        const double t = Ut(rng);
        const SigmaPair sp = sigma12_pencil(A1, gi);
        const Sym3 At = A1 + (1.0 - t) * sp.s1 * gm;
        const double lhs = sigma12_pencil(At, gi).s2;
        const double rhs = sp.s2 + (1.0 - t) * (5.0 - 3.0 * t) * sp.s1 * sp.s1;
        const double shift_gap =
            std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
        shift_worst = std::max(shift_worst, shift_gap);
        if (shift_gap > 1e-12) ++shift_bad;
        // P2 decomposition at random t
        const double pl = (1.0 - t) * (5.0 - 3.0 * t) / 16.0;
        const double pr = (7.0 / 10.0 - t) / 24.0 +
                          (3.0 * t * t / 16.0 - 11.0 * t / 24.0 + 17.0 / 60.0);
        if (std::abs(pl - pr) / std::max(1.0, std::abs(pl)) > 1e-12) ++p2_bad;
    }
    const double p2_min = 3.0 * (11.0 / 9.0) * (11.0 / 9.0) / 16.0 - 11.0 * (11.0 / 9.0) / 24.0 +
                          17.0 / 60.0;  // vertex value 7/2160
    const IdentityReport cone = check_cone_inequalities(10000, 777);

    const bool pass = dual_bad == 0 && shift_bad == 0 && p2_bad == 0 && cone.pass &&
                      p2_min > 0.0 && std::abs(p2_min - 7.0 / 2160.0) < 1e-15;
    std::snprintf(buf, sizeof(buf),
                  "%d samples: dual worst %.2e, shift worst %.2e, P2 exact, min P2 = %.3e; %s",
                  n, dual_worst, shift_worst, p2_min, cone.detail.c_str());
    criterion(5, pass, "exact algebra (dual sigma_2, shift, P2, Newton, cone) at 1e-12", buf);
}

// --- 6. linearization against finite differences ---------------------------
void c6_fd_jacobian() {
    bool all = true;
    double worst_drift = 0.0;

    const auto probe = [&](const ProblemSetup& s, const GridPtr& grid, std::mt19937_64& rng) {
        const ScalarField u = random_smooth_field(grid, rng, 0.2);
        const ScalarField v = random_smooth_field(grid, rng, 1.0);
        std::uniform_real_distribution<double> Ut(-0.3, 2.0 / 3.0);
        const double t = Ut(rng);
        const ConformalFactor cf = ConformalFactor::make(u, s.g, s.bundle.gamma);
        const ScalarField F0 = residual(s, cf, t);
        const ScalarField L = linearize(s, cf, t, v);
        double r[2];
        int i = 0;
        for (const double eps : {1e-3, 1e-4}) {
            ScalarField up = pointwise(grid, [&](long j) { return u[j] + eps * v[j]; });
            const ConformalFactor cfp = ConformalFactor::make(up, s.g, s.bundle.gamma);
            const ScalarField Fp = residual(s, cfp, t);
            double rem = 0.0;
            for (long j = 0; j < grid->total; ++j)
                rem = std::max(rem, std::abs(Fp[j] - F0[j] - eps * L[j]));
            r[i++] = rem / (eps * eps);
        }
        const double drift = std::max(r[0] / r[1], r[1] / r[0]);
        worst_drift = std::max(worst_drift, drift);
        all = all && drift <= 2.0;
    };

    {
        auto grid = make_band_grid(64);
        auto cat = catalog_round_s3(grid, 1.0);
        SolverOptions opt;
        const ProblemSetup s = make_setup(cat.g, cat.bundle, opt);
        std::mt19937_64 rng(100);
        for (int k = 0; k < 10; ++k) probe(s, grid, rng);
    }
    {
        auto grid = make_torus_grid(16, 16, 16);
        auto cat = catalog_flat_torus(grid);
        ProblemSetup s;
        s.g = cat.g;
        s.bundle = cat.bundle;
        s.schouten1 = schouten_t(cat.bundle, s.g, 1.0);
        ScalarField s1, s2;
        sigma_fields(s.schouten1, s.g, s1, s2);
        s.sigma1_a1 = s1;
        s.f = pointwise(grid, [&](long i) {
            const Vec3 x = grid->node_coords(i);
            return 0.6 + 0.1 * std::cos(x[0]) * std::cos(x[1]);
        });
        s.f_sq = pointwise(grid, [&](long i) { return s.f[i] * s.f[i]; });
        s.delta = 0.0;
        s.t0 = 2.0 / 3.0;
        s.sup_f_sq = 0.49;
        std::mt19937_64 rng(200);
        for (int k = 0; k < 10; ++k) probe(s, grid, rng);
    }
    std::snprintf(buf, sizeof(buf),
                  "|F(u+ev)-F(u)-eL[v]|/e^2 drift across e in {1e-3,1e-4}: worst factor %.3f",
                  worst_drift);
    criterion(6, all, "linearization matches finite differences on 10 states per chart", buf);
}

// --- 7. Q-curvature corollary arithmetic ------------------------------------
void c7_q_corollary() {
    auto grid = make_band_grid(64);
    auto cat = catalog_round_s3(grid, 1.0);

    double q_cat_err = 0.0;
    const ScalarField q_cat = q_curvature(cat.bundle, cat.g);
    for (long i = 0; i < grid->total; ++i)
        q_cat_err = std::max(q_cat_err, std::abs(q_cat[i] - 15.0 / 8.0));

    const CurvatureBundle engine = curvature_of(cat.g);
    const ScalarField q_eng = q_curvature(engine, cat.g);
    double q_eng_err = 0.0;
    for (long i = 0; i < grid->total; ++i)
        q_eng_err = std::max(q_eng_err, std::abs(q_eng[i] - 15.0 / 8.0));
    const double h = grid->h[0];

    const double hyp = 15.0 / 8.0 - 36.0 / 48.0;  // Q - R^2/48 = 9/8

    const SymTensorField A1 = schouten_t(cat.bundle, cat.g, 1.0);
    ScalarField s1, s2;
    sigma_fields(A1, cat.g, s1, s2);
    const double int_s2 = integrate(s2, cat.g);
    const double int_R2 = integrate(pointwise(grid, [&](long i) {
        return cat.bundle.scalar[i] * cat.bundle.scalar[i];
    }), cat.g);
    const double margin = int_s2 - int_R2 / 128.0;
    const double expect_margin = 15.0 * kPi * kPi / 16.0;

    const bool pass = q_cat_err <= 1e-6 && q_eng_err <= 10.0 * h * h &&
                      std::abs(hyp - 9.0 / 8.0) < 1e-14 &&
                      std::abs(margin - expect_margin) <= 1e-6;
    std::snprintf(buf, sizeof(buf),
                  "Q catalog err %.2e, engine err %.2e (10h^2 = %.2e), Q - R^2/48 = %.6f, "
                  "int sigma2 - int R^2/128 = %.9f vs 15 pi^2/16 = %.9f",
                  q_cat_err, q_eng_err, 10.0 * h * h, hyp, margin, expect_margin);
    criterion(7, pass, "Q = 15/8 on the unit sphere with the integral pinching margin", buf);
}

// --- 8. geometry sanity ------------------------------------------------------
void c8_geometry() {
    auto bg = make_band_grid(64);
    auto round = catalog_round_s3(bg, 1.0);
    const double vol_err = std::abs(volume(round.g) - 2.0 * kPi * kPi);

    auto tg = make_torus_grid(32, 32, 32);
    auto flat = catalog_flat_torus(tg);
    const double tvol = std::pow(2.0 * kPi, 3);
    const double tvol_err = std::abs(volume(flat.g) - tvol);

    // engine curvature of the round metric at two resolutions
    double eng_err[2];
    int idx = 0;
    for (int N : {32, 64}) {
        auto grid = make_band_grid(N);
        auto cat = catalog_round_s3(grid, 1.0);
        const CurvatureBundle eng = curvature_of(cat.g);
        double e = 0.0;
        for (long i = 0; i < grid->total; ++i) {
            const Sym3 exact = 2.0 * cat.g.at(i);
            for (int k = 0; k < 6; ++k)
                e = std::max(e, std::abs(eng.ricci[i].comp(k) - exact.comp(k)));
            e = std::max(e, std::abs(eng.scalar[i] - 6.0));
        }
        eng_err[idx++] = e;
    }
    const double h32 = (kPi / 2.0) / 32.0;
    // the regularized engine reproduces the round metric to roundoff (its
    // weight remainder is constant), so the order-2 bound holds with margin;
    // the Berger sphere provides the genuine convergence measurement
    double berger_err[2];
    idx = 0;
    for (int N : {32, 64}) {
        auto grid = make_band_grid(N);
        auto cat = catalog_berger_s3(grid, 1.2);
        const CurvatureBundle eng = curvature_of(cat.g);
        double e = 0.0;
        for (long i = 0; i < grid->total; ++i)
            for (int k = 0; k < 6; ++k)
                e = std::max(e, std::abs(eng.ricci[i].comp(k) - cat.bundle.ricci[i].comp(k)));
        berger_err[idx++] = e;
    }
    const double order = std::log2(berger_err[0] / berger_err[1]);

    const bool pass = vol_err <= 1e-10 && tvol_err <= 1e-10 * tvol &&
                      eng_err[0] <= h32 * h32 && eng_err[1] <= h32 * h32 / 4.0 &&
                      order >= 1.6 && order <= 2.4;
    std::snprintf(buf, sizeof(buf),
                  "Vol(S3) err %.2e, Vol(T3) rel err %.2e, engine Ric err %.2e -> %.2e, "
                  "berger engine order %.2f",
                  vol_err, tvol_err / tvol, eng_err[0], eng_err[1], order);
    criterion(8, pass, "quadrature volumes and engine reproduction of Ric = 2g, R = 6", buf);
}

// --- 9. negative controls ----------------------------------------------------
void c9_negative_controls() {
    bool flat_rejected = false;
    std::string msg;
    try {
        json j = {{"chart", {{"kind", "torus3"}, {"dims", {8, 8, 8}}}},
                  {"metric", {{"catalog", "flat_torus"}}}};
        run_solve(parse_manifest(j));
    } catch (const ValidationError& e) {
        msg = e.what();
        flat_rejected = msg.find("R_g > 0 required") != std::string::npos;
    }

    auto tg = make_torus_grid(4, 4, 4);
    auto flat = catalog_flat_torus(tg);
    SymTensorField A(tg);
    for (long i = 0; i < tg->total; ++i) A[i] = Sym3::diag(2, 2, -1);  // sigma_2 = 0
    const ConeField cone = sigma_spectrum(A, flat.g);
    const bool boundary_rejected = !cone.v[0].in_cone && cone.v[0].sigma2 == 0.0;

    const bool pass = flat_rejected && boundary_rejected;
    std::snprintf(buf, sizeof(buf), "flat torus: \"%s\"; (2,2,-1) in_cone = %s",
                  msg.substr(0, 60).c_str(), cone.v[0].in_cone ? "true" : "false");
    criterion(9, pass, "hypothesis violations rejected (R > 0; strict cone boundary)", buf);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    c1_round_oracle();
    c2_pinching();
    c3_lemma51();
    c4_dual_route();
    c5_exact_algebra();
    c6_fd_jacobian();
    c7_q_corollary();
    c8_geometry();
    c9_negative_controls();
    std::printf("%d of 9 criteria failed\n", g_failures);
    return g_failures;
}
