#include <doctest.h>

#include <random>

#include "sigma2/solver.hpp"
#include "sigma2/verify.hpp"

using namespace sigma2;

TEST_CASE("lemma51: constant factor is exact, smooth factors pass on both charts") {
    auto bg = make_band_grid(64);
    auto round = catalog_round_s3(bg, 1.0);
    IdentityReport c = check_lemma51(round.g, round.bundle, ScalarField(bg, 0.4));
    CHECK(c.pass);
    CHECK(c.abs_gap <= 1e-12 * std::abs(c.lhs));
    CHECK(c.lhs == doctest::Approx(1.5 * kPi * kPi).epsilon(1e-10));

    ScalarField u = pointwise(bg, [&](long i) { return 0.05 * std::cos(2.0 * bg->node_coords(i)[0]); });
    IdentityReport r = check_lemma51(round.g, round.bundle, u);
    CHECK(r.pass);

    auto tg = make_torus_grid(32, 32, 32);
    auto flat = catalog_flat_torus(tg);
    ScalarField ut = pointwise(tg, [&](long i) { return 0.1 * std::sin(tg->node_coords(i)[0]); });
    IdentityReport rt = check_lemma51(flat.g, flat.bundle, ut);
    CHECK(rt.pass);
}

TEST_CASE("lemma51 gap refines at second order on the band") {
    double gaps[2];
    int idx = 0;
    for (int N : {64, 128}) {
        auto grid = make_band_grid(N);
        auto round = catalog_round_s3(grid, 1.0);
        ScalarField u = pointwise(grid, [&](long i) {
            const double r = grid->node_coords(i)[0];
            return 0.12 * std::cos(2.0 * r) - 0.05 * std::cos(4.0 * r);
        });
        gaps[idx++] = lemma51_data(round.g, round.bundle, u).gap();
    }
    const double order = std::log2(gaps[0] / gaps[1]);
    CHECK(order >= 1.6);
    CHECK(order <= 2.4);
}

TEST_CASE("bochner identity: flat single mode nearly exact, curved second order") {
    auto tg = make_torus_grid(64, 4, 4);
    auto flat = catalog_flat_torus(tg);
    ScalarField u = pointwise(tg, [&](long i) { return std::sin(tg->node_coords(i)[0]); });
    IdentityReport r = check_bochner(flat.g, flat.bundle, u);
    CHECK(r.pass);
    CHECK(r.abs_gap <= 1e-8);

    IdentityReport rc = check_bochner(flat.g, flat.bundle, ScalarField(tg, 2.0));
    CHECK(rc.abs_gap == 0.0);

    double gaps[2];
    int idx = 0;
    for (int N : {48, 96}) {
        auto grid = make_band_grid(N);
        auto round = catalog_round_s3(grid, 1.0);
        ScalarField ub = pointwise(grid, [&](long i) { return std::cos(2.0 * grid->node_coords(i)[0]); });
        IdentityReport rb = check_bochner(round.g, round.bundle, ub);
        CHECK(rb.pass);
        gaps[idx++] = rb.abs_gap;
    }
    const double ratio = gaps[0] / gaps[1];
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);
}

TEST_CASE("p2 polynomial decomposition: frozen values and positivity") {
    auto p2 = [](double t) { return 3.0 * t * t / 16.0 - 11.0 * t / 24.0 + 17.0 / 60.0; };
    // spot values of the decomposition
    CHECK((1.0 - 0.0) * (5.0 - 0.0) / 16.0 == doctest::Approx(0.3125).epsilon(1e-15));
    CHECK(0.7 / 24.0 + p2(0.0) == doctest::Approx(0.3125).epsilon(1e-14));
    CHECK(p2(0.0) == doctest::Approx(17.0 / 60.0).epsilon(1e-15));
    CHECK(0.7 / 24.0 == doctest::Approx(0.0291666666666667).epsilon(1e-13));
    // t = 1: both sides vanish
    CHECK((7.0 / 10.0 - 1.0) / 24.0 + p2(1.0) == doctest::Approx(0.0).epsilon(1e-16));
    // minimum of P2 sits at t = 11/9 with value 7/2160
    CHECK(p2(11.0 / 9.0) == doctest::Approx(7.0 / 2160.0).epsilon(1e-12));
    CHECK(p2(11.0 / 9.0) > 0.0);

    std::vector<double> ts;
    for (int i = -200; i <= 200; ++i) ts.push_back(i * 0.01);
    IdentityReport r = check_p2(ts);
    CHECK(r.pass);
}

TEST_CASE("sigma2 shift identity: catalog values and random fields") {
    auto bg = make_band_grid(16);
    auto round = catalog_round_s3(bg, 1.0);
    SymTensorField A1 = schouten_t(round.bundle, round.g, 1.0);

    // round sphere at t = 2/3: 3 = 0.75 + (1/3)(3)(1.5)^2
    const double t = 2.0 / 3.0;
    const SigmaPair sp1 = sigma12_pencil(A1[0], round.g.inv(0));
    CHECK(sp1.s1 == doctest::Approx(1.5).epsilon(1e-13));
    CHECK(sp1.s2 == doctest::Approx(0.75).epsilon(1e-13));
    const Sym3 At = A1[0] + (1.0 - t) * sp1.s1 * round.g.at(0);
    CHECK(sigma12_pencil(At, round.g.inv(0)).s2 == doctest::Approx(3.0).epsilon(1e-13));

    IdentityReport r1 = check_sigma2_shift(A1, round.g, 1.0);
    CHECK(r1.pass);
    CHECK(r1.lhs <= 1e-15);  // t = 1 is trivial

    std::mt19937_64 rng(31);
    auto tg = make_torus_grid(8, 8, 8);
    auto flat = catalog_flat_torus(tg);
    std::uniform_real_distribution<double> U(-2.0, 1.0);
    for (int k = 0; k < 5; ++k) {
        SymTensorField A = random_sym_field(tg, rng, 1.0);
        IdentityReport r = check_sigma2_shift(A, flat.g, U(rng));
        CHECK(r.pass);
        CHECK(r.lhs <= 1e-13);
    }
}

TEST_CASE("cone inequalities: frozen arithmetic and randomized sweep") {
    // (1,2,3): -A + sigma_1 I = diag(5,4,3), A + sigma_1/3 I = diag(3,4,5)
    CHECK(6.0 - 3.0 == 3.0);
    CHECK(std::sqrt(3.0) * std::sqrt(11.0) <= 6.0);
    CHECK(std::sqrt(3.0) * std::sqrt(11.0) == doctest::Approx(5.7446).epsilon(1e-4));
    // isotropic equality case of Newton's inequality
    CHECK(std::sqrt(3.0) * std::sqrt(3.0) == doctest::Approx(3.0).epsilon(1e-15));

    IdentityReport r = check_cone_inequalities(10000, 12345);
    CHECK(r.pass);
    CHECK(r.lhs == 0.0);  // zero violations
}

TEST_CASE("lemma53 quadratic-form estimate holds on a solver endpoint") {
    auto bg = make_band_grid(48);
    CatalogParams p;
    p.w = pointwise(bg, [&](long i) { return 0.04 * std::cos(2.0 * bg->node_coords(i)[0]); });
    p.has_w = true;
    CatalogEntry pert = make_catalog(bg, "conformally_round_s3", p);
    SolverOptions opt;
    ProblemSetup s = make_setup(pert.g, pert.bundle, opt);
    SolveReport rep = continuation(s, opt);
    REQUIRE(rep.converged);
    IdentityReport r = check_lemma53(pert.g, pert.bundle, rep.final_u, 2.0 / 3.0);
    CHECK(r.pass);
    CHECK(r.lhs > 0.0);
}

TEST_CASE("q corollary: round numbers, flat equalities, divergence identity") {
    auto bg = make_band_grid(64);
    auto round = catalog_round_s3(bg, 1.0);
    IdentityReport r = check_q_corollary(round.g, round.bundle);
    CHECK(r.pass);
    // int sigma_2 - int R^2 / 128 = 15 pi^2 / 16
    CHECK(r.lhs - r.rhs == doctest::Approx(15.0 * kPi * kPi / 16.0).epsilon(1e-10));
    CHECK(r.abs_gap <= 1e-10);  // int Lap R dV = 0 for constant R

    auto tg = make_torus_grid(16, 16, 16);
    auto flat = catalog_flat_torus(tg);
    IdentityReport rf = check_q_corollary(flat.g, flat.bundle);
    CHECK(rf.pass);  // all-zero equalities

    CatalogParams p;
    p.w = pointwise(bg, [&](long i) { return 0.05 * std::cos(2.0 * bg->node_coords(i)[0]); });
    p.has_w = true;
    CatalogEntry pert = make_catalog(bg, "conformally_round_s3", p);
    IdentityReport rp = check_q_corollary(pert.g, pert.bundle);
    CHECK(rp.abs_gap <= rp.tolerance);  // divergence theorem at O(h^2)
}

TEST_CASE("transformation laws: exact at u = 0, pass on both charts") {
    auto bg = make_band_grid(48);
    auto round = catalog_round_s3(bg, 1.0);
    IdentityReport r0 = check_transformation_laws(round.g, round.bundle, ScalarField(bg, 0.0), 0.4);
    CHECK(r0.pass);
    CHECK(r0.lhs <= 1e-11);

    ScalarField u = pointwise(bg, [&](long i) { return 0.05 * std::cos(2.0 * bg->node_coords(i)[0]); });
    IdentityReport rb = check_transformation_laws(round.g, round.bundle, u, 0.4);
    CHECK(rb.pass);

    auto tg = make_torus_grid(24, 24, 24);
    auto flat = catalog_flat_torus(tg);
    ScalarField ut = pointwise(tg, [&](long i) {
        const Vec3 x = tg->node_coords(i);
        return 0.1 * std::sin(x[0]) * std::cos(x[1]);
    });
    IdentityReport rt = check_transformation_laws(flat.g, flat.bundle, ut, 1.0);
    CHECK(rt.pass);
}

TEST_CASE("fault injection: a corrupted transformation sign is caught") {
    auto bg = make_band_grid(48);
    auto round = catalog_round_s3(bg, 1.0);
    ScalarField u = pointwise(bg, [&](long i) { return 0.05 * std::cos(2.0 * bg->node_coords(i)[0]); });
    const ConformalFactor cf = ConformalFactor::make(u, round.g, round.bundle.gamma);
    const double t = 0.4;
    const SymTensorField At = schouten_t(round.bundle, round.g, t);

    // law with the gradient-square sign flipped
    SymTensorField corrupted = pointwise_sym(bg, [&](long i) {
        const Vec3 d = cf.grad_at(i);
        Sym3 dudu;
        for (int k = 0; k < 6; ++k) dudu.comp(k) = d[kSymPairs[k][0]] * d[kSymPairs[k][1]];
        return At[i] + cf.hess[i] + (1.0 - t) * cf.lap[i] * round.g.at(i) + dudu +
               0.5 * (2.0 - t) * cf.grad_sq[i] * round.g.at(i);  // wrong sign here
    });
    const MetricField gt = conformal_metric(round.g, cf);
    const CurvatureBundle bt = curvature_of(gt);
    const SymTensorField direct = schouten_t(bt, gt, t);

    const double good_gap = sup_abs_diff(transform_schouten_t(At, cf, round.g, t), direct);
    const double bad_gap = sup_abs_diff(corrupted, direct);
    const double h = bg->h[0];
    CHECK(good_gap <= 5.0 * h * h * 2.0);
    CHECK(bad_gap > 5.0 * h * h * 2.0);  // the corrupted law is flagged
    CHECK(bad_gap > 20.0 * good_gap);
}

TEST_CASE("suite runner: all pass on a smooth flat-torus configuration") {
    auto tg = make_torus_grid(16, 16, 16);
    auto flat = catalog_flat_torus(tg);
    std::mt19937_64 rng(2024);
    ScalarField u = random_smooth_field(tg, rng, 0.1);
    const auto reports = run_suites({"all"}, flat.g, flat.bundle, u, 0.5, 99);
    CHECK(reports.size() == suite_names().size());
    for (const auto& r : reports) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.pass);
    }
    CHECK_THROWS_AS(run_suites({"nonsense"}, flat.g, flat.bundle, u, 0.5, 1), ValidationError);
}

TEST_CASE("sigma2 dual formula suite on random geometry") {
    auto tg = make_torus_grid(10, 10, 10);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-0.8, 0.8);
    std::uniform_real_distribution<double> Ug(-0.2, 0.2);
    SymTensorField ric(tg), gt(tg);
    for (long i = 0; i < tg->total; ++i) {
        for (int c = 0; c < 6; ++c) ric[i].comp(c) = U(rng);
        gt[i] = Sym3::identity();
        for (int c = 0; c < 6; ++c) gt[i].comp(c) += Ug(rng);
    }
    MetricField g = MetricField::make(std::move(gt));
    CurvatureBundle b;
    b.ricci = ric;
    b.scalar = pointwise(tg, [&](long i) { return trace_product(g.inv(i), ric[i]); });
    IdentityReport r = check_sigma2_dual_formula(g, b);
    CHECK(r.pass);
    CHECK(r.lhs <= 1e-12);
}
