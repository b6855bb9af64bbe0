// manifest.hpp - JSON manifest parsing and the report / solve / verify
// commands behind the CLI. Reports are pure functions of the manifest (plus
// seed and explicit overrides), so identical inputs produce byte-identical
// output within one build.
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigma2/conformal.hpp"
#include "sigma2/curvature.hpp"
#include "sigma2/expr.hpp"
#include "sigma2/grid.hpp"
#include "sigma2/solver.hpp"
#include "sigma2/verify.hpp"

namespace sigma2 {

using nlohmann::json;

struct Manifest {
    ChartKind kind = ChartKind::S3Band;
    std::array<int, 3> dims{64, 1, 1};
    std::array<std::array<double, 2>, 3> ranges;

    // exactly one of the two metric sources
    std::string catalog_name;
    double radius = 1.0;
    double fiber = 1.0;
    std::string w_expr;
    std::array<std::string, 6> component_exprs;
    bool use_catalog = false;

    std::string conformal_factor;  // optional background conformal change

    SolverOptions solver;
    double functional_t = 2.0 / 3.0;
    double grad_cap = 1.0;
    std::vector<std::string> candidate_exprs;
    std::vector<double> report_t{1.0, 2.0 / 3.0};
    std::vector<std::string> suites{"all"};
    uint64_t seed = 1;
};

namespace manifest_detail {

inline void parse_chart(const json& j, Manifest& m) {
    if (!j.contains("chart")) throw ValidationError("manifest: missing 'chart' section");
    const json& c = j.at("chart");
    const std::string kind = c.value("kind", "");
    if (kind == "torus3") m.kind = ChartKind::Torus3;
    else if (kind == "s3band") m.kind = ChartKind::S3Band;
    else throw ValidationError("manifest chart.kind must be 'torus3' or 's3band'");
    if (!c.contains("dims") || !c.at("dims").is_array() || c.at("dims").size() != 3)
        throw ValidationError("manifest chart.dims must be an array of 3 node counts");
    for (int a = 0; a < 3; ++a) m.dims[a] = c.at("dims").at(a).get<int>();
    if (m.kind == ChartKind::Torus3)
        m.ranges = {{{0.0, 2.0 * kPi}, {0.0, 2.0 * kPi}, {0.0, 2.0 * kPi}}};
    else
        m.ranges = {{{0.0, kPi / 2.0}, {0.0, 2.0 * kPi}, {0.0, 2.0 * kPi}}};
    if (c.contains("ranges")) {
        const json& r = c.at("ranges");
        if (!r.is_array() || r.size() != 3)
            throw ValidationError("manifest chart.ranges must be 3 [lo, hi] pairs");
        for (int a = 0; a < 3; ++a) {
            m.ranges[a][0] = r.at(a).at(0).get<double>();
            m.ranges[a][1] = r.at(a).at(1).get<double>();
        }
    }
}

inline void parse_metric(const json& j, Manifest& m) {
    if (!j.contains("metric")) throw ValidationError("manifest: missing 'metric' section");
    const json& mt = j.at("metric");
    const bool has_cat = mt.contains("catalog");
    const bool has_comp = mt.contains("components");
    if (has_cat == has_comp)
        throw ValidationError("manifest metric must have exactly one of 'catalog' or 'components'");
    if (has_cat) {
        m.use_catalog = true;
        m.catalog_name = mt.at("catalog").get<std::string>();
        if (mt.contains("params")) {
            const json& p = mt.at("params");
            m.radius = p.value("radius", 1.0);
            m.fiber = p.value("fiber", 1.0);
            m.w_expr = p.value("w", "");
        }
    } else {
        static const char* keys[6] = {"g11", "g22", "g33", "g12", "g13", "g23"};
        const json& comp = mt.at("components");
        for (int k = 0; k < 6; ++k) {
            if (!comp.contains(keys[k]))
                throw ValidationError(std::string("manifest metric.components missing '") +
                                      keys[k] + "'");
            m.component_exprs[k] = comp.at(keys[k]).get<std::string>();
        }
    }
}

inline void check_expr(const std::string& src, const std::string& field) {
    try {
        parse(src);
    } catch (const ParseError& e) {
        throw ValidationError("manifest " + field + ": " + e.what());
    }
}

}  // namespace manifest_detail

inline Manifest parse_manifest(const json& j) {
    Manifest m;
    manifest_detail::parse_chart(j, m);
    manifest_detail::parse_metric(j, m);
    m.conformal_factor = j.value("conformal_factor", "");

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        m.solver.delta_margin = s.value("delta_margin", m.solver.delta_margin);
        m.solver.path_floor = s.value("path_floor", m.solver.path_floor);
        m.solver.t0 = s.value("t0", m.solver.t0);
        m.solver.steps = s.value("steps", m.solver.steps);
        m.solver.tol_factor = s.value("tol_factor", m.solver.tol_factor);
    }
    if (j.contains("functional")) {
        const json& f = j.at("functional");
        m.functional_t = f.value("t", m.functional_t);
        m.grad_cap = f.value("grad_cap", m.grad_cap);
        if (f.contains("candidates"))
            for (const auto& c : f.at("candidates")) m.candidate_exprs.push_back(c.get<std::string>());
    }
    if (j.contains("report_t")) {
        m.report_t.clear();
        for (const auto& t : j.at("report_t")) m.report_t.push_back(t.get<double>());
    }
    if (j.contains("suites")) {
        m.suites.clear();
        for (const auto& s : j.at("suites")) m.suites.push_back(s.get<std::string>());
    }
    m.seed = j.value("seed", uint64_t{1});

    if (!(m.solver.t0 <= 2.0 / 3.0 + 1e-12))
        throw ValidationError("manifest solver.t0 must satisfy t0 <= 2/3");
    if (!(m.functional_t <= 2.0 / 3.0 + 1e-12))
        throw ValidationError("manifest functional.t must satisfy t <= 2/3");

    if (!m.use_catalog)
        for (int k = 0; k < 6; ++k)
            manifest_detail::check_expr(m.component_exprs[k], "metric component");
    if (!m.w_expr.empty()) manifest_detail::check_expr(m.w_expr, "metric params.w");
    if (!m.conformal_factor.empty()) manifest_detail::check_expr(m.conformal_factor, "conformal_factor");
    for (const auto& c : m.candidate_exprs) manifest_detail::check_expr(c, "functional candidate");
    return m;
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("manifest JSON parse error in '" + path + "': " + e.what());
    }
    return parse_manifest(j);
}

// ---------------------------------------------------------------------------
// Geometry construction
// ---------------------------------------------------------------------------

struct Geometry {
    GridPtr grid;
    MetricField g;
    CurvatureBundle bundle;
};

inline Geometry build_geometry(const Manifest& m) {
    Geometry out;
    out.grid = make_grid(m.kind, m.dims, m.ranges);
    if (m.use_catalog) {
        CatalogParams p;
        p.radius = m.radius;
        p.fiber = m.fiber;
        if (!m.w_expr.empty()) {
            p.w = evaluate(parse(m.w_expr), out.grid);
            p.has_w = true;
        }
        CatalogEntry e = make_catalog(out.grid, m.catalog_name, p);
        out.g = std::move(e.g);
        out.bundle = std::move(e.bundle);
    } else {
        SymTensorField t(out.grid);
        for (int k = 0; k < 6; ++k) {
            const ScalarField comp = evaluate(parse(m.component_exprs[k]), out.grid);
            for (long i = 0; i < out.grid->total; ++i) t[i].comp(k) = comp[i];
        }
        out.g = MetricField::make(std::move(t));
        out.bundle = curvature_of(out.g);
    }
    if (!m.conformal_factor.empty()) {
        const ScalarField u0 = evaluate(parse(m.conformal_factor), out.grid);
        auto [gt, bt] = conformal_background(out.g, out.bundle, u0);
        out.g = std::move(gt);
        out.bundle = std::move(bt);
    }
    return out;
}

inline std::vector<std::pair<std::string, ScalarField>> build_candidates(const Manifest& m,
                                                                         const GridPtr& grid) {
    std::vector<std::pair<std::string, ScalarField>> out;
    for (const auto& src : m.candidate_exprs) out.emplace_back(src, evaluate(parse(src), grid));
    return out;
}

// ---------------------------------------------------------------------------
// Commands (exit codes: 0 ok, 2 validation, 3 numerical failure)
// ---------------------------------------------------------------------------

namespace manifest_detail {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    json to_json() const { return json{{"min", lo}, {"max", hi}}; }
};

}  // namespace manifest_detail

/// Geometry report: curvature ranges, cone coverage, functionals, mu_t.
inline json report_json(const Manifest& m) {
    const Geometry geo = build_geometry(m);
    const MetricField& g = geo.g;
    const CurvatureBundle& b = geo.bundle;

    manifest_detail::Range r_range, ric_min, ric_max, q_range;
    const ScalarField Q = q_curvature(b, g);
    for (long i = 0; i < g.size(); ++i) {
        r_range.add(b.scalar[i]);
        const Vec3 ev = generalized_eig(b.ricci[i], g.at(i));
        ric_min.add(ev[0]);
        ric_max.add(ev[2]);
        q_range.add(Q[i]);
    }

    json sig;
    for (const double t : m.report_t) {
        const SymTensorField At = schouten_t(b, g, t);
        const ConeField cone = sigma_spectrum(At, g);
        manifest_detail::Range s1r, s2r;
        long in_cone = 0;
        for (long i = 0; i < g.size(); ++i) {
            s1r.add(cone.v[i].sigma1);
            s2r.add(cone.v[i].sigma2);
            if (cone.v[i].in_cone) ++in_cone;
        }
        json entry;
        entry["t"] = t;
        entry["sigma1"] = s1r.to_json();
        entry["sigma2"] = s2r.to_json();
        entry["cone_fraction"] = static_cast<double>(in_cone) / g.size();
        sig.push_back(entry);
    }

    const PinchingReport pr =
        pinching_margin(g, b, m.functional_t, build_candidates(m, geo.grid), m.grad_cap);

    json out;
    out["chart"] = {{"kind", m.kind == ChartKind::Torus3 ? "torus3" : "s3band"},
                    {"dims", m.dims},
                    {"nodes", geo.grid->total}};
    out["scalar_curvature"] = r_range.to_json();
    out["ricci_eigenvalues"] = {{"min", ric_min.lo}, {"max", ric_max.hi}};
    out["sigma"] = sig;
    out["q_curvature"] = q_range.to_json();
    out["volume"] = volume(g);
    out["total_sigma2"] = pr.total_sigma2;
    out["yamabe_quotient"] = pr.yamabe_quotient;
    json pinch;
    pinch["t"] = pr.t;
    pinch["I_estimate_upper_bound"] = pr.I_estimate;
    pinch["mu_t"] = pr.mu_t;
    pinch["hypothesis_met"] = pr.hypothesis_met;
    pinch["note"] = "mu_t uses a sampled upper bound for the infimum I(M,g)";
    json samples = json::array();
    for (const auto& s : pr.i_samples)
        samples.push_back({{"phi", s.label},
                           {"i_value", s.value},
                           {"grad_sup", s.grad_sup},
                           {"admissible", s.admissible}});
    pinch["i_samples"] = samples;
    pinch["warnings"] = pr.warnings;
    out["pinching"] = pinch;
    return out;
}

inline json solve_json(const SolveReport& rep, const ProblemSetup& setup) {
    json out;
    out["delta"] = setup.delta;
    out["t0"] = setup.t0;
    out["converged"] = rep.converged;
    out["last_good_t"] = rep.last_good_t;
    if (!rep.failure_reason.empty()) out["failure_reason"] = rep.failure_reason;
    manifest_detail::Range ur;
    for (long i = 0; i < rep.final_u.size(); ++i) ur.add(rep.final_u[i]);
    out["final_u"] = {{"min", ur.lo}, {"max", ur.hi}};
    out["final_residual_sup"] = rep.final_residual_sup;
    out["final_cone_margin"] = rep.final_cone_margin;
    out["final_cone_margin_conformal"] = rep.final_cone_margin_conformal;
    out["pinching_ok"] = rep.pinching_ok;
    out["ricci_positive"] = rep.ricci_positive;
    out["sigma2_positive"] = rep.sigma2_positive;
    out["scalar_positive"] = rep.scalar_positive;
    out["pinch_margin_lower"] = rep.pinch_margin_lower;
    out["pinch_margin_upper"] = rep.pinch_margin_upper;
    out["ricci_min_eig"] = rep.ricci_min_eig;
    out["scalar_min"] = rep.scalar_min;
    out["dual_route_residual_sup"] = rep.dual_route_residual_sup;
    out["steps_accepted"] = rep.path.size();
    return out;
}

inline std::string solve_csv(const SolveReport& rep) {
    std::ostringstream os;
    os << "t,residual_sup,cone_margin_min,sup_u,inf_u,sup_grad_u,harnack_gap\n";
    os.setf(std::ios::scientific);
    os.precision(17);
    for (const auto& p : rep.path)
        os << p.t << ',' << p.residual_sup << ',' << p.cone_margin_min << ',' << p.sup_u << ','
           << p.inf_u << ',' << p.sup_grad_u << ',' << p.harnack_gap << '\n';
    return os.str();
}

struct SolveOutput {
    json report;
    std::string csv;
    bool converged = false;
};

inline SolveOutput run_solve(const Manifest& m, std::optional<double> t0_override = {},
                             std::optional<int> steps_override = {}) {
    Manifest mm = m;
    if (t0_override) mm.solver.t0 = *t0_override;
    if (steps_override) mm.solver.steps = *steps_override;
    if (!(mm.solver.t0 <= 2.0 / 3.0 + 1e-12))
        throw ValidationError("solve: t0 must satisfy t0 <= 2/3");
    Geometry geo = build_geometry(mm);
    ProblemSetup setup = make_setup(std::move(geo.g), std::move(geo.bundle), mm.solver);
    SolveReport rep = continuation(setup, mm.solver);
    SolveOutput out;
    out.report = solve_json(rep, setup);
    out.csv = solve_csv(rep);
    out.converged = rep.converged;
    return out;
}

inline json verify_json(const Manifest& m, const std::vector<std::string>& suites, uint64_t seed,
                        bool& all_pass) {
    Geometry geo = build_geometry(m);
    // seeded smooth conformal factor drives the identity suites
    std::mt19937_64 rng(seed);
    const ScalarField u = random_smooth_field(geo.grid, rng, 0.1);
    const std::vector<IdentityReport> reps =
        run_suites(suites, geo.g, geo.bundle, u, m.functional_t, seed);
    all_pass = true;
    json arr = json::array();
    for (const auto& r : reps) {
        all_pass = all_pass && r.pass;
        arr.push_back({{"name", r.name},
                       {"lhs", r.lhs},
                       {"rhs", r.rhs},
                       {"abs_gap", r.abs_gap},
                       {"rel_gap", r.rel_gap},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass},
                       {"grid_h", r.grid_h},
                       {"detail", r.detail}});
    }
    return arr;
}

}  // namespace sigma2
