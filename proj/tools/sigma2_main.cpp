// sigma2 - manifest-driven CLI: geometry reports, continuation solves and
// identity verification suites on discretized closed 3-manifolds.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sigma2/manifest.hpp"

namespace {

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content << std::endl;
        return;
    }
    std::ofstream out(path);
    if (!out) throw sigma2::ValidationError("cannot write output file '" + path + "'");
    out << content << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sigma2 curvature cone and conformal continuation toolkit"};
    app.require_subcommand(1);

    std::string manifest_path, out_path, csv_path, suite;
    uint64_t seed_opt = 0;
    bool seed_given = false;
    std::optional<double> t0_override;
    std::optional<int> steps_override;
    double t0_val = 0.0;
    int steps_val = 0;

    CLI::App* report = app.add_subcommand("report", "curvature and functional report");
    report->add_option("manifest", manifest_path, "manifest JSON file")->required();
    report->add_option("--out", out_path, "output JSON file (default: stdout)");

    CLI::App* solve = app.add_subcommand("solve", "continuation solve of the sigma_2 path");
    solve->add_option("manifest", manifest_path, "manifest JSON file")->required();
    solve->add_option("--out", out_path, "output JSON file (default: stdout)");
    solve->add_option("--csv", csv_path, "per-step CSV trace file");
    CLI::Option* o_t0 = solve->add_option("--t0", t0_val, "override target parameter t0");
    CLI::Option* o_steps = solve->add_option("--steps", steps_val, "override step count");

    CLI::App* verify = app.add_subcommand("verify", "run identity verification suites");
    verify->add_option("manifest", manifest_path, "manifest JSON file")->required();
    CLI::Option* o_suite =
        verify->add_option("--suite", suite, "suite name or 'all' (default: manifest suites)");
    CLI::Option* o_seed = verify->add_option("--seed", seed_opt, "override manifest seed");
    verify->add_option("--out", out_path, "output JSON file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        const sigma2::Manifest m = sigma2::load_manifest(manifest_path);

        if (report->parsed()) {
            const nlohmann::json j = sigma2::report_json(m);
            write_output(out_path, j.dump(2));
            return 0;
        }
        if (solve->parsed()) {
            if (o_t0->count() > 0) t0_override = t0_val;
            if (o_steps->count() > 0) steps_override = steps_val;
            const sigma2::SolveOutput out = sigma2::run_solve(m, t0_override, steps_override);
            write_output(out_path, out.report.dump(2));
            if (!csv_path.empty()) write_output(csv_path, out.csv);
            if (!out.converged) {
                std::cerr << "solve: continuation failed; last good t = "
                          << out.report["last_good_t"] << std::endl;
                return 3;
            }
            return 0;
        }
        if (verify->parsed()) {
            seed_given = o_seed->count() > 0;
            const uint64_t seed = seed_given ? seed_opt : m.seed;
            const std::vector<std::string> suites =
                (o_suite->count() > 0) ? std::vector<std::string>{suite} : m.suites;
            bool all_pass = false;
            const nlohmann::json j = sigma2::verify_json(m, suites, seed, all_pass);
            write_output(out_path, j.dump(2));
            if (!all_pass) {
                std::cerr << "verify: at least one suite failed" << std::endl;
                return 3;
            }
            return 0;
        }
    } catch (const sigma2::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << std::endl;
        return 2;
    } catch (const sigma2::ParseError& e) {
        std::cerr << "expression error: " << e.what() << std::endl;
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << std::endl;
        return 2;
    } catch (const sigma2::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }
    return 0;
}
