#pragma once

// Command-line driver. run_cli is the whole program; main() only forwards to
// it, so tests can run every subcommand in-process and capture the streams.
// Exit codes: 0 success, 1 usage or parameter error, 2 validation-suite
// failure, 3 numerical non-convergence.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "stellarcert/reports.hpp"

namespace stellarcert {

namespace detail {

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out_path.empty())
        out << text;
    else
        write_text_atomic(cfg.out_path, text);
}

} // namespace detail

inline int run_cli(int argc, const char* const* argv,
                   std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"stellar-rank witness thresholds and certification for a "
                 "two-detector click scheme"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    std::string config_path;
    bool no_cache = false;
    double r1 = 0.0, r2 = 0.0;
    // Thresholds come out of a numerical optimizer, so a violation smaller
    // than the optimizer's own accuracy is noise. The default demands a sliver
    // more than a bare inequality; --slack 0 restores the strict comparison.
    double slack = 1e-9;
    int draws = 0; // 0: per-suite defaults

    auto* opt_eta = app.add_option("--eta", cfg.params.eta,
                                   "detector efficiency in (0, 1]");
    auto* opt_t = app.add_option("--transmittance", cfg.params.transmittance,
                                 "beam-splitter transmittance in (0, 1)");
    auto* opt_ranks = app.add_option("--ranks", cfg.ranks,
                                     "stellar ranks, e.g. 1,2,3")
                          ->delimiter(',');
    auto* opt_grid = app.add_option(
        "--lambda-grid", cfg.lambda_grid,
        "witness slope grid: default | lin:lo,hi,n | geo:lo,hi,n | vals:... "
        "joined by ';'");
    auto* opt_format = app.add_option("--format", cfg.format, "csv or json")
                           ->check(CLI::IsMember({"csv", "json"}));
    auto* opt_out = app.add_option("--out", cfg.out_path,
                                   "output file (default: stdout)");
    auto* opt_seed = app.add_option("--seed", cfg.seed,
                                    "seed for the randomized suites");
    auto* opt_nmax = app.add_option("--n-max", cfg.n_max,
                                    "deepest Fock index in the probability table");
    auto* opt_cache = app.add_option("--cache-dir", cfg.cache_dir,
                                     "boundary cache directory");
    app.add_option("--config", config_path,
                   "JSON file with the run configuration; explicit flags win");
    app.add_flag("--no-cache", no_cache, "skip the boundary cache");

    auto* sc_prob = app.add_subcommand(
        "probabilities", "click outcome probabilities per Fock state");
    auto* sc_thr = app.add_subcommand(
        "thresholds", "stellar-rank witness thresholds and the single-click peak");
    auto* sc_bnd = app.add_subcommand(
        "boundary", "certifiable-region boundaries and the physical boundary");
    auto* sc_cert = app.add_subcommand(
        "certify", "stellar-rank verdict for a measured probability pair");
    sc_cert->add_option("--r1", r1, "measured single-click probability")
        ->required();
    sc_cert->add_option("--r2", r2, "measured double-click probability")
        ->required();
    sc_cert->add_option("--slack", slack,
                        "extra margin demanded of a violation (default 1e-9)");
    auto* sc_val =
        app.add_subcommand("validate", "run the numerical self-check suites");
    sc_val->add_option("--draws", draws,
                       "override the draw count of every randomized suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                err << "error: cannot open config file " << config_path << "\n";
                return 1;
            }
            RunConfig base = nlohmann::json::parse(f).get<RunConfig>();
            if (!opt_eta->count()) cfg.params.eta = base.params.eta;
            if (!opt_t->count()) cfg.params.transmittance = base.params.transmittance;
            if (!opt_ranks->count()) cfg.ranks = base.ranks;
            if (!opt_grid->count()) cfg.lambda_grid = base.lambda_grid;
            if (!opt_format->count()) cfg.format = base.format;
            if (!opt_out->count()) cfg.out_path = base.out_path;
            if (!opt_seed->count()) cfg.seed = base.seed;
            if (!opt_nmax->count()) cfg.n_max = base.n_max;
            if (!opt_cache->count()) cfg.cache_dir = base.cache_dir;
            cfg.search = base.search;
        }

        int rc = 0;
        std::string text;
        if (app.got_subcommand(sc_prob)) {
            validate(cfg);
            const ProbabilityTable t = probabilities_table(cfg.params, cfg.n_max);
            text = cfg.format == "csv" ? csv_probabilities(t)
                                       : json_document(cfg, results_probabilities(t));
        } else if (app.got_subcommand(sc_thr)) {
            const ThresholdsReport t = thresholds_report(cfg);
            for (const auto& row : t.rows)
                if (!row.result.converged) rc = 3;
            text = cfg.format == "csv" ? csv_thresholds(t)
                                       : json_document(cfg, results_thresholds(t));
        } else if (app.got_subcommand(sc_bnd)) {
            const BoundaryReport b = boundary_report(cfg, !no_cache);
            for (const auto& level : b.levels)
                for (const auto& s : level.samples)
                    if (!s.converged) rc = 3;
            text = cfg.format == "csv" ? csv_boundary(b)
                                       : json_document(cfg, results_boundary(b));
        } else if (app.got_subcommand(sc_cert)) {
            const CertifyReport c = certify_report(cfg, r1, r2, slack, !no_cache);
            for (const auto& level : c.boundaries.levels)
                for (const auto& s : level.samples)
                    if (!s.converged) rc = 3;
            text = cfg.format == "csv" ? csv_certify(c)
                                       : json_document(cfg, results_certify(c));
        } else {
            ValidationOptions opts;
            if (draws > 0) {
                opts.povm_draws = draws;
                opts.oracle_draws = draws;
                opts.crosscheck_draws = std::min(draws, 8);
                opts.soundness_draws = draws;
            }
            const ValidationReport v = run_validation(cfg, opts);
            if (!v.all_passed) rc = 2;
            text = cfg.format == "csv" ? csv_validation(v)
                                       : json_document(cfg, results_validation(v));
        }
        detail::emit(cfg, text, out);
        return rc;
    } catch (const nlohmann::json::exception& e) {
        err << "error: bad config file: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace stellarcert
