#pragma once

// Command implementations behind the `bayesctl` tool. Argument parsing lives
// in tools/bayesctl.cpp; everything here is callable from tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bayesctl/controller.hpp"
#include "bayesctl/errors.hpp"
#include "bayesctl/oracles.hpp"
#include "bayesctl/pareto_filter.hpp"
#include "bayesctl/report.hpp"
#include "bayesctl/risk_recursion.hpp"
#include "bayesctl/scenario.hpp"
#include "bayesctl/simulation.hpp"

namespace bayesctl {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kNumerical = 3 };

struct RunConfig {
    std::string command;
    std::string scenario_path;
    std::int64_t replications = 10000;
    std::uint64_t seed = 42;
    ConstantsMode mode = ConstantsMode::Derived;
    std::optional<double> theta;  // unset: 1e-6 (1 + sigma_max(K))
    std::string out = "-";
    int workers = 1;
    std::vector<double> betas;     // compare-modes / oracle-check override
    std::string trajectories_out;  // simulate: optional per-step trace
    int trajectories = 5;
};

namespace detail {

inline std::string provenance(const RunConfig& cfg) {
    return "bayesctl " + cfg.command + " mode=" + to_string(cfg.mode) +
           " theta=" + (cfg.theta ? format_double(*cfg.theta) : std::string("default"));
}

inline void add_matrix_columns(std::vector<std::string>& header, const std::string& name,
                               Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            header.push_back(name + "_" + std::to_string(i) + "_" + std::to_string(j));
}

inline void add_matrix_cells(std::vector<std::string>& row, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_double(m(i, j)));
}

/// Coefficients with a fallback for singular gains: the stages are flagged
/// and the closed-form risk is then not certified.
inline RiskCoeffs coefficients_with_fallback(const Scenario& sc, ConstantsMode mode) {
    try {
        return backward_coefficients(sc, mode, SingularHandling::Throw);
    } catch (const SingularGainError& e) {
        std::cerr << "bayesctl: " << e.what()
                  << "; continuing with the regularized controller (closed-form risk not certified)\n";
        return backward_coefficients(sc, mode, SingularHandling::Pseudoinverse);
    }
}

/// Distinct posterior shapes met along the horizon, active coordinates only.
inline std::vector<double> scenario_betas(const Scenario& sc) {
    std::set<double> seen;
    for (int n = 0; n <= sc.max_stage(); ++n) {
        const Vector b = stage_beta(sc.prior, n);
        for (int i = 0; i < sc.prior.k; ++i) seen.insert(b(i));
    }
    return {seen.begin(), seen.end()};
}

inline std::vector<double> resolve_betas(const RunConfig& cfg) {
    if (!cfg.betas.empty()) return cfg.betas;
    if (!cfg.scenario_path.empty()) return scenario_betas(load_scenario(cfg.scenario_path));
    return {2.1, 2.5, 3.0, 5.0, 10.0};
}

inline bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

inline int cmd_validate(const RunConfig& cfg) {
    const Scenario sc = load_scenario(cfg.scenario_path);
    CsvTable t;
    t.provenance = provenance(cfg);
    t.header = {"m", "r", "M", "k", "generalized"};
    t.add_row({std::to_string(sc.m), std::to_string(sc.r), std::to_string(sc.max_stage()),
               std::to_string(sc.prior.k), sc.generalized() ? "1" : "0"});
    emit_report(t, cfg.out);
    return kOk;
}

inline int cmd_coeffs(const RunConfig& cfg) {
    const Scenario sc = load_scenario(cfg.scenario_path);
    const RiskCoeffs rc = coefficients_with_fallback(sc, cfg.mode);
    const Eigen::Index m = sc.m;
    CsvTable t;
    t.provenance = provenance(cfg);
    t.header = {"stage", "phi", "singular"};
    add_matrix_columns(t.header, "K", m, m);
    add_matrix_columns(t.header, "A", m, m);
    add_matrix_columns(t.header, "B", m, m);
    add_matrix_columns(t.header, "C", m, m);
    for (int n = 0; n <= rc.max_stage(); ++n) {
        std::vector<std::string> row{std::to_string(n), format_double(rc.at(n).phi),
                                     rc.at(n).singular ? "1" : "0"};
        add_matrix_cells(row, rc.at(n).K);
        add_matrix_cells(row, rc.A(n));
        add_matrix_cells(row, rc.B(n));
        add_matrix_cells(row, rc.C(n));
        t.add_row(std::move(row));
    }
    emit_report(t, cfg.out);
    return kOk;
}

inline void write_trajectories(const Scenario& sc, const PolicyFactory& factory,
                               const RunConfig& cfg) {
    CsvTable t;
    t.provenance = provenance(cfg) + " seed=" + std::to_string(cfg.seed);
    t.header = {"replication", "stage", "horizon"};
    for (int i = 0; i < sc.m; ++i) t.header.push_back("x_" + std::to_string(i));
    for (int i = 0; i < sc.m; ++i) t.header.push_back("u_" + std::to_string(i));
    for (int i = 0; i < sc.m; ++i) t.header.push_back("v_" + std::to_string(i));
    t.header.push_back("loss");
    for (int rep = 0; rep < cfg.trajectories; ++rep) {
        Rng rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
        auto policy = factory();
        const Trajectory tr = rollout(sc, *policy, rng);
        for (std::size_t n = 0; n < tr.states.size(); ++n) {
            std::vector<std::string> row{std::to_string(rep), std::to_string(n),
                                         std::to_string(tr.horizon)};
            for (int i = 0; i < sc.m; ++i) row.push_back(format_double(tr.states[n](i)));
            for (int i = 0; i < sc.m; ++i) row.push_back(format_double(tr.controls[n](i)));
            for (int i = 0; i < sc.m; ++i)
                row.push_back(n < tr.disturbances.size() ? format_double(tr.disturbances[n](i)) : "");
            row.push_back(format_double(tr.loss));
            t.add_row(std::move(row));
        }
    }
    emit_report(t, cfg.trajectories_out);
}

inline int cmd_simulate(const RunConfig& cfg) {
    if (cfg.replications < 2) throw InvalidInput("--reps must be at least 2 for a standard error");
    auto sc = std::make_shared<const Scenario>(load_scenario(cfg.scenario_path));
    auto rc = std::make_shared<const RiskCoeffs>(coefficients_with_fallback(*sc, cfg.mode));
    const PolicyFactory factory = bayes_policy_factory(sc, rc, cfg.theta);
    const SimReport rep = estimate_risk(*sc, factory, cfg.replications, cfg.seed, cfg.workers);
    CsvTable t;
    t.provenance = provenance(cfg);
    if (sc->generalized()) t.provenance += " generalized=min-norm-completion";
    t.header = {"mean_loss", "std_error", "replications", "seed"};
    t.add_row({format_double(rep.mean_loss), format_double(rep.std_error),
               std::to_string(rep.replications), std::to_string(rep.seed)});
    emit_report(t, cfg.out);
    if (!cfg.trajectories_out.empty()) write_trajectories(*sc, factory, cfg);
    return kOk;
}

inline int cmd_compare_modes(const RunConfig& cfg) {
    CsvTable t;
    t.provenance = provenance(cfg);
    t.header = {"beta"};
    const char* names[] = {"Q", "Q1", "Q2", "Q3", "Q4"};
    const Integrand integrands[] = {Integrand::V, Integrand::V2, Integrand::MaxRV,
                                    Integrand::MaxRV2, Integrand::VMaxRV};
    for (const char* n : names) {
        t.header.push_back(std::string(n) + "_printed");
        t.header.push_back(std::string(n) + "_derived");
        t.header.push_back(std::string(n) + "_quadrature");
    }
    t.header.push_back("discrepancies");
    for (double beta : resolve_betas(cfg)) {
        const MomentConstants pr = moment_constants(beta, ConstantsMode::Printed);
        const MomentConstants de = moment_constants(beta, ConstantsMode::Derived);
        const double p[] = {pr.q, pr.q1, pr.q2, pr.q3, pr.q4};
        const double d[] = {de.q, de.q1, de.q2, de.q3, de.q4};
        std::vector<std::string> row{format_double(beta)};
        std::string flagged;
        for (int i = 0; i < 5; ++i) {
            row.push_back(format_double(p[i]));
            row.push_back(format_double(d[i]));
            row.push_back(format_double(quadrature_moment(beta, 1.0, integrands[i])));
            if (!close_rel(p[i], d[i], 1e-10)) flagged += (flagged.empty() ? "" : ";") + std::string(names[i]);
        }
        row.push_back(flagged.empty() ? "none" : flagged);
        t.add_row(std::move(row));
    }
    emit_report(t, cfg.out);
    return kOk;
}

inline int cmd_oracle_check(const RunConfig& cfg) {
    CsvTable t;
    t.provenance = provenance(cfg);
    t.header = {"check", "beta", "value", "reference", "abs_error", "tolerance", "pass"};
    bool all_pass = true;
    auto record = [&](const std::string& check, double beta, double value, double ref,
                      double tol) {
        const bool ok = std::abs(value - ref) <= tol;
        all_pass = all_pass && ok;
        t.add_row({check, format_double(beta), format_double(value), format_double(ref),
                   format_double(std::abs(value - ref)), format_double(tol), ok ? "1" : "0"});
    };

    for (double beta : resolve_betas(cfg)) {
        const MomentConstants c = moment_constants(beta, cfg.mode);
        const std::pair<const char*, std::pair<double, double>> rows[] = {
            {"Q", {c.q, quadrature_moment(beta, 1.0, Integrand::V)}},
            {"Q1", {c.q1, quadrature_moment(beta, 1.0, Integrand::V2)}},
            {"Q2", {c.q2, quadrature_moment(beta, 1.0, Integrand::MaxRV)}},
            {"Q3", {c.q3, quadrature_moment(beta, 1.0, Integrand::MaxRV2)}},
            {"Q4", {c.q4, quadrature_moment(beta, 1.0, Integrand::VMaxRV)}},
            {"T", {c.t, pareto_moment_quadrature(beta, 1.0, 1)}},
            {"T1", {c.t1, pareto_moment_quadrature(beta, 1.0, 2)}},
        };
        for (const auto& [name, vals] : rows)
            record(name, beta, vals.first, vals.second, 1e-10 * std::abs(vals.second));
    }

    if (!cfg.scenario_path.empty()) {
        const Scenario sc = load_scenario(cfg.scenario_path);
        if (sc.m == 1 && sc.prior.k == 1 && sc.max_stage() <= 3 && sc.max_stage() >= 1) {
            const RiskCoeffs rc = coefficients_with_fallback(sc, cfg.mode);
            const FilterState st0 = init_filter(sc.prior);
            const StageGain g = stage_gain(sc, rc, 0, sc.x0, st0);
            const double u_dp = bayes_control(g.K, g.L, {}, cfg.theta).u(0);

            const OracleGrids grids = default_oracle_grids(sc);
            const GridOracle oracle(sc, grids.u, grids.r, grids.x);
            record("grid_initial_action", sc.prior.beta(0), u_dp, oracle.initial_action(),
                   grids.u.step());
        }
    }
    emit_report(t, cfg.out);
    return all_pass ? kOk : kNumerical;
}

}  // namespace detail

/// Runs one command; returns the process exit code. Diagnostics go to
/// standard error.
inline int run_experiment(const RunConfig& cfg) {
    try {
        if (cfg.theta && !(*cfg.theta > 0.0)) throw InvalidInput("--theta must be positive");
        if (cfg.replications < 1) throw InvalidInput("--reps must be at least 1");
        const bool needs_scenario = cfg.command == "validate" || cfg.command == "coeffs" ||
                                    cfg.command == "simulate";
        if (needs_scenario && cfg.scenario_path.empty())
            throw InvalidInput(cfg.command + ": --scenario is required");
        if (cfg.command == "validate") return detail::cmd_validate(cfg);
        if (cfg.command == "coeffs") return detail::cmd_coeffs(cfg);
        if (cfg.command == "simulate") return detail::cmd_simulate(cfg);
        if (cfg.command == "compare-modes") return detail::cmd_compare_modes(cfg);
        if (cfg.command == "oracle-check") return detail::cmd_oracle_check(cfg);
        throw InvalidInput("unknown command '" + cfg.command + "'");
    } catch (const ValidationError& e) {
        std::cerr << "bayesctl: validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const InvalidInput& e) {
        std::cerr << "bayesctl: usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "bayesctl: numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "bayesctl: error: " << e.what() << '\n';
        return kNumerical;
    }
}

}  // namespace bayesctl
