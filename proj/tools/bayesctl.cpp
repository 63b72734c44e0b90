#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bayesctl/cli.hpp"

int main(int argc, char** argv) {
    using namespace bayesctl;

    CLI::App app{"Bayes control of linear systems with uniform disturbances and Pareto priors"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string mode = "derived";
    double theta = 0.0;

    auto common = [&](CLI::App* sub, bool scenario_required) {
        auto* opt = sub->add_option("--scenario", cfg.scenario_path, "Scenario JSON file");
        if (scenario_required) opt->required();
        sub->add_option("--mode", mode, "Predictive constants: derived (default) or printed")
            ->check(CLI::IsMember({"derived", "printed"}));
        sub->add_option("--theta", theta, "Regularization strength for rank-deficient gains");
        sub->add_option("--out", cfg.out, "Output CSV path ('-' for stdout)");
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    common(validate, true);

    auto* coeffs = app.add_subcommand("coeffs", "Per-stage risk coefficients and gain matrices");
    common(coeffs, true);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo risk of the Bayes policy");
    common(simulate, true);
    simulate->add_option("--reps", cfg.replications, "Replications");
    simulate->add_option("--seed", cfg.seed, "Base seed");
    simulate->add_option("--workers", cfg.workers, "Worker threads (result is independent of this)");
    simulate->add_option("--trajectories-out", cfg.trajectories_out, "Optional per-step trace CSV");
    simulate->add_option("--trajectories", cfg.trajectories, "Number of traced replications");

    auto* compare = app.add_subcommand("compare-modes", "Printed vs derived vs quadrature constants");
    common(compare, false);
    compare->add_option("--beta", cfg.betas, "Shape values (repeatable)");

    auto* oracle = app.add_subcommand("oracle-check", "Check constants and controls against oracles");
    common(oracle, false);
    oracle->add_option("--beta", cfg.betas, "Shape values (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    cfg.command = app.get_subcommands().front()->get_name();
    cfg.mode = parse_mode(mode);
    if (app.get_subcommands().front()->count("--theta") > 0) cfg.theta = theta;
    return run_experiment(cfg);
}
