#include <iostream>

#include <CLI11.hpp>

#include "pm25/cli.hpp"

int main(int argc, char** argv) {
    using pm25::cli::RunConfig;
    CLI::App app{"PM2.5 nonlinear regression: fit, simulate, forecast, validate"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto fit_options = [&](CLI::App* sub) {
        sub->add_option("--family", cfg.family, "initial | with-id | iterated | iterated-free-rho | linear")
            ->capture_default_str();
        sub->add_option("--rho", cfg.rho, "differencing coefficient of the iterated family")->capture_default_str();
        sub->add_option("--alpha", cfg.alpha, "significance level of the curvature critical value")->capture_default_str();
        sub->add_option("--start", cfg.start, "starting parameter vector")->expected(1, -1);
        sub->add_option("--max-steps", cfg.max_steps, "Gauss-Newton step limit")->capture_default_str();
        sub->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    };

    auto* fit = app.add_subcommand("fit", "fit a model family and write diagnostics");
    fit->add_option("obs", cfg.obs, "observation CSV")->required();
    fit_options(fit);
    fit->add_option("--screen-alpha", cfg.screen_alpha, "level of the residual screens")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "stratified-subsample bias simulation");
    sim->add_option("obs", cfg.obs, "observation CSV")->required();
    fit_options(sim);
    sim->add_option("--reps", cfg.reps, "replications")->capture_default_str();
    sim->add_option("--size", cfg.size, "rows per subsample")->capture_default_str();
    sim->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sim->add_option("--workers", cfg.workers, "worker threads")->capture_default_str();
    sim->add_flag("--with-replacement", cfg.with_replacement, "draw with replacement within strata");
    sim->add_option("--correction", cfg.correction, "simulation-mean | classical | box-bias")->capture_default_str();

    auto* fc = app.add_subcommand("forecast", "daily concentration forecasts with intervals");
    fc->add_option("--obs", cfg.obs, "observation CSV (ep, previous-day pm, predictors)")->required();
    fc->add_option("--ncep", cfg.ncep, "six-hourly forecast CSV; predictors come from --obs when absent");
    fc->add_option("--id-algo", cfg.id_algo, "1 | 2 | observed")->capture_default_str();
    fc->add_option("--profile", cfg.profile, "standard-i1 | standard-i2 | ncep-i1 | ncep-i2 | standard:R | ncep:R");
    fc->add_option("--model", cfg.model, "thesis-2018 or a coefficients JSON file")->capture_default_str();
    fc->add_option("-o,--output", cfg.output, "forecast CSV path");
    fc->add_option("--out", cfg.out_dir, "output directory when --output is not given")->capture_default_str();

    auto* val = app.add_subcommand("validate", "inclusion rates of a forecast CSV");
    val->add_option("forecast", cfg.forecast_in, "forecast CSV")->required();
    val->add_option("--obs", cfg.obs, "observation CSV")->required();
    val->add_option("--profile", cfg.profile, "extra profile to evaluate besides the presets");
    val->add_option("-o,--output", cfg.output, "report path (stdout when omitted)");

    auto* agg = app.add_subcommand("aggregate-ncep", "aggregate six-hourly forecasts to daily predictors");
    agg->add_option("ncep", cfg.ncep, "six-hourly forecast CSV")->required();
    agg->add_option("-o,--output", cfg.output, "predictor CSV path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : pm25::cli::input_error;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    return pm25::cli::run(cfg, std::cerr);
}
