#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "pm25/bootstrap.hpp"
#include "pm25/data.hpp"
#include "pm25/diagnostics.hpp"
#include "pm25/forecast.hpp"
#include "pm25/model.hpp"
#include "pm25/report.hpp"
#include "pm25/solver.hpp"

namespace pm25::cli {

enum ExitCode : int { ok = 0, input_error = 1, not_converged = 2 };

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Fully resolved options of one invocation.
struct RunConfig {
    std::string command;

    std::string obs;          ///< observation CSV
    std::string ncep;         ///< six-hourly forecast CSV
    std::string forecast_in;  ///< forecast CSV to validate
    std::string out_dir = ".";
    std::string output;       ///< single-file outputs (forecast, validate, aggregate-ncep)

    std::string family = "with-id";
    double rho = 0.5;
    double alpha = 0.05;
    double screen_alpha = 0.01;
    std::vector<double> start;
    std::size_t max_steps = 50;

    std::size_t reps = 1000;
    std::size_t size = 450;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    bool with_replacement = false;
    std::string correction = "simulation-mean";

    std::string profile;  ///< preset name or kind:r; default depends on the predictor source
    std::string id_algo = "1";
    std::string model = "thesis-2018";
};

inline json to_json(const RunConfig& c) {
    return {{"command", c.command},
            {"obs", c.obs},
            {"ncep", c.ncep},
            {"forecast", c.forecast_in},
            {"out_dir", c.out_dir},
            {"output", c.output},
            {"family", c.family},
            {"rho", c.rho},
            {"alpha", c.alpha},
            {"screen_alpha", c.screen_alpha},
            {"start", c.start},
            {"max_steps", c.max_steps},
            {"reps", c.reps},
            {"size", c.size},
            {"seed", c.seed},
            {"workers", c.workers},
            {"with_replacement", c.with_replacement},
            {"correction", c.correction},
            {"profile", c.profile},
            {"id_algo", c.id_algo},
            {"model", c.model}};
}

// ---------------------------------------------------------------------------
// Helpers

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

inline std::ifstream open_input(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
    std::ifstream in(path);
    if (!in) throw Error(std::string("cannot open ") + what + " '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

inline json provenance(const RunConfig& c, const std::vector<std::string>& inputs) {
    json files = json::array();
    for (const auto& p : inputs)
        if (!p.empty()) files.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    return {{"config", to_json(c)}, {"inputs", files}};
}

inline ModelSpec resolve_family(const RunConfig& c) {
    const auto fam = parse_family(c.family);
    if (!fam) throw ConfigError("unknown model family '" + c.family + "'");
    ModelSpec spec{*fam, 0.0};
    if (*fam == Family::Iterated) spec.rho = c.rho;
    return spec;
}

inline IntervalProfile resolve_profile(const std::string& name) {
    if (auto p = IntervalProfile::preset(name)) return *p;
    const auto colon = name.find(':');
    if (colon != std::string::npos) {
        const auto r = csv::to_double(name.substr(colon + 1));
        const auto kind = name.substr(0, colon);
        if (r && *r >= 0.0 && kind == "standard") return IntervalProfile::standard(*r);
        if (r && *r >= 0.0 && kind == "ncep") return IntervalProfile::ncep(*r);
    }
    throw ConfigError("unknown interval profile '" + name + "' (presets: standard-i1, standard-i2, ncep-i1, ncep-i2; or standard:R, ncep:R)");
}

inline FrozenModel resolve_model(const std::string& name) {
    if (name == "thesis-2018") return FrozenModel::thesis_2018();
    std::ifstream in(name);
    if (!in) throw ConfigError("model must be 'thesis-2018' or a readable coefficients file, got '" + name + "'");
    try {
        return frozen_model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw SchemaError("coefficients file '" + name + "': " + e.what());
    }
}

/// Rejects out-of-range numeric options before anything runs.
inline void validate_config(const RunConfig& c) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(c.alpha > 0.0 && c.alpha < 1.0, "--alpha must lie in (0,1)");
    require(c.screen_alpha > 0.0 && c.screen_alpha < 1.0, "--screen-alpha must lie in (0,1)");
    require(std::isfinite(c.rho) && std::abs(c.rho) < 1.0, "--rho must lie in (-1,1)");
    require(c.max_steps > 0, "--max-steps must be positive");
    require(c.reps > 0, "--reps must be positive");
    require(c.size > 0, "--size must be positive");
    require(c.workers > 0, "--workers must be positive");
    for (double v : c.start) require(std::isfinite(v), "--start values must be finite");
    require(parse_correction_mode(c.correction).has_value(), "--correction must be simulation-mean, classical or box-bias");
    require(c.id_algo == "1" || c.id_algo == "2" || c.id_algo == "observed", "--id-algo must be 1, 2 or observed");
    (void)resolve_family(c);
    if (!c.profile.empty()) (void)resolve_profile(c.profile);
    if (!c.start.empty())
        require(c.start.size() == resolve_family(c).parameters(),
                "--start needs " + std::to_string(resolve_family(c).parameters()) + " values for family " + c.family);
}

struct LoadedFrame {
    std::vector<DailyRecord> records;
    FrameBuild build;
};

inline LoadedFrame load_observations(const std::string& path) {
    auto in = open_input(path, "observation");
    LoadedFrame out;
    out.records = parse_observations(in);
    out.build = build_frame(out.records);
    return out;
}

inline json frame_summary(const FrameBuild& b) {
    json rejected = json::array();
    for (const auto& r : b.rejected) rejected.push_back({{"date", r.date.str()}, {"reason", r.reason}});
    return {{"rows", b.frame.size()}, {"lag_pairs", b.frame.lag_pairs()}, {"dropped", b.dropped()}, {"rejected", rejected}};
}

struct BaselineFit {
    ModelSpec spec;
    FitResult fit;
};

inline BaselineFit fit_baseline(const RunConfig& c, const ModelFrame& frame) {
    BaselineFit b{resolve_family(c), {}};
    const FrameModel model(b.spec, frame);
    SolverOptions opts;
    opts.max_steps = c.max_steps;
    b.fit = gauss_newton(model, c.start.empty() ? b.spec.default_start() : c.start, opts);
    return b;
}

inline void write_residuals_csv(std::ostream& os, const FrameModel& model, const FitResult& fit) {
    os << "date,response,fitted,residual,std_residual\n";
    const auto y = model.response();
    for (std::size_t i = 0; i < fit.residuals.size(); ++i)
        os << model.rows()[i].date.str() << ',' << csv::format(y[i]) << ',' << csv::format(fit.fitted[i]) << ','
           << csv::format(fit.residuals[i]) << ',' << csv::format(fit.std_residuals[i]) << '\n';
}

inline bool has_frozen_form(const ModelSpec& spec) {
    return spec.family == Family::WithId || spec.family == Family::Iterated || spec.family == Family::IteratedFreeRho;
}

// ---------------------------------------------------------------------------
// Commands

/// fit: trace CSV, residual CSV and a diagnostic report in out_dir.
inline int cmd_fit(const RunConfig& c, std::ostream& log) {
    const auto loaded = load_observations(c.obs);
    const auto base = fit_baseline(c, loaded.build.frame);
    const FrameModel model(base.spec, loaded.build.frame);
    const auto& fit = base.fit;
    const std::filesystem::path dir(c.out_dir);

    {
        auto os = open_output(dir / "fit_trace.csv");
        write_trace_csv(os, fit, base.spec.parameter_names());
    }
    {
        auto os = open_output(dir / "residuals.csv");
        write_residuals_csv(os, model, fit);
    }

    json report = provenance(c, {c.obs});
    report["frame"] = frame_summary(loaded.build);
    report["fit"] = to_json(fit, base.spec);
    const auto names = base.spec.parameter_names();
    try {
        report["curvature"] = to_json(bates_curvature(model, fit, c.alpha));
        report["box_bias"] = to_json(box_bias(model, fit), names);
    } catch (const Error& e) {
        report["curvature"] = nullptr;
        report["box_bias"] = nullptr;
        log << "warning: curvature diagnostics unavailable: " << e.what() << '\n';
    }
    try {
        report["residuals"] = to_json(residual_screen(fit, model, c.screen_alpha));
    } catch (const Error& e) {
        report["residuals"] = nullptr;
        log << "warning: residual screen unavailable: " << e.what() << '\n';
    }
    if (has_frozen_form(base.spec)) write_json(dir / "coefficients.json", to_json(FrozenModel::from_lpm_scale(fit.theta_hat)));
    write_json(dir / "fit_report.json", report);

    log << base.spec.name() << ": n=" << fit.n << " rss=" << csv::format(fit.rss) << " steps=" << fit.steps
        << (fit.converged ? " converged" : " NOT converged") << '\n';
    return fit.converged ? ok : not_converged;
}

/// simulate: baseline fit, stratified-subsample replications, corrected estimates.
inline int cmd_simulate(const RunConfig& c, std::ostream& log) {
    const auto loaded = load_observations(c.obs);
    const auto& frame = loaded.build.frame;
    const auto base = fit_baseline(c, frame);
    if (!base.fit.converged) {
        log << "error: baseline fit did not converge (" << base.fit.message << ")\n";
        return not_converged;
    }

    SimulationOptions opts;
    opts.reps = c.reps;
    opts.size = c.size;
    opts.seed = c.seed;
    opts.workers = c.workers;
    opts.with_replacement = c.with_replacement;
    opts.curvature_alpha = c.alpha;
    opts.correction = *parse_correction_mode(c.correction);
    opts.solver.max_steps = c.max_steps;
    const auto summary = run_simulation(base.spec, frame, base.fit, opts);
    const auto corrected = apply_correction(base.fit, summary, base.spec, frame, c.alpha);

    const auto names = base.spec.parameter_names();
    const std::filesystem::path dir(c.out_dir);
    {
        auto os = open_output(dir / "replications.csv");
        os << "rep,converged,steps";
        for (const auto& nm : names) os << ',' << nm;
        os << ",rho_k_n,rho_k_p,curvature_pass,ks_d,ks_p,identical_residuals,error\n";
        for (const auto& r : summary.reps) {
            os << r.rep << ',' << (r.converged ? 1 : 0) << ',' << r.steps;
            for (std::size_t j = 0; j < names.size(); ++j) os << ',' << (j < r.theta.size() ? csv::format(r.theta[j]) : "");
            os << ',' << csv::format(r.rho_k_n) << ',' << csv::format(r.rho_k_p) << ',' << (r.curvature_pass ? 1 : 0) << ','
               << csv::format(r.ks_d) << ',' << csv::format(r.ks_p) << ',' << r.identical_residuals << ',' << r.error
               << '\n';
        }
    }
    json report = provenance(c, {c.obs});
    report["frame"] = frame_summary(loaded.build);
    report["baseline"] = to_json(base.fit, base.spec);
    report["summary"] = to_json(summary, names);
    report["corrected"] = to_json(corrected);
    if (has_frozen_form(base.spec))
        write_json(dir / "coefficients.json", to_json(FrozenModel::from_lpm_scale(summary.theta_corrected)));
    write_json(dir / "simulate_report.json", report);

    log << "replications=" << summary.replications << " converged=" << summary.converged_count
        << " ks_pass=" << summary.ks_pass_count << (summary.accepted ? " accepted" : " NOT accepted") << '\n';
    return ok;
}

/// aggregate-ncep: six-hourly tuples to daily predictor rows.
inline int cmd_aggregate_ncep(const RunConfig& c, std::ostream& log) {
    auto in = open_input(c.ncep, "forecast table");
    std::vector<PredictorRow> rows;
    for (const auto& day : parse_ncep(in)) rows.push_back(aggregate_ncep(day));
    if (c.output.empty() || c.output == "-") {
        write_predictors_csv(std::cout, rows);
    } else {
        auto os = open_output(c.output);
        write_predictors_csv(os, rows);
    }
    log << "aggregated " << rows.size() << " days\n";
    return ok;
}

struct ForecastRow {
    Date date;
    double pm_hat = 0.0;
    std::string id_source;
    int id = 0;
    IntervalForecast interval;
};

inline void write_forecast_csv(std::ostream& os, const std::vector<ForecastRow>& rows) {
    os << "date,pm_hat,id_source,arm,lo,hi,flags\n";
    for (const auto& r : rows) {
        std::string flags;
        for (const auto& f : r.interval.flags) flags += (flags.empty() ? "" : ";") + f;
        os << r.date.str() << ',' << csv::format(r.pm_hat) << ',' << r.id_source << ',' << to_string(r.interval.arm) << ','
           << csv::format(r.interval.lo) << ',' << csv::format(r.interval.hi) << ',' << flags << '\n';
    }
}

/// forecast: daily pm, interval and hazard flags from forecast or observed predictors.
inline int cmd_forecast(const RunConfig& c, std::ostream& log) {
    const FrozenModel model = resolve_model(c.model);
    const IntervalProfile profile = resolve_profile(c.profile.empty() ? (c.ncep.empty() ? "standard-i1" : "ncep-i1") : c.profile);

    auto obs_in = open_input(c.obs, "observation");
    std::map<Date, DailyRecord> obs;
    for (auto& r : parse_observations(obs_in)) obs[r.date] = r;

    struct DayInput {
        Date date;
        std::optional<Predictors> x;
        std::string missing;
    };
    std::vector<DayInput> days;
    if (!c.ncep.empty()) {
        auto in = open_input(c.ncep, "forecast table");
        for (const auto& day : parse_ncep(in)) {
            const auto p = aggregate_ncep(day);
            DayInput d{p.date, Predictors{p.trg, p.w, p.t, p.pc, 0.0}, {}};
            const auto it = obs.find(p.date);
            if (it == obs.end() || !it->second.ep) {
                d.x.reset();
                d.missing = "ep";
            } else {
                d.x->ep = *it->second.ep;
            }
            days.push_back(d);
        }
    } else {
        for (const auto& [date, r] : obs) {
            DayInput d{date, std::nullopt, {}};
            if (!r.t || !r.tmax || !r.tmin || !r.pc || !r.w || !r.ep) {
                d.missing = !r.ep ? "ep" : "meteorology";
            } else {
                d.x = Predictors{*r.tmax - *r.tmin, *r.w, *r.t, *r.pc, *r.ep};
            }
            days.push_back(d);
        }
    }

    std::vector<ForecastRow> rows;
    json skipped = json::array();
    auto skip = [&](const Date& d, const std::string& why) {
        log << "warning: skipping " << d.str() << ": " << why << '\n';
        skipped.push_back({{"date", d.str()}, {"reason", why}});
    };
    for (const auto& d : days) {
        if (!d.x) {
            skip(d.date, "missing " + d.missing);
            continue;
        }
        ForecastRow row;
        row.date = d.date;
        try {
            if (c.id_algo == "observed") {
                const auto it = obs.find(d.date);
                if (it == obs.end() || !it->second.pm || !(*it->second.pm > 0.0)) {
                    skip(d.date, "no observed concentration for id");
                    continue;
                }
                row.id = id_from_lpm(lpm_from_pm(*it->second.pm));
                row.id_source = "observed";
            } else if (c.id_algo == "1") {
                const auto it = obs.find(d.date.plus_days(-1));
                if (it != obs.end() && it->second.pm && *it->second.pm > 0.0) {
                    row.id = predict_id_algo1(*it->second.pm);
                    row.id_source = "algo1";
                } else {
                    row.id = predict_id_algo2(model, *d.x);
                    row.id_source = "algo2-fallback";
                }
            } else {
                row.id = predict_id_algo2(model, *d.x);
                row.id_source = "algo2";
            }
            row.pm_hat = predict_pm(model, *d.x, row.id);
            row.interval = interval(row.pm_hat, profile);
            row.interval.flags = hazard_flags(*d.x, row.pm_hat);
        } catch (const SingularityError& e) {
            skip(d.date, e.what());
            continue;
        }
        rows.push_back(row);
    }

    const std::string out_path = c.output.empty() ? (std::filesystem::path(c.out_dir) / "forecast.csv").string() : c.output;
    {
        auto os = open_output(out_path);
        write_forecast_csv(os, rows);
    }
    json meta = provenance(c, {c.obs, c.ncep});
    meta["model"] = to_json(model);
    meta["profile"] = {{"name", profile.name}, {"r", profile.r}, {"d_lo", profile.d_lo}, {"d_hi", profile.d_hi}};
    meta["rows"] = rows.size();
    meta["skipped"] = skipped;
    write_json(out_path + ".meta.json", meta);
    log << "forecast " << rows.size() << " days, skipped " << skipped.size() << '\n';
    return ok;
}

struct ForecastCsvRow {
    Date date;
    double pm_hat = 0.0;
    std::string id_source;
    IntervalForecast interval;
};

inline std::vector<ForecastCsvRow> parse_forecast_csv(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line, true)) throw SchemaError("forecast CSV: missing header row");
    const auto idx = detail::header_index(csv::split(line));
    const std::array<const char*, 6> names{"date", "pm_hat", "id_source", "arm", "lo", "hi"};
    std::array<std::size_t, 6> col{};
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto it = idx.find(names[i]);
        if (it == idx.end()) throw SchemaError(std::string("forecast CSV: missing required column '") + names[i] + "'");
        col[i] = it->second;
    }
    std::vector<ForecastCsvRow> out;
    std::size_t row = 0;
    while (csv::next_line(in, line)) {
        ++row;
        const auto cells = csv::split(line);
        auto cell = [&](std::size_t i) -> const std::string& {
            if (col[i] >= cells.size()) throw ParseError(row, names[i], "row is too short");
            return cells[col[i]];
        };
        auto number = [&](std::size_t i) {
            const auto v = csv::to_double(cell(i));
            if (cell(i) == "inf") return std::numeric_limits<double>::infinity();
            if (!v) throw ParseError(row, names[i], "not a number: '" + cell(i) + "'");
            return *v;
        };
        ForecastCsvRow r;
        const auto date = Date::parse(cell(0));
        if (!date) throw ParseError(row, "date", "not an ISO date: '" + cell(0) + "'");
        r.date = *date;
        r.pm_hat = number(1);
        r.id_source = cell(2);
        const auto arm = parse_arm(cell(3));
        if (!arm) throw ParseError(row, "arm", "expected low, band or high");
        r.interval.arm = *arm;
        r.interval.lo = number(4);
        r.interval.hi = number(5);
        r.interval.pm_hat = r.pm_hat;
        out.push_back(r);
    }
    return out;
}

/// validate: inclusion rates of a forecast CSV against observations.
inline int cmd_validate(const RunConfig& c, std::ostream& log) {
    auto fin = open_input(c.forecast_in, "forecast CSV");
    const auto forecasts = parse_forecast_csv(fin);
    auto oin = open_input(c.obs, "observation");
    std::map<Date, double> observed;
    for (const auto& r : parse_observations(oin))
        if (r.pm) observed[r.date] = *r.pm;

    std::vector<std::string> unmatched;
    std::vector<double> pm;
    for (const auto& f : forecasts) {
        const auto it = observed.find(f.date);
        if (it == observed.end())
            unmatched.push_back(f.date.str());
        else
            pm.push_back(it->second);
    }
    if (!unmatched.empty()) {
        log << "error: no observation for " << unmatched.size() << " forecast date(s):";
        for (const auto& d : unmatched) log << ' ' << d;
        log << '\n';
        return input_error;
    }
    if (forecasts.empty()) throw DataError("validate: forecast CSV has no rows");

    std::vector<IntervalProfile> profiles = IntervalProfile::presets();
    if (!c.profile.empty() && !IntervalProfile::preset(c.profile)) profiles.push_back(resolve_profile(c.profile));

    auto evaluate = [&](const std::vector<std::size_t>& subset) {
        json out = json::object();
        std::vector<IntervalForecast> own;
        std::vector<double> obs_sub;
        for (std::size_t i : subset) {
            own.push_back(forecasts[i].interval);
            obs_sub.push_back(pm[i]);
        }
        out["as_forecast"] = to_json(coverage(own, obs_sub));
        for (const auto& p : profiles) {
            std::vector<IntervalForecast> fc;
            for (std::size_t i : subset) fc.push_back(interval(forecasts[i].pm_hat, p));
            out[p.name] = to_json(coverage(fc, obs_sub));
        }
        return out;
    };

    std::vector<std::size_t> all(forecasts.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < forecasts.size(); ++i) by_source[forecasts[i].id_source].push_back(i);

    json report = provenance(c, {c.forecast_in, c.obs});
    report["n"] = forecasts.size();
    report["profiles"] = evaluate(all);
    json per_source = json::object();
    for (const auto& [src, idx] : by_source) per_source[src] = evaluate(idx);
    report["by_id_source"] = per_source;

    if (c.output.empty() || c.output == "-")
        std::cout << report.dump(2) << '\n';
    else
        write_json(c.output, report);
    for (const auto& p : profiles)
        log << p.name << ": " << csv::format(report["profiles"][p.name]["rate"].get<double>()) << '\n';
    return ok;
}

/// Dispatches one command; library and I/O errors map to exit code 1.
inline int run(const RunConfig& c, std::ostream& log) {
    try {
        validate_config(c);
        if (c.command == "fit") return cmd_fit(c, log);
        if (c.command == "simulate") return cmd_simulate(c, log);
        if (c.command == "forecast") return cmd_forecast(c, log);
        if (c.command == "validate") return cmd_validate(c, log);
        if (c.command == "aggregate-ncep") return cmd_aggregate_ncep(c, log);
        throw ConfigError("unknown command '" + c.command + "'");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return input_error;
    }
}

}  // namespace pm25::cli
