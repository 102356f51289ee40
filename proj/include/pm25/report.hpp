#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "pm25/bootstrap.hpp"
#include "pm25/data.hpp"
#include "pm25/diagnostics.hpp"
#include "pm25/forecast.hpp"
#include "pm25/model.hpp"
#include "pm25/solver.hpp"

namespace pm25 {

using json = nlohmann::ordered_json;

namespace detail {

/// JSON has no infinities or NaN; they become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json named(const std::vector<std::string>& names, const std::vector<double>& values) {
    json out = json::object();
    for (std::size_t i = 0; i < values.size(); ++i) out[i < names.size() ? names[i] : std::to_string(i)] = number(values[i]);
    return out;
}

}  // namespace detail

inline json to_json(const FitResult& fit, const ModelSpec& spec) {
    const auto names = spec.parameter_names();
    json steps = json::array();
    for (const auto& s : fit.trace) steps.push_back({{"step", s.step}, {"theta", s.theta}, {"rss", detail::number(s.rss)}});
    json out = {{"family", spec.name()}};
    if (spec.family == Family::Iterated) out["rho"] = spec.rho;
    out["parameters"] = names;
    out["theta_hat"] = detail::named(names, fit.theta_hat);
    out["rss"] = detail::number(fit.rss);
    out["sigma_hat"] = detail::number(fit.sigma_hat);
    out["n"] = fit.n;
    out["q"] = fit.q;
    out["converged"] = fit.converged;
    out["steps"] = fit.steps;
    out["message"] = fit.message;
    out["trace"] = steps;
    return out;
}

inline json to_json(const CurvatureReport& c) {
    return {{"rho_k_n", detail::number(c.rho_k_n)},
            {"rho_k_p", detail::number(c.rho_k_p)},
            {"critical", detail::number(c.critical)},
            {"thresholds", {c.thresholds[0], c.thresholds[1], c.thresholds[2]}},
            {"alpha", c.alpha},
            {"n", c.n},
            {"q", c.q},
            {"planar_ok", c.planar_ok},
            {"uniform_coordinates_ok", c.uniform_coordinates_ok}};
}

inline json to_json(const BiasReport& b, const std::vector<std::string>& names) {
    json pct = json::object();
    for (std::size_t i = 0; i < b.percent_bias.size(); ++i)
        pct[names[i]] = b.percent_bias[i] ? detail::number(*b.percent_bias[i]) : json(nullptr);
    return {{"bias", detail::named(names, b.bias)}, {"percent_bias", pct}};
}

inline json to_json(const ResidualDiagnostics& d) {
    json sp = json::array();
    for (const auto& r : d.spearman) {
        json row = {{"against", r.against}, {"defined", r.defined}};
        row["rho"] = r.defined ? detail::number(r.rho) : json(nullptr);
        row["p"] = r.defined ? detail::number(r.p) : json(nullptr);
        sp.push_back(row);
    }
    json lag = {{"pairs", d.lag1_pairs}, {"defined", d.lag1_defined}};
    lag["r"] = d.lag1_defined ? detail::number(d.lag1.r) : json(nullptr);
    lag["p"] = d.lag1_defined ? detail::number(d.lag1.p) : json(nullptr);
    return {{"alpha", d.alpha},
            {"spearman_abs_std_residual", sp},
            {"lag1_pearson", lag},
            {"ks_normality", {{"d", detail::number(d.ks_normality.d)}, {"p", detail::number(d.ks_normality.p)}}},
            {"heteroscedastic", d.heteroscedastic},
            {"autocorrelated", d.autocorrelated}};
}

inline json to_json(const BootstrapSummary& s, const std::vector<std::string>& names) {
    return {{"replications", s.replications},
            {"converged", s.converged_count},
            {"curvature_pass", s.curvature_pass_count},
            {"ks_pass", s.ks_pass_count},
            {"ks_strong", s.ks_strong_count},
            {"identical_residual_violations", s.identical_residual_violations},
            {"steps", {{"mean", s.mean_steps}, {"min", s.min_steps}, {"max", s.max_steps}}},
            {"accepted", s.accepted},
            {"theta_hat", detail::named(names, s.theta_hat)},
            {"mean_theta", detail::named(names, s.mean_theta)},
            {"bias", detail::named(names, s.bias)},
            {"std", detail::named(names, s.std)},
            {"mse", detail::named(names, s.mse)},
            {"box_bias", detail::named(names, s.box_bias)},
            {"correction", to_string(s.correction)},
            {"theta_corrected", detail::named(names, s.theta_corrected)}};
}

inline json to_json(const CorrectedFit& c) {
    return {{"rss_before", detail::number(c.rss_before)},
            {"rss_after", detail::number(c.rss_after)},
            {"level_rss_before", detail::number(c.level_rss_before)},
            {"level_rss_after", detail::number(c.level_rss_after)},
            {"level_regression_ss_before", detail::number(c.level_regression_ss_before)},
            {"level_regression_ss_after", detail::number(c.level_regression_ss_after)},
            {"curvature", to_json(c.curvature)}};
}

inline json to_json(const FrozenModel& m) {
    return {{"a", m.a}, {"b", m.b}, {"c_w", m.c_w}, {"c_t", m.c_t}, {"c_pc", m.c_pc}, {"c_ep", m.c_ep}, {"c_id", m.c_id}};
}

inline FrozenModel frozen_model_from_json(const json& j) {
    FrozenModel m;
    auto get = [&](const char* key, double& dst) {
        if (!j.contains(key) || !j[key].is_number())
            throw SchemaError(std::string("coefficients: missing numeric field '") + key + "'");
        dst = j[key].get<double>();
    };
    get("a", m.a);
    get("b", m.b);
    get("c_w", m.c_w);
    get("c_t", m.c_t);
    get("c_pc", m.c_pc);
    get("c_ep", m.c_ep);
    get("c_id", m.c_id);
    return m;
}

inline json to_json(const Coverage& c) {
    auto arm = [](const ArmCoverage& a) { return json{{"total", a.total}, {"covered", a.covered}}; };
    json out = {{"total", c.total()}, {"covered", c.covered()}};
    out["rate"] = c.total() ? json(c.rate()) : json(nullptr);
    out["arms"] = {{"low", arm(c.low)}, {"band", arm(c.band)}, {"high", arm(c.high)}};
    return out;
}

}  // namespace pm25
