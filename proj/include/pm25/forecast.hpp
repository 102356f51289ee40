#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pm25/error.hpp"

namespace pm25 {

/// Daily predictors of the single-value model.
struct Predictors {
    double trg = 0.0;
    double w = 0.0;
    double t = 0.0;
    double pc = 0.0;
    double ep = 0.0;
};

/// pm = exp(a exp(-b/trg) + c_w w + c_t t + c_pc pc + c_ep ep + c_id id).
struct FrozenModel {
    double a = 0.0;
    double b = 0.0;
    double c_w = 0.0;
    double c_t = 0.0;
    double c_pc = 0.0;
    double c_ep = 0.0;
    double c_id = 0.0;

    /// Coefficients of the bias-corrected 2014-2016 fit.
    static FrozenModel thesis_2018() { return {4.567223, 0.34431, -0.002258, -0.000109, -0.000912, -0.005976, 0.736975}; }

    /// From lpm-scale parameters (a, b, w, t, pc, ep, id). Everything outside
    /// exp(-b/trg) scales by 1/10; b does not.
    static FrozenModel from_lpm_scale(std::span<const double> theta) {
        if (theta.size() < 7) throw DomainError("frozen model: need 7 lpm-scale parameters");
        return {theta[0] / 10.0, theta[1], theta[2] / 10.0, theta[3] / 10.0, theta[4] / 10.0, theta[5] / 10.0,
                theta[6] / 10.0};
    }

    bool operator==(const FrozenModel&) const = default;
};

inline double id_low_threshold_pm() { return std::exp(3.5); }
inline double id_high_threshold_pm() { return std::exp(5.0); }

namespace detail {

inline double log_pm_without_id(const FrozenModel& m, const Predictors& x) {
    if (x.trg == 0.0) throw SingularityError("temperature range is zero");
    return m.a * std::exp(-m.b / x.trg) + m.c_w * x.w + m.c_t * x.t + m.c_pc * x.pc + m.c_ep * x.ep;
}

inline int id_from_pm(double pm) {
    if (pm <= id_low_threshold_pm()) return -1;
    if (pm <= id_high_threshold_pm()) return 0;
    return 1;
}

}  // namespace detail

inline double predict_pm(const FrozenModel& m, const Predictors& x, int id) {
    if (id < -1 || id > 1) throw DomainError("id must be -1, 0 or 1");
    return std::exp(detail::log_pm_without_id(m, x) + m.c_id * id);
}

/// id from the previous day's observed concentration.
inline int predict_id_algo1(double prev_pm) {
    if (!(prev_pm > 0.0)) throw DomainError("previous-day concentration must be positive");
    return detail::id_from_pm(prev_pm);
}

inline int predict_id_algo1(std::optional<double> prev_pm) {
    if (!prev_pm) throw UnavailableError("previous-day observation missing");
    return predict_id_algo1(*prev_pm);
}

/// id from the model evaluated without its id term.
inline int predict_id_algo2(const FrozenModel& m, const Predictors& x) {
    return detail::id_from_pm(std::exp(detail::log_pm_without_id(m, x)));
}

// ---------------------------------------------------------------------------
// Intervals

enum class ProfileKind { Standard, Ncep };

struct IntervalProfile {
    std::string name;
    ProfileKind kind = ProfileKind::Standard;
    double r = 20.0;
    double d_lo = 20.0;
    double d_hi = 30.0;

    static constexpr double low_cut = 35.0;
    static constexpr double high_cut = 150.0;

    /// Band [pm - r, pm + 1.5r].
    static IntervalProfile standard(double r, std::string name = {}) {
        check_r(r);
        return {name.empty() ? "standard(r=" + trimmed(r) + ")" : std::move(name), ProfileKind::Standard, r, r, 1.5 * r};
    }
    /// Band [pm - 1.5r, pm + r].
    static IntervalProfile ncep(double r, std::string name = {}) {
        check_r(r);
        return {name.empty() ? "ncep(r=" + trimmed(r) + ")" : std::move(name), ProfileKind::Ncep, r, 1.5 * r, r};
    }

    static IntervalProfile standard_i1() { return standard(20, "standard-i1"); }
    static IntervalProfile standard_i2() { return standard(30, "standard-i2"); }
    static IntervalProfile ncep_i1() { return ncep(20, "ncep-i1"); }
    static IntervalProfile ncep_i2() { return ncep(30, "ncep-i2"); }

    static std::vector<IntervalProfile> presets() { return {standard_i1(), standard_i2(), ncep_i1(), ncep_i2()}; }

    static std::optional<IntervalProfile> preset(const std::string& name) {
        for (auto& p : presets())
            if (p.name == name) return p;
        return std::nullopt;
    }

private:
    static void check_r(double r) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("interval half-width must be finite and nonnegative");
    }
    static std::string trimmed(double r) {
        std::string s = std::to_string(r);
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }
};

enum class Arm { Low, Band, High };

inline std::string to_string(Arm a) {
    switch (a) {
        case Arm::Low: return "low";
        case Arm::Band: return "band";
        case Arm::High: return "high";
    }
    return "?";
}

inline std::optional<Arm> parse_arm(const std::string& s) {
    if (s == "low") return Arm::Low;
    if (s == "band") return Arm::Band;
    if (s == "high") return Arm::High;
    return std::nullopt;
}

struct IntervalForecast {
    Arm arm = Arm::Band;
    double lo = 0.0;
    double hi = 0.0;  ///< +inf for High
    double pm_hat = 0.0;
    std::vector<std::string> flags;

    bool covers(double pm) const {
        switch (arm) {
            case Arm::Low: return pm < IntervalProfile::low_cut;
            case Arm::Band: return lo <= pm && pm <= hi;
            case Arm::High: return pm > IntervalProfile::high_cut;
        }
        return false;
    }
};

/// Low below 35, High above 150, otherwise the profile's band (150 itself is Band).
inline IntervalForecast interval(double pm_hat, const IntervalProfile& profile) {
    if (!(pm_hat > 0.0) || std::isnan(pm_hat)) throw DomainError("forecast concentration must be positive");
    IntervalForecast f;
    f.pm_hat = pm_hat;
    if (pm_hat < IntervalProfile::low_cut) {
        f.arm = Arm::Low;
        f.lo = 0.0;
        f.hi = IntervalProfile::low_cut;
    } else if (pm_hat > IntervalProfile::high_cut) {
        f.arm = Arm::High;
        f.lo = IntervalProfile::high_cut;
        f.hi = std::numeric_limits<double>::infinity();
    } else {
        f.arm = Arm::Band;
        f.lo = std::max(0.0, pm_hat - profile.d_lo);
        f.hi = pm_hat + profile.d_hi;
    }
    return f;
}

struct ArmCoverage {
    std::size_t total = 0;
    std::size_t covered = 0;
};

struct Coverage {
    ArmCoverage low, band, high;

    std::size_t total() const { return low.total + band.total + high.total; }
    std::size_t covered() const { return low.covered + band.covered + high.covered; }
    double rate() const {
        if (total() == 0) throw DegreesOfFreedomError("inclusion rate of an empty series is undefined");
        return static_cast<double>(covered()) / static_cast<double>(total());
    }
};

inline Coverage coverage(std::span<const IntervalForecast> forecasts, std::span<const double> observed) {
    if (forecasts.size() != observed.size()) throw DomainError("inclusion rate: series lengths differ");
    Coverage c;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        ArmCoverage& arm = forecasts[i].arm == Arm::Low ? c.low : forecasts[i].arm == Arm::Band ? c.band : c.high;
        ++arm.total;
        if (forecasts[i].covers(observed[i])) ++arm.covered;
    }
    return c;
}

inline double inclusion_rate(std::span<const IntervalForecast> forecasts, std::span<const double> observed) {
    return coverage(forecasts, observed).rate();
}

// ---------------------------------------------------------------------------
// Extrapolation hazards

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Observed predictor ranges of the 2014-2016 building data.
struct BuildRanges {
    Range t{-38, 243};
    Range trg{9, 205};
    Range w{16, 91};
    Range pc{0, 689};
    Range ep{0, 64};
};

inline constexpr double unreliable_pm = 300.0;

/// EXTRAPOLATION(var) for each predictor outside its build range; a negative
/// trg is reported as NEGATIVE_TRG instead, plus UNRELIABLE when pm_hat > 300.
inline std::vector<std::string> hazard_flags(const Predictors& x, double pm_hat, const BuildRanges& ranges = {}) {
    std::vector<std::string> flags;
    if (!ranges.t.contains(x.t)) flags.push_back("EXTRAPOLATION(t)");
    if (x.trg >= 0.0 && !ranges.trg.contains(x.trg)) flags.push_back("EXTRAPOLATION(trg)");
    if (!ranges.w.contains(x.w)) flags.push_back("EXTRAPOLATION(w)");
    if (!ranges.pc.contains(x.pc)) flags.push_back("EXTRAPOLATION(pc)");
    if (!ranges.ep.contains(x.ep)) flags.push_back("EXTRAPOLATION(ep)");
    if (x.trg < 0.0) {
        flags.push_back("NEGATIVE_TRG");
        if (pm_hat > unreliable_pm) flags.push_back("UNRELIABLE");
    }
    return flags;
}

}  // namespace pm25
