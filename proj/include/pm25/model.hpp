#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pm25/data.hpp"
#include "pm25/error.hpp"
#include "pm25/numerics/matrix.hpp"

namespace pm25 {

/// Anything the solver and the diagnostics can work with: a fixed response
/// vector and an expectation function with analytic first and second derivatives.
template <class M>
concept RegressionModel = requires(const M& m, std::span<const double> theta) {
    { m.observations() } -> std::convertible_to<std::size_t>;
    { m.parameters() } -> std::convertible_to<std::size_t>;
    { m.response() } -> std::convertible_to<std::span<const double>>;
    { m.eval(theta) } -> std::same_as<std::vector<double>>;
    { m.jacobian(theta) } -> std::same_as<Matrix>;
    { m.hessian(theta) } -> std::same_as<Cube>;
};

enum class Family {
    Initial,          ///< a exp(-b/trg) + c_w w + c_t t + c_pc pc + c_ep ep
    WithId,           ///< Initial + c_id id
    Iterated,         ///< WithId with every term differenced by a fixed rho
    IteratedFreeRho,  ///< Iterated with rho as the eighth parameter
    Linear,           ///< theta1 + theta2 trg; no curvature, used as a reference
};

struct ModelSpec {
    Family family = Family::WithId;
    double rho = 0.0;  ///< differencing coefficient for Family::Iterated

    static ModelSpec initial() { return {Family::Initial, 0.0}; }
    static ModelSpec with_id() { return {Family::WithId, 0.0}; }
    static ModelSpec iterated(double rho) { return {Family::Iterated, rho}; }
    static ModelSpec iterated_free_rho() { return {Family::IteratedFreeRho, 0.0}; }
    static ModelSpec linear() { return {Family::Linear, 0.0}; }

    std::size_t parameters() const {
        switch (family) {
            case Family::Initial: return 6;
            case Family::WithId: return 7;
            case Family::Iterated: return 7;
            case Family::IteratedFreeRho: return 8;
            case Family::Linear: return 2;
        }
        return 0;
    }

    bool uses_lag() const { return family == Family::Iterated || family == Family::IteratedFreeRho; }
    bool uses_id() const { return family != Family::Initial && family != Family::Linear; }

    std::string name() const {
        switch (family) {
            case Family::Initial: return "initial";
            case Family::WithId: return "with-id";
            case Family::Iterated: return "iterated";
            case Family::IteratedFreeRho: return "iterated-free-rho";
            case Family::Linear: return "linear";
        }
        return "?";
    }

    std::vector<std::string> parameter_names() const {
        if (family == Family::Linear) return {"intercept", "trg"};
        std::vector<std::string> names{"a", "b", "w", "t", "pc", "ep"};
        if (uses_id()) names.push_back("id");
        if (family == Family::IteratedFreeRho) names.push_back("rho");
        return names;
    }

    /// Pre-iteration start: a = 40, b = 1, linear terms 0, id = 1, rho = 0.5.
    std::vector<double> default_start() const {
        switch (family) {
            case Family::Linear: return {0.0, 0.0};
            case Family::Initial: return {40, 1, 0, 0, 0, 0};
            case Family::WithId:
            case Family::Iterated: return {40, 1, 0, 0, 0, 0, 1};
            case Family::IteratedFreeRho: return {40, 1, 0, 0, 0, 0, 1, 0.5};
        }
        return {};
    }
};

inline std::optional<Family> parse_family(const std::string& s) {
    if (s == "initial") return Family::Initial;
    if (s == "with-id") return Family::WithId;
    if (s == "iterated") return Family::Iterated;
    if (s == "iterated-free-rho") return Family::IteratedFreeRho;
    if (s == "linear") return Family::Linear;
    return std::nullopt;
}

/// A model family bound to the rows of a frame it applies to.
class FrameModel {
public:
    FrameModel(ModelSpec spec, const ModelFrame& frame) : spec_(spec) {
        rows_.reserve(frame.size());
        for (const auto& r : frame.rows)
            if (!spec_.uses_lag() || r.lag) rows_.push_back(r);
        response_.reserve(rows_.size());
        for (const auto& r : rows_)
            response_.push_back(spec_.family == Family::Iterated ? r.lpm - spec_.rho * r.lag->lpm : r.lpm);
    }

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t observations() const noexcept { return rows_.size(); }
    std::size_t parameters() const noexcept { return spec_.parameters(); }
    std::span<const double> response() const noexcept { return response_; }

    /// Frame rows backing each observation, in order.
    const std::vector<FrameRow>& rows() const noexcept { return rows_; }

    std::vector<double> eval(std::span<const double> theta) const {
        check_theta(theta);
        std::vector<double> f(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) f[i] = row_value(rows_[i], theta);
        return f;
    }

    Matrix jacobian(std::span<const double> theta) const {
        check_theta(theta);
        const std::size_t q = parameters();
        Matrix v(rows_.size(), q);
        for (std::size_t i = 0; i < rows_.size(); ++i) row_gradient(rows_[i], theta, v.row(i));
        return v;
    }

    Cube hessian(std::span<const double> theta) const {
        check_theta(theta);
        Cube h(rows_.size(), parameters(), parameters());
        for (std::size_t i = 0; i < rows_.size(); ++i) row_hessian(rows_[i], theta, h, i);
        return h;
    }

    /// Regressors screened against |standardized residual|: current-day values.
    std::vector<std::pair<std::string, std::vector<double>>> screen_regressors() const {
        std::vector<std::pair<std::string, std::vector<double>>> out;
        auto column = [&](const char* name, auto get) {
            std::vector<double> v;
            v.reserve(rows_.size());
            for (const auto& r : rows_) v.push_back(get(r));
            out.emplace_back(name, std::move(v));
        };
        if (spec_.family == Family::Linear) {
            column("trg", [](const FrameRow& r) { return r.trg; });
            return out;
        }
        column("t", [](const FrameRow& r) { return r.t; });
        column("trg", [](const FrameRow& r) { return r.trg; });
        column("w", [](const FrameRow& r) { return r.w; });
        column("pc", [](const FrameRow& r) { return r.pc; });
        column("ep", [](const FrameRow& r) { return r.ep; });
        if (spec_.uses_id()) column("id", [](const FrameRow& r) { return static_cast<double>(r.id); });
        return out;
    }

    /// Undifferenced level form a exp(-b/trg) + ... + c_id id on each row's own
    /// predictors, i.e. the fitted lpm implied by the first seven parameters.
    std::vector<double> level_fitted(std::span<const double> theta) const {
        check_theta(theta);
        std::vector<double> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) {
            const double id_term = spec_.uses_id() ? theta[6] * r.id : 0.0;
            if (spec_.family == Family::Linear) {
                out.push_back(theta[0] + theta[1] * r.trg);
                continue;
            }
            out.push_back(theta[0] * decay(theta[1], r.trg, r.date) + theta[2] * r.w + theta[3] * r.t + theta[4] * r.pc +
                          theta[5] * r.ep + id_term);
        }
        return out;
    }

private:
    static double decay(double b, double trg, const Date& date) {
        if (trg == 0.0) throw SingularityError("temperature range is zero on " + date.str());
        return std::exp(-b / trg);
    }

    void check_theta(std::span<const double> theta) const {
        if (theta.size() != parameters())
            throw DomainError(spec_.name() + " model expects " + std::to_string(parameters()) + " parameters, got " +
                              std::to_string(theta.size()));
        for (double v : theta)
            if (!std::isfinite(v)) throw DomainError("non-finite parameter");
    }

    double rho(std::span<const double> theta) const {
        if (spec_.family == Family::Iterated) return spec_.rho;
        if (spec_.family == Family::IteratedFreeRho) return theta[7];
        return 0.0;
    }

    // Regressor vector x with f = theta1 e + sum_k theta_k x_k; for lagged
    // families every entry is already differenced by rho.
    struct Terms {
        double e = 0.0;      ///< exp(-b/trg) (differenced)
        double de = 0.0;     ///< d e / d b
        double d2e = 0.0;    ///< d2 e / d b2
        double x[5] = {};    ///< w, t, pc, ep, id (differenced)
        // previous-day pieces, used only by the free-rho derivatives
        double e_prev = 0.0, de_prev = 0.0, x_prev[5] = {}, lpm_prev = 0.0;
    };

    Terms terms(const FrameRow& r, std::span<const double> theta) const {
        Terms tm;
        const double b = theta[1];
        const double e0 = decay(b, r.trg, r.date);
        tm.e = e0;
        tm.de = -e0 / r.trg;
        tm.d2e = e0 / (r.trg * r.trg);
        tm.x[0] = r.w;
        tm.x[1] = r.t;
        tm.x[2] = r.pc;
        tm.x[3] = r.ep;
        tm.x[4] = r.id;
        if (spec_.uses_lag()) {
            const auto& l = *r.lag;
            const double rh = rho(theta);
            const double e1 = decay(b, l.trg, r.date);
            tm.e_prev = e1;
            tm.de_prev = -e1 / l.trg;
            tm.x_prev[0] = l.w;
            tm.x_prev[1] = l.t;
            tm.x_prev[2] = l.pc;
            tm.x_prev[3] = l.ep;
            tm.x_prev[4] = l.id;
            tm.lpm_prev = l.lpm;
            tm.e -= rh * e1;
            tm.de -= rh * tm.de_prev;
            tm.d2e -= rh * e1 / (l.trg * l.trg);
            for (int k = 0; k < 5; ++k) tm.x[k] -= rh * tm.x_prev[k];
        }
        return tm;
    }

    std::size_t linear_terms() const { return spec_.uses_id() ? 5 : 4; }

    double row_value(const FrameRow& r, std::span<const double> theta) const {
        if (spec_.family == Family::Linear) return theta[0] + theta[1] * r.trg;
        const Terms tm = terms(r, theta);
        double f = theta[0] * tm.e;
        for (std::size_t k = 0; k < linear_terms(); ++k) f += theta[2 + k] * tm.x[k];
        if (spec_.family == Family::IteratedFreeRho) f += theta[7] * tm.lpm_prev;
        return f;
    }

    void row_gradient(const FrameRow& r, std::span<const double> theta, std::span<double> g) const {
        if (spec_.family == Family::Linear) {
            g[0] = 1.0;
            g[1] = r.trg;
            return;
        }
        const Terms tm = terms(r, theta);
        g[0] = tm.e;
        g[1] = theta[0] * tm.de;
        for (std::size_t k = 0; k < linear_terms(); ++k) g[2 + k] = tm.x[k];
        if (spec_.family == Family::IteratedFreeRho) {
            double level_prev = theta[0] * tm.e_prev;
            for (std::size_t k = 0; k < 5; ++k) level_prev += theta[2 + k] * tm.x_prev[k];
            g[7] = tm.lpm_prev - level_prev;
        }
    }

    void row_hessian(const FrameRow& r, std::span<const double> theta, Cube& h, std::size_t face) const {
        if (spec_.family == Family::Linear) return;
        const Terms tm = terms(r, theta);
        h(face, 0, 1) = h(face, 1, 0) = tm.de;
        h(face, 1, 1) = theta[0] * tm.d2e;
        if (spec_.family == Family::IteratedFreeRho) {
            h(face, 0, 7) = h(face, 7, 0) = -tm.e_prev;
            h(face, 1, 7) = h(face, 7, 1) = -theta[0] * tm.de_prev;
            for (std::size_t k = 0; k < 5; ++k) h(face, 2 + k, 7) = h(face, 7, 2 + k) = -tm.x_prev[k];
        }
    }

    ModelSpec spec_;
    std::vector<FrameRow> rows_;
    std::vector<double> response_;
};

static_assert(RegressionModel<FrameModel>);

}  // namespace pm25
