#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pm25/data.hpp"
#include "pm25/diagnostics.hpp"
#include "pm25/error.hpp"
#include "pm25/model.hpp"
#include "pm25/numerics/stat_tests.hpp"
#include "pm25/solver.hpp"

namespace pm25 {

class StratificationError : public DataError {
public:
    using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Random streams

/// SplitMix64 finaliser.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of the substream for replication `rep`: splitmix64(seed ^ splitmix64(rep)).
/// Streams depend only on (seed, rep), never on scheduling.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t rep) { return splitmix64(seed ^ splitmix64(rep)); }

using Engine = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection; identical across standard libraries.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform_below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % bound;
}

// ---------------------------------------------------------------------------
// Stratified sampling

/// Largest-remainder proportional allocation of `total` draws over strata.
/// Ties in the fractional part go to the earlier stratum.
inline std::vector<std::size_t> proportional_allocation(const std::vector<std::size_t>& sizes, std::size_t total) {
    const std::size_t population = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (population == 0) throw StratificationError("stratified sample: empty population");
    std::vector<std::size_t> alloc(sizes.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const double quota = static_cast<double>(total) * static_cast<double>(sizes[k]) / static_cast<double>(population);
        alloc[k] = static_cast<std::size_t>(std::floor(quota));
        assigned += alloc[k];
        remainders.emplace_back(quota - static_cast<double>(alloc[k]), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++alloc[remainders[i % remainders.size()].second];
    return alloc;
}

/// Row indices (ascending) of a sample stratified by id. Strata are the id
/// levels present in the frame; each must receive at least one draw.
inline std::vector<std::size_t> stratified_indices(const ModelFrame& frame, std::size_t size, Engine& eng,
                                                   bool with_replacement = false) {
    if (frame.empty()) throw StratificationError("stratified sample: empty frame");
    if (size == 0) throw StratificationError("stratified sample: sample size is zero");
    if (!with_replacement && size > frame.size())
        throw StratificationError("stratified sample: size " + std::to_string(size) + " exceeds " +
                                  std::to_string(frame.size()) + " rows");

    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < frame.size(); ++i) strata[frame.rows[i].id].push_back(i);
    std::vector<std::size_t> sizes;
    for (const auto& [id, members] : strata) sizes.push_back(members.size());
    const auto alloc = proportional_allocation(sizes, size);

    std::vector<std::size_t> out;
    out.reserve(size);
    std::size_t k = 0;
    for (auto& [id, members] : strata) {
        const std::size_t take = alloc[k++];
        if (take == 0)
            throw StratificationError("stratified sample: stratum id=" + std::to_string(id) + " would be empty");
        if (with_replacement) {
            for (std::size_t d = 0; d < take; ++d) out.push_back(members[uniform_below(eng, members.size())]);
        } else {
            std::vector<std::size_t> pool = members;
            for (std::size_t d = 0; d < take; ++d) {
                const std::size_t pick = d + uniform_below(eng, pool.size() - d);
                std::swap(pool[d], pool[pick]);
                out.push_back(pool[d]);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline ModelFrame subset(const ModelFrame& frame, const std::vector<std::size_t>& indices) {
    ModelFrame out;
    out.rows.reserve(indices.size());
    for (std::size_t i : indices) out.rows.push_back(frame.rows[i]);
    return out;
}

/// Stratified subsample in date order. Rows keep their lag values.
inline ModelFrame stratified_sample(const ModelFrame& frame, std::size_t size, std::uint64_t seed,
                                   bool with_replacement = false) {
    Engine eng(seed);
    return subset(frame, stratified_indices(frame, size, eng, with_replacement));
}

// ---------------------------------------------------------------------------
// Simulation

enum class CorrectionMode {
    SimulationMean,  ///< theta_hat + bias (the replication mean)
    Classical,       ///< theta_hat - bias
    BoxBias,         ///< theta_hat - Box bias of the baseline fit
};

inline std::string to_string(CorrectionMode m) {
    switch (m) {
        case CorrectionMode::SimulationMean: return "simulation-mean";
        case CorrectionMode::Classical: return "classical";
        case CorrectionMode::BoxBias: return "box-bias";
    }
    return "?";
}

inline std::optional<CorrectionMode> parse_correction_mode(const std::string& s) {
    if (s == "simulation-mean") return CorrectionMode::SimulationMean;
    if (s == "classical") return CorrectionMode::Classical;
    if (s == "box-bias") return CorrectionMode::BoxBias;
    return std::nullopt;
}

struct SimulationOptions {
    std::size_t reps = 1000;
    std::size_t size = 450;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    bool with_replacement = false;
    double curvature_alpha = 0.05;
    double ks_alpha = 0.05;        ///< replication passes when KS p > ks_alpha
    double ks_strong = 0.5;        ///< and counts as strong when p > ks_strong
    double min_ks_pass = 0.95;     ///< run accepted when the pass fraction reaches this
    CorrectionMode correction = CorrectionMode::SimulationMean;
    SolverOptions solver;
};

struct Replication {
    std::size_t rep = 0;
    bool converged = false;
    std::size_t steps = 0;
    std::vector<double> theta;
    double rho_k_n = 0.0;
    double rho_k_p = 0.0;
    bool curvature_pass = false;
    double ks_d = 0.0;
    double ks_p = 0.0;
    std::size_t identical_residuals = 0;  ///< rows where the replication residual equals the baseline one
    std::string error;
};

struct BootstrapSummary {
    std::size_t replications = 0;
    std::size_t converged_count = 0;
    std::size_t curvature_pass_count = 0;
    std::size_t ks_pass_count = 0;
    std::size_t ks_strong_count = 0;
    std::size_t identical_residual_violations = 0;
    double mean_steps = 0.0;
    std::size_t min_steps = 0;
    std::size_t max_steps = 0;
    bool accepted = false;

    std::vector<double> theta_hat;
    std::vector<double> mean_theta;
    std::vector<double> bias;  ///< mean(theta*) - theta_hat
    std::vector<double> std;   ///< population standard deviation of theta*
    std::vector<double> mse;   ///< mean((theta* - theta_hat)^2)
    std::vector<double> box_bias;
    CorrectionMode correction = CorrectionMode::SimulationMean;
    std::vector<double> theta_corrected;

    std::vector<Replication> reps;  ///< ordered by replication index
};

namespace detail {

inline Replication run_replication(const ModelSpec& spec, const ModelFrame& eligible, const FitResult& baseline,
                                   const SimulationOptions& opts, std::size_t rep) {
    Replication out;
    out.rep = rep;
    try {
        Engine eng(substream_seed(opts.seed, rep));
        const auto idx = stratified_indices(eligible, opts.size, eng, opts.with_replacement);
        const FrameModel model(spec, subset(eligible, idx));
        const FitResult fit = gauss_newton(model, baseline.theta_hat, opts.solver);
        out.converged = fit.converged;
        out.steps = fit.steps;
        out.theta = fit.theta_hat;

        const auto curv = bates_curvature(model, fit, opts.curvature_alpha);
        out.rho_k_n = curv.rho_k_n;
        out.rho_k_p = curv.rho_k_p;
        out.curvature_pass = curv.passes();

        for (std::size_t k = 0; k < idx.size(); ++k)
            if (fit.residuals[k] == baseline.residuals[idx[k]]) ++out.identical_residuals;
        const auto ks = ks_two_sample(fit.residuals, baseline.residuals);
        out.ks_d = ks.d;
        out.ks_p = ks.p;
    } catch (const StratificationError&) {
        throw;
    } catch (const Error& e) {
        out.converged = false;
        out.error = e.what();
    }
    return out;
}

}  // namespace detail

/// Stratified-subsample simulation around a baseline fit of `spec` on `frame`.
/// Replications run on `opts.workers` threads; each draws from its own
/// substream and the reduction runs in replication order, so the summary is
/// bit-identical for any worker count.
inline BootstrapSummary run_simulation(const ModelSpec& spec, const ModelFrame& frame, const FitResult& baseline,
                                       const SimulationOptions& opts) {
    const FrameModel base_model(spec, frame);
    if (baseline.residuals.size() != base_model.observations() || baseline.theta_hat.size() != spec.parameters())
        throw DomainError("run_simulation: baseline fit does not match the model and frame");
    if (opts.reps == 0) throw DomainError("run_simulation: reps must be positive");

    const ModelFrame eligible{base_model.rows()};
    {
        // Fail fast on impossible stratifications instead of inside every worker.
        Engine probe(0);
        (void)stratified_indices(eligible, opts.size, probe, opts.with_replacement);
    }

    BootstrapSummary sum;
    sum.replications = opts.reps;
    sum.reps.resize(opts.reps);
    const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, opts.reps));
    if (workers == 1) {
        for (std::size_t r = 0; r < opts.reps; ++r) sum.reps[r] = detail::run_replication(spec, eligible, baseline, opts, r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < opts.reps; r = next++)
                    sum.reps[r] = detail::run_replication(spec, eligible, baseline, opts, r);
            });
        for (auto& t : pool) t.join();
    }

    const std::size_t q = spec.parameters();
    sum.theta_hat = baseline.theta_hat;
    sum.mean_theta.assign(q, 0.0);
    sum.bias.assign(q, 0.0);
    sum.std.assign(q, 0.0);
    sum.mse.assign(q, 0.0);
    sum.min_steps = std::numeric_limits<std::size_t>::max();

    std::size_t step_total = 0;
    for (const auto& r : sum.reps) {
        if (r.identical_residuals > 0) ++sum.identical_residual_violations;
        if (!r.converged) continue;
        ++sum.converged_count;
        if (r.curvature_pass) ++sum.curvature_pass_count;
        if (r.ks_p > opts.ks_alpha) ++sum.ks_pass_count;
        if (r.ks_p > opts.ks_strong) ++sum.ks_strong_count;
        step_total += r.steps;
        sum.min_steps = std::min(sum.min_steps, r.steps);
        sum.max_steps = std::max(sum.max_steps, r.steps);
        for (std::size_t j = 0; j < q; ++j) sum.mean_theta[j] += r.theta[j];
    }
    if (sum.converged_count == 0) {
        sum.min_steps = 0;
        sum.theta_corrected = baseline.theta_hat;
        return sum;
    }
    const double m = static_cast<double>(sum.converged_count);
    sum.mean_steps = static_cast<double>(step_total) / m;
    for (std::size_t j = 0; j < q; ++j) sum.mean_theta[j] /= m;
    for (const auto& r : sum.reps) {
        if (!r.converged) continue;
        for (std::size_t j = 0; j < q; ++j) {
            const double dev = r.theta[j] - sum.mean_theta[j];
            const double err = r.theta[j] - baseline.theta_hat[j];
            sum.std[j] += dev * dev;
            sum.mse[j] += err * err;
        }
    }
    for (std::size_t j = 0; j < q; ++j) {
        sum.bias[j] = sum.mean_theta[j] - baseline.theta_hat[j];
        sum.std[j] = std::sqrt(sum.std[j] / m);
        sum.mse[j] /= m;
    }
    sum.accepted = static_cast<double>(sum.ks_pass_count) >= opts.min_ks_pass * static_cast<double>(opts.reps);

    sum.box_bias = box_bias(base_model, baseline).bias;
    sum.correction = opts.correction;
    sum.theta_corrected.resize(q);
    for (std::size_t j = 0; j < q; ++j) {
        switch (opts.correction) {
            case CorrectionMode::SimulationMean: sum.theta_corrected[j] = baseline.theta_hat[j] + sum.bias[j]; break;
            case CorrectionMode::Classical: sum.theta_corrected[j] = baseline.theta_hat[j] - sum.bias[j]; break;
            case CorrectionMode::BoxBias: sum.theta_corrected[j] = baseline.theta_hat[j] - sum.box_bias[j]; break;
        }
    }
    return sum;
}

/// Fit re-evaluated at the corrected parameters, with before/after sums of squares.
struct CorrectedFit {
    FitResult fit;
    CurvatureReport curvature;
    double rss_before = 0.0;        ///< model scale
    double rss_after = 0.0;
    double level_rss_before = 0.0;  ///< sum (lpm - level fitted)^2
    double level_rss_after = 0.0;
    double level_regression_ss_before = 0.0;  ///< sum (level fitted - mean lpm)^2
    double level_regression_ss_after = 0.0;
};

inline CorrectedFit apply_correction(const FitResult& fit, const BootstrapSummary& summary, const ModelSpec& spec,
                                     const ModelFrame& frame, double alpha = 0.05) {
    const FrameModel model(spec, frame);
    if (summary.theta_corrected.size() != spec.parameters() || fit.residuals.size() != model.observations())
        throw DomainError("apply_correction: summary or fit does not match the model");

    CorrectedFit out;
    out.fit = fit;
    out.fit.trace.clear();
    evaluate_fit(model, summary.theta_corrected, out.fit);
    out.curvature = bates_curvature(model, out.fit, alpha);
    out.rss_before = fit.rss;
    out.rss_after = out.fit.rss;

    if (spec.family != Family::Linear) {
        std::vector<double> lpm;
        for (const auto& r : model.rows()) lpm.push_back(r.lpm);
        const double mean = std::accumulate(lpm.begin(), lpm.end(), 0.0) / static_cast<double>(lpm.size());
        auto sums = [&](const std::vector<double>& theta, double& rss, double& reg) {
            const auto lf = model.level_fitted(theta);
            rss = reg = 0.0;
            for (std::size_t i = 0; i < lf.size(); ++i) {
                rss += (lpm[i] - lf[i]) * (lpm[i] - lf[i]);
                reg += (lf[i] - mean) * (lf[i] - mean);
            }
        };
        sums(fit.theta_hat, out.level_rss_before, out.level_regression_ss_before);
        sums(summary.theta_corrected, out.level_rss_after, out.level_regression_ss_after);
    }
    return out;
}

}  // namespace pm25
