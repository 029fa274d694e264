// Tuning advice derived from the models: where throughput peaks in pw,
// how much constant back-off reaches that peak, how to read the current
// pw off an observed failure rate, and how many reclamation quanta to
// fold into the parallel section.

#ifndef LFPERF_ADVISOR_HPP
#define LFPERF_ADVISOR_HPP

#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "avg_model.hpp"
#include "markov_model.hpp"
#include "model_core.hpp"

namespace lfperf {

enum class ModelKind { Avg, Markov };

inline std::string_view to_string(ModelKind m) { return m == ModelKind::Avg ? "avg" : "markov"; }

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "avg") return ModelKind::Avg;
    if (s == "markov") return ModelKind::Markov;
    throw validation_error("model", "unknown model '" + std::string(s) + "'");
}

inline Prediction predict(ModelKind m, const PlatformParams& p, const WorkloadParams& w) {
    return m == ModelKind::Avg ? avg::predict(p, w) : markov::predict(p, w);
}

namespace advisor {

/// Search bracket for pw, relative to cw.
struct Bracket {
    double lo_factor = 1e-2;
    double hi_factor = 1e4;

    double lo(double cw) const { return lo_factor * cw; }
    double hi(double cw) const { return hi_factor * cw; }
};

struct PeakResult {
    double pw_star = 0;
    double throughput = 0;
    bool at_edge = false;  ///< maximum found on the bracket boundary
};

namespace detail {

constexpr int kCoarsePoints = 97;  // 16 per decade over six decades

inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    const double a = std::log(lo), b = std::log(hi);
    for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / (n - 1));
    return g;
}

}  // namespace detail

/// pw maximizing predicted throughput. A coarse log scan locates the best
/// cell, golden-section search on log pw refines it to 1e-3 relative.
inline PeakResult peak_pw(const PlatformParams& p, const WorkloadParams& tmpl, ModelKind model,
                          const Bracket& br = {}) {
    validate(p, tmpl);
    const double cw = tmpl.cw_mean;
    auto tp = [&](double logpw) { return predict(model, p, tmpl.with_pw(std::exp(logpw))).throughput; };

    const auto grid = detail::log_grid(br.lo(cw), br.hi(cw), detail::kCoarsePoints);
    std::size_t best = 0;
    double best_tp = -1;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = tp(std::log(grid[k]));
        if (t > best_tp) best_tp = t, best = k;
    }
    if (best == 0 || best + 1 == grid.size()) return {grid[best], best_tp, true};

    const double invphi = (std::sqrt(5.0) - 1) / 2;
    double a = std::log(grid[best - 1]), b = std::log(grid[best + 1]);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = tp(c), fd = tp(d);
    while (b - a > 1e-3) {
        if (fc >= fd) {
            b = d, d = c, fd = fc;
            c = b - invphi * (b - a);
            fc = tp(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + invphi * (b - a);
            fd = tp(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {std::exp(x), tp(x), false};
}

struct BackoffAdvice {
    double backoff = 0;  ///< uow added to each parallel section
    PeakResult peak;
};

inline BackoffAdvice constant_backoff(const PlatformParams& p, const WorkloadParams& w,
                                      ModelKind model, const Bracket& br = {}) {
    const auto peak = peak_pw(p, w, model, br);
    return {std::max(0.0, peak.pw_star - w.pw_mean), peak};
}

enum class EstimateFlag { None, Saturated, NonContended };

inline std::string_view to_string(EstimateFlag f) {
    switch (f) {
    case EstimateFlag::None: return "none";
    case EstimateFlag::Saturated: return "saturated";
    case EstimateFlag::NonContended: return "non-contended";
    }
    return "?";
}

struct PwEstimate {
    double pw = 0;
    EstimateFlag flag = EstimateFlag::None;
};

/// Inverts the model's failures-per-success curve by bisection on log pw.
inline PwEstimate estimate_pw_from_failures(double observed, const PlatformParams& p, double cw,
                                            ModelKind model, const Bracket& br = {}) {
    if (!(observed >= 0) || !std::isfinite(observed))
        throw validation_error("fails_per_success", "observed failures must be finite and >= 0");
    const WorkloadParams tmpl = WorkloadParams::canonical(cw, br.lo(cw));
    validate(p, tmpl);
    auto fails = [&](double logpw) {
        return predict(model, p, tmpl.with_pw(std::exp(logpw))).fails_per_success;
    };
    double a = std::log(br.lo(cw)), b = std::log(br.hi(cw));
    const double fa = fails(a), fb = fails(b);
    if (!(fa > fb)) throw std::domain_error("failure curve is not decreasing over the bracket");
    if (observed >= fa) return {br.lo(cw), EstimateFlag::Saturated};
    if (observed <= fb) return {br.hi(cw), EstimateFlag::NonContended};

    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = fails(m);
        if (std::abs(fm - observed) <= 1e-6) return {std::exp(m), EstimateFlag::None};
        (fm > observed ? a : b) = m;
    }
    return {std::exp(0.5 * (a + b)), EstimateFlag::None};
}

struct AdaptiveAdvice {
    double backoff = 0;
    PwEstimate estimate;  ///< effective pw seen by the structure
    double pw_star = 0;
};

/// Back-off advice from a window of per-success failure counts.
/// `current_backoff` is the back-off in force while the window was
/// recorded; it is part of the effective pw the estimate sees, so it is
/// removed before computing the new advice.
inline AdaptiveAdvice adaptive_backoff(const std::vector<double>& window, const PlatformParams& p,
                                       double cw, ModelKind model, double current_backoff = 0.0,
                                       const Bracket& br = {}) {
    if (window.empty()) throw validation_error("window", "failure window must be nonempty");
    const double mean = std::accumulate(window.begin(), window.end(), 0.0) /
                        static_cast<double>(window.size());
    const auto est = estimate_pw_from_failures(mean, p, cw, model, br);
    const auto peak = peak_pw(p, WorkloadParams::canonical(cw, est.pw), model, br);
    const double app_pw = std::max(0.0, est.pw - current_backoff);
    return {std::max(0.0, peak.pw_star - app_pw), est, peak.pw_star};
}

inline constexpr std::size_t kDefaultWindow = 64;

struct MmPlan {
    int k = 0;
    double throughput = 0;
    double throughput_k0 = 0;
    std::optional<int> growth_cap;  ///< caller policy, applied as an upper bound on k
};

/// Granularity k in [0, k_max] maximizing predicted throughput at the
/// effective parallel work base_pw + k * quantum. Ties go to the smaller k.
inline MmPlan mm_plan(const PlatformParams& p, const WorkloadParams& base, double quantum,
                      int k_max, ModelKind model, std::optional<int> growth_cap = std::nullopt) {
    lfperf::detail::require(std::isfinite(quantum) && quantum > 0, "quantum", "quantum > 0 required");
    lfperf::detail::require(k_max >= 0, "k_max", "k_max >= 0 required");
    validate(p, base);
    int limit = k_max;
    if (growth_cap) limit = std::min(limit, std::max(0, *growth_cap));
    MmPlan plan;
    plan.growth_cap = growth_cap;
    plan.throughput_k0 = predict(model, p, base).throughput;
    plan.throughput = plan.throughput_k0;
    for (int k = 1; k <= limit; ++k) {
        const double t = predict(model, p, base.with_pw(base.pw_mean + k * quantum)).throughput;
        if (t > plan.throughput) plan.throughput = t, plan.k = k;
    }
    return plan;
}

}  // namespace advisor
}  // namespace lfperf

#endif  // LFPERF_ADVISOR_HPP
