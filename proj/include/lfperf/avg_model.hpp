// Average-based (Little's law) throughput model.
//
// The model only looks at the means of the critical and parallel work.
// A single unknown, the expected retry-loop occupancy trl, drives the
// expansion e(trl), the slack time and the completion time; the
// occupancy itself is the least solution of
//
//     S(trl) = pw / (P - trl)
//
// which is reached by a monotone fixed-point iteration.

#ifndef LFPERF_AVG_MODEL_HPP
#define LFPERF_AVG_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "model_core.hpp"

namespace lfperf {

/// Tabulated solution of the expansion ODE
///
///     e'(x) = cc * (stages*cc/2 + e) / (base + e),   e(start) = 0,
///
/// with e = 0 left of `start`. The single-CAS model uses stages = 1 and
/// base = cc + cw + cc; the multi-stage model reuses the same curve with
/// its own stage count and retry length.
///
/// Integrated with classic RK4 on a fixed grid and linearly interpolated.
/// Immutable after construction.
class ExpansionCurve {
public:
    static constexpr double kDefaultStep = 1e-3;

    ExpansionCurve(double cc, double stages, double base, double upper, double start = 1.0,
                   double step = kDefaultStep)
        : cc_(cc), stages_(stages), base_(base), start_(start), step_(step) {
        const double span = std::max(0.0, upper - start_);
        const auto n = static_cast<std::size_t>(std::ceil(span / step_ - 1e-9));
        values_.reserve(n + 2);
        values_.push_back(0.0);
        double e = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            e = rk4_step(e, step_);
            values_.push_back(e);
        }
    }

    double operator()(double x) const {
        if (x <= start_) return 0.0;
        const double pos = (x - start_) / step_;
        const auto k = static_cast<std::size_t>(pos);
        if (k + 1 < values_.size()) {
            const double frac = pos - static_cast<double>(k);
            return values_[k] + frac * (values_[k + 1] - values_[k]);
        }
        // Past the table: keep integrating from the last node.
        double at = start_ + step_ * static_cast<double>(values_.size() - 1);
        double e = values_.back();
        while (at + step_ < x) {
            e = rk4_step(e, step_);
            at += step_;
        }
        return rk4_step(e, x - at);
    }

    /// Right-hand side of the ODE.
    double slope(double e) const { return cc_ * (stages_ * cc_ / 2.0 + e) / (base_ + e); }

    double start() const { return start_; }
    double step() const { return step_; }

private:
    double rk4_step(double e, double h) const {
        // Autonomous ODE: the slope depends on e only.
        const double k1 = slope(e);
        const double k2 = slope(e + 0.5 * h * k1);
        const double k3 = slope(e + 0.5 * h * k2);
        const double k4 = slope(e + h * k3);
        return e + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }

    double cc_;
    double stages_;
    double base_;
    double start_;
    double step_;
    std::vector<double> values_;
};

namespace avg {

struct AvgSolution {
    double trl = 0;             ///< expected retry-loop occupancy
    double expansion = 0;       ///< e(trl), uow
    double success_period = 0;  ///< uow
    double throughput = 0;      ///< 1 / success_period
    double fails_per_success = 0;
    ContentionMode mode = ContentionMode::NonContended;
    std::size_t iterations = 0;

    Prediction prediction() const { return {throughput, fails_per_success, trl, mode}; }
};

/// Fixed-point settings. The defaults are the production values.
struct SolverOptions {
    double tolerance = 1e-9;
    std::size_t max_iterations = 100000;
};

/// min(1/(rc+cw+cc), P/(pw+rc+cw+cc)).
inline double upper_bound(const PlatformParams& p, const WorkloadParams& w) {
    const double loop = p.rc + w.cw_mean + p.cc;
    return std::min(1.0 / loop, p.P / (w.pw_mean + loop));
}

/// Occupancy at which the non-contended and contended success periods
/// coincide: the positive root of
///     trl^2 (cw + 2cc) + trl (cw + cc - rc) - (rc + cw + cc) = 0.
inline double contention_threshold(const PlatformParams& p, double cw) {
    const double a = cw + 2 * p.cc;
    const double b = cw + p.cc - p.rc;
    const double c = p.rc + cw + p.cc;
    // Citardauq form: same root, no cancellation when b > 0.
    const double disc = std::sqrt(b * b + 4 * a * c);
    return b >= 0 ? 2 * c / (b + disc) : (-b + disc) / (2 * a);
}

/// Least solution of  S(u) = pw / (P - u)  by the monotone iteration
///     u0 = loop/(pw + loop) * P,   u <- P * u S(u) / (pw + u S(u)),
/// where `loop` is the uncontended retry length. pw = 0 saturates at P.
template <class SuccessPeriod>
double occupancy_fixed_point(int P, double loop, double pw, SuccessPeriod&& S,
                             const SolverOptions& opt = {}, std::size_t* iterations = nullptr) {
    double u = loop / (pw + loop) * P;
    std::size_t it = 0;
    if (pw > 0) {
        for (;; ++it) {
            if (it >= opt.max_iterations)
                throw convergence_error("occupancy fixed point did not converge", u);
            const double f1 = u * S(u);
            const double next = f1 / (pw + f1) * P;
            const double delta = std::abs(next - u);
            u = next;
            if (delta < opt.tolerance) break;
        }
    }
    if (iterations) *iterations = it;
    return u;
}

/// Solution of the average-based expansion ODE at occupancy `trl`.
inline double expansion_avg(double trl, const PlatformParams& p, double cw) {
    if (trl <= 1.0) return 0.0;
    return ExpansionCurve(p.cc, 1.0, 2 * p.cc + cw, trl)(trl);
}

/// The model for one platform and critical-work size, with its expansion
/// curve tabulated once over [1, P].
class AvgModel {
public:
    AvgModel(const PlatformParams& p, double cw)
        : p_(p), cw_(cw), trl0_(contention_threshold(p, cw)),
          curve_(p.cc, 1.0, 2 * p.cc + cw, std::max<double>(p.P, 1.0)) {}

    const PlatformParams& platform() const { return p_; }
    double cw() const { return cw_; }

    /// Closed-form contention threshold.
    double threshold() const { return trl0_; }

    /// Occupancy above which the contended branch applies. A lone thread
    /// never meets a failed CAS, so with P = 1 the non-contended branch
    /// covers the whole domain.
    double switch_point() const { return p_.P == 1 ? 1.0 : trl0_; }

    double expansion(double trl) const { return curve_(trl); }

    double success_period(double trl) const {
        if (trl <= switch_point()) return (p_.rc + cw_ + p_.cc) / trl;
        return (cw_ + expansion(trl)) * (trl + 2) / (trl + 1) + 2 * p_.cc;
    }

    AvgSolution solve(double pw, const SolverOptions& opt = {}) const {
        std::size_t it = 0;
        const double u = occupancy_fixed_point(
            p_.P, p_.rc + cw_ + p_.cc, pw, [this](double x) { return success_period(x); }, opt,
            &it);
        AvgSolution s;
        s.trl = u;
        s.expansion = expansion(u);
        s.success_period = success_period(u);
        s.throughput = 1.0 / s.success_period;
        s.fails_per_success = std::max(0.0, u - 1.0);
        s.mode = u <= switch_point() ? ContentionMode::NonContended : ContentionMode::Contended;
        s.iterations = it;
        return s;
    }

private:
    PlatformParams p_;
    double cw_;
    double trl0_;
    ExpansionCurve curve_;
};

inline double expected_success_period(double trl, const PlatformParams& p,
                                      const WorkloadParams& w) {
    return AvgModel(p, w.cw_mean).success_period(trl);
}

/// Runs the fixed point for the given means. Distribution kinds are
/// ignored.
inline AvgSolution solve_fixed_point(const PlatformParams& p, const WorkloadParams& w,
                                     const SolverOptions& opt = {}) {
    return AvgModel(p, w.cw_mean).solve(w.pw_mean, opt);
}

inline Prediction predict(const PlatformParams& p, const WorkloadParams& w) {
    return solve_fixed_point(p, w).prediction();
}

}  // namespace avg
}  // namespace lfperf

#endif  // LFPERF_AVG_MODEL_HPP
