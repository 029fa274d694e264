// Average-based model for operations made of several CAS stages
// (helping-based designs such as a two-stage queue enqueue or the
// three-stage deque push/pop).
//
// A retry of an S-stage operation reads, works and CASes S times. Stages
// whose CAS targets the same shared variable delay each other, so their
// expansions are pooled.

#ifndef LFPERF_MULTISTAGE_MODEL_HPP
#define LFPERF_MULTISTAGE_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "avg_model.hpp"
#include "model_core.hpp"

namespace lfperf::multistage {

struct Stage {
    double rc = 1.0;
    double cw = 1.0;
    double cc = 1.5;
    std::string var;  ///< shared-variable label; equal labels share a CAS target
};

struct StageSpec {
    std::vector<Stage> stages;

    std::size_t size() const { return stages.size(); }

    /// Uncontended retry length, sum of rc + cw + cc over the stages.
    double rlw() const {
        double s = 0;
        for (const auto& st : stages) s += st.rc + st.cw + st.cc;
        return s;
    }

    /// Single-stage spec equivalent to the plain retry loop.
    static StageSpec single(const PlatformParams& p, double cw) {
        return {{Stage{p.rc, cw, p.cc, "v"}}};
    }
};

inline void validate(const StageSpec& spec) {
    detail::require(!spec.stages.empty(), "stages", "at least one stage required");
    for (const auto& st : spec.stages) {
        detail::require(std::isfinite(st.rc) && st.rc > 0, "stages.rc", "stage rc > 0 required");
        detail::require(std::isfinite(st.cw) && st.cw > 0, "stages.cw", "stage cw > 0 required");
        detail::require(std::isfinite(st.cc) && st.cc > 0, "stages.cc", "stage cc > 0 required");
    }
}

struct MixedWorkload {
    std::vector<std::pair<StageSpec, double>> ops;  ///< (operation, thread weight)
};

inline void validate(const MixedWorkload& mix) {
    detail::require(!mix.ops.empty(), "mix", "at least one operation required");
    double total = 0;
    for (const auto& [spec, w] : mix.ops) {
        validate(spec);
        detail::require(std::isfinite(w) && w >= 0, "weight", "weights must be >= 0");
        total += w;
    }
    detail::require(std::abs(total - 1.0) <= 1e-9, "weight", "weights must sum to 1");
}

/// Base term of the expansion ODE. A contended retry starts with a failed
/// CAS rather than a Read, hence cc in place of rc.
inline double expansion_base(const StageSpec& spec) {
    double s = 0;
    for (const auto& st : spec.stages) s += 2 * st.cc + st.cw;
    return s;
}

inline ExpansionCurve expansion_curve(const StageSpec& spec, const PlatformParams& p) {
    return ExpansionCurve(p.cc, static_cast<double>(spec.size()), expansion_base(spec),
                          std::max<double>(p.P, 1.0));
}

/// Total expansion of one retry at occupancy trl.
inline double expansion_multistage(double trl, const StageSpec& spec, const PlatformParams& p) {
    if (trl <= 1.0) return 0.0;
    return ExpansionCurve(p.cc, static_cast<double>(spec.size()), expansion_base(spec), trl)(trl);
}

/// Every stage receives the sum of the expansions of all stages that
/// share its variable.
inline std::vector<double> group_expansion(const StageSpec& spec, const std::vector<double>& e) {
    std::map<std::string, double> sums;
    for (std::size_t i = 0; i < spec.size(); ++i) sums[spec.stages[i].var] += e.at(i);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) out[i] = sums[spec.stages[i].var];
    return out;
}

/// Total expansion split evenly over the stages, then grouped.
inline std::vector<double> stage_expansions(const StageSpec& spec, double total) {
    const std::vector<double> even(spec.size(), total / static_cast<double>(spec.size()));
    return group_expansion(spec, even);
}

/// Slack of a contended success period: the expanded critical work of
/// one retry, shared by trl+1 threads and S equal stages.
inline double multistage_slack(double trl, const StageSpec& spec,
                               const std::vector<double>& grouped) {
    double work = 0;
    for (std::size_t i = 0; i < spec.size(); ++i) work += spec.stages[i].cw + grouped.at(i);
    return work / (static_cast<double>(spec.size()) * (trl + 1));
}

class MultistageModel {
public:
    MultistageModel(const PlatformParams& p, StageSpec spec)
        : p_(p), spec_(std::move(spec)), curve_(expansion_curve(spec_, p_)) {
        switch_ = p_.P == 1 ? 1.0 : find_switch();
    }

    const StageSpec& spec() const { return spec_; }
    double switch_point() const { return switch_; }
    double expansion(double trl) const { return curve_(trl); }

    double uncontended_period(double trl) const { return spec_.rlw() / trl; }

    double contended_period(double trl) const {
        const auto e = stage_expansions(spec_, expansion(trl));
        double completion = spec_.stages.front().cc;
        for (std::size_t i = 0; i < spec_.size(); ++i)
            completion += spec_.stages[i].cw + e[i] + spec_.stages[i].cc;
        return multistage_slack(trl, spec_, e) + completion;
    }

    double success_period(double trl) const {
        return trl <= switch_ ? uncontended_period(trl) : contended_period(trl);
    }

    /// Fixed point at parallel work pw. Failures count the extra threads in
    /// the loop, as in the single-stage model.
    avg::AvgSolution solve(double pw, const avg::SolverOptions& opt = {}) const {
        std::size_t it = 0;
        const double u = avg::occupancy_fixed_point(
            p_.P, spec_.rlw(), pw, [this](double x) { return success_period(x); }, opt, &it);
        avg::AvgSolution s;
        s.trl = u;
        s.expansion = expansion(u);
        s.success_period = success_period(u);
        s.throughput = 1.0 / s.success_period;
        s.fails_per_success = std::max(0.0, u - 1.0);
        s.mode = u <= switch_ ? ContentionMode::NonContended : ContentionMode::Contended;
        s.iterations = it;
        return s;
    }

private:
    // Crossing of the two branches on (0, 1]. The uncontended branch
    // dominates near 0; if it is still above at 1 the crossing lies past
    // the bracket and 1 is used.
    double find_switch() const {
        auto gap = [this](double x) { return uncontended_period(x) - contended_period(x); };
        double lo = 0, hi = 1;
        if (gap(hi) > 0) return hi;
        while (hi - lo > 1e-9) {
            const double mid = 0.5 * (lo + hi);
            (mid > 0 && gap(mid) > 0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    PlatformParams p_;
    StageSpec spec_;
    ExpansionCurve curve_;
    double switch_ = 1.0;
};

inline Prediction predict_multistage(const PlatformParams& p, const WorkloadParams& w,
                                     const StageSpec& spec) {
    validate_platform(p);
    validate(spec);
    return MultistageModel(p, spec).solve(w.pw_mean).prediction();
}

/// Weighted average of the success periods of the operations. Failures
/// and occupancy are averaged with the same weights.
inline Prediction mixed_throughput(const MixedWorkload& mix, const PlatformParams& p, double pw) {
    validate(mix);
    validate_platform(p);
    double period = 0, fails = 0, occ = 0;
    bool first = true;
    ContentionMode mode = ContentionMode::NonContended;
    for (const auto& [spec, weight] : mix.ops) {
        const auto s = MultistageModel(p, spec).solve(pw);
        period += weight * s.success_period;
        fails += weight * s.fails_per_success;
        occ += weight * s.trl;
        if (weight > 0) {
            if (first) mode = s.mode;
            else if (mode != s.mode) mode = ContentionMode::Mixed;
            first = false;
        }
    }
    return {1.0 / period, fails, occ, mode};
}

}  // namespace lfperf::multistage

#endif  // LFPERF_MULTISTAGE_MODEL_HPP
