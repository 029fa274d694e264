// Shared domain types for the lock-free throughput models.
//
// All durations are expressed in units of work (uow). One uow is
// `PlatformParams::unit_cycles` processor cycles (50 by default).

#ifndef LFPERF_MODEL_CORE_HPP
#define LFPERF_MODEL_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace lfperf {

/// Raised when a parameter bundle violates one of its invariants.
/// `field()` names the offending field so front ends can report it.
class validation_error : public std::invalid_argument {
public:
    validation_error(std::string field, const std::string& what)
        : std::invalid_argument(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Raised by iterative solvers that hit their iteration cap.
class convergence_error : public std::runtime_error {
public:
    convergence_error(const std::string& what, double last_iterate)
        : std::runtime_error(what), last_iterate_(last_iterate) {}

    double last_iterate() const noexcept { return last_iterate_; }

private:
    double last_iterate_;
};

struct PlatformParams {
    int P = 1;                ///< threads, one per core
    double cc = 1.5;          ///< CAS latency on a non-owned line (uow)
    double rc = 1.0;          ///< Read miss latency (uow)
    double unit_cycles = 50;  ///< cycles per uow
};

enum class DistKind { Constant, Exponential, Poisson, UniformRange };

struct Distribution {
    DistKind kind = DistKind::Constant;
    double mean = 0.0;
    double lo = 0.0;  // UniformRange only
    double hi = 0.0;  // UniformRange only

    static Distribution constant(double m) { return {DistKind::Constant, m, 0, 0}; }
    static Distribution exponential(double m) { return {DistKind::Exponential, m, 0, 0}; }
    static Distribution poisson(double m) { return {DistKind::Poisson, m, 0, 0}; }
    static Distribution uniform(double lo, double hi) {
        return {DistKind::UniformRange, 0.5 * (lo + hi), lo, hi};
    }

    /// Same shape with a different mean. UniformRange keeps its width
    /// relative to the mean.
    Distribution with_mean(double m) const {
        if (kind != DistKind::UniformRange) return {kind, m, 0, 0};
        if (mean <= 0) return uniform(m, m);
        const double s = m / mean;
        return uniform(lo * s, hi * s);
    }

    friend bool operator==(const Distribution&, const Distribution&) = default;
};

inline std::string_view to_string(DistKind k) {
    switch (k) {
    case DistKind::Constant: return "constant";
    case DistKind::Exponential: return "exponential";
    case DistKind::Poisson: return "poisson";
    case DistKind::UniformRange: return "uniform";
    }
    return "?";
}

inline DistKind parse_dist_kind(std::string_view s) {
    if (s == "constant") return DistKind::Constant;
    if (s == "exponential") return DistKind::Exponential;
    if (s == "poisson") return DistKind::Poisson;
    if (s == "uniform") return DistKind::UniformRange;
    throw validation_error("dist", "unknown distribution kind '" + std::string(s) + "'");
}

struct WorkloadParams {
    double cw_mean = 1.0;
    Distribution cw_dist = Distribution::constant(1.0);
    double pw_mean = 0.0;
    Distribution pw_dist = Distribution::exponential(0.0);

    /// Constant critical work and exponential parallel work.
    static WorkloadParams canonical(double cw, double pw) {
        return {cw, Distribution::constant(cw), pw, Distribution::exponential(pw)};
    }

    WorkloadParams with_pw(double pw) const {
        WorkloadParams w = *this;
        w.pw_mean = pw;
        w.pw_dist = pw_dist.with_mean(pw);
        return w;
    }

    WorkloadParams with_cw(double cw) const {
        WorkloadParams w = *this;
        w.cw_mean = cw;
        w.cw_dist = cw_dist.with_mean(cw);
        return w;
    }
};

enum class ContentionMode { NonContended, Contended, Mixed };

inline std::string_view to_string(ContentionMode m) {
    switch (m) {
    case ContentionMode::NonContended: return "non-contended";
    case ContentionMode::Contended: return "contended";
    case ContentionMode::Mixed: return "mixed";
    }
    return "?";
}

/// Output shared by every analytical model.
struct Prediction {
    double throughput = 0;            ///< successes per uow
    double fails_per_success = 0;
    double mean_retry_occupancy = 0;  ///< expected threads in the retry loop
    ContentionMode mode = ContentionMode::NonContended;

    double success_period() const { return 1.0 / throughput; }
};

struct ValidatedParams {
    PlatformParams platform;
    WorkloadParams workload;
};

namespace detail {

inline void require(bool ok, const char* field, const char* msg) {
    if (!ok) throw validation_error(field, msg);
}

inline void check_distribution(const Distribution& d, const char* field) {
    require(std::isfinite(d.mean) && d.mean >= 0, field, "distribution mean must be >= 0");
    if (d.kind == DistKind::UniformRange) {
        require(d.lo >= 0 && d.lo <= d.hi, field, "uniform range requires 0 <= lo <= hi");
        require(std::abs(d.mean - 0.5 * (d.lo + d.hi)) <= 1e-12 * std::max(1.0, d.hi),
                field, "uniform range mean must equal (lo+hi)/2");
    }
}

}  // namespace detail

inline void validate_platform(const PlatformParams& p) {
    detail::require(p.P >= 1, "P", "P >= 1 required");
    detail::require(std::isfinite(p.cc) && p.cc > 0, "cc", "cc > 0 required");
    detail::require(std::isfinite(p.rc) && p.rc > 0, "rc", "rc > 0 required");
    detail::require(p.cc >= p.rc, "cc", "cc < rc unsupported: cc >= rc required");
    detail::require(std::isfinite(p.unit_cycles) && p.unit_cycles > 0, "unit_cycles",
                    "unit_cycles > 0 required");
}

inline void validate_workload(const WorkloadParams& w) {
    detail::require(std::isfinite(w.cw_mean) && w.cw_mean > 0, "cw_mean", "cw_mean > 0 required");
    detail::require(std::isfinite(w.pw_mean) && w.pw_mean >= 0, "pw_mean", "pw_mean >= 0 required");
    detail::check_distribution(w.cw_dist, "cw_dist");
    detail::check_distribution(w.pw_dist, "pw_dist");
    detail::require(std::abs(w.cw_dist.mean - w.cw_mean) <= 1e-9 * std::max(1.0, w.cw_mean),
                    "cw_dist", "cw_dist mean must equal cw_mean");
    detail::require(std::abs(w.pw_dist.mean - w.pw_mean) <= 1e-9 * std::max(1.0, w.pw_mean),
                    "pw_dist", "pw_dist mean must equal pw_mean");
}

/// Checks every invariant and returns the bundle, or throws
/// `validation_error` naming the first violated one.
inline ValidatedParams validate(const PlatformParams& platform, const WorkloadParams& workload) {
    validate_platform(platform);
    validate_workload(workload);
    return {platform, workload};
}

/// Draws one duration (uow). Constant returns the mean exactly; Poisson
/// yields integer uow counts.
template <class Rng>
double sample(const Distribution& d, Rng& rng) {
    switch (d.kind) {
    case DistKind::Constant:
        return d.mean;
    case DistKind::Exponential:
        if (d.mean <= 0) return 0.0;
        return std::exponential_distribution<double>(1.0 / d.mean)(rng);
    case DistKind::Poisson:
        if (d.mean <= 0) return 0.0;
        return static_cast<double>(std::poisson_distribution<long long>(d.mean)(rng));
    case DistKind::UniformRange:
        if (d.hi <= d.lo) return d.lo;
        return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
    }
    return d.mean;
}

/// Seed derivation for independent streams (threads, grid points).
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace lfperf

#endif  // LFPERF_MODEL_CORE_HPP
