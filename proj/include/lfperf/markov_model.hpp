// Constructive (Markov chain) throughput model for exponentially
// distributed parallel work and constant critical work.
//
// State i of the chain is the number of threads inside the retry loop
// right after a successful CAS, i in [0, P-1]. A success period starting
// in state i is non-contended (i = 0), mid-contended (no CAS pile-up,
// zero expansion) or highly contended (back-to-back CASes, zero slack).

#ifndef LFPERF_MARKOV_MODEL_HPP
#define LFPERF_MARKOV_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "model_core.hpp"

namespace lfperf::markov {

/// Row-major dense square matrix.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

struct ContentionPartition {
    int P = 1;
    int i_hi = 1;  ///< smallest i >= 1 with i*cc > cw

    bool is_noc(int i) const { return i == 0; }
    bool is_mid(int i) const { return i >= 1 && i < i_hi && i <= P - 1; }
    bool is_hi(int i) const { return i >= i_hi && i <= P - 1; }
    int mid_size() const { return std::max(0, std::min(i_hi, P) - 1); }
    int hi_size() const { return std::max(0, P - i_hi); }
};

inline ContentionPartition contention_partition(const PlatformParams& p, double cw) {
    // Smallest i >= 1 with i*cc > cw.
    int i = static_cast<int>(std::floor(cw / p.cc)) + 1;
    while (i > 1 && (i - 1) * p.cc > cw) --i;
    while (i * p.cc <= cw) ++i;
    return {p.P, std::max(i, 1)};
}

/// Expected expansion of a highly contended success period, from the
/// two-bag drawing process: `competitors` threads compete after the
/// first critical work completes, and at round j a success is drawn
/// with probability j/competitors.
///
///   e = ceil(cw/cc)*cc - cw + cc * sum_{j=1..n} j(j-1)/n^j * (n-1)!/(n-j)!
inline double expansion_for_competitors(int competitors, double cw, double cc) {
    if (competitors < 1) throw std::domain_error("expansion needs at least one competitor");
    const double n = competitors;
    const double ceil_ratio = std::ceil(cw / cc - 1e-12);
    double sum = 0.0;
    double survive = 1.0;  // prod_{m<j} (1 - m/n)
    for (int j = 1; j <= competitors; ++j) {
        if (j > 1) survive *= (n - (j - 1)) / n;
        sum += static_cast<double>(j) * (j - 1) / n * survive;
        if (survive < 1e-300) break;
    }
    return std::max(0.0, ceil_ratio * cc - cw) + sum * cc;
}

/// Number of competitors at the first arbitration for state i.
inline int competitors(int i, double cw, double cc) {
    return i - static_cast<int>(std::ceil(cw / cc - 1e-12)) + 1;
}

/// Expansion of a success period that starts in highly contended state i.
inline double expansion_high(int i, const PlatformParams& p, double cw) {
    const auto part = contention_partition(p, cw);
    if (!part.is_hi(i))
        throw std::domain_error("expansion_high: state " + std::to_string(i) +
                                " is not highly contended");
    return expansion_for_competitors(competitors(i, cw, p.cc), cw, p.cc);
}

/// Per-state internal execution: slack w_i (infinite for i = 0),
/// completion time rw_i and expansion e_i. Indexed 0..P so that rw_{i+1}
/// is available for every state.
struct InternalProfile {
    std::vector<double> w;
    std::vector<double> rw;
    std::vector<double> e;

    static constexpr double kInfiniteSlack = std::numeric_limits<double>::infinity();
};

inline InternalProfile internal_profile(const ContentionPartition& part, const PlatformParams& p,
                                        double cw) {
    InternalProfile prof;
    const auto n = static_cast<std::size_t>(part.P) + 1;
    prof.w.assign(n, 0.0);
    prof.rw.assign(n, 0.0);
    prof.e.assign(n, 0.0);
    for (int i = 0; i <= part.P; ++i) {
        const auto k = static_cast<std::size_t>(i);
        // i = P is not a chain state; it only feeds A[P][.], which has no
        // arrivals, so it gets the high-contention profile.
        const bool hi = part.is_hi(i) || (i == part.P && i >= part.i_hi);
        if (i == 0) {
            prof.w[k] = InternalProfile::kInfiniteSlack;
        } else if (hi) {
            prof.w[k] = 0.0;
            prof.e[k] = expansion_for_competitors(competitors(i, cw, p.cc), cw, p.cc);
        } else {
            prof.w[k] = cw / (i + 1);
        }
        prof.rw[k] = p.cc + cw + prof.e[k] + p.cc;
    }
    return prof;
}

/// A[i][k]: probability that k of the P-i threads in their parallel
/// section leave it within rw_i. B[i]: probability that none leaves within
/// the internal slack w_i.
struct ArrivalProbs {
    std::vector<std::vector<double>> A;  // (P+1) rows, row i has P-i+1 entries
    std::vector<double> B;               // P entries

    double a(int i, int k) const {
        const auto& row = A[static_cast<std::size_t>(i)];
        if (k < 0 || static_cast<std::size_t>(k) >= row.size()) return 0.0;
        return row[static_cast<std::size_t>(k)];
    }
};

namespace detail {

/// exp(-x / pw), with the pw = 0 limit.
inline double stay_probability(double x, double pw) {
    if (pw <= 0) return x > 0 ? 0.0 : 1.0;
    return std::exp(-x / pw);
}

/// Binomial(n, q) pmf row, q = probability of leaving.
inline std::vector<double> binomial_row(int n, double x, double pw) {
    std::vector<double> row(static_cast<std::size_t>(n) + 1, 0.0);
    const double stay = stay_probability(x, pw);
    if (stay <= 0.0) {
        row.back() = 1.0;
        return row;
    }
    if (stay >= 1.0) {
        row.front() = 1.0;
        return row;
    }
    const double log_stay = pw > 0 ? -x / pw : std::log(stay);
    const double log_leave = std::log(-std::expm1(log_stay));
    for (int k = 0; k <= n; ++k) {
        const double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        row[static_cast<std::size_t>(k)] = std::exp(log_c + k * log_leave + (n - k) * log_stay);
    }
    return row;
}

}  // namespace detail

inline ArrivalProbs arrival_probs(const ContentionPartition& part, const InternalProfile& prof,
                                  const PlatformParams& p, double pw) {
    ArrivalProbs out;
    const int P = p.P;
    out.A.resize(static_cast<std::size_t>(P) + 1);
    for (int i = 0; i <= P; ++i)
        out.A[static_cast<std::size_t>(i)] =
            detail::binomial_row(P - i, prof.rw[static_cast<std::size_t>(i)], pw);
    out.B.assign(static_cast<std::size_t>(P), 0.0);
    for (int i = 1; i < P; ++i) {
        const double w = prof.w[static_cast<std::size_t>(i)];
        out.B[static_cast<std::size_t>(i)] =
            part.is_hi(i) ? 1.0 : detail::stay_probability((P - i) * w, pw);
    }
    return out;
}

/// Triangular matrix with one subdiagonal:
///   M[i][i+k] = B_i A[i][k+1] + (1-B_i) A[i+1][k],  k in [0, P-1-i]
///   M[i][i-1] = B_i A[i][0]
inline Matrix transition_matrix(const ArrivalProbs& ab, int P) {
    Matrix M(static_cast<std::size_t>(P));
    for (int i = 0; i < P; ++i) {
        const double b = ab.B[static_cast<std::size_t>(i)];
        for (int k = 0; k <= P - 1 - i; ++k)
            M(i, i + k) = b * ab.a(i, k + 1) + (1 - b) * ab.a(i + 1, k);
        if (i > 0) M(i, i - 1) = b * ab.a(i, 0);
    }
    return M;
}

enum class StationaryMethod { Recurrence, PowerIteration };

inline std::string to_string(StationaryMethod m) {
    return m == StationaryMethod::Recurrence ? "recurrence" : "power-iteration";
}

struct StationaryResult {
    std::vector<double> v;
    StationaryMethod method = StationaryMethod::Recurrence;
    double residual = 0;  ///< max |(vM - v)_j|
};

inline double stationary_residual(const Matrix& M, const std::vector<double>& v) {
    const std::size_t n = M.size();
    double worst = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += v[i] * M(i, j);
        worst = std::max(worst, std::abs(s - v[j]));
    }
    return worst;
}

namespace detail {

inline bool normalize(std::vector<double>& v) {
    double sum = 0;
    for (double x : v) {
        if (!std::isfinite(x) || x < 0) return false;
        sum += x;
    }
    if (!(sum > 0) || !std::isfinite(sum)) return false;
    for (double& x : v) x /= sum;
    return true;
}

}  // namespace detail

/// Stationary distribution. The O(P^2) forward recurrence
///   v_{i+1} = ((1 - M_ii) v_i - sum_{k<i} v_k M_ki) / M_{i+1,i}
/// is tried first; if its residual exceeds 1e-8 (cancellation or a zero
/// subdiagonal) power iteration takes over.
inline StationaryResult stationary(const Matrix& M) {
    const std::size_t n = M.size();
    StationaryResult r;
    std::vector<double> v(n, 0.0);
    v[0] = 1.0;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < n && ok; ++i) {
        double acc = (1.0 - M(i, i)) * v[i];
        for (std::size_t k = 0; k < i; ++k) acc -= v[k] * M(k, i);
        const double sub = M(i + 1, i);
        if (!(sub > 0)) {
            ok = false;
            break;
        }
        // Round-off can push a true zero slightly negative.
        v[i + 1] = std::max(0.0, acc / sub);
        if (!std::isfinite(v[i + 1])) ok = false;
    }
    if (ok && detail::normalize(v)) {
        r.residual = stationary_residual(M, v);
        if (r.residual <= 1e-8) {
            r.v = std::move(v);
            r.method = StationaryMethod::Recurrence;
            return r;
        }
    }

    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    std::vector<double> y(n);
    constexpr std::size_t kMaxSteps = 1000000;
    for (std::size_t step = 0; step < kMaxSteps; ++step) {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] == 0) continue;
            for (std::size_t j = 0; j < n; ++j) y[j] += x[i] * M(i, j);
        }
        detail::normalize(y);
        double diff = 0;
        for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(y[j] - x[j]));
        x.swap(y);
        if (diff < 1e-12) break;
    }
    r.v = std::move(x);
    r.method = StationaryMethod::PowerIteration;
    r.residual = stationary_residual(M, r.v);
    return r;
}

struct StateMetrics {
    std::vector<double> Q;       ///< expected success period per state
    std::vector<double> F;       ///< expected failed CASes per state
    std::vector<double> Eslack;  ///< expected slack per state
};

inline StateMetrics state_metrics(const ContentionPartition& part, const InternalProfile& prof,
                                  const PlatformParams& p, const WorkloadParams& w) {
    const int P = p.P;
    const double pw = w.pw_mean;
    const double cw = w.cw_mean;
    StateMetrics m;
    m.Q.assign(static_cast<std::size_t>(P), 0.0);
    m.F.assign(static_cast<std::size_t>(P), 0.0);
    m.Eslack.assign(static_cast<std::size_t>(P), 0.0);
    for (int i = 0; i < P; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double e = prof.e[k];
        if (i == 0) {
            m.Eslack[k] = pw / P;
            m.Q[k] = m.Eslack[k] + p.rc + cw + p.cc;
            m.F[k] = 0.0;
            continue;
        }
        if (part.is_mid(i)) {
            const double rate_n = P - i;
            m.Eslack[k] = pw > 0 ? -std::expm1(-rate_n * prof.w[k] / pw) * pw / rate_n : 0.0;
            m.F[k] = i;
        } else {
            m.Eslack[k] = 0.0;
            m.F[k] = 1.0 + (cw + e) / p.cc;
        }
        m.Q[k] = m.Eslack[k] + p.cc + cw + e + p.cc;
    }
    return m;
}

struct MarkovArtifacts {
    ContentionPartition partition;
    InternalProfile profile;
    Matrix M;
    std::vector<double> v;
    std::vector<double> Q;
    std::vector<double> F;
    std::vector<double> Eslack;
    StationaryMethod method = StationaryMethod::Recurrence;
    double stationary_residual = 0;
};

struct MarkovResult {
    Prediction prediction;
    MarkovArtifacts artifacts;
};

/// Builds the chain and returns throughput 1/(v.Q), failures v.F and
/// occupancy sum(i v_i). Requires exponential parallel work and constant
/// critical work.
inline MarkovResult predict_markov(const PlatformParams& p, const WorkloadParams& w) {
    validate_platform(p);
    if (w.pw_dist.kind != DistKind::Exponential)
        throw validation_error("pw_dist",
                               "markov model requires exponential parallel work; use the "
                               "average-based model for other distributions");
    if (w.cw_dist.kind != DistKind::Constant)
        throw validation_error("cw_dist",
                               "markov model requires constant critical work; use the "
                               "average-based model for other distributions");
    validate_workload(w);

    MarkovResult r;
    auto& a = r.artifacts;
    a.partition = contention_partition(p, w.cw_mean);
    a.profile = internal_profile(a.partition, p, w.cw_mean);
    const auto ab = arrival_probs(a.partition, a.profile, p, w.pw_mean);
    a.M = transition_matrix(ab, p.P);
    auto st = stationary(a.M);
    a.v = std::move(st.v);
    a.method = st.method;
    a.stationary_residual = st.residual;
    auto sm = state_metrics(a.partition, a.profile, p, w);
    a.Q = std::move(sm.Q);
    a.F = std::move(sm.F);
    a.Eslack = std::move(sm.Eslack);

    double period = 0, fails = 0, occ = 0, hi_mass = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        period += a.v[i] * a.Q[i];
        fails += a.v[i] * a.F[i];
        occ += a.v[i] * static_cast<double>(i);
        if (a.partition.is_hi(static_cast<int>(i))) hi_mass += a.v[i];
    }
    r.prediction.throughput = 1.0 / period;
    r.prediction.fails_per_success = fails;
    r.prediction.mean_retry_occupancy = occ;
    r.prediction.mode = a.v[0] >= 1.0 - 1e-12 ? ContentionMode::NonContended
                        : hi_mass >= 1.0 - 1e-12 ? ContentionMode::Contended
                                                 : ContentionMode::Mixed;
    return r;
}

inline Prediction predict(const PlatformParams& p, const WorkloadParams& w) {
    return predict_markov(p, w).prediction;
}

}  // namespace lfperf::markov

#endif  // LFPERF_MARKOV_MODEL_HPP
