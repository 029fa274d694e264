// Discrete-event simulator of P threads running a CAS retry loop on one
// shared cache line.
//
// Each thread alternates a parallel section and a retry loop. A retry
// loop begins with a Read of the access point (rc), then critical work,
// then a CAS (cc). The line serves one transfer at a time; when it frees
// up, every waiting requester (CAS or Read) is equally likely to get it.
// A CAS succeeds iff the version it read is still current. A failed CAS
// returns the current version, so the next retry starts its critical
// work immediately.

#ifndef LFPERF_SIMULATOR_HPP
#define LFPERF_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <vector>

#include "model_core.hpp"

namespace lfperf::sim {

struct SimConfig {
    PlatformParams platform;
    WorkloadParams workload;
    std::uint64_t seed = 1;
    std::size_t warmup_successes = 10000;
    std::size_t measured_successes = 100000;
    double backoff = 0.0;  ///< constant uow added to every parallel section

    bool record_failure_trace = false;  ///< keep per-success-period failure counts
    bool record_log = false;            ///< keep the full segment log (tests only)
};

enum class Segment { Parallel, ReadWait, Read, Critical, CasWait, Cas };

/// One contiguous piece of a thread's timeline.
struct SegmentRecord {
    int thread;
    Segment kind;
    double begin;
    double end;
    bool success = false;  ///< Cas segments only
};

struct SimStats {
    double throughput = 0;         ///< successes per uow
    double fails_per_success = 0;
    double mean_retry_occupancy = 0;
    double mean_slack = 0;            ///< uow from a success to the next access
    double mean_expansion_delay = 0;  ///< uow a successful CAS waited for the line
    double stderr_throughput = 0;     ///< batch means, 20 batches
    std::size_t successes = 0;
    std::size_t failures = 0;
    double elapsed = 0;  ///< measured model time

    std::uint64_t initial_version = 0;
    std::uint64_t final_version = 0;
    std::size_t total_successes = 0;  ///< including warmup
    std::size_t max_concurrent_cas = 0;

    std::vector<std::uint32_t> failure_trace;
    std::vector<SegmentRecord> log;
};

namespace detail {

enum class EventKind { ParallelDone, ReadDone, CriticalDone, CasDone, Arbitrate };

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    int thread;

    bool operator>(const Event& o) const {
        if (time != o.time) return time > o.time;
        return seq > o.seq;
    }
};

enum class LineState { Free, Busy, Arbitrating };

struct Request {
    int thread;
    bool is_cas;
    double since;
};

struct ThreadState {
    std::mt19937_64 rng;
    std::uint64_t version_read = 0;
    Segment segment = Segment::Parallel;
    double segment_begin = 0;
    double cas_request_time = 0;
};

class Engine {
public:
    explicit Engine(const SimConfig& cfg) : cfg_(cfg), P_(cfg.platform.P) {
        arbiter_.seed(split_seed(cfg.seed, 0));
        threads_.resize(static_cast<std::size_t>(P_));
        for (int t = 0; t < P_; ++t) {
            auto& th = threads_[static_cast<std::size_t>(t)];
            th.rng.seed(split_seed(cfg.seed, static_cast<std::uint64_t>(t) + 1));
            th.segment = Segment::Parallel;
            th.segment_begin = 0;
            push(parallel_duration(th), EventKind::ParallelDone, t);
        }
        stats_.initial_version = version_;
        const std::size_t batch = std::max<std::size_t>(1, cfg_.measured_successes / kBatches);
        batch_size_ = batch;
    }

    SimStats run() {
        const std::size_t target = cfg_.warmup_successes + cfg_.measured_successes;
        if (cfg_.warmup_successes == 0) begin_measurement(0.0);
        while (total_successes_ < target && !queue_.empty()) {
            const Event ev = queue_.top();
            queue_.pop();
            advance(ev.time);
            dispatch(ev);
        }
        return finish();
    }

private:
    static constexpr std::size_t kBatches = 20;

    void push(double t, EventKind k, int thread) { queue_.push({t, seq_++, k, thread}); }

    double parallel_duration(ThreadState& th) {
        return sample(cfg_.workload.pw_dist, th.rng) + cfg_.backoff;
    }
    double critical_duration(ThreadState& th) { return sample(cfg_.workload.cw_dist, th.rng); }

    void advance(double t) {
        if (measuring_) occupancy_integral_ += static_cast<double>(in_loop_) * (t - now_);
        now_ = t;
    }

    void set_segment(int t, Segment s, bool success = false) {
        auto& th = threads_[static_cast<std::size_t>(t)];
        if (cfg_.record_log && now_ > th.segment_begin)
            stats_.log.push_back({t, th.segment, th.segment_begin, now_, success});
        th.segment = s;
        th.segment_begin = now_;
    }

    void note_access() {
        if (awaiting_access_) {
            awaiting_access_ = false;
            if (measuring_) slack_sum_ += now_ - last_success_time_;
        }
    }

    void dispatch(const Event& ev) {
        if (ev.kind == EventKind::Arbitrate) {
            arbitrate();
            return;
        }
        auto& th = threads_[static_cast<std::size_t>(ev.thread)];
        switch (ev.kind) {
        case EventKind::ParallelDone:
            ++in_loop_;
            request(ev.thread, false);
            break;
        case EventKind::ReadDone:
            th.version_read = version_;
            set_segment(ev.thread, Segment::Critical);
            push(now_ + critical_duration(th), EventKind::CriticalDone, ev.thread);
            release();
            break;
        case EventKind::CriticalDone:
            th.cas_request_time = now_;
            request(ev.thread, true);
            break;
        case EventKind::CasDone:
            --cas_in_flight_;
            complete_cas(ev.thread);
            release();
            break;
        case EventKind::Arbitrate:
            break;
        }
    }

    void request(int t, bool is_cas) {
        if (line_ == LineState::Free) {
            grant({t, is_cas, now_});
            return;
        }
        set_segment(t, is_cas ? Segment::CasWait : Segment::ReadWait);
        waiting_.push_back({t, is_cas, now_});
    }

    void grant(const Request& r) {
        line_ = LineState::Busy;
        note_access();
        if (r.is_cas) {
            set_segment(r.thread, Segment::Cas);
            ++cas_in_flight_;
            stats_.max_concurrent_cas = std::max(stats_.max_concurrent_cas, cas_in_flight_);
            push(now_ + cfg_.platform.cc, EventKind::CasDone, r.thread);
        } else {
            set_segment(r.thread, Segment::Read);
            push(now_ + cfg_.platform.rc, EventKind::ReadDone, r.thread);
        }
    }

    // Requests arriving at the same instant as the release join the draw.
    void release() {
        if (waiting_.empty()) {
            line_ = LineState::Free;
            return;
        }
        line_ = LineState::Arbitrating;
        push(now_, EventKind::Arbitrate, -1);
    }

    void arbitrate() {
        if (waiting_.empty()) {
            line_ = LineState::Free;
            return;
        }
        std::uniform_int_distribution<std::size_t> pick(0, waiting_.size() - 1);
        const std::size_t idx = pick(arbiter_);
        const Request r = waiting_[idx];
        waiting_[idx] = waiting_.back();
        waiting_.pop_back();
        grant(r);
    }

    void complete_cas(int t) {
        auto& th = threads_[static_cast<std::size_t>(t)];
        if (th.version_read == version_) {
            ++version_;
            set_segment(t, Segment::Parallel, true);
            --in_loop_;
            on_success(now_ - cfg_.platform.cc - th.cas_request_time);
            push(now_ + parallel_duration(th), EventKind::ParallelDone, t);
        } else {
            if (measuring_) {
                ++failures_;
                ++period_failures_;
            }
            th.version_read = version_;
            set_segment(t, Segment::Critical, false);
            push(now_ + critical_duration(th), EventKind::CriticalDone, t);
        }
    }

    void on_success(double line_wait) {
        ++total_successes_;
        if (measuring_) {
            ++successes_;
            expansion_sum_ += line_wait;
            if (cfg_.record_failure_trace) stats_.failure_trace.push_back(period_failures_);
            period_failures_ = 0;
            if (successes_ % batch_size_ == 0 && batch_rates_.size() < kBatches) {
                batch_rates_.push_back(static_cast<double>(batch_size_) / (now_ - batch_start_));
                batch_start_ = now_;
            }
        } else if (total_successes_ == cfg_.warmup_successes) {
            begin_measurement(now_);
        }
        last_success_time_ = now_;
        awaiting_access_ = true;
    }

    void begin_measurement(double t) {
        measuring_ = true;
        measure_start_ = t;
        batch_start_ = t;
        occupancy_integral_ = 0;
        period_failures_ = 0;
    }

    SimStats finish() {
        SimStats& s = stats_;
        s.successes = successes_;
        s.failures = failures_;
        s.elapsed = now_ - measure_start_;
        s.throughput = s.elapsed > 0 ? static_cast<double>(successes_) / s.elapsed : 0.0;
        s.fails_per_success =
            successes_ ? static_cast<double>(failures_) / static_cast<double>(successes_) : 0.0;
        s.mean_retry_occupancy = s.elapsed > 0 ? occupancy_integral_ / s.elapsed : 0.0;
        s.mean_slack = successes_ ? slack_sum_ / static_cast<double>(successes_) : 0.0;
        s.mean_expansion_delay =
            successes_ ? expansion_sum_ / static_cast<double>(successes_) : 0.0;
        if (batch_rates_.size() >= 2) {
            double mean = 0;
            for (double r : batch_rates_) mean += r;
            mean /= static_cast<double>(batch_rates_.size());
            double var = 0;
            for (double r : batch_rates_) var += (r - mean) * (r - mean);
            var /= static_cast<double>(batch_rates_.size() - 1);
            s.stderr_throughput = std::sqrt(var / static_cast<double>(batch_rates_.size()));
        }
        s.final_version = version_;
        s.total_successes = total_successes_;
        if (cfg_.record_log) {
            for (int t = 0; t < P_; ++t) {
                auto& th = threads_[static_cast<std::size_t>(t)];
                if (now_ > th.segment_begin)
                    s.log.push_back({t, th.segment, th.segment_begin, now_, false});
            }
        }
        return std::move(s);
    }

    SimConfig cfg_;
    int P_;
    std::vector<ThreadState> threads_;
    std::mt19937_64 arbiter_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0;

    LineState line_ = LineState::Free;
    std::vector<Request> waiting_;
    std::size_t cas_in_flight_ = 0;
    std::uint64_t version_ = 0;
    int in_loop_ = 0;

    bool measuring_ = false;
    double measure_start_ = 0;
    std::size_t total_successes_ = 0;
    std::size_t successes_ = 0;
    std::size_t failures_ = 0;
    std::uint32_t period_failures_ = 0;
    double occupancy_integral_ = 0;
    double slack_sum_ = 0;
    double expansion_sum_ = 0;
    double last_success_time_ = 0;
    bool awaiting_access_ = false;
    std::size_t batch_size_ = 1;
    double batch_start_ = 0;
    std::vector<double> batch_rates_;

    SimStats stats_;
};

}  // namespace detail

inline void validate(const SimConfig& c) {
    validate_platform(c.platform);
    validate_workload(c.workload);
    if (c.measured_successes < 1000)
        throw validation_error("measured_successes", "measured_successes >= 1000 required");
    if (!(c.backoff >= 0) || !std::isfinite(c.backoff))
        throw validation_error("backoff", "backoff >= 0 required");
}

/// Runs one simulation. Deterministic for a given config.
inline SimStats run(const SimConfig& cfg) {
    validate(cfg);
    return detail::Engine(cfg).run();
}

struct SweepRow {
    SimConfig config;
    SimStats stats;
};

/// Independent run per grid point; point k uses split_seed(base_seed, k).
/// Output order matches input order.
inline std::vector<SweepRow> sweep(const std::vector<SimConfig>& grid, std::uint64_t base_seed) {
    if (grid.empty()) throw validation_error("grid", "sweep needs a nonempty grid");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        SimConfig c = grid[k];
        c.seed = split_seed(base_seed, k);
        rows.push_back({c, run(c)});
    }
    return rows;
}

}  // namespace lfperf::sim

#endif  // LFPERF_SIMULATOR_HPP
