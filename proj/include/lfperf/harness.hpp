// Real-hardware micro-benchmarks: a CAS-loop counter and a Treiber stack
// with calibrated parallel/critical work, plus CAS and Read latency
// calibration. Numbers depend entirely on the host.

#ifndef LFPERF_HARNESS_HPP
#define LFPERF_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#define LFPERF_HAVE_TSC 1
#endif

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "model_core.hpp"

namespace lfperf::harness {

/// Cycle counter: TSC where available, otherwise steady_clock nanoseconds.
inline std::uint64_t ticks() {
#ifdef LFPERF_HAVE_TSC
    return __rdtsc();
#else
    return static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count());
#endif
}

/// Serialized read of the cycle counter, for timing single operations.
inline std::uint64_t ticks_fenced() {
#ifdef LFPERF_HAVE_TSC
    _mm_lfence();
    const auto t = __rdtsc();
    _mm_lfence();
    return t;
#else
    std::atomic_thread_fence(std::memory_order_seq_cst);
    return ticks();
#endif
}

inline void cpu_relax() {
#ifdef LFPERF_HAVE_TSC
    _mm_pause();
#else
    std::this_thread::yield();
#endif
}

/// Tick rate of `ticks()`, measured against steady_clock at startup.
struct Clock {
    double ticks_per_ns = 1.0;
    std::uint64_t resolution = 1;  ///< smallest observed positive tick step

    static Clock measure(std::chrono::milliseconds window = std::chrono::milliseconds(20)) {
        Clock c;
        std::uint64_t res = ~0ULL;
        for (int i = 0; i < 1000; ++i) {
            const auto a = ticks();
            auto b = ticks();
            while (b == a) b = ticks();
            res = std::min(res, b - a);
        }
        c.resolution = res;
        const auto t0 = std::chrono::steady_clock::now();
        const auto k0 = ticks();
        while (std::chrono::steady_clock::now() - t0 < window) cpu_relax();
        const auto k1 = ticks();
        const auto ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0);
        c.ticks_per_ns = static_cast<double>(k1 - k0) / ns.count();
        return c;
    }
};

/// Busy-waits `n` ticks with pause instructions, like the pause loop of
/// the synthetic benchmark.
inline void spin_ticks(std::uint64_t n) {
    if (n == 0) return;
    const auto end = ticks() + n;
    while (ticks() < end) cpu_relax();
}

/// Pins the calling thread to `cpu`. Returns false when unsupported or
/// refused.
inline bool pin_current_thread(int cpu) {
#if defined(__linux__)
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
    (void)cpu;
    return false;
#endif
}

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// ---------------------------------------------------------------------
// Calibration

struct Calibration {
    double cc_cycles = 0;
    double rc_cycles = 0;
    double cc_local_cycles = 0;  ///< same-core control, line already owned
    double rc_local_cycles = 0;
    double unit_cycles = 50;
    std::uint64_t trials = 0;
    std::uint64_t timer_resolution = 1;
    double tick_ghz = 0;  ///< counter ticks per nanosecond
    bool pinned = false;
    bool review = false;  ///< cc < rc measured; the models assume cc >= rc

    PlatformParams platform(int P) const {
        return {P, cc_cycles / unit_cycles, rc_cycles / unit_cycles, unit_cycles};
    }
};

class calibration_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct alignas(64) Line {
    std::atomic<std::uint64_t> v{0};
};

inline double median(std::vector<std::uint64_t>& xs) {
    if (xs.empty()) return 0;
    const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
    std::nth_element(xs.begin(), mid, xs.end());
    return static_cast<double>(*mid);
}

}  // namespace detail

/// Measures cc and rc in cycles. In each trial the peer thread writes the
/// data line, then hands over through a flag line; the measuring thread
/// times one CAS (or one load) on the freshly remote line. Medians over
/// `trials`. Needs two hardware threads.
inline Calibration calibrate(std::uint64_t trials = 100000, double unit_cycles = 50,
                             int cpu_a = 0, int cpu_b = 1) {
    if (hardware_threads() < 2)
        throw calibration_error("calibration needs at least 2 hardware threads");
    const Clock clk = Clock::measure();
    if (clk.resolution > 64)
        throw calibration_error("timer resolution too coarse: " + std::to_string(clk.resolution) +
                                " ticks");
    Calibration cal;
    cal.unit_cycles = unit_cycles;
    cal.trials = trials;
    cal.timer_resolution = clk.resolution;

    detail::Line data, flag;
    std::vector<std::uint64_t> cas_t, read_t, cas_local, read_local;
    cas_t.reserve(trials), read_t.reserve(trials), cas_local.reserve(trials), read_local.reserve(trials);
    std::atomic<bool> peer_pinned{false};

    // flag protocol: measurer sets odd to request, peer writes data and
    // sets the next even value.
    std::thread peer([&] {
        peer_pinned = pin_current_thread(cpu_b);
        for (std::uint64_t k = 0; k < 2 * trials; ++k) {
            const std::uint64_t want = 2 * k + 1;
            while (flag.v.load(std::memory_order_acquire) != want) cpu_relax();
            data.v.store(k, std::memory_order_relaxed);
            flag.v.store(want + 1, std::memory_order_release);
        }
    });
    const bool self_pinned = pin_current_thread(cpu_a);
    std::uint64_t k = 0;
    auto handover = [&] {
        const std::uint64_t want = 2 * k + 1;
        flag.v.store(want, std::memory_order_release);
        while (flag.v.load(std::memory_order_acquire) != want + 1) cpu_relax();
        ++k;
    };
    for (std::uint64_t t = 0; t < trials; ++t) {
        // Read of a line the peer just wrote, then the same Read again
        // with the line now cached here.
        handover();
        auto t0 = ticks_fenced();
        std::uint64_t seen = data.v.load(std::memory_order_relaxed);
        auto t1 = ticks_fenced();
        read_t.push_back(t1 - t0);
        t0 = ticks_fenced();
        seen += data.v.load(std::memory_order_relaxed);
        t1 = ticks_fenced();
        read_local.push_back(t1 - t0);

        // Same for a CAS; its outcome does not matter, it needs the line
        // in exclusive mode either way.
        handover();
        t0 = ticks_fenced();
        data.v.compare_exchange_strong(seen, seen + 1);
        t1 = ticks_fenced();
        cas_t.push_back(t1 - t0);
        t0 = ticks_fenced();
        data.v.compare_exchange_strong(seen, seen + 1);
        t1 = ticks_fenced();
        cas_local.push_back(t1 - t0);
    }
    peer.join();

    // TSC ticks are taken as core cycles (invariant TSC at nominal rate).
    cal.cc_cycles = detail::median(cas_t);
    cal.rc_cycles = detail::median(read_t);
    cal.cc_local_cycles = detail::median(cas_local);
    cal.rc_local_cycles = detail::median(read_local);
    cal.tick_ghz = clk.ticks_per_ns;
    cal.pinned = self_pinned && peer_pinned;
    cal.review = cal.cc_cycles < cal.rc_cycles;
    return cal;
}

// ---------------------------------------------------------------------
// Benchmarks

enum class Structure { Counter, Stack };

inline std::string_view to_string(Structure s) { return s == Structure::Counter ? "counter" : "stack"; }

inline Structure parse_structure(std::string_view s) {
    if (s == "counter") return Structure::Counter;
    if (s == "stack") return Structure::Stack;
    throw validation_error("structure", "unknown structure '" + std::string(s) + "'");
}

struct BenchConfig {
    Structure structure = Structure::Counter;
    int threads = 1;
    double pw = 0;       ///< uow, constant
    double cw = 1;       ///< uow, constant
    double backoff = 0;  ///< uow added to each parallel section
    double duration_s = 0.2;
    bool pin = true;
    double unit_cycles = 50;
    std::size_t stack_nodes = 1024;  ///< preallocated nodes, all pushed initially
    std::size_t stride = 1;          ///< node index stride when building the stack
};

struct BenchStats {
    std::vector<std::uint64_t> successes;  ///< per thread
    std::vector<std::uint64_t> failures;   ///< per thread
    std::uint64_t total_successes = 0;
    std::uint64_t total_failures = 0;
    double seconds = 0;
    double ops_per_second = 0;
    double throughput_uow = 0;  ///< successes per uow of elapsed wall time
    double fails_per_success = 0;
    double occupancy = 0;  ///< mean threads inside the retry loop
    bool pinned = true;
    std::vector<std::string> warnings;
    bool conservation_ok = false;
    std::int64_t pushes = 0, pops = 0;
    std::int64_t initial_depth = 0, final_depth = 0;
    std::uint64_t counter_value = 0;
};

namespace detail {

constexpr std::uint32_t kNil = 0xFFFFFFFFu;

/// Treiber stack over preallocated nodes. The head packs a node index
/// and a modification tag so a recycled node cannot fool a stale CAS.
class TreiberStack {
public:
    explicit TreiberStack(std::size_t n) : next_(n) {
        for (auto& x : next_) x.store(kNil, std::memory_order_relaxed);
    }

    static std::uint32_t index(std::uint64_t h) { return static_cast<std::uint32_t>(h); }
    static std::uint64_t pack(std::uint32_t idx, std::uint64_t tag) {
        return (tag << 32) | idx;
    }

    std::atomic<std::uint64_t>& head() { return head_; }
    std::atomic<std::uint32_t>& next(std::uint32_t i) { return next_[i]; }

    void push_unsync(std::uint32_t i) {
        next_[i].store(index(head_.load(std::memory_order_relaxed)), std::memory_order_relaxed);
        head_.store(pack(i, 0), std::memory_order_relaxed);
    }

    std::int64_t depth() const {
        std::int64_t d = 0;
        for (auto i = index(head_.load()); i != kNil; i = next_[i].load()) ++d;
        return d;
    }

private:
    alignas(64) std::atomic<std::uint64_t> head_{pack(kNil, 0)};
    std::vector<std::atomic<std::uint32_t>> next_;
};

}  // namespace detail

inline void validate(const BenchConfig& c) {
    lfperf::detail::require(c.threads >= 1, "threads", "threads >= 1 required");
    lfperf::detail::require(c.pw >= 0 && c.cw >= 0 && c.backoff >= 0, "pw",
                            "work sizes must be >= 0");
    lfperf::detail::require(c.duration_s > 0, "duration", "duration > 0 required");
    lfperf::detail::require(c.stack_nodes >= 1 && c.stack_nodes < detail::kNil, "stack_nodes",
                            "stack_nodes out of range");
    lfperf::detail::require(c.stride >= 1, "stride", "stride >= 1 required");
}

/// Runs the benchmark for `duration_s` seconds. Each operation spins the
/// parallel section, then retries Read / critical spin / CAS until the
/// CAS succeeds; a failed CAS hands back the fresh value, so the retry
/// skips the Read.
inline BenchStats bench(const BenchConfig& cfg) {
    validate(cfg);
    const double ticks_per_uow = cfg.unit_cycles;  // TSC ticks taken as cycles
    const auto pw_ticks = static_cast<std::uint64_t>((cfg.pw + cfg.backoff) * ticks_per_uow);
    const auto cw_ticks = static_cast<std::uint64_t>(cfg.cw * ticks_per_uow);

    BenchStats st;
    const auto n = static_cast<std::size_t>(cfg.threads);
    st.successes.assign(n, 0);
    st.failures.assign(n, 0);
    std::vector<std::uint64_t> loop_ticks(n, 0);
    std::vector<std::int64_t> pushes(n, 0), pops(n, 0);

    alignas(64) std::atomic<std::uint64_t> counter{0};
    detail::TreiberStack stack(cfg.stack_nodes);
    if (cfg.structure == Structure::Stack) {
        // Visit indices with the requested stride so neighbours in the
        // list are not neighbours in memory.
        std::vector<bool> used(cfg.stack_nodes, false);
        std::size_t at = 0;
        for (std::size_t k = 0; k < cfg.stack_nodes; ++k) {
            while (used[at]) at = (at + 1) % cfg.stack_nodes;
            used[at] = true;
            stack.push_unsync(static_cast<std::uint32_t>(at));
            at = (at + cfg.stride) % cfg.stack_nodes;
        }
        st.initial_depth = stack.depth();
    }

    const int hw = hardware_threads();
    if (cfg.threads > hw) st.warnings.push_back("oversubscribed: more threads than hardware threads");

    std::atomic<bool> go{false}, stop{false};
    std::atomic<int> pin_failures{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) {
        pool.emplace_back([&, t] {
            if (cfg.pin && !pin_current_thread(static_cast<int>(t) % hw)) ++pin_failures;
            std::vector<std::uint32_t> held;
            bool want_pop = true;
            while (!go.load(std::memory_order_acquire)) cpu_relax();
            while (!stop.load(std::memory_order_relaxed)) {
                spin_ticks(pw_ticks);
                const auto enter = ticks();
                if (cfg.structure == Structure::Counter) {
                    auto cur = counter.load(std::memory_order_acquire);
                    for (;;) {
                        spin_ticks(cw_ticks);
                        if (counter.compare_exchange_strong(cur, cur + 1)) break;
                        ++st.failures[t];
                    }
                } else {
                    const bool pop = want_pop || held.empty();
                    auto h = stack.head().load(std::memory_order_acquire);
                    for (;;) {
                        spin_ticks(cw_ticks);
                        std::uint64_t desired;
                        const auto top = detail::TreiberStack::index(h);
                        const auto tag = (h >> 32) + 1;
                        if (pop) {
                            if (top == detail::kNil) break;  // empty: nothing to do
                            desired = detail::TreiberStack::pack(
                                stack.next(top).load(std::memory_order_relaxed), tag);
                        } else {
                            stack.next(held.back()).store(top, std::memory_order_relaxed);
                            desired = detail::TreiberStack::pack(held.back(), tag);
                        }
                        if (stack.head().compare_exchange_strong(h, desired)) {
                            if (pop) held.push_back(top), ++pops[t];
                            else held.pop_back(), ++pushes[t];
                            break;
                        }
                        ++st.failures[t];
                    }
                    want_pop = !want_pop;
                }
                loop_ticks[t] += ticks() - enter;
                ++st.successes[t];
            }
        });
    }
    const auto t0 = ticks();
    const auto w0 = std::chrono::steady_clock::now();
    go.store(true, std::memory_order_release);
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg.duration_s));
    stop.store(true, std::memory_order_relaxed);
    for (auto& th : pool) th.join();
    const auto elapsed_ticks = ticks() - t0;
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();

    st.pinned = cfg.pin && pin_failures.load() == 0;
    if (cfg.pin && !st.pinned) st.warnings.push_back("pinning unavailable: ran unpinned");
    std::uint64_t loop_total = 0;
    for (std::size_t t = 0; t < n; ++t) {
        st.total_successes += st.successes[t];
        st.total_failures += st.failures[t];
        loop_total += loop_ticks[t];
        st.pushes += pushes[t];
        st.pops += pops[t];
    }
    st.ops_per_second = static_cast<double>(st.total_successes) / st.seconds;
    st.throughput_uow = static_cast<double>(st.total_successes) /
                        (static_cast<double>(elapsed_ticks) / ticks_per_uow);
    st.fails_per_success = st.total_successes == 0
                               ? 0.0
                               : static_cast<double>(st.total_failures) /
                                     static_cast<double>(st.total_successes);
    st.occupancy = static_cast<double>(loop_total) / static_cast<double>(elapsed_ticks);
    if (cfg.structure == Structure::Counter) {
        st.counter_value = counter.load();
        st.conservation_ok = st.counter_value == st.total_successes;
    } else {
        st.final_depth = stack.depth();
        // Empty-stack pops count as completed operations without a CAS.
        st.conservation_ok = st.pushes - st.pops == st.final_depth - st.initial_depth;
    }
    return st;
}

}  // namespace lfperf::harness

#endif  // LFPERF_HARNESS_HPP
