// Acceptance run: one PASS/FAIL line per criterion A1..A7, followed by
// indented detail. Exits nonzero if any criterion fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lfperf/lfperf.hpp"
#include "oracles.hpp"

using namespace lfperf;

namespace {

constexpr std::uint64_t kSeed = 20240611;
constexpr std::size_t kSuccesses = 100000;

const double kCc = 1.5, kRc = 1.0;

PlatformParams platform(int P) { return {P, kCc, kRc, 50}; }

struct Point {
    int P;
    double cw, pw;
    sim::SimStats sim;
};

std::vector<double> pw_grid() {
    std::vector<double> g;
    for (int k = 0; k < 12; ++k) g.push_back(0.1 * std::pow(1e4, k / 11.0));
    return g;
}

sim::SimConfig sim_config(int P, double cw, double pw) {
    sim::SimConfig c;
    c.platform = platform(P);
    c.workload = WorkloadParams::canonical(cw, pw);
    c.warmup_successes = 10000;
    c.measured_successes = kSuccesses;
    return c;
}

std::vector<Point> run_grid() {
    std::vector<sim::SimConfig> cfgs;
    for (int P : {4, 8})
        for (double cw : {1.0, 4.0, 8.0})
            for (double pw : pw_grid()) cfgs.push_back(sim_config(P, cw, pw));
    std::vector<Point> pts;
    for (const auto& row : sim::sweep(cfgs, kSeed))
        pts.push_back({row.config.platform.P, row.config.workload.cw_mean, row.config.workload.pw_mean, row.stats});
    return pts;
}

int failures = 0;

void verdict(const char* id, bool ok, const std::string& summary) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id, summary.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void detail(const char* fmt, auto... args) {
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel(double model, double ref) { return std::abs(model - ref) / ref; }

void a1(const std::vector<Point>& pts) {
    int within10 = 0, within20 = 0, fails_ok = 0;
    double worst_tp = 0;
    for (const auto& q : pts) {
        const auto m = markov::predict(platform(q.P), WorkloadParams::canonical(q.cw, q.pw));
        const double e = rel(m.throughput, q.sim.throughput);
        const double fe = std::abs(m.fails_per_success - q.sim.fails_per_success);
        const bool fok = fe <= std::max(0.3, 0.25 * q.sim.fails_per_success);
        within10 += e <= 0.10;
        within20 += e <= 0.20;
        fails_ok += fok;
        worst_tp = std::max(worst_tp, e);
        detail("P=%d cw=%-2g pw=%-9.4g sim T=%.5f fails=%.3f | markov T=%.5f (%+.1f%%) fails=%.3f%s", q.P, q.cw,
               q.pw, q.sim.throughput, q.sim.fails_per_success, m.throughput,
               100 * (m.throughput / q.sim.throughput - 1), m.fails_per_success, fok ? "" : "  <- fails");
    }
    const int n = static_cast<int>(pts.size());
    const bool ok = within10 >= 0.9 * n && within20 == n && fails_ok == n;
    verdict("A1", ok,
            fmt("markov throughput within 10%% on %d/%d (need >= %d), within 20%% on %d/%d (worst %.1f%%); "
                "fails within max(0.3, 25%%) on %d/%d",
                within10, n, static_cast<int>(std::ceil(0.9 * n)), within20, n, 100 * worst_tp, fails_ok, n));
}

void a2(const std::vector<Point>& pts) {
    int within20 = 0, extreme = 0, extreme_ok = 0;
    std::vector<std::string> misses;
    for (const auto& q : pts) {
        const auto a = avg::predict(platform(q.P), WorkloadParams::canonical(q.cw, q.pw));
        const double e = rel(a.throughput, q.sim.throughput);
        within20 += e <= 0.20;
        const bool non_contended = q.pw >= 100 * q.cw;
        const bool contended = q.pw <= 0.1 * q.cw && q.cw >= 8;
        if (non_contended || contended) {
            ++extreme;
            if (e <= 0.05) ++extreme_ok;
            else misses.push_back(fmt("P=%d cw=%g pw=%.4g %s: %+.1f%%", q.P, q.cw, q.pw,
                                      contended ? "contended" : "non-contended",
                                      100 * (a.throughput / q.sim.throughput - 1)));
        }
    }
    const int n = static_cast<int>(pts.size());
    for (const auto& m : misses) detail("outside 5%%: %s", m.c_str());
    verdict("A2", within20 >= 0.85 * n && extreme_ok == extreme,
            fmt("avg throughput within 20%% on %d/%d (need >= %d); extremes within 5%% on %d/%d", within20, n,
                static_cast<int>(std::ceil(0.85 * n)), extreme_ok, extreme));
}

void a3(const std::vector<Point>& pts) {
    double worst_row = 0, worst_resid = 0, worst_bound = -INFINITY;
    for (const auto& q : pts) {
        const auto p = platform(q.P);
        const auto w = WorkloadParams::canonical(q.cw, q.pw);
        const auto r = markov::predict_markov(p, w);
        const auto& M = r.artifacts.M;
        for (std::size_t i = 0; i < M.size(); ++i) {
            double s = 0;
            for (std::size_t j = 0; j < M.size(); ++j) s += M(i, j);
            worst_row = std::max(worst_row, std::abs(s - 1));
        }
        worst_resid = std::max(worst_resid, markov::stationary_residual(M, r.artifacts.v));
        const double ub = avg::upper_bound(p, w);
        worst_bound = std::max({worst_bound, r.prediction.throughput / ub - 1, avg::predict(p, w).throughput / ub - 1});
    }
    detail("max |row sum - 1| = %.3g, max stationary residual = %.3g, max T/bound - 1 = %.3g", worst_row,
           worst_resid, worst_bound);

    double worst_p1 = 0;
    const std::size_t n_p1 = 15;
    std::size_t k = 0;
    for (double cw : {1.0, 4.0, 8.0})
        for (double pw : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
            auto c = sim_config(1, cw, pw);
            c.seed = split_seed(kSeed + 1, k++);
            const auto s = sim::run(c);
            const auto w = WorkloadParams::canonical(cw, pw);
            const double ea = rel(avg::predict(platform(1), w).throughput, s.throughput);
            const double em = rel(markov::predict(platform(1), w).throughput, s.throughput);
            worst_p1 = std::max({worst_p1, ea, em});
            detail("P=1 cw=%g pw=%g: sim %.6f, avg %+.2f%%, markov %+.2f%%", cw, pw, s.throughput, 100 * ea,
                   100 * em);
        }
    const bool ok = worst_row <= 1e-12 && worst_resid < 1e-10 && worst_bound <= 1e-12 && worst_p1 <= 0.01;
    verdict("A3", ok,
            fmt("row sums %.2g, residual %.2g, bound excess %.2g, P=1 worst %.2f%% over %zu points", worst_row,
                worst_resid, std::max(0.0, worst_bound), 100 * worst_p1, n_p1));
}

void a4() {
    const auto p = platform(8);
    const double cw = 1, pw = 0.1;
    const auto advice = advisor::constant_backoff(p, WorkloadParams::canonical(cw, pw), ModelKind::Markov);

    auto at = [&](double pw_mean, double backoff, std::uint64_t idx) {
        auto c = sim_config(8, cw, pw_mean);
        c.backoff = backoff;
        c.seed = split_seed(kSeed + 2, idx);
        return sim::run(c);
    };
    const auto base = at(pw, 0, 0);
    const auto backed = at(pw, advice.backoff, 1);
    const auto peak = at(advice.peak.pw_star, 0, 2);
    const double se = std::hypot(backed.stderr_throughput, base.stderr_throughput);
    const bool reach = backed.throughput >= 0.95 * peak.throughput;
    const bool gain = backed.throughput - base.throughput > 2 * se;
    detail("pw*=%.4g, back-off %.4g uow; sim T: none %.5f, backed-off %.5f, at pw* %.5f (ratio %.3f)",
           advice.peak.pw_star, advice.backoff, base.throughput, backed.throughput, peak.throughput,
           backed.throughput / peak.throughput);

    // Closed loop: each window runs the simulator with the back-off in
    // force and feeds its last 64 per-success failure counts back.
    double b = 0;
    std::string path;
    for (int k = 0; k < 10; ++k) {
        auto c = sim_config(8, cw, pw);
        c.backoff = b;
        c.warmup_successes = 2000;
        c.measured_successes = 1000;
        c.record_failure_trace = true;
        c.seed = split_seed(kSeed + 3, static_cast<std::uint64_t>(k));
        const auto s = sim::run(c);
        const std::vector<double> window(s.failure_trace.end() - advisor::kDefaultWindow, s.failure_trace.end());
        b = advisor::adaptive_backoff(window, p, cw, ModelKind::Markov, b).backoff;
        path += fmt(" %.3g", b);
    }
    const bool converged = std::abs(b - advice.backoff) <= 0.2 * advice.backoff;
    detail("adaptive back-off by window:%s (target %.4g)", path.c_str(), advice.backoff);
    verdict("A4", reach && gain && converged,
            fmt("backed-off/peak %.3f (need >= 0.95), gain %.2f se (need > 2), adaptive after 10 windows "
                "%.3g vs %.3g (%+.0f%%, need within 20%%)",
                backed.throughput / peak.throughput, (backed.throughput - base.throughput) / se, b,
                advice.backoff, 100 * (b / advice.backoff - 1)));
}

void a5() {
    // cw a multiple of cc, so the expansion is the sum term alone.
    const double cw = 3;
    bool ok = true;
    std::string s;
    for (int n : {2, 3, 5, 10}) {
        const auto p = platform(12);
        const int i = n + static_cast<int>(std::ceil(cw / kCc)) - 1;
        const double model = markov::expansion_high(i, p, cw) / kCc;
        const double mc = oracle::two_bag_mean_failures(n, 1000000, kSeed + static_cast<std::uint64_t>(n));
        const double e = rel(model, mc);
        ok = ok && e <= 0.01;
        detail("n=%d (state %d): closed form %.6f, Monte-Carlo %.6f, %.3f%%", n, i, model, mc, 100 * e);
        s += fmt("%sn=%d %.2f%%", s.empty() ? "" : ", ", n, 100 * e);
    }
    verdict("A5", ok, "expansion_high vs 1e6-trial two-bag Monte-Carlo: " + s);
}

void a6() {
    const Distribution d[3] = {Distribution::constant(2), Distribution::poisson(2), Distribution::exponential(2)};
    const char* name[3] = {"constant", "poisson", "exponential"};
    sim::SimStats s[3];
    for (int k = 0; k < 3; ++k) {
        auto c = sim_config(8, 1, 2);
        c.workload.pw_dist = d[k];
        c.seed = split_seed(kSeed + 4, static_cast<std::uint64_t>(k));
        s[k] = sim::run(c);
        detail("%-11s T=%.5f +- %.5f", name[k], s[k].throughput, s[k].stderr_throughput);
    }
    auto gap = [&](int a, int b) {
        return (s[a].throughput - s[b].throughput) / std::hypot(s[a].stderr_throughput, s[b].stderr_throughput);
    };
    verdict("A6", gap(0, 1) > 2 && gap(1, 2) > 2,
            fmt("constant - poisson = %.1f se, poisson - exponential = %.1f se (need > 2 each)", gap(0, 1),
                gap(1, 2)));
}

void a7() {
    double worst = 0;
    bool exact = true;
    for (int P : {4, 8})
        for (double cw : {1.0, 4.0, 8.0})
            for (double pw : pw_grid()) {
                const auto p = platform(P);
                const auto w = WorkloadParams::canonical(cw, pw);
                const auto spec = multistage::StageSpec::single(p, cw);
                const auto ms = multistage::predict_multistage(p, w, spec);
                worst = std::max(worst, rel(ms.throughput, avg::predict(p, w).throughput));

                multistage::StageSpec other{{{kRc, 0.5 * cw, kCc, "a"}, {kRc, 0.5 * cw, kCc, "b"}}};
                const auto mixed = multistage::mixed_throughput({{{spec, 1.0}, {other, 0.0}}}, p, pw);
                exact = exact && mixed.throughput == ms.throughput &&
                        mixed.fails_per_success == ms.fails_per_success;
            }
    verdict("A7", worst <= 1e-6 && exact,
            fmt("single-stage vs avg worst relative difference %.2g (need <= 1e-6); weights (1,0) %s", worst,
                exact ? "identical" : "differ"));
}

}  // namespace

int main() {
    std::printf("simulating the A1/A2 grid (72 points, %zu successes each)\n", kSuccesses);
    std::fflush(stdout);
    const auto pts = run_grid();
    a1(pts);
    a2(pts);
    a3(pts);
    a4();
    a5();
    a6();
    a7();
    std::printf("%d of 7 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
