// lfperf: command-line front end for the models, the simulator, the
// advisor and the hardware harness.
//
// Exit status: 0 ok, 1 hardware/runtime failure, 2 invalid input,
// 3 solver did not converge, 64 usage error, 74 output not writable.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lfperf/harness.hpp"
#include "lfperf/lfperf.hpp"

namespace {

using namespace lfperf;
using report::Cell;
using report::Table;

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitUsage = 64;
constexpr int kExitIo = 74;

struct Output {
    std::string path = "-";
    std::string format = "csv";
    std::string summary;

    void add_to(CLI::App* cmd) {
        cmd->add_option("-o,--out", path, "report destination ('-' for stdout)");
        cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("--summary", summary, "write a JSON summary here");
    }

    void emit(const Table& t, const nlohmann::json& summary_doc) const {
        report::emit_report(t, report::format_for(format), path);
        if (summary.empty()) return;
        std::ofstream out(summary, std::ios::binary | std::ios::trunc);
        if (!out) throw report::io_error("cannot open '" + summary + "' for writing");
        out << summary_doc.dump(2) << '\n';
        if (!out.flush()) throw report::io_error("write to '" + summary + "' failed");
    }
};

/// lo:hi:n:log or lo:hi:n:lin.
std::vector<double> parse_grid(const std::string& spec) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : spec) {
        if (c == ':') parts.push_back(cur), cur.clear();
        else cur += c;
    }
    parts.push_back(cur);
    auto bad = [&](const std::string& why) {
        return validation_error("pw-grid", "pw-grid '" + spec + "': " + why);
    };
    if (parts.size() != 4) throw bad("expected lo:hi:n:log or lo:hi:n:lin");
    double lo, hi;
    long n;
    try {
        std::size_t used = 0;
        lo = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw bad("bad lo");
        hi = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw bad("bad hi");
        n = std::stol(parts[2], &used);
        if (used != parts[2].size()) throw bad("bad n");
    } catch (const std::logic_error&) {
        throw bad("not a number");
    }
    if (n < 1) throw bad("n >= 1 required");
    if (!(lo >= 0) || !(hi >= lo)) throw bad("0 <= lo <= hi required");
    const bool log = parts[3] == "log";
    if (!log && parts[3] != "lin") throw bad("scale must be log or lin");
    if (log && lo <= 0) throw bad("log scale needs lo > 0");
    std::vector<double> g;
    for (long k = 0; k < n; ++k) {
        const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        g.push_back(log ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)))
                        : lo + f * (hi - lo));
    }
    if (n > 1) g.back() = hi;  // no rounding drift at the end point
    return g;
}

std::vector<double> grid_or_single(const std::string& spec, double pw) {
    return spec.empty() ? std::vector<double>{pw} : parse_grid(spec);
}

/// Seed precedence: --seed, then LFPERF_SEED, then the params file, then 1.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& file) {
    if (flag) return *flag;
    if (const char* env = std::getenv("LFPERF_SEED"); env && *env) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (*end != '\0') throw validation_error("LFPERF_SEED", "LFPERF_SEED must be an integer");
        return v;
    }
    return file.value_or(1);
}

const std::vector<std::string> kSimColumns = {
    "pw", "cw", "P", "cc", "rc", "pw_dist", "cw_dist", "seed",
    "throughput", "fails_per_success", "occupancy", "stderr_throughput"};

std::vector<Cell> sim_row(const sim::SimConfig& c, const sim::SimStats& s) {
    return {c.workload.pw_mean,
            c.workload.cw_mean,
            std::int64_t{c.platform.P},
            c.platform.cc,
            c.platform.rc,
            std::string(to_string(c.workload.pw_dist.kind)),
            std::string(to_string(c.workload.cw_dist.kind)),
            std::uint64_t{c.seed},
            s.throughput,
            s.fails_per_success,
            s.mean_retry_occupancy,
            s.stderr_throughput};
}

// ---------------------------------------------------------------------

struct PredictArgs {
    std::string model = "avg";
    std::string params;
    std::string stages;
    std::string mix;
    std::string grid;
    std::string artifacts;
    Output out;
};

int run_predict(const PredictArgs& a) {
    const auto pf = io::load_params(a.params);
    const auto grid = grid_or_single(a.grid, pf.workload.pw_mean);
    Table t{{"pw", "throughput", "fails", "trl", "mode"}, {}};
    nlohmann::json summary = {{"command", "predict"}, {"model", a.model}};

    if (a.model == "multistage") {
        if (a.stages.empty() == a.mix.empty())
            throw validation_error("stages", "multistage needs exactly one of --stages or --mix");
        std::optional<multistage::StageSpec> spec;
        std::optional<multistage::MixedWorkload> mix;
        if (!a.stages.empty()) spec = io::load_stages(a.stages);
        else mix = io::mix_from_json(io::read_json_file(a.mix));
        for (double pw : grid) {
            const auto p = spec ? multistage::predict_multistage(pf.platform, pf.workload.with_pw(pw), *spec)
                                : multistage::mixed_throughput(*mix, pf.platform, pw);
            t.add({pw, p.throughput, p.fails_per_success, p.mean_retry_occupancy,
                   std::string(to_string(p.mode))});
        }
    } else {
        const auto kind = parse_model_kind(a.model);
        nlohmann::json arts = nlohmann::json::array();
        for (double pw : grid) {
            const auto w = pf.workload.with_pw(pw);
            Prediction p;
            if (kind == ModelKind::Markov) {
                const auto r = markov::predict_markov(pf.platform, w);
                p = r.prediction;
                if (!a.artifacts.empty()) {
                    auto j = io::markov_artifacts_json(r.artifacts);
                    j["pw"] = pw;
                    arts.push_back(std::move(j));
                }
            } else {
                validate(pf.platform, w);
                p = avg::predict(pf.platform, w);
            }
            t.add({pw, p.throughput, p.fails_per_success, p.mean_retry_occupancy,
                   std::string(to_string(p.mode))});
        }
        if (!a.artifacts.empty()) {
            if (kind != ModelKind::Markov)
                throw validation_error("artifacts", "--artifacts is only available for --model markov");
            std::ofstream f(a.artifacts, std::ios::binary | std::ios::trunc);
            if (!f) throw report::io_error("cannot open '" + a.artifacts + "' for writing");
            f << arts.dump(1) << '\n';
            if (!f.flush()) throw report::io_error("write to '" + a.artifacts + "' failed");
        }
    }
    summary["rows"] = t.rows.size();
    summary["params"] = io::params_json(pf.platform, pf.workload);
    a.out.emit(t, summary);
    return 0;
}

struct SimulateArgs {
    std::string params;
    std::optional<std::uint64_t> seed;
    std::size_t successes = 100000;
    std::size_t warmup = 10000;
    double backoff = 0;
    std::string grid;
    Output out;
};

int run_simulate(const SimulateArgs& a) {
    const auto pf = io::load_params(a.params);
    const auto seed = resolve_seed(a.seed, pf.seed);
    std::vector<sim::SimConfig> grid;
    for (double pw : grid_or_single(a.grid, pf.workload.pw_mean))
        grid.push_back({pf.platform, pf.workload.with_pw(pw), seed, a.warmup, a.successes, a.backoff});
    Table t{kSimColumns, {}};
    if (grid.size() == 1) {
        t.add(sim_row(grid[0], sim::run(grid[0])));
    } else {
        for (const auto& row : sim::sweep(grid, seed)) t.add(sim_row(row.config, row.stats));
    }
    a.out.emit(t, {{"command", "simulate"}, {"seed", seed}, {"rows", t.rows.size()},
                   {"params", io::params_json(pf.platform, pf.workload)}});
    return 0;
}

struct SweepArgs {
    std::string model = "markov";
    std::string params;
    std::string grid;
    std::optional<std::uint64_t> seed;
    std::size_t successes = 100000;
    std::size_t warmup = 10000;
    Output out;
};

int run_sweep(const SweepArgs& a) {
    const auto pf = io::load_params(a.params);
    const auto kind = parse_model_kind(a.model);
    const auto seed = resolve_seed(a.seed, pf.seed);
    std::vector<sim::SimConfig> grid;
    for (double pw : grid_or_single(a.grid, pf.workload.pw_mean))
        grid.push_back({pf.platform, pf.workload.with_pw(pw), seed, a.warmup, a.successes});
    const auto rows = sim::sweep(grid, seed);
    Table t{{"pw", "model", "model_throughput", "sim_throughput", "sim_stderr", "rel_error",
             "model_fails", "sim_fails", "model_trl", "sim_occupancy", "seed"},
            {}};
    for (const auto& r : rows) {
        const auto p = predict(kind, pf.platform, r.config.workload);
        t.add({r.config.workload.pw_mean, a.model, p.throughput, r.stats.throughput,
               r.stats.stderr_throughput, (p.throughput - r.stats.throughput) / r.stats.throughput,
               p.fails_per_success, r.stats.fails_per_success, p.mean_retry_occupancy,
               r.stats.mean_retry_occupancy, std::uint64_t{r.config.seed}});
    }
    a.out.emit(t, {{"command", "sweep"}, {"model", a.model}, {"seed", seed}, {"rows", t.rows.size()}});
    return 0;
}

struct AdviseArgs {
    std::string params;
    std::string model = "avg";
    bool backoff = false;
    bool mm = false;
    double quantum = 1;
    int k_max = 100;
    std::optional<int> growth_cap;
    std::optional<double> observed_fails;
    double current_backoff = 0;
    std::string out = "-";
};

int run_advise(const AdviseArgs& a) {
    if (a.backoff == a.mm) throw CLI::ValidationError("advise needs exactly one of --backoff or --mm");
    const auto pf = io::load_params(a.params);
    const auto kind = parse_model_kind(a.model);
    io::AdvisoryReport rep;
    const auto peak = advisor::peak_pw(pf.platform, pf.workload, kind);
    rep.pw_star = peak.pw_star;
    if (peak.at_edge) rep.flags.push_back("peak-at-bracket-edge");
    if (a.backoff) {
        if (a.observed_fails) {
            const auto ad = advisor::adaptive_backoff({*a.observed_fails}, pf.platform,
                                                      pf.workload.cw_mean, kind, a.current_backoff);
            rep.pw_star = ad.pw_star;
            rep.backoff_uow = ad.backoff;
            rep.flags.push_back("adaptive");
            if (ad.estimate.flag != advisor::EstimateFlag::None)
                rep.flags.push_back(std::string(advisor::to_string(ad.estimate.flag)));
        } else {
            rep.backoff_uow = std::max(0.0, peak.pw_star - pf.workload.pw_mean);
        }
    } else {
        const auto plan = advisor::mm_plan(pf.platform, pf.workload, a.quantum, a.k_max, kind, a.growth_cap);
        rep.mm_k = plan.k;
        rep.backoff_uow = 0;
    }
    rep.backoff_cycles = rep.backoff_uow * pf.platform.unit_cycles;
    const auto doc = io::advisory_json(rep).dump(2) + "\n";
    if (a.out.empty() || a.out == "-") {
        std::cout << doc;
        return 0;
    }
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw report::io_error("cannot open '" + a.out + "' for writing");
    f << doc;
    if (!f.flush()) throw report::io_error("write to '" + a.out + "' failed");
    return 0;
}

struct BenchArgs {
    std::string structure = "counter";
    int threads = 1;
    double pw = 0;
    double cw = 1;
    double backoff = 0;
    double duration = 0.2;
    bool no_pin = false;
    std::size_t stride = 1;
    std::string params;
    Output out;
};

int run_bench(const BenchArgs& a) {
    PlatformParams p;
    if (!a.params.empty()) p = io::load_params(a.params).platform;
    p.P = a.threads;
    harness::BenchConfig c;
    c.structure = harness::parse_structure(a.structure);
    c.threads = a.threads;
    c.pw = a.pw;
    c.cw = a.cw;
    c.backoff = a.backoff;
    c.duration_s = a.duration;
    c.pin = !a.no_pin;
    c.unit_cycles = p.unit_cycles;
    c.stride = a.stride;
    const auto st = harness::bench(c);
    for (const auto& w : st.warnings) std::cerr << "warning: " << w << '\n';

    auto cols = kSimColumns;
    cols.push_back("source");
    Table t{cols, {}};
    t.add({a.pw + a.backoff, a.cw, std::int64_t{a.threads}, p.cc, p.rc, std::string("constant"),
           std::string("constant"), std::uint64_t{0}, st.throughput_uow, st.fails_per_success,
           st.occupancy, std::nan(""), std::string("hardware")});
    a.out.emit(t, {{"command", "bench"},
                   {"structure", a.structure},
                   {"threads", a.threads},
                   {"ops_per_second", st.ops_per_second},
                   {"successes", st.successes},
                   {"failures", st.failures},
                   {"pinned", st.pinned},
                   {"conservation_ok", st.conservation_ok},
                   {"warnings", st.warnings}});
    if (!st.conservation_ok) {
        std::cerr << "error: conservation check failed\n";
        return kExitRuntime;
    }
    return 0;
}

struct CalibrateArgs {
    std::uint64_t trials = 100000;
    int threads = 0;
    double unit_cycles = 50;
    std::string out = "-";
};

int run_calibrate(const CalibrateArgs& a) {
    const auto cal = harness::calibrate(a.trials, a.unit_cycles);
    const int P = a.threads > 0 ? a.threads : harness::hardware_threads();
    nlohmann::json doc = {{"platform", io::platform_json(cal.platform(P))},
                          {"measured",
                           {{"cc_cycles", cal.cc_cycles},
                            {"rc_cycles", cal.rc_cycles},
                            {"cc_local_cycles", cal.cc_local_cycles},
                            {"rc_local_cycles", cal.rc_local_cycles},
                            {"trials", cal.trials},
                            {"timer_resolution_ticks", cal.timer_resolution},
                            {"pinned", cal.pinned},
                            {"review", cal.review}}}};
    if (cal.review) std::cerr << "warning: measured cc < rc; review before use\n";
    const auto text = doc.dump(2) + "\n";
    if (a.out.empty() || a.out == "-") {
        std::cout << text;
        return 0;
    }
    std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
    if (!f) throw report::io_error("cannot open '" + a.out + "' for writing");
    f << text;
    if (!f.flush()) throw report::io_error("write to '" + a.out + "' failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Throughput prediction for lock-free retry loops"};
    app.require_subcommand(1);

    PredictArgs pa;
    auto* predict_cmd = app.add_subcommand("predict", "analytical prediction over a pw grid");
    predict_cmd->add_option("--model", pa.model, "avg, markov or multistage")
        ->check(CLI::IsMember({"avg", "markov", "multistage"}));
    predict_cmd->add_option("--params", pa.params, "params JSON")->required();
    predict_cmd->add_option("--stages", pa.stages, "stage spec JSON (multistage)");
    predict_cmd->add_option("--mix", pa.mix, "mixed workload JSON (multistage)");
    predict_cmd->add_option("--pw-grid", pa.grid, "lo:hi:n:log|lin");
    predict_cmd->add_option("--artifacts", pa.artifacts, "write Markov artifacts JSON here");
    pa.out.add_to(predict_cmd);

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "discrete-event simulation");
    sim_cmd->add_option("--params", sa.params, "params JSON")->required();
    sim_cmd->add_option("--seed", sa.seed, "base seed");
    sim_cmd->add_option("--successes", sa.successes, "measured successes per point");
    sim_cmd->add_option("--warmup", sa.warmup, "warmup successes");
    sim_cmd->add_option("--backoff", sa.backoff, "uow added to each parallel section");
    sim_cmd->add_option("--pw-grid", sa.grid, "lo:hi:n:log|lin");
    sa.out.add_to(sim_cmd);

    SweepArgs wa;
    auto* sweep_cmd = app.add_subcommand("sweep", "model and simulator over a grid, joined");
    sweep_cmd->add_option("--model", wa.model, "avg or markov")->check(CLI::IsMember({"avg", "markov"}));
    sweep_cmd->add_option("--params", wa.params, "params JSON")->required();
    sweep_cmd->add_option("--pw-grid", wa.grid, "lo:hi:n:log|lin");
    sweep_cmd->add_option("--seed", wa.seed, "base seed");
    sweep_cmd->add_option("--successes", wa.successes, "measured successes per point");
    sweep_cmd->add_option("--warmup", wa.warmup, "warmup successes");
    wa.out.add_to(sweep_cmd);

    AdviseArgs aa;
    auto* advise_cmd = app.add_subcommand("advise", "back-off or memory-management advice");
    advise_cmd->add_option("--params", aa.params, "params JSON")->required();
    advise_cmd->add_option("--model", aa.model, "avg or markov")->check(CLI::IsMember({"avg", "markov"}));
    advise_cmd->add_flag("--backoff", aa.backoff, "constant (or adaptive) back-off advice");
    advise_cmd->add_flag("--mm", aa.mm, "reclamation granularity plan");
    advise_cmd->add_option("--quantum", aa.quantum, "uow of reclamation work per quantum");
    advise_cmd->add_option("--k-max", aa.k_max, "largest granularity considered");
    advise_cmd->add_option("--growth-cap", aa.growth_cap, "upper bound on k (list growth policy)");
    advise_cmd->add_option("--observed-fails", aa.observed_fails,
                           "observed failures per success (adaptive back-off)");
    advise_cmd->add_option("--current-backoff", aa.current_backoff,
                           "back-off in force while failures were observed");
    advise_cmd->add_option("-o,--out", aa.out, "advisory JSON destination");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "hardware micro-benchmark");
    bench_cmd->add_option("--structure", ba.structure, "counter or stack")
        ->check(CLI::IsMember({"counter", "stack"}));
    bench_cmd->add_option("--threads", ba.threads, "worker threads")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--pw", ba.pw, "parallel work (uow)");
    bench_cmd->add_option("--cw", ba.cw, "critical work (uow)");
    bench_cmd->add_option("--backoff", ba.backoff, "uow added to each parallel section");
    bench_cmd->add_option("--duration", ba.duration, "seconds");
    bench_cmd->add_flag("--no-pin", ba.no_pin, "do not pin threads");
    bench_cmd->add_option("--stride", ba.stride, "node stride when filling the stack");
    bench_cmd->add_option("--params", ba.params, "params JSON (latencies and unit for the report)");
    ba.out.add_to(bench_cmd);

    CalibrateArgs ca;
    auto* cal_cmd = app.add_subcommand("calibrate", "measure cc and rc on this host");
    cal_cmd->add_option("--trials", ca.trials, "timed trials per latency");
    cal_cmd->add_option("--threads", ca.threads, "P written to the platform file (default: all)");
    cal_cmd->add_option("--unit-cycles", ca.unit_cycles, "cycles per uow");
    cal_cmd->add_option("-o,--out", ca.out, "platform JSON destination");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*predict_cmd) return run_predict(pa);
        if (*sim_cmd) return run_simulate(sa);
        if (*sweep_cmd) return run_sweep(wa);
        if (*advise_cmd) return run_advise(aa);
        if (*bench_cmd) return run_bench(ba);
        if (*cal_cmd) return run_calibrate(ca);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    } catch (const validation_error& e) {
        std::cerr << "invalid input [" << e.field() << "]: " << e.what() << '\n';
        return kExitValidation;
    } catch (const convergence_error& e) {
        std::cerr << "no convergence (last iterate " << e.last_iterate() << "): " << e.what() << '\n';
        return kExitConvergence;
    } catch (const report::io_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
