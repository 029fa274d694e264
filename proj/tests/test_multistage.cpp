#include <gtest/gtest.h>

#include <cmath>

#include "lfperf/avg_model.hpp"
#include "lfperf/multistage_model.hpp"
#include "oracles.hpp"

using namespace lfperf;
using namespace lfperf::multistage;

namespace {

PlatformParams cfg_a() { return {8, 1.5, 1.0, 50}; }

StageSpec enqueue() {
    return {{Stage{1.0, 1.0, 1.5, "tail.next"}, Stage{1.0, 0.5, 1.5, "tail"}}};
}

StageSpec deque_push() {
    return {{Stage{1.0, 1.0, 1.5, "anchor"}, Stage{1.0, 0.5, 1.5, "node"},
             Stage{1.0, 0.5, 1.5, "anchor"}}};
}

StageSpec deque_pop() { return {{Stage{1.0, 1.0, 1.5, "anchor"}}}; }

}  // namespace

TEST(MultistageExpansion, SingleStageReducesToAvgCurve) {
    const auto p = cfg_a();
    for (double cw : {1.0, 4.0, 8.0}) {
        const auto spec = StageSpec::single(p, cw);
        for (double x = 0; x <= 8; x += 0.05)
            ASSERT_NEAR(expansion_multistage(x, spec, p), avg::expansion_avg(x, p, cw), 1e-6);
    }
}

TEST(MultistageExpansion, BoundaryAndInitialSlope) {
    const auto p = cfg_a();
    const auto spec = enqueue();
    EXPECT_EQ(expansion_multistage(1.0, spec, p), 0.0);
    const double base = expansion_base(spec);
    const double slope0 = p.cc * 2 * p.cc / 2 / base;
    EXPECT_NEAR(expansion_curve(spec, p).slope(0.0), slope0, 1e-15);
    const double h = 1e-4;
    EXPECT_NEAR(expansion_multistage(1 + h, spec, p) / h, slope0, 1e-3 * slope0);
}

TEST(MultistageExpansion, MatchesClosedForm) {
    const auto p = cfg_a();
    const auto spec = deque_push();
    const double a = 3 * p.cc / 2, b = expansion_base(spec);
    for (double x : {1.5, 3.0, 8.0})
        EXPECT_NEAR(expansion_multistage(x, spec, p), oracle::expansion_implicit(x, p.cc, a, b), 1e-6);
}

TEST(MultistageExpansion, NonDecreasing) {
    const MultistageModel m(cfg_a(), deque_push());
    double prev = 0;
    for (int k = 0; k <= 1000; ++k) {
        const double e = m.expansion(8.0 * k / 1000);
        ASSERT_GE(e, prev);
        prev = e;
    }
}

TEST(GroupExpansion, DistinctVariablesUnchanged) {
    const auto spec = enqueue();
    const std::vector<double> e{0.3, 0.7};
    EXPECT_EQ(group_expansion(spec, e), e);
}

TEST(GroupExpansion, SharedAnchorSums) {
    const auto spec = deque_push();
    const auto g = group_expansion(spec, {0.2, 0.5, 0.9});
    EXPECT_DOUBLE_EQ(g[0], 1.1);
    EXPECT_DOUBLE_EQ(g[1], 0.5);
    EXPECT_DOUBLE_EQ(g[2], 1.1);
}

TEST(GroupExpansion, SingletonUnchanged) {
    EXPECT_EQ(group_expansion(deque_pop(), {0.4}), std::vector<double>{0.4});
}

TEST(GroupExpansion, PermutationInvariant) {
    StageSpec spec = deque_push();
    const std::vector<double> e{0.2, 0.5, 0.9};
    const auto g = group_expansion(spec, e);
    StageSpec perm{{spec.stages[2], spec.stages[0], spec.stages[1]}};
    const auto gp = group_expansion(perm, {e[2], e[0], e[1]});
    EXPECT_DOUBLE_EQ(gp[0], g[2]);
    EXPECT_DOUBLE_EQ(gp[1], g[0]);
    EXPECT_DOUBLE_EQ(gp[2], g[1]);
}

TEST(Slack, SingleStageNoExpansion) {
    const auto spec = StageSpec::single(cfg_a(), 4);
    EXPECT_DOUBLE_EQ(multistage_slack(3.0, spec, {0.0}), 4.0 / 4.0);
}

TEST(Slack, VanishesWithOccupancy) {
    const auto spec = enqueue();
    EXPECT_LT(multistage_slack(1e9, spec, {0.1, 0.1}), 1e-8);
}

TEST(Slack, TwoStageByHand) {
    // cw 1.0 and 0.5 with expansions 0.25 and 0.75, S = 2, trl = 4:
    // (1.25 + 1.25) / (2 * 5) = 0.25
    EXPECT_DOUBLE_EQ(multistage_slack(4.0, enqueue(), {0.25, 0.75}), 0.25);
}

TEST(MultistagePredict, SingleStageMatchesAvgModel) {
    for (int P : {1, 2, 4, 8, 16})
        for (double cw : {0.5, 1.0, 4.0, 8.0})
            for (double pw = 0.05; pw < 2e3; pw *= 1.7) {
                const PlatformParams p{P, 1.5, 1.0, 50};
                const auto w = WorkloadParams::canonical(cw, pw);
                const auto a = avg::predict(p, w);
                const auto m = predict_multistage(p, w, StageSpec::single(p, cw));
                ASSERT_NEAR(m.throughput / a.throughput, 1.0, 1e-6) << P << " " << cw << " " << pw;
                ASSERT_NEAR(m.mean_retry_occupancy, a.mean_retry_occupancy, 1e-6);
            }
}

TEST(MultistagePredict, SwitchPointMatchesClosedFormForOneStage) {
    const auto p = cfg_a();
    for (double cw : {0.5, 1.0, 4.0, 8.0}) {
        const MultistageModel m(p, StageSpec::single(p, cw));
        EXPECT_NEAR(m.switch_point(), avg::contention_threshold(p, cw), 1e-8);
    }
}

TEST(MultistagePredict, NonContendedLimit) {
    const auto spec = enqueue();
    const double pw = 1e5;
    const auto pr = predict_multistage(cfg_a(), WorkloadParams::canonical(1, pw), spec);
    EXPECT_NEAR(pr.throughput * (pw + spec.rlw()) / 8, 1.0, 0.01);
}

TEST(MultistagePredict, SerialBound) {
    for (auto spec : {enqueue(), deque_push()}) {
        const auto pr = predict_multistage(cfg_a(), WorkloadParams::canonical(1, 10), spec);
        EXPECT_LE(pr.throughput, 1.0 / spec.rlw());
    }
}

TEST(MultistagePredict, ThroughputFallsWithCriticalWork) {
    for (std::size_t s = 0; s < 2; ++s)
        for (double pw : {0.1, 2.0, 20.0, 200.0}) {
            double prev = 1e9;
            for (double cw = 0.1; cw < 20; cw *= 1.3) {
                auto spec = enqueue();
                spec.stages[s].cw = cw;
                const double t = predict_multistage(cfg_a(), WorkloadParams::canonical(1, pw), spec).throughput;
                ASSERT_LE(t, prev * (1 + 1e-9)) << s << " " << pw << " " << cw;
                prev = t;
            }
        }
}

TEST(MultistagePredict, RejectsBadStages) {
    StageSpec bad{{Stage{1.0, -1.0, 1.5, "x"}}};
    EXPECT_THROW(predict_multistage(cfg_a(), WorkloadParams::canonical(1, 1), bad), validation_error);
    EXPECT_THROW(predict_multistage(cfg_a(), WorkloadParams::canonical(1, 1), StageSpec{}), validation_error);
}

TEST(Mixed, DegenerateWeightsGivePurePrediction) {
    const MixedWorkload mix{{{deque_push(), 1.0}, {deque_pop(), 0.0}}};
    for (double pw : {0.5, 5.0, 50.0}) {
        const auto m = mixed_throughput(mix, cfg_a(), pw);
        const auto pure = predict_multistage(cfg_a(), WorkloadParams::canonical(1, pw), deque_push());
        EXPECT_EQ(m.throughput, pure.throughput);
        EXPECT_EQ(m.fails_per_success, pure.fails_per_success);
        EXPECT_EQ(m.mode, pure.mode);
    }
}

TEST(Mixed, EqualSpecs) {
    const MixedWorkload mix{{{enqueue(), 0.3}, {enqueue(), 0.7}}};
    const auto m = mixed_throughput(mix, cfg_a(), 3.0);
    const auto pure = predict_multistage(cfg_a(), WorkloadParams::canonical(1, 3.0), enqueue());
    EXPECT_NEAR(m.throughput, pure.throughput, 1e-15);
}

TEST(Mixed, BetweenPureOperations) {
    const MixedWorkload mix{{{deque_push(), 0.75}, {deque_pop(), 0.25}}};
    for (double pw : {0.5, 5.0, 50.0, 500.0}) {
        const double t = mixed_throughput(mix, cfg_a(), pw).throughput;
        const double a = predict_multistage(cfg_a(), WorkloadParams::canonical(1, pw), deque_push()).throughput;
        const double b = predict_multistage(cfg_a(), WorkloadParams::canonical(1, pw), deque_pop()).throughput;
        EXPECT_GE(t, std::min(a, b));
        EXPECT_LE(t, std::max(a, b));
    }
}

TEST(Mixed, WeightsMustSumToOne) {
    const MixedWorkload mix{{{deque_push(), 0.5}, {deque_pop(), 0.4}}};
    EXPECT_THROW(mixed_throughput(mix, cfg_a(), 1.0), validation_error);
}
