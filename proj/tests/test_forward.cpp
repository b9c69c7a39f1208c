#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "pndkit/forward.hpp"
#include "pndkit/pnd.hpp"

using namespace pndkit;

TEST_CASE("off probability closed forms") {
    const double eta = std::pow(10.0, -3.5 / 10.0);
    CHECK(p_off(thermal_pnd(1.2, 80), eta) ==
          doctest::Approx(1.0 / (1.0 + eta * 1.2)).epsilon(1e-12));
    CHECK(p_off(coherent_pnd(1.2, 80), eta) ==
          doctest::Approx(std::exp(-eta * 1.2)).epsilon(1e-12));
    CHECK(p_off(Pnd::delta(5), 0.7) == 1.0);
    CHECK(p_off(Pnd::delta(5, 3), 0.4) == doctest::Approx(0.6 * 0.6 * 0.6).epsilon(1e-14));
}

TEST_CASE("click probabilities of a single pair") {
    ClickProbs cp = click_probs_joint(JointPnd::delta(3, 1, 1), 0.3, 0.7);
    CHECK(cp.p00 == doctest::Approx(0.7 * 0.3).epsilon(1e-14));
    CHECK(cp.p01 == doctest::Approx(0.7 * 0.7).epsilon(1e-14));
    CHECK(cp.p10 == doctest::Approx(0.3 * 0.3).epsilon(1e-14));
    CHECK(cp.p11 == doctest::Approx(0.3 * 0.7).epsilon(1e-14));
    CHECK(cp.p00 + cp.p01 + cp.p10 + cp.p11 == doctest::Approx(1.0).epsilon(1e-14));

    JointPnd state = tms_joint_pnd(0.4, 15);
    ClickProbs a = click_probs_joint(state, 0.45);
    ClickProbs b = click_probs_joint(state, 0.45, 0.45);
    CHECK(a.p00 == b.p00);
    CHECK(a.p01 == b.p01);
    CHECK(a.p10 == b.p10);
    CHECK(a.p11 == b.p11);
}

TEST_CASE("measurement matrices match the click probabilities") {
    std::vector<double> etas{0.2, 0.5};
    Matrix ms = b_matrix_single(etas, 4);
    CHECK(ms.rows == 2);
    CHECK(ms.cols == 5);
    for (std::size_t n = 0; n <= 4; ++n)
        CHECK(ms(1, n) == doctest::Approx(std::pow(0.5, double(n))).epsilon(1e-13));

    const std::size_t trunc = 6, d = trunc + 1;
    Matrix mj = b_matrix_joint(etas, trunc);
    CHECK(mj.rows == 6);
    CHECK(mj.cols == d * d);

    JointPnd state = JointPnd::product(thermal_pnd(0.8, trunc), thermal_pnd(0.5, trunc));
    for (std::size_t mu = 0; mu < etas.size(); ++mu) {
        ClickProbs cp = click_probs_joint(state, etas[mu]);
        double p00 = 0.0, p01 = 0.0, p10 = 0.0;
        for (std::size_t c = 0; c < d * d; ++c) {
            p00 += mj(mu, c) * state.probs()[c];
            p01 += mj(etas.size() + mu, c) * state.probs()[c];
            p10 += mj(2 * etas.size() + mu, c) * state.probs()[c];
        }
        CHECK(p00 == doctest::Approx(cp.p00).epsilon(1e-12));
        CHECK(p01 == doctest::Approx(cp.p01).epsilon(1e-12));
        CHECK(p10 == doctest::Approx(cp.p10).epsilon(1e-12));
    }
}

TEST_CASE("efficiency ladder helpers") {
    EfficiencyLadder l = EfficiencyLadder::uniform(0.1, 0.9, 5);
    CHECK(l.size() == 5);
    CHECK(l[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(l[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(l[4] == doctest::Approx(0.9).epsilon(1e-15));
    EfficiencyLadder half = l.scaled(0.5);
    CHECK(half[4] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK_THROWS_AS(EfficiencyLadder::uniform(0.9, 0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(EfficiencyLadder::uniform(0.1, 0.9, 1), std::invalid_argument);
    CHECK_THROWS_AS(l.scaled(1.2), std::invalid_argument);
    CHECK_THROWS_AS(EfficiencyLadder({0.5}), std::invalid_argument);
    CHECK_THROWS_AS(EfficiencyLadder({0.0, 0.5}), std::invalid_argument);
}

TEST_CASE("click sampling is reproducible and unbiased") {
    JointPnd state = source_model_state(SourceModelParams::device_defaults(), 9);
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 10);
    const std::uint64_t trials = 1000000;

    ClickTable t1 = sample_click_table(state, ladder, trials, 7);
    ClickTable t2 = sample_click_table(state, ladder, trials, 7);
    REQUIRE(t1.rows.size() == 10);
    for (std::size_t mu = 0; mu < 10; ++mu) {
        CHECK(t1.rows[mu].c00 == t2.rows[mu].c00);
        CHECK(t1.rows[mu].c01 == t2.rows[mu].c01);
        CHECK(t1.rows[mu].c10 == t2.rows[mu].c10);
        CHECK(t1.rows[mu].c11 == t2.rows[mu].c11);
        CHECK(t1.rows[mu].c00 + t1.rows[mu].c01 + t1.rows[mu].c10 + t1.rows[mu].c11 ==
              trials);
    }
    t1.validate();

    for (std::size_t mu = 0; mu < 10; ++mu) {
        ClickProbs cp = click_probs_joint(state, ladder[mu]);
        auto within = [&](std::uint64_t count, double p) {
            double sigma = std::sqrt(p * (1.0 - p) * double(trials));
            return std::abs(double(count) - p * double(trials)) < 5.0 * sigma + 1.0;
        };
        CHECK(within(t1.rows[mu].c00, cp.p00));
        CHECK(within(t1.rows[mu].c01, cp.p01));
        CHECK(within(t1.rows[mu].c10, cp.p10));
        CHECK(within(t1.rows[mu].c11, cp.p11));
    }

    ClickTable t3 = sample_click_table(state, ladder, trials, 8);
    bool any_diff = false;
    for (std::size_t mu = 0; mu < 10; ++mu)
        any_diff = any_diff || t1.rows[mu].c00 != t3.rows[mu].c00;
    CHECK(any_diff);
}

TEST_CASE("off frequencies pick the matching counters") {
    ClickTable table;
    table.rows.push_back({0.5, 10, 4, 3, 2, 1});
    auto fs = off_frequencies(table, Arm::signal);
    auto fi = off_frequencies(table, Arm::idler);
    CHECK(fs[0].first == 0.5);
    CHECK(fs[0].second == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(fi[0].second == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("click table validation") {
    ClickTable empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
    ClickTable bad_sum;
    bad_sum.rows.push_back({0.5, 10, 4, 3, 2, 2});
    CHECK_THROWS_AS(bad_sum.validate(), std::invalid_argument);
    ClickTable zero_trials;
    zero_trials.rows.push_back({0.5, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS(zero_trials.validate(), std::invalid_argument);
    ClickTable bad_eta;
    bad_eta.rows.push_back({1.5, 4, 1, 1, 1, 1});
    CHECK_THROWS_AS(bad_eta.validate(), std::invalid_argument);
    JointPnd state = JointPnd::delta(2);
    EfficiencyLadder l = EfficiencyLadder::uniform(0.2, 0.8, 3);
    CHECK_THROWS_AS(sample_click_table(state, l, 0, 1), std::invalid_argument);
}
