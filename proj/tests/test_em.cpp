#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pndkit/em.hpp"
#include "pndkit/forward.hpp"
#include "pndkit/metrics.hpp"
#include "pndkit/pnd.hpp"

using namespace pndkit;

namespace {

std::vector<std::pair<double, double>> exact_single_data(const Pnd& truth,
                                                         const EfficiencyLadder& ladder) {
    std::vector<std::pair<double, double>> data;
    for (std::size_t mu = 0; mu < ladder.size(); ++mu)
        data.emplace_back(ladder[mu], p_off(truth, ladder[mu]));
    return data;
}

bool non_increasing(const std::vector<double>& h) {
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i] > h[i - 1] + 1e-12) return false;
    return true;
}

} // namespace

TEST_CASE("error metric averages absolute deviations") {
    CHECK(error_metric({0.5, 0.25}, {0.25, 0.5}) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(error_metric({0.1}, {0.1}) == 0.0);
    CHECK_THROWS_AS(error_metric({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(error_metric({0.1}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("single-mode reconstruction recovers smooth states from exact data") {
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 50);
    EmConfig cfg;
    cfg.rel_tol = 0.0;
    cfg.max_iters = 100000;

    Pnd thermal = thermal_pnd(1.2, 9);
    EmResultSingle rt = em_single(exact_single_data(thermal, ladder), cfg);
    CHECK(fidelity(rt.pnd, thermal) > 0.9999);
    CHECK(non_increasing(rt.diagnostics.epsilon_history));
    CHECK_FALSE(rt.diagnostics.converged);
    CHECK(rt.diagnostics.iterations == 100000);
    CHECK(rt.diagnostics.final_epsilon == rt.diagnostics.epsilon_history.back());
    CHECK(rt.diagnostics.epsilon_history.size() == rt.diagnostics.iterations);
    // A thermal state this bright keeps ~2.4% of its mass above n = 5.
    CHECK(rt.diagnostics.mass_outside_reliable_window);

    Pnd coherent = coherent_pnd(1.2, 9);
    EmResultSingle rc = em_single(exact_single_data(coherent, ladder), cfg);
    CHECK(fidelity(rc.pnd, coherent) > 0.9995);
}

TEST_CASE("relative-change stopping rule") {
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 30);
    auto data = exact_single_data(thermal_pnd(0.8, 9), ladder);

    EmResultSingle deflt = em_single(data, {});
    CHECK(deflt.diagnostics.converged);
    CHECK(deflt.diagnostics.iterations < 100000);

    EmConfig capped;
    capped.max_iters = 5;
    capped.rel_tol = 0.0;
    EmResultSingle r = em_single(data, capped);
    CHECK_FALSE(r.diagnostics.converged);
    CHECK(r.diagnostics.iterations == 5);
    CHECK(r.diagnostics.epsilon_history.size() == 5);
}

TEST_CASE("single-mode reconstruction from sampled clicks") {
    Pnd truth = thermal_pnd(1.2, 9);
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 20);
    ClickTable table = sample_click_table(JointPnd::product(truth, Pnd::delta(9)),
                                          ladder, 200000, 31);
    EmResultSingle r = em_single(off_frequencies(table, Arm::signal), {});
    CHECK(fidelity(r.pnd, truth) > 0.97);
}

TEST_CASE("joint reconstruction recovers the pair family from exact probabilities") {
    JointPnd truth = source_model_state(SourceModelParams::device_defaults(), 9);
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 50);
    std::vector<double> etas = ladder.etas(), f00, f01, f10;
    for (std::size_t mu = 0; mu < ladder.size(); ++mu) {
        ClickProbs cp = click_probs_joint(truth, ladder[mu]);
        f00.push_back(cp.p00);
        f01.push_back(cp.p01);
        f10.push_back(cp.p10);
    }
    EmConfig cfg;
    cfg.rel_tol = 0.0;
    cfg.max_iters = 100000;
    EmResultJoint r = em_joint_frequencies(etas, f00, f01, f10, cfg);
    CHECK(fidelity(r.pnd, truth) > 0.99);
    CHECK(non_increasing(r.diagnostics.epsilon_history));
    CHECK_FALSE(r.diagnostics.mass_outside_reliable_window);
}

TEST_CASE("click-table and frequency entry points agree") {
    JointPnd truth = tms_joint_pnd(0.5, 6);
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.1, 0.9, 8);
    ClickTable table = sample_click_table(truth, ladder, 50000, 5);

    EmConfig cfg;
    cfg.trunc = 6;
    cfg.max_iters = 500;
    EmResultJoint a = em_joint(table, cfg);

    std::vector<double> etas, f00, f01, f10;
    for (const ClickRow& row : table.rows) {
        double t = double(row.trials);
        etas.push_back(row.eta);
        f00.push_back(double(row.c00) / t);
        f01.push_back(double(row.c01) / t);
        f10.push_back(double(row.c10) / t);
    }
    EmResultJoint b = em_joint_frequencies(etas, f00, f01, f10, cfg);
    for (std::size_t i = 0; i < a.pnd.probs().size(); ++i)
        CHECK(a.pnd.probs()[i] == b.pnd.probs()[i]);
    CHECK(a.diagnostics.iterations == b.diagnostics.iterations);
}

TEST_CASE("plane rescaling moves the reconstruction upstream") {
    EmConfig base;
    EmConfig moved = rescale_plane(base, 0.5);
    CHECK(moved.plane_scale == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(base.plane_scale == 1.0);

    // Halved ladder entries with a doubled plane scale give bit-identical
    // effective efficiencies, hence identical reconstructions.
    Pnd truth = thermal_pnd(0.9, 7);
    std::vector<double> full{0.1, 0.3, 0.5, 0.7};
    std::vector<double> half{0.05, 0.15, 0.25, 0.35};
    std::vector<std::pair<double, double>> data_full, data_half;
    for (std::size_t mu = 0; mu < full.size(); ++mu) {
        data_full.emplace_back(full[mu], p_off(truth, full[mu]));
        data_half.emplace_back(half[mu], p_off(truth, full[mu]));
    }
    EmConfig direct;
    direct.trunc = 7;
    direct.max_iters = 2000;
    EmConfig upstream = rescale_plane(direct, 0.5);
    EmResultSingle a = em_single(data_full, direct);
    EmResultSingle b = em_single(data_half, upstream);
    for (std::size_t n = 0; n <= 7; ++n) CHECK(a.pnd[n] == b.pnd[n]);

    CHECK_THROWS_AS(rescale_plane(base, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(rescale_plane(base, 1.5), std::invalid_argument);
    EfficiencyLadder tall = EfficiencyLadder::uniform(0.3, 0.9, 4);
    CHECK_THROWS_AS(rescale_plane(base, 0.5, tall), std::invalid_argument);
    EfficiencyLadder low = EfficiencyLadder::uniform(0.05, 0.45, 4);
    EmConfig ok = rescale_plane(base, 0.5, low);
    CHECK(ok.plane_scale == doctest::Approx(2.0));
}

TEST_CASE("degenerate ladders are rejected") {
    std::vector<std::pair<double, double>> data{{1.0, 0.3}, {1.0, 0.3}};
    CHECK_THROWS_AS(em_single(data, {}), std::invalid_argument);
    CHECK_THROWS_AS(em_single({{0.5, 0.9}}, {}), std::invalid_argument);
}

TEST_CASE("frequency validation") {
    CHECK_THROWS_AS(em_single({{0.5, 1.2}, {0.6, 0.5}}, {}), std::invalid_argument);
    std::vector<double> etas{0.4, 0.6};
    CHECK_THROWS_AS(em_joint_frequencies(etas, {0.7, 0.7}, {0.3, 0.3}, {0.3, 0.3}, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(em_joint_frequencies(etas, {0.7}, {0.1, 0.1}, {0.1, 0.1}, {}),
                    std::invalid_argument);
    EmConfig bad;
    bad.plane_scale = 3.0;
    CHECK_THROWS_AS(em_single({{0.5, 0.5}, {0.6, 0.4}}, bad), std::invalid_argument);
}

TEST_CASE("reliable-window flag reacts to bright tails") {
    EfficiencyLadder ladder = EfficiencyLadder::uniform(0.05, 0.95, 30);
    EmConfig cfg;
    cfg.trunc = 12;
    cfg.rel_tol = 0.0;
    cfg.max_iters = 20000;

    EmResultSingle bright = em_single(exact_single_data(thermal_pnd(6.0, 12), ladder), cfg);
    CHECK(bright.diagnostics.mass_outside_reliable_window);

    EmResultSingle dim = em_single(exact_single_data(thermal_pnd(0.5, 12), ladder), cfg);
    CHECK_FALSE(dim.diagnostics.mass_outside_reliable_window);
}
