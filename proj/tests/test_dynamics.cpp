#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "pndkit/dynamics.hpp"
#include "pndkit/metrics.hpp"

using namespace pndkit;
using cplx = std::complex<double>;

namespace {

PulseParams pulse_at(double power_mw) {
    PulseParams p;
    p.power_mw = power_mw;
    return p;
}

} // namespace

TEST_CASE("parameter plumbing") {
    ResonatorParams res = ResonatorParams::table_defaults();
    CHECK(res.pump_coupling_rate() == doctest::Approx(0.926 * 1.84e-3).epsilon(1e-13));
    CHECK(res.gamma_es() == doctest::Approx(0.926 * 2.25e-3).epsilon(1e-13));
    res.gamma_ep = 1.0e-3;
    CHECK(res.pump_coupling_rate() == 1.0e-3);

    PulseParams pulse;
    CHECK(pulse.photon_energy() ==
          doctest::Approx(kHbar * pulse.pump_freq * 1e12).epsilon(1e-15));
    CHECK(pulse.photons_per_pulse() ==
          doctest::Approx(1e-3 / (2.5e6 * pulse.photon_energy())).epsilon(1e-12));
    CHECK(pulse.coupling() == default_pump_coupling());
    pulse.pump_coupling = 0.5;
    CHECK(pulse.coupling() == 0.5);

    ResonatorParams bad = res;
    bad.gamma_tot_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = res;
    bad.eta_es = 1.3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    PulseParams badp;
    badp.duration = 0.0;
    CHECK_THROWS_AS(badp.validate(), std::invalid_argument);
}

TEST_CASE("pump series interpolation") {
    PumpSeries s;
    s.dt = 1.0;
    s.amplitude = {cplx(0.0), cplx(1.0), cplx(2.0)};
    CHECK(s.t_end() == 2.0);
    CHECK(s.at(0.5) == cplx(0.5));
    CHECK(s.at(2.0) == cplx(2.0));
    CHECK(s.at(-0.1) == cplx(0.0));
    CHECK(s.at(2.5) == cplx(0.0));
}

TEST_CASE("linear cavity fill matches the closed form") {
    ResonatorParams res = ResonatorParams::table_defaults();
    res.lambda_bar = 0.0;
    PulseParams pulse = pulse_at(1.0);
    PumpSeries series = solve_pump(res, pulse, 2.0, true);

    const double g = res.gamma_tot_p;
    const double beta = std::sqrt(pulse.coupling() * pulse.photons_per_pulse() /
                                  pulse.duration);
    const double drive = std::sqrt(2.0 * res.pump_coupling_rate());
    for (double t : {50.0, 150.0, 250.0}) {
        cplx expect = cplx(0.0, -1.0) * (drive * beta / g) * (1.0 - std::exp(-g * t));
        cplx got = series.at(t);
        CHECK(std::abs(got - expect) < 1e-8 * std::abs(expect));
    }
    CHECK(std::abs(series.amplitude.front()) == 0.0);

    PumpSeries dark = solve_pump(res, pulse_at(0.0), 2.0, true);
    CHECK(std::abs(dark.at(100.0)) == 0.0);

    CHECK_THROWS_AS(solve_pump(res, pulse, 20.0, true), std::invalid_argument);
    CHECK_THROWS_AS(solve_pump(res, pulse, 0.0, true), std::invalid_argument);
}

TEST_CASE("kerr-shifted plateau obeys the steady-state balance") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PulseParams pulse = pulse_at(2.2);
    pulse.duration = 5000.0;
    PumpSeries series = solve_pump(res, pulse, 1.0, true);

    const double a2 = std::norm(series.at(5000.0));
    const double lam = res.lambda_bar_ps();
    const double beta2 = pulse.coupling() * pulse.photons_per_pulse() / pulse.duration;
    const double lhs = a2 * (res.gamma_tot_p * res.gamma_tot_p +
                             4.0 * lam * lam * a2 * a2);
    const double rhs = 2.0 * res.pump_coupling_rate() * beta2;
    CHECK(lhs == doctest::Approx(rhs).epsilon(2e-3));
    CHECK(a2 > 0.0);
}

TEST_CASE("master equation without squeezing stays in vacuum") {
    ResonatorParams res = ResonatorParams::table_defaults();
    res.lambda_bar = 0.0;
    PumpSeries series = solve_pump(res, pulse_at(1.0), 2.0, true);
    EvolveOptions opt;
    opt.nf = 4;
    EvolveResult out = evolve(res, series, opt);
    CHECK(out.final_state.mean_n(Arm::signal) < 1e-12);
    CHECK(out.final_state.mean_n(Arm::idler) < 1e-12);
    CHECK(out.final_state.trace() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(out.max_top_population < 1e-12);
}

TEST_CASE("symmetric arms stay symmetric") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PumpSeries series = solve_pump(res, pulse_at(0.5), 2.0, true);
    EvolveOptions opt;
    opt.nf = 6;
    EvolveResult out = evolve(res, series, opt);
    double worst = 0.0;
    for (std::size_t k = 0; k < out.mean_ns.size(); ++k)
        worst = std::max(worst, std::abs(out.mean_ns[k] - out.mean_ni[k]));
    CHECK(worst < 1e-12);
    CHECK(out.mean_ns.back() < out.mean_ns[out.mean_ns.size() / 2]);
}

TEST_CASE("master equation matches the gaussian moment route") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PumpSeries series = solve_pump(res, pulse_at(1.0), 1.0, true);

    EvolveOptions opt;
    opt.nf = 10;
    EvolveResult dense = evolve(res, series, opt);
    ScatteredMeans from_dense = mean_scattered(res, dense);
    ScatteredMeans from_moments = solve_moments(res, series, true).detected;

    CHECK(std::abs(from_dense.n_s - from_moments.n_s) < 1e-3 * from_moments.n_s);
    CHECK(std::abs(from_dense.n_i - from_moments.n_i) < 1e-3 * from_moments.n_i);
    CHECK(dense.max_top_population < 1e-8);
    CHECK(dense.trace_error.back() < 1e-10);

    // The peak-time snapshot is a valid distribution.
    CHECK(dense.peak_pnd.at(0, 0) > 0.5);
}

TEST_CASE("evolved states stay hermitian and positive") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PumpSeries series = solve_pump(res, pulse_at(1.0), 2.0, true);
    EvolveOptions opt;
    opt.nf = 6;
    QuantumState st = evolve(res, series, opt).final_state;
    const std::size_t d = st.dim();

    double herm = 0.0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            herm = std::max(herm,
                            std::abs(st.rho[a * d + b] - std::conj(st.rho[b * d + a])));
    CHECK(herm < 1e-10);

    // Power iteration on 1.5*I - rho exposes the smallest eigenvalue.
    std::mt19937_64 rng(3);
    std::vector<cplx> v(d), w(d);
    for (auto& x : v) x = cplx(std::uniform_real_distribution<>(-1, 1)(rng),
                               std::uniform_real_distribution<>(-1, 1)(rng));
    double lam = 0.0;
    for (int it = 0; it < 800; ++it) {
        for (std::size_t a = 0; a < d; ++a) {
            cplx acc = 1.5 * v[a];
            for (std::size_t b = 0; b < d; ++b) acc -= st.rho[a * d + b] * v[b];
            w[a] = acc;
        }
        double nrm = 0.0;
        for (const cplx& x : w) nrm += std::norm(x);
        nrm = std::sqrt(nrm);
        lam = nrm;
        for (std::size_t a = 0; a < d; ++a) v[a] = w[a] / nrm;
    }
    const double lambda_min = 1.5 - lam;
    CHECK(lambda_min > -1e-8);
}

TEST_CASE("scattered means integrate the decay channel") {
    ResonatorParams res = ResonatorParams::table_defaults();
    const double g = res.gamma_tot_s;
    EvolveResult r;
    const std::size_t steps = std::size_t(std::ceil(6.0 / g));
    for (std::size_t k = 0; k <= steps; ++k) {
        double t = double(k);
        r.times.push_back(t);
        r.mean_ns.push_back(std::exp(-2.0 * g * t));
        r.mean_ni.push_back(0.5 * std::exp(-2.0 * g * t));
    }
    ScatteredMeans m = mean_scattered(res, r);
    CHECK(m.n_s == doctest::Approx(res.eta_es).epsilon(1e-4));
    CHECK(m.n_i == doctest::Approx(0.5 * res.eta_ei).epsilon(1e-4));

    EvolveResult flat;
    for (std::size_t k = 0; k <= 10; ++k) {
        flat.times.push_back(double(k));
        flat.mean_ns.push_back(1.0);
        flat.mean_ni.push_back(1.0);
    }
    CHECK_THROWS_AS(mean_scattered(res, flat), numerical_error);

    EvolveResult stub;
    stub.times = {0.0};
    stub.mean_ns = {0.0};
    stub.mean_ni = {0.0};
    CHECK_THROWS_AS(mean_scattered(res, stub), std::invalid_argument);
}

TEST_CASE("quantum state helpers") {
    QuantumState v = QuantumState::vacuum(3);
    CHECK(v.mode_dim() == 4);
    CHECK(v.dim() == 16);
    CHECK(v.trace() == 1.0);
    CHECK(v.mean_n(Arm::signal) == 0.0);
    CHECK(v.top_level_population(Arm::idler) == 0.0);
    JointPnd pnd = v.joint_pnd();
    CHECK(pnd.at(0, 0) == 1.0);
}

TEST_CASE("evolution guards") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PumpSeries series = solve_pump(res, pulse_at(1.0), 2.0, true);
    EvolveOptions opt;
    opt.nf = 1;
    CHECK_THROWS_AS(evolve(res, series, opt), std::invalid_argument);
    opt.nf = 6;
    opt.dt = 0.0;
    CHECK_THROWS_AS(evolve(res, series, opt), std::invalid_argument);

    PumpSeries stub;
    stub.dt = 2.0;
    stub.amplitude = {cplx(1.0)};
    CHECK_THROWS_AS(evolve(res, stub, {}), std::invalid_argument);

    // Driving far past what the truncation can hold must be caught.
    PumpSeries hot = solve_pump(res, pulse_at(20.0), 2.0, true);
    EvolveOptions tiny;
    tiny.nf = 3;
    CHECK_THROWS_AS(evolve(res, hot, tiny), numerical_error);
}

TEST_CASE("trajectories without squeezing never click") {
    ResonatorParams res = ResonatorParams::table_defaults();
    res.lambda_bar = 0.0;
    TrajectoryOptions opt;
    opt.n_traj = 10;
    opt.nf = 3;
    TrajectoryRecord rec = simulate_trajectories(res, pulse_at(1.0), opt);
    REQUIRE(rec.counts.size() == 10);
    for (const auto& [cs, ci] : rec.counts) {
        CHECK(cs == 0);
        CHECK(ci == 0);
    }
}

TEST_CASE("trajectory sampling is reproducible and scheduler independent") {
    ResonatorParams res = ResonatorParams::table_defaults();
    TrajectoryOptions opt;
    opt.n_traj = 24;
    opt.nf = 6;
    opt.seed = 42;

    opt.threads = 1;
    TrajectoryRecord a = simulate_trajectories(res, pulse_at(1.0), opt);
    opt.threads = 3;
    TrajectoryRecord b = simulate_trajectories(res, pulse_at(1.0), opt);
    opt.threads = 0;
    TrajectoryRecord c = simulate_trajectories(res, pulse_at(1.0), opt);

    REQUIRE(a.counts.size() == 24);
    REQUIRE(b.counts.size() == 24);
    for (std::size_t i = 0; i < 24; ++i) {
        CHECK(a.counts[i] == b.counts[i]);
        CHECK(a.counts[i] == c.counts[i]);
    }
    CHECK(a.seed == 42);
}

TEST_CASE("trajectory click statistics agree with the moment route") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PulseParams pulse = pulse_at(1.0);
    TrajectoryOptions opt;
    opt.n_traj = 300;
    opt.nf = 6;
    opt.seed = 11;
    TrajectoryRecord rec = simulate_trajectories(res, pulse, opt);

    PumpSeries series = solve_pump(res, pulse, opt.pump_dt, opt.spm_on);
    ScatteredMeans expect = solve_moments(res, series, opt.xpm_on).detected;

    double sum_s = 0.0, sum_i = 0.0;
    for (const auto& [cs, ci] : rec.counts) {
        sum_s += double(cs);
        sum_i += double(ci);
    }
    const double n = double(opt.n_traj);
    const double sig_s = std::sqrt(n * expect.n_s);
    const double sig_i = std::sqrt(n * expect.n_i);
    CHECK(std::abs(sum_s - n * expect.n_s) < 3.0 * sig_s + 1.0);
    CHECK(std::abs(sum_i - n * expect.n_i) < 3.0 * sig_i + 1.0);
}

TEST_CASE("trajectory guards") {
    ResonatorParams res = ResonatorParams::table_defaults();
    TrajectoryOptions opt;
    opt.n_traj = 0;
    CHECK_THROWS_AS(simulate_trajectories(res, pulse_at(1.0), opt), std::invalid_argument);
    opt.n_traj = 1;
    opt.nf = 1;
    CHECK_THROWS_AS(simulate_trajectories(res, pulse_at(1.0), opt), std::invalid_argument);

    // A step so long the per-step click probability is no longer small.
    TrajectoryOptions coarse;
    coarse.n_traj = 1;
    coarse.nf = 10;
    coarse.dt_fine = 600.0;
    coarse.dt_coarse = 600.0;
    CHECK_THROWS_AS(simulate_trajectories(res, pulse_at(4.0), coarse), numerical_error);
}

TEST_CASE("trajectory binning and g2 arithmetic") {
    TrajectoryRecord rec;
    rec.counts = {{0, 0}, {0, 0}, {1, 2}, {9, 9}};
    JointPnd pnd = pnd_from_trajectories(rec, 2);
    CHECK(pnd.at(0, 0) == doctest::Approx(0.5));
    CHECK(pnd.at(1, 2) == doctest::Approx(0.25));
    CHECK(pnd.at(2, 2) == doctest::Approx(0.25));
    TrajectoryRecord empty;
    CHECK_THROWS_AS(pnd_from_trajectories(empty, 2), std::invalid_argument);
    CHECK_THROWS_AS(g2bar(empty, Arm::signal), std::invalid_argument);

    TrajectoryRecord clicks;
    for (int i = 0; i < 6; ++i) clicks.counts.push_back({0, 0});
    for (int i = 0; i < 3; ++i) clicks.counts.push_back({1, 0});
    clicks.counts.push_back({2, 0});
    G2Report rep = g2bar(clicks, Arm::signal);
    CHECK(rep.g2bar == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rep.schmidt_k == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK_THROWS_AS(g2bar(clicks, Arm::idler), std::domain_error);
}

TEST_CASE("time-integrated g2 at low power") {
    ResonatorParams res = ResonatorParams::table_defaults();
    G2Report a = g2bar_time_integrated(
        res, solve_pump(res, pulse_at(0.1), 1.0, false), false);
    CHECK(a.g2bar == doctest::Approx(1.88212).epsilon(2e-3));
    CHECK(a.schmidt_k == doctest::Approx(1.0 / (a.g2bar - 1.0)).epsilon(1e-12));

    G2Report b = g2bar_time_integrated(
        res, solve_pump(res, pulse_at(0.25), 1.0, false), false);
    CHECK(b.g2bar == doctest::Approx(1.88234).epsilon(2e-3));
    CHECK(std::abs(b.g2bar - a.g2bar) < 5e-3);
}

TEST_CASE("detuning scan brackets the nonlinear optimum") {
    ResonatorParams res = ResonatorParams::table_defaults();
    PulseParams pulse = pulse_at(1.0);
    std::vector<double> detunings{-2.0e-3, -1.07e-3, 0.0};
    std::vector<ScatteredMeans> out = scan_detuning(res, pulse, detunings);
    REQUIRE(out.size() == 3);
    CHECK(out[1].n_s > out[0].n_s);
    CHECK(out[1].n_s > out[2].n_s);

    PumpSeries series = solve_pump(res, pulse, 1.0, true);
    ScatteredMeans direct = solve_moments(res, series, true).detected;
    CHECK(out[2].n_s == direct.n_s);
    CHECK(out[2].n_i == direct.n_i);
}
