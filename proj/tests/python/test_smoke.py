import math

import pytest

import pndkit


def test_model_states():
    th = pndkit.thermal_pnd(1.2, 40)
    assert th.mean() == pytest.approx(1.2, rel=1e-6)
    assert th.variance() == pytest.approx(1.2 * 2.2, rel=1e-4)

    co = pndkit.coherent_pnd(1.2, 40)
    assert pndkit.mandel_q(co) == pytest.approx(0.0, abs=1e-6)

    tms = pndkit.tms_joint_pnd(0.4, 30)
    assert tms.at(0, 0) == pytest.approx(1.0 / math.cosh(0.4) ** 2, rel=1e-9)
    assert pndkit.noise_reduction(tms).nrf == 0.0


def test_validation_errors_map_to_python():
    with pytest.raises(ValueError):
        pndkit.thermal_pnd(-1.0, 10)
    with pytest.raises(ValueError):
        pndkit.EfficiencyLadder([0.5])


def test_sampling_is_deterministic():
    state = pndkit.tms_joint_pnd(0.3, 8)
    ladder = pndkit.EfficiencyLadder.uniform(0.1, 0.9, 5)
    a = pndkit.sample_click_table(state, ladder, 10000, seed=21)
    b = pndkit.sample_click_table(state, ladder, 10000, seed=21)
    assert [(r.c00, r.c01, r.c10, r.c11) for r in a.rows] == [
        (r.c00, r.c01, r.c10, r.c11) for r in b.rows
    ]


def test_noiseless_em_round_trip():
    truth = pndkit.source_model_state(
        pndkit.SourceModelParams.device_defaults().at_power(1.0), 5
    )
    ladder = pndkit.EfficiencyLadder.uniform(0.05, 0.95, 20)
    probs = [pndkit.click_probs_joint(truth, eta) for eta in ladder.etas]

    cfg = pndkit.EmConfig()
    cfg.trunc = 5
    cfg.rel_tol = 0.0
    cfg.max_iters = 20000
    result = pndkit.em_joint_frequencies(
        ladder.etas,
        [p.p00 for p in probs],
        [p.p01 for p in probs],
        [p.p10 for p in probs],
        cfg,
    )
    assert result.diagnostics.iterations == 20000
    assert pndkit.fidelity(result.pnd, truth) > 0.99


def test_fit_recovers_exact_model():
    params = pndkit.SourceModelParams.device_defaults().at_power(1.5)
    state = pndkit.source_model_state(params, 9)
    fit = pndkit.fit_source_model(state)
    assert fit.r == pytest.approx(params.r, abs=1e-3)
    assert fit.fidelity > 0.999999


def test_dynamics_moment_route():
    res = pndkit.ResonatorParams.table_defaults()
    pulse = pndkit.PulseParams()
    pulse.power_mw = 1.0
    pump = pndkit.solve_pump(res, pulse, dt=1.0)
    assert pump.t_end() > pulse.duration

    moments = pndkit.solve_moments(res, pump)
    assert moments.detected.n_s > 0.0
    assert moments.detected.n_s == pytest.approx(moments.detected.n_i, rel=1e-6)

    g2 = pndkit.g2bar_time_integrated(res, pump)
    assert 1.0 < g2.g2bar < 2.0


def test_trajectories_smoke():
    res = pndkit.ResonatorParams.table_defaults()
    pulse = pndkit.PulseParams()
    pulse.power_mw = 1.0

    opts = pndkit.TrajectoryOptions()
    opts.n_traj = 20
    opts.nf = 5
    opts.seed = 9
    record = pndkit.simulate_trajectories(res, pulse, opts)
    assert record.seed == 9
    assert len(record.counts) == 20

    again = pndkit.simulate_trajectories(res, pulse, opts)
    assert record.counts == again.counts

    pnd = pndkit.pnd_from_trajectories(record, 4)
    assert sum(pnd.probs) == pytest.approx(1.0, abs=1e-12)
