import math

import numpy as np
import pytest

from topoalign import _fallback
from topoalign.kernel import make_kernel
from topoalign.particle_sim import (InitialLaw, advance_to_next_event, execute_jump,
                                    generator_consistency_check, generator_value, run,
                                    sample_initial, state_from_configuration)
from topoalign.rank_engine import Configuration, interaction_probs_rank

try:
    from topoalign import _core
except ImportError:  # pragma: no cover
    _core = None

LIN = make_kernel("linear")
EXAMPLE = make_kernel("paper_example")
UNIFORM = make_kernel("uniform")


def test_initial_sampling_mean_velocity():
    s = sample_initial(1000, "uniform_x_two_point_v", 42)
    v = s.cfg.velocities[:, 0]
    assert set(np.unique(v)) <= {-1.0, 1.0}
    assert abs(v.mean()) <= 3 / math.sqrt(1000)
    assert s.N == 1000 and s.time == 0.0


def test_initial_sampling_determinism():
    a = sample_initial(50, "uniform_x_gauss_v", 7, dim=2, stream=3)
    b = sample_initial(50, "uniform_x_gauss_v", 7, dim=2, stream=3)
    c = sample_initial(50, "uniform_x_gauss_v", 7, dim=2, stream=4)
    assert np.array_equal(a.cfg.positions, b.cfg.positions)
    assert np.array_equal(a.cfg.velocities, b.cfg.velocities)
    assert not np.array_equal(a.cfg.positions, c.cfg.positions)
    assert sample_initial(2, "uniform_x_uniform_v", 1).N == 2


def test_tilted_positions():
    s = sample_initial(20000, InitialLaw("uniform_x_two_point_v", 0.5), 1)
    x = s.cfg.positions[:, 0]
    # E cos(2 pi x) = a / 2 under density 1 + a cos(2 pi x)
    assert np.cos(2 * np.pi * x).mean() == pytest.approx(0.25, abs=4 * 0.75 / math.sqrt(20000))


def test_free_flight_wraps():
    cfg = Configuration(np.array([0.9, 0.5]), np.array([1.0, 0.0]))
    st = state_from_configuration(cfg, 0)
    st.next_event_time = 0.2
    new, tau = advance_to_next_event(st)
    assert tau == pytest.approx(0.2)
    assert new.cfg.positions[0, 0] == pytest.approx(0.1)
    assert new.cfg.positions[1, 0] == 0.5


def test_zero_velocity_flight():
    cfg = Configuration(np.array([0.3, 0.7, 0.1]), np.zeros(3))
    new, tau = advance_to_next_event(state_from_configuration(cfg, 5))
    assert np.array_equal(new.cfg.positions, cfg.positions)
    assert new.time == pytest.approx(tau) and tau > 0


def test_waiting_time_mean():
    cfg = Configuration(np.array([0.3, 0.7]), np.array([-1.0, 1.0]))
    st = state_from_configuration(cfg, 11)
    taus = []
    for _ in range(20000):
        st, tau = advance_to_next_event(st)
        taus.append(tau)
    taus = np.array(taus)
    assert taus.mean() == pytest.approx(0.5, abs=3 * 0.5 / math.sqrt(taus.size))


def test_jump_outcomes_n2():
    cfg = Configuration(np.array([0.3, 0.7]), np.array([-1.0, 1.0]))
    st = state_from_configuration(cfg, 2)
    for _ in range(50):
        new, rec = execute_jump(st, LIN)
        v = new.cfg.velocities[:, 0]
        assert v[0] == v[1] and v[0] in (-1.0, 1.0)
        assert rec.partner == 1 - rec.chooser


def test_partner_frequencies():
    cfg = Configuration(np.array([0.0, 0.1, 0.3, 0.55]), np.arange(4.0))
    st = state_from_configuration(cfg, 9)
    n = 40000
    counts = np.zeros((4, 4))
    for _ in range(n):
        _, rec = execute_jump(st, LIN)  # st keeps the frozen configuration
        counts[rec.chooser, rec.partner] += 1
    expected = np.array([interaction_probs_rank(cfg, i, LIN) for i in range(4)]) / 4
    p_hat = counts / n
    sd = np.sqrt(expected * (1 - expected) / n)
    assert np.all(np.abs(p_hat - expected) <= 4.5 * sd + 1e-12)


def test_consensus_is_absorbing():
    cfg = Configuration(np.array([0.1, 0.4, 0.8]), np.full(3, 0.5))
    res = run(state_from_configuration(cfg, 3), EXAMPLE, 5.0, [1.0, 5.0])
    assert res.final.jump_count > 0
    for s in res.snapshots:
        assert np.all(s.velocities == 0.5)


def test_jump_count_poisson():
    N, t = 20, 0.5
    counts = [run(sample_initial(N, "uniform_x_two_point_v", 1, stream=r), LIN, t,
                  record_events=False).final.jump_count for r in range(400)]
    mean = np.mean(counts)
    assert mean == pytest.approx(N * t, abs=4 * math.sqrt(N * t / 400))
    assert np.var(counts, ddof=1) == pytest.approx(N * t, rel=0.3)


def test_t_end_zero():
    s = sample_initial(10, "uniform_x_gauss_v", 0)
    res = run(s, LIN, 0.0, [0.0])
    assert len(res.events) == 0
    assert len(res.snapshots) == 1
    assert np.array_equal(res.snapshots[0].positions, s.cfg.positions)
    assert np.array_equal(res.snapshots[0].velocities, s.cfg.velocities)


def test_run_is_reproducible():
    a = run(sample_initial(30, "uniform_x_gauss_v", 4, dim=2), EXAMPLE, 1.0, [0.5, 1.0])
    b = run(sample_initial(30, "uniform_x_gauss_v", 4, dim=2), EXAMPLE, 1.0, [0.5, 1.0])
    assert np.array_equal(a.events.times, b.events.times)
    assert np.array_equal(a.events.partners, b.events.partners)
    assert np.array_equal(a.final.cfg.velocities, b.final.cfg.velocities)


def test_run_matches_stepwise():
    s = sample_initial(12, "uniform_x_uniform_v", 8)
    res = run(s, EXAMPLE, 1.5)
    st = sample_initial(12, "uniform_x_uniform_v", 8)
    recs = []
    while True:
        nxt, _ = advance_to_next_event(st)
        if nxt.time > 1.5:
            break
        st, rec = execute_jump(nxt, EXAMPLE)
        recs.append(rec)
    assert len(recs) == len(res.events) > 0
    for a, b in zip(recs, res.events.records()):
        assert a.time == b.time and a.chooser == b.chooser and a.partner == b.partner
        assert a.velocity == b.velocity
    assert np.allclose(st.cfg.velocities, res.final.cfg.velocities)


def test_run_continues_from_pending_event():
    whole = run(sample_initial(15, "uniform_x_two_point_v", 6), LIN, 2.0)
    half = run(sample_initial(15, "uniform_x_two_point_v", 6), LIN, 1.0)
    rest = run(half.final, LIN, 2.0)
    times = np.concatenate([half.events.times, rest.events.times])
    assert np.array_equal(times, whole.events.times)
    assert np.array_equal(rest.final.cfg.velocities, whole.final.cfg.velocities)


@pytest.mark.skipif(_core is None, reason="compiled core not built")
@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("spec", [UNIFORM, LIN, EXAMPLE], ids=lambda s: s.name)
def test_backends_bit_identical(dim, spec):
    def go(backend):
        s = sample_initial(40, "uniform_x_gauss_v", 21, dim=dim, stream=dim)
        return run(s, spec, 2.0, [0.3, 1.0, 2.0], backend=backend)

    a, b = go(_core), go(_fallback)
    assert np.array_equal(a.events.choosers, b.events.choosers)
    assert np.array_equal(a.events.partners, b.events.partners)
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert np.array_equal(sa.positions, sb.positions)
        assert np.array_equal(sa.velocities, sb.velocities)


def _state_n2(seed=0):
    cfg = Configuration(np.array([0.2, 0.6]), np.array([-1.0, 1.0]))
    return state_from_configuration(cfg, seed)


def test_generator_exact_values():
    cfg = _state_n2().cfg
    assert generator_value(lambda x, v: 1.0, cfg, LIN) == 0.0
    # transport only: d/dt x_1 = v_1
    assert generator_value(lambda x, v: x[0, 0], cfg, LIN) == pytest.approx(-1.0, abs=1e-8)
    # v_1 jumps from -1 to +1 at rate pi_12 = 1
    assert generator_value(lambda x, v: v[0, 0], cfg, LIN) == pytest.approx(2.0)


def test_generator_check_constant():
    chk = generator_consistency_check(lambda x, v: 1.0, _state_n2(), LIN, 0.005, 2000)
    assert chk.exact == 0.0 and chk.residual == 0.0


def test_generator_check_position():
    chk = generator_consistency_check(lambda x, v: x[0, 0], _state_n2(), LIN, 0.005, 20000,
                                      seed=1)
    assert chk.residual <= 3 * chk.mc_stderr + 0.02


def test_generator_check_velocity():
    chk = generator_consistency_check(lambda x, v: v[0, 0], _state_n2(), LIN, 0.005, 50000,
                                      seed=2)
    assert chk.exact == pytest.approx(2.0)
    assert chk.residual <= 3 * chk.mc_stderr + 0.02


def test_generator_check_limits():
    with pytest.raises(ValueError):
        generator_consistency_check(lambda x, v: 1.0, _state_n2(), LIN, 0.05, 10)
    big = sample_initial(6, "uniform_x_two_point_v", 0)
    with pytest.raises(ValueError):
        generator_consistency_check(lambda x, v: 1.0, big, LIN, 0.005, 10)


def test_backend_selected_at_import():
    import os
    import subprocess
    import sys

    code = "import topoalign; print(topoalign.BACKEND)"
    env = {**os.environ, "TOPOALIGN_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.strip()
    assert out == "python"
    if _core is not None:
        env["TOPOALIGN_PURE_PYTHON"] = "0"
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True).stdout.strip()
        assert out == _core.BACKEND
