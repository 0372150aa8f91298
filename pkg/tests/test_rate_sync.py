import math
from fractions import Fraction

import pytest

from lanewatch.errors import ConfigError
from lanewatch.rate_sync import RateState, skip_count

FPS_GRID = [Fraction(10), Fraction(15), Fraction(24), Fraction(25), Fraction(30),
            Fraction(30000, 1001), Fraction(60)]
DT_GRID = [Fraction(1, n) for n in (1, 2, 3, 4, 5, 7, 8, 10, 12, 15, 20, 24, 25, 29, 30, 31,
                                   50, 60, 100)] + [Fraction(3, 40), Fraction(7, 100),
                                                    Fraction(2, 3), Fraction(9, 10)]


def exact_k(fps: Fraction, dt: Fraction) -> int:
    rate = 1 / dt
    return math.ceil(fps - rate) if rate < fps else 0


def test_k_examples():
    assert skip_count(30, 1 / 60) == 0
    assert skip_count(30, 0.1) == 20
    assert skip_count(25, 0.05) == 5
    assert skip_count(30, 1 / 30) == 0


def test_k_grid_matches_exact_rational_law():
    for fps in FPS_GRID:
        for dt in DT_GRID:
            assert skip_count(float(fps), float(dt)) == exact_k(fps, dt), (fps, dt)


def test_k_monotone_in_dt():
    for fps in FPS_GRID:
        ks = [skip_count(float(fps), float(dt)) for dt in sorted(DT_GRID)]
        assert ks == sorted(ks)


def test_record_and_update_ema():
    r = RateState(fps=30)
    assert r.record_and_update(0.1) == 20
    assert r.delta_t_ema == 0.1
    r.record_and_update(0.05)
    assert r.delta_t_ema == pytest.approx(0.2 * 0.05 + 0.8 * 0.1)
    assert r.K == math.ceil(30 - 1 / r.delta_t_ema)


@pytest.mark.parametrize("bad", [0.0, -0.01, math.nan, math.inf])
def test_invalid_dt_keeps_state(bad):
    r = RateState(fps=25)
    r.record_and_update(0.05)
    before = (r.delta_t_ema, r.K)
    assert r.record_and_update(bad) == 5
    assert (r.delta_t_ema, r.K) == before


def test_state_validation():
    with pytest.raises(ConfigError):
        RateState(fps=0)
    with pytest.raises(ConfigError):
        RateState(fps=30, ema_alpha=0)


def processed(r, frames, k_schedule=None):
    out = []
    for i in frames:
        if k_schedule:
            r.K = k_schedule(i)
        if r.should_process(i):
            out.append(i)
    return out


def test_should_process_examples():
    r = RateState(fps=30)
    assert processed(r, range(6)) == list(range(6))
    r = RateState(fps=30, K=2)
    assert processed(r, range(9)) == [0, 3, 6]
    r = RateState(fps=30)
    assert processed(r, range(12), lambda i: 0 if i <= 4 else 2) == [0, 1, 2, 3, 4, 7, 10]


def simulate_queue(fps, dt_of_frame, n_frames=10_000):
    """Frames arrive every 1/fps s; processing a frame takes dt_of_frame(i) s.

    Returns the largest backlog (arrived but not yet consumed frames) seen
    when the controller makes a decision.
    """
    r = RateState(fps=fps)
    t = 0.0
    worst = 0
    for i in range(n_frames):
        t = max(t, i / fps)
        arrived = min(n_frames, math.floor(t * fps + 1e-9) + 1)
        worst = max(worst, arrived - i)
        if r.should_process(i):
            dt = dt_of_frame(i)
            t += dt
            r.record_and_update(dt)
    return worst, r


@pytest.mark.parametrize("fps", [15, 25, 30])
def test_bounded_queue_under_step_changes(fps):
    levels = [0.01, 0.2, 0.05, 0.9, 0.02, 0.5, 0.1, 0.033]

    def dt_of_frame(i):
        return levels[(i // 1250) % len(levels)]

    worst, _ = simulate_queue(fps, dt_of_frame)
    assert worst <= fps


def test_fast_machine_never_skips():
    worst, r = simulate_queue(30, lambda i: 0.01, 2000)
    assert r.K == 0 and worst <= 1
