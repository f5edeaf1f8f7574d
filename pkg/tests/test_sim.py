import numpy as np
import pytest

from submaxsens.sim import (
    SITUATIONS, TABLE_GAMMAS, estimate_power, generate_study, get_situation, power_grid, replication_rng,
)


def test_situation_definitions():
    d = {s.id: s.describe() for s in SITUATIONS.values()}
    assert d[1] == "(1) pairs 1-500: 5 + 10*N(0,1); pairs 501-1000: 0.5 + 1*t_2"
    assert d[2] == "(2) pairs 1-500: 5 + 5*t_3; pairs 501-1000: 0.5 + 0.5*t_3"
    assert d[3] == "(3) pairs 1-500: 4 + 5*N(0,1); pairs 501-1000: 0.2 + 1*N(0,1)"
    assert d[4] == "(4) pairs 1-500: 5 + 5*t_3; pairs 501-1000: 0.2 + 0.5*N(0,1)"
    assert d[5] == "(5) pairs 1-500: 1 + 1*t_2; pairs 501-1000: 0.5 + 1*t_2"


def test_unknown_situation():
    with pytest.raises(ValueError):
        get_situation(6)


@pytest.mark.parametrize("sit", sorted(SITUATIONS))
def test_design(sit):
    s = generate_study(sit, 5, 3)
    assert s.n_pairs == 1000 and s.L == 2
    assert list(s.sizes) == [250] * 4
    assert np.all(s.covariates[:500, 0] == 1) and np.all(s.covariates[500:, 0] == 0)


def test_situation5_block_means():
    s = generate_study(5, 42)
    # t_2 has infinite variance; the median is a stable location check, the mean a loose one
    assert np.median(s.d[:500]) == pytest.approx(1.0, abs=0.15)
    assert np.median(s.d[500:]) == pytest.approx(0.5, abs=0.15)
    assert abs(s.d[:500].mean() - 1.0) < 5 * np.std(s.d[:500]) / np.sqrt(500)


def test_situation3_sd():
    for seed in range(5):
        assert generate_study(3, seed).d[500:].std(ddof=1) == pytest.approx(1.0, abs=0.1)


def test_reproducible_and_independent_streams():
    a = generate_study(2, 1, 7)
    b = generate_study(2, 1, 7)
    np.testing.assert_array_equal(a.d, b.d)
    assert not np.array_equal(a.d, generate_study(2, 1, 8).d)
    assert replication_rng(1, 7).random() == replication_rng(1, 7).random()


def test_null_keeps_errors():
    a = generate_study(3, 1, 0)
    b = generate_study(3, 1, 0, null=True)
    np.testing.assert_allclose(a.d[:500] - b.d[:500], 4.0)
    np.testing.assert_allclose(a.d[500:] - b.d[500:], 0.2)


def test_power_result_fields():
    r = estimate_power(1, "md", 2.0, reps=20, seed=3)
    assert r.reps == 20 and r.seed == 3 and r.gamma == 2.0
    assert r.mc_se == pytest.approx(np.sqrt(r.power * (1 - r.power) / 20))
    assert set(r.to_dict()) == {"situation", "gamma", "method", "power", "mc_se", "reps", "seed", "failures"}


def test_power_reproducible_and_chunk_independent():
    a = power_grid(4, ("gm",), (3.0, 5.0), reps=30, seed=9)
    b = power_grid(4, ("gm",), (3.0, 5.0), reps=30, seed=9)
    assert a == b
    singles = [estimate_power(4, "gm", g, reps=30, seed=9) for g in (3.0, 5.0)]
    assert [r.power for r in a] == [r.power for r in singles]


def test_power_parallel_matches_serial():
    a = power_grid(3, ("md", "m"), (4.0,), reps=24, seed=2)
    b = power_grid(3, ("md", "m"), (4.0,), reps=24, seed=2, workers=2)
    assert a == b


def test_power_non_increasing_in_gamma():
    res = power_grid(5, gammas=TABLE_GAMMAS[5], reps=100, seed=4)
    for m in ("mean_difference", "m_statistic", "group_m_statistic"):
        p = [r for r in res if r.method == m]
        for a, b in zip(p, p[1:]):
            assert b.power <= a.power + 2 * max(a.mc_se, b.mc_se, 1 / 100)


def test_situation5_full_power_at_gamma1():
    res = power_grid(5, gammas=(1.0,), reps=100, seed=6)
    assert all(r.power == 1.0 for r in res)


def test_reps_validation():
    with pytest.raises(ValueError):
        power_grid(1, reps=0)


def test_failures_counted(monkeypatch):
    from submaxsens import sim
    from submaxsens.errors import DegenerateScale

    class Boom:
        def __init__(self, *a, **k):
            raise DegenerateScale()

    monkeypatch.setattr(sim, "SubmaxAnalysis", Boom)
    (r,) = sim.power_grid(1, ("m",), (1.0,), reps=3, seed=0)
    assert r.power == 0.0 and r.failures == 3
