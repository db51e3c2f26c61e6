import numpy as np
import pytest

from risisac import optimize as opt
from risisac import sp_link as spl
from risisac.channel import SceneConfig, los_geometry, matched_phases


def rect_scene(k=4, ris=(10, 10), seed=5):
    rng = np.random.default_rng(seed)
    ue = np.column_stack([rng.uniform(-20, -3, k), rng.uniform(3, 20, k), np.zeros(k)])
    return SceneConfig(ris_shape=ris, ue_positions=ue)


@pytest.fixture(scope="module")
def fig8():
    sc = rect_scene()
    sp = spl.SpConfig.from_scene(sc)
    fit = spl.make_fitness(sc, sp)
    return sc, sp, fit


def test_parameter_validation():
    assert opt.GaParams().population == 200 and opt.GaParams().elites == 10
    assert (opt.GaParams().crossover, opt.GaParams().mutation, opt.GaParams().mutation_prob) == (160, 20, 0.1)
    assert (opt.SaParams().t0, opt.SaParams().cooling) == (1000.0, 0.99)
    with pytest.raises(ValueError):
        opt.GaParams(population=0)
    with pytest.raises(ValueError):
        opt.GaParams(population=50, elites=10, crossover=40, mutation=10)
    with pytest.raises(ValueError):
        opt.SaParams(cooling=1.0)


def test_ga_trace_monotone_and_deterministic():
    sc = rect_scene(ris=(4, 4))
    sp = spl.SpConfig.from_scene(sc)
    params = opt.GaParams(population=40, elites=2, crossover=30, mutation=6, generations=50, stall_generations=50,
                          seed=3)
    a = opt.ga_optimize(sc, sp, params=params)
    b = opt.ga_optimize(sc, sp, params=params)
    assert len(a.trace) == 50
    assert np.all(np.diff(a.trace) >= 0)
    assert np.array_equal(a.angles, b.angles) and np.array_equal(a.trace, b.trace)
    assert np.all((a.angles >= 0) & (a.angles < 2 * np.pi))
    assert np.allclose(np.abs(a.phases), 1.0, atol=0)
    assert a.fitness == pytest.approx(spl.weighted_sum_rate(sc, a.phases, sp), rel=1e-12)


def test_ga_stops_on_stagnation():
    sc = rect_scene(ris=(2, 2))
    sp = spl.SpConfig.from_scene(sc)
    res = opt.ga_optimize(sc, sp, fitness=lambda x: np.zeros(x.shape[0]),
                          params=opt.GaParams(stall_generations=5))
    assert len(res.trace) == 6


def test_optimizers_beat_random(fig8):
    sc, sp, fit = fig8
    rb = opt.random_baseline(sc, sp, n_samples=10_000, rng=np.random.default_rng(0), fitness=fit)
    ga = opt.ga_optimize(sc, sp, fitness=fit)
    sa = opt.sa_optimize(sc, sp, fitness=fit)
    assert ga.fitness > rb.mean and ga.fitness > rb.max
    assert rb.mean < sa.fitness <= 1.02 * ga.fitness


def test_ga_reaches_phase_matched_optimum():
    sc = SceneConfig(ue_positions=[[-8.0, 6.0, 0.0]], pure_los=True)
    sp = spl.SpConfig.from_scene(sc)
    geo = los_geometry(sc)
    best = spl.weighted_sum_rate(sc, matched_phases(geo.a_r, geo.a_k[0]), sp)
    res = opt.ga_optimize(sc, sp)
    assert res.fitness >= 0.99 * best
    assert res.fitness <= best * (1 + 1e-9)


def test_sa_best_trace_monotone(fig8):
    sc, sp, fit = fig8
    res = opt.sa_optimize(sc, sp, fitness=fit, params=opt.SaParams(iterations=300, seed=2))
    assert res.trace.shape == (300,)
    assert np.all(np.diff(res.trace) >= 0)
    assert res.trace[-1] == res.fitness


def _moves(t0):
    """Number of genes changed between each proposal and the best point seen before it."""
    rng = np.random.default_rng(0)
    target = rng.uniform(0, 2 * np.pi, 12)
    calls = []

    def fitness(x):
        calls.append(x[0].copy())
        return -np.sum(1 - np.cos(x - target), axis=1) + rng.normal(0, 0.5)

    sc = rect_scene(k=1, ris=(3, 4))
    sp = spl.SpConfig.from_scene(sc)
    params = opt.SaParams(t0=t0, cooling=0.999, iterations=200, gene_prob=0.0, seed=1)
    opt.sa_optimize(sc, sp, fitness=fitness, params=params)
    return calls


def test_zero_temperature_is_greedy():
    # a single gene moves per proposal; a greedy walk always proposes next to its best point
    calls = _moves(0.0)
    rng = np.random.default_rng(0)
    target = rng.uniform(0, 2 * np.pi, 12)
    noise = [rng.normal(0, 0.5) for _ in calls]
    vals = [-np.sum(1 - np.cos(c - target)) + e for c, e in zip(calls, noise)]
    best = 0
    for i in range(1, len(calls)):
        assert np.count_nonzero(calls[i] != calls[best]) == 1
        if vals[i] >= vals[best]:
            best = i


def test_hot_annealing_accepts_worse_moves():
    calls = _moves(1e6)
    rng = np.random.default_rng(0)
    target = rng.uniform(0, 2 * np.pi, 12)
    noise = [rng.normal(0, 0.5) for _ in calls]
    vals = [-np.sum(1 - np.cos(c - target)) + e for c, e in zip(calls, noise)]
    best, away = 0, 0
    for i in range(1, len(calls)):
        away += np.count_nonzero(calls[i] != calls[best]) > 1
        if vals[i] >= vals[best]:
            best = i
    assert away > 0


def test_random_baseline_properties():
    sc = rect_scene(ris=(4, 4))
    sp = spl.SpConfig.from_scene(sc)
    one = opt.random_baseline(sc, sp, n_samples=1, rng=np.random.default_rng(0))
    assert one.mean == one.max and one.stderr == 0.0
    a = opt.random_baseline(sc, sp, n_samples=500, rng=np.random.default_rng(1), chunk=64)
    b = opt.random_baseline(sc, sp, n_samples=500, rng=np.random.default_rng(1), chunk=64)
    assert a == b
    with pytest.raises(ValueError):
        opt.random_baseline(sc, sp, n_samples=0)


def test_random_mean_grows_with_ris_size():
    means = []
    for side in (4, 8, 12):
        sc = rect_scene(ris=(side, side))
        sp = spl.SpConfig.from_scene(sc)
        means.append(opt.random_baseline(sc, sp, n_samples=2000, rng=np.random.default_rng(2)).mean)
    assert np.all(np.diff(means) > 0)
