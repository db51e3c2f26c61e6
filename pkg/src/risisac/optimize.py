"""RIS phase search: genetic algorithm, simulated annealing and random phases.

Genes are real phase angles in [0, 2 pi); the unit-modulus profile is
``exp(1j * angles)``. All searches maximize the closed-form weighted sum
rate from :func:`risisac.sp_link.make_fitness`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SceneConfig
from .sp_link import SpConfig, make_fitness

TWO_PI = 2 * np.pi


@dataclass
class GaParams:
    population: int = 200
    elites: int = 10
    crossover: int = 160
    mutation: int = 20
    mutation_prob: float = 0.1
    generations: int = 100
    stall_generations: int = 20
    tournament: int = 2
    mutation_sigma: float = np.pi / 8
    seed: int = 0

    def __post_init__(self):
        if self.population <= 0:
            raise ValueError("population must be positive")
        if min(self.elites, self.crossover, self.mutation) < 0:
            raise ValueError("group sizes must be non-negative")
        if self.elites + self.crossover + self.mutation > self.population:
            raise ValueError("elites + crossover + mutation exceeds the population")
        if self.elites < 1:
            raise ValueError("at least one elite is needed for a monotone trace")


@dataclass
class SaParams:
    t0: float = 1000.0
    cooling: float = 0.99
    iterations: int = 2000
    step: float = np.pi / 8
    gene_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling rate must lie in (0, 1)")


@dataclass
class SearchResult:
    angles: np.ndarray
    fitness: float
    trace: np.ndarray

    @property
    def phases(self) -> np.ndarray:
        return np.exp(1j * self.angles)


def _tournament(rng, fit, n, size):
    picks = rng.integers(0, fit.shape[0], (n, size))
    return picks[np.arange(n), np.argmax(fit[picks], axis=1)]


def ga_optimize(scene: SceneConfig, sp: SpConfig, kappa=None, params: GaParams | None = None, fitness=None) -> SearchResult:
    """Elitist GA with tournament selection, uniform crossover and wrapped-Gaussian mutation.

    Slots left after elites, crossover and mutation children are refilled with
    random immigrants.
    """
    params = GaParams() if params is None else params
    fitness = make_fitness(scene, sp, kappa) if fitness is None else fitness
    m_r = scene.m_r
    rng = np.random.default_rng([params.seed, 0])
    pop = rng.uniform(0, TWO_PI, (params.population, m_r))
    fit = fitness(pop)
    trace = []
    best, stall = -np.inf, 0
    for gen in range(params.generations):
        order = np.argsort(-fit, kind="stable")
        pop, fit = pop[order], fit[order]
        trace.append(fit[0])
        if fit[0] > best:
            best, stall = fit[0], 0
        else:
            stall += 1
            if stall >= params.stall_generations:
                break
        if gen == params.generations - 1:
            break
        rng = np.random.default_rng([params.seed, gen + 1])
        elites = pop[: params.elites]
        pa = pop[_tournament(rng, fit, params.crossover, params.tournament)]
        pb = pop[_tournament(rng, fit, params.crossover, params.tournament)]
        kids = np.where(rng.random(pa.shape) < 0.5, pa, pb)
        pm = pop[_tournament(rng, fit, params.mutation, params.tournament)]
        hit = rng.random(pm.shape) < params.mutation_prob
        mutants = np.mod(pm + hit * rng.normal(0, params.mutation_sigma, pm.shape), TWO_PI)
        n_fill = params.population - params.elites - params.crossover - params.mutation
        immigrants = rng.uniform(0, TWO_PI, (n_fill, m_r))
        children = np.concatenate([kids, mutants, immigrants])
        pop = np.concatenate([elites, children])
        fit = np.concatenate([fit[: params.elites], fitness(children)])
    return SearchResult(pop[0].copy(), float(fit[0]), np.array(trace))


def sa_optimize(scene: SceneConfig, sp: SpConfig, kappa=None, params: SaParams | None = None, fitness=None,
                x0=None) -> SearchResult:
    """Metropolis search with geometric cooling; ``t0 <= 0`` gives a greedy hill-climb."""
    params = SaParams() if params is None else params
    fitness = make_fitness(scene, sp, kappa) if fitness is None else fitness
    rng = np.random.default_rng(params.seed)
    m_r = scene.m_r
    x = rng.uniform(0, TWO_PI, m_r) if x0 is None else np.mod(np.asarray(x0, dtype=float), TWO_PI)
    fx = float(fitness(x[None])[0])
    best_x, best_f = x.copy(), fx
    temp = params.t0
    trace = np.empty(params.iterations)
    for it in range(params.iterations):
        hit = rng.random(m_r) < params.gene_prob
        if not hit.any():
            hit[rng.integers(m_r)] = True
        cand = np.mod(x + hit * rng.normal(0, params.step, m_r), TWO_PI)
        fc = float(fitness(cand[None])[0])
        gain = fc - fx
        u = rng.random()
        if gain >= 0 or (temp > 0 and np.isfinite(fc) and u < np.exp(gain / temp)):
            x, fx = cand, fc
            if fx > best_f:
                best_x, best_f = x.copy(), fx
        trace[it] = best_f
        temp *= params.cooling
    return SearchResult(best_x, best_f, trace)


@dataclass
class RandomBaseline:
    mean: float
    max: float
    stderr: float
    n_samples: int


def random_baseline(scene: SceneConfig, sp: SpConfig, kappa=None, n_samples: int = 10_000, rng=None,
                    chunk: int = 1000, fitness=None) -> RandomBaseline:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    fitness = make_fitness(scene, sp, kappa) if fitness is None else fitness
    vals = []
    for start in range(0, n_samples, chunk):
        n = min(chunk, n_samples - start)
        vals.append(fitness(rng.uniform(0, TWO_PI, (n, scene.m_r))))
    vals = np.concatenate(vals)
    se = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return RandomBaseline(float(vals.mean()), float(vals.max()), se, n_samples)
