"""Power of the sensitivity analysis in the favorable situation.

Each sampling situation draws 1000 pair differences in two blocks of 500.
Pairs 1-500 have covariate 1 equal to 1 and carry the larger effect; pairs
501-1000 have covariate 1 equal to 0. Covariate 2 alternates 1, 0, 1, ...
inside each block so that all four interaction groups hold 250 pairs and
covariate 2 never modifies the effect.

Power at ``Gamma`` is the fraction of replications in which the submax test
rejects. Replication ``i`` draws its data from the substream
``SeedSequence(seed, spawn_key=(i,))``, so any subset or reordering of
replications reproduces the same draws.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import GroupedStudy
from .errors import SubmaxError
from .mvnorm import DEFAULT_MVN, MvnSettings
from .scoring import DEFAULT_PSI, METHODS, PsiParams, canonical_method
from .submax import SubmaxAnalysis

logger = logging.getLogger(__name__)

N_PAIRS = 1000
BLOCK = 500


@dataclass(frozen=True)
class BlockSpec:
    effect: float
    scale: float
    family: str = "normal"
    df: float | None = None

    def draw(self, rng: np.random.Generator, n: int, null: bool = False) -> np.ndarray:
        if self.family == "normal":
            eps = rng.standard_normal(n)
        elif self.family == "t":
            eps = rng.standard_t(self.df, n)
        else:
            raise ValueError(f"unknown error family {self.family!r}")
        return (0.0 if null else self.effect) + self.scale * eps

    def describe(self) -> str:
        err = "N(0,1)" if self.family == "normal" else f"t_{self.df:g}"
        return f"{self.effect:g} + {self.scale:g}*{err}"


@dataclass(frozen=True)
class SamplingSituation:
    id: int
    blocks: tuple[BlockSpec, BlockSpec]

    def describe(self) -> str:
        return f"({self.id}) pairs 1-500: {self.blocks[0].describe()}; pairs 501-1000: {self.blocks[1].describe()}"


SITUATIONS = {
    1: SamplingSituation(1, (BlockSpec(5.0, 10.0), BlockSpec(0.5, 1.0, "t", 2))),
    2: SamplingSituation(2, (BlockSpec(5.0, 5.0, "t", 3), BlockSpec(0.5, 0.5, "t", 3))),
    3: SamplingSituation(3, (BlockSpec(4.0, 5.0), BlockSpec(0.2, 1.0))),
    4: SamplingSituation(4, (BlockSpec(5.0, 5.0, "t", 3), BlockSpec(0.2, 0.5))),
    5: SamplingSituation(5, (BlockSpec(1.0, 1.0, "t", 2), BlockSpec(0.5, 1.0, "t", 2))),
}

# Gamma values tabulated for each situation
TABLE_GAMMAS = {1: (1, 2, 3, 4), 2: (1, 2, 3, 4, 5), 3: (1, 2, 3, 4, 5), 4: (1, 2, 3, 4, 5), 5: (1, 2, 3, 4, 5)}


def get_situation(situation) -> SamplingSituation:
    if isinstance(situation, SamplingSituation):
        return situation
    try:
        return SITUATIONS[int(situation)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown sampling situation {situation!r}; choose 1-5") from None


_COV = np.zeros((N_PAIRS, 2), dtype=np.int8)
_COV[:BLOCK, 0] = 1
_COV[:, 1] = (np.arange(N_PAIRS) % 2 == 0)
_COV.setflags(write=False)


def replication_rng(seed: int, replication_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication_index,)))


def generate_study(situation, seed: int, replication_index: int = 0, null: bool = False) -> GroupedStudy:
    """Draw one replication of a sampling situation.

    ``null=True`` zeroes both block effects, keeping the error laws.
    """
    sit = get_situation(situation)
    rng = replication_rng(seed, replication_index)
    d = np.concatenate([sit.blocks[0].draw(rng, BLOCK, null), sit.blocks[1].draw(rng, N_PAIRS - BLOCK, null)])
    return GroupedStudy.from_arrays(d, _COV)


@dataclass(frozen=True)
class PowerResult:
    situation: int
    gamma: float
    method: str
    power: float
    reps: int
    mc_se: float
    seed: int
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "situation": self.situation, "gamma": self.gamma, "method": self.method,
            "power": self.power, "mc_se": self.mc_se, "reps": self.reps,
            "seed": self.seed, "failures": self.failures,
        }


def _reject_counts(args):
    sit, methods, gammas, alpha, indices, seed, null, psi, settings = args
    counts = np.zeros((len(methods), len(gammas)), dtype=np.int64)
    failures = np.zeros(len(methods), dtype=np.int64)
    for i in indices:
        study = generate_study(sit, seed, i, null)
        for m, method in enumerate(methods):
            try:
                an = SubmaxAnalysis(study, method, psi, alpha, settings)
                dmax = an.deviates_grid(gammas).max(axis=1)
                counts[m] += dmax > an.kappa
            except SubmaxError as exc:
                failures[m] += 1
                logger.warning("situation %s replication %d %s: %s (counted as no rejection)", sit.id, i, method, exc)
    return counts, failures


def power_grid(situation, methods=METHODS, gammas=None, alpha: float = 0.05, reps: int = 10_000,
               seed: int = 0, null: bool = False, psi: PsiParams = DEFAULT_PSI,
               settings: MvnSettings = DEFAULT_MVN, workers: int = 1, progress=None) -> list[PowerResult]:
    """Power for every (method, Gamma) cell of one situation.

    All cells share the same replications; the critical value is solved once
    per replication and method and reused across ``gammas``.

    Parameters
    ----------
    situation : int or SamplingSituation
    methods : sequence of str
    gammas : sequence of float, optional
        Defaults to the tabulated values for the situation.
    alpha : float
    reps : int
    seed : int
        Root of the per-replication substreams.
    null : bool
        Zero both block effects (checks the level of the test).
    workers : int
        Processes to spread replications over; results do not depend on it.
    progress : callable, optional
        Called with the number of replications finished after each chunk.
    """
    sit = get_situation(situation)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    methods = tuple(canonical_method(m) for m in methods)
    gammas = np.asarray(TABLE_GAMMAS[sit.id] if gammas is None else gammas, dtype=float)
    chunk = max(1, min(500, math.ceil(reps / max(1, 4 * workers))))
    jobs = [(sit, methods, gammas, alpha, range(s, min(reps, s + chunk)), seed, null, psi, settings)
            for s in range(0, reps, chunk)]
    counts = np.zeros((len(methods), len(gammas)), dtype=np.int64)
    failures = np.zeros(len(methods), dtype=np.int64)
    done = 0
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = pool.map(_reject_counts, jobs)
            for job, (c, f) in zip(jobs, results):
                counts += c
                failures += f
                done += len(job[4])
                if progress:
                    progress(done)
    else:
        for job in jobs:
            c, f = _reject_counts(job)
            counts += c
            failures += f
            done += len(job[4])
            if progress:
                progress(done)
    out = []
    for m, method in enumerate(methods):
        for j, g in enumerate(gammas):
            p = counts[m, j] / reps
            out.append(PowerResult(sit.id, float(g), method, float(p), reps, math.sqrt(p * (1 - p) / reps),
                                   seed, int(failures[m])))
    return out


def estimate_power(situation, method: str, gamma: float, alpha: float = 0.05, reps: int = 10_000,
                   seed: int = 0, null: bool = False, psi: PsiParams = DEFAULT_PSI,
                   settings: MvnSettings = DEFAULT_MVN, workers: int = 1) -> PowerResult:
    """Rejection frequency of the submax test for one situation, method and ``Gamma``."""
    (res,) = power_grid(situation, (method,), (gamma,), alpha, reps, seed, null, psi, settings, workers)
    return res
