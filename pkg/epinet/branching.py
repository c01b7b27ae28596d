"""
epinet - Branching Processes
Procesos Crump-Mode-Jagers con descendencia binomial mixta

Una partícula nacida en el tiempo b vive un período sorteado de la ley de
vida. Lleva N ensayos (N con la ley de D~ - 1 de la ley de ensayos, cada uno
conservado con probabilidad `success`); cada ensayo conservado recibe un
reloj Exp(beta) y produce un hijo en b + reloj si suena antes de que la
partícula muera.

Secciones Principales:
----------------------

1. **Leyes** - ReproductionLaw, early_phase_law(), final_phase_law(),
   malthusian_parameter(), expected_population()
2. **Simulación** - simulate_cmj(), que devuelve un PopulationTrace
3. **Tiempos de alcance y extinción** - hitting_time_supercritical(),
   extinction_time_subcritical()
4. **Conjuntos de réplicas** - hitting_time_ensemble(), extinction_time_ensemble(),
   survival_decay_rate(), growth_trend()
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd

from analytics import (
    EpidemicParameters,
    UnsupportedRegimeError,
    decay_root,
    growth_root,
    solve_qtilde_star,
    susceptible_degree_profile,
)
from distributions import (
    DegreeModel,
    DomainError,
    ExponentialPeriod,
    InfectiousPeriodModel,
    InfinitePeriod,
)

logger = logging.getLogger(__name__)

BIRTH, DEATH = 0, 1
DEFAULT_POPULATION_CAP = 10_000_000
FIRST_DRAW_BLOCK = 16
DRAW_BLOCK = 4096


# =============================================================================
# LEYES DE REPRODUCCIÓN
# =============================================================================

@dataclass(frozen=True)
class ReproductionLaw:
    trials: DegreeModel
    beta: float
    lifetime: InfectiousPeriodModel
    success: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"birth clock rate beta={self.beta} must be positive")
        if not (0.0 <= self.success <= 1.0):
            raise DomainError(f"success probability {self.success} outside [0, 1]")

    def sample_trials(self, rng: np.random.Generator, size: int) -> np.ndarray:
        counts = self.trials.sample_size_biased(rng, size) - 1
        if self.success < 1.0:
            counts = rng.binomial(counts, self.success)
        return counts

    def mean_trials(self) -> float:
        if self.success == 0:
            return 0.0
        return self.success * self.trials.size_biased_excess_mean()

    def transform(self, x: float) -> float:
        """Laplace transform of the mean reproduction measure."""
        phi = self.lifetime.contact_transform(self.beta, x)
        if phi == 0:
            return 0.0
        return self.mean_trials() * phi

    def mean_offspring(self) -> float:
        return self.transform(0.0)


def early_phase_law(params: EpidemicParameters) -> ReproductionLaw:
    """Offspring law of the early phase: D~ - 1 trials, all available."""
    return ReproductionLaw(params.degree, params.beta, params.infectious_period, 1.0, "early")


def final_phase_law(params: EpidemicParameters, qtilde: Optional[float] = None) -> ReproductionLaw:
    """
    Offspring law of the final phase: D~* - 1 trials, each reaching a
    never-infected neighbour with probability p*_ss.
    """
    if qtilde is None:
        qtilde = solve_qtilde_star(params)
    profile = susceptible_degree_profile(params, qtilde)
    return ReproductionLaw(profile.degree_model(), params.beta, params.infectious_period,
                           profile.p_ss, "final")


def malthusian_parameter(law: ReproductionLaw) -> float:
    """Root of transform(x) = 1: positive above criticality, negative below."""
    m = law.mean_offspring()
    if m > 1.0:
        return growth_root(law.transform, label=f"{law.label} transform")
    if m == 1.0:
        return 0.0
    abscissa = -(law.beta + law.lifetime.tail_rate)
    return decay_root(law.transform, abscissa, label=f"{law.label} transform").alpha_star


def expected_population(law: ReproductionLaw, t, ancestors: int = 1) -> np.ndarray:
    """
    E[Z(t)] for exponential lifetimes, from the renewal equation:
    k (N exp(a t) - exp(-mu t)) / (N - 1) with a = N beta - beta - mu, where N is
    the mean number of kept trials (k exp(-mu t) (1 + beta t) when N = 1).
    """
    if not isinstance(law.lifetime, ExponentialPeriod):
        raise DomainError(f"closed-form mean needs exponential lifetimes, got {law.lifetime.describe()}")
    t = np.asarray(t, dtype=float)
    mu = law.lifetime.rate
    n_trials = law.mean_trials()
    if abs(n_trials - 1.0) < 1e-12:
        return ancestors * np.exp(-mu * t) * (1.0 + law.beta * t)
    alpha = n_trials * law.beta - law.beta - mu
    return ancestors * (n_trials * np.exp(alpha * t) - np.exp(-mu * t)) / (n_trials - 1.0)


# =============================================================================
# SIMULACIÓN DEL PROCESO
# =============================================================================

class _DrawBuffer:
    """Hands out values of a vectorised sampler one at a time, in doubling blocks."""

    def __init__(self, draw: Callable[[int], np.ndarray]):
        self._draw = draw
        self._values: List = []
        self._pos = 0
        self._block = FIRST_DRAW_BLOCK

    def next(self):
        if self._pos >= len(self._values):
            self._values = self._draw(self._block).tolist()
            self._block = min(2 * self._block, DRAW_BLOCK)
            self._pos = 0
        value = self._values[self._pos]
        self._pos += 1
        return value

    def take(self, count: int) -> List:
        return [self.next() for _ in range(count)]


@dataclass
class PopulationTrace:
    times: np.ndarray
    kinds: np.ndarray
    particles: np.ndarray
    parents: np.ndarray
    lines: np.ndarray
    ancestors: int
    born: int
    alive_end: int
    end_time: float
    extinct: bool
    extinction_time: float
    truncated: bool
    stop_reason: str
    hit_time: Optional[float] = None

    def alive_at(self, t) -> np.ndarray:
        """Z(t) from the recorded events."""
        if self.times.size == 0:
            return np.zeros(np.shape(t), dtype=np.int64)
        steps = np.cumsum(np.where(self.kinds == BIRTH, 1, -1))
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, steps[np.maximum(idx - 1, 0)], 0)

    def total_at(self, t) -> np.ndarray:
        if self.times.size == 0:
            return np.zeros(np.shape(t), dtype=np.int64)
        births = np.cumsum(self.kinds == BIRTH)
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, births[np.maximum(idx - 1, 0)], 0)

    def _lifespans(self):
        birth = np.full(self.born, np.nan)
        death = np.full(self.born, np.inf)
        is_birth = self.kinds == BIRTH
        birth[self.particles[is_birth]] = self.times[is_birth]
        death[self.particles[~is_birth]] = self.times[~is_birth]
        return birth, death

    def age_profile(self, t: float, bins) -> np.ndarray:
        """Histogram of the ages of the particles alive at time t, Z(t; a)."""
        birth, death = self._lifespans()
        alive = (birth <= t) & (death > t)
        counts, _ = np.histogram(t - birth[alive], bins=bins)
        return counts

    def first_time_reaching(self, k: int, count: str = "alive") -> float:
        steps = (np.cumsum(np.where(self.kinds == BIRTH, 1, -1)) if count == "alive"
                 else np.cumsum(self.kinds == BIRTH))
        hits = np.flatnonzero(steps >= k)
        return float(self.times[hits[0]]) if hits.size else math.nan

    def line_extinction_times(self) -> np.ndarray:
        """Last death in the line of descent of each ancestor."""
        _, death = self._lifespans()
        out = np.zeros(self.ancestors)
        line_of = np.zeros(self.born, dtype=np.int64)
        is_birth = self.kinds == BIRTH
        line_of[self.particles[is_birth]] = self.lines[is_birth]
        np.maximum.at(out, line_of, death)
        return out


def simulate_cmj(law: ReproductionLaw, ancestors: int = 1, seed=None, *,
                 horizon: float = math.inf, stop_alive: Optional[int] = None,
                 stop_total: Optional[int] = None,
                 population_cap: int = DEFAULT_POPULATION_CAP,
                 record: bool = True) -> PopulationTrace:
    """
    Event-driven simulation from `ancestors` newborn particles at time 0.

    Stops at extinction, at the horizon, when Z reaches stop_alive, when the
    total born reaches stop_total, or when population_cap particles have been
    born (flagged as truncated).
    """
    if ancestors < 1:
        raise DomainError(f"ancestors={ancestors} must be at least 1")
    rng = np.random.default_rng(seed)
    lifetimes = _DrawBuffer(lambda m: law.lifetime.sample(rng, m))
    trial_counts = _DrawBuffer(lambda m: law.sample_trials(rng, m))
    clocks = _DrawBuffer(lambda m: rng.exponential(1.0 / law.beta, m))

    events: List[tuple] = []
    heap: list = []
    counter = itertools.count()
    state = {"born": 0, "alive": 0}

    def spawn(parent: int, line: int, t: float) -> None:
        pid = state["born"]
        state["born"] += 1
        state["alive"] += 1
        if record:
            events.append((t, BIRTH, pid, parent, line))
        life = lifetimes.next()
        for clock in clocks.take(int(trial_counts.next())):
            if clock < life:
                heapq.heappush(heap, (t + clock, next(counter), BIRTH, pid, line))
        if math.isfinite(life):
            heapq.heappush(heap, (t + life, next(counter), DEATH, pid, line))

    for a in range(ancestors):
        spawn(-1, a, 0.0)

    def reached() -> bool:
        return ((stop_alive is not None and state["alive"] >= stop_alive)
                or (stop_total is not None and state["born"] >= stop_total))

    now = 0.0
    stop_reason = "exhausted"
    hit_time = 0.0 if reached() else None
    if hit_time is not None:
        stop_reason = "hit"
    while hit_time is None and heap:
        t, _, kind, pid, line = heapq.heappop(heap)
        if t > horizon:
            stop_reason = "horizon"
            now = horizon
            break
        now = t
        if kind == BIRTH:
            spawn(pid, line, t)
        else:
            state["alive"] -= 1
            if record:
                events.append((t, DEATH, pid, -1, line))
        if reached():
            hit_time = t
            stop_reason = "hit"
            break
        if state["alive"] == 0:
            stop_reason = "extinct"
            break
        if state["born"] >= population_cap:
            stop_reason = "cap"
            logger.warning(f"{law.label} process truncated after {state['born']} births at t={t:.6g}")
            break

    extinct = state["alive"] == 0
    columns = list(zip(*events)) if events else [(), (), (), (), ()]
    return PopulationTrace(
        times=np.asarray(columns[0], dtype=float), kinds=np.asarray(columns[1], dtype=np.int8),
        particles=np.asarray(columns[2], dtype=np.int64), parents=np.asarray(columns[3], dtype=np.int64),
        lines=np.asarray(columns[4], dtype=np.int64), ancestors=ancestors,
        born=state["born"], alive_end=state["alive"], end_time=now,
        extinct=extinct, extinction_time=now if extinct else math.inf,
        truncated=stop_reason == "cap", stop_reason=stop_reason, hit_time=hit_time,
    )


# =============================================================================
# TIEMPOS DE LLEGADA Y DE EXTINCIÓN
# =============================================================================

@dataclass(frozen=True)
class HittingTime:
    time: float
    rejected: int
    truncated: bool


def hitting_time_supercritical(law: ReproductionLaw, k: int, seed=None, *, count: str = "alive",
                               max_attempts: int = 10_000,
                               population_cap: int = DEFAULT_POPULATION_CAP) -> HittingTime:
    """
    First time Z (count='alive') or the total born (count='total') reaches k,
    conditioned on survival: runs that die out first are rejected and redrawn.
    """
    if law.mean_offspring() <= 1.0:
        raise UnsupportedRegimeError(f"{law.label} law has mean offspring {law.mean_offspring()} <= 1")
    if count not in ("alive", "total"):
        raise DomainError(f"count={count!r} must be 'alive' or 'total'")
    rng = np.random.default_rng(seed)
    for attempt in range(max_attempts):
        trace = simulate_cmj(
            law, 1, rng, record=False, population_cap=population_cap,
            stop_alive=k if count == "alive" else None,
            stop_total=k if count == "total" else None,
        )
        if trace.hit_time is not None:
            return HittingTime(trace.hit_time, attempt, False)
        if trace.truncated:
            return HittingTime(math.nan, attempt, True)
    logger.warning(f"no surviving run reached k={k} in {max_attempts} attempts")
    return HittingTime(math.nan, max_attempts, True)


@dataclass(frozen=True)
class ExtinctionTime:
    time: float
    truncated: bool


def extinction_time_subcritical(law: ReproductionLaw, k: int, seed=None, *,
                                population_cap: int = DEFAULT_POPULATION_CAP) -> ExtinctionTime:
    """Extinction time of the process started from k ancestors."""
    if law.mean_offspring() >= 1.0:
        raise UnsupportedRegimeError(f"{law.label} law has mean offspring {law.mean_offspring()} >= 1")
    if isinstance(law.lifetime, InfinitePeriod):
        raise DomainError(f"{law.lifetime.describe()} lifetimes never end")
    trace = simulate_cmj(law, k, seed, record=False, population_cap=population_cap)
    return ExtinctionTime(trace.extinction_time if trace.extinct else math.nan, trace.truncated)


# =============================================================================
# ENSAMBLES
# =============================================================================

def hitting_time_ensemble(law: ReproductionLaw, ks: Sequence[int], replicates: int,
                          base_seed: int = 0, count: str = "alive",
                          population_cap: int = DEFAULT_POPULATION_CAP) -> pd.DataFrame:
    """One surviving run per replicate, read at every k (seed = base_seed + replicate)."""
    if law.mean_offspring() <= 1.0:
        raise UnsupportedRegimeError(f"{law.label} law has mean offspring {law.mean_offspring()} <= 1")
    top = max(ks)
    rows = []
    for replicate in range(replicates):
        seed = base_seed + replicate
        rng = np.random.default_rng(seed)
        rejected = 0
        while True:
            trace = simulate_cmj(law, 1, rng, population_cap=population_cap,
                                 stop_alive=top if count == "alive" else None,
                                 stop_total=top if count == "total" else None)
            if trace.hit_time is not None or trace.truncated:
                break
            rejected += 1
        for k in ks:
            rows.append({
                "replicate": replicate, "seed": seed, "k": k,
                "time": trace.first_time_reaching(k, count),
                "survived": trace.hit_time is not None, "rejected": rejected,
                "truncated": trace.truncated,
            })
    logger.info(f"{law.label} hitting times: {replicates} replicates, k up to {top}")
    return pd.DataFrame(rows)


def extinction_time_ensemble(law: ReproductionLaw, ks: Sequence[int], replicates: int,
                             base_seed: int = 0,
                             population_cap: int = DEFAULT_POPULATION_CAP) -> pd.DataFrame:
    rows = []
    for replicate in range(replicates):
        for k in ks:
            seed = base_seed + replicate
            result = extinction_time_subcritical(law, k, [seed, k], population_cap=population_cap)
            rows.append({"replicate": replicate, "seed": seed, "k": k, "time": result.time,
                         "survived": False, "truncated": result.truncated})
    logger.info(f"{law.label} extinction times: {replicates} replicates, k in {list(ks)}")
    return pd.DataFrame(rows)


def survival_decay_rate(law: ReproductionLaw, times: Sequence[float], replicates: int,
                        base_seed: int = 0):
    """
    Slope of log P(Z(t) > 0) against t for a single ancestor; approaches the
    decay rate alpha* for Malthusian subcritical laws.
    """
    extinction = np.array([
        simulate_cmj(law, 1, base_seed + r, record=False).extinction_time for r in range(replicates)
    ])
    times = np.asarray(times, dtype=float)
    survival = np.array([(extinction > t).mean() for t in times])
    usable = survival > 0
    if usable.sum() < 2:
        raise DomainError("fewer than two time points with surviving runs")
    slope = float(np.polyfit(times[usable], np.log(survival[usable]), 1)[0])
    frame = pd.DataFrame({"t": times, "survival": survival})
    return slope, frame


def growth_trend(law: ReproductionLaw, times: Sequence[float], replicates: int,
                 base_seed: int = 0, alpha: Optional[float] = None) -> pd.DataFrame:
    """Mean of Z(t) over surviving runs and its value scaled by exp(-alpha t)."""
    times = np.asarray(times, dtype=float)
    if alpha is None:
        alpha = malthusian_parameter(law)
    horizon = float(times.max())
    totals = np.zeros(times.size)
    survivors = np.zeros(times.size)
    for r in range(replicates):
        trace = simulate_cmj(law, 1, base_seed + r, horizon=horizon)
        z = trace.alive_at(times)
        totals += z
        survivors += z > 0
    mean_z = np.divide(totals, survivors, out=np.full(times.size, np.nan), where=survivors > 0)
    return pd.DataFrame({"t": times, "mean_alive": mean_z, "survivors": survivors,
                         "scaled": mean_z * np.exp(-alpha * times)})
