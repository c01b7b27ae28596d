"""
epinet - Epidemic Simulation
Simulación SIR por eventos sobre un modelo de configuración construido perezosamente

El grafo y la epidemia se generan juntos: cada vértice v lleva un período
infeccioso L_v y cada semi-arista (v, j) un reloj de contacto
tau_{v,j} ~ Exp(beta), todos sorteados al inicio con un único generador con
semilla. Cuando suena el reloj de una semi-arista libre de un vértice
infeccioso, se empareja con otra semi-arista libre elegida uniformemente, y
el dueño de la pareja se infecta si sigue susceptible.

Secciones Principales:
----------------------

1. **Secuencias de grados** - DegreeSequence, sample_degree_sequence()
2. **Estado** - EpidemicState: compartimentos, semi-aristas libres, contadores
3. **Simulación** - run_epidemic(): extinción fuerte T*, extinción débil T+
4. **Diagnósticos** - neighbor_susceptibility_stats(), weak_extinction_with_Lprime()

Notas:
------
- Al extinguirse la epidemia, las semi-aristas restantes se emparejan
  uniformemente; esto completa el grafo sin cambiar la ley de lo observado.
- X(t), el número de pares vecinos infeccioso-susceptible, se evalúa con un
  contador sobre el registro de eventos en el grafo completo.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from distributions import DegreeModel, DomainError, InfectiousPeriodModel

logger = logging.getLogger(__name__)

SUSCEPTIBLE, INFECTIOUS, RECOVERED = 0, 1, 2
CONTACT, RECOVERY = 0, 1
INFECTION_EVENT, RECOVERY_EVENT = "infection", "recovery"
NO_INFECTOR, NEVER_INFECTED = -1, -2
PARITY_REDRAWS = 10_000


class InvariantViolation(RuntimeError):
    """A conservation law of the simulation state failed."""


# =============================================================================
# SECUENCIAS DE GRADOS
# =============================================================================

@dataclass(frozen=True)
class DegreeSequence:
    """Sorted non-negative degrees with an even total."""

    degrees: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.degrees, dtype=np.int64))
        if arr.size == 0:
            raise DomainError("degree sequence is empty")
        if (arr < 0).any():
            raise DomainError("degree sequence has negative entries")
        if int(arr.sum()) % 2:
            raise DomainError(f"degree total {int(arr.sum())} is odd")
        object.__setattr__(self, "degrees", arr)

    @property
    def n(self) -> int:
        return int(self.degrees.size)

    @property
    def total(self) -> int:
        return int(self.degrees.sum())


def sample_degree_sequence(degree: DegreeModel, n: int, seed=None) -> DegreeSequence:
    """
    n i.i.d. draws from D; the last entry is redrawn until the total is even.

    Args:
        degree: Degree law.
        n: Number of vertices (>= 2).
        seed: Anything np.random.default_rng accepts.
    """
    if n < 2:
        raise DomainError(f"n={n} must be at least 2")
    rng = np.random.default_rng(seed)
    degrees = degree.sample(rng, n).astype(np.int64)
    redraws = 0
    while int(degrees.sum()) % 2:
        degrees[-1] = degree.sample(rng, 1)[0]
        redraws += 1
        if redraws > PARITY_REDRAWS:
            raise DomainError(f"{degree.describe()} cannot produce an even total over n={n} vertices")
    return DegreeSequence(degrees)


# =============================================================================
# ESTADO DE LA EPIDEMIA
# =============================================================================

class EpidemicState:
    """
    Mutable state of one run.

    Half-edges of vertex v are offsets[v] .. offsets[v+1]-1. The unpaired pool
    supports O(1) uniform choice and removal (swap with the last slot).
    """

    def __init__(self, sequence: DegreeSequence):
        degrees = sequence.degrees
        self.n = sequence.n
        self.total = sequence.total
        self.offsets: List[int] = [0] + np.cumsum(degrees).tolist()
        self.owner: List[int] = np.repeat(np.arange(self.n), degrees).tolist()
        self.partner: List[int] = [-1] * self.total
        self.unpaired: List[int] = list(range(self.total))
        self.position: List[int] = list(range(self.total))
        self.unpaired_of: List[int] = degrees.tolist()
        self.status: List[int] = [SUSCEPTIBLE] * self.n
        self.compartments = [self.n, 0, 0]
        # unpaired half-edges grouped by the status of their owner
        self.half_edges = [self.total, 0, 0]
        self.clock = 0.0

    @property
    def paired(self) -> int:
        return self.total - len(self.unpaired)

    def _detach(self, h: int) -> None:
        pos = self.position[h]
        last = self.unpaired.pop()
        if last != h:
            self.unpaired[pos] = last
            self.position[last] = pos
        v = self.owner[h]
        self.unpaired_of[v] -= 1
        self.half_edges[self.status[v]] -= 1

    def pair_uniform(self, h: int, uniform: float) -> int:
        """Pair h with one of the other unpaired half-edges, chosen by `uniform`."""
        self._detach(h)
        m = len(self.unpaired)
        partner = self.unpaired[min(int(uniform * m), m - 1)]
        self._detach(partner)
        self.partner[h] = partner
        self.partner[partner] = h
        return partner

    def set_status(self, v: int, new: int) -> None:
        old = self.status[v]
        self.compartments[old] -= 1
        self.compartments[new] += 1
        self.half_edges[old] -= self.unpaired_of[v]
        self.half_edges[new] += self.unpaired_of[v]
        self.status[v] = new

    def check_invariants(self, full: bool = False) -> None:
        if sum(self.compartments) != self.n:
            raise InvariantViolation(f"|S|+|I|+|R|={sum(self.compartments)} != n={self.n}")
        if sum(self.half_edges) + self.paired != self.total:
            raise InvariantViolation(
                f"|E_S|+|E_I|+|E_R|+|E_P|={sum(self.half_edges) + self.paired} != {self.total}"
            )
        if full:
            counts = [0, 0, 0]
            edges = [0, 0, 0]
            for v, st in enumerate(self.status):
                counts[st] += 1
                edges[st] += self.unpaired_of[v]
            if counts != self.compartments or edges != self.half_edges:
                raise InvariantViolation(
                    f"recount {counts}/{edges} disagrees with {self.compartments}/{self.half_edges}"
                )


# =============================================================================
# RESULTADO DE UNA CORRIDA
# =============================================================================

@dataclass
class SimulationOutcome:
    seed: Any
    n: int
    total_degree: int
    t_strong: float
    t_weak: float
    infections: int
    final_susceptible_fraction: float
    major: bool
    contacts: int
    wasted_contacts: int
    discarded_clocks: int
    recoveries: int
    initial: np.ndarray
    infection_times: np.ndarray
    infectors: np.ndarray
    periods: np.ndarray
    degrees: np.ndarray
    owner: np.ndarray
    partner: np.ndarray
    clocks: np.ndarray
    event_log: List[Tuple[float, str, int, int]] = field(repr=False, default_factory=list)
    x_series: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, dtype=np.int64))
    gamma_times: Dict[float, float] = field(default_factory=dict)
    t_lprime_literal: float = math.nan

    def to_dict(self) -> Dict[str, Any]:
        """One-line summary (the per-vertex arrays are left out)."""
        return {
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
            "n": self.n,
            "total_degree": self.total_degree,
            "T_star": self.t_strong,
            "T_dagger": self.t_weak,
            "infections": self.infections,
            "final_susceptible_fraction": self.final_susceptible_fraction,
            "major": self.major,
            "contacts": self.contacts,
            "wasted_contacts": self.wasted_contacts,
            "discarded_clocks": self.discarded_clocks,
            "recoveries": self.recoveries,
            "T_lprime_literal": self.t_lprime_literal,
            "gamma_times": {str(k): v for k, v in self.gamma_times.items()},
        }

    def events_frame(self) -> pd.DataFrame:
        """
        Event log with compartment sizes and X after each event.

        `source` is the infector of an infection event; seeds and recoveries
        carry NO_INFECTOR.
        """
        frame = pd.DataFrame(self.event_log, columns=["t", "event_type", "vertex", "source"])
        infected = (frame["event_type"] == INFECTION_EVENT).astype(int)
        recovered = (frame["event_type"] == RECOVERY_EVENT).astype(int)
        frame["S"] = self.n - infected.cumsum()
        frame["I"] = infected.cumsum() - recovered.cumsum()
        frame["R"] = recovered.cumsum()
        frame["X"] = self.x_series
        return frame

    def infection_tree_frame(self) -> pd.DataFrame:
        infected = np.flatnonzero(~np.isnan(self.infection_times))
        return pd.DataFrame({
            "vertex": infected,
            "infector": self.infectors[infected],
            "infection_time": self.infection_times[infected],
            "infectious_period": self.periods[infected],
            "degree": self.degrees[infected],
        }).sort_values("infection_time", kind="stable").reset_index(drop=True)

    def infection_tree_is_consistent(self) -> bool:
        """Every infector was infectious when it infected: s(z) <= s(v) < s(z) + L_z."""
        for v in np.flatnonzero(self.infectors >= 0):
            z = self.infectors[v]
            if not (self.infection_times[z] <= self.infection_times[v]
                    < self.infection_times[z] + self.periods[z]):
                return False
        return True


# =============================================================================
# BARRIDO DE X(t) Y EXTINCIÓN DÉBIL
# =============================================================================

def _weak_extinction_sweep(n: int, owner: Sequence[int], partner: Sequence[int],
                           offsets: Sequence[int], event_log, initial_count: int
                           ) -> Tuple[float, np.ndarray]:
    """
    Replay the event log on the completed graph keeping X(t) up to date.

    Returns the first time X reaches 0 (after the initial infections) and X
    after every logged event.
    """
    status = [SUSCEPTIBLE] * n
    x = 0
    series = np.zeros(len(event_log), dtype=np.int64)
    t_weak = math.inf
    for idx, (t, kind, v, _) in enumerate(event_log):
        if kind == INFECTION_EVENT:
            for h in range(offsets[v], offsets[v + 1]):
                w = owner[partner[h]]
                if w == v:
                    continue
                if status[w] == INFECTIOUS:
                    x -= 1
                elif status[w] == SUSCEPTIBLE:
                    x += 1
            status[v] = INFECTIOUS
        else:
            for h in range(offsets[v], offsets[v + 1]):
                w = owner[partner[h]]
                if w != v and status[w] == SUSCEPTIBLE:
                    x -= 1
            status[v] = RECOVERED
        series[idx] = x
        if x == 0 and idx >= initial_count - 1 and math.isinf(t_weak):
            t_weak = t
    return t_weak, series


def _complete_pairing(state: EpidemicState, rng: np.random.Generator) -> None:
    remaining = rng.permutation(np.asarray(state.unpaired, dtype=np.int64)).tolist()
    for a, b in zip(remaining[0::2], remaining[1::2]):
        state.partner[a] = b
        state.partner[b] = a
    state.unpaired.clear()


def _gamma_times(n: int, event_log, gamma_levels: Sequence[float]) -> Dict[float, float]:
    """First time |S(t)|/n < 1 - gamma for each requested gamma."""
    out = {}
    infection_times = [t for t, kind, _, _ in event_log if kind == INFECTION_EVENT]
    for gamma in gamma_levels:
        needed = math.floor(gamma * n) + 1
        out[float(gamma)] = infection_times[needed - 1] if needed <= len(infection_times) else math.inf
    return out


# =============================================================================
# SIMULACIÓN PRINCIPAL
# =============================================================================

def run_epidemic(sequence: DegreeSequence, beta: float, period: InfectiousPeriodModel,
                 seed=None, *, initial_infected: int = 1, check_invariants: bool = False,
                 gamma_levels: Sequence[float] = ()) -> SimulationOutcome:
    """
    Simulate one epidemic on a configuration model built along the way.

    Args:
        sequence: Degree sequence of the n vertices.
        beta: Contact rate per half-edge.
        period: Law of the infectious periods.
        seed: Seed for the single generator driving the run.
        initial_infected: Number of vertices infected at time 0, chosen uniformly.
        check_invariants: Verify the conservation laws after every event.
        gamma_levels: Fractions gamma for the T'_gamma diagnostics.

    Returns:
        SimulationOutcome with T* (last recovery, inf if some infective never
        recovers) and T+ (first time X = 0).
    """
    if beta <= 0:
        raise DomainError(f"contact rate beta={beta} must be positive")
    n = sequence.n
    if not (1 <= initial_infected <= n):
        raise DomainError(f"initial_infected={initial_infected} outside 1..{n}")

    rng = np.random.default_rng(seed)
    initial = rng.choice(n, size=initial_infected, replace=False)
    periods = np.asarray(period.sample(rng, n), dtype=float)
    clocks = rng.exponential(1.0 / beta, sequence.total)
    uniforms = rng.random(sequence.total // 2 + 1).tolist()

    state = EpidemicState(sequence)
    offsets, owner, partner, status = state.offsets, state.owner, state.partner, state.status
    period_list = periods.tolist()
    clock_list = clocks.tolist()
    infection_times = [math.nan] * n
    infectors = [NEVER_INFECTED] * n
    event_log: List[Tuple[float, str, int, int]] = []
    heap: List[Tuple[float, int, int, int]] = []
    counter = itertools.count()

    def infect(v: int, t: float, source: int) -> None:
        state.set_status(v, INFECTIOUS)
        infection_times[v] = t
        infectors[v] = source
        event_log.append((t, INFECTION_EVENT, v, source))
        for h in range(offsets[v], offsets[v + 1]):
            if partner[h] == -1:
                heapq.heappush(heap, (t + clock_list[h], next(counter), CONTACT, h))
        end = t + period_list[v]
        if math.isfinite(end):
            heapq.heappush(heap, (end, next(counter), RECOVERY, v))

    for v in initial.tolist():
        infect(v, 0.0, NO_INFECTOR)

    contacts = wasted = discarded = recoveries = pairings = 0
    t_strong = math.inf
    while heap and state.compartments[INFECTIOUS] > 0:
        t, _, kind, item = heapq.heappop(heap)
        state.clock = t
        if kind == RECOVERY:
            state.set_status(item, RECOVERED)
            event_log.append((t, RECOVERY_EVENT, item, NO_INFECTOR))
            recoveries += 1
        else:
            v = owner[item]
            if status[v] != INFECTIOUS or partner[item] != -1:
                discarded += 1
                continue
            mate = state.pair_uniform(item, uniforms[pairings])
            pairings += 1
            contacts += 1
            u = owner[mate]
            if status[u] == SUSCEPTIBLE:
                infect(u, t, v)
            else:
                wasted += 1
        if check_invariants:
            state.check_invariants(full=n <= 2000)
    if state.compartments[INFECTIOUS] == 0:
        t_strong = state.clock

    _complete_pairing(state, rng)
    t_weak, x_series = _weak_extinction_sweep(n, owner, partner, offsets, event_log, initial_infected)

    infection_arr = np.asarray(infection_times, dtype=float)
    infected_mask = ~np.isnan(infection_arr)
    infections = int(infected_mask.sum())
    degrees = sequence.degrees
    # literal retirement bound min(L_v, max_j tau_{v,j})
    lprime = np.zeros(n)
    for v in np.flatnonzero(infected_mask & (degrees > 0)):
        lprime[v] = max(clock_list[offsets[v]:offsets[v + 1]])
    lprime = np.minimum(periods, lprime)
    t_lprime = float(np.max(infection_arr[infected_mask] + lprime[infected_mask]))

    outcome = SimulationOutcome(
        seed=seed, n=n, total_degree=sequence.total,
        t_strong=t_strong, t_weak=t_weak, infections=infections,
        final_susceptible_fraction=(n - infections) / n,
        major=infections > math.log(n),
        contacts=contacts, wasted_contacts=wasted, discarded_clocks=discarded,
        recoveries=recoveries, initial=initial,
        infection_times=infection_arr, infectors=np.asarray(infectors, dtype=np.int64),
        periods=periods, degrees=degrees,
        owner=np.asarray(owner, dtype=np.int64), partner=np.asarray(partner, dtype=np.int64),
        clocks=clocks, event_log=event_log, x_series=x_series,
        gamma_times=_gamma_times(n, event_log, gamma_levels), t_lprime_literal=t_lprime,
    )
    logger.debug(
        f"run seed={seed} n={n}: infections={infections}, T*={t_strong:.6g}, "
        f"T+={t_weak:.6g}, contacts={contacts}"
    )
    return outcome


# =============================================================================
# DIAGNÓSTICOS
# =============================================================================

@dataclass(frozen=True)
class NeighborStats:
    susceptible_count: int
    p_ss: float
    degree_pmf: np.ndarray
    mean_degree: float


def neighbor_susceptibility_stats(outcome: SimulationOutcome) -> NeighborStats:
    """
    Empirical law of the never-infected vertices on the completed graph.

    p_ss is the fraction of half-edges of never-infected vertices whose
    partner belongs to another never-infected vertex (self-loops ignored).
    """
    susceptible = np.isnan(outcome.infection_times)
    count = int(susceptible.sum())
    if count == 0:
        return NeighborStats(0, math.nan, np.zeros(1), math.nan)
    mates = outcome.owner[outcome.partner]
    mask = susceptible[outcome.owner] & (mates != outcome.owner)
    p_ss = float(susceptible[mates[mask]].mean()) if mask.any() else math.nan
    degrees = outcome.degrees[susceptible]
    pmf = np.bincount(degrees) / count
    return NeighborStats(count, p_ss, pmf, float(degrees.mean()))


def weak_extinction_with_Lprime(sequence: DegreeSequence, beta: float, period: InfectiousPeriodModel,
                                seed=None, *, initial_infected: int = 1) -> SimulationOutcome:
    """
    Re-run the epidemic with every vertex retired as soon as it can no longer
    take part in an infectious-susceptible pair.

    The standard run fixes the randomness (periods, clocks, pairing). The
    replay on its completed graph retires v at the earlier of sigma(v) + L_v
    and the moment its last susceptible neighbour is infected, so the spread
    is unchanged and the last retirement equals the weak extinction time.
    """
    base = run_epidemic(sequence, beta, period, seed, initial_infected=initial_infected)
    n = base.n
    owner = base.owner.tolist()
    partner = base.partner.tolist()
    offsets = [0] + np.cumsum(base.degrees).tolist()
    clocks = base.clocks.tolist()
    periods = base.periods.tolist()

    status = [SUSCEPTIBLE] * n
    infection_times = [math.nan] * n
    infectors = [NEVER_INFECTED] * n
    retired_at = [math.nan] * n
    susceptible_links = [0] * n
    event_log: List[Tuple[float, str, int, int]] = []
    heap: List[Tuple[float, int, int, int]] = []
    counter = itertools.count()

    def retire(v: int, t: float) -> None:
        status[v] = RECOVERED
        retired_at[v] = t
        event_log.append((t, RECOVERY_EVENT, v, NO_INFECTOR))

    def infect(v: int, t: float, source: int) -> None:
        status[v] = INFECTIOUS
        infection_times[v] = t
        infectors[v] = source
        event_log.append((t, INFECTION_EVENT, v, source))
        exhausted = []
        links = 0
        for h in range(offsets[v], offsets[v + 1]):
            w = owner[partner[h]]
            if w == v:
                continue
            if status[w] == SUSCEPTIBLE:
                links += 1
            elif status[w] == INFECTIOUS:
                susceptible_links[w] -= 1
                if susceptible_links[w] == 0:
                    exhausted.append(w)
        susceptible_links[v] = links
        for w in exhausted:
            retire(w, t)
        if links == 0:
            retire(v, t)
            return
        for h in range(offsets[v], offsets[v + 1]):
            if clocks[h] < periods[v]:
                heapq.heappush(heap, (t + clocks[h], next(counter), CONTACT, h))
        end = t + periods[v]
        if math.isfinite(end):
            heapq.heappush(heap, (end, next(counter), RECOVERY, v))

    for v in base.initial.tolist():
        infect(v, 0.0, NO_INFECTOR)

    while heap:
        t, _, kind, item = heapq.heappop(heap)
        if kind == RECOVERY:
            if status[item] == INFECTIOUS:
                retire(item, t)
            continue
        v = owner[item]
        if status[v] != INFECTIOUS:
            continue
        u = owner[partner[item]]
        if status[u] == SUSCEPTIBLE:
            infect(u, t, v)

    retired = np.asarray(retired_at, dtype=float)
    infection_arr = np.asarray(infection_times, dtype=float)
    infected_mask = ~np.isnan(infection_arr)
    t_strong = math.inf if np.isnan(retired[infected_mask]).any() else float(retired[infected_mask].max())
    t_weak, x_series = _weak_extinction_sweep(n, owner, partner, offsets, event_log, len(base.initial))
    infections = int(infected_mask.sum())
    if not np.array_equal(infection_arr, base.infection_times, equal_nan=True):
        logger.warning(f"L' replay for seed={seed} diverged from the standard run")

    return SimulationOutcome(
        seed=seed, n=n, total_degree=base.total_degree,
        t_strong=t_strong, t_weak=t_weak, infections=infections,
        final_susceptible_fraction=(n - infections) / n, major=infections > math.log(n),
        contacts=base.contacts, wasted_contacts=base.wasted_contacts,
        discarded_clocks=base.discarded_clocks, recoveries=int(infected_mask.sum()),
        initial=base.initial, infection_times=infection_arr,
        infectors=np.asarray(infectors, dtype=np.int64),
        periods=np.where(infected_mask, retired - infection_arr, base.periods),
        degrees=base.degrees, owner=base.owner, partner=base.partner, clocks=base.clocks,
        event_log=event_log, x_series=x_series, t_lprime_literal=base.t_lprime_literal,
    )
