"""
epinet - Distribution Services
Leyes de grado y leyes del período infeccioso

Este módulo contiene las dos familias de leyes de entrada del modelo y todos
los servicios en forma cerrada o por series que las capas analítica y de
simulación necesitan de ellas.

Secciones Principales:
----------------------

1. **Modelos de grado** (DegreeModel)
   - RegularDegree, PoissonDegree, TableDegree, PowerLawDegree, ThinnedDegree
   - pgf(), excess_pgf(), excess_derivative_weighted(): funciones generatrices
     de D y del exceso sesgado por tamaño D~ - 1
   - size_biased_pmf(), size_biased_excess_mean(), tilted_moment()
   - sample(), sample_size_biased(): muestreo vectorizado con un Generator de numpy

2. **Vacunación**
   - vaccinate(): adelgazamiento independiente de cada semi-arista con retención c

3. **Modelos del período infeccioso** (InfectiousPeriodModel)
   - Exponential, Constant, ExponentialCutoff, Gamma, Infinite, Pareto
   - survival_transform(s) = int_0^inf exp(-s t) P(L > t) dt
   - contact_transform(beta, x) = beta * survival_transform(x + beta)
   - laplace(s) = E[exp(-s L)], tail_rate (supremo de los momentos exponenciales finitos)

Convenciones numéricas:
-----------------------
- Formas cerradas siempre que la familia las admita.
- Las series de soporte infinito se suman por bloques con una cota
  geométrica explícita de la cola por debajo de 1e-14.
- Las transformadas sin forma cerrada usan cuadratura adaptativa
  (scipy.integrate.quad, error relativo 1e-11).
- Las transformadas divergentes devuelven math.inf, nunca lanzan.
"""

# =============================================================================
# IMPORTS Y CONFIGURACIÓN
# =============================================================================

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, special, stats

logger = logging.getLogger(__name__)

SERIES_TAIL_TOLERANCE = 1e-14
SERIES_MAX_TERMS = 50_000_000
TRUNCATION_TOLERANCE = 1e-15
MAX_TRUNCATION_DEGREE = 10_000_000
QUADRATURE_RELATIVE_ERROR = 1e-11
QUADRATURE_TAIL = math.log(1e14)


class DomainError(ValueError):
    """Argument outside the domain of a distribution service."""


def _check_unit_interval(x: float, name: str = "x") -> float:
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name}={x} outside [0, 1]")
    return float(x)


def _stirling_second_kind(j: int) -> List[int]:
    """Row j of S(j, i): k**j = sum_i S(j, i) * k(k-1)...(k-i+1)."""
    row = [1]
    for m in range(1, j + 1):
        new = [0] * (m + 1)
        for i in range(1, m + 1):
            new[i] = i * (row[i] if i < len(row) else 0) + row[i - 1]
        row = new
    return row


def _stirling_first_kind(j: int) -> List[int]:
    """Signed row j of s(j, i): k(k-1)...(k-j+1) = sum_i s(j, i) * k**i."""
    row = [1]
    for m in range(j):
        new = [0] * (m + 2)
        for i in range(m + 2):
            new[i] = (row[i - 1] if i >= 1 else 0) - m * (row[i] if i < len(row) else 0)
        row = new
    return row


def _falling(k: np.ndarray, order: int) -> np.ndarray:
    """k(k-1)...(k-order+1), zero where k < order."""
    k = np.asarray(k, dtype=float)
    if order == 0:
        return np.ones_like(k)
    return np.where(k >= order, special.poch(k - order + 1, order), 0.0)


# =============================================================================
# MODELOS DE GRADO
# =============================================================================

class DegreeModel:
    """
    Law of the degree D of a uniformly chosen vertex.

    Subclasses provide pmf(), mean, second_moment, pgf_derivative(),
    sample(), sample_size_biased() and truncation_degree(). Every generating
    function service is derived from pgf_derivative(x, order).
    """

    family = "abstract"

    # -- primitives ----------------------------------------------------------
    def pmf(self, k) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def second_moment(self) -> float:
        raise NotImplementedError

    @property
    def max_degree(self) -> Optional[int]:
        return None

    def pgf_derivative(self, x: float, order: int) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_size_biased(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def truncation_degree(self, x: float = 1.0, tol: float = TRUNCATION_TOLERANCE) -> int:
        raise NotImplementedError

    def to_descriptor(self) -> Dict[str, Any]:
        raise NotImplementedError

    # -- derived services ----------------------------------------------------
    def pgf(self, x: float) -> float:
        """E[x**D] on [0, 1]."""
        x = _check_unit_interval(x)
        if x == 1.0:
            return 1.0
        return float(self.pgf_derivative(x, 0))

    def size_biased_pmf(self, k) -> np.ndarray:
        """P(D~ = k) = k p_k / E[D]."""
        k = np.asarray(k, dtype=float)
        return k * self.pmf(k) / self.mean

    def size_biased_excess_mean(self) -> float:
        """E[D~ - 1] = E[D(D-1)] / E[D]; may be +inf."""
        second = self.second_moment
        if math.isinf(second):
            return math.inf
        return (second - self.mean) / self.mean

    def excess_pgf(self, x: float) -> float:
        """E[x**(D~ - 1)] = G'(x) / E[D]."""
        x = _check_unit_interval(x)
        if x == 1.0:
            return 1.0
        return float(self.pgf_derivative(x, 1) / self.mean)

    def excess_derivative_weighted(self, x: float) -> float:
        """E[(D~ - 1) x**(D~ - 2)] = G''(x) / E[D]; equals E[D~ - 1] at x = 1."""
        x = _check_unit_interval(x)
        if x == 1.0:
            return self.size_biased_excess_mean()
        return float(self.pgf_derivative(x, 2) / self.mean)

    def tilted_moment(self, x: float, j: int) -> float:
        """
        j-th moment of the tilted law p_k x**k / E[x**D].

        Every moment is finite for x in (0, 1) whatever the tail of D, which
        is what makes the final-phase degree law of the susceptibles tame.
        """
        x = _check_unit_interval(x)
        if j < 0:
            raise DomainError(f"moment order j={j} must be non-negative")
        if x == 0.0:
            raise DomainError("tilted law undefined at x=0")
        norm = self.pgf_derivative(x, 0) if x < 1.0 else 1.0
        total = 0.0
        for i, s_ji in enumerate(_stirling_second_kind(j)):
            if s_ji:
                total += s_ji * x ** i * self.pgf_derivative(x, i)
        return float(total / norm)

    def pmf_table(self, x: float = 1.0, tol: float = TRUNCATION_TOLERANCE) -> Tuple[np.ndarray, np.ndarray]:
        """Degrees 0..K and p_k x**k, K the truncation degree at tilt x."""
        upper = self.truncation_degree(x, tol)
        degrees = np.arange(0, upper + 1)
        return degrees, self.pmf(degrees) * np.power(float(x), degrees)

    def describe(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_descriptor().items() if k != "family")
        return f"{self.family}({params})"

    # -- block series for infinite supports ----------------------------------
    def _series_pgf_derivative(self, x: float, order: int, start: int) -> float:
        """
        sum_{k>=start} k(k-1)..(k-order+1) p_k x**(k-order) for x < 1.

        Needs p_k non-increasing for k >= start; the remainder after index K is
        bounded by t_K r / (1 - r) with r = (K+1)/(K+1-order) * x.
        """
        start = max(start, order)
        total = 0.0
        block = 1024
        k0 = start
        summed = 0
        while True:
            ks = np.arange(k0, k0 + block, dtype=float)
            terms = _falling(ks, order) * self.pmf(ks) * np.power(x, ks - order)
            total += float(terms.sum())
            summed += block
            last = ks[-1]
            ratio = (last + 1.0) / (last + 1.0 - order) * x
            if ratio < 1.0:
                tail = float(terms[-1]) * ratio / (1.0 - ratio)
                if tail <= SERIES_TAIL_TOLERANCE * max(1.0, abs(total)):
                    return total
            if summed >= SERIES_MAX_TERMS:
                logger.warning(
                    f"{self.describe()}: series at x={x} order={order} stopped after {summed} terms"
                )
                return total
            k0 += block
            block = min(block * 2, 1 << 20)


@dataclass(frozen=True)
class RegularDegree(DegreeModel):
    """D = d almost surely."""

    d: int
    family = "regular"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"regular degree d={self.d} must be a positive integer")

    def pmf(self, k) -> np.ndarray:
        return np.where(np.asarray(k) == self.d, 1.0, 0.0)

    @property
    def mean(self) -> float:
        return float(self.d)

    @property
    def second_moment(self) -> float:
        return float(self.d) ** 2

    @property
    def max_degree(self) -> Optional[int]:
        return self.d

    def pgf_derivative(self, x: float, order: int) -> float:
        if order > self.d:
            return 0.0
        return float(_falling(np.array([self.d]), order)[0] * x ** (self.d - order))

    def sample(self, rng, size):
        return np.full(size, self.d, dtype=np.int64)

    def sample_size_biased(self, rng, size):
        return np.full(size, self.d, dtype=np.int64)

    def truncation_degree(self, x=1.0, tol=TRUNCATION_TOLERANCE):
        return self.d

    def to_descriptor(self):
        return {"family": self.family, "d": self.d}


@dataclass(frozen=True)
class PoissonDegree(DegreeModel):
    """D ~ Poisson(lam); the size-biased excess is again Poisson(lam)."""

    lam: float
    family = "poisson"

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"Poisson mean lambda={self.lam} must be positive and finite")

    def pmf(self, k) -> np.ndarray:
        return stats.poisson.pmf(np.asarray(k), self.lam)

    @property
    def mean(self) -> float:
        return float(self.lam)

    @property
    def second_moment(self) -> float:
        return self.lam + self.lam ** 2

    def pgf_derivative(self, x: float, order: int) -> float:
        return float(self.lam ** order * math.exp(self.lam * (x - 1.0)))

    def sample(self, rng, size):
        return rng.poisson(self.lam, size).astype(np.int64)

    def sample_size_biased(self, rng, size):
        return 1 + rng.poisson(self.lam, size).astype(np.int64)

    def truncation_degree(self, x=1.0, tol=TRUNCATION_TOLERANCE):
        return int(stats.poisson.isf(tol, self.lam * max(x, 1e-300))) + 1

    def to_descriptor(self):
        return {"family": self.family, "lambda": self.lam}


@dataclass(frozen=True)
class TableDegree(DegreeModel):
    """Finite-support degree law given as (k, p_k) pairs."""

    items: Tuple[Tuple[int, float], ...]
    family = "table"
    degrees: np.ndarray = field(init=False, repr=False, compare=False)
    probabilities: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.items:
            raise DomainError("degree table is empty")
        merged: Dict[int, float] = {}
        for k, p in self.items:
            if int(k) != k or k < 0:
                raise DomainError(f"degree {k} must be a non-negative integer")
            if p < 0:
                raise DomainError(f"probability p_{k}={p} is negative")
            merged[int(k)] = merged.get(int(k), 0.0) + float(p)
        degrees = np.array(sorted(merged), dtype=np.int64)
        probabilities = np.array([merged[k] for k in sorted(merged)], dtype=float)
        total = probabilities.sum()
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"degree table sums to {total!r}, not 1 within 1e-12")
        if float(degrees @ probabilities) <= 0:
            raise DomainError("degree table has E[D] = 0")
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "probabilities", probabilities)

    @classmethod
    def from_weights(cls, weights: Dict[int, float]) -> "TableDegree":
        """Build a table from non-negative weights, normalising them."""
        total = float(sum(weights.values()))
        if total <= 0:
            raise DomainError("degree weights sum to zero")
        return cls(tuple((int(k), float(w) / total) for k, w in weights.items() if w > 0))

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        lookup = dict(zip(self.degrees.tolist(), self.probabilities.tolist()))
        flat = np.array([lookup.get(int(v), 0.0) if float(v).is_integer() else 0.0
                         for v in np.ravel(k)], dtype=float)
        return flat.reshape(k.shape)

    @property
    def mean(self) -> float:
        return float(self.degrees @ self.probabilities)

    @property
    def second_moment(self) -> float:
        return float((self.degrees.astype(float) ** 2) @ self.probabilities)

    @property
    def max_degree(self) -> Optional[int]:
        return int(self.degrees[-1])

    def pgf_derivative(self, x: float, order: int) -> float:
        mask = self.degrees >= order
        ks = self.degrees[mask].astype(float)
        return float(np.sum(_falling(ks, order) * self.probabilities[mask] * np.power(x, ks - order)))

    def sample(self, rng, size):
        return rng.choice(self.degrees, size=size, p=self.probabilities)

    def sample_size_biased(self, rng, size):
        weights = self.degrees * self.probabilities
        return rng.choice(self.degrees, size=size, p=weights / weights.sum())

    def truncation_degree(self, x=1.0, tol=TRUNCATION_TOLERANCE):
        return int(self.degrees[-1])

    def to_descriptor(self):
        return {"family": self.family,
                "pmf": {int(k): float(p) for k, p in zip(self.degrees, self.probabilities)}}


@dataclass(frozen=True)
class PowerLawDegree(DegreeModel):
    """
    p_k proportional to k**(-exponent) on k_min..k_max (k_max None: unbounded).

    exponent > 2 keeps E[D] finite; exponent <= 3 gives E[D~ - 1] = inf.
    """

    exponent: float
    k_min: int = 1
    k_max: Optional[int] = None
    family = "power-law"
    _table: Optional[TableDegree] = field(init=False, repr=False, compare=False, default=None)
    _norm: float = field(init=False, repr=False, compare=False, default=1.0)

    def __post_init__(self):
        if not self.exponent > 2:
            raise DomainError(f"power-law exponent {self.exponent} must exceed 2 for a finite mean")
        if self.k_min < 1:
            raise DomainError(f"k_min={self.k_min} must be at least 1")
        if self.k_max is not None:
            if self.k_max < self.k_min:
                raise DomainError(f"k_max={self.k_max} is below k_min={self.k_min}")
            ks = np.arange(self.k_min, self.k_max + 1, dtype=float)
            weights = ks ** (-self.exponent)
            table = TableDegree.from_weights(dict(zip(ks.astype(int).tolist(), weights.tolist())))
            object.__setattr__(self, "_table", table)
        else:
            object.__setattr__(self, "_norm", float(special.zeta(self.exponent, self.k_min)))

    def _raw_moment(self, i: int) -> float:
        if self._table is not None:
            return float((self._table.degrees.astype(float) ** i) @ self._table.probabilities)
        if self.exponent - i <= 1:
            return math.inf
        return float(special.zeta(self.exponent - i, self.k_min) / self._norm)

    def pmf(self, k) -> np.ndarray:
        if self._table is not None:
            return self._table.pmf(k)
        k = np.asarray(k, dtype=float)
        safe = np.where(k >= self.k_min, k, float(self.k_min))
        return np.where(k >= self.k_min, safe ** (-self.exponent) / self._norm, 0.0)

    @property
    def mean(self) -> float:
        return self._raw_moment(1)

    @property
    def second_moment(self) -> float:
        return self._raw_moment(2)

    @property
    def max_degree(self) -> Optional[int]:
        return self.k_max

    def pgf_derivative(self, x: float, order: int) -> float:
        if self._table is not None:
            return self._table.pgf_derivative(x, order)
        if x < 1.0:
            return self._series_pgf_derivative(x, order, self.k_min)
        # factorial moment through the raw zeta moments
        total = 0.0
        for i, s_ji in enumerate(_stirling_first_kind(order)):
            if s_ji:
                moment = self._raw_moment(i)
                if math.isinf(moment):
                    return math.inf
                total += s_ji * moment
        return total

    def sample(self, rng, size):
        if self._table is not None:
            return self._table.sample(rng, size)
        return self._rejection_zipf(rng, size, self.exponent)

    def sample_size_biased(self, rng, size):
        if self._table is not None:
            return self._table.sample_size_biased(rng, size)
        # k p_k is proportional to k**(1 - exponent)
        return self._rejection_zipf(rng, size, self.exponent - 1.0)

    def _rejection_zipf(self, rng, size, a):
        out = rng.zipf(a, size).astype(np.int64)
        low = out < self.k_min
        while low.any():
            out[low] = rng.zipf(a, int(low.sum()))
            low = out < self.k_min
        return out

    def truncation_degree(self, x=1.0, tol=TRUNCATION_TOLERANCE):
        if self._table is not None:
            return self._table.truncation_degree(x, tol)
        upper = max(self.k_min, 16)
        while upper < MAX_TRUNCATION_DEGREE:
            if x < 1.0:
                tail = float(self.pmf(upper)) * x ** (upper + 1) / (1.0 - x)
            else:
                tail = float(special.zeta(self.exponent, upper + 1) / self._norm)
            if tail <= tol:
                return upper
            upper *= 2
        logger.warning(f"{self.describe()}: truncation at x={x} capped at degree {MAX_TRUNCATION_DEGREE}")
        return MAX_TRUNCATION_DEGREE

    def to_descriptor(self):
        return {"family": self.family, "exponent": self.exponent,
                "k_min": self.k_min, "k_max": self.k_max}


@dataclass(frozen=True)
class ThinnedDegree(DegreeModel):
    """
    Degree after every half-edge is kept independently with probability c.

    D_c ~ Bin(D, c) and D~_c - 1 ~ Bin(D~ - 1, c), so the generating
    functions compose: G_c(x) = G(1 - c + c x).
    """

    base: DegreeModel
    coverage: float
    family = "thinned"

    def __post_init__(self):
        if not (0.0 < self.coverage <= 1.0):
            raise DomainError(f"coverage c={self.coverage} outside (0, 1]")

    def _inner(self, x: float) -> float:
        return 1.0 - self.coverage + self.coverage * x

    def pmf(self, k) -> np.ndarray:
        k_arr = np.asarray(k, dtype=float)
        ks = np.atleast_1d(k_arr).ravel()
        upper = self.base.truncation_degree(1.0)
        out = np.zeros(ks.shape, dtype=float)
        for lo in range(0, upper + 1, 4096):
            ms = np.arange(lo, min(lo + 4096, upper + 1))
            weights = self.base.pmf(ms)
            out += stats.binom.pmf(ks[:, None], ms[None, :], self.coverage) @ weights
        return out.reshape(k_arr.shape)

    @property
    def mean(self) -> float:
        return self.coverage * self.base.mean

    @property
    def second_moment(self) -> float:
        factorial = self.base.second_moment - self.base.mean
        return self.coverage ** 2 * factorial + self.coverage * self.base.mean

    @property
    def max_degree(self) -> Optional[int]:
        return self.base.max_degree

    def pgf_derivative(self, x: float, order: int) -> float:
        return self.coverage ** order * self.base.pgf_derivative(self._inner(x), order)

    def sample(self, rng, size):
        return rng.binomial(self.base.sample(rng, size), self.coverage).astype(np.int64)

    def sample_size_biased(self, rng, size):
        excess = self.base.sample_size_biased(rng, size) - 1
        return 1 + rng.binomial(excess, self.coverage).astype(np.int64)

    def truncation_degree(self, x=1.0, tol=TRUNCATION_TOLERANCE):
        return self.base.truncation_degree(1.0, tol)

    def to_descriptor(self):
        return {"family": self.family, "coverage": self.coverage, "base": self.base.to_descriptor()}


# =============================================================================
# VACUNACIÓN
# =============================================================================

def vaccinate(degree: DegreeModel, coverage: float) -> DegreeModel:
    """
    Degree law after vaccination with retention c.

    Args:
        degree: Law of D.
        coverage: c in (0, 1]; c = 1 returns the input unchanged.

    Returns:
        Law of D_c ~ Bin(D, c). Poisson(lam) maps to Poisson(c lam).
    """
    if not (0.0 < coverage <= 1.0):
        raise DomainError(f"coverage c={coverage} outside (0, 1]")
    if coverage == 1.0:
        return degree
    if isinstance(degree, PoissonDegree):
        return PoissonDegree(degree.lam * coverage)
    if isinstance(degree, ThinnedDegree):
        return ThinnedDegree(degree.base, degree.coverage * coverage)
    return ThinnedDegree(degree, coverage)


# =============================================================================
# MODELOS DEL PERÍODO INFECCIOSO
# =============================================================================

class InfectiousPeriodModel:
    """
    Law of the infectious period L.

    tail_rate is r(L) = sup{x >= 0 : int exp(x t) P(L > t) dt < inf}
    (+inf for bounded support, 0 for L = inf or heavier-than-exponential tails).
    """

    family = "abstract"
    tail_rate = 0.0
    support_max = math.inf

    def survival(self, t) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def laplace(self, s: float) -> float:
        raise NotImplementedError

    def to_descriptor(self) -> Dict[str, Any]:
        raise NotImplementedError

    def _survival_transform(self, s: float) -> float:
        return self.survival_transform_quadrature(s)

    def survival_transform(self, s: float) -> float:
        """int_0^inf exp(-s t) P(L > t) dt, +inf where divergent."""
        if s < -self.tail_rate:
            return math.inf
        with np.errstate(over="ignore"):
            value = float(self._survival_transform(float(s)))
        return value if value >= 0 else math.inf

    def contact_transform(self, beta: float, x: float) -> float:
        """Phi(x) = int_0^inf beta exp(-(x + beta) t) P(L > t) dt."""
        if beta <= 0:
            raise DomainError(f"contact rate beta={beta} must be positive")
        return beta * self.survival_transform(x + beta)

    def survival_transform_quadrature(self, s: float) -> float:
        """Adaptive-quadrature evaluation of survival_transform, any family."""
        upper = self.support_max
        if s > 0:
            upper = min(upper, QUADRATURE_TAIL / s)
        elif math.isinf(upper):
            return math.inf
        if upper <= 0:
            return 0.0
        value, _ = integrate.quad(
            lambda t: math.exp(-s * t) * float(self.survival(t)),
            0.0, upper, epsabs=0.0, epsrel=QUADRATURE_RELATIVE_ERROR, limit=500,
        )
        return value

    def describe(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_descriptor().items() if k != "family")
        return f"{self.family}({params})"


@dataclass(frozen=True)
class ExponentialPeriod(InfectiousPeriodModel):
    rate: float
    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"recovery rate {self.rate} must be positive")

    @property
    def tail_rate(self):
        return self.rate

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 1.0, np.exp(-self.rate * np.maximum(t, 0.0)))

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def mean(self):
        return 1.0 / self.rate

    def laplace(self, s):
        return self.rate / (self.rate + s)

    def _survival_transform(self, s):
        if s + self.rate <= 0:
            return math.inf
        return 1.0 / (s + self.rate)

    def to_descriptor(self):
        return {"family": self.family, "rate": self.rate}


@dataclass(frozen=True)
class ConstantPeriod(InfectiousPeriodModel):
    length: float
    family = "constant"
    tail_rate = math.inf

    def __post_init__(self):
        if not (self.length >= 0 and math.isfinite(self.length)):
            raise DomainError(f"constant period {self.length} must be finite and non-negative")

    @property
    def support_max(self):
        return self.length

    def survival(self, t):
        return np.where(np.asarray(t, dtype=float) < self.length, 1.0, 0.0)

    def sample(self, rng, size):
        return np.full(size, self.length, dtype=float)

    @property
    def mean(self):
        return self.length

    def laplace(self, s):
        return math.exp(-s * self.length)

    def _survival_transform(self, s):
        if s == 0:
            return self.length
        return float(-np.expm1(-s * self.length) / s)

    def to_descriptor(self):
        return {"family": self.family, "length": self.length}


@dataclass(frozen=True)
class ExponentialCutoffPeriod(InfectiousPeriodModel):
    """L = min(Exp(rate), cutoff): exponential tail truncated at a finite horizon."""

    rate: float
    cutoff: float
    family = "exponential-cutoff"
    tail_rate = math.inf

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError(f"recovery rate {self.rate} must be positive")
        if not (self.cutoff > 0 and math.isfinite(self.cutoff)):
            raise DomainError(f"cutoff {self.cutoff} must be positive and finite")

    @property
    def support_max(self):
        return self.cutoff

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.cutoff, np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def sample(self, rng, size):
        return np.minimum(rng.exponential(1.0 / self.rate, size), self.cutoff)

    @property
    def mean(self):
        return -math.expm1(-self.rate * self.cutoff) / self.rate

    def laplace(self, s):
        u = s + self.rate
        atom = math.exp(-u * self.cutoff)
        if u == 0:
            return self.rate * self.cutoff + atom
        return self.rate * (-math.expm1(-u * self.cutoff)) / u + atom

    def _survival_transform(self, s):
        u = s + self.rate
        if u == 0:
            return self.cutoff
        return float(-np.expm1(-u * self.cutoff) / u)

    def to_descriptor(self):
        return {"family": self.family, "rate": self.rate, "cutoff": self.cutoff}


@dataclass(frozen=True)
class GammaPeriod(InfectiousPeriodModel):
    shape: float
    rate: float
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma parameters shape={self.shape}, rate={self.rate} must be positive")

    @property
    def tail_rate(self):
        return self.rate

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 1.0, stats.gamma.sf(np.maximum(t, 0.0), a=self.shape, scale=1.0 / self.rate))

    def sample(self, rng, size):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    @property
    def mean(self):
        return self.shape / self.rate

    def laplace(self, s):
        return (self.rate / (self.rate + s)) ** self.shape

    def _survival_transform(self, s):
        if s + self.rate <= 0:
            return math.inf
        if s == 0:
            return self.mean
        return float(-math.expm1(-self.shape * math.log1p(s / self.rate)) / s)

    def to_descriptor(self):
        return {"family": self.family, "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class InfinitePeriod(InfectiousPeriodModel):
    """L = inf: infectives never recover (SI dynamics)."""

    family = "infinite"
    tail_rate = 0.0

    def survival(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def sample(self, rng, size):
        return np.full(size, math.inf)

    @property
    def mean(self):
        return math.inf

    def laplace(self, s):
        return 0.0 if s > 0 else 1.0

    def _survival_transform(self, s):
        return 1.0 / s if s > 0 else math.inf

    def to_descriptor(self):
        return {"family": self.family}


@dataclass(frozen=True)
class ParetoPeriod(InfectiousPeriodModel):
    """Lomax law P(L > t) = (1 + t/scale)**(-shape); no exponential moment."""

    shape: float
    scale: float
    family = "pareto"
    tail_rate = 0.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError(f"pareto parameters shape={self.shape}, scale={self.scale} must be positive")

    def survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return (1.0 + t / self.scale) ** (-self.shape)

    def sample(self, rng, size):
        return rng.pareto(self.shape, size) * self.scale

    @property
    def mean(self):
        return self.scale / (self.shape - 1.0) if self.shape > 1 else math.inf

    def laplace(self, s):
        if s == 0:
            return 1.0
        upper = QUADRATURE_TAIL / s
        density = lambda t: self.shape / self.scale * (1.0 + t / self.scale) ** (-self.shape - 1.0)
        value, _ = integrate.quad(lambda t: math.exp(-s * t) * density(t), 0.0, upper,
                                  epsabs=0.0, epsrel=QUADRATURE_RELATIVE_ERROR, limit=500)
        return value

    def _survival_transform(self, s):
        if s == 0:
            return self.mean
        return self.survival_transform_quadrature(s)

    def to_descriptor(self):
        return {"family": self.family, "shape": self.shape, "scale": self.scale}

