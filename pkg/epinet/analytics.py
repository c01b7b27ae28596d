"""
epinet - Analytic Solver
Cantidades límite de una epidemia SIR supercrítica en el modelo de configuración

Dada la ley de grados D, la ley del período infeccioso L y la tasa de
contacto beta, este módulo calcula las constantes que gobiernan la duración
de un brote grande: la tasa de crecimiento inicial alpha', la tasa de
extinción final alpha* y la constante de duración 1/alpha' + 1/|alpha*|.

Secciones Principales:
----------------------

1. **Parámetros y umbrales**
   - EpidemicParameters: (D, L, beta) inmutable
   - compute_psi(), compute_R0()

2. **Punto fijo del tamaño final**
   - solve_qtilde_star(): iteración monótona s <- E[(1 - psi + psi s)**(D~ - 1)]
   - solve_qtilde_star_bisection(): oráculo independiente por bisección
   - compute_qstar(), compute_R0_star(), major_outbreak_probability()

3. **Parámetros malthusianos**
   - growth_root() / decay_root(): raíces genéricas de g(x) = 1
   - solve_alpha_prime(), solve_alpha_star(), check_condition_14()
   - summarize(), duration_constant()

4. **Vacunación y límites**
   - vaccinated_summary(), coverage_derivative_poisson()
   - lambert_w(), uniform_mixing_limit()

5. **Perfil de grados de la fase final**
   - susceptible_degree_profile(): ley D* de los vértices nunca infectados

Convenciones numéricas:
-----------------------
- El punto fijo se detiene cuando dos iterados difieren en < 1e-13.
- Las raíces usan scipy.optimize.bisect con xtol 1e-12 tras duplicar el intervalo.
- Una abscisa de decaimiento finita se explora en alpha_dagger + |alpha_dagger| 2**-j.
- |R0 - 1| < 1e-8 se reporta como crítico, con duración infinita.
"""

# =============================================================================
# IMPORTS Y CONFIGURACIÓN
# =============================================================================

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from distributions import (
    DegreeModel,
    DomainError,
    InfectiousPeriodModel,
    TableDegree,
    vaccinate,
)

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAX_ITER = 1_000_000
ROOT_XTOL = 1e-12
BOUNDARY_TOL = 1e-9
BOUNDARY_MAX_PROBES = 60
CRITICAL_BAND = 1e-8
BRACKET_LIMIT = 2.0 ** 60


class UnsupportedRegimeError(ValueError):
    """The operation needs a supercritical model and the input is not one."""


class ConvergenceError(RuntimeError):
    """An iteration or bracket search exhausted its budget."""


@dataclass(frozen=True)
class EpidemicParameters:
    degree: DegreeModel
    infectious_period: InfectiousPeriodModel
    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"contact rate beta={self.beta} must be positive and finite")

    def describe(self) -> str:
        return (f"D={self.degree.describe()}, L={self.infectious_period.describe()}, "
                f"beta={self.beta}")

    def to_descriptor(self) -> Dict[str, Any]:
        return {
            "degree": self.degree.to_descriptor(),
            "infectious_period": self.infectious_period.to_descriptor(),
            "beta": self.beta,
        }


# =============================================================================
# UMBRALES: psi y R0
# =============================================================================

def compute_psi(params: EpidemicParameters) -> float:
    """Probability that an infective contacts a given neighbour before recovering."""
    return params.infectious_period.contact_transform(params.beta, 0.0)


def compute_R0(params: EpidemicParameters) -> float:
    """psi * E[D~ - 1]; +inf when the size-biased excess has no mean."""
    psi = compute_psi(params)
    if psi == 0:
        return 0.0
    return psi * params.degree.size_biased_excess_mean()


def compute_Q(params: EpidemicParameters, qtilde: float) -> float:
    """Q = 1 - psi + psi q~*, the probability a half-edge never transmits inward."""
    psi = compute_psi(params)
    return min(1.0, max(0.0, 1.0 - psi + psi * qtilde))


# =============================================================================
# PUNTO FIJO DEL TAMAÑO FINAL
# =============================================================================

def _iterate_qtilde(params: EpidemicParameters) -> Tuple[float, int]:
    if compute_R0(params) <= 1.0:
        return 1.0, 0
    psi = compute_psi(params)
    degree = params.degree
    s = 0.0
    for iteration in range(1, FIXED_POINT_MAX_ITER + 1):
        x = min(1.0, max(0.0, 1.0 - psi + psi * s))
        s_next = degree.excess_pgf(x)
        if abs(s_next - s) < FIXED_POINT_TOL:
            logger.debug(f"q~* fixed point converged after {iteration} iterations: {s_next}")
            return s_next, iteration
        s = s_next
    raise ConvergenceError(
        f"q~* iteration did not settle within {FIXED_POINT_MAX_ITER} steps for {params.describe()}"
    )


def solve_qtilde_star(params: EpidemicParameters) -> float:
    """
    Smallest root in [0, 1] of s = E[(1 - psi + psi s)**(D~ - 1)].

    Iterating from s = 0 increases monotonically to the smallest root; the
    result is 1 when R0 <= 1.
    """
    return _iterate_qtilde(params)[0]


def solve_qtilde_star_bisection(params: EpidemicParameters) -> float:
    """Same root as solve_qtilde_star(), found by bisection on f(s) - s."""
    if compute_R0(params) <= 1.0:
        return 1.0
    psi = compute_psi(params)

    def excess(s: float) -> float:
        return params.degree.excess_pgf(min(1.0, max(0.0, 1.0 - psi + psi * s))) - s

    if excess(0.0) <= 0.0:
        return 0.0
    for j in range(1, 60):
        upper = 1.0 - 2.0 ** (-j)
        if excess(upper) < 0.0:
            return float(optimize.bisect(excess, 0.0, upper, xtol=1e-14))
    raise ConvergenceError(f"no sign change of f(s) - s below 1 for {params.describe()}")


def compute_qstar(params: EpidemicParameters, qtilde: float) -> float:
    """q* = E[Q**D], the limiting fraction never infected."""
    return params.degree.pgf(compute_Q(params, qtilde))


def compute_R0_star(params: EpidemicParameters, qtilde: float) -> float:
    """psi E[(D~ - 1) Q**(D~ - 2)], the reproduction number of the final phase."""
    return compute_psi(params) * params.degree.excess_derivative_weighted(compute_Q(params, qtilde))


def _shared_period_average(params: EpidemicParameters, derivative: Callable[[float], float],
                           r: float) -> float:
    """
    E_L[G(r + (1 - r) exp(-beta L))] for a pgf G with G(1) = 1, written as
    1 - (1 - r) int beta exp(-beta t) P(L > t) G'(x_t) dt.
    """
    beta = params.beta
    period = params.infectious_period

    def integrand(t: float) -> float:
        decay = math.exp(-beta * t)
        return beta * decay * float(period.survival(t)) * derivative(min(1.0, r + (1.0 - r) * decay))

    value, _ = integrate.quad(integrand, 0.0, period.support_max, epsabs=1e-13, epsrel=1e-11, limit=500)
    return 1.0 - (1.0 - r) * value


def major_outbreak_probability(params: EpidemicParameters) -> float:
    """
    Survival probability of the early-phase branching process started from
    one uniformly chosen infective.

    The contacts of one infective share its period, so given L each
    neighbour is reached with probability 1 - exp(-beta L); offspring counts
    are mixed binomial. With a constant period this reduces to 1 - q*.
    """
    if compute_R0(params) <= 1.0:
        return 0.0
    degree = params.degree

    def excess(r: float) -> float:
        return _shared_period_average(params, degree.excess_derivative_weighted, r) - r

    line = 0.0
    if excess(0.0) > 0.0:
        for j in range(1, 60):
            upper = 1.0 - 2.0 ** (-j)
            if excess(upper) < 0.0:
                line = float(optimize.bisect(excess, 0.0, upper, xtol=ROOT_XTOL))
                break
        else:
            raise ConvergenceError(f"no extinction probability below 1 for {params.describe()}")
    ancestor = _shared_period_average(params, lambda x: degree.mean * degree.excess_pgf(x), line)
    return 1.0 - ancestor


# =============================================================================
# PARÁMETROS MALTHUSIANOS
# =============================================================================

class DecayRoot(NamedTuple):
    alpha_star: float
    is_malthusian: bool
    alpha_dagger: float
    boundary_value: float


def growth_root(g: Callable[[float], float], label: str = "g") -> float:
    """Root of g(x) = 1 on (0, inf) for a decreasing g with g(0) > 1."""
    g0 = g(0.0)
    if math.isinf(g0):
        return math.inf
    if g0 <= 1.0:
        raise UnsupportedRegimeError(f"{label}(0)={g0} <= 1: no positive growth rate")
    upper = 1.0
    while g(upper) >= 1.0:
        upper *= 2.0
        if upper > BRACKET_LIMIT:
            raise ConvergenceError(f"{label}(x) stays above 1 up to x={BRACKET_LIMIT}")
    return float(optimize.bisect(lambda x: g(x) - 1.0, 0.0, upper, xtol=ROOT_XTOL))


def decay_root(g: Callable[[float], float], abscissa: float, label: str = "g") -> DecayRoot:
    """
    Solve g(x) = 1 on (abscissa, 0) for a decreasing g with g(0) < 1.

    When g stays at or below 1 up to the abscissa, the abscissa itself is the
    decay rate and the root is not Malthusian unless the boundary value is 1.
    """
    g0 = g(0.0)
    if g0 >= 1.0:
        raise UnsupportedRegimeError(f"{label}(0)={g0} >= 1: no negative decay rate")
    target = lambda x: g(x) - 1.0

    if math.isinf(abscissa):
        lower = -1.0
        while g(lower) <= 1.0:
            lower *= 2.0
            if lower < -BRACKET_LIMIT:
                raise ConvergenceError(f"{label}(x) stays below 1 down to x={-BRACKET_LIMIT}")
        root = float(optimize.bisect(target, lower, 0.0, xtol=ROOT_XTOL))
        return DecayRoot(root, True, abscissa, math.inf)

    previous = None
    value = g0
    for j in range(1, BOUNDARY_MAX_PROBES + 1):
        x = abscissa + abs(abscissa) * 2.0 ** (-j)
        value = g(x)
        if value > 1.0:
            root = float(optimize.bisect(target, x, 0.0, xtol=ROOT_XTOL))
            return DecayRoot(root, True, abscissa, value)
        if previous is not None and abs(value - previous) < BOUNDARY_TOL:
            break
        previous = value
    logger.info(f"{label} stays <= 1 up to the abscissa {abscissa}: boundary value {value:.12g}")
    return DecayRoot(abscissa, abs(value - 1.0) < BOUNDARY_TOL, abscissa, value)


def g_prime(params: EpidemicParameters, x: float) -> float:
    """Laplace transform of the early-phase reproduction measure."""
    phi = params.infectious_period.contact_transform(params.beta, x)
    if phi == 0:
        return 0.0
    return params.degree.size_biased_excess_mean() * phi


def g_star(params: EpidemicParameters, qtilde: float, x: float) -> float:
    """Laplace transform of the final-phase reproduction measure."""
    phi = params.infectious_period.contact_transform(params.beta, x)
    if phi == 0:
        return 0.0
    return params.degree.excess_derivative_weighted(compute_Q(params, qtilde)) * phi


def solve_alpha_prime(params: EpidemicParameters) -> float:
    """Positive Malthusian parameter of the early phase; +inf if E[D~ - 1] = inf."""
    r0 = compute_R0(params)
    if r0 <= 1.0:
        raise UnsupportedRegimeError(f"R0={r0} <= 1 for {params.describe()}")
    if math.isinf(params.degree.size_biased_excess_mean()):
        return math.inf
    return growth_root(lambda x: g_prime(params, x), label="g'")


def decay_abscissa(params: EpidemicParameters) -> float:
    """alpha_dagger = -(beta + r(L)), where the transform of mu* stops converging."""
    return -(params.beta + params.infectious_period.tail_rate)


def solve_alpha_star(params: EpidemicParameters, qtilde: float) -> DecayRoot:
    """Negative decay rate of the final phase (Malthusian or boundary)."""
    return decay_root(lambda x: g_star(params, qtilde, x), decay_abscissa(params), label="g*")


def check_condition_14(params: EpidemicParameters, alpha_star: float) -> bool:
    """True when every exponential moment of L of order below |alpha*| is finite."""
    return abs(alpha_star) <= params.infectious_period.tail_rate


# =============================================================================
# RESUMEN ANALÍTICO
# =============================================================================

@dataclass(frozen=True)
class EpidemicSummary:
    regime: str
    psi: float
    R0: float
    excess_mean: float
    qtilde_star: float
    Q: float
    q_star: float
    final_phase_weight: float
    R0_star: float
    alpha_prime: float
    alpha_dagger: float
    alpha_star: float
    alpha_star_is_malthusian: Optional[bool]
    duration_constant: float
    condition_14: Optional[bool]
    coverage: float = 1.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def summarize(params: EpidemicParameters, coverage: float = 1.0) -> EpidemicSummary:
    """
    Every limiting constant of the model in one record.

    Regimes:
        supercritical: R0 > 1 + 1e-8, all quantities defined
        critical: |R0 - 1| < 1e-8, duration reported as +inf
        subcritical: R0 < 1 - 1e-8, q~* = 1 and the rates are undefined (nan)
    """
    psi = compute_psi(params)
    excess = params.degree.size_biased_excess_mean()
    r0 = compute_R0(params)
    alpha_dagger = decay_abscissa(params)

    if abs(r0 - 1.0) < CRITICAL_BAND or r0 <= 1.0:
        regime = "critical" if abs(r0 - 1.0) < CRITICAL_BAND else "subcritical"
        logger.info(f"{regime} model (R0={r0:.10g}) for {params.describe()}")
        return EpidemicSummary(
            regime=regime, psi=psi, R0=r0, excess_mean=excess,
            qtilde_star=1.0, Q=1.0, q_star=1.0, final_phase_weight=excess, R0_star=r0,
            alpha_prime=math.nan, alpha_dagger=alpha_dagger, alpha_star=math.nan,
            alpha_star_is_malthusian=None,
            duration_constant=math.inf if regime == "critical" else math.nan,
            condition_14=None, coverage=coverage,
        )

    qtilde, iterations = _iterate_qtilde(params)
    oracle = solve_qtilde_star_bisection(params)
    big_q = compute_Q(params, qtilde)
    q_star = params.degree.pgf(big_q)
    weight = params.degree.excess_derivative_weighted(big_q)
    r0_star = psi * weight

    alpha_prime = solve_alpha_prime(params)
    decay = solve_alpha_star(params, qtilde)
    growth_part = 0.0 if math.isinf(alpha_prime) else 1.0 / alpha_prime
    duration = growth_part + 1.0 / abs(decay.alpha_star)

    diagnostics = {
        "qtilde_iterations": iterations,
        "qtilde_bisection": oracle,
        "qtilde_gap": abs(oracle - qtilde),
        "g_prime_residual": (g_prime(params, alpha_prime) - 1.0) if math.isfinite(alpha_prime) else None,
        "g_star_residual": g_star(params, qtilde, decay.alpha_star) - 1.0 if decay.is_malthusian else None,
        "g_star_boundary_value": decay.boundary_value,
    }
    logger.info(
        f"Supercritical model: R0={r0:.6g}, q~*={qtilde:.10g}, R0*={r0_star:.6g}, "
        f"alpha'={alpha_prime:.10g}, alpha*={decay.alpha_star:.10g}, duration={duration:.10g}"
    )
    return EpidemicSummary(
        regime="supercritical", psi=psi, R0=r0, excess_mean=excess,
        qtilde_star=qtilde, Q=big_q, q_star=q_star, final_phase_weight=weight, R0_star=r0_star,
        alpha_prime=alpha_prime, alpha_dagger=alpha_dagger, alpha_star=decay.alpha_star,
        alpha_star_is_malthusian=decay.is_malthusian, duration_constant=duration,
        condition_14=check_condition_14(params, decay.alpha_star),
        coverage=coverage, diagnostics=diagnostics,
    )


def duration_constant(params: EpidemicParameters) -> float:
    """1/alpha' + 1/|alpha*| (1/alpha' read as 0 when alpha' = inf)."""
    summary = summarize(params)
    if summary.regime == "subcritical":
        raise UnsupportedRegimeError(f"R0={summary.R0} <= 1 for {params.describe()}")
    return summary.duration_constant


# =============================================================================
# VACUNACIÓN
# =============================================================================

def vaccinated_summary(params: EpidemicParameters, coverage: float) -> EpidemicSummary:
    """Summary of the model after each half-edge is retained with probability c."""
    thinned = replace(params, degree=vaccinate(params.degree, coverage))
    return summarize(thinned, coverage=coverage)


def coverage_derivative_poisson(lam: float, psi: float, coverage: float, qtilde: float) -> float:
    """
    d(c q~*_c)/dc for Poisson(lam) degrees:
    q~*_c (c lam psi - 1) / (c lam psi q~*_c - 1), negative when c lam psi > 1
    because c lam psi q~*_c = R0*_c < 1.
    """
    x = coverage * lam * psi
    return qtilde * (x - 1.0) / (x * qtilde - 1.0)


# =============================================================================
# LÍMITE DE MEZCLA UNIFORME
# =============================================================================

def lambert_w(z: float, tol: float = 1e-15) -> float:
    """Principal real branch W0 on [-1/e, inf), Halley iteration."""
    branch_point = -math.exp(-1.0)
    if z < branch_point - 1e-15:
        raise DomainError(f"Lambert W argument {z} below -1/e")
    if abs(z - branch_point) <= 1e-15:
        return -1.0
    if z == 0.0:
        return 0.0
    if z < -0.25:
        w = math.sqrt(2.0 * (math.e * z + 1.0)) - 1.0
    elif z < 3.0:
        w = math.log1p(z)
    else:
        w = math.log(z) - math.log(math.log(z))
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        w1 = w + 1.0
        dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
        w -= dw
        if abs(dw) <= tol * (1.0 + abs(w)):
            break
    return w


class UniformMixingLimit(NamedTuple):
    coverage: float
    reproduction: float
    qtilde: float
    alpha_prime: float
    alpha_star: float
    is_malthusian: bool
    duration_constant: float


def uniform_mixing_limit(beta_prime: float, period: InfectiousPeriodModel,
                         coverage: float = 1.0) -> UniformMixingLimit:
    """
    Poisson(lam) degrees with beta = beta'/lam as lam -> inf.

    q~ = -W(-x exp(-x))/x with x = c beta' E[L]; the rates solve
    c beta' int exp(-a t) P(L > t) dt = 1 and the same with the factor q~.
    """
    if not beta_prime > 0:
        raise DomainError(f"beta'={beta_prime} must be positive")
    if not (0.0 < coverage <= 1.0):
        raise DomainError(f"coverage c={coverage} outside (0, 1]")
    if not math.isfinite(period.mean):
        raise DomainError(f"{period.describe()} has an infinite mean")
    x = coverage * beta_prime * period.mean
    if x <= 1.0:
        raise UnsupportedRegimeError(f"c beta' E[L]={x} <= 1")
    qtilde = -lambert_w(-x * math.exp(-x)) / x
    scale = coverage * beta_prime
    alpha_prime = growth_root(lambda a: scale * period.survival_transform(a), label="limit g'")
    decay = decay_root(lambda a: scale * qtilde * period.survival_transform(a),
                       -period.tail_rate, label="limit g*")
    duration = 1.0 / alpha_prime + 1.0 / abs(decay.alpha_star)
    return UniformMixingLimit(coverage, x, qtilde, alpha_prime, decay.alpha_star,
                              decay.is_malthusian, duration)


# =============================================================================
# PERFIL DE GRADOS DE LOS SUSCEPTIBLES FINALES
# =============================================================================

@dataclass(frozen=True)
class SusceptibleProfile:
    degrees: np.ndarray
    pmf: np.ndarray
    size_biased_pmf: np.ndarray
    p_ss: float
    excess_mean: float
    final_phase_weight: float
    normalizer: float
    consistency_gap: float

    def degree_model(self) -> TableDegree:
        """D* as a finite table (the truncated tail is below 1e-15)."""
        return TableDegree.from_weights(
            {int(k): float(p) for k, p in zip(self.degrees, self.pmf) if p > 0}
        )


def susceptible_degree_profile(params: EpidemicParameters, qtilde: float) -> SusceptibleProfile:
    """
    Degree law of the vertices that escape infection.

    p*_k = p_k Q**k / E[Q**D]; its size-biased law is p~_k Q**(k-1) / q~*;
    p*_ss = q~*/Q is the chance that a neighbour of such a vertex is also
    never infected, and E[D~* - 1] p*_ss equals E[(D~ - 1) Q**(D~ - 2)].
    """
    big_q = compute_Q(params, qtilde)
    degrees, weights = params.degree.pmf_table(big_q)
    total = float(weights.sum())
    if total <= 0:
        raise DomainError(f"no degree mass survives the tilt Q={big_q}")
    pmf = weights / total
    biased = degrees * pmf
    if biased.sum() <= 0:
        raise DomainError("the never-infected vertices all have degree 0")
    biased = biased / biased.sum()

    weight = params.degree.excess_derivative_weighted(big_q)
    excess = float(((degrees - 1) * biased).sum())
    p_ss = qtilde / big_q if big_q > 0 else 0.0
    gap = abs(excess * p_ss - weight)
    return SusceptibleProfile(
        degrees=degrees, pmf=pmf, size_biased_pmf=biased, p_ss=p_ss,
        excess_mean=excess, final_phase_weight=weight,
        normalizer=params.degree.pgf(big_q), consistency_gap=gap,
    )
