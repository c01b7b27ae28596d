"""
epinet - Experiment Harness
Orquestación de experimentos: JSON de entrada, CSV de salida

Cada experimento recibe un ExperimentConfig validado y devuelve un
ResultTable: un DataFrame de pandas con las filas más un manifiesto que
repite la configuración completa. Las filas llevan (config_hash, seed,
wall_time), de modo que cada una se puede reproducir a partir del manifiesto.

Experimentos:
-------------
- analyze: constantes límite de un modelo (summary.json + una fila)
- simulate: una epidemia; outcome.json en una línea, registro de eventos y árbol de infección opcionales
- montecarlo: réplicas hasta cumplir la cuota de brotes mayores (o el límite de intentos)
- scaling: T*/log n o T+/log n sobre una lista de n frente a 1/alpha' + 1/|alpha*|
- vaccinate-sweep: constantes vacunadas sobre una grilla de coberturas
- branching: tiempos de alcance / extinción de los procesos CMJ aproximantes
- examples: los tres ejemplos de referencia de vacunación

Semillas:
---------
La réplica i usa la semilla base_seed + i. Dentro de una réplica, el grafo y
la epidemia sortean de los dos hijos de SeedSequence((seed, n)), así que los
resultados no dependen del número de procesos.
"""

# =============================================================================
# IMPORTS Y CONFIGURACIÓN
# =============================================================================

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from analytics import (
    EpidemicParameters,
    coverage_derivative_poisson,
    major_outbreak_probability,
    summarize,
    uniform_mixing_limit,
    vaccinated_summary,
)
from branching import (
    early_phase_law,
    extinction_time_ensemble,
    final_phase_law,
    hitting_time_ensemble,
    malthusian_parameter,
)
from distributions import ConstantPeriod, PoissonDegree, vaccinate
from epidemic_sim import run_epidemic, sample_degree_sequence
from experiment_config import ExperimentConfig, ParametersSpec, preset_parameters

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
MANIFEST_FILE = "manifest.json"
OUTCOME_FILE = "outcome.json"
RUN_INFO_FILE = "run_info.json"
REPLICATE_COLUMNS = [
    "replicate", "seed", "n", "T_star", "T_dagger", "final_susceptible_fraction",
    "infections", "major", "contacts",
]
EXAMPLE3_REFERENCE = {1.0: 2.04, 0.99: 2.021}
EXAMPLE2_LAMBDAS = (10.0, 100.0, 1_000.0, 10_000.0)
EXAMPLE2_BETA_PRIME = 2.0
EXAMPLE1_GRID_POINTS = 8
FINITE_DIFFERENCE_STEP = 1e-5


class RefusedConfigurationError(ValueError):
    """The configuration asks for a claim the limit theory does not support."""


# =============================================================================
# RESULTADOS
# =============================================================================

def to_json_safe(obj):
    """Convert numpy and float specials to JSON-safe Python values (nan -> None, inf -> 'inf')."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return [to_json_safe(item) for item in obj.tolist()]
    if hasattr(obj, "item"):  # numpy scalar types
        return to_json_safe(obj.item())
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, int):
        return obj
    return str(obj)


def config_hash(config: ExperimentConfig) -> str:
    """First 16 hex digits of the sha256 of the canonical config JSON."""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class ResultTable:
    rows: pd.DataFrame
    manifest: Dict[str, Any]
    extras: Dict[str, pd.DataFrame] = field(default_factory=dict)
    documents: Dict[str, Any] = field(default_factory=dict)
    records: Dict[str, Any] = field(default_factory=dict)

    def write(self, out_dir) -> Dict[str, Path]:
        """
        Write manifest.json, results.csv and any extra CSV / JSON files.

        `records` are written as a single JSON line each. The creation time
        goes to run_info.json so that the manifest of a rerun is byte-identical.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = {}
        path = out / MANIFEST_FILE
        path.write_text(json.dumps(to_json_safe(self.manifest), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        written[MANIFEST_FILE] = path
        path = out / RESULTS_FILE
        self.rows.to_csv(path, index=False)
        written[RESULTS_FILE] = path
        for name, frame in self.extras.items():
            path = out / name
            frame.to_csv(path, index=False)
            written[name] = path
        for name, document in self.documents.items():
            path = out / name
            path.write_text(json.dumps(to_json_safe(document), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
            written[name] = path
        for name, record in self.records.items():
            path = out / name
            path.write_text(json.dumps(to_json_safe(record), sort_keys=True, separators=(",", ":")) + "\n",
                            encoding="utf-8")
            written[name] = path
        path = out / RUN_INFO_FILE
        path.write_text(json.dumps({"created_at": datetime.now().isoformat(timespec="seconds")}) + "\n",
                        encoding="utf-8")
        written[RUN_INFO_FILE] = path
        logger.info(f"Wrote {sorted(written)} to {out}")
        return written


def _manifest(config: ExperimentConfig, parameters: Optional[ParametersSpec], **details) -> Dict[str, Any]:
    manifest = {
        "config": config.model_dump(mode="json"),
        "config_hash": config_hash(config),
        "parameters": parameters.model_dump(mode="json", by_alias=True) if parameters else None,
        "seed_schedule": "replicate i uses base_seed + i; graph and epidemic seeds are the "
                         "two children of SeedSequence((seed, n))",
        "library_versions": {"numpy": np.__version__, "pandas": pd.__version__},
    }
    manifest.update(details)
    return manifest


def _stamp(frame: pd.DataFrame, config: ExperimentConfig) -> pd.DataFrame:
    frame = frame.copy()
    frame["config_hash"] = config_hash(config)
    if "seed" not in frame.columns:
        frame["seed"] = config.base_seed
    if "wall_time" not in frame.columns:
        frame["wall_time"] = math.nan
    return frame


def _echo(frame: pd.DataFrame, config: ExperimentConfig, seed: int) -> pd.DataFrame:
    """Per-event and per-vertex tables carry the seed and config hash of their run."""
    return frame.assign(seed=seed, config_hash=config_hash(config))


# =============================================================================
# RÉPLICAS DE MONTE CARLO
# =============================================================================

def replicate_seeds(seed: int, n: int) -> Tuple[np.random.SeedSequence, np.random.SeedSequence]:
    graph_seed, epidemic_seed = np.random.SeedSequence((seed, n)).spawn(2)
    return graph_seed, epidemic_seed


def _run_replicate(job) -> Dict[str, Any]:
    """One replicate as a row; top-level so it can be shipped to worker processes."""
    params, n, seed, index, initial_infected, check, gamma_levels = job
    start = time.perf_counter()
    graph_seed, epidemic_seed = replicate_seeds(seed, n)
    sequence = sample_degree_sequence(params.degree, n, graph_seed)
    outcome = run_epidemic(sequence, params.beta, params.infectious_period, epidemic_seed,
                           initial_infected=initial_infected, check_invariants=check,
                           gamma_levels=gamma_levels)
    row = {
        "replicate": index, "seed": seed, "n": n,
        "T_star": outcome.t_strong, "T_dagger": outcome.t_weak,
        "final_susceptible_fraction": outcome.final_susceptible_fraction,
        "infections": outcome.infections, "major": outcome.major, "contacts": outcome.contacts,
    }
    for gamma in gamma_levels:
        row[f"T_gamma_{gamma:g}"] = outcome.gamma_times.get(gamma, math.nan)
    row["wall_time"] = time.perf_counter() - start
    return row


def _collect_majors(config: ExperimentConfig, params: EpidemicParameters, n: int,
                    executor: Optional[ProcessPoolExecutor]) -> Tuple[List[Dict[str, Any]], bool]:
    """
    Run replicates in index order until `majors_required` major outbreaks
    are collected or `attempt_cap` runs were made. Rows past the replicate
    completing the quota are dropped, so the table does not depend on the
    batch size.
    """
    rows: List[Dict[str, Any]] = []
    majors = 0
    batch = max(1, 4 * config.jobs)
    index = 0
    while majors < config.majors_required and index < config.attempt_cap:
        stop = min(index + batch, config.attempt_cap)
        jobs = [(params, n, config.replicate_seed(i), i, config.initial_infected,
                 config.check_invariants, tuple(config.gamma_levels)) for i in range(index, stop)]
        results = executor.map(_run_replicate, jobs) if executor else map(_run_replicate, jobs)
        for row in sorted(results, key=lambda r: r["replicate"]):
            if majors >= config.majors_required:
                break
            rows.append(row)
            majors += bool(row["major"])
        index = stop
    quota_met = majors >= config.majors_required
    if not quota_met:
        logger.warning(f"n={n}: only {majors} major outbreaks in {len(rows)} attempts "
                       f"(quota {config.majors_required}); table is partial")
    else:
        logger.info(f"n={n}: quota of {majors} major outbreaks met after {len(rows)} attempts")
    return rows, quota_met


def _executor(config: ExperimentConfig) -> Optional[ProcessPoolExecutor]:
    return ProcessPoolExecutor(max_workers=config.jobs) if config.jobs > 1 else None


def _outbreak_statistics(n: int, frame: pd.DataFrame, quota_met: bool, predicted: float) -> Dict[str, Any]:
    attempts = len(frame)
    majors = int(frame["major"].sum()) if attempts else 0
    frequency = majors / attempts if attempts else math.nan
    return {
        "n": n, "attempts": attempts, "majors": majors, "rejected": attempts - majors,
        "major_frequency": frequency, "predicted_major_probability": predicted,
        "quota_met": quota_met,
    }


# =============================================================================
# EXPERIMENTOS
# =============================================================================

def analyze(config: ExperimentConfig) -> ResultTable:
    spec = config.resolved_parameters()
    params = spec.build()
    summary = summarize(params)
    record = summary.to_dict()
    record["major_outbreak_probability"] = major_outbreak_probability(params)
    diagnostics = record.pop("diagnostics")
    rows = _stamp(pd.DataFrame([record]), config)
    return ResultTable(rows, _manifest(config, spec, experiment="analyze"),
                       documents={"summary.json": {**record, "diagnostics": diagnostics}})


def simulate(config: ExperimentConfig) -> ResultTable:
    spec = config.resolved_parameters()
    params = spec.build()
    n = config.n[0]
    seed = config.base_seed
    start = time.perf_counter()
    graph_seed, epidemic_seed = replicate_seeds(seed, n)
    sequence = sample_degree_sequence(params.degree, n, graph_seed)
    outcome = run_epidemic(sequence, params.beta, params.infectious_period, epidemic_seed,
                           initial_infected=config.initial_infected,
                           check_invariants=config.check_invariants,
                           gamma_levels=config.gamma_levels)
    record = outcome.to_dict()
    record["seed"] = seed
    gamma_times = record.pop("gamma_times")
    for gamma, value in gamma_times.items():
        record[f"T_gamma_{gamma}"] = value
    outcome_line = {**record, "config_hash": config_hash(config), "config": config.model_dump(mode="json")}
    record["wall_time"] = time.perf_counter() - start
    extras = {}
    if config.record_events:
        extras["events.csv"] = _echo(outcome.events_frame(), config, seed)
    if config.record_tree:
        extras["tree.csv"] = _echo(outcome.infection_tree_frame(), config, seed)
    logger.info(f"simulate n={n} seed={seed}: {outcome.infections} infections, "
                f"T*={outcome.t_strong:.6g}, T+={outcome.t_weak:.6g}")
    return ResultTable(_stamp(pd.DataFrame([record]), config),
                       _manifest(config, spec, experiment="simulate"), extras,
                       records={OUTCOME_FILE: outcome_line})


def montecarlo(config: ExperimentConfig) -> ResultTable:
    spec = config.resolved_parameters()
    params = spec.build()
    predicted = major_outbreak_probability(params)
    frames, statistics = [], []
    executor = _executor(config)
    try:
        for n in config.n:
            rows, quota_met = _collect_majors(config, params, n, executor)
            frame = pd.DataFrame(rows, columns=None if rows else REPLICATE_COLUMNS)
            frames.append(frame)
            statistics.append(_outbreak_statistics(n, frame, quota_met, predicted))
    finally:
        if executor is not None:
            executor.shutdown()
    rows = _stamp(pd.concat(frames, ignore_index=True), config)
    stats = pd.DataFrame(statistics)
    return ResultTable(rows, _manifest(config, spec, experiment="montecarlo",
                                       partial=not bool(stats["quota_met"].all()),
                                       outbreaks=stats.to_dict(orient="records")),
                       {"outbreaks.csv": stats})


def scaling_study(config: ExperimentConfig) -> ResultTable:
    """
    Per-n statistics of T/log n over major outbreaks, the target constant,
    and the regression slope of mean T against log n across the n-list.

    Raises:
        RefusedConfigurationError: the model is not supercritical, or T* is
        requested while |alpha*| exceeds the tail rate of L (T*/log n then has
        a different limit than the duration constant).
    """
    spec = config.resolved_parameters()
    params = spec.build()
    summary = summarize(params)
    if summary.regime != "supercritical":
        raise RefusedConfigurationError(
            f"scaling needs a supercritical model, got {summary.regime} (R0={summary.R0:.6g})")
    if config.target == "T_star" and not summary.condition_14:
        raise RefusedConfigurationError(
            f"T* scaling refused: T*/log n converges to 1/alpha' + 1/|alpha*| if and only if "
            f"|alpha*| <= sup{{r: E[exp(rL)] < inf}}; here alpha*={summary.alpha_star:.6g} and the "
            f"tail rate of {params.infectious_period.describe()} is {params.infectious_period.tail_rate:.6g}. "
            f"Use target 'T_dagger'.")
    target = summary.duration_constant
    predicted = major_outbreak_probability(params)

    per_run, per_n, statistics = [], [], []
    executor = _executor(config)
    try:
        for n in config.n:
            rows, quota_met = _collect_majors(config, params, n, executor)
            frame = pd.DataFrame(rows, columns=None if rows else REPLICATE_COLUMNS)
            per_run.append(frame)
            statistics.append(_outbreak_statistics(n, frame, quota_met, predicted))
            majors = frame[frame["major"].astype(bool)] if len(frame) else frame
            log_n = math.log(n)
            values = majors[config.target].to_numpy(dtype=float)
            ratio = values / log_n
            gap = (majors["T_star"] - majors["T_dagger"]).to_numpy(dtype=float) / log_n
            per_n.append({
                "n": n, "log_n": log_n, "majors": len(majors), "attempts": len(frame),
                "quota_met": quota_met, "target": config.target,
                "mean_T": float(values.mean()) if values.size else math.nan,
                "mean_ratio": float(ratio.mean()) if ratio.size else math.nan,
                "q10_ratio": float(np.quantile(ratio, 0.1)) if ratio.size else math.nan,
                "q90_ratio": float(np.quantile(ratio, 0.9)) if ratio.size else math.nan,
                "mean_gap_ratio": float(gap.mean()) if gap.size else math.nan,
                "duration_constant": target,
            })
            logger.info(f"scaling n={n}: mean {config.target}/log n = {per_n[-1]['mean_ratio']:.4f} "
                        f"(target {target:.4f})")
    finally:
        if executor is not None:
            executor.shutdown()

    rows = pd.DataFrame(per_n)
    rows["deviation"] = rows["mean_ratio"] - target
    usable = rows["mean_T"].notna()
    slope = math.nan
    if usable.sum() >= 2:
        slope = float(np.polyfit(rows.loc[usable, "log_n"], rows.loc[usable, "mean_T"], 1)[0])
    rows["slope"] = slope
    logger.info(f"scaling slope of mean {config.target} against log n: {slope:.4f} (target {target:.4f})")
    return ResultTable(
        _stamp(rows, config),
        _manifest(config, spec, experiment="scaling", slope=slope, summary=summary.to_dict(),
                  partial=not bool(rows["quota_met"].all())),
        {"replicates.csv": _stamp(pd.concat(per_run, ignore_index=True), config),
         "outbreaks.csv": pd.DataFrame(statistics)},
    )


def _coverage_row(params: EpidemicParameters, coverage: float) -> Dict[str, Any]:
    summary = vaccinated_summary(params, coverage)
    row = {
        "coverage": coverage, "regime": summary.regime, "R0": summary.R0,
        "qtilde_star": summary.qtilde_star, "c_qtilde": coverage * summary.qtilde_star,
        "q_star": summary.q_star, "R0_star": summary.R0_star,
        "alpha_prime": summary.alpha_prime, "alpha_star": summary.alpha_star,
        "alpha_star_is_malthusian": summary.alpha_star_is_malthusian,
        "duration_constant": summary.duration_constant, "condition_14": summary.condition_14,
        "major_outbreak_probability": major_outbreak_probability(
            replace(params, degree=vaccinate(params.degree, coverage))),
    }
    if isinstance(params.degree, PoissonDegree) and summary.regime == "supercritical":
        row["c_qtilde_derivative"] = coverage_derivative_poisson(
            params.degree.lam, summary.psi, coverage, summary.qtilde_star)
    return row


def vaccinate_sweep(config: ExperimentConfig) -> ResultTable:
    spec = config.resolved_parameters()
    params = spec.build()
    rows = pd.DataFrame([_coverage_row(params, c) for c in sorted(config.coverages)])
    logger.info(f"vaccination sweep over {len(rows)} coverages for {params.describe()}")
    return ResultTable(_stamp(rows, config), _manifest(config, spec, experiment="vaccinate-sweep"))


def branching_experiment(config: ExperimentConfig) -> ResultTable:
    """
    Hitting times of k particles (early phase) or extinction times from k
    ancestors (final phase), centred by log k / |alpha|.
    """
    spec = config.resolved_parameters()
    params = spec.build()
    options = config.branching
    law = early_phase_law(params) if options.phase == "early" else final_phase_law(params)
    alpha = malthusian_parameter(law)
    start = time.perf_counter()
    if options.mode == "hitting":
        frame = hitting_time_ensemble(law, options.ks, config.replicates, config.base_seed,
                                      options.count, options.population_cap)
    else:
        frame = extinction_time_ensemble(law, options.ks, config.replicates, config.base_seed,
                                         options.population_cap)
    frame["log_k"] = np.log(frame["k"].astype(float))
    frame["ratio"] = frame["time"] / frame["log_k"]
    frame["limit"] = 1.0 / abs(alpha)
    frame["centered"] = frame["time"] - frame["log_k"] / abs(alpha)
    frame["wall_time"] = (time.perf_counter() - start) / max(len(frame), 1)
    summary = (frame.groupby("k")["ratio"].agg(["mean", "count"]).reset_index()
               .rename(columns={"mean": "mean_ratio", "count": "runs"}))
    summary["limit"] = 1.0 / abs(alpha)
    logger.info(f"{law.label} branching ({options.mode}): alpha={alpha:.6g}, "
                f"mean ratios {summary['mean_ratio'].round(4).tolist()}")
    return ResultTable(
        _stamp(frame, config),
        _manifest(config, spec, experiment="branching", law=law.label, alpha=alpha,
                  mean_offspring=law.mean_offspring()),
        {"branching_summary.csv": summary},
    )


# =============================================================================
# EJEMPLOS DE VACUNACIÓN
# =============================================================================

def example_one(points: int = EXAMPLE1_GRID_POINTS) -> pd.DataFrame:
    """
    Poisson degrees with a constant period on a coverage grid above the
    threshold c lam psi = 1: the duration constant decreases in c and the
    closed-form d(c q~*_c)/dc matches central differences.
    """
    params = preset_parameters("poisson-constant").build()
    psi = vaccinated_summary(params, 1.0).psi
    lam = params.degree.lam
    c_min = 1.1 / (lam * psi)
    rows = []
    for c in np.linspace(c_min, 1.0 - 2 * FINITE_DIFFERENCE_STEP, points):
        row = _coverage_row(params, float(c))
        upper = vaccinated_summary(params, c + FINITE_DIFFERENCE_STEP)
        lower = vaccinated_summary(params, c - FINITE_DIFFERENCE_STEP)
        row["c_qtilde_finite_difference"] = (
            (c + FINITE_DIFFERENCE_STEP) * upper.qtilde_star
            - (c - FINITE_DIFFERENCE_STEP) * lower.qtilde_star
        ) / (2 * FINITE_DIFFERENCE_STEP)
        rows.append(row)
    frame = pd.DataFrame(rows)
    frame["duration_decreasing"] = frame["duration_constant"].diff().fillna(-1.0) < 0
    return frame


def example_two(lambdas: Sequence[float] = EXAMPLE2_LAMBDAS,
                beta_prime: float = EXAMPLE2_BETA_PRIME) -> pd.DataFrame:
    """Poisson(lam) with beta = beta'/lam against the uniform-mixing limit."""
    period = ConstantPeriod(1.0)
    limit = uniform_mixing_limit(beta_prime, period)
    rows = []
    for lam in lambdas:
        summary = summarize(EpidemicParameters(PoissonDegree(lam), period, beta_prime / lam))
        rows.append({
            "lambda": lam, "qtilde_star": summary.qtilde_star, "limit_qtilde": limit.qtilde,
            "qtilde_gap": abs(summary.qtilde_star - limit.qtilde),
            "alpha_prime": summary.alpha_prime, "limit_alpha_prime": limit.alpha_prime,
            "alpha_star": summary.alpha_star, "limit_alpha_star": limit.alpha_star,
            "duration_constant": summary.duration_constant,
            "limit_duration_constant": limit.duration_constant,
        })
    return pd.DataFrame(rows)


def example_three() -> pd.DataFrame:
    """Duration constants of the heterogeneous table model, unvaccinated and at c = 0.99."""
    params = preset_parameters("example3").build()
    rows = []
    for coverage, reference in EXAMPLE3_REFERENCE.items():
        row = _coverage_row(params, coverage)
        row["reference"] = reference
        row["reference_gap"] = abs(row["duration_constant"] - reference)
        rows.append(row)
    return pd.DataFrame(rows)


def example_suite(config: Optional[ExperimentConfig] = None) -> ResultTable:
    if config is None:
        config = ExperimentConfig(kind="examples")
    tables = {
        "example1": example_one(),
        "example2": example_two(),
        "example3": example_three(),
    }
    rows = pd.concat([frame.assign(example=name) for name, frame in tables.items()],
                     ignore_index=True, sort=False)
    logger.info(f"example suite: {len(rows)} rows")
    return ResultTable(_stamp(rows, config), _manifest(config, None, experiment="examples"),
                       {f"{name}.csv": frame for name, frame in tables.items()})


# =============================================================================
# DESPACHO
# =============================================================================

EXPERIMENTS: Dict[str, Callable[[ExperimentConfig], ResultTable]] = {
    "analyze": analyze,
    "simulate": simulate,
    "montecarlo": montecarlo,
    "scaling": scaling_study,
    "vaccinate-sweep": vaccinate_sweep,
    "branching": branching_experiment,
    "examples": example_suite,
}


def run_experiment(config: ExperimentConfig, write: bool = True) -> ResultTable:
    """Run the experiment named by `config.kind` and write it to `config.output_dir`."""
    logger.info(f"Running {config.kind} experiment (config {config_hash(config)})")
    table = EXPERIMENTS[config.kind](config)
    if write:
        table.write(config.output_dir)
    return table
