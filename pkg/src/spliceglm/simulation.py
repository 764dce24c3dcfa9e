"""Synthetic support-recovery experiments.

Each replication draws a Gaussian design, places a sparse coefficient
vector at equi-spaced indices, simulates a GLM response, fits
:func:`spliceglm.selection.abess` and records recovery metrics.

Random streams use NumPy's Philox counter-based generator seeded with
``SeedSequence([seed, n, replication])``, so every replication is
reproducible on its own and independent of thread scheduling.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidInputError, NumericalFailure
from .family import POISSON_ETA_MAX, as_family
from .glm import Coefficients, Dataset
from .selection import SelectorConfig, abess

DEFAULT_N_GRID = (500, 1000, 1500, 2000, 2500, 3000)

REPLICATION_COLUMNS = (
    "family", "n", "p", "rho", "replication", "covered_active",
    "covered_inactive", "exact", "re_err", "selected_size",
    "runtime_seconds", "failed",
)
AGGREGATE_COLUMNS = (
    "family", "n", "p", "rho", "prob_cover_active", "prob_cover_inactive",
    "prob_exact", "median_re_err", "mean_runtime_seconds", "replications",
)


@dataclass
class ExperimentConfig:
    """Declarative description of one simulation scenario.

    ``correlation`` is "independent" (identity covariance) or "constant"
    (unit variances, every pairwise covariance ``rho``). ``record_runtime``
    is off by default so repeated runs produce byte-identical CSV files;
    when off the runtime columns hold 0.0.
    """

    family: str = "logistic"
    n_grid: Sequence[int] = DEFAULT_N_GRID
    p: int = 500
    correlation: str = "independent"
    rho: float = 0.0
    beta_pattern: Sequence[float] = (2, 2, 8, 8, 8, 8, 10, 10, 10, 10)
    replications: int = 50
    seed: int = 0
    name: str = "experiment"
    noise_sd: float = 1.0
    record_runtime: bool = False
    s_max: object = "auto"
    k_max: int = 5
    tau: Optional[float] = None
    screening_size: object = "auto"

    def __post_init__(self):
        as_family(self.family)
        self.n_grid = tuple(int(n) for n in np.atleast_1d(self.n_grid))
        self.beta_pattern = tuple(float(b) for b in np.atleast_1d(self.beta_pattern))
        if self.correlation not in ("independent", "constant"):
            raise InvalidInputError(
                f"correlation must be 'independent' or 'constant', got {self.correlation!r}"
            )
        if self.correlation == "independent":
            self.rho = 0.0
        if not 0 <= self.rho < 1:
            raise InvalidInputError(f"rho must lie in [0, 1), got {self.rho}")
        if self.p < 1 or not self.n_grid or min(self.n_grid) < 1:
            raise InvalidInputError("n_grid and p must be positive")
        if len(self.beta_pattern) > self.p:
            raise InvalidInputError("beta_pattern is longer than p")
        if self.replications < 1:
            raise InvalidInputError("replications must be positive")
        if self.seed < 0:
            raise InvalidInputError("seed must be a nonnegative integer")

    def selector_config(self) -> SelectorConfig:
        return SelectorConfig(
            s_max=self.s_max, k_max=self.k_max, tau=self.tau,
            screening_size=self.screening_size,
        )


PRESETS: Dict[str, dict] = {
    "logistic-independent": dict(
        family="logistic", p=500, correlation="independent",
        beta_pattern=(2, 2, 8, 8, 8, 8, 10, 10, 10, 10),
    ),
    "logistic-constant": dict(
        family="logistic", p=500, correlation="constant", rho=0.4,
        beta_pattern=(2, 2, 8, 8, 8, 8, 10, 10, 10, 10),
    ),
    "poisson-independent": dict(
        family="poisson", p=500, correlation="independent",
        beta_pattern=(1, 1, 1),
    ),
    "poisson-constant": dict(
        family="poisson", p=500, correlation="constant", rho=0.2,
        beta_pattern=(1, 1, 1),
    ),
}


def preset(name: str, /, **overrides) -> ExperimentConfig:
    """Configuration of a named scenario; keyword overrides win."""
    if name not in PRESETS:
        raise InvalidInputError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        )
    kwargs = dict(PRESETS[name], name=name)
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


@dataclass
class MetricsRow:
    family: str
    n: int
    p: int
    rho: float
    replication: int
    covered_active: int
    covered_inactive: int
    exact: int
    re_err: float
    selected_size: int
    runtime_seconds: float
    failed: int
    beta_hat: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def replication_rng(seed: int, n: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, n, replication])))


def generate_design(n: int, p: int, correlation: str = "independent", rho: float = 0.0,
                    rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Rows i.i.d. from ``N(0, Sigma)``.

    The constant structure is drawn as ``sqrt(rho) * z0 + sqrt(1 - rho) * z``
    with one shared factor ``z0`` per row.
    """
    if n < 1 or p < 1:
        raise InvalidInputError("n and p must be positive")
    rng = rng if rng is not None else np.random.default_rng()
    Z = rng.standard_normal((n, p))
    if correlation == "independent":
        return Z
    if correlation != "constant":
        raise InvalidInputError(f"unknown correlation {correlation!r}")
    shared = rng.standard_normal((n, 1))
    return math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * Z


def true_support(p: int, k: int) -> np.ndarray:
    """Zero-based equi-spaced indices ``floor((t - 1) * p / k)``, t = 1..k."""
    return np.array([(t * p) // k for t in range(k)], dtype=np.intp)


def place_true_beta(p: int, pattern: Sequence[float]) -> Coefficients:
    pattern = np.asarray(pattern, dtype=float)
    if pattern.size > p:
        raise InvalidInputError("pattern is longer than p")
    beta = np.zeros(p)
    if pattern.size:
        beta[true_support(p, pattern.size)] = pattern
    return Coefficients(beta)


def simulate_response(X: np.ndarray, beta_star: Coefficients, family,
                      rng: Optional[np.random.Generator] = None,
                      noise_sd: float = 1.0) -> np.ndarray:
    fam = as_family(family)
    rng = rng if rng is not None else np.random.default_rng()
    eta = X @ beta_star.beta
    if beta_star.intercept is not None:
        eta = eta + beta_star.intercept
    if fam.kind == "gaussian":
        if noise_sd == 0:
            return eta
        return eta + noise_sd * rng.standard_normal(eta.shape)
    if fam.kind == "logistic":
        return rng.binomial(1, fam.mean(eta)).astype(float)
    return rng.poisson(np.exp(np.minimum(eta, POISSON_ETA_MAX))).astype(float)


def relative_error(beta_hat, beta_star) -> float:
    return float(np.linalg.norm(beta_hat - beta_star) / np.linalg.norm(beta_star))


def run_replication(cfg: ExperimentConfig, n: int, replication: int) -> MetricsRow:
    rng = replication_rng(cfg.seed, n, replication)
    X = generate_design(n, cfg.p, cfg.correlation, cfg.rho, rng)
    beta_star = place_true_beta(cfg.p, cfg.beta_pattern)
    y = simulate_response(X, beta_star, cfg.family, rng, cfg.noise_sd)
    truth = set(beta_star.support.tolist())

    failed = 0
    start = time.perf_counter()
    try:
        data = Dataset.from_raw(X, y, cfg.family)
        result = abess(data, cfg.selector_config())
        beta_hat = data.to_raw_scale(result.selected).beta
        size = result.selected_size
    except (NumericalFailure, InvalidInputError):
        failed = 1
        beta_hat = np.zeros(cfg.p)
        size = 0
    elapsed = time.perf_counter() - start if cfg.record_runtime else 0.0

    chosen = set(np.flatnonzero(beta_hat).tolist())
    covered_active = int(truth <= chosen)
    covered_inactive = int(chosen <= truth)
    return MetricsRow(
        family=cfg.family, n=n, p=cfg.p, rho=float(cfg.rho),
        replication=replication,
        covered_active=covered_active,
        covered_inactive=covered_inactive,
        exact=int(covered_active and covered_inactive),
        re_err=relative_error(beta_hat, beta_star.beta),
        selected_size=int(size),
        runtime_seconds=float(elapsed),
        failed=failed,
        beta_hat=beta_hat,
    )


def aggregate(rows: List[MetricsRow]) -> List[dict]:
    out = []
    for n in sorted({r.n for r in rows}):
        grp = [r for r in rows if r.n == n]
        first = grp[0]
        out.append(dict(
            family=first.family, n=n, p=first.p, rho=first.rho,
            prob_cover_active=float(np.mean([r.covered_active for r in grp])),
            prob_cover_inactive=float(np.mean([r.covered_inactive for r in grp])),
            prob_exact=float(np.mean([r.exact for r in grp])),
            median_re_err=float(np.median([r.re_err for r in grp])),
            mean_runtime_seconds=float(np.mean([r.runtime_seconds for r in grp])),
            replications=len(grp),
        ))
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(columns, records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def replications_csv(rows: List[MetricsRow]) -> str:
    return _csv_text(REPLICATION_COLUMNS, [asdict(r) for r in rows])


def aggregate_csv(rows: List[MetricsRow]) -> str:
    return _csv_text(AGGREGATE_COLUMNS, aggregate(rows))


def write_outputs(rows: List[MetricsRow], output_dir, name: str) -> Tuple[str, str]:
    os.makedirs(output_dir, exist_ok=True)
    paths = (
        os.path.join(output_dir, f"{name}_replications.csv"),
        os.path.join(output_dir, f"{name}_aggregate.csv"),
    )
    for path, text in zip(paths, (replications_csv(rows), aggregate_csv(rows))):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return paths


def run_experiment(cfg: ExperimentConfig, output_dir=None, threads: int = 1) -> List[MetricsRow]:
    """Run every (n, replication) pair and optionally write both CSV files.

    Rows come back sorted by (n, replication) whatever the thread count.
    """
    jobs = [(n, r) for n in cfg.n_grid for r in range(cfg.replications)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: run_replication(cfg, *job), jobs))
    else:
        rows = [run_replication(cfg, n, r) for n, r in jobs]
    rows.sort(key=lambda row: (row.n, row.replication))
    if output_dir is not None:
        write_outputs(rows, output_dir, cfg.name)
    return rows


def config_fields() -> List[str]:
    return [f.name for f in fields(ExperimentConfig)]
