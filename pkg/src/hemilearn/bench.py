"""Experiment harness: single trials, seeded sweeps and the projection self-check."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import BoundsState, DistanceMatrix, LabeledDatum, Query, floyd_warshall_min, read_instance
from .instances import (
    YELP_M1,
    YELP_M2,
    gen_attribute_instance,
    gen_clustered,
    gen_quantized_clustered,
    gen_synthetic_restaurants,
    load_items_csv,
    subsample,
    uniform_instance,
)
from .learner import LearnerOptions, SideInformation, ind_greedy, ind_greedy_sit, learn_hm
from .projection import ProjectionScope, brute_force_bounds, certificate_check, lu_proj
from .response import BOUNDED, GAUSSIAN, NOISE_FREE, BudgetExhausted, NoiseModel, UserOracle

ALGORITHMS = ("learnhm", "indgreedy", "indgreedy-sit")
INSTANCE_KINDS = ("clustered", "quantized", "uniform", "yelp-m1", "yelp-m2", "file")
SWEEP_AXES = ("n", "eps", "eta_bn", "sigma")

RESULT_COLUMNS = [
    "row_type", "algo", "policy", "projection_mode", "n", "K", "r", "r_in", "eps", "delta",
    "noise_kind", "sigma", "eta_bn", "seed", "iterations", "user_queries", "linf_error",
    "wall_clock_ms", "user_queries_std", "status",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "clustered"
    n: int = 100
    K: int = 5
    r: float = 1.0
    r_in: float = 0.1
    quantum: float | None = None
    value: float | None = None
    instance: str | None = None
    items: str | None = None
    algorithms: tuple[str, ...] = ("learnhm", "indgreedy")
    sweep_axis: str = "n"
    sweep_values: tuple[float, ...] = (100,)
    eps: float = 0.01
    delta: float = 0.05
    noise_kind: str = NOISE_FREE
    sigma: float = 0.0
    eta_bn: float = 0.0
    policy: str = "qclique"
    projection_mode: str = "fast"
    seeds: int = 5
    seed: int = 0
    out: str | None = None
    record_timing: bool = False

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.sweep_values = tuple(self.sweep_values)
        if self.kind not in INSTANCE_KINDS:
            raise ConfigError(f"kind must be one of {INSTANCE_KINDS}")
        if self.kind == "file" and not self.instance:
            raise ConfigError("kind=file needs an instance path")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES}")
        if not self.sweep_values:
            raise ConfigError("at least one sweep value is required")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.noise_kind not in (NOISE_FREE, BOUNDED, GAUSSIAN):
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}")

    def at(self, value) -> "ExperimentConfig":
        """The config with the sweep axis pinned to ``value``."""
        axis = self.sweep_axis
        cast = int if axis == "n" else float
        return replace(self, **{axis: cast(value)})

    @property
    def noise_handling(self) -> str:
        return {NOISE_FREE: "direct", BOUNDED: "bounded-robust", GAUSSIAN: "unbounded-robust"}[self.noise_kind]

    def learner_options(self) -> LearnerOptions:
        return LearnerOptions(
            epsilon=self.quantum / 2 if self.quantum and self.kind == "quantized" else self.eps,
            delta=self.delta,
            projection_mode=self.projection_mode,
            policy=self.policy,
            quantization=self.quantum if self.kind == "quantized" else None,
            noise_handling=self.noise_handling,
        )


# -- config file ---------------------------------------------------------------

_TUPLE_FIELDS = {"algorithms": str, "sweep_values": float}


def _parse_value(name: str, raw: str, ftype):
    raw = raw.strip()
    if name in _TUPLE_FIELDS:
        return tuple(_TUPLE_FIELDS[name](v.strip()) for v in raw.split(",") if v.strip())
    if raw.lower() in ("", "none"):
        return None
    if name == "record_timing":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"record_timing must be a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if name in ("n", "K", "seeds", "seed"):
        return int(raw)
    if name in ("kind", "instance", "items", "sweep_axis", "noise_kind", "policy", "projection_mode", "out"):
        return raw
    return float(raw)


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` comments, comma-separated lists)."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw, known[key])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# -- trials ------------------------------------------------------------------------

def build_instance(cfg: ExperimentConfig, seed: int) -> DistanceMatrix:
    if cfg.kind == "clustered":
        return gen_clustered(cfg.n, cfg.K, cfg.r, cfg.r_in, seed)[0]
    if cfg.kind == "quantized":
        return gen_quantized_clustered(cfg.n, cfg.K, cfg.r, cfg.quantum or 1 / 64, seed)[0]
    if cfg.kind == "uniform":
        return uniform_instance(cfg.n, cfg.r / 2 if cfg.value is None else cfg.value, cfg.r)
    if cfg.kind == "file":
        D = read_instance(cfg.instance)
        if cfg.n > D.n:
            raise ConfigError(f"instance has {D.n} items, asked for {cfg.n}")
        # first n items of the stored order
        return DistanceMatrix(D.entries[:cfg.n, :cfg.n], D.r)
    items = load_items_csv(cfg.items) if cfg.items else gen_synthetic_restaurants(cfg.seed)
    items = subsample(items, cfg.n, cfg.seed)
    weights = YELP_M1 if cfg.kind == "yelp-m1" else YELP_M2
    return gen_attribute_instance(items, weights, cfg.r, seed)


def _base_row(cfg: ExperimentConfig, algo: str, seed) -> dict:
    learner = algo == "learnhm"
    return {
        "row_type": "result", "algo": algo,
        "policy": cfg.policy if learner else "qgreedy",
        "projection_mode": cfg.projection_mode if learner else "none",
        "n": cfg.n, "K": cfg.K, "r": cfg.r, "r_in": cfg.r_in,
        "eps": cfg.learner_options().epsilon, "delta": cfg.delta,
        "noise_kind": cfg.noise_kind, "sigma": cfg.sigma, "eta_bn": cfg.eta_bn,
        "seed": seed, "iterations": "", "user_queries": "", "linf_error": "",
        "wall_clock_ms": "", "user_queries_std": "", "status": "ok",
    }


def run_trial(cfg: ExperimentConfig, algo: str, seed: int) -> dict:
    """Run one algorithm on one seeded instance; failures become a marked row."""
    row = _base_row(cfg, algo, seed)
    try:
        D = build_instance(cfg, seed)
        noise = NoiseModel(cfg.noise_kind, cfg.sigma, cfg.eta_bn)
        oracle = UserOracle(D, noise, seed)
        opts = cfg.learner_options()
        if algo == "learnhm":
            _, stats = learn_hm(oracle, opts=opts)
        elif algo == "indgreedy":
            _, stats = ind_greedy(oracle, opts=opts)
        else:
            _, stats = ind_greedy_sit(oracle, SideInformation(D), opts=opts)
    except BudgetExhausted as exc:
        row["status"] = f"failed: {exc}"
        return row
    except (ValueError, RuntimeError) as exc:
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
        return row
    row.update(
        iterations=stats.iterations,
        user_queries=stats.user_queries,
        linf_error=stats.final_linf_error,
        wall_clock_ms=round(stats.wall_clock_ms, 3) if cfg.record_timing else 0,
    )
    return row


def summarize(rows: Sequence[dict]) -> dict:
    ok = [r for r in rows if r["status"] == "ok"]
    out = dict(rows[0], row_type="summary", seed="")
    if not ok:
        out.update(status="failed: no successful trials")
        return out
    q = [float(r["user_queries"]) for r in ok]
    out.update(
        iterations=statistics.fmean(float(r["iterations"]) for r in ok),
        user_queries=statistics.fmean(q),
        user_queries_std=statistics.pstdev(q),
        linf_error=statistics.fmean(float(r["linf_error"]) for r in ok),
        wall_clock_ms=statistics.fmean(float(r["wall_clock_ms"]) for r in ok),
        status="ok" if len(ok) == len(rows) else f"partial: {len(ok)}/{len(rows)}",
    )
    return out


def sweep(cfg: ExperimentConfig) -> list[dict]:
    """All trial rows in (value, algorithm, seed) order followed by one summary row per point."""
    results, summaries = [], []
    for value in cfg.sweep_values:
        point = cfg.at(value)
        for algo in cfg.algorithms:
            group = [run_trial(point, algo, cfg.seed + s) for s in range(cfg.seeds)]
            results.extend(group)
            summaries.append(summarize(group))
    return results + summaries


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def rows_to_csv(rows: Sequence[dict], header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def write_csv(rows: Sequence[dict], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


# -- verification ------------------------------------------------------------------

@dataclass
class VerifyReport:
    trials: int = 0
    passed: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __str__(self):
        lines = [f"verify: {self.passed}/{self.trials} trials passed"]
        lines += [f"  {f}" for f in self.failures]
        return "\n".join(lines)


def _faulty_proj(Lt, Ut, skip_pivot: int):
    n = Lt.shape[0]
    scope = ProjectionScope([k for k in range(n) if k != skip_pivot],
                            [(i, j) for i in range(n) for j in range(n)])
    return lu_proj(Lt, Ut, scope)


def random_grid_log(rng: np.random.Generator, n: int, grid_step: float = 1 / 8, r: float = 1.0,
                    n_labels: int | None = None):
    """A grid ground truth and a noise-free label log with grid offers."""
    top = round(r / grid_step)
    W = rng.integers(0, top + 1, (n, n)).astype(float)
    np.fill_diagonal(W, 0.0)
    D = floyd_warshall_min(W) * grid_step
    if n_labels is None:
        n_labels = int(rng.integers(3, 3 * n + 1))
    data = []
    for _ in range(n_labels):
        i, j = (int(x) for x in rng.choice(n, 2, replace=False))
        c = float(rng.integers(0, top + 1)) * grid_step
        data.append(LabeledDatum(Query(i, j, c), int(c >= D[i, j] - 1e-12)))
    return D, data


def replay(data: Sequence[LabeledDatum], n: int, r: float = 1.0, skip_pivot: int | None = None,
           on_step=None) -> BoundsState:
    """Apply a label log one datum at a time with a full projection after each."""
    B = BoundsState.fresh(n, r)
    for d in data:
        q = d.query
        Lt, Ut = B.lower.copy(), B.upper.copy()
        if d.label == 1:
            Ut[q.i, q.j] = min(Ut[q.i, q.j], q.c)
        else:
            Lt[q.i, q.j] = max(Lt[q.i, q.j], q.c)
        L, U = lu_proj(Lt, Ut) if skip_pivot is None else _faulty_proj(Lt, Ut, skip_pivot)
        if on_step is not None:
            on_step(Lt, Ut, L, U)
        B = BoundsState(L, U, r)
    return B


def verify(n_max: int = 4, trials: int = 200, seed: int = 0, grid_step: float = 1 / 8,
           skip_pivot: int | None = None) -> VerifyReport:
    """Certificate and grid-oracle checks of the full projection on random label logs.

    ``skip_pivot`` drops one pivot from every projection, a fault that the
    checks are expected to catch.
    """
    if not 2 <= n_max <= 6:
        raise ConfigError("n_max must lie in [2, 6]")
    rep = VerifyReport()
    sizes = list(range(min(3, n_max), n_max + 1))
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        n = sizes[t % len(sizes)]
        D, data = random_grid_log(rng, n, grid_step)
        problems = []

        def check(Lt, Ut, L, U):
            cert = certificate_check(Lt, Ut, L, U, 1.0)
            problems.extend(cert.failures)

        B = replay(data, n, 1.0, skip_pivot if skip_pivot is not None and skip_pivot < n else None, check)
        if not B.contains(D):
            problems.append("ground truth outside bounds")
        L_min, U_max = brute_force_bounds(data, n, 1.0, grid_step)
        tol = 1e-9
        for i, j in np.argwhere((L_min < B.lower - tol) | (U_max > B.upper + tol)):
            problems.append(f"grid oracle outside bounds at ({i},{j})")
        for i, j in np.argwhere((L_min - B.lower > grid_step + tol) | (B.upper - U_max > grid_step + tol)):
            problems.append(f"bounds looser than one grid step at ({i},{j})")
        rep.trials += 1
        if problems:
            rep.failures.append(f"trial {t} (seed {seed}, n={n}): " + "; ".join(dict.fromkeys(problems)))
        else:
            rep.passed += 1
    return rep
