"""End-to-end simulation orchestration.

For every dataset: build a generating model, simulate replicate outcomes,
run every requested method on every replicate (full-data fit for estimation
metrics plus held-out predictions across evaluation folds for the Brier
score), and persist per-replicate metric records.

The archive separates deterministic content (results.jsonl, manifest.json)
from timing measurements (timings.jsonl) so reruns with the same master
seed are byte-identical where it matters.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bma
from .classic import StepwiseConfig, pvalue_select, stepwise_select
from .dgp import fit_generating_model, simulate_outcomes
from .errors import ConfigError, EmptyModelSelected, LogitbenchError
from .glm_core import fit_firth, fit_mle, predict_probs, wald_interval
from .ingest import load_dataset, make_folds, process_predictors
from .metrics import MethodOutput, compute_metrics
from .penalized import PenaltySpec, cv_select_lambda, selected_coefficients
from .scoring import build_scoreboard, render_heatmap_svg, stratify_by_separation
from .separation import SeparationIndeterminate, detect_separation

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0
DEFAULT_REPLICATIONS = 100
DEFAULT_EVAL_FOLDS = 5
DEFAULT_REFERENCE = "bma_bic"

# Whether hard-selection methods (stepwise, p-value) report degenerate [0, 0]
# intervals for excluded coefficients instead of omitting intervals.
DEGENERATE_EXCLUDED_INTERVALS = True


def _bma_fixed(g):
    return {"kind": "bma", "prior": lambda n, p: bma.GPriorSpec("fixed_g", g=g(n, p))}


def _bma_mixture(density):
    return {"kind": "bma", "prior": lambda n, p: bma.GPriorSpec("mixture_g", density=density)}


def _bma_plain(kind):
    return {"kind": "bma", "prior": lambda n, p: bma.GPriorSpec(kind)}


METHOD_CATALOG: dict[str, dict] = {
    "full": {"kind": "pvalue", "threshold": 1.0},
    "pvalue_05": {"kind": "pvalue", "threshold": 0.05},
    "pvalue_005": {"kind": "pvalue", "threshold": 0.005},
    "stepwise_forward": {"kind": "stepwise", "direction": "forward"},
    "stepwise_backward": {"kind": "stepwise", "direction": "backward"},
    "stepwise_both": {"kind": "stepwise", "direction": "both"},
    "ridge": {"kind": "penalized", "family": "ridge"},
    "elastic_net": {"kind": "penalized", "family": "elastic_net"},
    "lasso": {"kind": "penalized", "family": "lasso"},
    "mcp": {"kind": "penalized", "family": "mcp"},
    "scad": {"kind": "penalized", "family": "scad"},
    "firth": {"kind": "firth"},
    "bma_g4": _bma_fixed(lambda n, p: 4.0),
    "bma_g_sqrt_n": _bma_fixed(lambda n, p: math.sqrt(n)),
    "bma_benchmark": _bma_fixed(lambda n, p: float(max(n, p * p))),
    "bma_hyper_g": _bma_mixture("hyper_g"),
    "bma_hyper_g_over_n": _bma_mixture("hyper_g_over_n"),
    "bma_beta_prime": _bma_mixture("beta_prime"),
    "bma_cch": _bma_mixture("cch"),
    "bma_robust": _bma_mixture("robust"),
    "bma_intrinsic": _bma_mixture("intrinsic"),
    "bma_eb_local": _bma_plain("eb_local"),
    "bma_eb_global": _bma_plain("eb_global"),
    "bma_aic": _bma_plain("aic"),
    "bma_bic": _bma_plain("bic"),
}


@dataclass
class SimulationConfig:
    datasets: list[tuple[str, str]]  # (csv path, outcome column)
    methods: list[str] = field(default_factory=lambda: list(METHOD_CATALOG))
    replications: int = DEFAULT_REPLICATIONS
    eval_folds: int = DEFAULT_EVAL_FOLDS
    master_seed: int = 0
    timeout_seconds: float = DEFAULT_TIMEOUT
    enumeration_threshold: int = bma.ENUMERATION_THRESHOLD
    reference_method: str = DEFAULT_REFERENCE

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.eval_folds < 2:
            raise ConfigError("eval_folds must be >= 2")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in METHOD_CATALOG]
        if unknown:
            raise ConfigError(f"unknown methods: {unknown}")
        if not self.datasets:
            raise ConfigError("datasets must be non-empty")

    def to_dict(self) -> dict:
        return {
            "datasets": [list(d) for d in self.datasets],
            "methods": list(self.methods),
            "replications": self.replications,
            "eval_folds": self.eval_folds,
            "master_seed": self.master_seed,
            "timeout_seconds": self.timeout_seconds,
            "enumeration_threshold": self.enumeration_threshold,
            "reference_method": self.reference_method,
        }

    @classmethod
    def from_toml(cls, path: str) -> "SimulationConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            datasets = [(d["path"], d["outcome"]) for d in raw.pop("datasets")]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"config needs [[datasets]] with path/outcome: {exc}") from exc
        allowed = {
            "methods", "replications", "eval_folds", "master_seed",
            "timeout_seconds", "enumeration_threshold", "reference_method",
        }
        extra = set(raw) - allowed
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(datasets=datasets, **raw)


def derive_seed(master_seed: int, *parts) -> int:
    """Stable per-work-unit seed from the master seed and unit coordinates."""
    text = "|".join([str(master_seed), *map(str, parts)])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def _wald_full(fit, selected, p):
    """Map a refit's Wald intervals back to all p slopes; excluded get [0, 0]."""
    lo = np.zeros(p + 1)
    hi = np.zeros(p + 1)
    flo, fhi = wald_interval(fit)
    lo[0], hi[0] = flo[0], fhi[0]
    for pos, j in enumerate(selected):
        lo[j + 1], hi[j + 1] = flo[pos + 1], fhi[pos + 1]
    return lo, hi


def _fit_method(name: str, X, y, seed: int, enumeration_threshold: int):
    """Fit one method on (X, y); return (beta_hat, ci_lo, ci_hi, inclusion, predict)."""
    spec = METHOD_CATALOG[name]
    kind = spec["kind"]
    p = X.shape[1]

    if kind == "pvalue":
        res = pvalue_select(X, y, spec["threshold"])
        beta = res.full_beta(p)
        full = res.fit if spec["threshold"] >= 1.0 else fit_mle(X, y)
        inclusion = 1.0 - full.pvalues[1:]
        if DEGENERATE_EXCLUDED_INTERVALS or spec["threshold"] >= 1.0:
            lo, hi = _wald_full(res.fit, res.selected, p)
        else:
            lo = hi = None
        return beta, lo, hi, inclusion, lambda Xn: predict_probs(beta, Xn)

    if kind == "stepwise":
        res = stepwise_select(X, y, StepwiseConfig(direction=spec["direction"]))
        beta = res.full_beta(p)
        inclusion = np.zeros(p)
        inclusion[list(res.selected)] = 1.0
        if DEGENERATE_EXCLUDED_INTERVALS:
            lo, hi = _wald_full(res.fit, res.selected, p)
        else:
            lo = hi = None
        return beta, lo, hi, inclusion, lambda Xn: predict_probs(beta, Xn)

    if kind == "penalized":
        path = cv_select_lambda(X, y, PenaltySpec(spec["family"]), k=10, seed=seed)
        beta = selected_coefficients(path)
        return beta, None, None, np.abs(beta[1:]), lambda Xn: predict_probs(beta, Xn)

    if kind == "firth":
        fit = fit_firth(X, y)
        lo, hi = wald_interval(fit)
        return fit.beta, lo, hi, 1.0 - fit.pvalues[1:], lambda Xn: predict_probs(fit.beta, Xn)

    # BMA
    prior = spec["prior"](len(y), p)
    if p <= enumeration_threshold:
        post = bma.enumerate_posterior(X, y, prior, threshold=enumeration_threshold)
    else:
        post = bma.mc3_posterior(X, y, prior, seed=seed)
    summary = bma.summarize_bma(post, seed=seed)
    return (
        summary.avg_beta,
        summary.ci_lower,
        summary.ci_upper,
        summary.inclusion_probs,
        lambda Xn: bma.predictive_probs(post, Xn),
    )


def run_method(name: str, X, y, folds, seed: int,
               timeout: float = DEFAULT_TIMEOUT,
               enumeration_threshold: int = bma.ENUMERATION_THRESHOLD) -> MethodOutput:
    """Full-data fit plus per-fold held-out predictions, with failure capture.

    A replicate-method unit fails as a whole if any constituent fit (the
    full-data fit or any fold's training fit) raises, or if total time
    exceeds the soft timeout.
    """
    folds = np.asarray(folds)
    start = time.perf_counter()
    try:
        beta, lo, hi, inclusion, _predict = _fit_method(
            name, X, y, seed, enumeration_threshold
        )
        probs = []
        outcomes = []
        for fold in np.unique(folds):
            train = folds != fold
            _, _, _, _, predict = _fit_method(
                name, X[train], y[train], derive_seed(seed, "fold", int(fold)),
                enumeration_threshold,
            )
            probs.append(predict(X[~train]))
            outcomes.append(y[~train])
        elapsed = time.perf_counter() - start
        if elapsed > timeout:
            return MethodOutput(
                cpu_seconds=elapsed, failed=True,
                error=f"timeout: {elapsed:.1f}s > {timeout:.1f}s",
            )
        return MethodOutput(
            beta_hat=beta,
            ci_lower=lo,
            ci_upper=hi,
            inclusion_score=np.asarray(inclusion, dtype=float),
            test_probs=np.concatenate(probs),
            test_outcomes=np.concatenate(outcomes),
            cpu_seconds=elapsed,
        )
    except Exception as exc:  # noqa: BLE001 -- failure isolation is the contract
        if not isinstance(exc, LogitbenchError):
            log.warning("method %s raised %r", name, exc)
        return MethodOutput(
            cpu_seconds=time.perf_counter() - start,
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
        )


def _separation_verdict(X, y, folds) -> bool:
    """True iff any evaluation fold's training subset is separated."""
    for fold in np.unique(np.asarray(folds)):
        train = folds != fold
        try:
            if detect_separation(X[train], y[train]).separated:
                return True
        except SeparationIndeterminate:
            return True
    return False


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_simulation(config: SimulationConfig, out_dir: str) -> Path:
    """Execute the full grid and write results/timings/manifest to out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: list[dict] = []
    timings: list[dict] = []
    dataset_info = {}

    for path, outcome in config.datasets:
        dataset_id = Path(path).stem
        raw = load_dataset(path, outcome)
        data = process_predictors(raw)
        X = data.X
        try:
            gm = fit_generating_model(X, data.y)
        except EmptyModelSelected as exc:
            log.warning("skipping dataset %s: %s", dataset_id, exc)
            dataset_info[dataset_id] = {"skipped": str(exc)}
            continue
        dataset_info[dataset_id] = {
            "n": int(X.shape[0]),
            "p": int(X.shape[1]),
            "dgm_selected": list(gm.selected),
            "dgm_pseudo_r2": gm.pseudo_r2,
            "dgm_separation_handled": gm.separation_handled,
        }
        Y = simulate_outcomes(
            gm, config.replications, derive_seed(config.master_seed, dataset_id, "sim")
        )
        for rep in range(config.replications):
            y_rep = Y[rep]
            if len(np.unique(y_rep)) < 2:
                log.warning("replicate %s/%d degenerate outcome; skipped", dataset_id, rep)
                continue
            folds = make_folds(
                y_rep, config.eval_folds,
                derive_seed(config.master_seed, dataset_id, rep, "folds"),
            )
            separated = _separation_verdict(X, y_rep, folds)
            for method in config.methods:
                seed = derive_seed(config.master_seed, dataset_id, rep, method)
                output = run_method(
                    method, X, y_rep, folds, seed,
                    timeout=config.timeout_seconds,
                    enumeration_threshold=config.enumeration_threshold,
                )
                record = compute_metrics(output, gm.beta_dgm, gm.selected)
                results.append(
                    {
                        "dataset": dataset_id,
                        "replication": rep,
                        "method": method,
                        "rmse": record.rmse,
                        "mis": record.mis,
                        "auprc": record.auprc,
                        "brier": record.brier,
                        "failed": record.failed,
                        "error": record.error,
                        "separated": separated,
                        "seed": seed,
                    }
                )
                timings.append(
                    {
                        "dataset": dataset_id,
                        "replication": rep,
                        "method": method,
                        "cpu_seconds": output.cpu_seconds,
                    }
                )

    key = lambda r: (r["dataset"], r["replication"], r["method"])
    results.sort(key=key)
    timings.sort(key=key)
    (out / "results.jsonl").write_text(
        "".join(_canonical_json(r) + "\n" for r in results)
    )
    (out / "timings.jsonl").write_text(
        "".join(_canonical_json(t) + "\n" for t in timings)
    )
    cfg = config.to_dict()
    manifest = {
        "config": cfg,
        "config_sha256": hashlib.sha256(_canonical_json(cfg).encode()).hexdigest(),
        "datasets": dataset_info,
        "n_records": len(results),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return out


def load_archive(archive_dir: str) -> tuple[list[dict], dict]:
    """Read results + timings back into scoring-ready records, plus the manifest."""
    out = Path(archive_dir)
    results = [json.loads(line) for line in (out / "results.jsonl").read_text().splitlines()]
    manifest = json.loads((out / "manifest.json").read_text())
    timing_path = out / "timings.jsonl"
    times = {}
    if timing_path.exists():
        for line in timing_path.read_text().splitlines():
            t = json.loads(line)
            times[(t["dataset"], t["replication"], t["method"])] = t["cpu_seconds"]
    for r in results:
        r["cpu_minutes"] = times.get((r["dataset"], r["replication"], r["method"]), 0.0) / 60.0
    return results, manifest


def render_report(archive_dir: str, out_dir: str, stratify: bool = False,
                  reference: str | None = None, heatmap: bool = False) -> list[Path]:
    """Aggregate an archive into per-stratum scoreboards on disk."""
    records, manifest = load_archive(archive_dir)
    if not records:
        raise ConfigError("archive is empty")
    reference = reference or manifest["config"].get("reference_method", DEFAULT_REFERENCE)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    boards = (
        stratify_by_separation(records, reference)
        if stratify
        else {"all": build_scoreboard(records, reference)}
    )
    written = []
    for name, board in boards.items():
        csv_path = out / f"scores_{name}.csv"
        csv_path.write_text(board.to_csv())
        md_path = out / f"scores_{name}.md"
        md_path.write_text(board.to_markdown())
        written += [csv_path, md_path]
        if heatmap:
            svg_path = out / f"scores_{name}.svg"
            if render_heatmap_svg(board, str(svg_path)):
                written.append(svg_path)
    return written
