"""eps-sweep orchestration, convergence reports and artifact files.

Jobs are independent (scenario, eps) pairs. With more than one worker they
run in a process pool; results are always reduced in the declared eps order,
so the reports do not depend on completion order.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .classical_limit import SCHEMA_VERSION, FitResult, fit_rate
from .config import ExperimentConfig, serialize_config
from .errors import BohmlabError
from .hydrodynamics import extract_fields, write_fields_csv
from .schrodinger import write_snapshot
from . import scenarios

__all__ = ["ConvergenceReport", "RunResult", "run_experiment", "evaluate", "load_run", "render_tables",
           "WORKERS_ENV", "worker_count"]

WORKERS_ENV = "BOHMLAB_WORKERS"
LIMIT_TEMPERATURE = 0.02  # dictionary comparison applies only when the temperature limit is below this


@dataclass
class ConvergenceReport:
    """One quantity along the eps sequence.

    ``pairs`` are sorted by eps descending. ``flag`` is True when the fit was
    rejected (misfit above threshold or non-positive exponent); ``passed`` is
    the outcome of the scenario checks, or None for unchecked quantities.
    """

    quantity: str
    kind: str
    pairs: list
    limit: float
    rate: float
    residual: float
    flag: bool
    passed: bool | None = None
    checks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list
    values: list
    output: Path | None
    timestamp: dict

    @property
    def failed(self) -> list:
        return [r for r in self.reports if r.passed is False]

    def report(self, quantity: str) -> ConvergenceReport:
        for r in self.reports:
            if r.quantity == quantity:
                return r
        raise KeyError(quantity)


def _clean(o):
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else None
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _job(cfg: ExperimentConfig, index: int, eps: float, outdir: str | None):
    t0 = time.perf_counter()
    try:
        values, final = scenarios.measure(cfg, eps)
    except BohmlabError as exc:
        raise type(exc)(f"{cfg.scenario} eps={eps:g}: {exc}") from exc
    if outdir is not None:
        d = Path(outdir)
        write_snapshot(d / f"state_{index:02d}.bhsn", final, cfg.T)
        if final.grid.d == 1:
            write_fields_csv(d / f"fields_{index:02d}.csv", extract_fields(final))
    return {k: float(v) for k, v in values.items()}, time.perf_counter() - t0


# ---------------------------------------------------------------- reduction

def _fit(pairs, mode="affine"):
    if len(pairs) < 3:
        return None
    return fit_rate(pairs, mode=mode)


def _apply(check, pairs, fit, limit):
    kind = check[0]
    vals = np.array([v for _, v in pairs])
    if kind == "bound":
        return bool(np.max(np.abs(vals)) <= check[1])
    if kind == "final_le":
        return bool(vals[-1] <= check[1])
    if kind == "final_ge":
        return bool(vals[-1] >= check[1])
    if kind == "nonincreasing":
        return bool(np.all(vals[1:] <= vals[:-1] * (1 + check[1]) + 1e-12))
    if fit is None:
        return None
    if not fit.converged:
        return False
    if kind == "limit":
        return bool(abs(limit - check[1]) <= check[2])
    if kind in ("limit_abs_le", "dictionary_le"):
        return bool(abs(limit) <= check[1])
    if kind == "limit_ge":
        return bool(limit >= check[1])
    if kind == "rate_in":
        return bool(check[1] <= fit.exponent <= check[2])
    if kind == "rate_ge":
        return bool(fit.exponent >= check[1])
    if kind == "growth_le":
        return bool(-fit.exponent <= check[1])
    raise ValueError(f"unknown check {kind!r}")


def _fit_mode(checks):
    kinds = {c[0] for c in checks}
    if "growth_le" in kinds:
        return "growth"
    if kinds & {"rate_in", "rate_ge"}:
        return "power"
    return "affine"


def _kind_of(checks):
    kinds = {c[0] for c in checks}
    if kinds <= {"bound", "final_le", "final_ge", "nonincreasing"} and kinds:
        return "bound"
    return "rate" if _fit_mode(checks) == "power" else "limit"


def _with_tolerance(checks, override):
    """Replace the threshold of the last check (the one a tolerance key refers to)."""
    if override is None or not checks:
        return checks
    last = list(checks[-1])
    last[-1] = float(override)
    return list(checks[:-1]) + [tuple(last)]


def _reduce_quantity(name, pairs, checks, meta, limit_override=None, fit_override=None):
    kind = _kind_of(checks) if checks else "limit"
    if kind == "bound":
        fit = None
        limit = max(v for _, v in pairs) if checks and checks[0][0] == "bound" else pairs[-1][1]
    else:
        fit = fit_override if fit_override is not None else _fit(pairs, _fit_mode(checks))
        limit = limit_override if limit_override is not None else (fit.limit if fit is not None else pairs[-1][1])
    results = [_apply(c, pairs, fit, limit) for c in checks]
    if not checks or any(r is None for r in results):
        passed = None
    else:
        passed = all(results)
    m = dict(meta)
    if fit is not None:
        m["fit_reason"] = fit.reason
        m["amplitude"] = fit.amplitude
    elif kind != "bound":
        m["fit_reason"] = "fewer than three eps values; last value reported"
    return ConvergenceReport(
        quantity=name,
        kind=kind,
        pairs=[[float(e), float(v)] for e, v in pairs],
        limit=float(limit),
        rate=float(fit.exponent) if fit is not None else float("nan"),
        residual=float(fit.residual) if fit is not None else float("nan"),
        flag=bool(fit is not None and not fit.converged),
        passed=passed,
        checks=[list(c) for c in checks],
        metadata=m,
    )


def evaluate(cfg: ExperimentConfig, eps, rows) -> list:
    """Fit and check every quantity; ``rows[i]`` holds the values at ``eps[i]``."""
    spec = scenarios.CATALOG[cfg.scenario].checks
    meta = {"scenario": cfg.scenario, "n": cfg.n, "dt": cfg.dt, "T": cfg.T, "store_every": cfg.store_every}
    keys = [k for k in rows[0] if not k.startswith("dict_")]
    series = {k: [(float(e), r[k]) for e, r in zip(eps, rows)] for k in keys}
    reports = {}
    for k in keys:
        checks = _with_tolerance(spec.get(k, []), cfg.tolerances.get(k))
        reports[k] = _reduce_quantity(k, series[k], checks, meta)

    # C = lim K - lim beta_m2 per bump, and the identity residual |rhoT - A - B - C|
    j = 0
    while f"K_{j}" in series and f"beta_m2_{j}" in series:
        name = f"C_{j}"
        pairs = [(e, a - b) for (e, a), (_, b) in zip(series[f"K_{j}"], series[f"beta_m2_{j}"])]
        lim, fit = None, None
        flag = reports[f"K_{j}"].flag or reports[f"beta_m2_{j}"].flag
        if len(pairs) >= 3:
            lim = reports[f"K_{j}"].limit - reports[f"beta_m2_{j}"].limit
            # the limit comes from the two parent fits, so their verdict is the fit verdict
            fit = FitResult(lim, float("nan"), float("nan"), not flag, float("nan"),
                            "derived" if not flag else "parent fit rejected")
        checks = _with_tolerance(spec.get(name, []), cfg.tolerances.get(name))
        rep = _reduce_quantity(name, pairs, checks, meta, limit_override=lim, fit_override=fit)
        rep.metadata["derived"] = f"lim K_{j} - lim beta_m2_{j}"
        reports[name] = rep
        if all(f"{q}_{j}" in reports for q in ("rhoT", "A", "B")):
            res_pairs = [(e, abs(t - a - b - c)) for (e, t), (_, a), (_, b), (_, c) in
                         zip(series[f"rhoT_{j}"], series[f"A_{j}"], series[f"B_{j}"], pairs)]
            lim_r = abs(reports[f"rhoT_{j}"].limit - reports[f"A_{j}"].limit - reports[f"B_{j}"].limit - rep.limit)
            r = _reduce_quantity(f"teq_residual_{j}", res_pairs, [], meta, limit_override=lim_r)
            r.metadata["derived"] = f"|rhoT_{j} - A_{j} - B_{j} - C_{j}| of the limits"
            reports[r.quantity] = r
        j += 1

    if "dictionary_distance" in spec and any(k.startswith("dict_beta_") for k in rows[0]):
        reports["dictionary_distance"] = _dictionary_report(cfg, eps, rows, reports, spec, meta)
    order = list(spec) + [k for k in reports if k not in spec]
    return [reports[k] for k in order if k in reports]


def _tail_spread(points, k=3):
    tail = [v for _, v in sorted(points, key=lambda t: -t[0])[-k:]]
    return max(tail) - min(tail)


def _dictionary_report(cfg, eps, rows, reports, spec, meta):
    nd = sum(1 for k in rows[0] if k.startswith("dict_beta_"))
    dist = [(float(e), max(abs(r[f"dict_beta_{j}"] - r[f"dict_wigner_{j}"]) for j in range(nd)))
            for e, r in zip(eps, rows)]
    checks = _with_tolerance(spec["dictionary_distance"], cfg.tolerances.get("dictionary_distance"))
    lim, flag, unfit = None, False, []
    if len(eps) >= 3:
        gaps = []
        for j in range(nd):
            vb = [(e, r[f"dict_beta_{j}"]) for e, r in zip(eps, rows)]
            vw = [(e, r[f"dict_wigner_{j}"]) for e, r in zip(eps, rows)]
            fb, fw = fit_rate(vb), fit_rate(vw)
            if fb.converged and fw.converged:
                gaps.append(abs(fb.limit - fw.limit))
                continue
            # no trusted extrapolation: last gap widened by both tail spreads
            unfit.append(j)
            gaps.append(abs(vb[-1][1] - vw[-1][1]) + _tail_spread(vb) + _tail_spread(vw))
        flag = bool(unfit)
        lim = max(gaps)
    rep = _reduce_quantity("dictionary_distance", dist, [], meta, limit_override=lim)
    rep.kind = "limit"
    rep.flag = flag
    rep.checks = [list(c) for c in checks]
    t_key = "rhoT_final" if "rhoT_final" in rows[0] else "rhoT_0"
    t_limit = reports[t_key].limit if t_key in reports else float("nan")
    rep.metadata.update({"temperature_quantity": t_key, "temperature_limit": t_limit,
                         "dictionary_size": nd, "derived": "max_j |lim beta_j - lim w_j|",
                         "unfit_entries": unfit})
    if lim is None:
        rep.passed = None
    elif not abs(t_limit) <= LIMIT_TEMPERATURE:
        rep.passed = None
        rep.metadata["note"] = "temperature limit above threshold; comparison not required"
    else:
        rep.passed = lim <= checks[0][1]
    return rep


# ---------------------------------------------------------------- orchestration

def run_experiment(cfg: ExperimentConfig, workers: int | None = None, output: str | Path | None = "config") -> RunResult:
    """Run every eps of ``cfg``; write artifacts unless ``output`` is None.

    ``output="config"`` uses ``cfg.output``. ``workers`` defaults to the
    ``BOHMLAB_WORKERS`` environment variable (1 if unset).
    """
    scenarios.validate_config(cfg)
    workers = worker_count() if workers is None else max(1, int(workers))
    outdir = None
    if output is not None:
        outdir = Path(cfg.output if output == "config" else output)
        outdir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    eps = [float(e) for e in cfg.eps]
    args = [(cfg, i, e, None if outdir is None else str(outdir)) for i, e in enumerate(eps)]
    if workers == 1 or len(eps) == 1:
        results = [_job(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(eps))) as pool:
            futures = [pool.submit(_job, *a) for a in args]
            results = [f.result() for f in futures]
    rows = [r[0] for r in results]
    reports = evaluate(cfg, eps, rows)
    stamp = {"started": started, "finished": datetime.now(timezone.utc).isoformat(),
             "job_seconds": [r[1] for r in results], "workers": workers}
    res = RunResult(cfg, reports, rows, outdir, stamp)
    if outdir is not None:
        _write_artifacts(res, eps)
    return res


def _write_artifacts(res: RunResult, eps) -> None:
    d = res.output
    cfg = res.config
    doc = {
        "schema_version": SCHEMA_VERSION,
        "timestamp": res.timestamp,
        "scenario": cfg.scenario,
        "config": serialize_config(cfg),
        "eps": eps,
        "values": [dict(sorted(r.items())) for r in res.values],
        "reports": [r.to_dict() for r in res.reports],
    }
    (d / "report.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    (d / "config.ini").write_text(serialize_config(cfg))
    with open(d / "values.csv", "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        wr = csv.writer(fh)
        wr.writerow(["eps", "quantity", "value"])
        for e, row in zip(eps, res.values):
            for k in sorted(row):
                wr.writerow([repr(e), k, repr(row[k])])
    with open(d / "reports.csv", "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        wr = csv.writer(fh)
        wr.writerow(["quantity", "kind", "limit", "rate", "residual", "flag", "passed"])
        for r in res.reports:
            wr.writerow([r.quantity, r.kind, repr(r.limit), repr(r.rate), repr(r.residual), int(r.flag),
                         "" if r.passed is None else int(r.passed)])


def load_run(path) -> dict:
    """Read ``report.json`` from a run directory (or the file itself)."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    doc = json.loads(p.read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
    return doc


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_tables(doc: dict) -> str:
    """Plain-text tables: one summary row per report, then the per-eps values."""
    lines = [f"scenario {doc['scenario']}  (schema {doc['schema_version']})", ""]
    head = ["quantity", "kind", "limit", "rate", "residual", "flag", "passed"]
    rows = [[r["quantity"], r["kind"], _fmt(r["limit"]), _fmt(r["rate"]), _fmt(r["residual"]),
             _fmt(r["flag"]), _fmt(r["passed"])] for r in doc["reports"]]
    lines += _table(head, rows)
    lines.append("")
    head = ["quantity"] + [f"eps={e:.4g}" for e in doc["eps"]]
    rows = []
    for r in doc["reports"]:
        by = {e: v for e, v in r["pairs"]}
        rows.append([r["quantity"]] + [_fmt(by.get(e)) for e in doc["eps"]])
    lines += _table(head, rows)
    return "\n".join(lines) + "\n"


def _table(head, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)] if rows else [len(h) for h in head]
    fmt = "  ".join("{:<%d}" % w for w in widths)
    out = [fmt.format(*head), fmt.format(*["-" * w for w in widths])]
    out += [fmt.format(*r) for r in rows]
    return out
