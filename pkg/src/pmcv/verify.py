"""Batch verification runs: checks over chart grids and the report they produce."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import special_ortho_group

from . import __version__
from .biharmonic import INCONCLUSIVE, NEITHER, PROPER, biharmonic_residuals, classify_point
from .biharmonic import NOISE_FLOOR as BIH_NOISE_FLOOR
from .bounds import classification_report
from .catalog import CatalogEntry, CatalogError, from_id
from .config import CHECKS, VerificationConfig
from .exprdsl import DSLError
from .extrinsic import (
    ASYMMETRY_FAIL,
    FrameCompletionError,
    NotAnImmersionError,
    extrinsic_data,
    intrinsic_curvature,
    normal_connection,
)
from .identities import HypothesisError, codazzi_residual, deltaT_residual, simons_residual
from .immersion import ImmersionSpec, OutOfDomainError
from .sampling import grid_points, halton_points

__all__ = [
    "SourceError",
    "CheckResult",
    "Report",
    "resolve_source",
    "resolve_step",
    "run_verification",
    "to_json",
    "render_table",
]

CHUNK = 128
PASS, FAIL, BLOCKED, NA = "PASS", "FAIL", "BLOCKED", "N/A"
STATUS_INCONCLUSIVE = "INCONCLUSIVE"


class SourceError(ValueError):
    """The catalog id or DSL file cannot be turned into an immersion."""


@dataclass
class CheckResult:
    name: str
    status: str
    worst: float | None = None
    location: dict | None = None
    order: float | None = None
    tolerance: float | None = None
    blocked_by: str | None = None
    message: str | None = None
    details: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"BLOCKED(by={self.blocked_by})" if self.status == BLOCKED else self.status

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.label,
            "worst": self.worst,
            "location": self.location,
            "order": self.order,
            "tolerance": self.tolerance,
            "message": self.message,
            "details": self.details,
        }


@dataclass
class Report:
    config: dict
    version: str
    checks: list
    points: list | None = None
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return any(c.status == FAIL for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        d = {"config": self.config, "version": self.version, "checks": [c.as_dict() for c in self.checks]}
        if self.points is not None:
            d["points"] = self.points
        d["wall_time"] = self.wall_time
        return d


# ---------------------------------------------------------------------------
# Sources and steps
# ---------------------------------------------------------------------------


def resolve_source(cfg: VerificationConfig) -> tuple[ImmersionSpec, CatalogEntry | None]:
    if cfg.catalog is not None:
        try:
            entry = from_id(cfg.catalog)
        except CatalogError as exc:
            raise SourceError(str(exc)) from None
        return entry.spec, entry
    try:
        text = Path(cfg.dsl).read_text(encoding="utf-8")
    except OSError as exc:
        raise SourceError(f"cannot read DSL file {cfg.dsl}: {exc}") from None
    try:
        imm = ImmersionSpec.from_dsl(text, cfg.c, cfg.params, name=Path(cfg.dsl).stem)
    except (DSLError, ValueError) as exc:
        raise SourceError(f"{cfg.dsl}: {exc}") from None
    return imm, None


def resolve_step(cfg: VerificationConfig, imm: ImmersionSpec) -> float:
    """``"auto"`` is ``1e-3`` times the shortest chart extent."""
    if cfg.fd_step == "auto":
        return 1e-3 * float(np.min(imm.upper - imm.lower))
    return float(cfg.fd_step)


def default_grid(m: int) -> tuple[int, ...]:
    return (max(3, int(round(1024 ** (1.0 / m)))),) * m


# ---------------------------------------------------------------------------
# Point tasks (run in workers; pure functions of their arguments)
# ---------------------------------------------------------------------------


def _scalars(ext):
    K = intrinsic_curvature(None, ext.u, ext).K if ext.m == 2 else np.full(ext.H_norm.shape, np.nan)
    return {
        "H_norm": ext.H_norm,
        "T_norm": ext.T_norm,
        "sigma_norm_sq": ext.sigma_norm_sq,
        "A_H_norm_sq": ext.A_H_norm_sq,
        "pseudo_umbilical_defect": ext.pseudo_umbilical_defect(),
        "K": K,
    }


def _task_extrinsic(imm, pts, h, seed, chunk_id):
    ext = extrinsic_data(imm, pts)
    out = _scalars(ext)
    health = ext.health()
    out["health_frame"] = np.full(len(pts), max(v for k, v in health.items() if k != "asymmetry"))
    out["asymmetry"] = ext.asymmetry
    # same scalars in a randomly rotated tangent and normal frame
    rng = np.random.Generator(np.random.Philox(key=seed).jumped(chunk_id))
    tm = special_ortho_group.rvs(imm.m, random_state=rng) if imm.m > 1 else np.eye(1)
    nm = special_ortho_group.rvs(ext.q, random_state=rng) if ext.q > 1 else -np.eye(1)
    rot = _scalars(extrinsic_data(imm, pts, tangent_mixing=tm, normal_mixing=nm))
    gauge = np.zeros(len(pts))
    for key, val in out.items():
        if key in rot:
            a, b = np.nan_to_num(val), np.nan_to_num(rot[key])
            gauge = np.maximum(gauge, np.abs(a - b) / np.maximum(1.0, np.abs(a)))
    out["gauge"] = gauge
    return out


def _task_pmc(imm, pts, h, seed, chunk_id):
    nH = normal_connection(imm, pts, "H", h, True)
    return {"pmc_defect": np.sqrt(np.sum(nH**2, axis=(-2, -1)))}


def _task_biharmonic(imm, pts, h, seed, chunk_id):
    res = biharmonic_residuals(imm, pts, h)
    auto = classify_point(res)
    fd_route = classify_point(res, route="tau2")
    return {
        "tau_norm": res.tau_norm,
        "bitension": res.bitension_norm,
        "bitension_fine": res.bitension_fine_norm,
        "cond1": np.abs(res.pmc_cond[..., 0]),
        "cond2": np.abs(res.pmc_cond[..., 1]),
        "cond3": np.abs(res.pmc_cond[..., 2]),
        "pmc": res.pmc,
        "fd_unstable": res.fd_unstable,
        "verdict": auto.verdict,
        "route": auto.route,
        "residual": auto.residual,
        "verdict_tau2": fd_route.verdict,
    }


def _identity_task(fn):
    def task(imm, pts, h, seed, chunk_id, **kw):
        r = fn(imm, pts, h=h, **kw)
        return {
            "residual": r.residual,
            "residual_fine": r.residual_fine,
            "floor": np.full(len(pts), r.noise_floor),
        }

    return task


_TASKS = {
    "extrinsic": _task_extrinsic,
    "pmc": _task_pmc,
    "biharmonic": _task_biharmonic,
    "simons": _identity_task(simons_residual),
    "codazzi": _identity_task(codazzi_residual),
    "deltaT": _identity_task(deltaT_residual),
}

_CAUGHT = (NotAnImmersionError, FrameCompletionError, HypothesisError, OutOfDomainError, DSLError, ValueError)


def _run_chunk(args):
    name, imm, pts, h, seed, chunk_id, kw = args
    try:
        return _TASKS[name](imm, pts, h, seed, chunk_id, **kw)
    except _CAUGHT as exc:
        return {"__error__": f"{type(exc).__name__}: {exc}"}


def _map_points(name, imm, pts, h, seed, pool, **kw):
    """Evaluate a task over fixed-size chunks and concatenate in point order."""
    jobs = [(name, imm, pts[s : s + CHUNK], h, seed, k, kw) for k, s in enumerate(range(0, len(pts), CHUNK))]
    results = list(pool.map(_run_chunk, jobs)) if pool is not None else [_run_chunk(j) for j in jobs]
    for r in results:
        if "__error__" in r:
            raise _ChunkError(r["__error__"])
    return {k: np.concatenate([r[k] for r in results]) for k in results[0]}


class _ChunkError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Check evaluation
# ---------------------------------------------------------------------------


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _loc(pts, values):
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(np.isfinite(values)):
        return None
    k = int(np.nanargmax(values))
    return {"index": k, "u": [float(v) for v in pts[k]]}


def _order(worst, worst_fine):
    if not (worst > 0 and worst_fine > 0):
        return None
    return math.log2(worst / worst_fine)


def _check_extrinsic(cfg, imm, entry, pts, data):
    tol = cfg.tol("extrinsic")
    dev = {
        "frame": float(np.max(data["health_frame"])),
        "gauge": float(np.max(data["gauge"])),
        "asymmetry": float(np.max(data["asymmetry"])),
    }
    limits = {"frame": tol, "gauge": cfg.tol("gauge"), "asymmetry": ASYMMETRY_FAIL}
    per_point = np.maximum(data["gauge"], data["health_frame"])
    if entry is not None:
        exp = entry.expected
        for key in ("H_norm", "T_norm", "sigma_norm_sq", "K"):
            if key in exp and exp[key] is not None:
                d = np.abs(data[key] - float(exp[key]))
                dev[f"expected_{key}"] = float(np.max(d))
                limits[f"expected_{key}"] = cfg.tol("curvature") if key == "K" else tol
                per_point = np.maximum(per_point, d)
        if "pseudo_umbilical" in exp:
            pu = bool(np.all(data["pseudo_umbilical_defect"] <= tol))
            dev["expected_pseudo_umbilical"] = 0.0 if pu == bool(exp["pseudo_umbilical"]) else 1.0
            limits["expected_pseudo_umbilical"] = 0.0
    failed = sorted(k for k in dev if dev[k] > limits[k])
    worst_key = max(dev, key=lambda k: dev[k] / limits[k] if limits[k] > 0 else (math.inf if dev[k] else 0))
    details = {
        "deviations": dev,
        "limits": limits,
        "H_norm": [float(np.min(data["H_norm"])), float(np.max(data["H_norm"]))],
        "T_norm": [float(np.min(data["T_norm"])), float(np.max(data["T_norm"]))],
        "sigma_norm_sq": [float(np.min(data["sigma_norm_sq"])), float(np.max(data["sigma_norm_sq"]))],
    }
    msg = f"exceeded: {', '.join(failed)}" if failed else None
    return CheckResult(
        "extrinsic", FAIL if failed else PASS, dev[worst_key], _loc(pts, per_point), None, limits[worst_key],
        message=msg, details=details,
    )


def _check_pmc(cfg, imm, entry, pts, data):
    tol = cfg.tol("pmc")
    d = data["pmc_defect"]
    worst = float(np.max(d))
    details = {}
    if entry is not None and "pmc" in entry.expected:
        details["expected_pmc"] = bool(entry.expected["pmc"])
    return CheckResult("pmc", PASS if worst <= tol else FAIL, worst, _loc(pts, d), None, tol, details=details)


def _check_biharmonic(cfg, imm, entry, pts, data):
    verdict = data["verdict"]
    counts = {str(k): int(v) for k, v in zip(*np.unique(verdict, return_counts=True))}
    route = data["route"]
    agree = bool(np.all(verdict == data["verdict_tau2"]))
    worst = float(np.max(data["residual"]))
    b2, b2f = float(np.max(data["bitension"])), float(np.max(data["bitension_fine"]))
    details = {
        "verdicts": counts,
        "routes": {str(k): int(v) for k, v in zip(*np.unique(route, return_counts=True))},
        "routes_agree": agree,
        "conditions_worst": {
            "H_dot_xi": float(np.max(data["cond1"])),
            "A_H_norm_sq_balance": float(np.max(data["cond2"])),
            "trace_A_H_A_U": float(np.max(data["cond3"])),
        },
        "tau_norm": [float(np.min(data["tau_norm"])), float(np.max(data["tau_norm"]))],
        "bitension_worst": b2,
        "bitension_fine_worst": b2f,
        "fd_unstable_points": int(np.sum(data["fd_unstable"])),
        # harmonic maps: both bitension evaluations are pure roundoff
        "at_noise_floor": b2 <= BIH_NOISE_FLOOR and b2f <= BIH_NOISE_FLOOR,
    }
    if entry is not None and "verdict" in entry.expected:
        labels = set(counts)
        details["expected_verdict"] = entry.expected["verdict"]
        details["matches_catalog"] = labels == {entry.expected["verdict"]}
    if NEITHER in counts:
        status = FAIL
    elif INCONCLUSIVE in counts:
        status = STATUS_INCONCLUSIVE
    else:
        status = PASS
    all_pmc = bool(np.all(route == "pmc"))
    tol = cfg.tol("algebraic") if all_pmc else cfg.tol("bitension")
    msg = None
    if status == FAIL:
        cw = details["conditions_worst"]
        if all_pmc:
            k = max(cw, key=cw.get)
            msg = f"pmc condition {k} = {cw[k]:.3e} exceeds {tol:g}"
        else:
            msg = f"|tau_2| = {b2:.3e} exceeds {cfg.tol('bitension'):g}"
    return CheckResult(
        "biharmonic", status, worst, _loc(pts, data["residual"]), _order(b2, b2f), tol, message=msg, details=details
    )


def _check_identity(name, cfg, pts, data):
    tol = cfg.tol(name)
    min_order = cfg.tol("order")
    r, rf = data["residual"], data["residual_fine"]
    worst, worst_fine = float(np.max(r)), float(np.max(rf))
    floor = float(np.max(data["floor"]))
    order = _order(worst, worst_fine)
    at_floor = worst <= floor and worst_fine <= floor
    converges = at_floor or (order is not None and order >= min_order)
    ok = worst <= tol and converges
    msg = None
    if not ok:
        msg = f"residual {worst:.3e} > {tol:g}" if worst > tol else f"observed order {order} < {min_order}"
    details = {"worst_fine": worst_fine, "noise_floor": floor, "at_noise_floor": at_floor, "points": len(pts)}
    return CheckResult(name, PASS if ok else FAIL, worst, _loc(pts, r), order, tol, message=msg, details=details)


def _check_flatness(cfg, imm, store, pts):
    tol = cfg.tol("flatness")
    if imm.m != 2:
        return CheckResult("flatness", NA, tolerance=tol, message="stated for surfaces only")
    ex, bh = store["extrinsic"], store["biharmonic"]
    if np.any(bh["verdict"] != PROPER):
        return CheckResult("flatness", NA, tolerance=tol, message="needs a proper-biharmonic surface")
    if np.any(ex["pseudo_umbilical_defect"] <= 1e-6):
        return CheckResult("flatness", NA, tolerance=tol, message="needs a non-pseudo-umbilical surface")
    r = np.abs(4.0 * ex["H_norm"] ** 2 - imm.c * ex["T_norm"] ** 2)
    worst = float(np.max(r))
    return CheckResult("flatness", PASS if worst <= tol else FAIL, worst, _loc(pts, r), None, tol)


def _check_classification(cfg, imm, entry, store, pts, h):
    tol = cfg.tol("classification")
    if np.any(store["biharmonic"]["verdict"] != PROPER):
        return CheckResult("classification", NA, tolerance=tol, message="needs a proper-biharmonic grid")
    rep = classification_report(imm, pts, tol=tol, h=h, certify=False, gap_conclusion=entry is not None)
    preds = {p.name: p for p in rep.predicates}
    bad = [p.name for p in rep.predicates if p.name in ("H_sq_le_c", "sigma_sq_ge_c_m_minus_1") and p.verdict == "false"]
    bad += [link["name"] for link in rep.equality_links if not link["consistent"]]
    if "gap_conclusion" in preds and preds["gap_conclusion"].verdict == "false":
        bad.append("gap_conclusion")
    worst = max(0.0, -min(preds[k].margin for k in ("H_sq_le_c", "sigma_sq_ge_c_m_minus_1")))
    return CheckResult(
        "classification", FAIL if bad else PASS, worst, None, None, tol,
        message=f"violated: {', '.join(bad)}" if bad else None, details=rep.as_dict(),
    )


def _closure(checks):
    need = set(checks)
    changed = True
    while changed:
        changed = False
        for k in list(need):
            for d in CHECKS[k]:
                if d not in need:
                    need.add(d)
                    changed = True
    return [k for k in CHECKS if k in need]


def run_verification(
    cfg: VerificationConfig, workers: int = 1, points: bool = False
) -> Report:
    """Run the configured checks in dependency order.

    Prerequisites of a requested check are run (and reported) as well.  A
    check whose prerequisite did not pass is reported ``BLOCKED``.
    """
    t0 = time.perf_counter()
    imm, entry = resolve_source(cfg)
    h = resolve_step(cfg, imm)
    counts = cfg.grid or default_grid(imm.m)
    try:
        grid = grid_points(imm, counts, h)
    except ValueError as exc:
        raise SourceError(str(exc)) from None
    ident_pts = halton_points(imm, cfg.identity_points)
    echo = cfg.echo()
    echo["resolved"] = {"fd_step": h, "grid": list(counts), "m": imm.m, "n": imm.n, "c": float(imm.c)}

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    store: dict[str, dict] = {}
    results: dict[str, CheckResult] = {}
    try:
        for name in _closure(cfg.checks):
            blocker = next((d for d in CHECKS[name] if results[d].status != PASS), None)
            if blocker is not None:
                results[name] = CheckResult(name, BLOCKED, blocked_by=blocker)
                continue
            try:
                results[name] = _evaluate(name, cfg, imm, entry, grid, ident_pts, h, pool, store)
            except _ChunkError as exc:
                results[name] = CheckResult(name, FAIL, message=str(exc))
    finally:
        if pool is not None:
            pool.shutdown()

    recs = _point_records(grid, store) if points else None
    checks = [results[k] for k in _closure(cfg.checks)]
    return Report(echo, __version__, checks, recs, time.perf_counter() - t0)


def _evaluate(name, cfg, imm, entry, grid, ident_pts, h, pool, store):
    if name in ("extrinsic", "pmc", "biharmonic"):
        data = _map_points(name, imm, grid, h, cfg.seed, pool)
        store[name] = data
        fn = {"extrinsic": _check_extrinsic, "pmc": _check_pmc, "biharmonic": _check_biharmonic}[name]
        return fn(cfg, imm, entry, grid, data)
    if name in ("simons", "codazzi", "deltaT"):
        if name == "deltaT" and imm.m != 2:
            return CheckResult(name, NA, tolerance=cfg.tol(name), message="stated for surfaces only")
        kw = {} if name == "deltaT" else {"selector": cfg.selector}
        data = _map_points(name, imm, ident_pts, h, cfg.seed, pool, **kw)
        return _check_identity(name, cfg, ident_pts, data)
    if name == "flatness":
        return _check_flatness(cfg, imm, store, grid)
    if name == "classification":
        return _check_classification(cfg, imm, entry, store, grid, h)
    raise KeyError(name)


def _point_records(grid, store):
    keys = {
        "extrinsic": ("H_norm", "T_norm", "sigma_norm_sq", "K", "pseudo_umbilical_defect"),
        "pmc": ("pmc_defect",),
        "biharmonic": ("tau_norm", "bitension", "cond1", "cond2", "cond3", "verdict", "route"),
    }
    recs = []
    for i, u in enumerate(grid):
        rec = {"index": i, "u": [float(x) for x in u]}
        for check, names in keys.items():
            if check in store:
                for k in names:
                    v = store[check][k][i]
                    rec[k] = str(v) if isinstance(v, str) else _num(v)
        recs.append(rec)
    return recs


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.str_):
        return str(obj)
    return obj


def to_json(report_or_dict) -> str:
    """Canonical machine format: sorted keys, two-space indent, shortest round-trip floats."""
    d = report_or_dict.as_dict() if isinstance(report_or_dict, Report) else report_or_dict
    return json.dumps(_clean(d), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _short(x) -> str:
    if x is None:
        return "n/a"
    mant, _, exp = f"{x:.1e}".partition("e")
    return f"{mant}e{int(exp)}"


def render_table(report: Report) -> str:
    lines = []
    for c in report.checks:
        parts = [f"{c.label:<22}", f"{c.name:<15}"]
        if c.worst is not None:
            parts.append(f"worst={_short(c.worst)}")
        if c.details.get("at_noise_floor"):
            parts.append("order=floor")
        elif c.order is not None:
            parts.append(f"order={c.order:.1f}")
        if c.message:
            parts.append(f"({c.message})")
        lines.append(" ".join(parts).rstrip())
    return "\n".join(lines) + "\n"
