"""Experiment orchestration: each kind builds the relevant objects for one
or more parameters, captures per-item failures, and emits a deterministic
report payload plus CSV/JSON files.

Timing lives in a separate file so that `report.json` is a pure function of
the spec and environment record.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import as_c
from .moduli import (DEFAULT_GRID, ModulusPreconditionError, RingDomain, principal_moduli,
                     safe_modulus)
from .nest import (DEFAULT_ORBIT_BUDGET, DEFAULT_PERSISTENCE, build_principal_nest,
                   renormalization_annulus)
from .puzzle import initial_puzzle
from .rays import RayBudget, alpha_rotation_number, equipotential_curve, trace_ray
from .dynamics import rotation_cycle
from . import real
from .schemas import validate

KINDS = ("theorem-1-growth", "theorem-2-definite", "theorem-d-scan", "cascade-scaling",
         "nest-dump", "ray-dump")
DEFAULT_MU_BAR = 0.05
DEFAULT_RATIO_CAP = 100.0


def named_parameter(name: str) -> complex:
    """Parameters by combinatorial name."""
    name = name.lower()
    if name in ("basilica", "chebyshev-2"):
        return complex(-2.0) if name == "chebyshev-2" else complex(-1.0)
    if name == "airplane":
        return complex(real.find_parameter("superstable-period", k=3))
    if name == "rabbit":
        roots = np.roots([1, 2, 1, 1])
        return complex(roots[np.argmax(roots.imag)])
    if name == "fibonacci":
        return complex(real.find_parameter("fibonacci"))
    if name == "feigenbaum":
        return complex(real.find_parameter("feigenbaum-limit"))
    raise ValueError(f"unknown parameter name {name!r}")


def parse_c(text: str) -> complex:
    """'RE', 'RE,IM' or a parameter name."""
    text = text.strip()
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        return named_parameter(text)
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise ValueError(f"cannot parse parameter {text!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    cs: tuple = ()
    c_range: tuple | None = None
    samples: int = 200
    levels: int = 8
    orbit_budget: int = DEFAULT_ORBIT_BUDGET
    grid: int = DEFAULT_GRID
    mu_bar: float = DEFAULT_MU_BAR
    ratio_cap: float = DEFAULT_RATIO_CAP
    epsilons: tuple = (1e-2, 1e-3, 1e-4)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        for name in ("samples", "levels", "orbit_budget", "grid", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.grid < 16:
            raise ValueError("grid must be >= 16")
        if not (self.mu_bar > 0 and self.ratio_cap > 1):
            raise ValueError("mu_bar must be positive and ratio_cap > 1")
        if self.c_range is not None:
            a, b = self.c_range
            if not a < b:
                raise ValueError("c-range must be nonempty (A < B)")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        object.__setattr__(self, "cs", tuple(complex(c) for c in self.cs))
        if self.kind == "theorem-d-scan" and self.c_range is None:
            raise ValueError("theorem-d-scan needs a c-range")
        if self.kind in ("theorem-2-definite", "nest-dump", "ray-dump") and not self.cs:
            raise ValueError(f"{self.kind} needs at least one parameter")

    def parameters(self) -> list:
        if self.c_range is not None:
            return [complex(x) for x in np.linspace(self.c_range[0], self.c_range[1], self.samples)]
        return list(self.cs)

    def to_json(self) -> dict:
        d = asdict(self)
        d["cs"] = [[c.real, c.imag] for c in self.cs]
        d["c_range"] = list(self.c_range) if self.c_range else None
        d["epsilons"] = list(self.epsilons)
        d.pop("workers")  # does not affect the payload
        return d


@dataclass
class Report:
    spec: ExperimentSpec
    items: list
    summary: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for it in self.items if it.get("error"))

    @property
    def status(self) -> str:
        return "partial" if self.failures else "ok"

    def environment(self) -> dict:
        b = RayBudget()
        return {"seed": self.spec.seed, "grid": self.spec.grid,
                "orbit_budget": self.spec.orbit_budget, "levels": self.spec.levels,
                "ray_budget": asdict(b), "persistence": DEFAULT_PERSISTENCE,
                "version": __version__}

    def payload(self) -> dict:
        return clean({"kind": self.spec.kind, "spec": self.spec.to_json(),
                      "environment": self.environment(), "status": self.status,
                      "items": self.items, "summary": self.summary, "series": self.series})


def clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [clean(x.real), clean(x.imag)]
    return x


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False)


def least_squares(x, y) -> tuple:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


# ---------------------------------------------------------------------------
# per-item workers (top level so that they pickle)


def _growth_item(c, spec: ExperimentSpec) -> dict:
    nest = build_principal_nest(c, spec.levels, spec.orbit_budget)
    if nest.error or len(nest.levels) < 2:
        raise RuntimeError(nest.error or "nest has fewer than 2 levels")
    rows, k = [], 0
    for lv, (n, est) in zip(nest.levels[1:], principal_moduli(c, nest, spec.grid)):
        if lv.central is False:
            k += 1
        rows.append({"n": n, "k": k if lv.central is False else None,
                     "central": lv.central, "return_time": lv.return_time,
                     "value": est.value, "grid": est.grid, "richardson": est.richardson,
                     "converged": est.converged, "degenerate": est.degenerate})
    item = {"c": c, "verdict": str(nest.verdict), "return_times": nest.return_times,
            "kappa": nest.kappa, "moduli": rows}
    if c.imag == 0 and -2 <= c.real < -0.75:
        rn = real.real_nest(c.real, spec.levels, spec.orbit_budget)
        item["scaling_factors"] = rn.scaling_factors
    return item


def _definite_item(c, spec: ExperimentSpec) -> dict:
    nest = build_principal_nest(c, spec.levels + DEFAULT_PERSISTENCE, spec.orbit_budget)
    if nest.error:
        raise RuntimeError(nest.error)
    if nest.verdict.kind != "q-renormalizable":
        raise RuntimeError(f"no renormalization detected ({nest.verdict})")
    ann = renormalization_annulus(c, nest)
    if not ann.valid:
        raise RuntimeError("no admissible renormalization annulus")
    est = safe_modulus(RingDomain(ann.outer, ann.inner), spec.grid)
    return {"c": c, "verdict": str(nest.verdict), "period": nest.verdict.period,
            "cut_level": ann.cut_level, "thickened": ann.thickened,
            "thickening": ann.thickening, "modulus": est.value, "richardson": est.richardson,
            "converged": est.converged, "definite": est.value >= spec.mu_bar}


def essentially_bounded(report, cap: float) -> bool:
    for g in report:
        if g.neglectable:
            continue
        for v in (g.scaling, g.length_ratio, g.gap_ratio):
            if v is not None and v < 1.0 / cap:
                return False
    return True


def _scan_item(c, spec: ExperimentSpec) -> dict:
    x = c.real
    rn = real.real_nest(x, spec.levels, spec.orbit_budget)
    cascades = real.classify_real_cascades(rn)
    tau = rn.kappa
    for cas in cascades:
        if cas.kind == "Ulam-Neumann":
            tau = max(tau, cas.length)
        if not cas.open_ended and cas.length >= 2 and cas.first_level + 1 < len(rn.intervals):
            tau = max(tau, real.order_and_depth(rn, cas).tau)
    item = {"c": x, "verdict": str(rn.verdict), "kappa": rn.kappa,
            "cascades": [{"first_level": s.first_level, "length": s.length, "kind": s.kind,
                          "open_ended": s.open_ended} for s in cascades],
            "scaling_factors": rn.scaling_factors, "tau": tau,
            "modulus": None, "flag": "not-renormalizable"}
    if rn.verdict.kind != "q-renormalizable":
        return item
    geometry = real.essential_geometry_report(rn)
    bounded = essentially_bounded(geometry, spec.ratio_cap)
    modulus = None
    nest = build_principal_nest(c, spec.levels + DEFAULT_PERSISTENCE, spec.orbit_budget)
    if nest.verdict.kind == "q-renormalizable" and not nest.error:
        ann = renormalization_annulus(c, nest)
        if ann.valid:
            modulus = safe_modulus(RingDomain(ann.outer, ann.inner), spec.grid).value
    large = modulus is not None and modulus >= spec.mu_bar
    item.update(modulus=modulus, essentially_bounded=bounded, modulus_large=large,
                flag="modulus-large" if large else "essentially-bounded" if bounded else "neither")
    return item


def _cascade_item(eps, spec: ExperimentSpec) -> dict:
    n = real.saddle_node_length(eps)
    return {"eps": eps, "N": n, "N_sqrt_eps": n * math.sqrt(eps)}


def _nest_item(c, spec: ExperimentSpec) -> dict:
    nest = build_principal_nest(c, spec.levels, spec.orbit_budget)
    doc = nest.to_json()
    pieces = [p.to_json(c) for p in nest.initial_pieces]
    pieces += [lv.piece.to_json(c) for lv in nest.levels]
    return {"c": c, "verdict": str(nest.verdict), "return_times": nest.return_times,
            "kappa": nest.kappa, "error": nest.error, "nest": doc, "pieces": pieces}


def _ray_item(c, spec: ExperimentSpec) -> dict:
    budget = RayBudget()
    rot = alpha_rotation_number(c, budget)
    if rot is None:
        raise RuntimeError("rotation number undetermined")
    rays = []
    for theta in rotation_cycle(rot.numerator, rot.denominator).angles:
        tr = trace_ray(c, theta, budget)
        rays.append({"angle": f"{theta.numerator}/{theta.denominator}", "landed": tr.landed,
                     "landing_point": tr.landing_point if tr.landed else None,
                     "points": [[z.real, z.imag] for z in tr.points]})
    eq = equipotential_curve(c, budget.potential_start, 512)
    return {"c": c, "rotation_number": f"{rot.numerator}/{rot.denominator}", "rays": rays,
            "equipotential": {"level": budget.potential_start,
                              "points": [[z.real, z.imag] for z in eq]}}


_WORKERS = {"theorem-1-growth": _growth_item, "theorem-2-definite": _definite_item,
            "theorem-d-scan": _scan_item, "cascade-scaling": _cascade_item,
            "nest-dump": _nest_item, "ray-dump": _ray_item}


def _run_one(args) -> dict:
    idx, x, spec = args
    t0 = time.perf_counter()
    try:
        item = _WORKERS[spec.kind](x, spec)
        item.setdefault("error", None)
    except Exception as exc:  # per-item capture; the scan goes on
        key = "eps" if spec.kind == "cascade-scaling" else "c"
        item = {key: x, "error": f"{type(exc).__name__}: {exc}"}
    item["id"] = idx
    return item, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# summaries


def _summarize(spec: ExperimentSpec, items: list) -> tuple[dict, dict]:
    summary, series = {}, {}
    ok = [it for it in items if not it.get("error")]
    if spec.kind == "theorem-1-growth" and ok:
        rows = [r for r in ok[0]["moduli"] if r["k"] is not None and not r["degenerate"]]
        ks, mus = [r["k"] for r in rows], [r["value"] for r in rows]
        slope, intercept = least_squares(ks, mus)
        summary = {"slope": slope, "intercept": intercept, "measurable": len(rows),
                   "non_decreasing_1p1": all(b * 1.1 >= a for a, b in zip(mus[:6], mus[1:6]))}
        series["mu"] = {"k": ks, "mu": mus, "slope": slope, "intercept": intercept}
        if "scaling_factors" in ok[0]:
            lam = ok[0]["scaling_factors"]
            series["lambda"] = {"n": list(range(1, len(lam) + 1)), "lambda": lam}
    elif spec.kind == "theorem-2-definite":
        summary = {"all_definite": bool(ok) and all(it["definite"] for it in ok),
                   "min_modulus": min((it["modulus"] for it in ok), default=None)}
    elif spec.kind == "theorem-d-scan":
        flags = [it["flag"] for it in ok]
        summary = {k: flags.count(k) for k in ("modulus-large", "essentially-bounded",
                                               "neither", "not-renormalizable")}
        pts = [it for it in ok if it["flag"] != "not-renormalizable"]
        series["dichotomy"] = {"c": [it["c"] for it in pts],
                               "modulus": [it["modulus"] for it in pts],
                               "flag": [it["flag"] for it in pts], "mu_bar": spec.mu_bar}
    elif spec.kind == "cascade-scaling":
        rows = sorted(ok, key=lambda it: -it["eps"])
        for a, b in zip(rows[:-1], rows[1:]):
            b["ratio"] = b["N"] / a["N"]
            b["law_ratio"] = math.sqrt(a["eps"] / b["eps"])
        summary = {"within_20pct": all(abs(r["ratio"] / r["law_ratio"] - 1) <= 0.2
                                       for r in rows[1:])}
    elif spec.kind == "nest-dump" and ok:
        series["puzzle"] = ok[0]["pieces"]
    return summary, series


# ---------------------------------------------------------------------------
# files


CSV_COLUMNS = {
    "theorem-1-growth": ["c", "n", "k", "central", "return_time", "value", "grid", "richardson",
                         "converged", "degenerate"],
    "theorem-2-definite": ["c", "verdict", "period", "cut_level", "thickened", "thickening",
                           "modulus", "richardson", "converged", "definite", "error"],
    "theorem-d-scan": ["c", "verdict", "kappa", "cascades", "scaling_factors", "tau", "modulus",
                       "flag", "error"],
    "cascade-scaling": ["eps", "N", "N_sqrt_eps", "ratio", "law_ratio", "error"],
}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, list) and v and isinstance(v[0], dict):
        return ";".join(f"{d['kind'] or 'open'}:{d['first_level']}+{d['length']}" for d in v)
    if isinstance(v, list):
        if len(v) == 2 and all(isinstance(t, float) for t in v):
            return f"{v[0]!r}{v[1]:+}j" if v[1] else repr(v[0])
        return ";".join(repr(t) for t in v)
    return repr(v) if isinstance(v, float) else str(v)


def _csv_rows(kind: str, items: list) -> list:
    if kind == "theorem-1-growth":
        return [dict(r, c=it["c"]) for it in items if not it.get("error") for r in it["moduli"]]
    return items


def write_outputs(report: Report, out: Path, svg: bool = False) -> list:
    out.mkdir(parents=True, exist_ok=True)
    payload = report.payload()
    validate(payload, "report")
    files = []
    (out / "report.json").write_text(dumps(payload))
    files.append("report.json")
    (out / "timing.json").write_text(json.dumps(report.timing, sort_keys=True, indent=1))
    kind = report.spec.kind
    if kind in CSV_COLUMNS:
        name = {"theorem-1-growth": "moduli.csv", "theorem-2-definite": "renormalization.csv",
                "theorem-d-scan": "scan.csv", "cascade-scaling": "cascade_scaling.csv"}[kind]
        cols = CSV_COLUMNS[kind]
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in clean(_csv_rows(kind, report.items)):
                w.writerow([_fmt(row.get(k)) for k in cols])
        files.append(name)
    for it in payload["items"]:
        if kind == "nest-dump" and not it.get("error"):
            validate(it["nest"], "nest")
            name = f"nest_{it['id']}.json"
            (out / name).write_text(dumps(it["nest"]))
            files.append(name)
        if kind == "ray-dump" and not it.get("error"):
            name = f"rays_{it['id']}.json"
            (out / name).write_text(dumps(it))
            files.append(name)
    if svg:
        from .svg import PLOTS, render_svg
        for which in PLOTS[kind]:
            try:
                text = render_svg(report, which)
            except ValueError:
                continue
            (out / f"{which}.svg").write_text(text)
            files.append(f"{which}.svg")
    report.files = files
    return files


def run(spec: ExperimentSpec, out: str | Path | None = None, svg: bool = False) -> Report:
    """Run an experiment; writes files under `out` when given."""
    xs = list(spec.epsilons) if spec.kind == "cascade-scaling" else spec.parameters()
    if not xs:
        raise ValueError("no parameters to run")
    jobs = [(i, x, spec) for i, x in enumerate(xs)]
    t0 = time.perf_counter()
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r[0]["id"])
    items = [r[0] for r in results]
    summary, series = _summarize(spec, items)
    timing = {"total_s": time.perf_counter() - t0, "items_s": [r[1] for r in results]}
    report = Report(spec, items, summary, series, timing)
    if out is not None:
        write_outputs(report, Path(out), svg)
    return report
