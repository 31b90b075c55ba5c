"""Convergence tables, structural reports and log-log SVG plots."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .manufactured import convergence_rates

# fields whose rates are checked; E_r is reported but carries no threshold
RATE_FIELDS = {
    "bjt": ("e_w", "e_theta", "E_kappa", "e_gamma"),
    "afw": ("e_w", "e_theta", "E_kappa", "e_gamma"),
    "hhj": ("e_w", "E_kappa"),
}
RATE_TOLERANCE = 0.25


def expected_dof_counts(scheme: str, n: int, k: int) -> dict[str, int]:
    """Closed-form global dimensions on the structured meshes."""
    if scheme == "bjt":
        cells, edges = n * n, 2 * n * (n + 1)
        vert_edges = n * (n + 1)
        diag = (k + 1) * vert_edges + cells * (k + 1) * (k - 1)
        return {
            "e_w": cells * k * k,
            "e_theta": 2 * cells * k * k,
            "E_kappa": (n * k + 1) ** 2 + 2 * diag,
            "e_gamma": (k + 1) * edges + cells * 2 * (k + 1) * (k - 1),
        }
    tris, edges, verts = 2 * n * n, 3 * n * n + 2 * n, (n + 1) ** 2
    if scheme == "afw":
        pk1 = tris * k * (k + 1) // 2
        return {
            "e_w": pk1,
            "e_theta": 2 * pk1,
            "E_kappa": 2 * ((k + 1) * edges + tris * (k - 1) * (k + 1)),
            "e_gamma": k * edges + tris * (k - 1) * k,
            "E_r": pk1,
        }
    if scheme == "hhj":
        return {
            "e_w": verts + (k - 1) * edges + tris * (k - 1) * (k - 2) // 2,
            "E_kappa": k * edges + tris * 3 * k * (k - 1) // 2,
        }
    raise ValueError(f"unknown scheme {scheme!r}")


def build_stamp() -> dict:
    return {"package": __version__, "python": platform.python_version(), "numpy": np.__version__}


@dataclass
class ConvergenceReport:
    scheme: str
    degree: int
    rows: list[dict] = field(default_factory=list)  # field, h, error, rate
    slopes: dict[str, float] = field(default_factory=dict)
    slopes_finest3: dict[str, float] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_runs(cls, scheme: str, degree: int, runs, metadata=None) -> "ConvergenceReport":
        runs = sorted(runs, key=lambda r: -r.h)
        rep = cls(scheme, degree, metadata=dict(metadata or {}))
        names = list(runs[0].errors)
        for name in names:
            data = [(r.h, r.errors[name]) for r in runs]
            if len(runs) >= 2 and all(e > 0 for _, e in data):
                rates = convergence_rates(data)
                succ = [None] + [float(v) for v in rates.successive]
                rep.slopes[name] = rates.slope
                rep.slopes_finest3[name] = rates.slope_finest3
            else:
                succ = [None] * len(data)
            for (h, e), rt in zip(data, succ):
                rep.rows.append({"field": name, "h": h, "error": e, "rate": rt})
        rep.metadata.setdefault("runs", [r.summary() for r in runs])
        rep.metadata["max_solver_residual"] = max(r.max_solver_residual for r in runs)
        rep.metadata["max_power_residual"] = max(r.max_power_residual for r in runs)
        return rep

    def rate_check(self, tolerance: float | None = None) -> dict[str, bool]:
        """Finest-three-level slope >= degree - tolerance for checked fields."""
        if tolerance is None:
            tolerance = RATE_TOLERANCE
        return {
            name: bool(self.slopes_finest3.get(name, -math.inf) >= self.degree - tolerance)
            for name in RATE_FIELDS[self.scheme]
            if name in self.slopes_finest3
        }

    @property
    def passed(self) -> bool:
        checks = self.rate_check()
        return bool(checks) and all(checks.values())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "h", "error", "rate"])
            for r in self.rows:
                rate = "" if r["rate"] is None else f"{r['rate']:.6f}"
                w.writerow([r["field"], f"{r['h']:.10g}", f"{r['error']:.10e}", rate])

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "degree": self.degree,
            "rows": self.rows,
            "slopes": self.slopes,
            "slopes_finest3": self.slopes_finest3,
            "rate_check": self.rate_check(),
            "passed": self.passed,
            "metadata": self.metadata,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable))


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


# --------------------------------------------------------------------------
# SVG

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _decades(lo: float, hi: float) -> tuple[int, int]:
    return math.floor(math.log10(lo)), math.ceil(math.log10(hi))


def loglog_svg(series: list[dict], title: str, width: int = 480, height: int = 360) -> str:
    """Self-contained SVG of error-vs-h curves on log-log axes.

    Each series is ``{"label", "h", "error", "slope"}``; a dashed reference
    line of the given slope is drawn through the series' finest point.
    """
    hs = np.concatenate([np.asarray(s["h"], float) for s in series])
    es = np.concatenate([np.asarray(s["error"], float) for s in series])
    es = es[es > 0]
    x0, x1 = _decades(hs.min(), hs.max())
    y0, y1 = _decades(es.min() / 3, es.max() * 3)
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1
    ml, mr, mt, mb = 70, 130, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(h):
        return ml + (math.log10(h) - x0) / (x1 - x0) * pw

    def py(e):
        return mt + (y1 - math.log10(e)) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for d in range(x0, x1 + 1):
        x = px(10.0**d)
        out.append(f'<line x1="{x:.1f}" y1="{mt}" x2="{x:.1f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.1f}" y="{mt + ph + 16}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        y = py(10.0**d)
        out.append(f'<line x1="{ml}" y1="{y:.1f}" x2="{ml + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.1f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">h</text>')
    out.append(
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">error</text>'
    )
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        h = np.asarray(s["h"], float)
        e = np.asarray(s["error"], float)
        ok = e > 0
        h, e = h[ok], e[ok]
        if len(h) == 0:
            continue
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(h, e))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in zip(h, e):
            out.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{color}"/>')
        slope = s.get("slope")
        if slope is not None and len(h) >= 2:
            j = int(np.argmin(h))
            ref = lambda hh: e[j] * 0.5 * (hh / h[j]) ** slope
            a, b = h.min(), h.max()
            out.append(
                f'<line x1="{px(a):.1f}" y1="{py(ref(a)):.1f}" x2="{px(b):.1f}" y2="{py(ref(b)):.1f}" '
                f'stroke="{color}" stroke-dasharray="5,4"/>'
            )
        ly = mt + 14 + 30 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly + 4}">{_esc(s["label"])}</text>')
        if slope is not None:
            out.append(
                f'<line x1="{ml + pw + 10}" y1="{ly + 14}" x2="{ml + pw + 30}" y2="{ly + 14}" '
                f'stroke="{color}" stroke-dasharray="5,4"/>'
            )
            out.append(f'<text x="{ml + pw + 34}" y="{ly + 18}">h^{slope:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# --------------------------------------------------------------------------
# structure


def structural_report(system, tol: float = 1e-12) -> dict:
    """Symmetry, skewness, definiteness and dof counts of an assembled system.

    ``ok`` is False when any invariant fails: skewness or symmetry residual
    above ``tol``, a non-definite mass matrix for bjt/hhj, negative inertia of
    the afw mass matrix different from the multiplier dimension, or dof counts
    that disagree with the closed-form formulas.
    """
    from .linalg import inertia

    res = system.structure_residuals()
    mult = system.multiplier_dofs()
    pos, neg, zero = inertia(system.M_free, last=mult if len(mult) else None)
    dofs = system.dof_counts()
    n = getattr(system.mesh, "n", None)
    structured = getattr(system.mesh, "diagonal", "right") in ("right", "left")
    expected = expected_dof_counts(system.scheme, n, system.degree) if structured else dofs
    if system.scheme == "afw":
        definite_ok = neg == len(mult) and zero == 0
        kind = "symmetric indefinite"
    else:
        definite_ok = neg == 0 and zero == 0
        kind = "symmetric positive definite" if definite_ok else "not positive definite"
    checks = {
        "J_skew": res["skewness"] <= tol,
        "M_symmetric": res["symmetry"] <= tol,
        "M_inertia": bool(definite_ok),
        "dof_counts": dofs == expected,
    }
    return {
        "scheme": system.scheme,
        "degree": system.degree,
        "n": n,
        "skewness": res["skewness"],
        "symmetry": res["symmetry"],
        "inertia": {"positive": pos, "negative": neg, "zero": zero},
        "multiplier_dofs": int(len(mult)),
        "M_class": kind,
        "dofs": dofs,
        "expected_dofs": expected,
        "free_dofs": int(len(system.free)),
        "checks": checks,
        "ok": all(checks.values()),
    }


def describe_structure(rep: dict) -> list[str]:
    tag = f"{rep['scheme']} n={rep['n']} k={rep['degree']}"
    inert = rep["inertia"]
    lines = []
    if rep["scheme"] == "afw":
        lines.append(
            f"{tag} M: {rep['M_class']} (negative inertia {inert['negative']} = "
            f"dim of multiplier block {rep['multiplier_dofs']})"
            if rep["checks"]["M_inertia"]
            else f"{tag} M: inertia {inert} does not match multiplier dim {rep['multiplier_dofs']}"
        )
    else:
        lines.append(f"{tag} M: {rep['M_class']} (inertia {inert['positive']}/{inert['negative']}/{inert['zero']})")
    lines.append(f"{tag} M symmetry residual {rep['symmetry']:.2e}; J skew residual {rep['skewness']:.2e}")
    counts = ", ".join(f"{k}={v}" for k, v in rep["dofs"].items())
    status = "match" if rep["checks"]["dof_counts"] else f"MISMATCH (expected {rep['expected_dofs']})"
    lines.append(f"{tag} dofs: {counts}; closed-form counts {status}")
    return lines
