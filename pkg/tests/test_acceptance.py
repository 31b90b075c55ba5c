"""Acceptance criteria 1-7.

Each test records one PASS/FAIL line (shown in the terminal summary, and
printed directly when this file is run as a script).
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_force_system, kirchhoff_residuals, mindlin_residuals
from phplate.assembly import apply_essential_bcs, assemble_system
from phplate.linalg import inertia
from phplate.manufactured import kirchhoff_exact, mindlin_exact
from phplate.mesh import build_rect_grid, build_tri_grid
from phplate.report import ConvergenceReport
from phplate.simulation import build_mesh, simulate

RATE_FIELDS = ("e_w", "e_theta", "E_kappa", "e_gamma")


@contextmanager
def criterion(number, title, limit=None):
    """Record PASS/FAIL for one criterion; ``info`` collects detail text."""
    info = []
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        dt = time.perf_counter() - t0
        if limit is not None and dt > limit:
            ok = False
            info.append(f"runtime {dt:.0f}s over {limit:.0f}s")
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {title} ({dt:.1f}s) " + "; ".join(info)
        ACCEPTANCE_LINES.append(line)
        print(line)
    if limit is not None:
        assert dt <= limit, f"criterion {number} took {dt:.0f}s"


def _slopes(scheme, k, ns):
    runs = [simulate(scheme, n, k) for n in ns]
    return ConvergenceReport.from_runs(scheme, k, runs).slopes_finest3


def _fmt(slopes):
    return ", ".join(f"{k}={v:.3f}" for k, v in slopes.items())


def test_criterion_1_structure():
    with criterion(1, "skew J, symmetric M, definiteness/inertia for all (scheme, k, n)", limit=60) as info:
        rng = np.random.default_rng(0)
        worst_skew = worst_sym = 0.0
        for scheme in ("bjt", "afw", "hhj"):
            for k in (1, 2, 3):
                for n in (2, 4, 8):
                    s = apply_essential_bcs(assemble_system(scheme, build_mesh(scheme, n), k))
                    M, J = s.M_free, s.J_free
                    skew = abs(J + J.T).max() / abs(J).max()
                    sym = abs(M - M.T).max() / abs(M).max()
                    worst_skew, worst_sym = max(worst_skew, skew), max(worst_sym, sym)
                    assert skew <= 1e-12 and sym <= 1e-12, (scheme, k, n)
                    # the interconnection does no work on arbitrary states
                    e = rng.standard_normal(M.shape[0])
                    assert abs(e @ (J @ e)) <= 1e-12 * abs(J).max() * (e @ e)
                    mult = s.multiplier_dofs()
                    pos, neg, zero = inertia(M, last=mult if len(mult) else None)
                    if scheme == "afw":
                        assert (neg, zero) == (s.field("E_r").dim, 0), (scheme, k, n, pos, neg, zero)
                    else:
                        assert (neg, zero) == (0, 0), (scheme, k, n, pos, neg, zero)
        info.append(f"max skew {worst_skew:.1e}, max asym {worst_sym:.1e}")


def test_criterion_2_oracle_equivalence():
    with criterion(2, "M, J equal brute-force dense assembly on single-cell meshes") as info:
        worst = 0.0
        for scheme, mesh in (("bjt", build_rect_grid(1)), ("afw", build_tri_grid(1)), ("hhj", build_tri_grid(1))):
            for k in (1, 2, 3):
                s = assemble_system(scheme, mesh, k)
                Md, Jd = brute_force_system(s)
                dm = abs(s.M.toarray() - Md).max() / abs(Md).max()
                dj = abs(s.J.toarray() - Jd).max() / abs(Jd).max()
                worst = max(worst, dm, dj)
                assert dm <= 1e-13 and dj <= 1e-13, (scheme, k, dm, dj)
        info.append(f"max relative difference {worst:.1e}")


def test_criterion_3_energy():
    with criterion(3, "unforced energy conservation and forced power balance, n=8, k=1", limit=120) as info:
        for scheme in ("bjt", "afw", "hhj"):
            free = simulate(scheme, 8, 1, forcing=False, measure_errors=False)
            forced = simulate(scheme, 8, 1, measure_errors=False)
            info.append(f"{scheme}: drift {free.energy_drift:.1e}, power {forced.max_power_residual:.1e}")
            assert free.energy_drift <= 1e-9
            assert forced.max_power_residual <= 1e-10


def test_criterion_4_kirchhoff_rates():
    with criterion(4, "HHJ slopes in [k-0.25, k+0.6]", limit=20 * 60) as info:
        ok = True
        for k, ns in ((1, (4, 8, 16, 32)), (2, (4, 8, 16, 32)), (3, (4, 8, 16))):
            sl = _slopes("hhj", k, ns)
            info.append(f"k={k}: {_fmt(sl)}")
            ok &= all(k - 0.25 <= sl[f] <= k + 0.6 for f in ("e_w", "E_kappa"))
        assert ok


def test_criterion_5_bjt_rates():
    with criterion(5, "BJT slopes in [k-0.25, k+0.6]", limit=30 * 60) as info:
        ok = True
        for k in (1, 2):
            sl = _slopes("bjt", k, (4, 8, 16, 32))
            info.append(f"k={k}: {_fmt(sl)}")
            ok &= all(k - 0.25 <= sl[f] <= k + 0.6 for f in RATE_FIELDS)
        assert ok


def test_criterion_6_afw_rates():
    with criterion(6, "AFW k=1 slopes ~1 with E_kappa > 1.25; k=2 slopes in [1.75, 2.6]", limit=30 * 60) as info:
        s1 = _slopes("afw", 1, (4, 8, 16, 32))
        s2 = _slopes("afw", 2, (4, 8, 16, 32))
        info.append(f"k=1: {_fmt(s1)}")
        info.append(f"k=2: {_fmt(s2)}")
        ok1 = all(0.75 <= s1[f] <= 1.6 for f in ("e_w", "e_theta", "e_gamma")) and s1["E_kappa"] > 1.25
        ok2 = all(1.75 <= s2[f] <= 2.6 for f in RATE_FIELDS)
        if not ok2:
            info.append("k=2 out of window: " + ", ".join(f for f in RATE_FIELDS if not 1.75 <= s2[f] <= 2.6))
        assert ok1 and ok2


def test_criterion_7_manufactured_residuals():
    with criterion(7, "strong-form residuals of both exact solutions <= 1e-8 at 1000 samples") as info:
        rng = np.random.default_rng(2024)
        samples = np.column_stack([rng.random(1000), rng.random(1000), rng.uniform(0, 2 * np.pi, 1000)])
        rm = mindlin_residuals(mindlin_exact(), samples)
        rk = kirchhoff_residuals(kirchhoff_exact(), samples)
        info.append(f"mindlin max {max(rm.values()):.1e}, kirchhoff max {max(rk.values()):.1e}")
        assert max(rm.values()) <= 1e-8, rm
        assert max(rk.values()) <= 1e-8, rk


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
