"""Independent reference computations used by the test-suite.

Nothing here reuses the package's quadrature, tabulation, grouping or
assembly code.  The brute-force assembler builds each basis directly on the
physical cell, integrates with its own Gauss rules (collapsed square for
triangles) and accumulates every matrix entry in explicit loops.  The
strong-residual oracle differentiates the closed-form fields numerically in
high precision rather than symbolically.
"""

from __future__ import annotations

import mpmath
import numpy as np
import sympy as s
from numpy.polynomial.legendre import leggauss

from phplate.elements import CellBasis, CellContext
from phplate.manufactured import T, X, Y

# --------------------------------------------------------------------------
# quadrature


def gauss_square(vertices, m):
    """Tensor Gauss-Legendre on a parallelogram given by its first, second
    and last vertices."""
    g, w = leggauss(m)
    g, w = 0.5 * (g + 1), 0.5 * w
    a, b, d = vertices[0], vertices[1], vertices[-1]
    J = np.column_stack([b - a, d - a])
    pts, wts = [], []
    for i in range(m):
        for j in range(m):
            pts.append(a + J @ [g[i], g[j]])
            wts.append(w[i] * w[j] * abs(np.linalg.det(J)))
    return np.array(pts), np.array(wts)


def gauss_triangle(vertices, m):
    """Duffy-collapsed tensor Gauss rule on a triangle."""
    g, w = leggauss(m)
    g, w = 0.5 * (g + 1), 0.5 * w
    a, b, c = vertices
    J = np.column_stack([b - a, c - a])
    pts, wts = [], []
    for i in range(m):
        for j in range(m):
            u = g[i]
            v = g[j] * (1 - u)
            pts.append(a + J @ [u, v])
            wts.append(w[i] * w[j] * (1 - u) * abs(np.linalg.det(J)))
    return np.array(pts), np.array(wts)


def gauss_segment(a, b, m):
    g, w = leggauss(m)
    t = 0.5 * (g + 1)
    return a + t[:, None] * (b - a), 0.5 * w * np.linalg.norm(b - a)


def cell_rule(mesh, cell, m):
    v = mesh.vertices[mesh.cells[cell]]
    return gauss_triangle(v, m) if mesh.kind == "triangle" else gauss_square(v, m)


# --------------------------------------------------------------------------
# bases on physical cells


def physical_basis(space, cell):
    """Basis of ``space`` on ``cell`` built in unscaled physical coordinates."""
    mesh = space.mesh
    direction, normal = mesh.edge_orientation(cell)
    ctx = CellContext(mesh.kind, mesh.vertices[mesh.cells[cell]].astype(float),
                      tuple(direction.tolist()), tuple(normal.tolist()))
    return CellBasis(space.element, ctx, 1.0)


def _values(basis, pts, order=0):
    v, g, h = basis.evaluate(pts, order)
    return v, g, h


# --------------------------------------------------------------------------
# brute-force assembly


def _compliance(Mt, p):
    """D^{-1} applied to a 2x2 tensor (not necessarily symmetric)."""
    D = p.E * p.thickness**3 / (12 * (1 - p.nu**2))
    return (Mt - p.nu / (1 + p.nu) * np.trace(Mt) * np.eye(2)) / (D * (1 - p.nu))


def _as_mat(v4):
    return np.array([[v4[0], v4[1]], [v4[2], v4[3]]])


def brute_force_system(system, m=None):
    """Dense M and J of an assembled system, recomputed entry by entry.

    The default rule integrates all products of degree <= 2k + 1 exactly.
    """
    m = m or system.degree + 3
    p = system.params
    mesh = system.mesh
    N = system.size
    Md = np.zeros((N, N))
    Jd = np.zeros((N, N))
    rho_b = p.rho * p.thickness
    I_rot = p.rho * p.thickness**3 / 12
    C = p.E * p.thickness * p.k_sc / (2 * (1 + p.nu))
    F = {f.name: f for f in system.fields}

    for c in range(mesh.num_cells):
        pts, wts = cell_rule(mesh, c, m)
        tab = {}
        dofs = {}
        for name, f in F.items():
            B = physical_basis(f.space, c)
            tab[name] = _values(B, pts, 2 if (system.scheme == "hhj" and name == "e_w") else 1)
            dofs[name] = f.offset + f.space.dofmap[c]

        def add(A, rows, cols, fn):
            for i, I in enumerate(rows):
                for j, Jj in enumerate(cols):
                    A[I, Jj] += sum(wts[q] * fn(q, i, j) for q in range(len(wts)))

        vw = tab["e_w"][0]
        add(Md, dofs["e_w"], dofs["e_w"], lambda q, i, j: rho_b * vw[q, i, 0] * vw[q, j, 0])
        vk = tab["E_kappa"][0]
        add(Md, dofs["E_kappa"], dofs["E_kappa"],
            lambda q, i, j: np.sum(_as_mat(vk[q, i]) * _compliance(_as_mat(vk[q, j]), p)))

        if system.scheme in ("bjt", "afw"):
            vt, vg = tab["e_theta"][0], tab["e_gamma"][0]
            gg, gk = tab["e_gamma"][1], tab["E_kappa"][1]
            add(Md, dofs["e_theta"], dofs["e_theta"], lambda q, i, j: I_rot * vt[q, i] @ vt[q, j])
            add(Md, dofs["e_gamma"], dofs["e_gamma"], lambda q, i, j: vg[q, i] @ vg[q, j] / C)
            div_g = lambda q, j: gg[q, j, 0, 0] + gg[q, j, 1, 1]
            Div_k = lambda q, j: np.array([gk[q, j, 0, 0] + gk[q, j, 1, 1], gk[q, j, 2, 0] + gk[q, j, 3, 1]])
            # upper blocks and their explicitly computed lower counterparts
            add(Jd, dofs["e_w"], dofs["e_gamma"], lambda q, i, j: vw[q, i, 0] * div_g(q, j))
            add(Jd, dofs["e_gamma"], dofs["e_w"], lambda q, i, j: -div_g(q, i) * vw[q, j, 0])
            add(Jd, dofs["e_theta"], dofs["E_kappa"], lambda q, i, j: vt[q, i] @ Div_k(q, j))
            add(Jd, dofs["E_kappa"], dofs["e_theta"], lambda q, i, j: -Div_k(q, i) @ vt[q, j])
            add(Jd, dofs["e_theta"], dofs["e_gamma"], lambda q, i, j: vt[q, i] @ vg[q, j])
            add(Jd, dofs["e_gamma"], dofs["e_theta"], lambda q, i, j: -vg[q, i] @ vt[q, j])
            if system.scheme == "afw":
                vr = tab["E_r"][0]
                add(Md, dofs["E_kappa"], dofs["E_r"], lambda q, i, j: vk[q, i] @ vr[q, j])
                add(Md, dofs["E_r"], dofs["E_kappa"], lambda q, i, j: vr[q, i] @ vk[q, j])
        else:
            hw = tab["e_w"][2]  # (nq, n, 1, 2, 2)
            b = np.zeros((len(dofs["e_w"]), len(dofs["E_kappa"])))
            for i in range(b.shape[0]):
                for j in range(b.shape[1]):
                    b[i, j] = -sum(wts[q] * np.sum(hw[q, i, 0] * _as_mat(vk[q, j])) for q in range(len(wts)))
            verts = mesh.vertices[mesh.cells[c]]
            Bw = physical_basis(F["e_w"].space, c)
            Bk = physical_basis(F["E_kappa"].space, c)
            for e in range(3):
                a_, b_ = verts[e], verts[(e + 1) % 3]
                d = b_ - a_
                n = np.array([d[1], -d[0]]) / np.linalg.norm(d)
                ep, ew = gauss_segment(a_, b_, m)
                _, gw, _ = Bw.evaluate(ep, 1)
                vke, _, _ = Bk.evaluate(ep, 0)
                for i in range(b.shape[0]):
                    for j in range(b.shape[1]):
                        b[i, j] += sum(
                            ew[q] * (gw[q, i, 0] @ n) * (n @ _as_mat(vke[q, j]) @ n) for q in range(len(ew))
                        )
            for i, I in enumerate(dofs["e_w"]):
                for j, Jj in enumerate(dofs["E_kappa"]):
                    Jd[I, Jj] += b[i, j]
                    Jd[Jj, I] -= b[i, j]
    return Md, Jd


# --------------------------------------------------------------------------
# strong-form residuals in high precision


def _mp(expr):
    return s.lambdify((X, Y, T), expr, modules="mpmath")


def _d(f, x, y, t, nx=0, ny=0, nt=0):
    return mpmath.diff(lambda a, b, c: f(a, b, c), (x, y, t), (nx, ny, nt))


DPS = 30


def mindlin_residuals(exact, samples):
    with mpmath.workdps(DPS):
        return _mindlin_residuals(exact, samples)


def kirchhoff_residuals(exact, samples):
    with mpmath.workdps(DPS):
        return _kirchhoff_residuals(exact, samples)


def _mindlin_residuals(exact, samples):
    """Max relative residual of each governing relation at the samples.

    Relations: momentum balances, the two constitutive rate equations, the
    rotation rate, and the clamped boundary traces.
    """
    p = exact.params
    ex = exact.expressions
    D = p.E * p.thickness**3 / (12 * (1 - p.nu**2))
    C = p.E * p.thickness * p.k_sc / (2 * (1 + p.nu))
    rho_b = p.rho * p.thickness
    I_rot = p.rho * p.thickness**3 / 12
    w = _mp(ex["w"])
    th = [_mp(ex["theta"][i]) for i in range(2)]
    f = _mp(ex["f"])
    tau = [_mp(ex["tau"][i]) for i in range(2)]
    Kap = [[_mp(ex["E_kappa"][i, j]) for j in range(2)] for i in range(2)]
    gam = [_mp(ex["e_gamma"][i]) for i in range(2)]
    Er = _mp(ex["E_r"][0, 1])
    ew = _mp(ex["e_w"])
    eth = [_mp(ex["e_theta"][i]) for i in range(2)]

    worst = {k: 0.0 for k in ("e_w", "e_theta", "w_balance", "theta_balance",
                              "bending", "shear", "rotation", "clamped")}
    for x, y, t in samples:
        x, y, t = mpmath.mpf(x), mpmath.mpf(y), mpmath.mpf(t)
        # co-energy variables against displacement derivatives
        ref = _d(w, x, y, t, nt=1)
        worst["e_w"] = max(worst["e_w"], float(abs(ref - ew(x, y, t)) / (abs(ref) + 1e-30)))
        for i in range(2):
            ref = _d(th[i], x, y, t, nt=1)
            worst["e_theta"] = max(worst["e_theta"], float(abs(ref - eth[i](x, y, t)) / (abs(ref) + 1e-30)))
        # linear momentum: rho b w_tt = div(q) + f
        divq = _d(gam[0], x, y, t, nx=1) + _d(gam[1], x, y, t, ny=1)
        lhs = rho_b * _d(w, x, y, t, nt=2)
        scale = abs(lhs) + abs(divq) + abs(f(x, y, t))
        worst["w_balance"] = max(worst["w_balance"], float(abs(lhs - divq - f(x, y, t)) / scale))
        # angular momentum: I theta_tt = Div M + q + tau
        for i in range(2):
            DivM = _d(Kap[i][0], x, y, t, nx=1) + _d(Kap[i][1], x, y, t, ny=1)
            lhs = I_rot * _d(th[i], x, y, t, nt=2)
            rhs = DivM + gam[i](x, y, t) + tau[i](x, y, t)
            scale = abs(lhs) + abs(DivM) + abs(gam[i](x, y, t)) + abs(tau[i](x, y, t))
            worst["theta_balance"] = max(worst["theta_balance"], float(abs(lhs - rhs) / scale))
        # constitutive: M = D((1-nu) K + nu tr K I), K = sym grad theta
        G = [[_d(th[i], x, y, t, **{("nx" if j == 0 else "ny"): 1}) for j in range(2)] for i in range(2)]
        K = [[(G[i][j] + G[j][i]) / 2 for j in range(2)] for i in range(2)]
        trK = K[0][0] + K[1][1]
        for i in range(2):
            for j in range(2):
                ref = D * ((1 - p.nu) * K[i][j] + (p.nu * trK if i == j else 0))
                val = Kap[i][j](x, y, t)
                worst["bending"] = max(worst["bending"], float(abs(val - ref) / (abs(ref) + abs(val) + 1e-30)))
        # shear: q = C (grad w - theta)
        for i in range(2):
            gw = _d(w, x, y, t, **{("nx" if i == 0 else "ny"): 1})
            ref = C * (gw - th[i](x, y, t))
            worst["shear"] = max(worst["shear"], float(abs(gam[i](x, y, t) - ref) / (abs(ref) + 1e-30)))
        # rotation multiplier: skw grad theta
        # theta_s is a gradient here, so the rotation vanishes; scale by |grad theta|
        ref = (G[0][1] - G[1][0]) / 2
        gnorm = mpmath.sqrt(sum(G[i][j] ** 2 for i in range(2) for j in range(2)))
        worst["rotation"] = max(worst["rotation"], float(abs(Er(x, y, t) - ref) / (gnorm + 1e-30)))
        # clamped edges: w = theta = 0 on x in {0,1} and y in {0,1}
        for bx, by in ((0, y), (1, y), (x, 0), (x, 1)):
            vals = [w(bx, by, t), th[0](bx, by, t), th[1](bx, by, t)]
            worst["clamped"] = max(worst["clamped"], float(max(abs(v) for v in vals)))
    return worst


def _kirchhoff_residuals(exact, samples):
    p = exact.params
    ex = exact.expressions
    D = p.E * p.thickness**3 / (12 * (1 - p.nu**2))
    rho_b = p.rho * p.thickness
    w = _mp(ex["w"])
    ew = _mp(ex["e_w"])
    f = _mp(ex["f"])
    Kap = [[_mp(ex["E_kappa"][i, j]) for j in range(2)] for i in range(2)]
    worst = {"e_w": 0.0, "balance": 0.0, "bending": 0.0, "simply_supported": 0.0}
    for x, y, t in samples:
        x, y, t = mpmath.mpf(x), mpmath.mpf(y), mpmath.mpf(t)
        ref = _d(w, x, y, t, nt=1)
        worst["e_w"] = max(worst["e_w"], float(abs(ref - ew(x, y, t)) / (abs(ref) + 1e-30)))
        # rho b w_tt = -div Div M + f
        ddM = (
            _d(Kap[0][0], x, y, t, nx=2)
            + _d(Kap[0][1], x, y, t, nx=1, ny=1)
            + _d(Kap[1][0], x, y, t, nx=1, ny=1)
            + _d(Kap[1][1], x, y, t, ny=2)
        )
        lhs = rho_b * _d(w, x, y, t, nt=2)
        scale = abs(lhs) + abs(ddM) + abs(f(x, y, t))
        worst["balance"] = max(worst["balance"], float(abs(lhs + ddM - f(x, y, t)) / scale))
        H = [[_d(w, x, y, t, nx=2), _d(w, x, y, t, nx=1, ny=1)], [_d(w, x, y, t, nx=1, ny=1), _d(w, x, y, t, ny=2)]]
        trH = H[0][0] + H[1][1]
        for i in range(2):
            for j in range(2):
                ref = D * ((1 - p.nu) * H[i][j] + (p.nu * trH if i == j else 0))
                val = Kap[i][j](x, y, t)
                worst["bending"] = max(worst["bending"], float(abs(val - ref) / (abs(ref) + abs(val) + 1e-30)))
        # simply supported: w = 0 and m_nn = 0 on the edges
        for bx, by, (a, b) in ((0, y, (0, 0)), (1, y, (0, 0)), (x, 0, (1, 1)), (x, 1, (1, 1))):
            vals = [w(bx, by, t), Kap[a][b](bx, by, t)]
            worst["simply_supported"] = max(worst["simply_supported"],
                                            float(max(abs(v) for v in vals)) / (1 + D))
    return worst
