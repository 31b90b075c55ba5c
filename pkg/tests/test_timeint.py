import numpy as np
import pytest
import scipy.sparse as sp

from phplate.timeint import cn_operator, cn_step, integrate, num_steps


def _oscillator():
    M = sp.diags([2.0, 0.5]).tocsr()
    J = sp.csr_matrix([[0.0, 1.0], [-1.0, 0.0]])
    return M, J


def test_cn_step_matches_closed_form():
    M, J = _oscillator()
    dt = 0.1
    e0 = np.array([1.0, -0.5])
    A = M.toarray()
    Jd = J.toarray()
    ref = np.linalg.solve(A - dt / 2 * Jd, (A + dt / 2 * Jd) @ e0)
    e1 = cn_step(cn_operator(M, J, dt), M, J, e0, np.zeros(2), np.zeros(2), dt)
    assert np.allclose(e1, ref, rtol=1e-14)


def test_energy_conserved_and_time_reversible():
    M, J = _oscillator()
    e0 = np.array([0.3, 1.1])
    tr = integrate(M, J, e0, None, 0.05, 2.0)
    assert len(tr.times) == 41
    assert np.max(np.abs(tr.energy - tr.energy[0])) < 1e-14 * tr.energy[0]
    # stepping back with J -> -J returns to the start
    back = integrate(M, -J, tr.states[-1], None, 0.05, 2.0)
    assert np.allclose(back.states[-1], e0, atol=1e-13)


def test_second_order_in_time():
    # M e' = J e with frequency 1: exact e(t) = rotation
    M = sp.eye(2).tocsr()
    J = sp.csr_matrix([[0.0, 1.0], [-1.0, 0.0]])
    e0 = np.array([1.0, 0.0])
    errs = []
    for dt in (0.1, 0.05, 0.025):
        e = integrate(M, J, e0, None, dt, 1.0).states[-1]
        errs.append(np.linalg.norm(e - [np.cos(1.0), -np.sin(1.0)]))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.allclose(rates, 2.0, atol=0.05)


def test_forced_power_balance():
    M, J = _oscillator()
    load = lambda t: np.array([np.sin(3 * t), 0.2])
    tr = integrate(M, J, np.zeros(2), load, 0.01, 1.0)
    assert tr.power_residual[0] == 0.0
    assert np.max(np.abs(tr.power_residual)) < 1e-14
    assert max(tr.solver_residuals) < 1e-14
    assert tr.energy[-1] > 0


def test_callback_and_csv(tmp_path):
    M, J = _oscillator()
    seen = []
    tr = integrate(M, J, np.ones(2), None, 0.25, 1.0, callback=lambda i, t, e: seen.append((i, t)),
                   keep_states=False)
    assert seen == [(0, 0.0), (1, 0.25), (2, 0.5), (3, 0.75), (4, 1.0)]
    assert tr.states.shape == (0, 2)
    tr.write_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "t,H,power_residual" and len(lines) == 6


def test_num_steps():
    assert num_steps(0.1 / 8, 1.0) == 80
    with pytest.raises(ValueError):
        num_steps(0.3, 1.0)
