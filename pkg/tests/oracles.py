"""Independent reference solvers used to cross-check the fast paths."""

import numpy as np
import scipy.sparse as sp

from airways.qpsolver import SparseQP


def active_set_enumeration(h, f, a_eq, b_eq, a_in, b_in):
    """Globally solve a small strictly convex QP by brute force.

    Enumerates every activity pattern of the inequality constraints, solves
    the corresponding equality KKT system, and keeps the point that is
    primal feasible with nonnegative multipliers. Exponential in the number
    of inequalities; only for tiny problems.
    """
    n = h.shape[0]
    m_in = a_in.shape[0]
    m_eq = a_eq.shape[0]
    best_x, best_obj = None, np.inf
    for mask in range(2 ** m_in):
        act = [i for i in range(m_in) if (mask >> i) & 1]
        a_act = np.vstack([a_eq, a_in[act]]) if (m_eq or act) else \
            np.zeros((0, n))
        b_act = np.concatenate([b_eq, b_in[act]])
        k = a_act.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = h
        kkt[:n, n:] = a_act.T
        kkt[n:, :n] = a_act
        rhs = np.concatenate([-f, b_act])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            continue
        # a numerically singular activity pattern can "solve" to garbage
        if np.max(np.abs(kkt @ sol - rhs)) > 1e-8 * max(
                1.0, np.max(np.abs(sol))):
            continue
        x = sol[:n]
        mu = sol[n + m_eq:]
        if m_eq and np.max(np.abs(a_eq @ x - b_eq)) > 1e-8:
            continue
        if m_in and np.any(a_in @ x - b_in > 1e-8):
            continue
        if np.any(mu < -1e-8):
            continue
        obj = 0.5 * x @ h @ x + f @ x
        if obj < best_obj:
            best_obj, best_x = obj, x
    return best_x


def random_box_qp(rng, max_n=12):
    """A random strictly convex QP with equality rows and variable boxes.

    Returns (SparseQP, dense pieces) where the dense pieces feed the
    enumeration oracle. The boxes are placed around a known feasible point
    so the problem is always feasible.
    """
    n = int(rng.integers(2, max_n + 1))
    m_factor = rng.normal(size=(n, n))
    h = m_factor.T @ m_factor + 0.1 * np.eye(n)
    f = rng.normal(size=n)
    x_feas = rng.normal(size=n)

    m_eq = int(rng.integers(0, min(3, n - 1) + 1))
    a_eq = rng.normal(size=(m_eq, n))
    b_eq = a_eq @ x_feas if m_eq else np.zeros(0)

    n_box = int(rng.integers(0, min(5, n) + 1))
    idx = rng.choice(n, size=n_box, replace=False)
    rows, rhs = [], []
    for i in idx:
        up = np.zeros(n)
        up[i] = 1.0
        rows.append(up)
        rhs.append(x_feas[i] + rng.uniform(0.05, 1.5))
        low = np.zeros(n)
        low[i] = -1.0
        rows.append(low)
        rhs.append(-(x_feas[i] - rng.uniform(0.05, 1.5)))
    a_in = np.array(rows) if rows else np.zeros((0, n))
    b_in = np.array(rhs)

    qp = SparseQP(sp.csc_matrix(h), f, sp.csc_matrix(a_eq), b_eq,
                  sp.csc_matrix(a_in), b_in)
    return qp, (h, f, a_eq, b_eq, a_in, b_in)
