"""Sparse convex QP solver: operator splitting with active-set polish.

Solves

    minimize    0.5 x'Hx + f'x
    subject to  A_eq x == b_eq
                A_ineq x <= b_ineq

by ADMM on the consensus form l <= Ax <= u (equalities get l == u). The
implementation follows the well-known operator-splitting recipe: Ruiz
equilibration of the KKT matrix plus cost normalization, a quasi-definite
KKT factorization reused across iterations, over-relaxed updates, and a
penalty parameter rebalanced from the primal/dual residual ratio (with a
stiffer penalty on equality rows). After convergence a polish step solves
the equality-constrained KKT system on the detected active set with
iterative refinement, which typically drives residuals to near machine
precision.

Termination residuals are measured on the unscaled problem. A solution is
labeled optimal only if it actually meets the configured tolerances;
certificates of primal/dual infeasibility are detected from the ADMM
iterate differences. The iteration is fully deterministic: identical
inputs under identical settings reproduce the iterate sequence bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_RHO_EQ_FACTOR = 1e5
_RHO_MIN, _RHO_MAX = 1e-6, 1e6


@dataclass(frozen=True)
class QPSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 20000
    rho: float = 0.1
    sigma: float = 1e-6
    over_relaxation: float = 1.6
    adaptive_rho_interval: int = 50
    check_interval: int = 25
    scaling_iters: int = 0  # Ruiz passes; off by default, see _equilibrate
    polish: bool = True
    polish_delta: float = 1e-9
    polish_refine_iters: int = 3
    eps_prim_inf: float = 1e-6
    eps_dual_inf: float = 1e-6
    initial_x: np.ndarray | None = None
    # stationarity can lag feasibility by orders of magnitude on stiff
    # problems; None mirrors the primal tolerances
    eps_dual_abs: float | None = None
    eps_dual_rel: float | None = None
    # attempt an active-set polish every this many iterations and return
    # early when the polished point verifies against the tolerances; 0
    # disables (the ADMM loop then runs to its own convergence)
    early_polish_interval: int = 0

    @property
    def dual_abs(self) -> float:
        return self.eps_abs if self.eps_dual_abs is None else \
            self.eps_dual_abs

    @property
    def dual_rel(self) -> float:
        return self.eps_rel if self.eps_dual_rel is None else \
            self.eps_dual_rel


@dataclass
class SparseQP:
    """A convex QP in sparse form with deterministic storage order."""

    hessian: sp.csc_matrix
    linear: np.ndarray
    eq_matrix: sp.csc_matrix
    eq_rhs: np.ndarray
    ineq_matrix: sp.csc_matrix
    ineq_rhs: np.ndarray

    def __post_init__(self):
        self.hessian = self._canonical(self.hessian)
        n = self.hessian.shape[0]
        if self.hessian.shape != (n, n):
            raise ValueError("hessian must be square")
        self.linear = np.asarray(self.linear, dtype=float)
        if self.linear.shape != (n,):
            raise ValueError("linear term size mismatch")
        self.eq_matrix = self._canonical(self.eq_matrix, cols=n)
        self.ineq_matrix = self._canonical(self.ineq_matrix, cols=n)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float)
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float)
        if self.eq_rhs.shape != (self.eq_matrix.shape[0],):
            raise ValueError("eq_rhs size mismatch")
        if self.ineq_rhs.shape != (self.ineq_matrix.shape[0],):
            raise ValueError("ineq_rhs size mismatch")
        asym = abs(self.hessian - self.hessian.T)
        if asym.nnz and asym.max() > 1e-9 * max(1.0, abs(self.hessian).max()):
            raise ValueError("hessian must be symmetric")

    @staticmethod
    def _canonical(m, cols=None) -> sp.csc_matrix:
        out = sp.csc_matrix(m)
        if cols is not None and out.shape[1] != cols:
            if out.shape == (0, 0):
                out = sp.csc_matrix((0, cols))
            else:
                raise ValueError("constraint matrix column count mismatch")
        out.sum_duplicates()
        out.sort_indices()
        return out

    @property
    def num_variables(self) -> int:
        return self.hessian.shape[0]

    @property
    def num_eq(self) -> int:
        return self.eq_matrix.shape[0]

    @property
    def num_ineq(self) -> int:
        return self.ineq_matrix.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.hessian @ x) + self.linear @ x)


@dataclass
class QPSolution:
    x: np.ndarray
    status: str  # optimal | max_iter | primal_infeasible | dual_infeasible
    iterations: int
    primal_residual: float
    dual_residual: float
    y_eq: np.ndarray
    y_ineq: np.ndarray
    objective: float
    polished: bool = False
    rho_final: float = 0.1  # adapted penalty, reusable for similar solves


def kkt_residuals(qp: SparseQP, x: np.ndarray, multipliers
                  ) -> tuple[float, float, float, float]:
    """Exact KKT residual inf-norms at (x, multipliers).

    multipliers is the pair (y_eq, y_ineq). Returns (stationarity,
    primal_eq, primal_ineq, complementarity).
    """
    y_eq, y_ineq = multipliers
    y_eq = np.asarray(y_eq, dtype=float)
    y_ineq = np.asarray(y_ineq, dtype=float)
    x = np.asarray(x, dtype=float)
    station = qp.hessian @ x + qp.linear
    if qp.num_eq:
        station = station + qp.eq_matrix.T @ y_eq
    if qp.num_ineq:
        station = station + qp.ineq_matrix.T @ y_ineq
    stationarity = _inf_norm(station)
    primal_eq = _inf_norm(qp.eq_matrix @ x - qp.eq_rhs) if qp.num_eq else 0.0
    if qp.num_ineq:
        slack = qp.ineq_matrix @ x - qp.ineq_rhs
        primal_ineq = float(np.max(np.maximum(slack, 0.0)))
        complementarity = _inf_norm(y_ineq * slack)
    else:
        primal_ineq = 0.0
        complementarity = 0.0
    return stationarity, primal_eq, primal_ineq, complementarity


def _inf_norm(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


def _col_inf_norms(m: sp.spmatrix) -> np.ndarray:
    if m.shape[0] == 0 or m.nnz == 0:
        return np.zeros(m.shape[1])
    return np.asarray(abs(m).max(axis=0).todense()).ravel()


def _row_inf_norms(m: sp.spmatrix) -> np.ndarray:
    if m.shape[1] == 0 or m.nnz == 0:
        return np.zeros(m.shape[0])
    return np.asarray(abs(m).max(axis=1).todense()).ravel()


class _Workspace:
    """Scaled problem data and the reusable KKT factorization."""

    def __init__(self, qp: SparseQP, settings: QPSettings):
        self.settings = settings
        self.n = qp.num_variables
        self.m_eq = qp.num_eq
        self.m = qp.num_eq + qp.num_ineq
        if self.m:
            a = sp.vstack([qp.eq_matrix, qp.ineq_matrix], format="csc")
        else:
            a = sp.csc_matrix((0, self.n))
        self.p = qp.hessian.copy()
        self.q = qp.linear.copy()
        self.a = a
        self.lower = np.concatenate(
            [qp.eq_rhs, np.full(qp.num_ineq, -np.inf)])
        self.upper = np.concatenate([qp.eq_rhs, qp.ineq_rhs])
        self.d = np.ones(self.n)
        self.e = np.ones(self.m)
        self.c = 1.0
        if settings.scaling_iters > 0:
            self._equilibrate()

        self.rho_bar = settings.rho
        self.rho_vec = self._make_rho_vec()
        self.solver = None
        self.factorizations = 0
        self._factorize()

    def _equilibrate(self):
        # Ruiz passes over [[P, A'], [A, 0]] with clamped factors. Problems
        # assembled from physical units already have well-scaled constraint
        # rows, and flattening an extreme Hessian block at their expense
        # costs iterations, so this is opt-in via scaling_iters.
        for _ in range(self.settings.scaling_iters):
            col = np.maximum(_col_inf_norms(self.p), _col_inf_norms(self.a))
            row = _row_inf_norms(self.a)
            delta_x = np.clip(
                1.0 / np.sqrt(np.where(col > 1e-12, col, 1.0)), 1e-2, 1e2)
            delta_e = np.clip(
                1.0 / np.sqrt(np.where(row > 1e-12, row, 1.0)), 1e-2, 1e2)
            dx = sp.diags(delta_x)
            self.p = (dx @ self.p @ dx).tocsc()
            self.q = delta_x * self.q
            if self.m:
                de = sp.diags(delta_e)
                self.a = (de @ self.a @ dx).tocsc()
                self.lower = delta_e * self.lower
                self.upper = delta_e * self.upper
                self.e *= delta_e
            self.d *= delta_x
            p_cols = _col_inf_norms(self.p)
            mean_p = float(np.mean(p_cols)) if p_cols.size else 0.0
            gamma_den = max(mean_p, _inf_norm(self.q))
            gamma = 1.0 / gamma_den if gamma_den > 1e-12 else 1.0
            self.p = (gamma * self.p).tocsc()
            self.q = gamma * self.q
            self.c *= gamma

    def _make_rho_vec(self) -> np.ndarray:
        rho = np.full(self.m, self.rho_bar)
        rho[:self.m_eq] *= _RHO_EQ_FACTOR
        return np.clip(rho, _RHO_MIN, _RHO_MAX)

    def _factorize(self):
        sigma = self.settings.sigma
        p_reg = (self.p + sigma * sp.eye(self.n, format="csc")).tocsc()
        if self.m:
            kkt = sp.bmat(
                [[p_reg, self.a.T],
                 [self.a, -sp.diags(1.0 / self.rho_vec)]],
                format="csc")
        else:
            kkt = p_reg
        self.solver = spla.splu(kkt, permc_spec="COLAMD")
        self.factorizations += 1

    def maybe_update_rho(self, rho_bar: float):
        rho_bar = float(np.clip(rho_bar, _RHO_MIN, _RHO_MAX))
        ratio = rho_bar / self.rho_bar
        if 0.2 < ratio < 5.0:
            return
        self.rho_bar = rho_bar
        self.rho_vec = self._make_rho_vec()
        self._factorize()

    def solve_kkt(self, rhs_x: np.ndarray, rhs_z: np.ndarray):
        if self.m:
            sol = self.solver.solve(np.concatenate([rhs_x, rhs_z]))
            return sol[:self.n], sol[self.n:]
        return self.solver.solve(rhs_x), np.zeros(0)


def _certificate_primal(a_unscaled: sp.csc_matrix, lower, upper,
                        dy: np.ndarray, eps: float) -> bool:
    norm_dy = _inf_norm(dy)
    if norm_dy < 1e-12:
        return False
    dy = dy / norm_dy
    if _inf_norm(a_unscaled.T @ dy) > eps:
        return False
    dy_pos = np.maximum(dy, 0.0)
    dy_neg = np.minimum(dy, 0.0)
    inf_low = ~np.isfinite(lower)
    if np.any(np.abs(dy_neg[inf_low]) > eps):
        return False  # a certificate cannot push on an absent bound
    support = float(upper @ dy_pos)
    if np.any(~inf_low):
        support += float(lower[~inf_low] @ dy_neg[~inf_low])
    return support < -eps


def _certificate_dual(p: sp.csc_matrix, q: np.ndarray, a: sp.csc_matrix,
                      lower, dx: np.ndarray, eps: float) -> bool:
    norm_dx = _inf_norm(dx)
    if norm_dx < 1e-12:
        return False
    dx = dx / norm_dx
    if _inf_norm(p @ dx) > eps:
        return False
    if float(q @ dx) > -eps:
        return False
    if a.shape[0]:
        adx = a @ dx
        finite_low = np.isfinite(lower)  # equality rows
        if np.any(np.abs(adx[finite_low]) > eps):
            return False
        if np.any(adx > eps):  # upper bounds exist on every row
            return False
    return True


def _polish_active(qp: SparseQP, active: np.ndarray,
                   settings: QPSettings):
    """Solve the equality KKT system on a fixed active set, refined."""
    n = qp.num_variables
    a_act = qp.ineq_matrix[active] if active.size else sp.csc_matrix((0, n))
    rows = qp.num_eq + active.size
    if rows:
        a_full = sp.vstack([qp.eq_matrix, a_act], format="csc")
        b_full = np.concatenate([qp.eq_rhs, qp.ineq_rhs[active]])
    else:
        a_full = sp.csc_matrix((0, n))
        b_full = np.zeros(0)

    delta = settings.polish_delta
    p_reg = (qp.hessian + delta * sp.eye(n, format="csc")).tocsc()
    if rows:
        kkt_reg = sp.bmat([[p_reg, a_full.T],
                           [a_full, -delta * sp.eye(rows, format="csc")]],
                          format="csc")
    else:
        kkt_reg = p_reg
    rhs = np.concatenate([-qp.linear, b_full])
    try:
        lu = spla.splu(kkt_reg, permc_spec="COLAMD")
    except RuntimeError:
        return None

    def unreg_residual(s):
        r_x = qp.hessian @ s[:n] + qp.linear
        if rows:
            r_x = r_x + a_full.T @ s[n:]
            r_z = a_full @ s[:n] - b_full
            return np.concatenate([r_x, r_z])
        return r_x

    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        return None
    for _ in range(settings.polish_refine_iters):
        sol = sol - lu.solve(unreg_residual(sol))
    return sol


def _polish(qp: SparseQP, x_admm: np.ndarray, y_ineq_admm: np.ndarray,
            settings: QPSettings, max_passes: int = 8):
    """Primal-dual active-set refinement seeded from the ADMM multipliers.

    Each pass solves the equality KKT system on the working set, then
    drops rows whose multiplier came out negative and adds rows the
    solution violates. For a nondegenerate strictly convex QP this settles
    in a few passes; on failure the caller keeps the ADMM iterate.
    """
    n = qp.num_variables
    m_eq = qp.num_eq
    active = np.nonzero(y_ineq_admm > 1e-10)[0] if qp.num_ineq else \
        np.zeros(0, dtype=int)
    add_tol = max(0.1 * settings.eps_abs, 1e-9)
    best = None
    for _ in range(max_passes):
        sol = _polish_active(qp, active, settings)
        if sol is None:
            return best
        x_pol = sol[:n]
        y_act = sol[n + m_eq:]
        keep = y_act >= -1e-9 * max(1.0, _inf_norm(y_act))
        if qp.num_ineq:
            slack = qp.ineq_matrix @ x_pol - qp.ineq_rhs
            slack[active] = 0.0  # forced rows are tight by construction
            violated = np.nonzero(slack > add_tol)[0]
        else:
            violated = np.zeros(0, dtype=int)
        y_eq = sol[n:n + m_eq]
        y_ineq = np.zeros(qp.num_ineq)
        if active.size:
            y_ineq[active] = np.maximum(y_act, 0.0)
        best = (x_pol, y_eq, y_ineq)
        if np.all(keep) and violated.size == 0:
            return best
        active = np.union1d(active[keep], violated)
    return best


def solve(qp: SparseQP, settings: QPSettings | None = None,
          _warm_duals: tuple[np.ndarray, np.ndarray] | None = None
          ) -> QPSolution:
    """Solve a sparse convex QP; see the module docstring for the method.

    _warm_duals is internal plumbing for sequential solves of slowly
    changing problems (the IQP loop); the public warm-start surface is
    settings.initial_x.
    """
    settings = settings or QPSettings()
    n = qp.num_variables
    ws = _Workspace(qp, settings)
    m = ws.m
    m_eq = ws.m_eq

    if m:
        a_unscaled = sp.vstack([qp.eq_matrix, qp.ineq_matrix], format="csc")
    else:
        a_unscaled = sp.csc_matrix((0, n))
    lower_unscaled = np.concatenate(
        [qp.eq_rhs, np.full(qp.num_ineq, -np.inf)])
    upper_unscaled = np.concatenate([qp.eq_rhs, qp.ineq_rhs])

    if settings.initial_x is not None:
        x0 = np.asarray(settings.initial_x, dtype=float)
        if x0.shape != (n,):
            raise ValueError("initial_x size mismatch")
        x = x0 / ws.d
    else:
        x = np.zeros(n)
    z = np.clip(ws.a @ x, ws.lower, ws.upper) if m else np.zeros(0)
    y = np.zeros(m)
    if _warm_duals is not None and m:
        y_warm = np.concatenate([_warm_duals[0], _warm_duals[1]])
        if y_warm.shape == (m,):
            y = y_warm * ws.c / ws.e

    alpha = settings.over_relaxation
    x_check = x.copy()
    y_check = y.copy()
    iterations = 0
    status = "max_iter"

    def residual_report(x, z, y):
        """Unscaled residuals and their tolerance thresholds."""
        if m:
            ax = ws.a @ x
            r_prim = _inf_norm((ax - z) / ws.e)
            prim_scale = max(_inf_norm(ax / ws.e), _inf_norm(z / ws.e))
        else:
            r_prim, prim_scale = 0.0, 0.0
        px = ws.p @ x
        aty = ws.a.T @ y if m else np.zeros(n)
        r_dual = _inf_norm((px + ws.q + aty) / ws.d) / ws.c
        dual_scale = max(_inf_norm(px / ws.d), _inf_norm(aty / ws.d),
                         _inf_norm(ws.q / ws.d)) / ws.c
        eps_prim = settings.eps_abs + settings.eps_rel * prim_scale
        eps_dual = settings.dual_abs + settings.dual_rel * dual_scale
        return r_prim, r_dual, eps_prim, eps_dual

    prim_res, dual_res, _, _ = residual_report(x, z, y)

    def verified_optimum(x_cand, y_eq_cand, y_ineq_cand):
        """KKT-check a candidate against the unscaled tolerances."""
        station, primal_eq, primal_ineq, _ = kkt_residuals(
            qp, x_cand, (y_eq_cand, y_ineq_cand))
        prim_scale = _inf_norm(a_unscaled @ x_cand) if m else 0.0
        dual_scale = max(_inf_norm(qp.hessian @ x_cand),
                         _inf_norm(qp.linear))
        ok = (max(primal_eq, primal_ineq)
              <= settings.eps_abs + settings.eps_rel * prim_scale
              and station <= settings.dual_abs
              + settings.dual_rel * dual_scale)
        return ok, max(primal_eq, primal_ineq), station

    early = None
    for k in range(1, settings.max_iter + 1):
        iterations = k
        rhs_x = settings.sigma * x - ws.q
        rhs_z = z - y / ws.rho_vec if m else np.zeros(0)
        x_tilde, nu = ws.solve_kkt(rhs_x, rhs_z)
        x = alpha * x_tilde + (1.0 - alpha) * x
        if m:
            z_tilde = z + (nu - y) / ws.rho_vec
            z_cand = alpha * z_tilde + (1.0 - alpha) * z + y / ws.rho_vec
            z_new = np.clip(z_cand, ws.lower, ws.upper)
            y = ws.rho_vec * (z_cand - z_new)
            z = z_new

        if (settings.early_polish_interval and settings.polish
                and k % settings.early_polish_interval == 0):
            x_try = x * ws.d
            y_try = (y * ws.e / ws.c) if m else np.zeros(0)
            pol = _polish(qp, x_try, y_try[m_eq:], settings)
            if pol is not None:
                ok, p_res, d_res = verified_optimum(pol[0], pol[1], pol[2])
                if ok:
                    early = (pol, p_res, d_res)
                    status = "optimal"
                    break

        if k % settings.check_interval == 0 or k == settings.max_iter:
            prim_res, dual_res, eps_prim, eps_dual = residual_report(x, z, y)
            if prim_res <= eps_prim and dual_res <= eps_dual:
                status = "optimal"
                break
            if m:
                dy = (y - y_check) * ws.e / ws.c
                if _certificate_primal(a_unscaled, lower_unscaled,
                                       upper_unscaled, dy,
                                       settings.eps_prim_inf):
                    status = "primal_infeasible"
                    break
            dx = (x - x_check) * ws.d
            if _certificate_dual(qp.hessian, qp.linear, a_unscaled,
                                 lower_unscaled, dx, settings.eps_dual_inf):
                status = "dual_infeasible"
                break
            x_check = x.copy()
            y_check = y.copy()

        if m and k % settings.adaptive_rho_interval == 0:
            ax = ws.a @ x
            px = ws.p @ x
            aty = ws.a.T @ y
            num = _inf_norm(ax - z) / max(_inf_norm(ax), _inf_norm(z), 1e-12)
            den = _inf_norm(px + ws.q + aty) / max(
                _inf_norm(px), _inf_norm(aty), _inf_norm(ws.q), 1e-12)
            if den > 1e-14 and num > 1e-14:
                ws.maybe_update_rho(ws.rho_bar * np.sqrt(num / den))

    if early is not None:
        (x_out, y_eq, y_ineq), p_res, d_res = early
        return QPSolution(x=x_out, status="optimal", iterations=iterations,
                          primal_residual=p_res, dual_residual=d_res,
                          y_eq=y_eq, y_ineq=y_ineq,
                          objective=qp.objective(x_out), polished=True,
                          rho_final=ws.rho_bar)

    # unscale
    x_out = x * ws.d
    y_out = (y * ws.e / ws.c) if m else np.zeros(0)
    y_eq = y_out[:m_eq]
    y_ineq = y_out[m_eq:]

    polished = False
    if status in ("optimal", "max_iter") and settings.polish:
        pol = _polish(qp, x_out, y_ineq, settings)
        if pol is not None:
            x_pol, y_eq_pol, y_ineq_pol = pol
            old = kkt_residuals(qp, x_out, (y_eq, y_ineq))
            new = kkt_residuals(qp, x_pol, (y_eq_pol, y_ineq_pol))
            if np.all(np.isfinite(x_pol)) and \
                    max(new[0], new[1], new[2]) <= max(old[0], old[1], old[2]):
                x_out, y_eq, y_ineq = x_pol, y_eq_pol, y_ineq_pol
                polished = True

    if status in ("optimal", "max_iter"):
        station, primal_eq, primal_ineq, _ = kkt_residuals(
            qp, x_out, (y_eq, y_ineq))
        prim_res = max(primal_eq, primal_ineq)
        dual_res = station
        # label optimal only when the unscaled residuals truly qualify
        prim_scale = _inf_norm(a_unscaled @ x_out) if m else 0.0
        dual_scale = max(_inf_norm(qp.hessian @ x_out), _inf_norm(qp.linear))
        eps_prim = settings.eps_abs + settings.eps_rel * prim_scale
        eps_dual = settings.dual_abs + settings.dual_rel * dual_scale
        status = "optimal" if (prim_res <= eps_prim and dual_res <= eps_dual) \
            else "max_iter"

    return QPSolution(x=x_out, status=status, iterations=iterations,
                      primal_residual=prim_res, dual_residual=dual_res,
                      y_eq=y_eq, y_ineq=y_ineq,
                      objective=qp.objective(x_out), polished=polished,
                      rho_final=ws.rho_bar)


def dump_qp(qp: SparseQP, stream) -> None:
    """Write a QP as text: a dimension header then one triplet per line.

    Format:

        sparseqp 1
        dims <n> <m_eq> <m_ineq>
        H <nnz>          followed by nnz lines "i j value"
        f                followed by n lines "value"
        Aeq <nnz>        triplet lines
        beq              m_eq value lines
        Aineq <nnz>      triplet lines
        bineq            m_ineq value lines

    Values are written with repr so a round trip is exact.
    """

    def write_triplets(name, mat):
        coo = mat.tocoo()
        stream.write(f"{name} {coo.nnz}\n")
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            stream.write(f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}\n")

    def write_vector(name, vec):
        stream.write(f"{name}\n")
        for v in vec:
            stream.write(f"{float(v)!r}\n")

    stream.write("sparseqp 1\n")
    stream.write(f"dims {qp.num_variables} {qp.num_eq} {qp.num_ineq}\n")
    write_triplets("H", qp.hessian)
    write_vector("f", qp.linear)
    write_triplets("Aeq", qp.eq_matrix)
    write_vector("beq", qp.eq_rhs)
    write_triplets("Aineq", qp.ineq_matrix)
    write_vector("bineq", qp.ineq_rhs)


def load_qp(stream) -> SparseQP:
    """Parse the text format written by `dump_qp`."""
    lines = iter(stream.read().splitlines())

    def expect(tag):
        line = next(lines)
        if not line.startswith(tag):
            raise ValueError(f"expected {tag!r}, got {line!r}")
        return line.split()

    expect("sparseqp")
    _, n, m_eq, m_ineq = expect("dims")
    n, m_eq, m_ineq = int(n), int(m_eq), int(m_ineq)

    def read_triplets(tag, shape):
        header = expect(tag)
        nnz = int(header[1])
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            i, j, v = next(lines).split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
        return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsc()

    def read_vector(tag, count):
        expect(tag)
        return np.array([float(next(lines)) for _ in range(count)])

    hessian = read_triplets("H", (n, n))
    linear = read_vector("f", n)
    eq_matrix = read_triplets("Aeq", (m_eq, n))
    eq_rhs = read_vector("beq", m_eq)
    ineq_matrix = read_triplets("Aineq", (m_ineq, n))
    ineq_rhs = read_vector("bineq", m_ineq)
    return SparseQP(hessian, linear, eq_matrix, eq_rhs, ineq_matrix, ineq_rhs)
