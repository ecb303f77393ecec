"""Dense/sparse primal-dual interior-point solver for small linear programs.

Problems are stated as::

    minimize    c^T x
    subject to  A_ub x <= b_ub
                A_eq x == b_eq
                lb <= x <= ub

and converted to the standard form ``min c^T z, A z = b, z >= 0`` by
shifting/splitting variables and adding slacks.  The standard-form problem
is solved with Mehrotra's predictor-corrector method applied to the
homogeneous self-dual embedding, which certifies infeasibility and
unboundedness without a phase-one problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "LinearProgram",
    "LPResult",
    "LPError",
    "LPInfeasible",
    "LPUnbounded",
    "LPIterationLimit",
    "lp_solve",
]


class LPError(RuntimeError):
    """Base class for linear-program failures."""


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPIterationLimit(LPError):
    pass


@dataclass
class LinearProgram:
    """Minimization LP with inequality, equality and bound constraints.

    Matrices may be dense arrays or scipy sparse matrices.  ``lb``/``ub``
    default to ``0`` and ``+inf``.  ``blocks`` optionally names slices of
    the variable vector for callers that build structured problems.
    """

    c: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray | None = None
    A_eq: object = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    blocks: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "inequality")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "equality")
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()
        if np.any(self.lb > self.ub):
            raise ValueError("lower bounds exceed upper bounds")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("bounds must not be NaN")

    @property
    def n(self) -> int:
        return self.c.size

    def residuals(self, x) -> dict:
        """Primal constraint violations of a candidate point."""
        x = np.asarray(x, float)
        ub = np.maximum(self.A_ub @ x - self.b_ub, 0).max(initial=0.0)
        eq = np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0)
        bnd = max(np.maximum(self.lb - x, 0).max(initial=0.0), np.maximum(x - self.ub, 0).max(initial=0.0))
        return {"inequality": float(ub), "equality": float(eq), "bounds": float(bnd)}


def _rows(A, b, n, what):
    if A is None:
        return sp.csr_matrix((0, n)), np.zeros(0)
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[1] != n:
        raise ValueError(f"{what} matrix has {A.shape[1]} columns, expected {n}")
    b = np.asarray(b, dtype=float).ravel()
    if b.size != A.shape[0]:
        raise ValueError(f"{what} right-hand side has {b.size} entries, expected {A.shape[0]}")
    return A, b


@dataclass
class LPResult:
    """Optimal point with multipliers.

    ``y_ub`` and ``y_eq`` follow the convention ``c = A_eq^T y_eq +
    A_ub^T y_ub + (bound multipliers)`` with ``y_ub <= 0``, so ``-y_ub`` is
    the marginal increase of the optimal value per unit tightening of the
    corresponding ``b_ub`` entry.
    """

    x: np.ndarray
    objective: float
    y_ub: np.ndarray
    y_eq: np.ndarray
    iterations: int


class _StandardForm:
    """Map between the user LP and ``min c^T z, A z = b, z >= 0``."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        lb, ub = lp.lb, lp.ub
        cols = []  # (orig index, sign); x_i = offset_i + sum sign * z_col
        offset = np.zeros(n)
        upper_rows = []  # (z column, bound)
        for i in range(n):
            lo, hi = lb[i], ub[i]
            if np.isfinite(lo):
                offset[i] = lo
                cols.append((i, 1.0))
                if np.isfinite(hi):
                    upper_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[i] = hi
                cols.append((i, -1.0))
            else:
                cols.append((i, 1.0))
                cols.append((i, -1.0))
        nz = len(cols)
        rows_idx = [c[0] for c in cols]
        signs = [c[1] for c in cols]
        P = sp.csr_matrix((signs, (rows_idx, np.arange(nz))), shape=(n, nz))
        self.P, self.offset, self.n = P, offset, n

        m_ub, m_eq, m_up = lp.A_ub.shape[0], lp.A_eq.shape[0], len(upper_rows)
        A_eq = lp.A_eq @ P
        A_ub = lp.A_ub @ P
        b_eq = lp.b_eq - lp.A_eq @ offset
        b_ub = lp.b_ub - lp.A_ub @ offset
        n_tot = nz + m_ub + m_up
        blocks = [
            [A_eq, sp.csr_matrix((m_eq, m_ub)), sp.csr_matrix((m_eq, m_up))],
            [A_ub, sp.identity(m_ub, format="csr"), sp.csr_matrix((m_ub, m_up))],
        ]
        if m_up:
            U = sp.csr_matrix((np.ones(m_up), (np.arange(m_up), [r[0] for r in upper_rows])), shape=(m_up, nz))
            blocks.append([U, sp.csr_matrix((m_up, m_ub)), sp.identity(m_up, format="csr")])
        self.A = sp.bmat(blocks, format="csr") if n_tot else sp.csr_matrix((0, 0))
        self.b = np.concatenate([b_eq, b_ub, [r[1] for r in upper_rows]])
        self.c = np.concatenate([P.T @ lp.c, np.zeros(m_ub + m_up)])
        self.const = float(lp.c @ offset)
        self.m_eq, self.m_ub, self.nz = m_eq, m_ub, nz

    def recover(self, z):
        return self.offset + self.P @ z[: self.nz]


def _drop_dependent_rows(A, b, tol=1e-9):
    """Remove linearly dependent equality rows; raise if they are inconsistent."""
    m = A.shape[0]
    if m == 0:
        return A, b, np.arange(0)
    dense = A.toarray()
    _, R, piv = scipy.linalg.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * scale))
    if rank == m:
        return A, b, np.arange(m)
    keep = np.sort(piv[:rank])
    Ak, bk = dense[keep], b[keep]
    # Consistency of the dropped rows with the kept ones.
    coef, *_ = np.linalg.lstsq(Ak.T, dense.T, rcond=None)
    if np.max(np.abs(coef.T @ bk - b), initial=0.0) > 1e-7 * (1 + np.abs(b).max(initial=0.0)):
        raise LPInfeasible("equality constraints are inconsistent")
    return sp.csr_matrix(Ak), bk, keep


class _NormalSolver:
    """Solve ``(A D A^T) q = r`` for the Newton systems.

    Cholesky of the normal matrix is tried first.  Near degenerate optima it
    breaks down; the fallback factors ``[D^{1/2} A^T; delta I]`` by QR, which
    works at the square root of the normal matrix's condition number.
    """

    def __init__(self, A, d):
        self.A, self.d = A, d
        AD = A.multiply(d).tocsr() if sp.issparse(A) else A * d
        M = (AD @ A.T).toarray() if sp.issparse(AD) else AD @ A.T
        self.M = (M + M.T) / 2
        self.chol, self.R = None, None
        try:
            self.chol = scipy.linalg.cho_factor(self.M, check_finite=False)
        except np.linalg.LinAlgError:
            Bt = (A.T.multiply(np.sqrt(d)[:, None]).toarray() if sp.issparse(A) else A.T * np.sqrt(d)[:, None])
            m = Bt.shape[1]
            delta = 1e-8 * np.sqrt(max(np.diag(self.M).max(initial=0.0), 1e-300))
            self.M = self.M + delta**2 * np.eye(m)
            self.R = scipy.linalg.qr(np.vstack([Bt, delta * np.eye(m)]), mode="r", check_finite=False)[0][:m]

    def _solve(self, rhs):
        if self.chol is not None:
            return scipy.linalg.cho_solve(self.chol, rhs, check_finite=False)
        w = scipy.linalg.solve_triangular(self.R, rhs, trans="T", check_finite=False)
        return scipy.linalg.solve_triangular(self.R, w, check_finite=False)

    def __call__(self, rhs):
        sol = self._solve(rhs)
        return sol + self._solve(rhs - self.M @ sol)


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


# Relative residual accepted when iterations stall before reaching ``tol``.
_ACCEPT = 1e-7


def _hsd_mehrotra(A, b, c, tol, max_iter, callback=None):
    """Homogeneous self-dual Mehrotra predictor-corrector.

    Returns ``(status, x, y, z, iterations)`` where ``status`` is one of
    ``"optimal"``, ``"infeasible"``, ``"unbounded"`` or ``"iteration_limit"``
    and ``(x, y, z)`` are the de-homogenized iterates when optimal.
    """
    m, n = A.shape
    At = A.T.tocsr()
    x = np.ones(n)
    z = np.ones(n)
    y = np.zeros(m)
    tau = 1.0
    kappa = 1.0
    nb = 1.0 + np.linalg.norm(b)
    nc = 1.0 + np.linalg.norm(c)
    mu0 = (x @ z + tau * kappa) / (n + 1)
    best = (np.inf, None, None, None, 0)

    for it in range(1, max_iter + 1):
        rp = b * tau - A @ x
        rd = c * tau - At @ y - z
        rg = c @ x - b @ y + kappa
        mu = (x @ z + tau * kappa) / (n + 1)

        # Termination tests on the de-homogenized point.
        pinf = np.linalg.norm(rp) / tau / nb
        dinf = np.linalg.norm(rd) / tau / nc
        pobj, dobj = c @ x / tau, b @ y / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        if callback is not None:
            callback(it, pinf, dinf, gap, tau, kappa, mu)
        merit = max(pinf, dinf, gap)
        if merit < tol:
            return "optimal", _polish(A, b, x / tau), y / tau, z / tau, it
        if merit < best[0]:
            best = (merit, x / tau, y / tau, z / tau, it)
        if mu < tol * 1e-2 and tau < tol * 1e-2 * max(1.0, kappa):
            return _certificate(b, c, x, y), None, None, None, it
        if tau < 1e-2 * tol * kappa and mu < 1e-8:
            return _certificate(b, c, x, y), None, None, None, it
        if mu < 1e-16 * mu0 or (it - best[4] > 5 and best[0] < _ACCEPT):
            # Stalled at the limit of double precision.
            break

        d = x / z
        solve = _NormalSolver(A, d)
        AD = A.multiply(d).tocsr() if sp.issparse(A) else A * d
        # Shared solve for the tau-direction.
        p = solve(b + AD @ c)
        v_dir = d * (At @ p - c)
        denom_base = c @ v_dir - b @ p

        def direction(eta, rxz, rtk):
            rhat = eta * rd - rxz / x
            q = solve(eta * rp + AD @ rhat)
            u = d * (At @ q - rhat)
            denom = denom_base - kappa / tau
            dtau = (-eta * rg - c @ u + b @ q - rtk / tau) / denom
            dx = u + v_dir * dtau
            dy = q + p * dtau
            dz = (rxz - z * dx) / x
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dy, dz, dtau, dkappa

        def step_len(dx, dz, dtau, dkappa):
            a = min(
                _max_step(x, dx),
                _max_step(z, dz),
                _max_step(np.array([tau]), np.array([dtau])),
                _max_step(np.array([kappa]), np.array([dkappa])),
            )
            return min(1.0, a)

        # Predictor.
        dx, dy, dz, dtau, dk = direction(1.0, -x * z, -tau * kappa)
        a_aff = step_len(dx, dz, dtau, dk)
        mu_aff = ((x + a_aff * dx) @ (z + a_aff * dz) + (tau + a_aff * dtau) * (kappa + a_aff * dk)) / (n + 1)
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0

        # Corrector.
        rxz = sigma * mu - x * z - dx * dz
        rtk = sigma * mu - tau * kappa - dtau * dk
        dx, dy, dz, dtau, dk = direction(1.0 - sigma, rxz, rtk)
        a = min(1.0, 0.9995 * step_len(dx, dz, dtau, dk)) if step_len(dx, dz, dtau, dk) < np.inf else 1.0

        x = x + a * dx
        y = y + a * dy
        z = z + a * dz
        tau = tau + a * dtau
        kappa = kappa + a * dk
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            break
    if best[0] < _ACCEPT:
        return ("optimal", _polish(A, b, best[1])) + best[2:]
    return "iteration_limit", None, None, None, max_iter


def _polish(A, b, x, steps=3):
    """Reduce ``|A x - b|`` by projections weighted with ``x^2``.

    The weights keep components at their bounds in place, so nonnegativity
    survives; a step that would break it, or fail to help, is not taken.
    """
    r = b - A @ x
    for _ in range(steps):
        if not np.any(r):
            break
        dx = x**2 * (A.T @ _NormalSolver(A, x**2)(r))
        xn = x + dx
        rn = b - A @ xn
        if np.any(xn < 0) or np.linalg.norm(rn) >= np.linalg.norm(r):
            break
        x, r = xn, rn
    return x


def _certificate(b, c, x, y):
    by, cx = b @ y, c @ x
    if by > 0 and by >= -cx:
        return "infeasible"
    if cx < 0:
        return "unbounded"
    return "infeasible"


def lp_solve(lp: LinearProgram, tol: float = 1e-9, max_iter: int = 200) -> LPResult:
    """Solve a linear program to relative accuracy ``tol``.

    Raises
    ------
    LPInfeasible, LPUnbounded, LPIterationLimit
    """
    sf = _StandardForm(lp)
    A, b, c = sf.A, sf.b, sf.c
    if A.shape[1] == 0:
        x = sf.recover(np.zeros(0))
        if lp.residuals(x)["equality"] > tol or lp.residuals(x)["inequality"] > tol:
            raise LPInfeasible("no free variables and constraints violated")
        return LPResult(x, float(lp.c @ x), np.zeros(lp.A_ub.shape[0]), np.zeros(lp.A_eq.shape[0]), 0)
    A, b, keep = _drop_dependent_rows(A, b)
    if A.shape[0] == 0:
        # Only sign constraints remain: bounded iff c >= 0.
        if np.any(c < -1e-14):
            raise LPUnbounded("objective decreases along a free direction")
        z = np.zeros(A.shape[1])
        x = sf.recover(z)
        return LPResult(x, float(lp.c @ x), np.zeros(lp.A_ub.shape[0]), np.zeros(lp.A_eq.shape[0]), 0)

    status, z, y, s, it = _hsd_mehrotra(A, b, c, tol, max_iter)
    if status == "infeasible":
        raise LPInfeasible("linear program is infeasible")
    if status == "unbounded":
        raise LPUnbounded("linear program is unbounded")
    if status != "optimal":
        raise LPIterationLimit(f"interior-point method did not converge in {max_iter} iterations")

    x = sf.recover(z)
    y_full = np.zeros(sf.A.shape[0])
    y_full[keep] = y
    y_eq = y_full[: sf.m_eq]
    y_ub = y_full[sf.m_eq: sf.m_eq + sf.m_ub]
    return LPResult(x, float(lp.c @ x), y_ub, y_eq, it)
