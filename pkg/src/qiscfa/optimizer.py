"""CFA design by successive convex approximation and by a convex quadrature model.

The non-convex design maximizes chroma sensitivity ``tau`` together with
``lambda_l * gamma_l - lambda_rho * rho`` subject to box bounds, uniform
luminance, low-frequency chroma suppression and a crosstalk (TV) budget.
The quadratic lower bounds ``x^T Q x >= tau^2`` are replaced at every outer
iteration by their tangent planes at the current iterate, and for a fixed
``tau`` the resulting problem is a linear program.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.stats import qmc

from .atoms import CANONICAL, ColorAtom, LumaChromaBasis, build_selection_maps
from .lp import LinearProgram, LPError, LPInfeasible, lp_solve
from .metrics import (
    MODERATE,
    ConstraintResiduals,
    CrosstalkModel,
    anti_alias_index_set,
    chrominance_sensitivity,
    circular_differences,
    constraint_residuals,
    luminance_sensitivity,
    orthogonality_penalty,
    total_variation,
)

__all__ = [
    "DesignProblem",
    "IterationRecord",
    "SolverTrace",
    "ScaResult",
    "ConvexDesign",
    "MultiStartResult",
    "DesignInfeasible",
    "latin_hypercube",
    "build_sca_subproblem",
    "solve_sca",
    "solve_convex_design",
    "multi_start_design",
]


class DesignInfeasible(LPInfeasible):
    """The design constraints admit no atom."""


@dataclass(frozen=True)
class DesignProblem:
    """Parameters of the CFA design problem.

    ``tv_max`` is expressed in the normalization selected by
    ``tv_normalized`` (divided by ``2K`` when true).

    ``chroma_weight`` multiplies the chroma level ``tau`` (on the
    ``gamma_c`` scale) in the objective.  The default ``sqrt(K)`` equals
    maximizing ``sqrt(x^T Z^T Z x)``, the unnormalized chroma energy, which
    is the usual way the design objective is written.
    """

    rows: int
    cols: int
    lambda_l: float = 0.1
    lambda_rho: float = 0.02
    tv_max: float = 0.131
    deltas: CrosstalkModel = MODERATE
    basis: LumaChromaBasis = CANONICAL
    enable_anti_alias: bool = True
    enable_tv: bool = True
    tv_normalized: bool = True
    chroma_weight: float | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("atom dimensions must be positive")
        if self.lambda_l < 0 or self.lambda_rho < 0:
            raise ValueError("weights must be nonnegative")
        if self.enable_tv and not self.tv_max > 0:
            raise ValueError("tv_max must be positive when the TV bound is enabled")

    @property
    def K(self) -> int:
        return self.rows * self.cols

    @property
    def tau_weight(self) -> float:
        return math.sqrt(self.K) if self.chroma_weight is None else float(self.chroma_weight)

    @property
    def tv_budget(self) -> float:
        """TV bound on the raw (unnormalized) scale."""
        return self.tv_max * (2 * self.K if self.tv_normalized else 1.0)

    def residuals(self, atom: ColorAtom) -> ConstraintResiduals:
        return constraint_residuals(
            atom,
            self.basis,
            self.deltas if self.enable_tv else None,
            self.tv_max if self.enable_tv else None,
            tv_normalized=self.tv_normalized,
            anti_alias=self.enable_anti_alias,
        )

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "lambda_l": self.lambda_l,
            "lambda_rho": self.lambda_rho,
            "tv_max": self.tv_max,
            "deltas": list(self.deltas.deltas),
            "basis": self.basis.to_dict(),
            "enable_anti_alias": self.enable_anti_alias,
            "enable_tv": self.enable_tv,
            "tv_normalized": self.tv_normalized,
            "chroma_weight": self.tau_weight,
        }


def latin_hypercube(count: int, dim: int, seed: int) -> np.ndarray:
    """Stratified sample of ``count`` points in ``[0, 1)^dim``."""
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be positive")
    return qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed)).random(count)


# ---------------------------------------------------------------------------
# Problem structure shared by every subproblem of one design problem.


def _conjugate_representatives(M, N):
    """``[(u, v, self_conjugate)]`` with one entry per conjugate pair."""
    reps = []
    for u in range(M):
        for v in range(N):
            pu, pv = (-u) % M, (-v) % N
            if (u, v) <= (pu, pv):
                reps.append((u, v, (u, v) == (pu, pv)))
    return reps


def _dft_rows(M, N):
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    rows = {}
    for u in range(M):
        for v in range(N):
            rows[(u, v)] = np.exp(-2j * np.pi * (u * m / M + v * n / N)).ravel()
    return rows


class _Structure:
    """Constant matrices of the design problem in the variable ``x``."""

    def __init__(self, problem: DesignProblem):
        M, N, K = problem.rows, problem.cols, problem.K
        self.M, self.N, self.K = M, N, K
        Zl, Za, Zb = build_selection_maps(problem.basis, K)
        F = _dft_rows(M, N)
        reps = _conjugate_representatives(M, N)

        self.b = Zl.sum(axis=0) / K
        self.Qa = Za.T @ Za / K
        self.Qb = Zb.T @ Zb / K

        eq_rows = []
        raw = 2 * (K - 1)
        for u, v, selfc in reps:
            if (u, v) == (0, 0):
                continue
            r = F[(u, v)] @ Zl
            eq_rows.append(r.real)
            if not selfc:
                eq_rows.append(r.imag)
        aa_set = anti_alias_index_set(M, N) if problem.enable_anti_alias else []
        raw += 2 * len(aa_set)
        zsel = {"alpha": Za, "beta": Zb}
        rep_keys = {(u, v) for u, v, _ in reps}
        constrained = set()
        for ch, u, v in aa_set:
            key = (u, v) if (u, v) in rep_keys else ((-u) % M, (-v) % N)
            if (ch, key) in constrained:
                continue
            constrained.add((ch, key))
            selfc = key == ((-key[0]) % M, (-key[1]) % N)
            r = F[key] @ zsel[ch]
            eq_rows.append(r.real)
            if not selfc:
                eq_rows.append(r.imag)
        self.E = np.array(eq_rows).reshape(-1, 3 * K)
        self.raw_equality_rows = raw

        rho_rows, rho_w = [], []
        for ch in ("alpha", "beta"):
            for u, v, selfc in reps:
                if (ch, (u, v)) in constrained:
                    continue
                w = 1.0 if selfc else 2.0
                r = F[(u, v)] @ zsel[ch]
                rho_rows.append(r.real)
                rho_w.append(w)
                if not selfc:
                    rho_rows.append(r.imag)
                    rho_w.append(w)
        self.R = np.array(rho_rows).reshape(-1, 3 * K)
        self.rho_w = np.array(rho_w)

        self.enable_tv = problem.enable_tv
        if problem.enable_tv:
            D = circular_differences(M, N)
            self.D = sp.block_diag([D, D, D], format="csr")
            self.tv_w = np.repeat(np.array(problem.deltas.deltas), 2 * K)
            self.tv_budget = problem.tv_budget
        self.lambda_l = problem.lambda_l
        self.lambda_rho = problem.lambda_rho
        self.w = problem.tau_weight

        # Variable layout.
        n_x = 3 * K
        n_r = self.R.shape[0]
        n_t = self.D.shape[0] if self.enable_tv else 0
        self.blocks = {
            "x": slice(0, n_x),
            "rho_pos": slice(n_x, n_x + n_r),
            "rho_neg": slice(n_x + n_r, n_x + 2 * n_r),
            "tv_pos": slice(n_x + 2 * n_r, n_x + 2 * n_r + n_t),
            "tv_neg": slice(n_x + 2 * n_r + n_t, n_x + 2 * n_r + 2 * n_t),
        }
        self.n_x, self.n_r, self.n_t = n_x, n_r, n_t
        self.n = n_x + 2 * n_r + 2 * n_t

        c = np.zeros(self.n)
        c[self.blocks["x"]] = -self.lambda_l * self.b
        c[self.blocks["rho_pos"]] = self.lambda_rho * self.rho_w
        c[self.blocks["rho_neg"]] = self.lambda_rho * self.rho_w
        self.c = c

        I_r = sp.identity(n_r, format="csr")
        rows = [
            sp.hstack([sp.csr_matrix(self.E), sp.csr_matrix((self.E.shape[0], self.n - n_x))]),
            sp.hstack([sp.csr_matrix(self.R), -I_r, I_r, sp.csr_matrix((n_r, 2 * n_t))]),
        ]
        if self.enable_tv:
            I_t = sp.identity(n_t, format="csr")
            rows.append(sp.hstack([self.D, sp.csr_matrix((n_t, 2 * n_r)), -I_t, I_t]))
        self.A_eq = sp.vstack(rows, format="csr")
        self.b_eq = np.zeros(self.A_eq.shape[0])

        ub_rows, ub_rhs = [], []
        if self.enable_tv:
            r = np.zeros(self.n)
            r[self.blocks["tv_pos"]] = self.tv_w
            r[self.blocks["tv_neg"]] = self.tv_w
            ub_rows.append(r)
            ub_rhs.append(self.tv_budget)
        self.A_ub_static = np.array(ub_rows).reshape(-1, self.n)
        self.b_ub_static = np.array(ub_rhs)
        self.lb = np.zeros(self.n)
        self.ub = np.full(self.n, np.inf)
        self.ub[self.blocks["x"]] = 1.0

    def cut_rows(self, x_k):
        """Tangent-plane cuts ``2 (Q x_k)^T x - x_k^T Q x_k >= s`` as ``<=`` rows."""
        rows, consts = [], []
        for Q in (self.Qa, self.Qb):
            g = Q @ x_k
            r = np.zeros(self.n)
            r[self.blocks["x"]] = -2.0 * g
            rows.append(r)
            consts.append(float(x_k @ g))
        return np.array(rows), np.array(consts)

    def subproblem(self, x_k, s):
        cuts, consts = self.cut_rows(x_k)
        A_ub = np.vstack([self.A_ub_static, cuts])
        b_ub = np.concatenate([self.b_ub_static, -s - consts])
        lp = LinearProgram(
            self.c, A_ub, b_ub, self.A_eq, self.b_eq, self.lb, self.ub,
            blocks=dict(self.blocks),
            info={"raw_equality_rows": self.raw_equality_rows, "cut_rows": [len(b_ub) - 2, len(b_ub) - 1]},
        )
        return lp

    def max_cut_lp(self, x_k):
        """Maximize ``s`` subject to both cuts ``>= s`` and all design constraints."""
        cuts, consts = self.cut_rows(x_k)
        n = self.n + 1
        c = np.zeros(n)
        c[-1] = -1.0
        A_static = np.hstack([self.A_ub_static, np.zeros((self.A_ub_static.shape[0], 1))])
        A_cut = np.hstack([cuts, np.ones((2, 1))])
        A_ub = np.vstack([A_static, A_cut])
        b_ub = np.concatenate([self.b_ub_static, -consts])
        A_eq = sp.hstack([self.A_eq, sp.csr_matrix((self.A_eq.shape[0], 1))], format="csr")
        # Each cut is at least -x_k^T Q x_k on the box, so s needs no free split.
        lb = np.concatenate([self.lb, [-float(consts.max()) - 1.0]])
        ub = np.concatenate([self.ub, [np.inf]])
        return LinearProgram(c, A_ub, b_ub, A_eq, self.b_eq, lb, ub)

    def feasible(self, x, tol=1e-7):
        if x.min() < -tol or x.max() > 1 + tol:
            return False
        if self.E.size and np.abs(self.E @ x).max() > tol:
            return False
        if self.enable_tv and self.tv_w @ np.abs(self.D @ x) > self.tv_budget + tol:
            return False
        return True

    def gamma_c(self, x):
        return math.sqrt(max(0.0, min(x @ self.Qa @ x, x @ self.Qb @ x)))

    def surrogate(self, x):
        """``lambda_l * gamma_l - lambda_rho * rho`` evaluated at ``x``."""
        return float(self.lambda_l * self.b @ x - self.lambda_rho * self.rho_w @ np.abs(self.R @ x))


def build_sca_subproblem(problem: DesignProblem, x_k, tau: float) -> LinearProgram:
    """Linear program of one SCA step at a fixed chroma level ``tau``.

    Variables are laid out as ``[x, rho_pos, rho_neg, tv_pos, tv_neg]`` (see
    ``lp.blocks``); ``lp.info["raw_equality_rows"]`` counts the luma and
    anti-aliasing equality rows before conjugate-symmetric duplicates are
    dropped.
    """
    x_k = np.asarray(x_k, dtype=float)
    if x_k.size != 3 * problem.K or x_k.min() < 0 or x_k.max() > 1:
        raise ValueError("x_k must be a point of [0, 1]^(3K)")
    return _Structure(problem).subproblem(x_k, float(tau) ** 2)


# ---------------------------------------------------------------------------
# SCA driver


@dataclass
class IterationRecord:
    k: int
    tau: float
    objective: float
    status: str
    lp_solves: int


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    lp_solves: int = 0

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])

    @property
    def iterations(self) -> int:
        return len(self.records)

    def is_monotone(self, slack: float = 1e-9) -> bool:
        t = self.taus
        return bool(np.all(np.diff(t) >= -slack)) if t.size > 1 else True


@dataclass
class ScaResult:
    atom: ColorAtom
    trace: SolverTrace
    residuals: ConstraintResiduals
    tau: float
    gamma_c: float
    gamma_l: float
    rho: float
    tv: float


class _LineSearch:
    """Maximize ``w tau + V(tau^2)`` for concave nonincreasing ``V`` using LP duals.

    Every LP solve at ``s = tau^2`` returns the value ``V(s)`` and a slope
    ``-g`` (``g >= 0`` from the cut multipliers) with ``V(s') <= V(s) -
    g (s' - s)`` for all ``s'``.  The minimum of these planes is an upper
    model of ``V``; its exact maximizer is evaluated next, and the search
    stops when the model and the true value agree.
    """

    def __init__(self, struct: _Structure, x_k, tol):
        self.struct = struct
        self.x_k = x_k
        self.tol = tol
        self.lines = []  # (s, V, g)
        self.best = None  # (phi, tau, x)
        self.solves = 0

    def evaluate(self, tau):
        s = tau * tau
        lp = self.struct.subproblem(self.x_k, s)
        res = lp_solve(lp, tol=1e-10)
        self.solves += 1
        V = -res.objective
        g = float(-res.y_ub[lp.info["cut_rows"]].sum())
        g = max(g, 0.0)
        self.lines.append((s, V, g))
        phi = self.struct.w * tau + V
        x = res.x[self.struct.blocks["x"]]
        if self.best is None or phi > self.best[0]:
            self.best = (phi, tau, x)
        return phi

    def model(self, tau):
        s = tau * tau
        return self.struct.w * tau + min(V - g * (s - s0) for s0, V, g in self.lines)

    def model_argmax(self, lo, hi):
        cands = {lo, hi}
        L = self.lines
        for s0, V, g in L:
            if g > 0:
                cands.add(min(max(self.struct.w / (2.0 * g), lo), hi))
        for i in range(len(L)):
            for j in range(i + 1, len(L)):
                si, Vi, gi = L[i]
                sj, Vj, gj = L[j]
                if abs(gi - gj) > 1e-15:
                    s = (Vi - Vj + gi * si - gj * sj) / (gi - gj)
                    if s >= 0:
                        cands.add(min(max(math.sqrt(s), lo), hi))
        cands = sorted(cands)
        vals = [self.model(t) for t in cands]
        k = int(np.argmax(vals))
        return cands[k], vals[k]

    def run(self, lo, hi, max_evals=30):
        self.evaluate(lo)
        evaluated = {lo}
        for _ in range(max_evals):
            t, m = self.model_argmax(lo, hi)
            if m - self.best[0] <= self.tol * (1.0 + abs(self.best[0])):
                break
            if t in evaluated:
                break
            try:
                self.evaluate(t)
            except LPInfeasible:
                # Numerically empty at the edge of the feasible range.
                hi = lo + (t - lo) * (1 - 1e-9) if t == hi else hi
                if t == hi and hi <= lo:
                    break
                evaluated.add(t)
                continue
            evaluated.add(t)
        return self.best


def solve_sca(
    problem: DesignProblem,
    x0,
    tol: float = 1e-6,
    max_iter: int = 100,
    monotone_tau: bool = True,
) -> ScaResult:
    """Successive convex approximation from the starting point ``x0``.

    Parameters
    ----------
    problem : DesignProblem
    x0 : array_like
        Starting point in ``[0, 1]^(3K)``; it need not satisfy the design
        constraints.
    tol : float
        Stop when consecutive chroma levels differ by less than ``tol``.
    max_iter : int
        Iteration cap; on reaching it the best iterate is returned with
        ``trace.converged`` false.
    monotone_tau : bool
        Restrict each step's chroma level to ``tau >= tau_k``.  The current
        iterate keeps that level feasible, so the restriction costs no
        objective and prevents drifting to a chroma-free atom.

    Returns
    -------
    ScaResult
    """
    x = np.asarray(x0, dtype=float).ravel()
    if x.size != 3 * problem.K or x.min() < 0 or x.max() > 1:
        raise ValueError("x0 must be a point of [0, 1]^(3K)")
    st = _Structure(problem)
    trace = SolverTrace()
    if st.feasible(x):
        tau = st.gamma_c(x)
        phi_prev = st.w * tau + st.surrogate(x)
    else:
        tau, phi_prev = 0.0, -np.inf

    for k in range(1, max_iter + 1):
        smax_lp = st.max_cut_lp(x)
        res = lp_solve(smax_lp, tol=1e-10)
        trace.lp_solves += 1
        s_max = -res.objective
        if s_max < 0:
            # Restoration: no point reaches even tau = 0 under these cuts.
            x = np.clip(res.x[: st.n_x], 0.0, 1.0)
            trace.records.append(IterationRecord(k, 0.0, st.surrogate(x), "restoration", 1))
            tau = 0.0
            continue
        hi = math.sqrt(s_max)
        lo = min(tau, hi) if monotone_tau else 0.0
        ls = _LineSearch(st, x, tol=1e-10)
        phi, tau_new, x_new = ls.run(lo, hi)
        trace.lp_solves += ls.solves
        trace.records.append(IterationRecord(k, tau_new, phi, "optimal", ls.solves + 1))
        x = np.clip(x_new, 0.0, 1.0)
        done = abs(tau_new - tau) < tol and abs(phi - phi_prev) < tol * (1 + abs(phi))
        tau, phi_prev = tau_new, phi
        if done:
            trace.converged = True
            break

    atom = ColorAtom.from_x(x, problem.rows, problem.cols, name="sca", clip_tol=1e-6)
    return _finish(problem, atom, trace, tau)


def _finish(problem, atom, trace, tau):
    return ScaResult(
        atom=atom,
        trace=trace,
        residuals=problem.residuals(atom),
        tau=float(tau),
        gamma_c=chrominance_sensitivity(atom, problem.basis),
        gamma_l=luminance_sensitivity(atom, problem.basis),
        rho=orthogonality_penalty(atom, problem.basis),
        tv=total_variation(atom, problem.deltas, normalize=problem.tv_normalized),
    )


# ---------------------------------------------------------------------------
# Convex quadrature design


@dataclass
class ConvexDesign:
    atom: ColorAtom
    gamma: float
    phi: float
    omega: tuple
    gamma_l: float
    gamma_c: float
    tv: float
    residuals: ConstraintResiduals


def _carriers(M, N, omega, phi):
    u, v = omega
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    arg = 2 * np.pi * (u * m / M + v * n / N) + phi
    return math.sqrt(2) * np.cos(arg).ravel(), math.sqrt(2) * np.sin(arg).ravel()


def _convex_lp(problem: DesignProblem, omega, phi, gamma_min):
    K = problem.K
    st = _Structure(replace(problem, enable_anti_alias=False))
    Zl, Za, Zb = build_selection_maps(problem.basis, K)
    xc, xs = _carriers(problem.rows, problem.cols, omega, phi)
    n_x, n_t = 3 * K, st.n_t
    n = n_x + 1 + 2 * n_t
    ig = n_x
    c = np.zeros(n)
    c[:n_x] = -problem.lambda_l * st.b
    c[ig] = -1.0
    rows = []
    E = st.E
    rows.append(sp.hstack([sp.csr_matrix(E), sp.csr_matrix((E.shape[0], n - n_x))]))
    rows.append(sp.hstack([sp.csr_matrix(Za), sp.csr_matrix(-xc[:, None]), sp.csr_matrix((K, 2 * n_t))]))
    rows.append(sp.hstack([sp.csr_matrix(Zb), sp.csr_matrix(-xs[:, None]), sp.csr_matrix((K, 2 * n_t))]))
    A_ub = b_ub = None
    if problem.enable_tv:
        I_t = sp.identity(n_t, format="csr")
        rows.append(sp.hstack([st.D, sp.csr_matrix((n_t, 1)), -I_t, I_t]))
        r = np.zeros((1, n))
        r[0, n_x + 1: n_x + 1 + n_t] = st.tv_w
        r[0, n_x + 1 + n_t:] = st.tv_w
        A_ub, b_ub = r, np.array([st.tv_budget])
    A_eq = sp.vstack(rows, format="csr")
    lb = np.zeros(n)
    lb[ig] = gamma_min
    ub = np.full(n, np.inf)
    ub[:n_x] = 1.0
    return LinearProgram(c, A_ub, b_ub, A_eq, np.zeros(A_eq.shape[0]), lb, ub)


def solve_convex_design(
    problem: DesignProblem,
    omega0: tuple,
    phi: float | None = None,
    gamma_min: float = 0.0,
    n_phi: int = 24,
) -> ConvexDesign:
    """Design with both chromas in quadrature on one carrier.

    Parameters
    ----------
    problem : DesignProblem
        The anti-aliasing flag is ignored: a single off-baseband carrier
        already keeps the baseband chroma at zero.
    omega0 : (int, int)
        Carrier grid index ``(u, v)``; the carrier is ``(2 pi u / M, 2 pi v / N)``.
    phi : float, optional
        Carrier phase.  When omitted, ``n_phi`` phases in ``[0, pi)`` are
        tried and the one with the largest chroma sensitivity is kept.
    gamma_min : float
        Lower bound on the common chroma amplitude.

    Raises
    ------
    DesignInfeasible
        When no phase admits a feasible atom.
    """
    u, v = (int(omega0[0]) % problem.rows, int(omega0[1]) % problem.cols)
    if (u, v) == (0, 0):
        raise ValueError("the carrier must differ from the baseband")
    phis = [float(phi)] if phi is not None else [k * math.pi / n_phi for k in range(n_phi)]
    best = None
    for ph in phis:
        lp = _convex_lp(problem, (u, v), ph, gamma_min)
        try:
            res = lp_solve(lp, tol=1e-10)
        except LPInfeasible:
            continue
        x = res.x[: 3 * problem.K]
        atom = ColorAtom.from_x(x, problem.rows, problem.cols, name="convex", clip_tol=1e-6)
        gc = chrominance_sensitivity(atom, problem.basis)
        if best is None or gc > best[0] + 1e-12:
            best = (gc, ph, atom, float(res.x[3 * problem.K]))
    if best is None:
        raise DesignInfeasible("convex design is infeasible for every carrier phase")
    gc, ph, atom, gamma = best
    return ConvexDesign(
        atom=atom,
        gamma=gamma,
        phi=ph,
        omega=(u, v),
        gamma_l=luminance_sensitivity(atom, problem.basis),
        gamma_c=gc,
        tv=total_variation(atom, problem.deltas, normalize=problem.tv_normalized),
        residuals=replace(problem, enable_anti_alias=False).residuals(atom),
    )


# ---------------------------------------------------------------------------
# Multi-start


@dataclass
class MultiStartResult:
    best: ScaResult
    best_index: int
    results: list
    failures: dict


def _run_start(args):
    problem, x0, tol, max_iter = args
    try:
        return solve_sca(problem, x0, tol=tol, max_iter=max_iter)
    except (LPError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


def multi_start_design(
    problem: DesignProblem,
    n_starts: int,
    seed: int = 0,
    parallelism: int = 1,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> MultiStartResult:
    """Run SCA from Latin-hypercube starts and keep the best atom.

    The best start has the largest chroma sensitivity; ties go to the lower
    orthogonality penalty and then the lower total variation.  Starts are
    independent and deterministic, so the outcome does not depend on
    ``parallelism``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    starts = latin_hypercube(n_starts, 3 * problem.K, seed)
    jobs = [(problem, starts[i], tol, max_iter) for i in range(n_starts)]
    if parallelism > 1 and n_starts > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            outs = list(ex.map(_run_start, jobs))
    else:
        outs = [_run_start(j) for j in jobs]
    results, failures = [], {}
    for i, o in enumerate(outs):
        if isinstance(o, str):
            failures[i] = o
            results.append(None)
        else:
            results.append(o)
    ok = [i for i, r in enumerate(results) if r is not None]
    if not ok:
        detail = "; ".join(f"start {i}: {msg}" for i, msg in failures.items())
        raise RuntimeError(f"all starts failed ({detail})")
    best_i = min(ok, key=lambda i: (-results[i].gamma_c, results[i].rho, results[i].tv, i))
    return MultiStartResult(results[best_i], best_i, results, failures)
