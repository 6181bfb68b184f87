"""Asymptotic ensemble-average weight enumerators for protographs.

The normalized log of the average number of weight-d codewords,
r(delta) with delta = d / (M n_t), is the maximum over per-variable
weight fractions tau of

    [ sum_c s_c(tau at c's edge instances)
      - sum_v (deg(v) - 1) H(tau_v) ] / n_t

subject to the transmitted fractions averaging to delta; punctured
fractions are free optimization variables.  H is the natural-log binary
entropy and s_c is the exponential growth rate of the number of local
check configurations with even column overlap,

    s_c(tau) = inf_{x > 0} [ ln( (prod(1+x_j) + prod(1-x_j)) / 2 )
                             - sum_j tau_j ln x_j ],

a smooth convex problem solved for all checks at once by a damped
marginal-matching iteration in log coordinates.  The first positive
zero crossing of r gives the minimum-distance growth rate; evaluating
it on terminated and tail-biting chains of period T yields two-sided
bounds on the free-distance growth rate of the unterminated ensemble.

An exact finite-M enumerator (dynamic programming over check-row
parities, exact rational arithmetic) provides the independent oracle
for this machinery at toy scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.optimize import minimize

from .errors import OptimizerFailure, ScaleExceeded
from .protograph import BaseMatrix, EdgeSpreading, couple_tailbiting, couple_terminated

__all__ = [
    "check_exponent",
    "SpectralShape",
    "spectral_shape",
    "min_distance_growth_rate",
    "FreeDistanceBounds",
    "free_distance_bounds",
    "gv_bound",
    "exact_enumerator",
    "binary_entropy",
    "ShapeProblem",
    "MAX_OUTER_DIM",
]

_TAU_LO = 1e-9  # box bound for the outer optimizer
_TAU_ZERO = 1e-12  # fractions below this count as exactly zero
# Legitimate optima satisfy |ln x| <= ln((1-lo)/lo)/2 + slack ~ 21 at the
# tau box bounds; iterates beyond this are running off to an infimum at
# infinity (infeasible weight pattern).
_U_DIVERGE = 26.0
_GRAD_TOL = 1e-12  # inner stationarity |mu - tau|
_NEG_CLIP = -1e9  # barrier value for infeasible weight patterns

#: Largest protograph (variable-node count) the outer optimizer runs on;
#: longer coupled chains get the scaled-convergence extrapolation.
MAX_OUTER_DIM = 60


def binary_entropy(t):
    """Natural-log binary entropy with H(0) = H(1) = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inner = (t > 0) & (t < 1)
    ti = t[inner]
    out[inner] = -ti * np.log(ti) - (1 - ti) * np.log1p(-ti)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------
# inner problem: the convex exponent of one check, batched over checks
# ---------------------------------------------------------------------


def _exclusive_row_sum(a: np.ndarray) -> np.ndarray:
    left = np.cumsum(a, axis=1)
    right = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
    out = np.zeros_like(a)
    out[:, 1:] = left[:, :-1]
    out[:, :-1] += right[:, 1:]
    return out


class _CheckBatch:
    """Padded (check x group) view: group = variable at a check with its
    edge multiplicity.  Instances of a group share one weight fraction
    and, by symmetry of the inner problem, one optimizer coordinate."""

    def __init__(self, b: BaseMatrix):
        rows = [np.flatnonzero(b.entries[i]) for i in range(b.n_c)]
        gmax = max((len(r) for r in rows), default=1)
        self.n_c = b.n_c
        self.gmax = max(gmax, 1)
        self.var = np.zeros((self.n_c, self.gmax), dtype=np.int64)
        self.mult = np.zeros((self.n_c, self.gmax))
        for i, cols in enumerate(rows):
            self.var[i, : len(cols)] = cols
            self.mult[i, : len(cols)] = b.entries[i, cols]
        self.pad = self.mult == 0
        self._warm: np.ndarray | None = None

    def _evaluate(self, u, m, tau_term, sign_par, active):
        """Objective, per-group marginal mu, and weights at points u.

        All products are carried in sign-tracked logs so x = 1 and
        near-boundary patterns evaluate exactly.
        """
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ln_a1 = np.logaddexp(0.0, u)  # ln(1+x)
            ln_b1 = np.where(
                u < 0, np.log1p(-np.exp(u)), u + np.log1p(-np.exp(-np.abs(u)))
            )  # ln|1-x|; -inf at u = 0
            neg = (u > 0).astype(float)  # sign(1-x) < 0
            a_term = np.where(active, m * ln_a1, 0.0)
            b_term = np.where(active, m * ln_b1, 0.0)
            b_term = np.where(np.isnan(b_term), 0.0, b_term)  # pads with u=0
            lnA = a_term.sum(axis=1)
            lnB = b_term.sum(axis=1)
            negsum = np.where(active, m * neg, 0.0)
            sgnB = np.where(negsum.sum(axis=1) % 2 == 0, 1.0, -1.0)
            z = sign_par * sgnB * np.exp(lnB - lnA)
            ln_g = lnA + np.log1p(z) - np.log(2.0)
            w_a = 1.0 / (1.0 + z)

            # exclusive products of (1-x): magnitude and sign per group
            excl_b = _exclusive_row_sum(b_term) + np.where(
                active & (m > 1), (m - 1.0) * ln_b1, 0.0
            )
            excl_neg = _exclusive_row_sum(negsum) + np.where(
                active & (m > 1), (m - 1.0) * neg, 0.0
            )
            sgn_excl = np.where(excl_neg % 2 == 0, 1.0, -1.0)
            r = 1.0 / (1.0 + np.exp(-u))
            cross = sgn_excl * np.exp(u + excl_b - lnA)
            mu = w_a[:, None] * (r - sign_par[:, None] * cross)
            f = ln_g - tau_term(u)
        return f, mu, ln_g

    def solve(self, tau_v: np.ndarray, max_iter: int = 500):
        """Exponent of every check at the given variable fractions.

        Returns (s per check, u* per group, ok).  Checks whose weight
        pattern admits no even configuration get s = -inf; ok is False
        only if the iteration failed to settle anywhere.
        """
        tau = tau_v[self.var]
        zero = self.pad | (tau <= _TAU_ZERO)
        one = (~self.pad) & (tau >= 1.0 - _TAU_ZERO)
        active = ~(zero | one)
        parity = np.where(one, self.mult, 0.0).sum(axis=1).astype(np.int64) % 2
        sign_par = np.where(parity == 0, 1.0, -1.0)
        m = np.where(active, self.mult, 0.0)
        t = np.where(active, np.clip(tau, _TAU_ZERO, 1.0 - _TAU_ZERO), 0.5)
        ln_t = np.log(t)
        mt = m * t

        def tau_term(u):
            return (mt * u).sum(axis=1)

        empty = ~active.any(axis=1)
        s_out = np.where(sign_par > 0, 0.0, -np.inf)  # value of empty checks

        if self._warm is not None:
            u = np.where(active, self._warm, 0.0)
        else:
            u = np.where(active, np.log(t) - np.log1p(-t), 0.0)

        live = ~empty
        eta = np.ones(self.n_c)
        f, mu, _ = self._evaluate(u, m, tau_term, sign_par, active)
        infeasible = np.zeros(self.n_c, dtype=bool)
        stale = np.zeros(self.n_c, dtype=np.int64)

        for _ in range(max_iter):
            if not live.any():
                break
            grad_gap = np.where(active, np.abs(mu - t), 0.0).max(axis=1)
            done = live & (grad_gap < _GRAD_TOL)
            live = live & ~done
            if not live.any():
                break
            step = np.where(active, ln_t - np.log(np.clip(mu, 1e-300, None)), 0.0)
            u_try = u + (eta * live)[:, None] * step
            f_try, mu_try, _ = self._evaluate(u_try, m, tau_term, sign_par, active)
            better = live & (f_try <= f + 1e-14)
            accept = better[:, None] & active
            u = np.where(accept, u_try, u)
            stale = np.where(live & (np.abs(f_try - f) < 1e-15), stale + 1, 0)
            f = np.where(better, f_try, f)
            mu = np.where(accept, mu_try, mu)
            eta = np.where(better, np.minimum(1.0, eta * 1.25), eta * 0.5)
            diverged = live & (np.abs(np.where(active, u, 0.0)).max(axis=1) > _U_DIVERGE)
            infeasible |= diverged
            # value has stopped moving: boundary supremum, accept as-is
            live = live & ~diverged & (stale < 12)

        grad_gap = np.where(active, np.abs(mu - t), 0.0).max(axis=1)
        unresolved = live & (grad_gap > 1e-7)
        s_out = np.where(empty, s_out, f)
        s_out = np.where(infeasible, -np.inf, s_out)
        self._warm = u.copy()
        return s_out, u, not unresolved.any()


def check_exponent(taus, multiplicities=None) -> float:
    """Exponent of the number of even-overlap local configurations of a
    single check whose edge instances carry weight fractions ``taus``.

    ``multiplicities`` groups tied instances (default: all distinct).
    Returns -inf for infeasible patterns, e.g. a degree-2 check with two
    different fractions.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        return 0.0
    if ((taus < 0) | (taus > 1)).any():
        raise ValueError("weight fractions live in [0, 1]")
    mult = (
        np.ones(taus.size, dtype=np.int64)
        if multiplicities is None
        else np.asarray(multiplicities, dtype=np.int64)
    )
    batch = _CheckBatch(BaseMatrix(mult[None, :]))
    s, _, ok = batch.solve(taus)
    if not ok:
        raise OptimizerFailure("check exponent iteration did not converge")
    return float(s[0])


# ---------------------------------------------------------------------
# outer problem: maximize the growth-rate functional over tau
# ---------------------------------------------------------------------


class ShapeProblem:
    """Spectral-shape evaluations for one base matrix, with continuation
    between nearby delta values."""

    def __init__(self, b: BaseMatrix):
        if b.n_v > MAX_OUTER_DIM:
            raise ScaleExceeded(
                f"outer optimization supports n_v <= {MAX_OUTER_DIM}, got {b.n_v}"
            )
        self.b = b
        self.batch = _CheckBatch(b)
        self.vdeg = b.var_degrees.astype(float)
        self.transmitted = ~np.fromiter(b.punctured, dtype=bool)
        self.n_t = b.n_t
        self._last_tau: np.ndarray | None = None
        # linear even-overlap cuts: sum of check fractions >= 2x each group
        rows = []
        for c in range(self.batch.n_c):
            s_row = np.zeros(b.n_v)
            groups = []
            for g in range(self.batch.gmax):
                if self.batch.pad[c, g]:
                    continue
                s_row[self.batch.var[c, g]] += self.batch.mult[c, g]
                groups.append(self.batch.var[c, g])
            for v in groups:
                row = s_row.copy()
                row[v] -= 2.0
                rows.append(row)
        self._ineq = np.array(rows) if rows else np.zeros((0, b.n_v))

    # -- objective ------------------------------------------------------

    def functional(self, tau: np.ndarray):
        """Growth-rate functional F and its gradient at tau; infeasible
        patterns return a steep barrier instead."""
        s, u_star, ok = self.batch.solve(tau)
        if not ok:
            raise OptimizerFailure(
                "inner exponent solver failed", {"tau": tau.tolist()}
            )
        if np.isneginf(s).any():
            viol = np.maximum(0.0, -(self._ineq @ tau))
            grad = -(self._ineq.T @ np.where(viol > 0, 1.0, 0.0))
            return _NEG_CLIP * (1.0 + viol.sum()), _NEG_CLIP * 1e-3 * grad
        t = np.clip(tau, _TAU_ZERO, 1 - _TAU_ZERO)
        F = s.sum() - ((self.vdeg - 1.0) * binary_entropy(t)).sum()
        a = np.zeros(self.b.n_v)
        np.add.at(
            a,
            self.batch.var[~self.batch.pad],
            (self.batch.mult * u_star)[~self.batch.pad],
        )
        grad = -a - (self.vdeg - 1.0) * (np.log1p(-t) - np.log(t))
        return F, grad

    # -- constrained maximization at fixed delta -------------------------

    def _starts(self, delta: float) -> list[np.ndarray]:
        starts = []
        if self._last_tau is not None:
            prev = self._last_tau
            s = prev.copy()
            tot = s[self.transmitted].sum()
            if tot > 0:
                s[self.transmitted] *= delta * self.n_t / tot
            starts.append(np.clip(s, _TAU_LO, 1 - _TAU_LO))
        uniform = np.full(self.b.n_v, delta)
        starts.append(np.clip(uniform, _TAU_LO, 1 - _TAU_LO))
        positions = self.b.positions
        if positions is not None:
            L = int(positions.max()) + 1
            per = self.b.coupling["w"] + 1
            widths = sorted(
                {
                    w
                    for w in (
                        max(2, 3 * per),
                        max(2, 4 * per),
                        11,
                        12,
                        13,
                        L // 2,
                        L - 1,
                    )
                    if 2 <= w < L
                }
            )
            for width in widths:
                for start in {0, (L - width) // 2}:
                    inside = (positions >= start) & (positions < start + width)
                    if not inside[self.transmitted].any():
                        continue
                    tau = np.full(self.b.n_v, _TAU_LO)
                    lvl = delta * self.n_t / inside[self.transmitted].sum()
                    tau[inside] = min(lvl, 1 - _TAU_LO)
                    starts.append(tau)
        return starts

    def r_of_delta(self, delta: float) -> float:
        """r(delta) in nats per transmitted bit."""
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        target = delta * self.n_t

        def neg(tau):
            F, g = self.functional(tau)
            return -F, -g

        cons = [
            {
                "type": "eq",
                "fun": lambda t: np.array([t[self.transmitted].sum() - target]),
                "jac": lambda t: self.transmitted.astype(float)[None, :],
            }
        ]
        if self._ineq.size:
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda t: self._ineq @ t,
                    "jac": lambda t: self._ineq,
                }
            )
        bounds = [(_TAU_LO, 1 - _TAU_LO)] * self.b.n_v
        best_val, best_tau = -np.inf, None
        failures = []
        for start in self._starts(delta):
            s = start.copy()
            tot = s[self.transmitted].sum()
            if tot > 0:
                s[self.transmitted] = np.clip(
                    s[self.transmitted] * target / tot, _TAU_LO, 1 - _TAU_LO
                )
            try:
                res = minimize(
                    neg,
                    s,
                    jac=True,
                    method="SLSQP",
                    bounds=bounds,
                    constraints=cons,
                    options={"maxiter": 300, "ftol": 1e-12},
                )
            except OptimizerFailure as err:
                failures.append(str(err))
                continue
            # accept the point the solver reached if it is feasible
            x = np.clip(res.x, _TAU_LO, 1 - _TAU_LO)
            if abs(x[self.transmitted].sum() - target) > 1e-7 * max(1.0, target):
                continue
            val, _ = self.functional(x)
            if val > best_val:
                best_val, best_tau = val, x
        if best_tau is None:
            raise OptimizerFailure(
                f"no feasible optimum at delta={delta}", {"failures": failures}
            )
        self._last_tau = best_tau
        return best_val / self.n_t


@dataclass(frozen=True)
class SpectralShape:
    """Sampled spectral shape with its first positive zero crossing."""

    grid: np.ndarray
    r: np.ndarray
    delta_min: float | None
    scaled_lw: float | None = None  # delta_min * L / (w+1)
    scaled_nt: float | None = None  # n_t * delta_min
    extrapolated: bool = False


def _crossing_scan(
    problem: ShapeProblem,
    step: float = 1e-3,
    delta_hi: float = 0.5,
    refine_tol: float = 1e-6,
    delta_start: float = 1e-3,
) -> float | None:
    """First positive zero crossing of r, or None if r never turns
    positive on (0, delta_hi]."""
    lo = None
    d = delta_start
    while d <= delta_hi + 1e-12:
        r = problem.r_of_delta(d)
        if r >= 0:
            if lo is None:
                # positive already at the first sample: no negative dip
                return None
            hi = d
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                if problem.r_of_delta(mid) >= 0:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        lo = d
        d += step
    return None


def min_distance_growth_rate(
    b: BaseMatrix, step: float = 1e-3, refine_tol: float = 1e-6
) -> float | None:
    """Minimum-distance growth rate: the first positive zero crossing of
    the spectral shape, refined by bisection; None when the shape never
    turns positive below delta = 1/2."""
    return _crossing_scan(ShapeProblem(b), step=step, refine_tol=refine_tol)


def spectral_shape(b: BaseMatrix, grid) -> SpectralShape:
    """Evaluate r on an ascending grid of delta values and locate the
    growth rate; scaled variants are filled in when the matrix carries
    coupling metadata."""
    grid = np.asarray(sorted(float(g) for g in grid))
    if grid.size == 0 or grid[0] <= 0 or grid[-1] > 1:
        raise ValueError("grid must be ascending within (0, 1]")
    problem = ShapeProblem(b)
    r = np.array([problem.r_of_delta(d) for d in grid])
    problem._last_tau = None
    dmin = _crossing_scan(problem)
    scaled_lw = scaled_nt = None
    if dmin is not None and b.coupling is not None:
        meta = b.coupling
        scaled_lw = dmin * meta["L"] / (meta["w"] + 1)
        scaled_nt = dmin * b.n_t
    return SpectralShape(grid, r, dmin, scaled_lw, scaled_nt)


@dataclass(frozen=True)
class FreeDistanceBounds:
    """Two-sided bounds on the free-distance growth rate at period T."""

    T: int
    lower: float  # tail-biting growth rate, scaled by T/(w+1)
    upper: float  # terminated growth rate, scaled by T/(w+1)
    coincide: bool

    COINCIDE_TOL = 0.002


def free_distance_bounds(s: EdgeSpreading, T: int) -> FreeDistanceBounds:
    """Scaled growth rates of the period-T terminated (upper bound) and
    tail-biting (lower bound) chains."""
    if T <= s.w:
        raise ValueError("period T must exceed the coupling width")
    scale = T / (s.w + 1)
    upper = min_distance_growth_rate(couple_terminated(s, T))
    lower = min_distance_growth_rate(couple_tailbiting(s, T))
    if upper is None or lower is None:
        raise OptimizerFailure(f"no growth-rate crossing found at T={T}")
    up, lo = upper * scale, lower * scale
    return FreeDistanceBounds(
        T=T, lower=lo, upper=up, coincide=abs(up - lo) <= FreeDistanceBounds.COINCIDE_TOL
    )


def gv_bound(rate: float) -> float:
    """Gilbert-Varshamov distance growth rate: the delta in [0, 1/2]
    with H_2(delta) = 1 - R (binary entropy in bits)."""
    if not 0 <= rate < 1:
        raise ValueError("rate must lie in [0, 1)")
    target = 1.0 - rate
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) / np.log(2.0) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------
# exact finite-M oracle
# ---------------------------------------------------------------------


def _even_row_configs(col_weights: tuple[int, ...], M: int) -> int:
    """Number of M x k binary matrices with the given column sums and
    every row sum even: dynamic programming over the count of rows with
    odd partial parity."""
    state = {0: 1}
    for w in col_weights:
        new: dict[int, int] = {}
        for t, ways in state.items():
            # place a ones into odd-parity rows, w - a into even ones
            for a in range(max(0, w - (M - t)), min(t, w) + 1):
                t2 = t - a + (w - a)
                cnt = ways * comb(t, a) * comb(M - t, w - a)
                if cnt:
                    new[t2] = new.get(t2, 0) + cnt
        state = new
    return state.get(0, 0)


def exact_enumerator(b: BaseMatrix, M: int, d: int) -> Fraction:
    """Exact ensemble-average number of weight-d codewords at lifting
    factor M, as a rational.

    The weight d counts transmitted positions only; punctured node
    weights are summed over.  Supported at oracle scale (M <= 8,
    n_v <= 8, entries <= 2) -- raises ``ScaleExceeded`` beyond.
    """
    if M > 8 or b.n_v > 8 or int(b.entries.max()) > 2:
        raise ScaleExceeded("exact enumeration supports M <= 8, n_v <= 8, entries <= 2")
    if not 0 <= d <= M * b.n_t:
        return Fraction(0)

    transmitted = [j for j in range(b.n_v) if not b.punctured[j]]
    punctured = [j for j in range(b.n_v) if b.punctured[j]]
    vdeg = b.var_degrees

    total = Fraction(0)
    weights = np.zeros(b.n_v, dtype=np.int64)

    def check_product() -> Fraction:
        num = 1
        for i in range(b.n_c):
            cols = np.flatnonzero(b.entries[i])
            local = []
            for j in cols:
                local.extend([int(weights[j])] * int(b.entries[i, j]))
            n = _even_row_configs(tuple(local), M)
            if n == 0:
                return Fraction(0)
            num *= n
        den = 1
        for j in range(b.n_v):
            den *= comb(M, int(weights[j])) ** (int(vdeg[j]) - 1)
        return Fraction(num, den)

    def rec_punctured(k: int):
        nonlocal total
        if k == len(punctured):
            total += check_product()
            return
        for wv in range(M + 1):
            weights[punctured[k]] = wv
            rec_punctured(k + 1)

    def rec_transmitted(k: int, remaining: int):
        if k == len(transmitted):
            if remaining == 0:
                rec_punctured(0)
            return
        head = transmitted[k]
        lo = max(0, remaining - M * (len(transmitted) - k - 1))
        for wv in range(lo, min(M, remaining) + 1):
            weights[head] = wv
            rec_transmitted(k + 1, remaining - wv)

    rec_transmitted(0, d)
    return total
