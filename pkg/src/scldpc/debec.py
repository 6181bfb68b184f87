"""Density evolution for protograph ensembles on the erasure channel.

The per-edge erasure probabilities follow the flooding recursion: every
check-to-variable message erases unless all other incoming messages are
known, every variable-to-check message erases when the channel and all
other incoming check messages erase.  The decoder state is declared
converged when the a-posteriori erasure probability of every variable
node (channel times all incoming check messages) falls below a target;
tracking the posterior instead of raw variable-to-check messages keeps
degree-1 variable nodes (whose outgoing message never improves) from
masking an otherwise convergent ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._edgegraph import EdgeGraph, exclusive_prod
from .errors import DegenerateEnsemble, PositionStructureMissing
from .protograph import BaseMatrix

__all__ = [
    "DEState",
    "ThresholdResult",
    "de_init",
    "de_step",
    "de_posterior",
    "de_converges",
    "bec_threshold",
    "de_trace",
    "scalar_de_step",
    "default_i_max",
]

#: Posterior erasure probability below which the recursion counts as
#: converged to the zero fixed point.
P_TARGET = 1e-10

#: An iteration moving no edge by more than this is stuck at a nonzero
#: fixed point (the per-edge sequence is monotone nonincreasing, and
#: 1e5 iterations of sub-1e-16 progress could never reach the target).
_STALL_DELTA = 1e-16


def default_i_max(b: BaseMatrix) -> int:
    """Iteration budget: the coupled chain needs O(L) iterations for the
    reliable-boundary wave to cross it, with a generous near-threshold
    safety factor."""
    length = b.coupling["L"] if b.coupling else 1
    return max(20000, 1000 * length)


def channel_eps(b: BaseMatrix, eps: float) -> np.ndarray:
    """Per-variable channel erasure probability; punctured nodes are
    never observed and sit at exactly 1."""
    out = np.full(b.n_v, float(eps))
    out[np.fromiter(b.punctured, dtype=bool)] = 1.0
    return out


@dataclass(frozen=True)
class DEState:
    """Per-edge message statistics of one density-evolution run.

    ``p`` holds variable-to-check and ``q`` check-to-variable erasure
    probabilities, both indexed by edge instance (the two labelings of
    the same edge set).
    """

    graph: EdgeGraph
    p: np.ndarray
    q: np.ndarray
    eps: np.ndarray  # per-variable channel erasure probability
    iteration: int = 0


def de_init(b: BaseMatrix, eps: float, graph: EdgeGraph | None = None) -> DEState:
    g = graph or EdgeGraph.from_base(b)
    eps_v = channel_eps(b, eps)
    p0 = eps_v[g.edge_var]
    return DEState(g, p0, np.ones(g.n_edges), eps_v, iteration=0)


def _iterate(g: EdgeGraph, p: np.ndarray, eps_edge: np.ndarray):
    """One flooding iteration; returns (new p, new q)."""
    one_minus = 1.0 - g.gather_checks(p, fill=0.0)
    q_pad = 1.0 - exclusive_prod(one_minus)
    q = q_pad[g.edge_check, g.check_slot]
    q_v = g.gather_vars(q, fill=1.0)
    p_new = eps_edge * exclusive_prod(q_v)[g.edge_var, g.var_slot]
    return p_new, q


def de_step(state: DEState, b: BaseMatrix | None = None) -> DEState:
    """One full parallel iteration: all checks update, then all variables."""
    g = state.graph
    p_new, q = _iterate(g, state.p, state.eps[g.edge_var])
    return replace(state, p=p_new, q=q, iteration=state.iteration + 1)


def de_posterior(state: DEState) -> np.ndarray:
    """A-posteriori erasure probability per variable node: the channel
    erasure times the product over all incoming check messages."""
    g = state.graph
    q_v = g.gather_vars(state.q, fill=1.0)
    return state.eps * np.prod(q_v, axis=1)


def de_converges(
    b: BaseMatrix,
    eps: float,
    p_target: float = P_TARGET,
    i_max: int | None = None,
    graph: EdgeGraph | None = None,
) -> tuple[bool, int]:
    """Run the recursion at channel parameter eps.

    Returns (converged, iterations used).  Non-convergence (hitting the
    iteration budget or stalling at a nonzero fixed point) is a valid
    False result, not an error.
    """
    g = graph or EdgeGraph.from_base(b)
    if i_max is None:
        i_max = default_i_max(b)
    eps_v = channel_eps(b, eps)
    eps_edge = eps_v[g.edge_var]
    p = eps_edge.copy()
    for it in range(1, i_max + 1):
        p_new, q = _iterate(g, p, eps_edge)
        q_v = g.gather_vars(q, fill=1.0)
        posterior = eps_v * np.prod(q_v, axis=1)
        if posterior.max() < p_target:
            return True, it
        if np.max(p - p_new) < _STALL_DELTA:
            return False, it
        p = p_new
    return False, i_max


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    bracket: tuple[float, float]
    iterations_used: int
    converged: bool

    def __float__(self) -> float:
        return self.threshold


def bec_threshold(
    b: BaseMatrix,
    tol: float = 1e-4,
    p_target: float = P_TARGET,
    i_max: int | None = None,
) -> ThresholdResult:
    """Bisect for the largest channel erasure probability the recursion
    survives, to within tol.  The returned bracket always straddles the
    threshold of the recursion as implemented (p_target, i_max included).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = EdgeGraph.from_base(b)
    ok0, _ = de_converges(b, 0.0, p_target, i_max, graph=g)
    if not ok0:
        raise DegenerateEnsemble(
            "density evolution fails even on a perfect channel "
            "(punctured-only stopping structure?)"
        )
    lo, hi = 0.0, 1.0
    total_iters = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, its = de_converges(b, mid, p_target, i_max, graph=g)
        total_iters += its
        if ok:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(
        threshold=0.5 * (lo + hi),
        bracket=(lo, hi),
        iterations_used=total_iters,
        converged=True,
    )


def de_trace(
    b: BaseMatrix, eps: float, iteration_list, p_target: float = 0.0
) -> dict[int, np.ndarray]:
    """Average posterior erasure probability per time position at the
    requested iteration counts (the decoding-wave profile).

    Requires a matrix built by one of the coupling constructors; raises
    ``PositionStructureMissing`` otherwise.
    """
    positions = b.positions
    if positions is None:
        raise PositionStructureMissing("de_trace needs per-column time positions")
    wanted = sorted(set(int(i) for i in iteration_list))
    if any(i < 1 for i in wanted):
        raise ValueError("iteration counts must be >= 1")
    n_pos = int(positions.max()) + 1
    counts = np.bincount(positions, minlength=n_pos)

    state = de_init(b, eps)
    out: dict[int, np.ndarray] = {}
    for it in range(1, wanted[-1] + 1):
        state = de_step(state)
        if it in wanted:
            pb = de_posterior(state)
            out[it] = np.bincount(positions, weights=pb, minlength=n_pos) / counts
    return out


def scalar_de_step(p: float | np.ndarray, eps: float, J: int, K: int):
    """One iteration of the unstructured (J,K)-regular recursion
    p <- eps * (1 - (1-p)^(K-1))^(J-1); the independent oracle for
    all-ones regular protographs."""
    return eps * (1.0 - (1.0 - p) ** (K - 1)) ** (J - 1)
