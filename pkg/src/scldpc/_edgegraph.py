"""Edge-instance indexing shared by the message-passing recursions.

Multi-edges are expanded into distinct edge instances.  Each instance is
addressable from the check side (row, slot) and the variable side
(column, slot); the padded index tables let one numpy gather collect all
messages incident to every node, and the exclusive prefix/suffix
products and sums implement the leave-one-out combining rules without
divisions (so zeros and exact 1.0 probabilities stay exact).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .protograph import BaseMatrix


def exclusive_prod(a: np.ndarray) -> np.ndarray:
    """Per-row products of all entries except the one at each slot."""
    left = np.cumprod(a, axis=1)
    right = np.cumprod(a[:, ::-1], axis=1)[:, ::-1]
    out = np.ones_like(a)
    out[:, 1:] = left[:, :-1]
    out[:, :-1] *= right[:, 1:]
    return out


def exclusive_sum(a: np.ndarray) -> np.ndarray:
    """Per-row sums of all entries except the one at each slot."""
    left = np.cumsum(a, axis=1)
    right = np.cumsum(a[:, ::-1], axis=1)[:, ::-1]
    out = np.zeros_like(a)
    out[:, 1:] = left[:, :-1]
    out[:, :-1] += right[:, 1:]
    return out


@dataclass(frozen=True, eq=False)
class EdgeGraph:
    """Expanded edge-instance view of a base matrix."""

    base: BaseMatrix
    n_edges: int
    edge_check: np.ndarray  # row index per edge instance
    edge_var: np.ndarray  # column index per edge instance
    check_pad: np.ndarray  # (n_c, max check degree) edge ids, sentinel = n_edges
    var_pad: np.ndarray  # (n_v, max var degree) edge ids, sentinel = n_edges
    check_slot: np.ndarray  # per edge: its slot inside check_pad
    var_slot: np.ndarray  # per edge: its slot inside var_pad

    @classmethod
    def from_base(cls, b: BaseMatrix) -> "EdgeGraph":
        rows, cols = np.nonzero(b.entries)
        mult = b.entries[rows, cols]
        edge_check = np.repeat(rows, mult).astype(np.int64)
        edge_var = np.repeat(cols, mult).astype(np.int64)
        ne = edge_check.size

        cdeg = b.check_degrees
        vdeg = b.var_degrees
        max_c = int(cdeg.max()) if ne else 0
        max_v = int(vdeg.max())

        check_pad = np.full((b.n_c, max_c), ne, dtype=np.int64)
        var_pad = np.full((b.n_v, max_v), ne, dtype=np.int64)
        check_slot = np.empty(ne, dtype=np.int64)
        var_slot = np.empty(ne, dtype=np.int64)
        c_fill = np.zeros(b.n_c, dtype=np.int64)
        v_fill = np.zeros(b.n_v, dtype=np.int64)
        for e in range(ne):
            c, v = edge_check[e], edge_var[e]
            check_pad[c, c_fill[c]] = e
            check_slot[e] = c_fill[c]
            c_fill[c] += 1
            var_pad[v, v_fill[v]] = e
            var_slot[e] = v_fill[v]
            v_fill[v] += 1

        for arr in (edge_check, edge_var, check_pad, var_pad, check_slot, var_slot):
            arr.flags.writeable = False
        return cls(b, ne, edge_check, edge_var, check_pad, var_pad, check_slot, var_slot)

    def gather_checks(self, per_edge: np.ndarray, fill: float) -> np.ndarray:
        """Arrange per-edge values as a (n_c, max degree) padded table."""
        ext = np.append(per_edge, fill)
        return ext[self.check_pad]

    def gather_vars(self, per_edge: np.ndarray, fill: float) -> np.ndarray:
        ext = np.append(per_edge, fill)
        return ext[self.var_pad]
