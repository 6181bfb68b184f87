"""Protograph base matrices, edge spreadings, and spatial coupling.

A protograph is described by its nonnegative integer biadjacency matrix
(entry = number of parallel edges between a check and a variable node)
plus a per-variable puncturing pattern.  Coupling a chain of L copies is
done through an edge spreading: w+1 component matrices B_0..B_w that sum
to the uncoupled base matrix.  Terminated and tail-biting chains are
built here; the built-in families (the regular gcd spreadings, the
repeat-accumulate style irregular family and its rate-extended variants,
and the width-1 multi-edge spreading of the (3,6) graph) are registered
as constructors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import (
    CouplingTooShort,
    DimensionMismatch,
    NoSpreadingDefined,
    NonPositiveRateWarning,
)

__all__ = [
    "BaseMatrix",
    "EdgeSpreading",
    "CoupledSpec",
    "SpreadingReport",
    "design_rate",
    "validate_spreading",
    "couple_terminated",
    "couple_tailbiting",
    "terminated_rate",
    "family_cjk",
    "family_arja",
    "family_ar4ja",
    "family_c36_alt",
    "register_cjk_fallback",
]


def _as_int_matrix(entries) -> np.ndarray:
    arr = np.asarray(entries)
    if arr.ndim != 2:
        raise ValueError(f"base matrix must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError("base matrix entries must be integers")
        arr = rounded
    arr = arr.astype(np.int64, copy=True)
    if (arr < 0).any():
        raise ValueError("base matrix entries must be nonnegative")
    return arr


@dataclass(frozen=True, eq=False)
class BaseMatrix:
    """Nonnegative integer biadjacency matrix of a protograph.

    Parameters
    ----------
    entries : array_like of int, shape (n_c, n_v)
        Edge multiplicities; entry (i, j) counts edges between check i
        and variable j.
    punctured : sequence of bool, optional
        True marks a variable node whose code bits are never transmitted.
    coupling : dict, optional
        Metadata attached by the coupling constructors: keys ``w``, ``L``,
        ``b_v``, ``b_c`` and ``kind``.  Analysis code uses it to recover
        per-column time positions.

    All-zero rows are permitted (a terminated chain can leave a boundary
    check disconnected) but all-zero columns are not: every variable node
    must have degree at least one.
    """

    entries: np.ndarray
    punctured: tuple[bool, ...] = ()
    coupling: dict | None = None

    def __post_init__(self):
        arr = _as_int_matrix(self.entries)
        punct = tuple(bool(p) for p in self.punctured)
        if not punct:
            punct = (False,) * arr.shape[1]
        if len(punct) != arr.shape[1]:
            raise ValueError("puncture pattern length must equal column count")
        if arr.shape[1] == 0 or (arr.sum(axis=0) == 0).any():
            raise ValueError("every variable node needs degree >= 1")
        if sum(not p for p in punct) < 1:
            raise ValueError("at least one variable node must be transmitted")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "punctured", punct)

    # -- basic counts -------------------------------------------------

    @property
    def n_c(self) -> int:
        return self.entries.shape[0]

    @property
    def n_v(self) -> int:
        return self.entries.shape[1]

    @property
    def n_t(self) -> int:
        """Number of transmitted variable nodes."""
        return sum(not p for p in self.punctured)

    @property
    def var_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def check_degrees(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def zero_rows(self) -> np.ndarray:
        """Indices of all-zero check rows (boundary artifacts)."""
        return np.flatnonzero(self.check_degrees == 0)

    @property
    def n_c_effective(self) -> int:
        """Check count excluding all-zero rows; this is the count that
        enters the design rate."""
        return int(np.count_nonzero(self.check_degrees))

    # -- coupling metadata --------------------------------------------

    @property
    def positions(self) -> np.ndarray | None:
        """Per-column time position, or None for an uncoupled matrix."""
        if self.coupling is None:
            return None
        b_v = self.coupling["b_v"]
        return np.arange(self.n_v) // b_v

    @property
    def check_positions(self) -> np.ndarray | None:
        if self.coupling is None:
            return None
        b_c = self.coupling["b_c"]
        return np.arange(self.n_c) // b_c

    def __eq__(self, other) -> bool:
        if not isinstance(other, BaseMatrix):
            return NotImplemented
        return (
            np.array_equal(self.entries, other.entries)
            and self.punctured == other.punctured
        )

    def __repr__(self) -> str:
        kind = "" if self.coupling is None else f", {self.coupling['kind']}"
        return f"BaseMatrix({self.n_c}x{self.n_v}, n_t={self.n_t}{kind})"


def design_rate(b: BaseMatrix) -> Fraction:
    """Exact design rate (n_v - n_c) / n_t of a protograph.

    All-zero check rows do not constrain the code and are excluded from
    n_c.  A nonpositive rate is signalled with ``NonPositiveRateWarning``
    rather than an exception: degenerate ensembles remain analyzable.
    """
    rate = Fraction(b.n_v - b.n_c_effective, b.n_t)
    if rate <= 0:
        warnings.warn(
            f"design rate {rate} is not positive", NonPositiveRateWarning, stacklevel=2
        )
    return rate


@dataclass(frozen=True, eq=False)
class EdgeSpreading:
    """A coupling-width-w edge spreading: component matrices B_0..B_w.

    The components are plain integer arrays (they may contain all-zero
    rows or columns; only their sum must be a valid protograph).  All
    components share one puncture pattern.
    """

    components: tuple[np.ndarray, ...]
    punctured: tuple[bool, ...] = ()
    name: str = ""

    def __post_init__(self):
        comps = tuple(_as_int_matrix(c) for c in self.components)
        if not comps:
            raise ValueError("need at least one component matrix")
        shape = comps[0].shape
        if any(c.shape != shape for c in comps):
            raise DimensionMismatch("component matrices must share one shape")
        punct = tuple(bool(p) for p in self.punctured)
        if not punct:
            punct = (False,) * shape[1]
        if len(punct) != shape[1]:
            raise ValueError("puncture pattern length must equal column count")
        for c in comps:
            c.flags.writeable = False
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "punctured", punct)

    @property
    def w(self) -> int:
        return len(self.components) - 1

    @property
    def b_c(self) -> int:
        return self.components[0].shape[0]

    @property
    def b_v(self) -> int:
        return self.components[0].shape[1]

    @property
    def nu_per_m(self) -> int:
        """Constraint length per unit lifting factor, (w+1)*b_v."""
        return (self.w + 1) * self.b_v

    def component_sum(self) -> np.ndarray:
        return np.sum(np.stack(self.components), axis=0)

    def uncoupled(self) -> BaseMatrix:
        """The block protograph this spreading was derived from."""
        return BaseMatrix(self.component_sum(), self.punctured)

    def permuted(self, row_perm, col_perm) -> "EdgeSpreading":
        """Apply one row and one column permutation uniformly to all
        components (graph structure is unchanged up to relabeling)."""
        rp = np.asarray(row_perm)
        cp = np.asarray(col_perm)
        comps = tuple(c[np.ix_(rp, cp)] for c in self.components)
        punct = tuple(self.punctured[j] for j in cp)
        return EdgeSpreading(comps, punct, name=self.name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSpreading):
            return NotImplemented
        return (
            len(self.components) == len(other.components)
            and all(
                np.array_equal(a, b)
                for a, b in zip(self.components, other.components)
            )
            and self.punctured == other.punctured
        )


@dataclass(frozen=True)
class SpreadingReport:
    """Outcome of validating an edge spreading against a base matrix."""

    ok: bool
    violations: tuple[tuple[int, int, int, int], ...] = ()
    # each violation is (row, col, expected, actual component sum)

    def __bool__(self) -> bool:
        return self.ok


def validate_spreading(b: BaseMatrix, s: EdgeSpreading) -> SpreadingReport:
    """Check the coupling condition: the components must sum to B.

    Returns a report listing every offending cell; raises
    ``DimensionMismatch`` if the shapes cannot be compared at all.
    """
    if (s.b_c, s.b_v) != (b.n_c, b.n_v):
        raise DimensionMismatch(
            f"components are {s.b_c}x{s.b_v}, base matrix is {b.n_c}x{b.n_v}"
        )
    total = s.component_sum()
    diff = np.argwhere(total != b.entries)
    violations = tuple(
        (int(i), int(j), int(b.entries[i, j]), int(total[i, j])) for i, j in diff
    )
    return SpreadingReport(ok=not violations, violations=violations)


def _coupling_meta(s: EdgeSpreading, L: int, kind: str) -> dict:
    return {"w": s.w, "L": L, "b_v": s.b_v, "b_c": s.b_c, "kind": kind}


def couple_terminated(s: EdgeSpreading, L: int) -> BaseMatrix:
    """Terminated chain of L coupled copies: an (L+w)*b_c x L*b_v matrix.

    Block row t+i of column block t holds component B_i, so the first and
    last w*b_c check rows have reduced degree.  Column t*b_v + j inherits
    the puncture flag of protograph column j.
    """
    if L < 1:
        raise ValueError("coupling length L must be >= 1")
    w, b_c, b_v = s.w, s.b_c, s.b_v
    out = np.zeros(((L + w) * b_c, L * b_v), dtype=np.int64)
    for t in range(L):
        for i, comp in enumerate(s.components):
            out[(t + i) * b_c : (t + i + 1) * b_c, t * b_v : (t + 1) * b_v] = comp
    return BaseMatrix(out, s.punctured * L, coupling=_coupling_meta(s, L, "terminated"))


def couple_tailbiting(s: EdgeSpreading, L: int) -> BaseMatrix:
    """Tail-biting chain: wrap the last w*b_c boundary check rows onto the
    first w*b_c rows of the terminated matrix.  Degree distribution and
    design rate of the uncoupled protograph are preserved exactly."""
    if L <= s.w:
        raise CouplingTooShort(f"tail-biting needs L > w, got L={L}, w={s.w}")
    w, b_c = s.w, s.b_c
    term = couple_terminated(s, L).entries.copy()
    out = term[: L * b_c]
    out[: w * b_c] += term[L * b_c :]
    return BaseMatrix(out, s.punctured * L, coupling=_coupling_meta(s, L, "tailbiting"))


def terminated_rate(s: EdgeSpreading, L: int) -> Fraction:
    """Design rate of the terminated chain, as an exact rational.

    Computed through ``design_rate`` of the built matrix, which handles
    puncturing and removable all-zero boundary rows; for an unpunctured
    spreading with no zero rows it equals 1 - (L+w)(1-R)/L.
    """
    return design_rate(couple_terminated(s, L))


@dataclass(frozen=True)
class CoupledSpec:
    """An ensemble recipe: a spreading plus how (and how long) to couple.

    ``kind`` is one of ``"convolutional"``, ``"terminated"`` or
    ``"tailbiting"``; L is required for the latter two.  For analysis, a
    convolutional spec stands for the unterminated chain, whose local
    graph (and hence BP threshold) is the uncoupled protograph's.
    """

    spreading: EdgeSpreading
    kind: str = "terminated"
    L: int | None = None

    def __post_init__(self):
        if self.kind not in ("convolutional", "terminated", "tailbiting"):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind != "convolutional":
            if self.L is None or self.L < 1:
                raise ValueError(f"{self.kind} coupling needs L >= 1")
            if self.kind == "tailbiting" and self.L <= self.spreading.w:
                raise CouplingTooShort(
                    f"tail-biting needs L > w, got L={self.L}, w={self.spreading.w}"
                )

    @property
    def T(self) -> int | None:
        """Alias for L when used as a convolutional period."""
        return self.L

    def build(self) -> BaseMatrix:
        if self.kind == "terminated":
            return couple_terminated(self.spreading, self.L)
        if self.kind == "tailbiting":
            return couple_tailbiting(self.spreading, self.L)
        return self.spreading.uncoupled()

    def rate(self) -> Fraction:
        return design_rate(self.build())


# -- built-in families ------------------------------------------------

# Fallback spreadings for degree pairs with gcd 1, keyed by (J, K).
_CJK_FALLBACKS: dict[tuple[int, int], EdgeSpreading] = {}


def register_cjk_fallback(J: int, K: int, spreading: EdgeSpreading) -> None:
    """Register a hand-made spreading for a (J, K) pair with gcd(J,K)=1."""
    _CJK_FALLBACKS[(J, K)] = spreading


def family_cjk(J: int, K: int) -> EdgeSpreading:
    """The regular coupled family: w = gcd(J,K)-1 identical all-ones
    components of size (J/a) x (K/a).

    For coprime J, K this degenerates to w=0; a registered fallback
    spreading is returned instead (the (3,4) one ships built in), and
    ``NoSpreadingDefined`` is raised when there is none.
    """
    if J < 2 or K <= J:
        raise ValueError("need J >= 2 and K > J")
    a = gcd(J, K)
    if a == 1:
        try:
            return _CJK_FALLBACKS[(J, K)]
        except KeyError:
            raise NoSpreadingDefined(
                f"gcd({J},{K})=1 and no fallback spreading is registered"
            ) from None
    block = np.ones((J // a, K // a), dtype=np.int64)
    return EdgeSpreading(
        tuple(block.copy() for _ in range(a)), name=f"c{J}{K}" if K < 10 else f"c{J},{K}"
    )


register_cjk_fallback(
    3,
    4,
    EdgeSpreading(
        (
            np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]),
            np.array([[0, 0, 1, 1], [1, 0, 0, 1], [1, 1, 0, 0]]),
        ),
        name="c34",
    ),
)


# The irregular repeat-accumulate style family.  Column 1 (the degree-6
# variable node) is the punctured one; the w=1 split leaves component
# B_1 with an all-zero first row, so a terminated chain has exactly one
# disconnected boundary check.
_ARJA_B0 = np.array(
    [
        [1, 2, 0, 0, 0],
        [0, 1, 1, 1, 0],
        [0, 0, 1, 0, 2],
    ]
)
_ARJA_B1 = np.array(
    [
        [0, 0, 0, 0, 0],
        [0, 2, 0, 0, 1],
        [0, 1, 1, 1, 0],
    ]
)
_ARJA_PUNCTURED_COL = 1

# Rate-extension column pairs: per extension step e, two transmitted
# degree-4 columns supported on check rows 1 and 2, split across the two
# components so that row 0 of B_1 stays all-zero.
_AR4JA_EXT_B0 = np.array([[0, 0], [1, 1], [1, 1]])
_AR4JA_EXT_B1 = np.array([[0, 0], [2, 0], [0, 2]])


def family_arja() -> EdgeSpreading:
    """Width-1 spreading of the rate-1/2 irregular protograph with one
    punctured variable node per time instant."""
    punct = tuple(j == _ARJA_PUNCTURED_COL for j in range(5))
    return EdgeSpreading((_ARJA_B0, _ARJA_B1), punct, name="arja")


def family_ar4ja(e: int = 0) -> EdgeSpreading:
    """Rate-(1+e)/(2+e) extension of the irregular family: each extension
    step appends two degree-4 transmitted columns under check rows 1-2.
    e=0 reproduces ``family_arja()`` exactly."""
    if e < 0:
        raise ValueError("extension parameter e must be >= 0")
    b0 = np.hstack([_ARJA_B0] + [_AR4JA_EXT_B0] * e)
    b1 = np.hstack([_ARJA_B1] + [_AR4JA_EXT_B1] * e)
    punct = tuple(j == _ARJA_PUNCTURED_COL for j in range(5 + 2 * e))
    return EdgeSpreading((b0, b1), punct, name=f"ar4ja{e}")


def family_c36_alt() -> EdgeSpreading:
    """Width-1 multi-edge spreading of B = [[3, 3]]: both terminated
    boundary checks keep degree 3, and the constraint length per unit M
    drops from 6 to 4."""
    return EdgeSpreading(
        (np.array([[2, 1]]), np.array([[1, 2]])),
        name="c36alt",
    )
