"""Pivot selection by closed-form ratio extremization.

The augmentation direction at a checkpoint is a unit mass on one phase.
The primary rule maximizes the occupancy ratio ``u_star_K / u_star`` over
the support ``I_plus & O_plus`` (phases that both receive direct
transitions from above and start downward-exiting paths); the ratio
argmax is available in closed form, so no generic LP machinery is ever
involved.  A legacy rule minimizes a drift-weighted objective instead and
exists only for generators with a finite upper band.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    EmptyCandidateSet,
    IndexOutOfRange,
    UnsupportedInfiniteBand,
)
from .generator import BlockGenerator
from .recursions import RecursionState

__all__ = [
    "PivotSelection",
    "DriftCertificate",
    "DriftSelection",
    "incoming_support",
    "outgoing_support",
    "select_pivot",
    "select_pivot_drift",
]

# Relative threshold separating computed quantities from structural zeros.
TAU_REL = 1e-12


@dataclass(frozen=True)
class PivotSelection:
    """Chosen augmentation phase and the sets that produced it."""

    level: int
    I_plus: frozenset[int]
    O_plus: frozenset[int]
    J_star: tuple[int, ...]
    pivot: int
    alpha_star: np.ndarray
    ratio: float


@dataclass(frozen=True)
class DriftCertificate:
    """User-supplied drift witness ``(v, b, C)`` for the legacy rule.

    ``v_blocks(l)`` must return a strictly positive vector of length
    ``M_l``.  The inequality it certifies is taken on trust; this library
    never attempts to verify or search for such a witness.
    """

    v_blocks: Callable[[int], np.ndarray]
    b: float
    C: frozenset[tuple[int, int]] = frozenset()

    def v(self, l: int) -> np.ndarray:
        vec = np.asarray(self.v_blocks(l), dtype=float).ravel()
        if np.any(vec <= 0.0) or not np.all(np.isfinite(vec)):
            raise ValueError(f"drift vector at level {l} must be strictly positive")
        return vec


@dataclass(frozen=True)
class DriftSelection:
    """Minimizing phase of the drift-weighted objective."""

    level: int
    pivot: int
    alpha_dagger: np.ndarray
    objective: float


def incoming_support(gen: BlockGenerator, n: int) -> frozenset[int]:
    """Phases of level ``n`` that receive direct transitions from level ``n+1``.

    Uses exact column sums of ``block(n+1, n)``: entries are model data,
    not computed quantities, so no tolerance applies.
    """
    col_sums = gen.block_array(n + 1, n).sum(axis=0)
    return frozenset(int(j) for j in np.nonzero(col_sums > 0.0)[0])


def outgoing_support(state: RecursionState, gen: BlockGenerator) -> frozenset[int]:
    """Phases of level ``n`` that start paths exiting downward before climbing.

    Identified from the row sums of ``U_star @ block(n, n-1)``; these are
    computed quantities, so a relative threshold of ``TAU_REL`` separates
    true support from rounding noise.
    """
    if state.n == 0:
        raise IndexOutOfRange("outgoing support is undefined at level 0")
    w = state.U_star @ gen.block_array(state.n, state.n - 1).sum(axis=1)
    top = w.max()
    if top <= 0.0:
        return frozenset()
    return frozenset(int(i) for i in np.nonzero(w > TAU_REL * top)[0])


def select_pivot(
    state: RecursionState, I: frozenset[int], O: frozenset[int]
) -> PivotSelection:
    """Maximize ``u_star_K / u_star`` over the candidate support.

    The argmax set ``J_star`` collects every candidate within relative
    ``TAU_REL`` of the best ratio; the pivot is its smallest index, which
    keeps runs reproducible.

    Raises
    ------
    EmptyCandidateSet
        If ``I & O`` is empty or all candidate ratios vanish; either
        signals suspected non-ergodicity or a too-early checkpoint.
    """
    if state.u_star_K is None:
        raise IndexOutOfRange(
            f"u_star_K unavailable: level {state.n} below max(K_set)"
        )
    candidates = sorted(I & O)
    if not candidates:
        raise EmptyCandidateSet(f"no candidate phase at level {state.n}")
    ratios = state.u_star_K[candidates] / state.u_star[candidates]
    best = float(ratios.max())
    if best <= TAU_REL:
        raise EmptyCandidateSet(
            f"all candidate ratios vanish at level {state.n}"
        )
    j_star = tuple(
        j for j, r in zip(candidates, ratios) if r >= best * (1.0 - TAU_REL)
    )
    pivot = j_star[0]
    alpha = np.zeros(state.u_star.shape[0])
    alpha[pivot] = 1.0
    return PivotSelection(
        level=state.n,
        I_plus=frozenset(I),
        O_plus=frozenset(O),
        J_star=j_star,
        pivot=pivot,
        alpha_star=alpha,
        ratio=float(state.u_star_K[pivot] / state.u_star[pivot]),
    )


def select_pivot_drift(
    state: RecursionState, gen: BlockGenerator, cert: DriftCertificate
) -> DriftSelection:
    """Minimize the drift-weighted objective over all phases (legacy rule).

    The objective vector is ``v_n`` plus, for each retained level ``k``,
    the sojourn matrix applied to the drift mass that level ``k`` sends
    above level ``n``.  With an upper band ``b`` that mass involves only
    ``block(k, l)`` for ``n < l <= k + b``, so only levels
    ``k > n - b`` contribute; without a band the sum would be infinite,
    which is why this rule refuses infinite-band generators outright
    rather than silently truncating.
    """
    if gen.bandwidth is None:
        raise UnsupportedInfiniteBand(
            "drift-based selection needs a finite upper bandwidth"
        )
    n, b = state.n, gen.bandwidth
    y = cert.v(n).copy()
    for k in range(max(0, n - b + 1), n + 1):
        inner = np.zeros(gen.phase_count(k))
        for l in range(n + 1, k + b + 1):
            blk = gen.block_array(k, l)
            if blk.any():
                inner += blk @ cert.v(l)
        y += state.U_star_family[k] @ inner
    objective = y / state.u_star
    best = float(objective.min())
    ties = np.nonzero(objective <= best * (1.0 + TAU_REL))[0]
    pivot = int(ties.min())
    alpha = np.zeros(state.u_star.shape[0])
    alpha[pivot] = 1.0
    return DriftSelection(
        level=n, pivot=pivot, alpha_dagger=alpha, objective=float(objective[pivot])
    )
