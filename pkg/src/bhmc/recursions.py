"""Rolling first-exit recursion state for upper block-Hessenberg chains.

At level ``n`` the state holds the matrix ``U_star`` (the inverse of the
local exit matrix), the family ``U_star_family[k]`` whose ``(i, j)`` entry
is the expected total sojourn time in ``(k, j)`` before the chain first
climbs above level ``n`` when started in ``(n, i)``, the row-sum vector
``u_star`` over the whole family, and the partial row-sum vector
``u_star_K`` restricted to the index set ``K_set``.  Advancing from level
``n`` to ``n + 1`` costs a fixed number of block solves plus one product
per retained family member, so each step has finite, though growing,
work.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IndexOutOfRange, SingularBlock
from .generator import BlockGenerator

__all__ = [
    "RecursionState",
    "init_state",
    "advance",
    "u_star_K_direct",
    "sojourn_matrix",
]

# LU pivots below PIVOT_RTOL times the max row norm are treated as singular;
# ergodicity guarantees nonsingular exit matrices, so this is diagnostic.
PIVOT_RTOL = 1e-13


def guarded_lu_factor(matrix: np.ndarray, what: str):
    """LU with partial pivoting; tiny pivots are reported as SingularBlock."""
    m = np.asarray(matrix, dtype=float)
    scale = np.abs(m).sum(axis=1).max() if m.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        raise SingularBlock(f"{what}: matrix is zero or non-finite")
    with warnings.catch_warnings():
        # an exactly zero pivot is our SingularBlock case, not a warning
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    if np.abs(np.diag(lu)).min() < PIVOT_RTOL * scale:
        raise SingularBlock(f"{what}: pivot below {PIVOT_RTOL} * max row norm")
    return lu, piv


def lu_inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    """Invert via LU with partial pivoting, guarding against singularity."""
    lu, piv = guarded_lu_factor(matrix, what)
    return scipy.linalg.lu_solve((lu, piv), np.eye(lu.shape[0]), check_finite=False)


@dataclass
class RecursionState:
    """First-exit quantities at the current level ``n``.

    ``U_star_family`` lists ``U_star_family[k]`` for ``k = 0..n``; its last
    entry is ``U_star`` itself.  ``u_star_K`` is present once ``n`` has
    reached ``max(K_set)`` and is ``None`` before that.  ``q_diag_n``
    caches the diagonal of ``block(n, n)`` for the stopping rule.
    """

    n: int
    U_star: np.ndarray
    U_star_family: list[np.ndarray]
    u_star: np.ndarray
    u_star_K: np.ndarray | None
    K_set: frozenset[int]
    q_diag_n: np.ndarray


def _normalize_k_set(K_set) -> frozenset[int]:
    ks = frozenset(int(k) for k in K_set)
    if not ks:
        raise ValueError("K_set must be a nonempty finite set of levels")
    if min(ks) < 0:
        raise ValueError(f"K_set must contain nonnegative levels, got {sorted(ks)}")
    return ks


def init_state(gen: BlockGenerator, K_set=frozenset({0})) -> RecursionState:
    """State at level 0: ``U_star = (-block(0,0))^-1``, ``u_star = U_star e``."""
    ks = _normalize_k_set(K_set)
    q00 = gen.block_array(0, 0)
    u0 = lu_inverse(-q00, "level 0 exit matrix")
    u_vec = u0.sum(axis=1)
    u_k = u_vec.copy() if max(ks) == 0 else None
    return RecursionState(
        n=0,
        U_star=u0,
        U_star_family=[u0],
        u_star=u_vec,
        u_star_K=u_k,
        K_set=ks,
        q_diag_n=np.diag(q00).copy(),
    )


def advance(state: RecursionState, gen: BlockGenerator) -> RecursionState:
    """Advance the rolling state from level ``n`` to ``n + 1``.

    The new ``U_star`` inverts the local exit matrix at level ``n + 1``,
    whose correction sum runs only over the upper band when the generator
    is banded.  The family, total, and partial row-sum vectors then update
    by a single left product with ``U_star @ block(n+1, n)``.
    """
    n, n1 = state.n, state.n + 1
    m1 = gen.phase_count(n1)
    q_next = gen.block_array(n1, n1)
    q_down = gen.block_array(n1, n)

    lo = 0 if gen.bandwidth is None else max(0, n1 - gen.bandwidth)
    correction = np.zeros((state.U_star.shape[0], m1))
    for l in range(lo, n + 1):
        b = gen.block_array(l, n1)
        if b.any():
            correction += state.U_star_family[l] @ b
    u1 = lu_inverse(-q_next - q_down @ correction, f"level {n1} exit matrix")

    step = u1 @ q_down
    family = [step @ f for f in state.U_star_family]
    family.append(u1)
    u_vec = u1 @ (np.ones(m1) + q_down @ state.u_star)

    k_max = max(state.K_set)
    if n1 < k_max:
        u_k = None
    elif n1 == k_max:
        u_k = sum(family[l].sum(axis=1) for l in state.K_set)
    else:
        u_k = step @ state.u_star_K

    # Positivity is guaranteed in exact arithmetic; losing it means the
    # accumulated rounding has overwhelmed the recursion at this depth.
    if not np.all(u_vec > 0.0):
        raise SingularBlock(
            f"positivity of u_star lost at level {n1}; accumulated rounding "
            "has exhausted double precision at this depth"
        )
    if u_k is not None and u_k.min() < -1e-12 * max(u_k.max(), 0.0):
        raise SingularBlock(f"positivity of u_star_K lost at level {n1}")

    return RecursionState(
        n=n1,
        U_star=u1,
        U_star_family=family,
        u_star=u_vec,
        u_star_K=u_k,
        K_set=state.K_set,
        q_diag_n=np.diag(q_next).copy(),
    )


def u_star_K_direct(state: RecursionState) -> np.ndarray:
    """Partial row sums over ``K_set`` straight from the stored family.

    Cross-check for the recursive ``u_star_K``; both must agree.
    """
    if state.n < max(state.K_set):
        raise IndexOutOfRange(
            f"level {state.n} below max(K_set) = {max(state.K_set)}"
        )
    return sum(state.U_star_family[l].sum(axis=1) for l in state.K_set)


def sojourn_matrix(state: RecursionState, k: int) -> np.ndarray:
    """Expected-sojourn matrix for level ``k``.

    Entry ``(i, j)`` is the expected total time spent in ``(k, j)`` before
    the chain first visits any level above ``n``, starting from ``(n, i)``.
    """
    if not 0 <= k <= state.n:
        raise IndexOutOfRange(f"level {k} outside 0..{state.n}")
    return state.U_star_family[k]
