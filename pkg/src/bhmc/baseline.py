"""Independent reference solvers used to cross-validate the primary path.

All three methods reach a stationary approximation through routes that
share no code with the sequential recursion: a direct linear solve of the
augmented truncation, the classical backward R-matrix recursion for
block-tridiagonal chains, and a dense left-null-vector solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotQbd
from .generator import BlockGenerator, check_distribution, principal_submatrix
from .recursions import guarded_lu_factor, lu_inverse

__all__ = [
    "RMatrixChain",
    "BrightTaylorResult",
    "lbcl_direct",
    "bright_taylor",
    "brute_force_stationary",
]


@dataclass(frozen=True)
class RMatrixChain:
    """Backward-recursed rate matrices ``R[k-1] = R_k`` for ``k = 1..K_star``."""

    K_star: int
    R: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class BrightTaylorResult:
    """Blocked stationary approximation plus the R-matrix chain behind it."""

    blocks: tuple[np.ndarray, ...]
    chain: RMatrixChain

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.blocks)


def _left_solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Solve ``x @ matrix = rhs`` by LU with the shared pivot guard."""
    lu, piv = guarded_lu_factor(np.asarray(matrix, dtype=float).T, what)
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def lbcl_direct(gen: BlockGenerator, n: int, alpha_n: np.ndarray) -> np.ndarray:
    """Stationary vector of the augmented truncation, by direct linear solve.

    Solves ``x @ (-Q_n) = alpha_hat`` for the principal submatrix ``Q_n``
    over levels ``0..n``, with ``alpha_hat`` carrying ``alpha_n`` on the
    last block, then normalizes.  Returns the flat probability vector over
    all states of levels ``0..n``.
    """
    sub = principal_submatrix(gen, n)
    last = sub.level_slice(n)
    alpha = check_distribution(alpha_n, last.stop - last.start)
    rhs = np.zeros(sub.dim)
    rhs[last] = alpha
    x = _left_solve(-sub.data, rhs, f"augmented truncation at level {n}")
    return x / x.sum()


def bright_taylor(
    gen: BlockGenerator, K_star: int, tail_levels: int = 0
) -> BrightTaylorResult:
    """Classical backward R-matrix approximation for block-tridiagonal chains.

    The recursion ``R_k = block(k-1, k) @ inv(-block(k, k) - R_{k+1} @
    block(k+1, k))`` starts from a zero matrix placed ``tail_levels``
    levels above ``K_star``; the extra burn-in sharpens the retained
    ``R_1..R_{K_star}``.  The boundary vector solves the censored balance
    equation at level 0 and the blocks ``pi_0 @ R_1 @ ... @ R_k`` are
    normalized over levels ``0..K_star``, which biases mass slightly
    upward relative to the untruncated normalization.
    """
    if gen.bandwidth != 1:
        raise NotQbd(f"bandwidth must be 1, got {gen.bandwidth}")
    if K_star < 0 or tail_levels < 0:
        raise ValueError("K_star and tail_levels must be nonnegative")
    top = K_star + tail_levels
    kept: dict[int, np.ndarray] = {}
    r_above = np.zeros((gen.phase_count(top), gen.phase_count(top + 1)))
    for k in range(top, 0, -1):
        core = -gen.block_array(k, k) - r_above @ gen.block_array(k + 1, k)
        inv = lu_inverse(core, f"R recursion at level {k}")
        r_above = gen.block_array(k - 1, k) @ inv
        if k <= K_star:
            kept[k] = r_above
    boundary = gen.block_array(0, 0)
    if top >= 1:
        r1 = r_above  # holds R_1 after the loop
        boundary = boundary + r1 @ gen.block_array(1, 0)
    pi0 = _null_left_vector(boundary)
    blocks = [pi0]
    for k in range(1, K_star + 1):
        blocks.append(blocks[-1] @ kept[k])
    total = sum(b.sum() for b in blocks)
    return BrightTaylorResult(
        blocks=tuple(b / total for b in blocks),
        chain=RMatrixChain(K_star, tuple(kept[k] for k in range(1, K_star + 1))),
    )


def _null_left_vector(matrix: np.ndarray) -> np.ndarray:
    """Solve ``x @ A = 0`` with the last balance equation swapped for ``x e = 1``."""
    a = np.array(matrix, dtype=float)
    a[:, -1] = 1.0
    rhs = np.zeros(a.shape[0])
    rhs[-1] = 1.0
    return _left_solve(a, rhs, "left null vector")


def brute_force_stationary(q_hat: np.ndarray) -> np.ndarray:
    """Stationary vector of a finite proper generator by dense solve.

    Replaces the last column (a deterministic choice, for reproducibility)
    with the normalization equation.  The input must have zero row sums
    and be irreducible; a singular reduced system signals reducibility.
    """
    q = np.asarray(q_hat, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {q.shape}")
    return _null_left_vector(q)
