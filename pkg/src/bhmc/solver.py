"""Sequential update drivers and stopping machinery.

Three drivers share one skeleton: advance the first-exit recursion level
by level, and at scheduled checkpoints pick an augmentation direction,
assemble the blocked approximation, and test a stopping rule.

* ``solve_mip`` (primary): unit-mass pivot maximizing the occupancy
  ratio; stops when the q-weighted residual drops below ``epsilon``.
  The residual has the closed form ``1 / (|q(n, j; n, j)| * u_star(j))``
  at the chosen pivot ``j``, so testing it costs nothing.
* ``solve_mip_drift`` (legacy): drift-minimizing pivot, successive-
  iterate total-variation stopping; finite upper bandwidth only.
* ``solve_fixed_direction``: a fixed positive direction over a constant
  phase set replaces pivot selection entirely.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import count
from typing import Iterator

import numpy as np

from .errors import (
    ConfigError,
    IndexOutOfRange,
    NonpositiveWeight,
    PhaseMismatch,
    SingularBlock,
    UnsupportedInfiniteBand,
)
from .generator import BlockGenerator, principal_submatrix
from .lfp import (
    DriftCertificate,
    PivotSelection,
    incoming_support,
    outgoing_support,
    select_pivot,
    select_pivot_drift,
)
from .recursions import RecursionState, advance, init_state

__all__ = [
    "CheckpointSchedule",
    "SolverOptions",
    "CheckpointRecord",
    "Approximation",
    "FixedDirection",
    "solve",
    "solve_mip",
    "solve_mip_drift",
    "solve_fixed_direction",
    "residual_q_norm",
    "residual_q_norm_direct",
    "conditional_distribution",
    "tv_distance",
    "flatten_blocks",
]

TRACE_LIMIT = 1024  # checkpoints retained per run


@dataclass(frozen=True)
class CheckpointSchedule:
    """Increasing levels at which the solver evaluates its stopping rule.

    ``every`` checks each level from the start level on; ``arithmetic``
    steps by ``stride``; ``geometric`` multiplies by ``factor`` (always
    advancing by at least one); ``explicit`` uses ``levels`` as given.
    """

    kind: str = "every"
    stride: int = 1
    factor: float = 1.5
    levels: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("every", "arithmetic", "geometric", "explicit"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "arithmetic" and self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.kind == "geometric" and not self.factor > 1.0:
            raise ConfigError(f"factor must be > 1, got {self.factor}")
        if self.kind == "explicit":
            if not self.levels:
                raise ConfigError("explicit schedule needs at least one level")
            lv = tuple(int(x) for x in self.levels)
            if any(b <= a for a, b in zip(lv, lv[1:])) or lv[0] < 0:
                raise ConfigError("explicit schedule must be strictly increasing")
            object.__setattr__(self, "levels", lv)

    def iterate(self, start: int) -> Iterator[int]:
        if self.kind == "every":
            return iter(count(start))
        if self.kind == "arithmetic":
            return iter(count(start, self.stride))
        if self.kind == "geometric":

            def geo() -> Iterator[int]:
                n = max(start, 1)
                while True:
                    yield n
                    n = max(n + 1, int(np.ceil(self.factor * n)))

            return geo()
        return iter(self.levels)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerance, checkpoint layout, and level cap for one solve."""

    epsilon: float = 1e-6
    K_set: frozenset[int] = frozenset({0})
    checkpoint_schedule: CheckpointSchedule = field(default_factory=CheckpointSchedule)
    max_level: int = 10_000
    variant: str | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        ks = frozenset(int(k) for k in self.K_set)
        if not ks or min(ks) < 0:
            raise ConfigError(f"K_set must be nonempty and nonnegative, got {self.K_set}")
        object.__setattr__(self, "K_set", ks)
        if self.max_level < 1:
            raise ConfigError(f"max_level must be >= 1, got {self.max_level}")
        if self.variant not in (None, "mip_new", "mip_drift", "fixed_direction"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        sched = self.checkpoint_schedule
        if sched.kind == "explicit" and sched.levels[0] < max(ks):
            raise ConfigError(
                f"schedule starts at {sched.levels[0]}, below max(K_set) = {max(ks)}"
            )


@dataclass(frozen=True)
class CheckpointRecord:
    """One checkpoint: level, chosen pivot, its ratio, and the residual.

    ``step_distance`` is filled only on the drift path (total variation
    from the previous checkpoint).  Fixed-direction checkpoints have no
    pivot or ratio.
    """

    level: int
    pivot: int | None
    ratio: float | None
    residual: float
    step_distance: float | None = None


@dataclass(frozen=True)
class Approximation:
    """Blocked probability vector with its convergence trace.

    ``blocks[k]`` approximates the stationary mass distribution over the
    phases of level ``k``, for ``k = 0..n``; the blocks jointly sum to 1.
    """

    n: int
    blocks: tuple[np.ndarray, ...]
    pivot_trace: tuple[CheckpointRecord, ...]
    residual: float
    converged: bool
    variant: str

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def level_masses(self) -> np.ndarray:
        return np.array([b.sum() for b in self.blocks])


@dataclass(frozen=True)
class FixedDirection:
    """Strictly positive probability direction over a constant phase set."""

    varpi: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.varpi, dtype=float).ravel()
        if w.size == 0 or np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise PhaseMismatch("direction must be strictly positive and finite")
        if abs(w.sum() - 1.0) > 1e-9:
            raise PhaseMismatch(f"direction sums to {w.sum()!r}, expected 1")
        object.__setattr__(self, "varpi", w)


def flatten_blocks(blocks) -> np.ndarray:
    """Concatenate level blocks into one flat vector."""
    return np.concatenate([np.asarray(b, dtype=float).ravel() for b in blocks])


def residual_q_norm(state: RecursionState, pivot: int) -> float:
    """Closed-form q-weighted residual of the pivot approximation.

    Equals ``1 / (|block(n,n)[pivot, pivot]| * u_star[pivot])`` and always
    lies in ``(0, 1]``; it tends to zero as the level grows, which is what
    makes it a usable stopping rule.
    """
    if not 0 <= pivot < state.u_star.shape[0]:
        raise IndexOutOfRange(f"pivot {pivot} invalid at level {state.n}")
    value = float(1.0 / (abs(state.q_diag_n[pivot]) * state.u_star[pivot]))
    if not value > 0.0:  # u_star overflow: depth exceeds double range
        raise SingularBlock(
            f"residual underflowed at level {state.n}; u_star no longer "
            "representable in double precision"
        )
    return value


def residual_q_norm_direct(gen: BlockGenerator, approx: Approximation) -> float:
    """Q-weighted residual by explicit assembly; oracle for the closed form.

    Computes ``|| x @ Q_n ||`` weighted per state by the reciprocal of its
    diagonal rate, where ``x`` is the flattened approximation and ``Q_n``
    the assembled principal submatrix.
    """
    sub = principal_submatrix(gen, approx.n)
    x = approx.flatten()
    if x.shape[0] != sub.dim:
        raise IndexOutOfRange(
            f"approximation has {x.shape[0]} states, submatrix {sub.dim}"
        )
    resid = x @ sub.data
    weights = 1.0 / np.abs(np.diag(sub.data))
    return float(np.abs(resid) @ weights)


def conditional_distribution(blocks, N: int) -> tuple[np.ndarray, ...]:
    """Renormalize the first ``N + 1`` level blocks to total mass one."""
    seq = [np.asarray(b, dtype=float).ravel() for b in blocks]
    if not 0 <= N < len(seq):
        raise IndexOutOfRange(f"level {N} outside 0..{len(seq) - 1}")
    head = seq[: N + 1]
    mass = sum(b.sum() for b in head)
    return tuple(b / mass for b in head)


def tv_distance(h1, h2, f=None) -> float:
    """Weighted total-variation distance between prefix-indexed vectors.

    The vectors may cover index prefixes of different lengths: shared
    indices contribute ``|h1 - h2| * f`` and each vector's overhang
    contributes its own weighted mass.  With ``f`` omitted (all ones)
    this is the plain total variation norm.
    """
    a = np.asarray(h1, dtype=float).ravel()
    b = np.asarray(h2, dtype=float).ravel()
    hi = max(a.size, b.size)
    if f is None:
        w = np.ones(hi)
    else:
        w = np.asarray(f, dtype=float).ravel()
        if w.size < hi:
            raise ValueError(f"weight vector covers {w.size} indices, need {hi}")
        if np.any(w[:hi] <= 0.0):
            raise NonpositiveWeight("weights must be strictly positive")
    lo = min(a.size, b.size)
    total = float(np.abs(a[:lo] - b[:lo]) @ w[:lo])
    total += float(np.abs(a[lo:]) @ w[lo : a.size])
    total += float(np.abs(b[lo:]) @ w[lo : b.size])
    return total


def _select_at(state: RecursionState, gen: BlockGenerator) -> PivotSelection:
    inc = incoming_support(gen, state.n)
    if state.n >= 1:
        out = outgoing_support(state, gen)
    else:
        out = frozenset(range(state.u_star.shape[0]))  # no level below 0
    return select_pivot(state, inc, out)


def _pivot_blocks(state: RecursionState, pivot: int) -> tuple[np.ndarray, ...]:
    scale = state.u_star[pivot]
    return tuple(f[pivot, :] / scale for f in state.U_star_family)


def _start_level(opts: SolverOptions) -> int:
    if opts.checkpoint_schedule.kind == "explicit":
        return opts.checkpoint_schedule.levels[0]
    return max(max(opts.K_set), 1)


def solve_mip(gen: BlockGenerator, opts: SolverOptions | None = None) -> Approximation:
    """Primary driver: ratio-maximizing pivots, residual stopping.

    Advances the recursion one level at a time.  At each scheduled
    checkpoint it selects the pivot phase, reads off the closed-form
    residual, and stops once the residual drops below ``epsilon``,
    returning the blocked approximation assembled from the pivot row of
    the sojourn family.  Hitting ``max_level`` without convergence is not
    an error: the approximation evaluated there is returned with
    ``converged=False``.
    """
    opts = opts if opts is not None else SolverOptions()
    if opts.variant not in (None, "mip_new"):
        raise ConfigError(f"solve_mip cannot run variant {opts.variant!r}")
    state = init_state(gen, opts.K_set)
    schedule = opts.checkpoint_schedule.iterate(_start_level(opts))
    next_cp = next(schedule, None)
    trace: deque[CheckpointRecord] = deque(maxlen=TRACE_LIMIT)
    while True:
        at_cap = state.n >= opts.max_level
        if (next_cp is not None and state.n == next_cp) or at_cap:
            sel = _select_at(state, gen)
            res = residual_q_norm(state, sel.pivot)
            trace.append(CheckpointRecord(state.n, sel.pivot, sel.ratio, res))
            if res < opts.epsilon or at_cap:
                return Approximation(
                    n=state.n,
                    blocks=_pivot_blocks(state, sel.pivot),
                    pivot_trace=tuple(trace),
                    residual=res,
                    converged=res < opts.epsilon,
                    variant="mip_new",
                )
            next_cp = next(schedule, None)
        state = advance(state, gen)


def solve_mip_drift(
    gen: BlockGenerator, cert: DriftCertificate, opts: SolverOptions | None = None
) -> Approximation:
    """Legacy driver: drift-minimizing pivots, successive-iterate stopping.

    Stops when the total variation between consecutive checkpoint
    approximations falls below ``epsilon`` (which can in principle trigger
    early, unlike the residual rule); the q-weighted residual is still
    recorded at every checkpoint for diagnosis.  Requires a finite upper
    bandwidth.
    """
    opts = opts if opts is not None else SolverOptions()
    if opts.variant not in (None, "mip_drift"):
        raise ConfigError(f"solve_mip_drift cannot run variant {opts.variant!r}")
    if gen.bandwidth is None:
        raise UnsupportedInfiniteBand(
            "drift-based selection needs a finite upper bandwidth"
        )
    state = init_state(gen, opts.K_set)
    schedule = opts.checkpoint_schedule.iterate(_start_level(opts))
    next_cp = next(schedule, None)
    trace: deque[CheckpointRecord] = deque(maxlen=TRACE_LIMIT)
    prev_flat: np.ndarray | None = None
    while True:
        at_cap = state.n >= opts.max_level
        if (next_cp is not None and state.n == next_cp) or at_cap:
            sel = select_pivot_drift(state, gen, cert)
            blocks = _pivot_blocks(state, sel.pivot)
            flat = flatten_blocks(blocks)
            res = residual_q_norm(state, sel.pivot)
            step = tv_distance(flat, prev_flat) if prev_flat is not None else None
            trace.append(
                CheckpointRecord(state.n, sel.pivot, sel.objective, res, step)
            )
            done = step is not None and step < opts.epsilon
            if done or at_cap:
                return Approximation(
                    n=state.n,
                    blocks=blocks,
                    pivot_trace=tuple(trace),
                    residual=res,
                    converged=done,
                    variant="mip_drift",
                )
            prev_flat = flat
            next_cp = next(schedule, None)
        state = advance(state, gen)


def solve_fixed_direction(
    gen: BlockGenerator,
    direction: FixedDirection,
    opts: SolverOptions | None = None,
) -> Approximation:
    """Fixed-direction driver for chains with eventually constant phases.

    Maintains, alongside the starred recursion, the plain descending
    products ``U_{n,k}`` and their row-sum vector; the approximation at a
    checkpoint is the fixed direction applied to those products.  The
    residual-style stopping quantity replaces the pivot's unit mass with
    the direction: ``(varpi @ q_n) / (varpi @ u_star)``, which coincides
    with the primary rule on scalar-phase chains.
    """
    opts = opts if opts is not None else SolverOptions()
    if opts.variant not in (None, "fixed_direction"):
        raise ConfigError(
            f"solve_fixed_direction cannot run variant {opts.variant!r}"
        )
    varpi = direction.varpi
    state = init_state(gen, opts.K_set)
    plain_family: list[np.ndarray] = [np.eye(gen.phase_count(0))]
    plain_sum = np.ones(gen.phase_count(0))
    schedule = opts.checkpoint_schedule.iterate(_start_level(opts))
    next_cp = next(schedule, None)
    trace: deque[CheckpointRecord] = deque(maxlen=TRACE_LIMIT)
    while True:
        at_cap = state.n >= opts.max_level
        if (next_cp is not None and state.n == next_cp) or at_cap:
            if state.u_star.shape[0] != varpi.shape[0]:
                raise PhaseMismatch(
                    f"direction has {varpi.shape[0]} phases but level "
                    f"{state.n} has {state.u_star.shape[0]}"
                )
            denom = float(varpi @ plain_sum)
            res = float((varpi @ (1.0 / np.abs(state.q_diag_n))) / (varpi @ state.u_star))
            trace.append(CheckpointRecord(state.n, None, None, res))
            if res < opts.epsilon or at_cap:
                blocks = tuple((varpi @ f) / denom for f in plain_family)
                return Approximation(
                    n=state.n,
                    blocks=blocks,
                    pivot_trace=tuple(trace),
                    residual=res,
                    converged=res < opts.epsilon,
                    variant="fixed_direction",
                )
            next_cp = next(schedule, None)
        step = gen.block_array(state.n + 1, state.n) @ state.U_star
        plain_family = [step @ f for f in plain_family]
        plain_family.append(np.eye(gen.phase_count(state.n + 1)))
        plain_sum = np.ones(gen.phase_count(state.n + 1)) + step @ plain_sum
        state = advance(state, gen)


def solve(
    gen: BlockGenerator,
    opts: SolverOptions,
    cert: DriftCertificate | None = None,
    direction: FixedDirection | None = None,
) -> Approximation:
    """Dispatch on ``opts.variant`` (defaults to the primary driver)."""
    variant = opts.variant or "mip_new"
    if variant == "mip_new":
        return solve_mip(gen, opts)
    if variant == "mip_drift":
        if cert is None:
            raise ConfigError("variant mip_drift needs a drift certificate")
        return solve_mip_drift(gen, cert, opts)
    if direction is None:
        raise ConfigError("variant fixed_direction needs a direction vector")
    return solve_fixed_direction(gen, direction, opts)
