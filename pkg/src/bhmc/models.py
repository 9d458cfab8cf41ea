"""Catalog of concrete upper block-Hessenberg generators.

Scalar-phase queueing models keep their oracles hand-verifiable; the
two-dimensional lattice walk exercises level-varying phase counts; the
heavy-tailed M/G/1-type generator exercises a genuinely infinite upper
band with an exact analytic tail.  Phases are 0-indexed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BadRates, ConfigError, UnstableModel
from .generator import BlockGenerator

__all__ = [
    "ModelSpec",
    "MODEL_IDS",
    "build_model",
    "make_mm1",
    "make_mmc",
    "make_ld_qbd_birth_death",
    "make_heavy_tail_mg1",
    "make_lattice_rw_2d",
]

MODEL_IDS = (
    "mm1",
    "mmc",
    "ld_qbd_birth_death",
    "heavy_tail_mg1",
    "lattice_rw_2d",
)


@dataclass(frozen=True)
class ModelSpec:
    """Named catalog model plus its rate parameters."""

    model_id: str
    params: Mapping[str, float] = field(default_factory=dict)


def build_model(spec: ModelSpec) -> BlockGenerator:
    """Instantiate a catalog model from its spec."""
    if spec.model_id not in MODEL_IDS:
        raise ConfigError(
            f"unknown model {spec.model_id!r}; expected one of {MODEL_IDS}"
        )
    maker = {
        "mm1": make_mm1,
        "mmc": make_mmc,
        "ld_qbd_birth_death": make_ld_qbd_birth_death,
        "heavy_tail_mg1": make_heavy_tail_mg1,
        "lattice_rw_2d": make_lattice_rw_2d,
    }[spec.model_id]
    try:
        return maker(**dict(spec.params))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {spec.model_id}: {exc}") from exc


def _require_positive(**rates: float) -> None:
    for name, value in rates.items():
        if not (value > 0.0) or not np.isfinite(value):
            raise BadRates(f"rate {name!r} must be strictly positive, got {value!r}")


def _scalar(x: float) -> np.ndarray:
    return np.array([[x]], dtype=float)


def _one_phase(_k: int) -> int:
    return 1


def make_mm1(lam: float, mu: float) -> BlockGenerator:
    """Single-server queue: birth rate ``lam``, death rate ``mu``.

    Stable when ``lam < mu``; the stationary law is geometric with ratio
    ``lam / mu``.
    """
    _require_positive(lam=lam, mu=mu)
    if lam >= mu:
        raise UnstableModel(f"mm1 requires lam < mu, got lam={lam}, mu={mu}")

    def block(k: int, l: int) -> np.ndarray:
        if l == k:
            return _scalar(-(lam + mu) if k >= 1 else -lam)
        if l == k + 1:
            return _scalar(lam)
        if l == k - 1 and k >= 1:
            return _scalar(mu)
        return _scalar(0.0)

    return BlockGenerator(_one_phase, block, bandwidth=1)


def make_mmc(lam: float, mu: float, c: int) -> BlockGenerator:
    """Multi-server queue: death rate ``min(k, c) * mu`` at level ``k``.

    Stable when ``lam < c * mu``.
    """
    _require_positive(lam=lam, mu=mu)
    c = int(c)
    if c < 1:
        raise BadRates(f"server count must be >= 1, got {c}")
    if lam >= c * mu:
        raise UnstableModel(
            f"mmc requires lam < c * mu, got lam={lam}, c*mu={c * mu}"
        )

    def block(k: int, l: int) -> np.ndarray:
        down = min(k, c) * mu
        if l == k:
            return _scalar(-(lam + down) if k >= 1 else -lam)
        if l == k + 1:
            return _scalar(lam)
        if l == k - 1 and k >= 1:
            return _scalar(down)
        return _scalar(0.0)

    return BlockGenerator(_one_phase, block, bandwidth=1)


def make_ld_qbd_birth_death(lam: float, mu: float) -> BlockGenerator:
    """Infinite-server queue: death rate ``k * mu`` at level ``k``.

    Always ergodic for positive rates; the stationary law is Poisson with
    mean ``lam / mu``.  Its unbounded diagonal exercises genuinely
    level-dependent behavior.
    """
    _require_positive(lam=lam, mu=mu)

    def block(k: int, l: int) -> np.ndarray:
        down = k * mu
        if l == k:
            return _scalar(-(lam + down))
        if l == k + 1:
            return _scalar(lam)
        if l == k - 1 and k >= 1:
            return _scalar(down)
        return _scalar(0.0)

    return BlockGenerator(_one_phase, block, bandwidth=1)


def make_heavy_tail_mg1(mu: float, tail_c: float = 1.0) -> BlockGenerator:
    """Level-independent M/G/1-type generator with a cubic jump tail.

    Scalar phase.  Upward jump rates are ``A_j = tail_c / (j (j+1) (j+2))``
    for ``j >= 1``, so both ``sum_j A_j = tail_c / 4`` and
    ``sum_j j A_j = tail_c / 2`` telescope in closed form, giving exact
    conservativity and an exact mean-drift check.  Downward rate ``mu``;
    the local rate absorbs the rest.  Stable when ``mu > tail_c / 2``.
    The stationary tail decays quadratically, which is what makes this
    model a stress case for truncation-based solvers.
    """
    _require_positive(mu=mu, tail_c=tail_c)
    up_mean = tail_c / 2.0
    if mu <= up_mean:
        raise UnstableModel(
            f"mean drift requires mu > {up_mean} (= tail_c / 2), got mu={mu}"
        )
    a0 = -(mu + tail_c / 4.0)

    def up_rate(j: int) -> float:
        return tail_c / (j * (j + 1.0) * (j + 2.0))

    def block(k: int, l: int) -> np.ndarray:
        if l == k:
            # boundary level has no downward transition; its rate folds in
            return _scalar(a0 + mu if k == 0 else a0)
        if l == k - 1 and k >= 1:
            return _scalar(mu)
        if l > k:
            return _scalar(up_rate(l - k))
        return _scalar(0.0)

    def row_tail_mass(k: int, i: int, L: int) -> float:
        # telescoping tail: sum_{j > m} A_j = tail_c / (2 (m+1) (m+2))
        if L >= k:
            m = L - k
            return tail_c / (2.0 * (m + 1.0) * (m + 2.0))
        if L == k - 1:
            return a0 + tail_c / 4.0  # = -mu
        return 0.0

    return BlockGenerator(_one_phase, block, bandwidth=None, row_tail_mass=row_tail_mass)


def make_lattice_rw_2d(
    east: float,
    west: float,
    north: float,
    south: float,
    east_wall: float | None = None,
    west_wall: float | None = None,
    north_wall: float | None = None,
    south_wall: float | None = None,
) -> BlockGenerator:
    """Unit-step random walk on the nonnegative quadrant.

    The level of a lattice point ``(x, y)`` is ``x + y`` and its phase is
    ``x``, so level ``k`` has ``k + 1`` phases and every jump moves the
    level by exactly one.  Interior rates are the four compass rates; on a
    wall the blocked inward move disappears and the two moves along or
    away from that wall take the corresponding ``*_wall`` rate (defaulting
    to the interior rate).  Positive recurrence needs an inward bias
    (``west > east``, ``south > north``); this is asserted by the caller,
    not verified here.
    """
    east_wall = east if east_wall is None else east_wall
    west_wall = west if west_wall is None else west_wall
    north_wall = north if north_wall is None else north_wall
    south_wall = south if south_wall is None else south_wall
    _require_positive(
        east=east,
        west=west,
        north=north,
        south=south,
        east_wall=east_wall,
        west_wall=west_wall,
        north_wall=north_wall,
        south_wall=south_wall,
    )

    def moves(x: int, y: int):
        # (dx, dy, rate) for every admissible unit step from (x, y)
        yield 1, 0, east_wall if x == 0 else east
        yield 0, 1, north_wall if y == 0 else north
        if x > 0:
            yield -1, 0, west_wall if y == 0 else west
        if y > 0:
            yield 0, -1, south_wall if x == 0 else south

    def phase_count(k: int) -> int:
        return k + 1

    def block(k: int, l: int) -> np.ndarray:
        out = np.zeros((k + 1, l + 1))
        if abs(l - k) > 1:
            return out
        for x in range(k + 1):
            y = k - x
            if l == k:
                out[x, x] = -sum(rate for _, _, rate in moves(x, y))
            else:
                for dx, dy, rate in moves(x, y):
                    if k + dx + dy == l:
                        out[x, x + dx] = rate
        return out

    return BlockGenerator(phase_count, block, bandwidth=1)
