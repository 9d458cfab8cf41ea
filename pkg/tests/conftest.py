"""Shared model fixtures and helpers."""

from __future__ import annotations

import numpy as np
import pytest

from bhmc import (
    BlockGenerator,
    advance,
    init_state,
    make_heavy_tail_mg1,
    make_lattice_rw_2d,
    make_ld_qbd_birth_death,
    make_mm1,
    make_mmc,
)

LATTICE_RATES = dict(east=1.0, west=3.0, north=1.0, south=3.0)

# Coupled 2-phase level-dependent QBD: phase switching plus per-phase
# arrival/service rates, with the service pool capped at three levels.
PHASE_SWITCH = np.array([[-1.0, 1.0], [2.0, -2.0]])
ARRIVALS_2P = np.array([1.0, 0.5])
SERVICES_2P = np.array([2.5, 2.0])


def two_phase_ldqbd() -> BlockGenerator:
    def block(k: int, l: int) -> np.ndarray:
        cap = min(k, 3)
        if l == k:
            drain = ARRIVALS_2P + (SERVICES_2P * cap if k >= 1 else 0.0)
            return PHASE_SWITCH - np.diag(drain)
        if l == k + 1:
            return np.diag(ARRIVALS_2P)
        if l == k - 1 and k >= 1:
            return np.diag(SERVICES_2P * cap)
        return np.zeros((2, 2))

    return BlockGenerator(lambda k: 2, block, bandwidth=1)


# Level/phase-independent QBD whose phase process is autonomous, so the
# stationary law is the product of a geometric level law and the phase
# chain's stationary vector (0.4, 0.6).
QBD_PHASE_GEN = np.array([[-1.5, 1.5], [1.0, -1.0]])
QBD_VARPI = np.array([0.4, 0.6])
QBD_LAM, QBD_MU = 1.0, 2.0


def two_phase_product_qbd() -> BlockGenerator:
    eye = np.eye(2)

    def block(k: int, l: int) -> np.ndarray:
        if l == k:
            return QBD_PHASE_GEN - (QBD_LAM + (QBD_MU if k >= 1 else 0.0)) * eye
        if l == k + 1:
            return QBD_LAM * eye
        if l == k - 1 and k >= 1:
            return QBD_MU * eye
        return np.zeros((2, 2))

    return BlockGenerator(lambda k: 2, block, bandwidth=1)


def drive_to(gen: BlockGenerator, n: int, k_set=frozenset({0})):
    state = init_state(gen, k_set)
    for _ in range(n):
        state = advance(state, gen)
    return state


@pytest.fixture
def mm1():
    return make_mm1(1.0, 2.0)


@pytest.fixture
def mmc():
    return make_mmc(1.0, 1.0, 2)


@pytest.fixture
def ld_qbd():
    return make_ld_qbd_birth_death(2.0, 1.0)


@pytest.fixture
def heavy():
    return make_heavy_tail_mg1(3.0, 1.0)


@pytest.fixture
def lattice():
    return make_lattice_rw_2d(**LATTICE_RATES)


@pytest.fixture
def catalog(mm1, mmc, ld_qbd, heavy, lattice):
    return {
        "mm1": mm1,
        "mmc": mmc,
        "ld_qbd_birth_death": ld_qbd,
        "heavy_tail_mg1": heavy,
        "lattice_rw_2d": lattice,
    }
