"""Occupation-number basis for a lattice Dirac field.

Modes are ordered site-major, spinor-minor: mode ``mu = l * d + a`` for
site ``l`` in ``0..L-1`` and spinor component ``a`` in ``0..d-1``. A basis
state is an integer bitmask over the ``M = L * d`` modes; bit ``mu`` set means
mode ``mu`` is occupied. The empty bitmask is the bare vacuum annihilated by
every ``psi_a(l)``.

Sign convention: a creator or annihilator acting on mode ``mu`` picks up
``(-1) ** (number of occupied modes with index < mu)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp

MAX_MODES = 24

DensityConfiguration = tuple[int, ...]


@dataclass(frozen=True)
class LatticeSpec:
    """Physical and discretisation parameters of the lattice model.

    ``interaction_power`` selects the lattice weight ``spacing ** power`` of the
    site-local quartic term; 1 is the one-dimensional choice.
    """

    L: int
    d: int = 2
    mass: float = 1.0
    coupling: float = 0.0
    spacing: float = 1.0
    interaction_power: int = 1

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.d not in (2, 4):
            raise ValueError(f"spinor dimension must be 2 or 4, got {self.d}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.L * self.d > MAX_MODES:
            raise ValueError(
                f"L*d = {self.L * self.d} modes exceeds the cap of {MAX_MODES}"
            )

    @property
    def n_modes(self) -> int:
        return self.L * self.d

    def mode(self, site: int, component: int) -> int:
        return site * self.d + component


def _parity_sign(bits: int) -> int:
    return -1 if bits.bit_count() & 1 else 1


def apply_creator(state: int, mode: int) -> Optional[tuple[int, int]]:
    """Apply ``psi^dagger_mode`` to the basis state ``state``.

    Returns ``(new_state, sign)``, or ``None`` when the mode is already
    occupied.
    """
    bit = 1 << mode
    if state & bit:
        return None
    return state | bit, _parity_sign(state & (bit - 1))


def apply_annihilator(state: int, mode: int) -> Optional[tuple[int, int]]:
    """Apply ``psi_mode`` to ``state``; ``None`` when the mode is empty."""
    bit = 1 << mode
    if not state & bit:
        return None
    return state ^ bit, _parity_sign(state & (bit - 1))


def configuration_of(state: int, spec: LatticeSpec) -> DensityConfiguration:
    """Per-site fermion counts of a basis state."""
    block = (1 << spec.d) - 1
    return tuple(
        ((state >> (l * spec.d)) & block).bit_count() for l in range(spec.L)
    )


def site_counts(states: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Vectorised :func:`configuration_of`; returns an ``(n, L)`` int array."""
    states = np.asarray(states, dtype=np.int64)
    block = np.int64((1 << spec.d) - 1)
    shifts = np.arange(spec.L, dtype=np.int64) * spec.d
    return np.bitwise_count((states[:, None] >> shifts[None, :]) & block).astype(
        np.int64
    )


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """All basis states with fermion number ``omega``, sorted by bitmask value.

    ``configurations`` lists the distinct density configurations in
    lexicographic order; ``config_index[i]`` is the configuration of state
    ``i``. Within one configuration the states differ only in their spinor
    component assignment, which plays the role of the degeneracy label q.
    """

    spec: LatticeSpec
    omega: Optional[int]
    states: np.ndarray
    counts: np.ndarray
    configurations: list[DensityConfiguration]
    config_index: np.ndarray
    _config_lookup: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def n_configs(self) -> int:
        return len(self.configurations)

    def index_of(self, state: int) -> int:
        i = int(np.searchsorted(self.states, state))
        if i >= len(self.states) or self.states[i] != state:
            raise KeyError(f"state {state:#b} is not in sector omega={self.omega}")
        return i

    def indices_of(self, states: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.states, states)

    def config_id(self, config: DensityConfiguration) -> int:
        try:
            return self._config_lookup[tuple(config)]
        except KeyError:
            raise KeyError(f"configuration {config} not in sector omega={self.omega}")

    def class_members(self, config: DensityConfiguration) -> np.ndarray:
        """Indices of the q-degenerate states sharing ``config``."""
        return np.flatnonzero(self.config_index == self.config_id(config))

    def degeneracy(self, config: DensityConfiguration) -> int:
        return len(self.class_members(config))

    @property
    def class_matrix(self) -> sp.csr_matrix:
        """Sparse 0/1 matrix of shape ``(n_configs, dim)`` summing q-classes."""
        return sp.csr_matrix(
            (np.ones(self.dim), (self.config_index, np.arange(self.dim))),
            shape=(self.n_configs, self.dim),
        )

    def to_dict(self) -> dict:
        return {
            "L": self.spec.L,
            "d": self.spec.d,
            "omega": self.omega,
            "dim": self.dim,
            "mode_order": "mu = site * d + component",
            "states": [int(s) for s in self.states],
            "configurations": [list(c) for c in self.configurations],
            "config_of_state": [int(c) for c in self.config_index],
        }


def enumerate_sector(spec: LatticeSpec, omega: Optional[int]) -> SectorBasis:
    """Build the fermion-number-``omega`` sector of the lattice Fock space.

    ``omega=None`` gives the whole Fock space (all ``2**M`` bitmasks), used to
    check that assembled operators never mix sectors.
    """
    M = spec.n_modes
    if omega is None:
        masks = np.arange(1 << M, dtype=np.int64)
    else:
        if not 0 <= omega <= M:
            raise ValueError(f"omega must lie in [0, {M}], got {omega}")
        masks = np.fromiter(
            (sum(1 << b for b in bits) for bits in itertools.combinations(range(M), omega)),
            dtype=np.int64,
            count=comb(M, omega),
        )
        masks.sort()
    counts = site_counts(masks, spec)
    uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
    configurations = [tuple(int(v) for v in row) for row in uniq]
    return SectorBasis(
        spec=spec,
        omega=omega,
        states=masks,
        counts=counts,
        configurations=configurations,
        config_index=inverse.reshape(-1).astype(np.int64),
        _config_lookup={c: i for i, c in enumerate(configurations)},
    )


def one_body_operator(
    sector: SectorBasis, coefficients: np.ndarray, tol: float = 0.0
) -> sp.csr_matrix:
    """Matrix of ``sum_{mu,nu} c[mu, nu] psi^dagger_mu psi_nu`` on ``sector``.

    The operator conserves fermion number, so it maps the sector to itself.
    """
    coefficients = np.asarray(coefficients)
    M = sector.spec.n_modes
    if coefficients.shape != (M, M):
        raise ValueError(f"expected a {M}x{M} coefficient matrix")
    states = sector.states
    rows, cols, vals = [], [], []
    for mu, nu in zip(*np.nonzero(np.abs(coefficients) > tol)):
        bit_nu = np.int64(1) << np.int64(nu)
        bit_mu = np.int64(1) << np.int64(mu)
        has_nu = (states & bit_nu) != 0
        mid = states ^ bit_nu
        ok = has_nu & ((mid & bit_mu) == 0)
        if not ok.any():
            continue
        src = np.flatnonzero(ok)
        mid = mid[ok]
        parity = np.bitwise_count(states[ok] & (bit_nu - 1)) + np.bitwise_count(
            mid & (bit_mu - 1)
        )
        sign = 1 - 2 * (parity.astype(np.int64) & 1)
        dst = sector.indices_of(mid | bit_mu)
        rows.append(dst)
        cols.append(src)
        vals.append(sign * coefficients[mu, nu])
    if not rows:
        return sp.csr_matrix((sector.dim, sector.dim), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sector.dim, sector.dim),
    )


def dense_mode_operators(n_modes: int) -> list[np.ndarray]:
    """Dense annihilators on the full ``2**n_modes`` space, via the scalar ops.

    Column/row index equals the bitmask. Intended for small ``n_modes``.
    """
    dim = 1 << n_modes
    ops = []
    for mu in range(n_modes):
        a = np.zeros((dim, dim))
        for s in range(dim):
            res = apply_annihilator(s, mu)
            if res is not None:
                a[res[0], s] = res[1]
        ops.append(a)
    return ops
