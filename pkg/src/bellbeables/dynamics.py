"""Lattice Hamiltonians, pilot-state evolution and configuration marginals."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .fock import DensityConfiguration, LatticeSpec, SectorBasis, one_body_operator

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA3 = np.diag([1.0, -1.0])


def dirac_matrices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """``(alpha_1, beta)`` in the representation used throughout.

    d=2: ``alpha = sigma_1``, ``beta = sigma_3``. d=4: standard Dirac
    representation, ``alpha_1 = [[0, s1], [s1, 0]]``, ``beta = diag(1,1,-1,-1)``.
    """
    if d == 2:
        return SIGMA1.copy(), SIGMA3.copy()
    if d == 4:
        alpha = np.zeros((4, 4))
        alpha[:2, 2:] = SIGMA1
        alpha[2:, :2] = SIGMA1
        return alpha, np.diag([1.0, 1.0, -1.0, -1.0])
    raise ValueError(f"unsupported spinor dimension {d}")


def free_one_body_matrix(spec: LatticeSpec) -> np.ndarray:
    """Single-particle lattice Dirac matrix over modes ``(site, component)``.

    Central difference with periodic wrap; the two neighbour contributions are
    accumulated, so they cancel for L=1 and L=2.
    """
    alpha, beta = dirac_matrices(spec.d)
    d, L = spec.d, spec.L
    h = np.zeros((L * d, L * d), dtype=complex)
    hop = -1j / (2.0 * spec.spacing) * alpha
    for l in range(L):
        here = slice(l * d, (l + 1) * d)
        right = (l + 1) % L
        left = (l - 1) % L
        h[here, right * d : (right + 1) * d] += hop
        h[here, left * d : (left + 1) * d] -= hop
        h[here, here] += spec.mass * beta
    return h


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Sparse Hamiltonian restricted to one fermion-number sector.

    The eigendecomposition used by :func:`evolve` is computed once on first
    use, under a lock.
    """

    sector: SectorBasis
    matrix: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def hermitian(self) -> bool:
        return hermiticity_error(self.matrix) <= 1e-12

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other: "HamiltonianMatrix") -> "HamiltonianMatrix":
        if other.sector is not self.sector:
            raise ValueError("cannot add Hamiltonians on different sectors")
        return HamiltonianMatrix(self.sector, (self.matrix + other.matrix).tocsr())

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        with self._lock:
            if "eigh" not in self._cache:
                if hermiticity_error(self.matrix) > 1e-10:
                    raise RuntimeError("eigendecomposition requires a hermitian matrix")
                a = self.dense()
                w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
                self._cache["eigh"] = (w, v)
            return self._cache["eigh"]

    def propagator(self, dt: float) -> np.ndarray:
        w, v = self.eigh()
        return (v * np.exp(-1j * w * dt)) @ v.conj().T


def hermiticity_error(m) -> float:
    diff = m - m.conj().T
    if sp.issparse(diff):
        return float(abs(diff).max()) if diff.nnz else 0.0
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def _check_sector(spec: LatticeSpec, sector: SectorBasis):
    if sector.spec != spec:
        raise ValueError("sector was built for a different lattice spec")


def build_free_hamiltonian(spec: LatticeSpec, sector: SectorBasis) -> HamiltonianMatrix:
    """Second-quantised free Dirac Hamiltonian, normal ordered against the bare vacuum."""
    _check_sector(spec, sector)
    return HamiltonianMatrix(sector, one_body_operator(sector, free_one_body_matrix(spec)))


def site_scalar_density(spec: LatticeSpec, sector: SectorBasis, site: int) -> sp.csr_matrix:
    """``psi^dagger(l) beta psi(l)`` on the sector."""
    _, beta = dirac_matrices(spec.d)
    c = np.zeros((spec.n_modes, spec.n_modes))
    block = slice(site * spec.d, (site + 1) * spec.d)
    c[block, block] = beta
    return one_body_operator(sector, c)


def build_interaction(spec: LatticeSpec, sector: SectorBasis) -> HamiltonianMatrix:
    """Site-local quartic term ``g * spacing**p * sum_l (psi^dagger(l) beta psi(l))**2``."""
    _check_sector(spec, sector)
    total = sp.csr_matrix((sector.dim, sector.dim), dtype=complex)
    if spec.coupling != 0.0:
        weight = spec.coupling * spec.spacing**spec.interaction_power
        for l in range(spec.L):
            s = site_scalar_density(spec, sector, l)
            total = total + weight * (s @ s)
    return HamiltonianMatrix(sector, total.tocsr())


def build_hamiltonian(spec: LatticeSpec, sector: SectorBasis) -> HamiltonianMatrix:
    return build_free_hamiltonian(spec, sector) + build_interaction(spec, sector)


def number_operator(sector: SectorBasis) -> sp.csr_matrix:
    """Total fermion number ``F``, diagonal in the occupation basis."""
    return sp.diags(np.bitwise_count(sector.states).astype(float), format="csr")


@dataclass(frozen=True, eq=False)
class PilotState:
    sector: SectorBasis
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.sector.dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, sector dim is {self.sector.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PilotState":
        return replace(self, amplitudes=self.amplitudes / self.norm)

    def energy(self, H: HamiltonianMatrix) -> float:
        return float(np.real(np.vdot(self.amplitudes, H.matrix @ self.amplitudes)))


def evolve(state: PilotState, H: HamiltonianMatrix, dt: float) -> PilotState:
    """Exact Schrodinger evolution ``exp(-i H dt)`` via the cached eigenbasis."""
    if H.sector is not state.sector:
        raise ValueError("state and Hamiltonian live on different sectors")
    if dt == 0:
        return replace(state)
    w, v = H.eigh()
    coeff = v.conj().T @ state.amplitudes
    amps = v @ (np.exp(-1j * w * dt) * coeff)
    return PilotState(state.sector, amps, state.time + dt)


class PilotTrajectory:
    """``Psi(t)`` for arbitrary ``t`` from one initial state, via the eigenbasis."""

    def __init__(self, state0: PilotState, H: HamiltonianMatrix):
        if H.sector is not state0.sector:
            raise ValueError("state and Hamiltonian live on different sectors")
        self.state0 = state0
        self.H = H
        self._w, self._v = H.eigh()
        self._coeff = self._v.conj().T @ state0.amplitudes

    @property
    def t0(self) -> float:
        return self.state0.time

    def amplitudes(self, t: float) -> np.ndarray:
        return self._v @ (np.exp(-1j * self._w * (t - self.t0)) * self._coeff)

    def at(self, t: float) -> PilotState:
        return PilotState(self.state0.sector, self.amplitudes(t), t)


def marginal_vector(state: PilotState) -> np.ndarray:
    """Configuration probabilities ordered as ``sector.configurations``."""
    sector = state.sector
    return np.bincount(
        sector.config_index, weights=np.abs(state.amplitudes) ** 2, minlength=sector.n_configs
    )


def marginal_distribution(state: PilotState) -> dict[DensityConfiguration, float]:
    """``P_n = sum_q |<n q|Psi>|^2`` for every configuration of the sector."""
    p = marginal_vector(state)
    return {c: float(p[i]) for i, c in enumerate(state.sector.configurations)}
