"""Independent oracles and the checks run by the ``verify`` engine.

Nothing here goes through the bitmask operator code: field operators are
Kronecker products, the one-body Dirac matrix is assembled from shift
matrices, and time evolution is classical RK4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .dynamics import (
    PilotTrajectory,
    build_free_hamiltonian,
    build_hamiltonian,
    dirac_matrices,
    evolve,
    number_operator,
)
from .fock import LatticeSpec, dense_mode_operators, enumerate_sector
from .presets import lattice_preset

_Z = np.diag([1.0, -1.0])
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])


def jordan_wigner_annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense ``psi_mu`` on ``2**n_modes`` states; row/column index equals the bitmask.

    Mode ``mu`` is bit ``mu``, so it is the ``mu``-th factor from the right.
    """
    ops = []
    for mu in range(n_modes):
        factors = [np.eye(2)] * (n_modes - 1 - mu) + [_LOWER] + [_Z] * mu
        ops.append(reduce(np.kron, factors, np.eye(1)))
    return ops


def car_violation(annihilators: list[np.ndarray]) -> float:
    """Largest entry of ``{a_mu, a_nu}`` and ``{a_mu, a_nu^dagger} - delta``."""
    n = len(annihilators)
    eye = np.eye(annihilators[0].shape[0])
    worst = 0.0
    for i in range(n):
        for j in range(n):
            a, b = annihilators[i], annihilators[j]
            worst = max(worst, np.max(np.abs(a @ b + b @ a)))
            bd = b.conj().T
            worst = max(worst, np.max(np.abs(a @ bd + bd @ a - (i == j) * eye)))
    return float(worst)


def first_quantized_matrix(spec: LatticeSpec) -> np.ndarray:
    """``-i alpha (x) D + m beta (x) 1`` with ``D = (S - S^T) / (2 spacing)``, site-major."""
    alpha, beta = dirac_matrices(spec.d)
    shift = np.roll(np.eye(spec.L), 1, axis=1)  # shift[l, l+1] = 1
    D = (shift - shift.T) / (2.0 * spec.spacing)
    return np.kron(-1j * D, alpha) + spec.mass * np.kron(np.eye(spec.L), beta)


def rk4_propagate(h: np.ndarray, psi0: np.ndarray, times, dt: float = 1e-3) -> np.ndarray:
    """Integrate ``i dpsi/dt = h psi`` with classical RK4; returns one row per time."""
    psi = np.asarray(psi0, dtype=complex)
    f = lambda y: -1j * (h @ y)
    out = []
    t = 0.0
    for target in times:
        n = max(1, int(np.ceil((target - t) / dt - 1e-12)))
        step = (target - t) / n
        for _ in range(n):
            k1 = f(psi)
            k2 = f(psi + 0.5 * step * k1)
            k3 = f(psi + 0.5 * step * k2)
            k4 = f(psi + step * k3)
            psi = psi + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = target
        out.append(psi.copy())
    return np.array(out)


def dense_hamiltonian_oracle(spec: LatticeSpec) -> np.ndarray:
    """Full-Fock-space Hamiltonian from Kronecker field operators."""
    a = jordan_wigner_annihilators(spec.n_modes)
    ad = [x.T for x in a]
    h = first_quantized_matrix(spec)
    _, beta = dirac_matrices(spec.d)
    dim = 1 << spec.n_modes
    H = np.zeros((dim, dim), dtype=complex)
    for mu, nu in zip(*np.nonzero(h)):
        H += h[mu, nu] * (ad[mu] @ a[nu])
    weight = spec.coupling * spec.spacing**spec.interaction_power
    if weight:
        for l in range(spec.L):
            s = np.zeros((dim, dim))
            for x in range(spec.d):
                for y in range(spec.d):
                    if beta[x, y]:
                        s += beta[x, y] * (ad[l * spec.d + x] @ a[l * spec.d + y])
            H += weight * (s @ s)
    return H


def commutator_with_number(spec: LatticeSpec) -> float:
    """``max |[H0 + HI, F]|`` with both operators assembled on the whole Fock space."""
    full = enumerate_sector(spec, None)
    H = build_hamiltonian(spec, full).dense()
    F = number_operator(full).toarray()
    return float(np.max(np.abs(H @ F - F @ H)))


def one_quantum_correspondence(spec: LatticeSpec, times, seed: int = 0, dt: float = 1e-3) -> float:
    """Max deviation between second-quantised omega=1 evolution and first-quantised RK4."""
    sector = enumerate_sector(spec, 1)
    H = build_free_hamiltonian(spec, sector)
    psi0 = lattice_preset(f"random({seed})", sector)
    # omega=1 basis state i is the single mode i
    order = np.array([int(s).bit_length() - 1 for s in sector.states])
    wave0 = np.zeros(spec.n_modes, dtype=complex)
    wave0[order] = psi0.amplitudes
    ref = rk4_propagate(first_quantized_matrix(spec), wave0, times, dt)
    worst = 0.0
    for t, r in zip(times, ref):
        amps = evolve(psi0, H, t).amplitudes
        worst = max(worst, float(np.max(np.abs(amps - r[order]))))
    return worst


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "passed": self.passed}


def run_checks(spec: LatticeSpec, seed: int = 0, n_times: int = 10) -> list[Check]:
    """Operator algebra, superselection, Dirac correspondence and master-equation checks."""
    from .bell import master_equation_residual, probability_currents

    checks = []
    if spec.n_modes <= 8:
        checks.append(Check("car_bitmask", car_violation(dense_mode_operators(spec.n_modes)), 0.0))
        checks.append(Check("car_kronecker", car_violation(jordan_wigner_annihilators(spec.n_modes)), 0.0))
        full = enumerate_sector(spec, None)
        H = build_hamiltonian(spec, full).dense()
        checks.append(Check("hamiltonian_vs_kronecker", float(np.max(np.abs(H - dense_hamiltonian_oracle(spec)))), 1e-12))
        checks.append(Check("commutator_H_F", commutator_with_number(spec), 1e-12))
    checks.append(Check("dirac_correspondence", one_quantum_correspondence(spec, np.linspace(0.1, 1.0, 10), seed), 1e-8))
    rng = np.random.default_rng(seed)
    for omega in sorted({1, min(2, spec.n_modes)}):
        sector = enumerate_sector(spec, omega)
        H = build_hamiltonian(spec, sector)
        pilot = PilotTrajectory(lattice_preset(f"random({seed + omega})", sector), H)
        times = rng.uniform(0.0, 2.0, n_times)
        worst = max(master_equation_residual(pilot, t) for t in times)
        checks.append(Check(f"master_equation_omega{omega}", worst, 1e-6))
        antisym = max(
            float(np.max(np.abs(J + J.T)))
            for J in (probability_currents(sector, H, pilot.amplitudes(t)) for t in times)
        )
        checks.append(Check(f"current_antisymmetry_omega{omega}", antisym, 1e-12))
        norm_drift = abs(np.linalg.norm(pilot.amplitudes(times.max())) - 1.0)
        checks.append(Check(f"unitarity_omega{omega}", float(norm_drift), 1e-10))
    return checks
