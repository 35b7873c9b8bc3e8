"""Deterministic guidance of fermion-number quanta in a periodic 1+1D box.

One-body orbitals are the free Dirac plane waves of the box,

    phi^+_k(x) = sqrt(m / (E_k l)) u(p_k) exp(+i p_k x),   energy +E_k
    phi^-_k(x) = sqrt(m / (E_k l)) v(p_k) exp(-i p_k x),   energy -E_k

with ``p_k = 2 pi k / l``, ``|k| <= n_max``, ``alpha = sigma_1``,
``beta = sigma_3`` and ``u^dagger u = v^dagger v = E / m``. They form an
orthonormal basis of the cut-off one-body space, so a state is a coefficient
vector (one quantum) or an antisymmetric coefficient matrix (two quanta) and
evolves by exact phases. Positions move with ``V = J / rho``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np


log = logging.getLogger(__name__)

EPS_RHO = 1e-10


class NodeError(RuntimeError):
    """Guidance evaluated where the density vanishes."""


class StepFloorError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ModeBasis:
    box_length: float = 20.0
    n_max: int = 32
    mass: float = 1.0

    def __post_init__(self):
        if not self.box_length > 0:
            raise ValueError("box length must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")

    @cached_property
    def k(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    @cached_property
    def momenta(self) -> np.ndarray:
        return 2.0 * np.pi * self.k / self.box_length

    @cached_property
    def energies(self) -> np.ndarray:
        return np.sqrt(self.momenta**2 + self.mass**2)

    @cached_property
    def u(self) -> np.ndarray:
        p, E, m = self.momenta, self.energies, self.mass
        n = np.sqrt((E + m) / (2 * m))
        return np.stack([n, n * p / (E + m)], axis=1).astype(complex)

    @cached_property
    def v(self) -> np.ndarray:
        p, E, m = self.momenta, self.energies, self.mass
        n = np.sqrt((E + m) / (2 * m))
        return np.stack([n * p / (E + m), n], axis=1).astype(complex)

    @property
    def n_modes(self) -> int:
        return len(self.k)

    @property
    def n_orbitals(self) -> int:
        return 2 * self.n_modes

    def orbital(self, k: int, branch: int = +1) -> int:
        """Orbital index of integer wavenumber ``k`` on the ``+E`` (1) or ``-E`` (-1) branch."""
        if abs(k) > self.n_max:
            raise ValueError(f"|k|={abs(k)} exceeds cutoff {self.n_max}")
        i = k + self.n_max
        return i if branch > 0 else self.n_modes + i

    @cached_property
    def orbital_energy(self) -> np.ndarray:
        return np.concatenate([self.energies, -self.energies])

    @cached_property
    def orbital_wavenumber(self) -> np.ndarray:
        return np.concatenate([self.momenta, -self.momenta])

    @cached_property
    def orbital_spinor(self) -> np.ndarray:
        w = np.sqrt(self.mass / (self.energies * self.box_length))
        return np.concatenate([w[:, None] * self.u, w[:, None] * self.v])

    def orbitals_at(self, x, which=None) -> np.ndarray:
        """``phi_o(x)_a`` at t=0, shape ``(len(x), n_selected, 2)``."""
        x = np.asarray(x, dtype=float)
        sel = slice(None) if which is None else which
        q = self.orbital_wavenumber[sel]
        return np.exp(1j * x[:, None] * q[None, :])[:, :, None] * self.orbital_spinor[sel][None]


@dataclass(frozen=True, eq=False)
class ContinuumState:
    """One- or two-quantum free Dirac state at time ``time``.

    ``coefficients`` are the orbital amplitudes at t=0: a vector for one
    quantum, a matrix ``A`` with ``Psi(x1, x2) = sum_ij A_ij phi_i(x1) phi_j(x2)``
    for two. Physical two-quantum states have ``A = -A^T``;
    ``distinguishable=True`` lifts that check for oracle-only product states.
    """

    basis: ModeBasis
    coefficients: np.ndarray
    time: float = 0.0
    distinguishable: bool = False

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        n = self.basis.n_orbitals
        if c.shape not in ((n,), (n, n)):
            raise ValueError(f"coefficients must have shape ({n},) or ({n}, {n})")
        if c.ndim == 2 and not self.distinguishable:
            err = np.max(np.abs(c + c.T))
            if err > 1e-12 * max(1.0, np.max(np.abs(c))):
                raise ValueError(f"two-quantum coefficients not antisymmetric (err {err:.2e})")
        object.__setattr__(self, "coefficients", c)

    @property
    def omega(self) -> int:
        return self.coefficients.ndim

    @property
    def norm(self) -> float:
        """``sqrt(int rho)``, by Parseval over the orthonormal orbitals."""
        return float(np.linalg.norm(self.coefficients))

    def normalized(self) -> "ContinuumState":
        return replace(self, coefficients=self.coefficients / self.norm)

    def at(self, t: float) -> "ContinuumState":
        return replace(self, time=float(t))

    def coefficients_at(self, t: Optional[float] = None) -> np.ndarray:
        t = self.time if t is None else t
        ph = np.exp(-1j * self.basis.orbital_energy * t)
        if self.omega == 1:
            return self.coefficients * ph
        return self.coefficients * ph[:, None] * ph[None, :]

    @cached_property
    def active(self) -> np.ndarray:
        c = np.abs(self.coefficients)
        if self.omega == 2:
            c = c.max(axis=0) + c.max(axis=1)
        return np.flatnonzero(c > 0.0)

    @cached_property
    def _factors(self):
        # A = U diag(s) V^H on the active orbitals
        act = self.active
        A = self.coefficients[np.ix_(act, act)]
        U, s, Vh = np.linalg.svd(A)
        keep = s > 1e-14 * s[0] if s.size and s[0] > 0 else np.zeros(0, dtype=bool)
        return U[:, keep] * s[keep], Vh[keep].T

    def one_body_factors(self, x, t=None):
        """Per-rank one-body functions ``F_r(x), G_r(x)``, each ``(len(x), rank, 2)``."""
        t = self.time if t is None else t
        act = self.active
        ph = np.exp(-1j * self.basis.orbital_energy[act] * t)
        U, V = self._factors
        phi = self.basis.orbitals_at(x, act)
        F = np.einsum("noa,or->nra", phi, ph[:, None] * U)
        G = np.einsum("noa,or->nra", phi, ph[:, None] * V)
        return F, G


def evaluate_wavefunction(state: ContinuumState, X, t: Optional[float] = None) -> np.ndarray:
    """Spinor amplitudes at configuration(s) ``X``.

    One quantum: ``X`` has shape ``(n,)`` or ``(n, 1)``; returns ``(n, 2)``.
    Two quanta: ``X`` has shape ``(n, 2)``; returns ``(n, 2, 2)`` indexed
    ``[point, a1, a2]``.
    """
    X = np.asarray(X, dtype=float)
    t = state.time if t is None else t
    if state.omega == 1:
        x = X.reshape(-1)
        act = state.active
        c = state.coefficients_at(t)[act]
        return np.einsum("noa,o->na", state.basis.orbitals_at(x, act), c)
    X = X.reshape(-1, 2)
    F1, G1 = state.one_body_factors(X[:, 0], t)
    F2, G2 = state.one_body_factors(X[:, 1], t)
    return np.einsum("nra,nrb->nab", F1, G2)


def _rho_current(state: ContinuumState, X, t=None):
    psi = evaluate_wavefunction(state, X, t)
    if state.omega == 1:
        rho = np.sum(np.abs(psi) ** 2, axis=1)
        j = 2.0 * np.real(np.conj(psi[:, 0]) * psi[:, 1])
        return rho, j[:, None]
    rho = np.sum(np.abs(psi) ** 2, axis=(1, 2))
    j1 = 2.0 * np.real(np.sum(np.conj(psi[:, 0, :]) * psi[:, 1, :], axis=1))
    j2 = 2.0 * np.real(np.sum(np.conj(psi[:, :, 0]) * psi[:, :, 1], axis=1))
    return rho, np.stack([j1, j2], axis=1)


def density(state: ContinuumState, X, t=None) -> np.ndarray:
    """``rho = sum_a |Psi_a(X)|^2`` at each configuration."""
    return _rho_current(state, X, t)[0]


def current(state: ContinuumState, X, t=None) -> np.ndarray:
    """Configuration-space current, shape ``(n, omega)``: ``alpha`` contracted at slot i."""
    return _rho_current(state, X, t)[1]


def velocity(state: ContinuumState, X, t=None, eps_rho: float = EPS_RHO) -> np.ndarray:
    """``V = J / rho``; raises :class:`NodeError` where ``rho < eps_rho``."""
    rho, j = _rho_current(state, X, t)
    if np.any(rho < eps_rho):
        raise NodeError(f"density {rho.min():.3e} below {eps_rho:.1e}")
    return j / rho[:, None]


def _velocity_masked(state, X, t, eps_rho):
    rho, j = _rho_current(state, X, t)
    ok = rho >= eps_rho
    v = np.zeros_like(j)
    v[ok] = j[ok] / rho[ok, None]
    return v.reshape(X.shape), ok


@dataclass
class ContinuumTrajectory:
    times: np.ndarray
    positions: np.ndarray
    aborted: Optional[str] = None


def _rk4(state, X, t, h, eps_rho):
    k1, ok1 = _velocity_masked(state, X, t, eps_rho)
    k2, ok2 = _velocity_masked(state, X + 0.5 * h * k1, t + 0.5 * h, eps_rho)
    k3, ok3 = _velocity_masked(state, X + 0.5 * h * k2, t + 0.5 * h, eps_rho)
    k4, ok4 = _velocity_masked(state, X + h * k3, t + h, eps_rho)
    ok = ok1 & ok2 & ok3 & ok4
    return X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), ok


def _guarded_step(state, x, t, h, eps_rho, dt_min):
    """RK4 step of one configuration, halving on node contact."""
    new, ok = _rk4(state, x[None, :], t, h, eps_rho)
    if ok.all():
        return new[0]
    if abs(h) / 2 < dt_min:
        raise StepFloorError(f"node contact at t={t:.6g}: step halved below floor {dt_min:.1e}")
    mid = _guarded_step(state, x, t, h / 2, eps_rho, dt_min)
    return _guarded_step(state, mid, t + h / 2, h / 2, eps_rho, dt_min)


def _time_grid(t0, t_max, dt, checkpoints=()):
    """Step boundaries of magnitude ``<= |dt|`` landing exactly on every checkpoint."""
    sign = 1.0 if t_max >= t0 else -1.0
    stops = sorted({float(c) for c in checkpoints if min(t0, t_max) < c < max(t0, t_max)} | {t_max},
                   reverse=sign < 0)
    grid = [float(t0)]
    for stop in stops:
        start = grid[-1]
        n = max(1, int(np.ceil(abs(stop - start) / abs(dt) - 1e-9)))
        grid.extend(start + (stop - start) * np.arange(1, n + 1) / n)
        grid[-1] = stop
    return np.asarray(grid)


def integrate_trajectory(
    state: ContinuumState,
    X0,
    t_max: float,
    dt: float = 1e-3,
    eps_rho: float = EPS_RHO,
    dt_min: float = 1e-8,
) -> ContinuumTrajectory:
    """Classical RK4 integration of ``dX/dt = J/rho`` from ``state.time`` to ``t_max``.

    Steps are shrunk by halving on node contact, down to ``dt_min``; positions
    are wrapped into ``[0, box_length)`` after every step. Integration runs
    backwards when ``t_max < state.time``.
    """
    X = np.asarray(X0, dtype=float).reshape(state.omega)
    ell = state.basis.box_length
    if density(state, X[None, :])[0] < eps_rho:
        raise NodeError("initial configuration sits on a node")
    times = _time_grid(state.time, t_max, dt)
    out = np.empty((len(times), state.omega))
    out[0] = np.mod(X, ell)
    for i in range(len(times) - 1):
        X = np.mod(_guarded_step(state, X, times[i], times[i + 1] - times[i], eps_rho, dt_min), ell)
        out[i + 1] = X
    return ContinuumTrajectory(times, out)


@dataclass(eq=False)
class ContinuumEnsemble:
    times: np.ndarray
    checkpoint_times: list
    checkpoint_positions: np.ndarray
    aborted: np.ndarray
    sample_paths: np.ndarray
    seeds: np.ndarray


def integrate_ensemble(
    state: ContinuumState,
    X0: np.ndarray,
    t_max: float,
    dt: float,
    checkpoints=(),
    eps_rho: float = EPS_RHO,
    dt_min: float = 1e-8,
    keep_paths: int = 0,
    seeds=None,
) -> ContinuumEnsemble:
    """Vectorised RK4 for many configurations; node hits fall back to the guarded scalar step.

    ``checkpoint_positions`` has shape ``(n_checkpoints, n, omega)``; rows of
    aborted trajectories are NaN.
    """
    X = np.mod(np.asarray(X0, dtype=float).reshape(-1, state.omega), state.basis.box_length)
    ell = state.basis.box_length
    times = _time_grid(state.time, t_max, dt, checkpoints)
    ckpts = sorted({float(c) for c in checkpoints} | ({float(t_max)} if not checkpoints else set()))
    ck_idx = {c: int(np.argmin(np.abs(times - c))) for c in ckpts}
    snaps = np.full((len(ckpts), len(X), state.omega), np.nan)
    aborted = np.zeros(len(X), dtype=bool)
    paths = np.full((len(times), min(keep_paths, len(X)), state.omega), np.nan)
    for i, c in enumerate(ckpts):
        if ck_idx[c] == 0:
            snaps[i] = X
    paths[0] = X[: paths.shape[1]]
    for s in range(len(times) - 1):
        t, h = times[s], times[s + 1] - times[s]
        new, ok = _rk4(state, X, t, h, eps_rho)
        for n in np.flatnonzero(~ok & ~aborted):
            try:
                new[n] = _guarded_step(state, X[n], t, h, eps_rho, dt_min)
            except StepFloorError as exc:
                log.warning("trajectory %d aborted: %s", n, exc)
                aborted[n] = True
        X = np.mod(new, ell)
        X[aborted] = np.nan
        paths[s + 1] = X[: paths.shape[1]]
        for i, c in enumerate(ckpts):
            if ck_idx[c] == s + 1:
                snaps[i] = X
    return ContinuumEnsemble(times, ckpts, snaps, aborted, paths,
                             np.asarray(seeds if seeds is not None else [], dtype=np.uint64))


def sample_positions(state: ContinuumState, seeds, batch: int = 64) -> np.ndarray:
    """One configuration per seed, distributed as ``rho(state.time, X)``.

    Rejection sampling under a grid bound on ``rho``; each seed owns its
    proposal stream so results do not depend on the ensemble size.
    """
    from .stats import generator

    seeds = np.asarray(seeds, dtype=np.uint64)
    ell = state.basis.box_length
    w = state.omega
    bound = 1.25 * _density_bound(state)
    out = np.full((len(seeds), w), np.nan)
    gens = [generator(int(s), 2) for s in seeds]
    pending = np.arange(len(seeds))
    rounds = 0
    while pending.size:
        props = np.stack([gens[i].random((batch, w + 1)) for i in pending])
        X = props[:, :, :w] * ell
        rho = density(state, X.reshape(-1, w)).reshape(len(pending), batch)
        if np.any(rho > bound):
            raise RuntimeError("density exceeded its sampling bound; refine the bound grid")
        accept = props[:, :, w] * bound < rho
        first = np.argmax(accept, axis=1)
        got = accept[np.arange(len(pending)), first]
        out[pending[got]] = X[got, first[got]]
        pending = pending[~got]
        rounds += 1
        if rounds > 10000:
            raise RuntimeError("rejection sampler failed to converge")
    return out


def _density_bound(state: ContinuumState) -> float:
    q = state.basis.orbital_wavenumber[state.active]
    span = (q.max() - q.min()) if q.size else 0.0
    n = int(max(64, np.ceil(8 * span * state.basis.box_length / (2 * np.pi))))
    xs = (np.arange(n) + 0.5) * state.basis.box_length / n
    if state.omega == 1:
        return float(density(state, xs).max())
    n = min(n, 512)
    xs = (np.arange(n) + 0.5) * state.basis.box_length / n
    return float(grid_fields(state, xs)[0].max())


def grid_fields(state: ContinuumState, xs, t=None):
    """``rho`` and currents on a tensor grid.

    One quantum: ``(rho[g], j[g])``. Two quanta: ``(rho[g1, g2], j1, j2)``.
    """
    xs = np.asarray(xs, dtype=float)
    t = state.time if t is None else t
    if state.omega == 1:
        rho, j = _rho_current(state, xs, t)
        return rho, j[:, 0]
    F, G = state.one_body_factors(xs, t)
    psi = np.einsum("xra,yrb->xyab", F, G)
    rho = np.sum(np.abs(psi) ** 2, axis=(2, 3))
    j1 = 2.0 * np.real(np.sum(np.conj(psi[:, :, 0, :]) * psi[:, :, 1, :], axis=2))
    j2 = 2.0 * np.real(np.sum(np.conj(psi[:, :, :, 0]) * psi[:, :, :, 1], axis=2))
    return rho, j1, j2


def continuity_residual(
    state: ContinuumState, n_grid: int = 64, h: float = 1e-5, method: str = "central"
) -> float:
    """Max-norm of ``d rho/dt + div J`` on a uniform periodic grid.

    Time derivative: central difference of exact mode phases. Divergence:
    second-order central difference (``method="central"``) or FFT
    differentiation (``method="spectral"``).
    """
    if method not in ("central", "spectral"):
        raise ValueError(f"unknown divergence method {method!r}")
    ell = state.basis.box_length
    xs = np.arange(n_grid) * ell / n_grid
    dx = ell / n_grid
    t = state.time
    fields = grid_fields(state, xs, t)
    drho = (grid_fields(state, xs, t + h)[0] - grid_fields(state, xs, t - h)[0]) / (2 * h)
    div = np.zeros_like(drho)
    ik = 2j * np.pi * np.fft.fftfreq(n_grid, d=dx)
    for axis, j in enumerate(fields[1:]):
        if method == "central":
            div += (np.roll(j, -1, axis=axis) - np.roll(j, 1, axis=axis)) / (2 * dx)
        else:
            shape = [1] * j.ndim
            shape[axis] = n_grid
            div += np.real(np.fft.ifft(ik.reshape(shape) * np.fft.fft(j, axis=axis), axis=axis))
    return float(np.max(np.abs(drho + div)))


@dataclass(frozen=True)
class CoarseGrid:
    box_length: float
    n_boxes: int

    def __post_init__(self):
        if self.n_boxes < 1:
            raise ValueError("need at least one box")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_boxes

    def box_of(self, x) -> np.ndarray:
        """0-based box index, boxes left-closed: ``[l*lam, (l+1)*lam)``."""
        x = np.mod(np.asarray(x, dtype=float), self.box_length)
        idx = np.floor(x / self.spacing).astype(np.int64)
        # guard rounding so that x == l*lam lands in box l
        edge = (idx + 1) * self.spacing
        idx = np.where(x >= edge, idx + 1, idx)
        return np.clip(idx, 0, self.n_boxes - 1)


def coarse_grain(X, grid: CoarseGrid) -> tuple[int, ...]:
    """Box counts ``n_l`` of the particle positions ``X``."""
    boxes = grid.box_of(np.atleast_1d(X))
    return tuple(int(c) for c in np.bincount(boxes, minlength=grid.n_boxes))


def box_probabilities(state: ContinuumState, grid: CoarseGrid, nodes: int = 12) -> np.ndarray:
    """``int rho`` over each box (one quantum) or box pair (two quanta), Gauss-Legendre."""
    g, wts = np.polynomial.legendre.leggauss(nodes)
    lam = grid.spacing
    left = np.arange(grid.n_boxes) * lam
    xs = (left[:, None] + 0.5 * lam * (g[None, :] + 1)).ravel()
    w = np.tile(0.5 * lam * wts, grid.n_boxes)
    rho = grid_fields(state, xs)[0]
    if state.omega == 1:
        return (rho * w).reshape(grid.n_boxes, nodes).sum(axis=1)
    cell = (rho * w[:, None] * w[None, :]).reshape(grid.n_boxes, nodes, grid.n_boxes, nodes)
    return cell.sum(axis=(1, 3))


def configuration_marginal(state: ContinuumState, grid: CoarseGrid, nodes: int = 12) -> dict:
    """Probability of each box-count configuration ``n`` under ``rho``."""
    P = box_probabilities(state, grid, nodes)
    out: dict = {}
    if state.omega == 1:
        for l, p in enumerate(P):
            out[coarse_grain([(l + 0.5) * grid.spacing], grid)] = float(p)
        return out
    for l1 in range(grid.n_boxes):
        for l2 in range(grid.n_boxes):
            n = coarse_grain([(l1 + 0.5) * grid.spacing, (l2 + 0.5) * grid.spacing], grid)
            out[n] = out.get(n, 0.0) + float(P[l1, l2])
    return out


@dataclass(frozen=True)
class FactorizabilityResult:
    singular_values: np.ndarray
    ratio: float
    verdict: str


def nonfactorizability_check(
    state: ContinuumState, n_grid: int = 64, threshold: float = 1e-6
) -> FactorizabilityResult:
    """Singular spectrum of ``j1(x1, x2)`` sampled on a grid.

    A product ``jA(x1) jB(x2)`` is a rank-1 matrix; ``sigma_2/sigma_1 > threshold``
    means no such factorisation exists.
    """
    if state.omega != 2:
        raise ValueError("non-factorizability needs a two-quantum state")
    xs = (np.arange(n_grid) + 0.5) * state.basis.box_length / n_grid
    rho, j1, _ = grid_fields(state, xs)
    s = np.linalg.svd(j1, compute_uv=False)
    scale = np.linalg.norm(rho, 2)
    if s[0] <= 1e-10 * scale:
        return FactorizabilityResult(s, float("nan"), "indeterminate")
    ratio = float(s[1] / s[0]) if s.size > 1 else 0.0
    return FactorizabilityResult(s, ratio, "non-factorizable" if ratio > threshold else "factorizable")
