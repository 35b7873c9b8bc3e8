"""Bell's stochastic jump process for the lattice fermion-number density.

The pilot state fixes, at each time, a net probability current ``J[n, m]``
between configurations. A trajectory in configuration ``m`` jumps to ``n`` at
rate ``T[n, m] = max(J[n, m], 0) / D[m]`` with ``D[m]`` the marginal of ``m``.

Sampling uses thinning on a shared step schedule: every step has
``max_m exit_rate(m) * dt <= 0.1`` (over configurations with non-negligible
weight), rates are evaluated at the step midpoint, and a trajectory in ``m``
jumps with probability ``T[n, m] * dt``. The schedule does not depend on any
random draw, so trajectories are independent and each one is reproducible
from its own 64-bit seed.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .dynamics import HamiltonianMatrix, PilotState, PilotTrajectory, marginal_vector
from .fock import DensityConfiguration, SectorBasis
from .stats import derive_seed, generator, multinomial_tv_band, total_variation

log = logging.getLogger(__name__)

EPS_D = 1e-12
MAX_JUMP_PROB = 0.1
TV_SLACK = 1e-12


class PhysicsAbort(RuntimeError):
    """A trajectory reached a singular point of the guidance law."""


class NodeVisitError(PhysicsAbort):
    pass


class StepFloorError(PhysicsAbort):
    pass


def probability_currents(sector: SectorBasis, H: HamiltonianMatrix, amplitudes) -> np.ndarray:
    """Net currents ``J[n, m] = 2 Re sum_qp <Psi|nq><nq|-iH|mp><mp|Psi>``.

    Returned as a dense antisymmetric ``(n_configs, n_configs)`` array.
    """
    psi = np.asarray(amplitudes, dtype=complex)
    h = H.matrix.tocoo()
    # Re(-i z) = Im(z)
    k = 2.0 * np.imag(np.conj(psi[h.row]) * h.data * psi[h.col])
    ci = sector.config_index
    J = np.zeros((sector.n_configs, sector.n_configs))
    np.add.at(J, (ci[h.row], ci[h.col]), k)
    np.fill_diagonal(J, 0.0)
    return J


def rate_matrix(J: np.ndarray, D: np.ndarray, eps_d: float = EPS_D) -> np.ndarray:
    """``T[n, m] = J[n, m] / D[m]`` where ``J[n, m] > 0``, zero otherwise.

    Columns of configurations with ``D[m] < eps_d`` are zeroed; a trajectory
    standing there is aborted by the sampler instead.
    """
    T = np.where(J > 0.0, J, 0.0)
    ok = (D >= eps_d) & (D > 0.0)
    T[:, ok] /= D[ok]
    T[:, ~ok] = 0.0
    return T


@dataclass(frozen=True)
class JumpRateTable:
    time: float
    source: DensityConfiguration
    rates: dict
    source_weight: float
    currents: dict = field(default_factory=dict)

    @property
    def exit_rate(self) -> float:
        return float(sum(self.rates.values()))


def jump_rates(
    state: PilotState, H: HamiltonianMatrix, m: DensityConfiguration, eps_d: float = EPS_D
) -> JumpRateTable:
    """Jump rates out of configuration ``m`` for the pilot state at its current time."""
    sector = state.sector
    J = probability_currents(sector, H, state.amplitudes)
    D = marginal_vector(state)
    j = sector.config_id(m)
    if D[j] < eps_d:
        raise NodeVisitError(
            f"configuration {m} has weight {D[j]:.3e} < {eps_d:.1e} at t={state.time}"
        )
    currents = {}
    rates = {}
    for i, n in enumerate(sector.configurations):
        if i == j or J[i, j] == 0.0:
            continue
        currents[n] = float(J[i, j])
        if J[i, j] > 0.0:
            rates[n] = float(J[i, j] / D[j])
    return JumpRateTable(state.time, tuple(m), rates, float(D[j]), currents)


def bell_rate_function(pilot: PilotTrajectory, eps_d: float = EPS_D):
    sector = pilot.state0.sector
    H = pilot.H
    C = sector.class_matrix

    def rates(t: float):
        psi = pilot.amplitudes(t)
        D = C @ (np.abs(psi) ** 2)
        J = probability_currents(sector, H, psi)
        return rate_matrix(J, D, eps_d), D

    return rates


@dataclass(frozen=True, eq=False)
class RateSchedule:
    """Step boundaries and midpoint rates shared by all trajectories.

    ``rates[k, n, m]`` and ``weights[k, m]`` are evaluated at the midpoint of
    step ``k``, which runs from ``times[k]`` to ``times[k + 1]``.
    """

    times: np.ndarray
    rates: np.ndarray
    weights: np.ndarray
    checkpoint_steps: dict

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def build_schedule(
    rate_fn: Callable[[float], tuple[np.ndarray, np.ndarray]],
    t0: float,
    t_max: float,
    dt_ctrl: float,
    checkpoints: Iterable[float] = (),
    max_jump_prob: float = MAX_JUMP_PROB,
    dt_min: float = 1e-9,
    eps_d: float = EPS_D,
) -> RateSchedule:
    if not dt_ctrl > 0:
        raise ValueError("dt_ctrl must be positive")
    if t_max < t0:
        raise ValueError("t_max must not precede t0")
    stops = sorted({float(c) for c in checkpoints if t0 < c <= t_max} | {float(t_max)})
    times = [float(t0)]
    rates, weights = [], []
    checkpoint_steps = {float(c): 0 for c in checkpoints if c == t0}
    t = float(t0)
    for stop in stops:
        while t < stop:
            remaining = stop - t
            dt = min(dt_ctrl, remaining)
            while True:
                T, D = rate_fn(t + 0.5 * dt)
                exit_rates = T.sum(axis=0)[D >= eps_d]
                r_max = float(exit_rates.max()) if exit_rates.size else 0.0
                if r_max * dt <= max_jump_prob:
                    break
                dt = max_jump_prob / r_max
                if dt < dt_min:
                    raise StepFloorError(
                        f"exit rate {r_max:.3e} at t={t:.6g} needs dt below floor {dt_min:.1e}"
                    )
            t = stop if dt == remaining else t + dt
            times.append(t)
            rates.append(T)
            weights.append(D)
        checkpoint_steps[stop] = len(times) - 1
    if not rates:
        # t_max == t0: no steps, shapes taken from one evaluation
        T, D = rate_fn(t0)
        rates, weights = np.zeros((0, *T.shape)), np.zeros((0, *D.shape))
    return RateSchedule(
        times=np.asarray(times),
        rates=np.asarray(rates),
        weights=np.asarray(weights),
        checkpoint_steps={c: checkpoint_steps[c] for c in sorted(checkpoint_steps)},
    )


@dataclass
class BeableTrajectory:
    """Piecewise-constant configuration history of one universe."""

    times: np.ndarray
    configs: list
    rng_seed: int
    jumps: list = field(default_factory=list)
    aborted: Optional[str] = None

    def config_at(self, t: float) -> DensityConfiguration:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i < 0 or t > self.times[-1]:
            raise ValueError(f"time {t} outside trajectory span")
        return self.configs[i]

    @property
    def omega(self) -> int:
        return sum(self.configs[0])


@dataclass(eq=False)
class EnsembleResult:
    """Array form of many trajectories sampled on one schedule."""

    configurations: list
    schedule: RateSchedule
    seeds: np.ndarray
    initial: np.ndarray
    checkpoint_times: list
    checkpoint_ids: np.ndarray
    jump_traj: np.ndarray
    jump_step: np.ndarray
    jump_src: np.ndarray
    jump_dst: np.ndarray
    abort_step: np.ndarray
    master_seed: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.seeds)

    @property
    def n_aborted(self) -> int:
        return int((self.abort_step >= 0).sum())

    def trajectory(self, i: int) -> BeableTrajectory:
        sel = self.jump_traj == i
        times = self.schedule.times
        steps = self.jump_step[sel]
        cfgs = self.configurations
        configs = [cfgs[self.initial[i]]]
        jump_times = [float(times[0])]
        jumps = []
        for k, a, b in zip(steps, self.jump_src[sel], self.jump_dst[sel]):
            tj = float(times[k + 1])
            jump_times.append(tj)
            configs.append(cfgs[b])
            jumps.append((tj, cfgs[a], cfgs[b]))
        aborted = None
        end = float(times[-1])
        if self.abort_step[i] >= 0:
            end = float(times[self.abort_step[i]])
            aborted = f"node visit at t={end:.6g}"
        jump_times.append(end)
        configs.append(configs[-1])
        return BeableTrajectory(np.asarray(jump_times), configs, int(self.seeds[i]), jumps, aborted)

    def trajectories(self) -> list[BeableTrajectory]:
        return [self.trajectory(i) for i in range(self.size)]


def _run_chunk(schedule: RateSchedule, seeds, init_ids, eps_d: float, record_steps):
    K = schedule.n_steps
    n_traj = len(seeds)
    uniforms = np.empty((K, n_traj, 2))
    for j, s in enumerate(seeds):
        uniforms[:, j, :] = generator(int(s)).random((K, 2))
    cur = np.array(init_ids, dtype=np.int64)
    alive = np.ones(n_traj, dtype=bool)
    abort_step = np.full(n_traj, -1, dtype=np.int64)
    record = {k: i for i, k in enumerate(record_steps)}
    snapshots = np.full((len(record_steps), n_traj), -1, dtype=np.int64)
    if 0 in record:
        snapshots[record[0]] = cur
    events = []
    times = schedule.times
    for k in range(K):
        T = schedule.rates[k]
        D = schedule.weights[k]
        dt = times[k + 1] - times[k]
        node = alive & (D[cur] < eps_d)
        if node.any():
            alive &= ~node
            abort_step[node] = k
        cols = T[:, cur]
        exit_rate = cols.sum(axis=0)
        jump = alive & (uniforms[k, :, 0] < exit_rate * dt)
        if jump.any():
            idx = np.flatnonzero(jump)
            cdf = np.cumsum(cols[:, idx], axis=0) / exit_rate[idx]
            dst = np.minimum((cdf <= uniforms[k, idx, 1]).sum(axis=0), cdf.shape[0] - 1)
            events.append((idx, np.full(len(idx), k), cur[idx].copy(), dst))
            cur[idx] = dst
        if k + 1 in record:
            snapshots[record[k + 1]] = np.where(alive, cur, -1)
    if events:
        ev = [np.concatenate(parts) for parts in zip(*events)]
        order = np.lexsort((ev[1], ev[0]))
        ev = [e[order] for e in ev]
    else:
        ev = [np.zeros(0, dtype=np.int64)] * 4
    return snapshots, ev, abort_step


def run_ensemble(
    schedule: RateSchedule,
    configurations: Sequence[DensityConfiguration],
    seeds: np.ndarray,
    initial: np.ndarray,
    eps_d: float = EPS_D,
    chunk_size: int = 1024,
    threads: Optional[int] = None,
    master_seed: Optional[int] = None,
) -> EnsembleResult:
    """Sample trajectories ``i`` from ``configurations[initial[i]]`` with seeds ``seeds[i]``.

    Results do not depend on ``chunk_size`` or ``threads``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    initial = np.asarray(initial, dtype=np.int64)
    if len(seeds) == 0:
        raise ValueError("ensemble must contain at least one trajectory")
    if threads is None:
        threads = int(os.environ.get("BELLBEABLES_THREADS", "1"))
    ckpt_times = list(schedule.checkpoint_steps)
    record_steps = [schedule.checkpoint_steps[t] for t in ckpt_times]
    starts = list(range(0, len(seeds), chunk_size))

    def work(s):
        sl = slice(s, s + chunk_size)
        return _run_chunk(schedule, seeds[sl], initial[sl], eps_d, record_steps)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    snapshots = np.concatenate([p[0] for p in parts], axis=1)
    jt, js, jsrc, jdst = ([], [], [], [])
    for s, (_, ev, _) in zip(starts, parts):
        jt.append(ev[0] + s)
        js.append(ev[1])
        jsrc.append(ev[2])
        jdst.append(ev[3])
    abort = np.concatenate([p[2] for p in parts])
    result = EnsembleResult(
        configurations=list(configurations),
        schedule=schedule,
        seeds=seeds,
        initial=initial,
        checkpoint_times=ckpt_times,
        checkpoint_ids=snapshots,
        jump_traj=np.concatenate(jt).astype(np.int64),
        jump_step=np.concatenate(js).astype(np.int64),
        jump_src=np.concatenate(jsrc).astype(np.int64),
        jump_dst=np.concatenate(jdst).astype(np.int64),
        abort_step=abort,
        master_seed=master_seed,
    )
    if result.n_aborted:
        log.warning("%d of %d trajectories aborted at nodes", result.n_aborted, result.size)
    return result


def initial_config_draw(seed: int, probabilities) -> int:
    """Initial configuration index for the trajectory with ``seed``."""
    p = np.asarray(probabilities, dtype=float)
    u = generator(int(seed), 1).random()
    return int(min(np.searchsorted(np.cumsum(p) / p.sum(), u, side="right"), len(p) - 1))


def sample_trajectory(
    state0: PilotState,
    n0: DensityConfiguration,
    H: HamiltonianMatrix,
    t_max: float,
    dt_ctrl: float,
    seed: int,
    eps_d: float = EPS_D,
    dt_min: float = 1e-9,
    schedule: Optional[RateSchedule] = None,
) -> BeableTrajectory:
    """One Bell trajectory from ``n0`` over ``[state0.time, t_max]``.

    Raises :class:`NodeVisitError` if the trajectory stands on a configuration
    whose weight drops below ``eps_d``.
    """
    sector = state0.sector
    pilot = PilotTrajectory(state0, H)
    m = sector.config_id(n0)
    if marginal_vector(state0)[m] < eps_d:
        raise NodeVisitError(f"initial configuration {tuple(n0)} has zero weight")
    if schedule is None:
        schedule = build_schedule(
            bell_rate_function(pilot, eps_d), state0.time, t_max, dt_ctrl, dt_min=dt_min, eps_d=eps_d
        )
    res = run_ensemble(schedule, sector.configurations, [seed], [m], eps_d=eps_d)
    traj = res.trajectory(0)
    if traj.aborted:
        raise NodeVisitError(traj.aborted)
    return traj


def sample_ensemble(
    pilot: PilotTrajectory,
    n_traj: int,
    t_max: float,
    dt_ctrl: float,
    master_seed: int,
    checkpoints: Iterable[float] = (),
    eps_d: float = EPS_D,
    dt_min: float = 1e-9,
    threads: Optional[int] = None,
) -> EnsembleResult:
    """Equivariant ensemble: starts drawn from the marginal at ``pilot.t0``.

    Trajectory ``i`` uses seed ``derive_seed(master_seed, i)``; its start is
    drawn by :func:`initial_config_draw` from that seed.
    """
    if n_traj < 1:
        raise ValueError("ensemble size must be positive")
    sector = pilot.state0.sector
    checkpoints = list(checkpoints)
    schedule = build_schedule(
        bell_rate_function(pilot, eps_d),
        pilot.t0,
        t_max,
        dt_ctrl,
        checkpoints=checkpoints,
        dt_min=dt_min,
        eps_d=eps_d,
    )
    p0 = marginal_vector(pilot.state0)
    seeds = np.array([derive_seed(master_seed, i) for i in range(n_traj)], dtype=np.uint64)
    initial = np.array([initial_config_draw(s, p0) for s in seeds])
    return run_ensemble(
        schedule, sector.configurations, seeds, initial, eps_d=eps_d, threads=threads,
        master_seed=master_seed,
    )


@dataclass(frozen=True)
class CheckpointStat:
    time: float
    empirical: np.ndarray
    target: np.ndarray
    tv: float
    band: float
    passed: bool

    def to_dict(self, labels=None) -> dict:
        labels = labels or [str(i) for i in range(len(self.target))]
        return {
            "time": self.time,
            "tv_distance": self.tv,
            "band_95": self.band,
            "passed": self.passed,
            "empirical": {str(k): float(v) for k, v in zip(labels, self.empirical)},
            "target": {str(k): float(v) for k, v in zip(labels, self.target)},
        }


@dataclass(frozen=True)
class EquivarianceReport:
    labels: list
    checkpoints: list
    n_trajectories: int
    n_aborted: int = 0
    level: float = 0.95

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checkpoints)

    @property
    def max_tv(self) -> float:
        return max(c.tv for c in self.checkpoints)

    def to_dict(self) -> dict:
        labels = ["".join(str(v) for v in c) if isinstance(c, tuple) else str(c) for c in self.labels]
        return {
            "n_trajectories": self.n_trajectories,
            "n_aborted": self.n_aborted,
            "band_level": self.level,
            "passed": self.passed,
            "checkpoints": [c.to_dict(labels) for c in self.checkpoints],
        }


def compare_distributions(
    labels, times, samples, targets, level: float = 0.95, n_aborted: int = 0, band_seed: int = 0
) -> EquivarianceReport:
    """Checkpoint-wise TV distance of sampled labels against target distributions."""
    stats = []
    n_bins = len(labels)
    for t, lab, target in zip(times, samples, targets):
        lab = np.asarray(lab)
        lab = lab[lab >= 0]
        if lab.size == 0:
            raise ValueError("empty ensemble")
        emp = np.bincount(lab, minlength=n_bins) / lab.size
        target = np.asarray(target, dtype=float)
        tv = total_variation(emp, target)
        band = multinomial_tv_band(target, lab.size, level, seed=band_seed)
        # the slack absorbs roundoff when the target is concentrated and the band is 0
        stats.append(CheckpointStat(float(t), emp, target, tv, band, bool(tv <= band + TV_SLACK)))
    n = max(len(np.asarray(s)) for s in samples) if samples else 0
    return EquivarianceReport(list(labels), stats, n, n_aborted, level)


def equivariance_report(
    ensemble, pilot: PilotTrajectory, checkpoints: Optional[Sequence[float]] = None,
    level: float = 0.95,
) -> EquivarianceReport:
    """Compare ensemble configurations with ``P_n(t)`` at each checkpoint.

    ``ensemble`` is an :class:`EnsembleResult` or a list of
    :class:`BeableTrajectory`.
    """
    sector = pilot.state0.sector
    if isinstance(ensemble, EnsembleResult):
        times = list(ensemble.checkpoint_times) if checkpoints is None else list(checkpoints)
        col = {t: i for i, t in enumerate(ensemble.checkpoint_times)}
        samples = [ensemble.checkpoint_ids[col[t]] for t in times]
        n_aborted = ensemble.n_aborted
    else:
        ensemble = list(ensemble)
        if not ensemble:
            raise ValueError("empty ensemble")
        if checkpoints is None:
            raise ValueError("checkpoints are required for a trajectory list")
        times = list(checkpoints)
        samples = [
            np.array([sector.config_id(tr.config_at(t)) for tr in ensemble if not tr.aborted])
            for t in times
        ]
        n_aborted = sum(1 for tr in ensemble if tr.aborted)
    targets = [marginal_vector(pilot.at(t)) for t in times]
    return compare_distributions(sector.configurations, times, samples, targets, level, n_aborted)


def master_equation_residual(pilot: PilotTrajectory, t: float, h: float = 1e-5) -> float:
    """Max over ``n`` of ``|sum_m (T_nm P_m - T_mn P_n) - dP_n/dt|``, derivative by central difference."""
    sector = pilot.state0.sector
    T, P = bell_rate_function(pilot, eps_d=0.0)(t)
    flow = T @ P - T.sum(axis=0) * P
    C = sector.class_matrix
    dp = (C @ np.abs(pilot.amplitudes(t + h)) ** 2 - C @ np.abs(pilot.amplitudes(t - h)) ** 2) / (2 * h)
    return float(np.max(np.abs(flow - dp)))
