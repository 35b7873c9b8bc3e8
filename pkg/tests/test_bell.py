import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellbeables.bell import (
    BeableTrajectory,
    NodeVisitError,
    RateSchedule,
    StepFloorError,
    build_schedule,
    equivariance_report,
    jump_rates,
    master_equation_residual,
    probability_currents,
    rate_matrix,
    run_ensemble,
    sample_ensemble,
    sample_trajectory,
)
from bellbeables.dynamics import PilotTrajectory, build_hamiltonian, marginal_vector
from bellbeables.fock import LatticeSpec, enumerate_sector
from bellbeables.presets import lattice_preset
from bellbeables.stats import derive_seed


def _pilot(L=3, omega=1, g=0.5, preset="random(0)"):
    spec = LatticeSpec(L, 2, coupling=g)
    sec = enumerate_sector(spec, omega)
    H = build_hamiltonian(spec, sec)
    return PilotTrajectory(lattice_preset(preset, sec, H), H)


def test_configuration_diagonal_hamiltonian_freezes():
    # with two sites the central difference cancels, leaving the mass term
    pilot = _pilot(L=2, omega=1)
    state = pilot.state0
    for cfg in state.sector.configurations:
        assert jump_rates(state, pilot.H, cfg).rates == {}
    tr = sample_trajectory(state, (1, 0), pilot.H, 2.0, 0.05, seed=3)
    assert tr.jumps == []
    assert tr.config_at(1.3) == (1, 0)


def test_stationary_state_has_constant_currents():
    pilot = _pilot(L=3, omega=2, preset="eigenstate(4)")
    sec, H = pilot.state0.sector, pilot.H
    J0 = probability_currents(sec, H, pilot.amplitudes(0.0))
    J1 = probability_currents(sec, H, pilot.amplitudes(1.7))
    assert np.max(np.abs(J0 - J1)) < 1e-12


@pytest.mark.parametrize("omega", [1, 2])
def test_master_equation(omega):
    pilot = _pilot(L=3, omega=omega)
    for t in np.random.default_rng(omega).uniform(0, 2, 10):
        assert master_equation_residual(pilot, t) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 5), st.integers(1, 3))
def test_current_antisymmetry_and_rate_positivity(seed, t, omega):
    pilot = _pilot(L=3, omega=omega, preset=f"random({seed})")
    psi = pilot.amplitudes(t)
    J = probability_currents(pilot.state0.sector, pilot.H, psi)
    assert np.max(np.abs(J + J.T)) <= 1e-12
    T = rate_matrix(J, marginal_vector(pilot.at(t)))
    assert np.all(T >= 0)
    assert np.all(np.diag(T) == 0)


def test_rate_matrix_examples():
    J = np.array([[0.0, 0.2], [-0.2, 0.0]])
    T = rate_matrix(J, np.array([0.5, 0.5]))
    assert T[0, 1] == pytest.approx(0.4)
    assert T[1, 0] == 0.0
    assert rate_matrix(J, np.array([0.5, 0.0]))[0, 1] == 0.0


def test_node_visit_raises():
    spec = LatticeSpec(3, 2)
    sec = enumerate_sector(spec, 1)
    H = build_hamiltonian(spec, sec)
    state = lattice_preset("basis(0)", sec)
    empty = next(c for c in sec.configurations if c != sec.configurations[sec.config_index[0]])
    with pytest.raises(NodeVisitError):
        jump_rates(state, H, empty)


def _constant_schedule(r, dt, n_steps):
    T = np.array([[0.0, 0.0], [r, 0.0]])
    return RateSchedule(
        times=np.arange(n_steps + 1) * dt,
        rates=np.repeat(T[None], n_steps, axis=0),
        weights=np.full((n_steps, 2), 0.5),
        checkpoint_steps={n_steps * dt: n_steps},
    )


def test_exponential_waiting_time():
    r, dt, n = 2.0, 0.01, 10_000
    sched = _constant_schedule(r, dt, 2000)
    res = run_ensemble(sched, [(1, 0), (0, 1)], [derive_seed(5, i) for i in range(n)], np.zeros(n))
    assert np.array_equal(np.sort(res.jump_traj), np.arange(n))
    waits = sched.times[res.jump_step + 1]
    assert abs(waits.mean() - 1 / r) < 3 * waits.std() / np.sqrt(n)
    # memoryless: survival beyond 2/r is about e^-2
    assert abs((waits > 2 / r).mean() - np.exp(-2)) < 0.015


def test_step_floor():
    T = np.array([[0.0, 1e12], [0.0, 0.0]])
    with pytest.raises(StepFloorError):
        build_schedule(lambda t: (T, np.array([0.5, 0.5])), 0.0, 1.0, 0.1, dt_min=1e-9)


def test_schedule_bounds_jump_probability_and_hits_checkpoints():
    pilot = _pilot(L=4, omega=2)
    from bellbeables.bell import bell_rate_function

    sched = build_schedule(bell_rate_function(pilot), 0.0, 1.0, 0.05, checkpoints=[0.3, 0.7])
    dts = np.diff(sched.times)
    exit_rates = sched.rates.sum(axis=1)
    assert np.all((exit_rates * (sched.weights >= 1e-12)).max(axis=1) * dts <= 0.1 + 1e-12)
    assert 0.3 in sched.times and 0.7 in sched.times and sched.times[-1] == 1.0


def test_seed_determinism():
    pilot = _pilot(L=4, omega=2)
    a = sample_trajectory(pilot.state0, (1, 1, 0, 0), pilot.H, 1.0, 0.01, seed=99)
    b = sample_trajectory(pilot.state0, (1, 1, 0, 0), pilot.H, 1.0, 0.01, seed=99)
    assert np.array_equal(a.times, b.times) and a.configs == b.configs


def test_ensemble_member_equals_single_trajectory():
    pilot = _pilot(L=4, omega=2)
    ens = sample_ensemble(pilot, 50, 1.0, 0.01, master_seed=8)
    for i in (0, 17, 49):
        tr = ens.trajectory(i)
        single = sample_trajectory(
            pilot.state0, tr.configs[0], pilot.H, 1.0, 0.01, seed=derive_seed(8, i)
        )
        assert np.array_equal(tr.times, single.times) and tr.configs == single.configs


def test_chunking_and_threads_do_not_change_results():
    pilot = _pilot(L=4, omega=2)
    a = sample_ensemble(pilot, 300, 1.0, 0.02, master_seed=1, checkpoints=[0.5])
    b = run_ensemble(a.schedule, a.configurations, a.seeds, a.initial, chunk_size=7, threads=3)
    assert np.array_equal(a.checkpoint_ids, b.checkpoint_ids)
    for name in ("jump_traj", "jump_step", "jump_src", "jump_dst"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_fermion_number_conserved_along_trajectories():
    pilot = _pilot(L=4, omega=3)
    ens = sample_ensemble(pilot, 200, 1.0, 0.02, master_seed=2)
    for tr in ens.trajectories():
        assert all(sum(c) == 3 for c in tr.configs)
        for _, src, dst in tr.jumps:
            assert src != dst


def test_one_quantum_two_site_equivariance():
    pilot = _pilot(L=2, omega=1)
    ens = sample_ensemble(pilot, 10_000, 1.0, 0.01, master_seed=4, checkpoints=[0.5, 1.0])
    rep = equivariance_report(ens, pilot)
    assert rep.passed and rep.max_tv <= 0.03


def test_three_site_equivariance():
    pilot = _pilot(L=3, omega=1)
    ens = sample_ensemble(pilot, 10_000, 2.0, 0.01, master_seed=6, checkpoints=[1.0, 2.0])
    rep = equivariance_report(ens, pilot)
    assert rep.passed and rep.max_tv <= 0.03


def test_report_zero_distance_for_frozen_concentrated():
    pilot = _pilot(L=2, omega=1, preset="basis(0)")
    cfg = pilot.state0.sector.configurations[pilot.state0.sector.config_index[0]]
    ens = [BeableTrajectory(np.array([0.0, 1.0]), [cfg, cfg], 0) for _ in range(100)]
    rep = equivariance_report(ens, pilot, checkpoints=[0.0, 1.0])
    assert rep.max_tv == 0.0 and rep.passed


def test_report_flags_designed_failure():
    pilot = _pilot(L=2, omega=2, preset="random(1)")
    sec = pilot.state0.sector
    n0 = sec.configurations[0]
    p = marginal_vector(pilot.state0)
    ens = [BeableTrajectory(np.array([0.0, 1.0]), [n0, n0], 0) for _ in range(1000)]
    rep = equivariance_report(ens, pilot, checkpoints=[0.0])
    assert rep.checkpoints[0].tv == pytest.approx(1 - p[0], abs=1e-12)
    assert not rep.passed


def test_empty_ensemble_rejected():
    pilot = _pilot(L=2)
    with pytest.raises(ValueError):
        equivariance_report([], pilot, checkpoints=[0.0])
    with pytest.raises(ValueError):
        sample_ensemble(pilot, 0, 1.0, 0.1, 0)
