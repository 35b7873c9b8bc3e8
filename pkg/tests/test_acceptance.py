"""Acceptance criteria, one test per criterion, at the stated tolerances and time limits."""

import time
from pathlib import Path

import numpy as np
import pytest

from bellbeables.bell import master_equation_residual
from bellbeables.config import RunConfig
from bellbeables.continuum import ModeBasis, continuity_residual, nonfactorizability_check
from bellbeables.dynamics import PilotTrajectory, build_hamiltonian
from bellbeables.fock import LatticeSpec, dense_mode_operators, enumerate_sector
from bellbeables.presets import continuum_preset, lattice_preset
from bellbeables.runner import run
from bellbeables.verify import car_violation, commutator_with_number, jordan_wigner_annihilators, one_quantum_correspondence

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def two_quantum_test_state():
    return continuum_preset("mixed-slater(0,1)", ModeBasis(30.0, 32, 1.0)).at(0.3)


def test_criterion_1_canonical_anticommutation(acceptance_line):
    start = time.perf_counter()
    worst = max(
        car_violation(ops(L * d))
        for L, d in [(2, 2), (1, 4)]
        for ops in (dense_mode_operators, jordan_wigner_annihilators)
    )
    elapsed = time.perf_counter() - start
    ok = worst == 0.0 and elapsed < 1.0
    acceptance_line(1, ok, f"max CAR violation {worst:.1e} (exact), {elapsed:.2f}s < 1s")
    assert ok


def test_criterion_2_superselection(acceptance_line):
    start = time.perf_counter()
    worst = max(commutator_with_number(LatticeSpec(L, 2, coupling=g)) for L in (2, 3) for g in (0.0, 0.5))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    acceptance_line(2, ok, f"max |[H, F]| {worst:.1e} <= 1e-12, {elapsed:.2f}s < 5s")
    assert ok


def test_criterion_3_dirac_recovery(acceptance_line):
    start = time.perf_counter()
    err = one_quantum_correspondence(LatticeSpec(8, 2), np.linspace(0.0, 1.0, 21), seed=0)
    elapsed = time.perf_counter() - start
    ok = err <= 1e-8 and elapsed < 10.0
    acceptance_line(3, ok, f"max-norm deviation {err:.1e} <= 1e-8, {elapsed:.2f}s < 10s")
    assert ok


def test_criterion_4_master_equation(acceptance_line):
    start = time.perf_counter()
    spec = LatticeSpec(3, 2, coupling=0.5)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for omega in (1, 2):
        sec = enumerate_sector(spec, omega)
        H = build_hamiltonian(spec, sec)
        for trial in range(3):
            pilot = PilotTrajectory(lattice_preset(f"random({10 * omega + trial})", sec), H)
            worst = max(worst, *(master_equation_residual(pilot, t) for t in rng.uniform(0, 3, 10)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 30.0
    acceptance_line(4, ok, f"max master-equation residual {worst:.1e} <= 1e-6, {elapsed:.2f}s < 30s")
    assert ok


@pytest.mark.slow
def test_criterion_5_stochastic_equivariance(acceptance_line, tmp_path, monkeypatch):
    monkeypatch.setenv("BELLBEABLES_THREADS", "1")
    cfg = RunConfig.load(CONFIGS / "lattice_L4_omega2.txt").updated(out_dir=str(tmp_path))
    assert (cfg.L, cfg.d, cfg.omega, cfg.ensemble_size, len(cfg.checkpoints)) == (4, 2, 2, 10_000, 3)
    start = time.perf_counter()
    report = run(cfg)
    elapsed = time.perf_counter() - start
    tvs = [c["tv_distance"] for c in report.checkpoints]
    bands = [c["band_95"] for c in report.checkpoints]
    ok = all(tv <= 0.03 and tv <= b for tv, b in zip(tvs, bands)) and elapsed < 300
    acceptance_line(5, ok, "TV " + ", ".join(f"{tv:.4f}/{b:.4f}" for tv, b in zip(tvs, bands))
                    + f" (value/band, limit 0.03), {elapsed:.1f}s < 300s")
    assert ok and report.exit_code == 0


@pytest.mark.slow
def test_criterion_6_deterministic_equivariance(acceptance_line, tmp_path):
    details, ok = [], True
    start = time.perf_counter()
    for name, boxes in (("continuum_packet.txt", 32), ("continuum_slater.txt", 16)):
        cfg = RunConfig.load(CONFIGS / name).updated(out_dir=str(tmp_path / name))
        assert cfg.n_boxes == boxes and cfg.ensemble_size == 10_000 and cfg.t_max == 1.0
        report = run(cfg)
        c = report.checkpoints[-1]
        ok &= c["passed"] and report.exit_code == 0
        details.append(f"omega={cfg.omega} {boxes}^{cfg.omega} cells TV {c['tv_distance']:.4f}/{c['band_95']:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    acceptance_line(6, ok, "; ".join(details) + f" (value/band), {elapsed:.1f}s < 300s")
    assert ok


def test_criterion_7_continuity(acceptance_line):
    start = time.perf_counter()
    state = two_quantum_test_state()
    coarse = continuity_residual(state, n_grid=64)
    fine = continuity_residual(state, n_grid=128)
    elapsed = time.perf_counter() - start
    ok = coarse <= 1e-5 and coarse / fine >= 3.5 and elapsed < 60
    acceptance_line(7, ok, f"residual {coarse:.2e} <= 1e-5 on 64x64, refinement ratio "
                           f"{coarse / fine:.2f} >= 3.5, {elapsed:.2f}s < 60s")
    assert ok


def test_criterion_8_nonfactorizability(acceptance_line):
    start = time.perf_counter()
    slater = nonfactorizability_check(two_quantum_test_state())
    product = nonfactorizability_check(continuum_preset("product(1,2)", ModeBasis(30.0, 32, 1.0)))
    elapsed = time.perf_counter() - start
    ok = slater.ratio > 1e-3 and product.ratio < 1e-10 and elapsed < 60
    acceptance_line(8, ok, f"sigma2/sigma1 Slater {slater.ratio:.3f} > 1e-3, product "
                           f"{product.ratio:.1e} < 1e-10, {elapsed:.2f}s < 60s")
    assert ok


def _artifacts(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.suffix in (".csv", ".json")}


def test_criterion_9_reproducibility(acceptance_line, tmp_path):
    names = []
    ok = True
    for name, n in (("lattice_L4_omega2.txt", 10_000), ("continuum_slater.txt", 300)):
        base = RunConfig.load(CONFIGS / name).updated(ensemble_size=n)
        a, b = tmp_path / f"{name}.a", tmp_path / f"{name}.b"
        run(base.updated(out_dir=str(a)))
        run(base.updated(out_dir=str(b)))
        fa, fb = _artifacts(a), _artifacts(b)
        ok &= fa.keys() == fb.keys() and all(fa[k] == fb[k] for k in fa)
        names += sorted(fa)
    acceptance_line(9, ok, f"{len(names)} CSV/JSON artifacts byte-identical across reruns")
    assert ok
