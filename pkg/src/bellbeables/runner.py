"""Execute a :class:`RunConfig` and write its artifacts.

Every artifact except ``timing.log`` is a deterministic function of the
config, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import svg
from .bell import PhysicsAbort, compare_distributions, equivariance_report, sample_ensemble
from .config import RunConfig
from .continuum import (
    CoarseGrid,
    ContinuumState,
    ModeBasis,
    StepFloorError as ContinuumStepFloor,
    box_probabilities,
    grid_fields,
    integrate_ensemble,
    sample_positions,
)
from .dynamics import PilotState, PilotTrajectory, build_hamiltonian
from .fock import LatticeSpec, enumerate_sector
from .presets import continuum_preset, lattice_preset
from .stats import RNG_ALGORITHM, derive_seed
from .verify import run_checks

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_PHYSICS = 0, 1, 2, 3


@dataclass
class RunReport:
    config: RunConfig
    checks: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    passed: bool = False
    exit_code: int = EXIT_CHECK_FAILED
    diagnostics: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            # out_dir is omitted so reruns into different directories compare equal
            "config": {k: v for k, v in self.config.to_dict().items() if k != "out_dir"},
            "checks": self.checks,
            "checkpoints": self.checkpoints,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "diagnostics": self.diagnostics,
            "artifacts": sorted(self.artifacts),
            "rng": {
                "algorithm": RNG_ALGORITHM,
                "master_seed": self.config.seed,
                "splitting": "trajectory i: SeedSequence([master_seed, i]) -> 64-bit key",
            },
        }


def _num(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def lattice_setup(cfg: RunConfig):
    spec = LatticeSpec(cfg.L, cfg.d, cfg.mass, cfg.coupling, cfg.spacing, cfg.interaction_power)
    sector = enumerate_sector(spec, cfg.omega)
    H = build_hamiltonian(spec, sector)
    if cfg.preset == "explicit":
        amps = np.asarray(cfg.coefficients, dtype=complex)
        state = PilotState(sector, amps, cfg.t0).normalized()
    else:
        state = lattice_preset(cfg.preset, sector, H)
        state = PilotState(sector, state.amplitudes, cfg.t0)
    return spec, sector, H, state


def continuum_setup(cfg: RunConfig) -> ContinuumState:
    basis = ModeBasis(cfg.box_length, cfg.n_max, cfg.mass)
    if cfg.preset == "explicit":
        c = np.asarray(cfg.coefficients, dtype=complex)
        if cfg.omega == 2:
            n = basis.n_orbitals
            c = c.reshape(n, n)
        state = ContinuumState(basis, c).normalized()
    else:
        state = continuum_preset(cfg.preset, basis)
    if state.omega != cfg.omega:
        raise ValueError(f"preset {cfg.preset!r} has omega={state.omega}, config says {cfg.omega}")
    return state.at(cfg.t0)


def _run_lattice(cfg: RunConfig, out: Path, report: RunReport):
    spec, sector, H, state = lattice_setup(cfg)
    pilot = PilotTrajectory(state, H)
    ens = sample_ensemble(
        pilot, cfg.ensemble_size, cfg.t_max, cfg.dt, cfg.seed,
        checkpoints=cfg.checkpoint_times, eps_d=cfg.eps_d, dt_min=cfg.dt_min,
    )
    if ens.n_aborted == ens.size:
        report.diagnostics.append("every trajectory aborted at a node; nothing to compare")
        return EXIT_PHYSICS
    rep = equivariance_report(ens, pilot)
    report.checkpoints = rep.to_dict()["checkpoints"]
    labels = ["".join(map(str, c)) for c in sector.configurations]

    rows = []
    for i in range(min(cfg.log_trajectories, ens.size)):
        tr = ens.trajectory(i)
        events = ["start"] + ["jump"] * len(tr.jumps) + ["abort" if tr.aborted else "end"]
        for t, c, ev in zip(tr.times, tr.configs, events):
            rows.append([i, _num(t), *c, ev])
    _write_csv(out / "trajectories.csv",
               ["trajectory", "t", *[f"n_{l + 1}" for l in range(spec.L)], "event"], rows)

    rows = []
    for k, c in enumerate(rep.checkpoints):
        for j, lab in enumerate(labels):
            rows.append([_num(c.time), lab, _num(c.empirical[j]), _num(c.target[j])])
        svg.line_plot(
            [("empirical", range(len(labels)), c.empirical), ("target", range(len(labels)), c.target)],
            out / f"distribution_{k}.svg",
            title=f"configuration distribution at t={c.time:g} (TV {c.tv:.4f})",
            xlabel="configuration index (distributions.csv order)", ylabel="probability",
        )
        report.artifacts.append(f"distribution_{k}.svg")
    _write_csv(out / "distributions.csv", ["t", "configuration", "empirical", "target"], rows)
    report.artifacts += ["trajectories.csv", "distributions.csv"]

    report.checks = [
        {"name": f"equivariance_t={c.time!r}", "value": c.tv, "tolerance": c.band, "passed": c.passed}
        for c in rep.checkpoints
    ]
    if cfg.tv_tolerance is not None:
        report.checks.append({"name": "max_tv", "value": rep.max_tv,
                              "tolerance": cfg.tv_tolerance, "passed": rep.max_tv <= cfg.tv_tolerance})
    if ens.n_aborted:
        report.diagnostics.append(f"{ens.n_aborted} trajectories aborted at nodes")
        return EXIT_PHYSICS
    return None


def _run_continuum(cfg: RunConfig, out: Path, report: RunReport):
    state = continuum_setup(cfg)
    ell = state.basis.box_length
    grid = CoarseGrid(ell, cfg.n_boxes)
    seeds = np.array([derive_seed(cfg.seed, i) for i in range(cfg.ensemble_size)], dtype=np.uint64)
    X0 = sample_positions(state, seeds)
    ens = integrate_ensemble(
        state, X0, cfg.t_max, cfg.dt, checkpoints=cfg.checkpoint_times,
        eps_rho=cfg.eps_rho, dt_min=cfg.dt_min, keep_paths=cfg.log_trajectories, seeds=seeds,
    )
    if ens.aborted.all():
        report.diagnostics.append("every trajectory aborted at a node; nothing to compare")
        return EXIT_PHYSICS
    n_cells = cfg.n_boxes**state.omega
    samples, targets = [], []
    for k, t in enumerate(ens.checkpoint_times):
        pos = ens.checkpoint_positions[k]
        ok = ~np.isnan(pos).any(axis=1)
        boxes = grid.box_of(pos[ok])
        lab = boxes[:, 0] if state.omega == 1 else boxes[:, 0] * cfg.n_boxes + boxes[:, 1]
        samples.append(lab)
        targets.append(box_probabilities(state.at(t), grid).ravel())
    labels = list(range(n_cells))
    rep = compare_distributions(labels, ens.checkpoint_times, samples, targets,
                                n_aborted=int(ens.aborted.sum()))
    report.checkpoints = [
        {"time": c.time, "tv_distance": c.tv, "band_95": c.band, "passed": c.passed}
        for c in rep.checkpoints
    ]
    report.checks = [
        {"name": f"equivariance_t={c.time!r}", "value": c.tv, "tolerance": c.band, "passed": c.passed}
        for c in rep.checkpoints
    ]
    if cfg.tv_tolerance is not None:
        report.checks.append({"name": "max_tv", "value": rep.max_tv,
                              "tolerance": cfg.tv_tolerance, "passed": rep.max_tv <= cfg.tv_tolerance})

    rows = []
    for k, c in enumerate(rep.checkpoints):
        for j in range(n_cells):
            rows.append([_num(c.time), j, _num(c.empirical[j]), _num(c.target[j])])
        svg.line_plot(
            [("empirical", range(n_cells), c.empirical), ("target", range(n_cells), c.target)],
            out / f"histogram_{k}.svg",
            title=f"box occupation at t={c.time:g} (TV {c.tv:.4f})",
            xlabel="cell (histograms.csv order)", ylabel="probability",
        )
        report.artifacts.append(f"histogram_{k}.svg")
    _write_csv(out / "histograms.csv", ["t", "cell", "empirical", "target"], rows)

    rows = []
    paths = ens.sample_paths
    for i in range(paths.shape[1]):
        for t, x in zip(ens.times, paths[:, i, :]):
            rows.append([i, _num(t), *[_num(v) for v in x]])
    _write_csv(out / "trajectories.csv",
               ["trajectory", "t", *[f"x_{j + 1}" for j in range(state.omega)]], rows)
    if paths.shape[1]:
        series = []
        for i in range(paths.shape[1]):
            x = paths[:, i, 0]
            cuts = np.flatnonzero(np.abs(np.diff(x)) > ell / 2) + 1
            for seg in np.split(np.arange(len(x)), cuts):
                if len(seg) > 1:
                    series.append(("", ens.times[seg], x[seg]))
        if series:
            svg.line_plot(series, out / "trajectory_fan.svg", title="guided trajectories (x_1)",
                          xlabel="t", ylabel="x_1", faint=True)
            report.artifacts.append("trajectory_fan.svg")

    xs = (np.arange(64) + 0.5) * ell / 64
    for tag, t in (("t0", cfg.t0), ("tmax", cfg.t_max)):
        fields = grid_fields(state, xs, t)
        if state.omega == 1:
            _write_csv(out / f"fields_{tag}.csv", ["x", "rho", "j"],
                       [[_num(x), _num(r), _num(j)] for x, r, j in zip(xs, *fields)])
            report.artifacts.append(f"fields_{tag}.csv")
        else:
            for name, arr in zip(("rho", "j1", "j2"), fields):
                _write_csv(out / f"{name}_{tag}.csv", [_num(x) for x in xs],
                           [[_num(v) for v in row] for row in arr])
                report.artifacts.append(f"{name}_{tag}.csv")
    report.artifacts += ["histograms.csv", "trajectories.csv"]
    if ens.aborted.any():
        report.diagnostics.append(f"{int(ens.aborted.sum())} trajectories aborted at nodes")
        return EXIT_PHYSICS
    return None


def _run_verify(cfg: RunConfig, out: Path, report: RunReport):
    spec = LatticeSpec(cfg.L, cfg.d, cfg.mass, cfg.coupling, cfg.spacing, cfg.interaction_power)
    checks = run_checks(spec, seed=cfg.seed)
    report.checks = [c.to_dict() for c in checks]
    _write_csv(out / "checks.csv", ["name", "value", "tolerance", "passed"],
               [[c.name, _num(c.value), _num(c.tolerance), str(c.passed).lower()] for c in checks])
    report.artifacts.append("checks.csv")
    return None


def run(cfg: RunConfig) -> RunReport:
    """Run one engine, write artifacts under ``cfg.out_dir`` and return the report."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(cfg)
    start = time.perf_counter()
    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    report.artifacts.append("config.txt")
    engine = {"lattice-stochastic": _run_lattice,
              "continuum-deterministic": _run_continuum,
              "verify": _run_verify}[cfg.engine]
    try:
        code = engine(cfg, out, report)
    except (PhysicsAbort, ContinuumStepFloor) as exc:
        report.diagnostics.append(f"physics abort: {exc}")
        code = EXIT_PHYSICS
    report.passed = code is None and all(c["passed"] for c in report.checks)
    report.exit_code = code if code is not None else (EXIT_OK if report.passed else EXIT_CHECK_FAILED)
    report.artifacts.append("report.json")
    _write_json(out / "report.json", report.to_dict())
    report.timing = {"wall_seconds": time.perf_counter() - start,
                     "threads": int(os.environ.get("BELLBEABLES_THREADS", "1"))}
    (out / "timing.log").write_text(
        f"wall_seconds {report.timing['wall_seconds']:.3f}\nthreads {report.timing['threads']}\n",
        encoding="utf-8",
    )
    log.info("run finished with exit code %d", report.exit_code)
    return report
