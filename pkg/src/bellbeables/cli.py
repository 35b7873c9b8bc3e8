"""Command-line entry point: ``bellbeables run <config>`` plus JSON dumps."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import ConfigError, RunConfig
from .dynamics import build_hamiltonian
from .fock import LatticeSpec, enumerate_sector
from .runner import EXIT_CONFIG, run


def _checkpoints(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _lattice_args(p: argparse.ArgumentParser):
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--omega", type=int, default=1)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--coupling", type=float, default=0.0)
    p.add_argument("--spacing", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellbeables", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a run config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.add_argument("--ensemble-size", type=int)
    r.add_argument("--checkpoints", type=_checkpoints)
    r.add_argument("--engine")

    b = sub.add_parser("dump-basis", help="print a sector basis as JSON")
    _lattice_args(b)
    s = sub.add_parser("dump-spectrum", help="print sector eigenvalues (and matrix) as JSON")
    _lattice_args(s)
    s.add_argument("--matrix", action="store_true", help="include the dense Hamiltonian")
    return parser


def _spec(args) -> LatticeSpec:
    return LatticeSpec(args.L, args.d, args.mass, args.coupling, args.spacing)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        try:
            cfg = RunConfig.load(args.config).updated(
                seed=args.seed, out_dir=args.out_dir, ensemble_size=args.ensemble_size,
                checkpoints=args.checkpoints, engine=args.engine,
            )
        except (ConfigError, OSError, TypeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            report = run(cfg)
        except ValueError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for c in report.checks:
            status = "PASS" if c["passed"] else "FAIL"
            print(f"{status} {c['name']}: {c['value']:.3e} (tolerance {c['tolerance']:.3e})")
        for line in report.diagnostics:
            print(line, file=sys.stderr)
        return report.exit_code

    try:
        spec = _spec(args)
        sector = enumerate_sector(spec, args.omega)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "dump-basis":
        payload = sector.to_dict()
    else:
        H = build_hamiltonian(spec, sector)
        w, _ = H.eigh()
        payload = {"L": spec.L, "d": spec.d, "omega": args.omega, "dim": sector.dim,
                   "eigenvalues": [float(x) for x in w]}
        if args.matrix:
            m = H.dense()
            payload["matrix_real"] = np.real(m).tolist()
            payload["matrix_imag"] = np.imag(m).tolist()
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
