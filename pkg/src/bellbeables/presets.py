"""Named initial states for both engines.

Preset strings look like ``name`` or ``name(a, b, ...)`` with numeric
arguments, e.g. ``gaussian-packet(1.5, 1.0)``.

Lattice presets (``SectorBasis``):
  vacuum                      omega=0 indicator of the bare vacuum
  basis(i)                    i-th basis state of the sector
  random(seed)                complex Gaussian amplitudes, normalised
  packet(site, k, width)      omega=1 Gaussian over sites, upper spinor component
  slater-packets(s1, s2, w)   omega=2 antisymmetrised pair of site packets
  eigenstate(i)               i-th eigenvector of H (needs ``H``)

Continuum presets (``ModeBasis``):
  plane-wave(k[, branch])     omega=1 single orbital
  superposition(k1, k2)       omega=1 equal-weight +E modes
  standing(k)                 omega=1 (phi+_k + phi+_-k)/sqrt2, zero current
  gaussian-packet(p, sigma[, x0])
                              omega=1 +E packet, mean momentum p, position
                              width sigma, centred at x0 (default mid-box)
  slater(k1, k2)              omega=2 antisymmetrised +E plane waves
  standing-slater(k1, k2)     omega=2 Slater of two standing waves
  gaussian-slater(p1, p2, sigma, x1, x2)
                              omega=2 Slater of two packets (Gram-Schmidt)
  mixed-slater(k1, k2)        omega=2 Slater of (phi+_k1 + phi-_k2)/sqrt2 and phi+_k2
  product(k1, k2)             distinguishable phi+_k1 (x1) phi+_k2 (x2); oracle only
"""

from __future__ import annotations

import re

import numpy as np

from .continuum import ContinuumState, ModeBasis
from .dynamics import HamiltonianMatrix, PilotState
from .fock import SectorBasis

_PRESET = re.compile(r"^\s*([A-Za-z][\w-]*)\s*(?:\((.*)\))?\s*$")


def parse_preset(text: str) -> tuple[str, list[float]]:
    m = _PRESET.match(text)
    if not m:
        raise ValueError(f"malformed preset {text!r}")
    name, args = m.group(1), m.group(2)
    values = [float(a) for a in args.split(",")] if args and args.strip() else []
    return name, values


def _normalize(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("preset produced the zero vector")
    return v / n


def lattice_preset(text: str, sector: SectorBasis, H: HamiltonianMatrix | None = None) -> PilotState:
    name, a = parse_preset(text)
    spec = sector.spec
    amps = np.zeros(sector.dim, dtype=complex)
    if name == "vacuum":
        if sector.omega != 0:
            raise ValueError("vacuum preset needs omega=0")
        amps[0] = 1.0
    elif name == "basis":
        amps[int(a[0])] = 1.0
    elif name == "random":
        rng = np.random.default_rng(int(a[0]) if a else 0)
        amps = rng.normal(size=sector.dim) + 1j * rng.normal(size=sector.dim)
    elif name == "packet":
        if sector.omega != 1:
            raise ValueError("packet preset needs omega=1")
        f = _site_packet(spec, *a)
        amps = f[_single_mode(sector)]
    elif name == "slater-packets":
        if sector.omega != 2:
            raise ValueError("slater-packets preset needs omega=2")
        s1, s2, w = a
        f = _site_packet(spec, s1, 0.0, w)
        g = _site_packet(spec, s2, np.pi / 2, w, component=1)
        for i, s in enumerate(sector.states):
            mu, nu = [b for b in range(spec.n_modes) if (int(s) >> b) & 1]
            amps[i] = f[mu] * g[nu] - f[nu] * g[mu]
    elif name == "eigenstate":
        if H is None:
            raise ValueError("eigenstate preset needs a Hamiltonian")
        amps = H.eigh()[1][:, int(a[0])].astype(complex)
    else:
        raise ValueError(f"unknown lattice preset {name!r}")
    return PilotState(sector, _normalize(amps), 0.0)


def _single_mode(sector: SectorBasis) -> np.ndarray:
    return np.array([int(s).bit_length() - 1 for s in sector.states])


def _site_packet(spec, site, k, width, component=0):
    l = np.arange(spec.L)
    dist = (l - site + spec.L / 2) % spec.L - spec.L / 2
    f = np.zeros(spec.n_modes, dtype=complex)
    f[l * spec.d + component] = np.exp(-(dist**2) / (2 * width**2) + 1j * k * l)
    return f


def continuum_preset(text: str, basis: ModeBasis) -> ContinuumState:
    name, a = parse_preset(text)
    n = basis.n_orbitals
    ell = basis.box_length

    def e(k, branch=1):
        v = np.zeros(n, dtype=complex)
        v[basis.orbital(int(k), branch)] = 1.0
        return v

    def packet(p, sigma, x0):
        c = np.zeros(n, dtype=complex)
        sel = slice(0, basis.n_modes)
        q = basis.momenta
        c[sel] = np.exp(-(sigma**2) * (q - p) ** 2 - 1j * q * x0)
        return _normalize(c)

    def slater(f, g):
        g = g - np.vdot(f, g) * f / np.vdot(f, f)
        f, g = _normalize(f), _normalize(g)
        return (np.outer(f, g) - np.outer(g, f)) / np.sqrt(2)

    if name == "plane-wave":
        c = e(a[0], int(a[1]) if len(a) > 1 else 1)
    elif name == "superposition":
        c = _normalize(e(a[0]) + e(a[1]))
    elif name == "standing":
        c = _normalize(e(a[0]) + e(-a[0]))
    elif name == "gaussian-packet":
        x0 = a[2] if len(a) > 2 else ell / 2
        c = packet(a[0], a[1], x0)
    elif name == "slater":
        c = slater(e(a[0]), e(a[1]))
    elif name == "standing-slater":
        c = slater(e(a[0]) + e(-a[0]), e(a[1]) + e(-a[1]))
    elif name == "mixed-slater":
        c = slater(e(a[0]) + e(a[1], -1), e(a[1]))
    elif name == "gaussian-slater":
        p1, p2, sigma, x1, x2 = a
        c = slater(packet(p1, sigma, x1), packet(p2, sigma, x2))
    elif name == "product":
        return ContinuumState(basis, np.outer(e(a[0]), e(a[1])), distinguishable=True)
    else:
        raise ValueError(f"unknown continuum preset {name!r}")
    return ContinuumState(basis, c).normalized()


def preset_state(text: str, target, H: HamiltonianMatrix | None = None):
    """Build a named preset on a lattice sector or a continuum mode basis."""
    if isinstance(target, SectorBasis):
        return lattice_preset(text, target, H)
    if isinstance(target, ModeBasis):
        return continuum_preset(text, target)
    raise TypeError(f"cannot build presets on {type(target).__name__}")
