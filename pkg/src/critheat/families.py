"""Named initial-data families and the checkpoint file format.

Families produce a radial field from a parameter dict; names are registered so
configurations can be validated up front. Where the transform is known in
closed form the family also supplies its frequency profile, which the
decay-rate machinery prefers over a numerical transform.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import ground_state, spectral
from .radial import CorruptionError, RadialField, RadialGrid

CHECKPOINT_MAGIC = "# critheat checkpoint v1"


def _w_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    a = params.get("a", 1.0)
    lam = params.get("lam", 1.0)
    return a * ground_state.bubble_values(grid.d, grid.nodes, lam)


def _gaussian_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    amp = params.get("amp", 0.05)
    width = params.get("width", 1.0)
    return amp * np.exp(-((grid.nodes / width) ** 2))


def _cutoff_taper(r: np.ndarray, rho_c: float, width: float) -> np.ndarray:
    """1 inside rho_c, smooth cosine rolloff to 0 over [rho_c, rho_c + width]."""
    chi = np.zeros_like(r)
    chi[r <= rho_c] = 1.0
    ramp = (r > rho_c) & (r < rho_c + width)
    chi[ramp] = 0.5 * (1.0 + np.cos(math.pi * (r[ramp] - rho_c) / width))
    return chi


def _w_cutoff_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    a = params.get("a", 1.2)
    rho_c = params.get("rho_c", grid.rmax / 4.0)
    width = params.get("taper", rho_c / 4.0)
    if rho_c + width >= grid.rmax:
        raise ValueError(f"cutoff {rho_c}+{width} must end inside R={grid.rmax}")
    w = ground_state.bubble_values(grid.d, grid.nodes)
    return a * w * _cutoff_taper(grid.nodes, rho_c, width)


def _power_tail_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    amp = params.get("amp", 0.1)
    p = params["p"]
    return amp * (1.0 + grid.nodes**2) ** (-p / 2.0)


def _bumps_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    """Sum of symmetrized off-center bumps; smooth at the origin by even
    extension, so u_r(0) = 0 holds exactly."""
    n_bumps = int(params.get("n_bumps", 3))
    amp = params.get("amp", 0.05)
    spread = params.get("spread", 4.0)
    r = grid.nodes
    out = np.zeros_like(r)
    for _ in range(n_bumps):
        a = amp * (0.5 + rng.random())
        c = spread * rng.random()
        w = 0.5 + 1.5 * rng.random()
        out += a * (np.exp(-(((r - c) / w) ** 2)) + np.exp(-(((r + c) / w) ** 2)))
    return out


def _from_file_family(grid: RadialGrid, params: dict, rng) -> np.ndarray:
    field, _t = load_checkpoint(params["path"])
    if field.grid.d != grid.d:
        raise ValueError(f"checkpoint dimension {field.grid.d} does not match run {grid.d}")
    if field.grid.n == grid.n and np.allclose(field.grid.nodes, grid.nodes):
        return field.values.copy()
    from scipy.interpolate import PchipInterpolator

    interp = PchipInterpolator(field.grid.nodes, field.values, extrapolate=False)
    vals = interp(np.minimum(grid.nodes, field.grid.rmax))
    vals[grid.nodes > field.grid.rmax] = 0.0
    return vals


FAMILIES = {
    "aW": _w_family,
    "gaussian": _gaussian_family,
    "aW_cutoff": _w_cutoff_family,
    "power_tail": _power_tail_family,
    "bumps": _bumps_family,
    "from_file": _from_file_family,
}


def build_initial(name: str, params: dict, grid: RadialGrid, seed: int = 0) -> RadialField:
    """Construct the initial field; the last node is pinned to the Dirichlet value."""
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; registered: {sorted(FAMILIES)}")
    rng = np.random.default_rng(seed)
    values = np.asarray(FAMILIES[name](grid, dict(params), rng), dtype=float)
    values[-1] = 0.0
    return RadialField(grid, values)


def initial_spectrum(name: str, params: dict, d: int) -> spectral.SpectrumFn | None:
    """Closed-form frequency profile of the family, when one is known.

    A physical gaussian amp*exp(-(r/w)^2) transforms to
    amp*(w^2/2)^{d/2} exp(-(w s/2)^2) under the unitary convention.
    """
    if name == "gaussian":
        amp = params.get("amp", 0.05)
        width = params.get("width", 1.0)
        return spectral.gaussian_spectrum(
            d, k=0.0, amp=amp * (width * width / 2.0) ** (d / 2.0), sig=2.0 / width
        )
    return None


def save_checkpoint(path, field: RadialField, t: float) -> None:
    """Versioned two-column text checkpoint: header (d, R, n, t), then r_i u_i."""
    path = Path(path)
    g = field.grid
    lines = [
        CHECKPOINT_MAGIC,
        f"# d={g.d} R={float(g.rmax)!r} n={g.n} t={float(t)!r} stretch={float(g.stretch)!r}",
    ]
    lines += [f"{float(r)!r} {float(v)!r}" for r, v in zip(g.nodes, field.values)]
    path.write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[RadialField, float]:
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or text[0].strip() != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    header = {}
    rows = []
    for line in text[1:]:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, val = token.split("=", 1)
                    header[key] = val
            continue
        a, b = line.split()
        rows.append((float(a), float(b)))
    arr = np.array(rows)
    if not np.isfinite(arr).all():
        raise CorruptionError(f"{path}: checkpoint holds non-finite samples")
    grid = RadialGrid(
        d=int(header["d"]), nodes=arr[:, 0], stretch=float(header.get("stretch", 1.0))
    )
    return RadialField(grid, arr[:, 1]), float(header.get("t", 0.0))
