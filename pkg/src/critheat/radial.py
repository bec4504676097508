"""Radial grids, quadrature, and differential operators on a truncated ball.

Radially symmetric functions on R^d (d >= 3) are represented by samples on a
graded one-dimensional grid 0 = r_0 < r_1 < ... < r_{n-1} = R. Integrals carry
the surface measure of the unit (d-1)-sphere; derivatives use second-order
finite differences that honor the symmetry condition u_r(0) = 0 and reduce the
Laplacian to u_rr + ((d-1)/r) u_r, with the limit d * u_rr(0) at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class CorruptionError(RuntimeError):
    """A field holds NaN/Inf values; the corruption is surfaced, not propagated."""


def gamma_half_integer(twice_x: int) -> float:
    """Gamma(twice_x / 2) for positive integer twice_x.

    Only integer and half-integer arguments occur (the dimension d is an
    integer), so the value follows from Gamma(1) = 1 and Gamma(1/2) = sqrt(pi)
    by the recursion Gamma(x + 1) = x Gamma(x).
    """
    if twice_x < 1:
        raise ValueError(f"gamma argument must be >= 1/2, got {twice_x}/2")
    if twice_x % 2 == 0:
        value = 1.0
        x = 1.0
        while 2 * x < twice_x:
            value *= x
            x += 1.0
    else:
        value = math.sqrt(math.pi)
        x = 0.5
        while 2 * x < twice_x:
            value *= x
            x += 1.0
    return value


def sphere_area(d: int) -> float:
    """Surface area of the unit (d-1)-sphere, 2 pi^{d/2} / Gamma(d/2)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return 2.0 * math.pi ** (d / 2.0) / gamma_half_integer(d)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Graded grid on [0, R] with geometric node spacing.

    `stretch` is the ratio of consecutive spacings (1 means uniform). Nodes
    are immutable after construction; consumers share grids freely.
    """

    d: int
    nodes: np.ndarray
    stretch: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got {self.d}")
        if nodes.ndim != 1 or len(nodes) < 16:
            raise ValueError("grid needs at least 16 nodes")
        if nodes[0] != 0.0:
            raise ValueError("first node must sit exactly at the origin")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def rmax(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def line_weights(self) -> np.ndarray:
        """Plain trapezoid weights for int_0^R f(r) dr (no sphere measure)."""
        h = self.spacings
        w = np.empty(self.n)
        w[0] = 0.5 * h[0]
        w[-1] = 0.5 * h[-1]
        w[1:-1] = 0.5 * (h[:-1] + h[1:])
        return w

    def quad_weights(self, moment: int = 0) -> np.ndarray:
        """Weights w with sum(w * f) = omega_{d-1} int_0^R f r^{d-1+moment} dr."""
        if moment not in (0, 1, 2):
            raise ValueError(f"moment must be 0, 1 or 2, got {moment}")
        return self._moment_weights[moment]

    @cached_property
    def _moment_weights(self) -> dict:
        base = self.line_weights * sphere_area(self.d)
        r = self.nodes
        return {m: base * r ** (self.d - 1 + m) for m in (0, 1, 2)}

    @cached_property
    def cell_faces(self) -> np.ndarray:
        """Midpoint faces f_i = (r_i + r_{i+1})/2 of the finite-volume cells."""
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        """Exact shell volumes (sphere measure included) of the dual cells."""
        f = self.cell_faces
        vol = np.empty(self.n)
        scale = sphere_area(self.d) / self.d
        vol[0] = scale * f[0] ** self.d
        vol[1:-1] = scale * (f[1:] ** self.d - f[:-1] ** self.d)
        vol[-1] = scale * (self.rmax**self.d - f[-1] ** self.d)
        return vol

    @cached_property
    def conservative_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tridiagonal finite-volume Laplacian, self-adjoint in cell volumes.

        Rows cover nodes 0 .. n-2. Flux form r^{1-d} (r^{d-1} u_r)_r with
        midpoint-face gradients; an M-matrix, so implicit diffusion preserves
        positivity, and the associated Dirichlet form supplies an energy that
        the semi-discrete flow dissipates exactly.
        """
        f = self.cell_faces
        h = self.spacings
        area = sphere_area(self.d) * f ** (self.d - 1)
        vol = self.cell_volumes
        m = self.n - 1
        lo = np.zeros(m)
        di = np.zeros(m)
        up = np.zeros(m)
        up[0] = area[0] / (h[0] * vol[0])
        di[0] = -up[0]
        lo[1:] = area[: m - 1] / (h[: m - 1] * vol[1:m])
        up[1:] = area[1:m] / (h[1:m] * vol[1:m])
        di[1:] = -(lo[1:] + up[1:])
        return lo, di, up

    @cached_property
    def laplacian_bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tridiagonal (lower, diag, upper) of the radial Laplacian.

        Rows cover nodes 0 .. n-2 (the last node is Dirichlet territory).
        Row 0 encodes the symmetric origin limit d * u_rr(0) with the
        two-point even-extension formula 2d (u_1 - u_0) / r_1^2.
        """
        r = self.nodes
        d = self.d
        m = self.n - 1
        lo = np.zeros(m)
        di = np.zeros(m)
        up = np.zeros(m)
        c0 = 2.0 * d / r[1] ** 2
        di[0] = -c0
        up[0] = c0
        hm = r[1:m] - r[0 : m - 1]
        hp = r[2 : m + 1] - r[1:m]
        rr = r[1:m]
        lo[1:] = (2.0 - (d - 1) * hp / rr) / (hm * (hm + hp))
        up[1:] = (2.0 + (d - 1) * hm / rr) / (hp * (hm + hp))
        di[1:] = -2.0 / (hm * hp) + (d - 1) / rr * (hp - hm) / (hm * hp)
        return lo, di, up


@dataclass(eq=False)
class RadialField:
    """Samples of a radial function on a grid. Values must stay finite."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"value count {self.values.shape} does not match grid size {self.grid.n}"
            )
        if not np.isfinite(self.values).all():
            raise CorruptionError("field holds non-finite values")

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.grid, values)

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())


def make_grid(d: int, R: float, n: int, stretch: float = 1.0) -> RadialGrid:
    """Build a grid whose spacings grow geometrically by `stretch`.

    The last node lands exactly on R (the geometric sum is normalized), the
    first sits exactly at 0. `stretch` = 1 gives uniform spacing.
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if not R > 0:
        raise ValueError(f"outer radius must be positive, got {R}")
    if n < 16:
        raise ValueError(f"need at least 16 nodes, got {n}")
    if not (1.0 <= stretch <= 1.2):
        raise ValueError(f"stretch must lie in [1, 1.2], got {stretch}")
    if stretch == 1.0:
        nodes = np.linspace(0.0, R, n)
    else:
        # r_k = h0 (q^k - 1)/(q - 1) with h0 fixed so that r_{n-1} = R
        k = np.arange(n, dtype=float)
        growth = np.expm1(k * math.log(stretch))
        nodes = R * growth / growth[-1]
    nodes[0] = 0.0
    nodes[-1] = R
    return RadialGrid(d=d, nodes=nodes, stretch=stretch)


def grid_for_span(d: int, R: float, h0: float, eps: float) -> RadialGrid:
    """Grid reaching R with inner spacing ~ h0 and relative grading eps."""
    if eps <= 0.0:
        n = max(16, int(math.ceil(R / h0)) + 1)
        return make_grid(d, R, n, 1.0)
    n = max(16, int(math.ceil(math.log1p(R * eps / h0) / math.log1p(eps))) + 1)
    return make_grid(d, R, n, 1.0 + eps)


def assert_finite(f: RadialField) -> None:
    if not np.isfinite(f.values).all():
        raise CorruptionError("field holds non-finite values")


def radial_integral(f: RadialField, moment: int = 0) -> float:
    """omega_{d-1} int_0^R f(r) r^{d-1+moment} dr by composite trapezoid."""
    assert_finite(f)
    return float(f.grid.quad_weights(moment) @ f.values)


def _fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 (Fornberg)."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def ddr(f: RadialField) -> RadialField:
    """Second-order first derivative; u_r(0) = 0 by radial symmetry."""
    grid = f.grid
    if grid.n < 3:
        raise ValueError("derivative stencils need at least 3 nodes")
    r = grid.nodes
    u = f.values
    out = np.empty_like(u)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    out[1:-1] = (
        (-hp / (hm * (hm + hp))) * u[:-2]
        + ((hp - hm) / (hm * hp)) * u[1:-1]
        + (hm / (hp * (hm + hp))) * u[2:]
    )
    out[0] = 0.0
    out[-1] = _fd_weights(r[-3:], r[-1], 1) @ u[-3:]
    return RadialField(grid, out)


def radial_laplacian(f: RadialField) -> RadialField:
    """u_rr + ((d-1)/r) u_r, with the symmetric limit d * u_rr(0) at r = 0."""
    grid = f.grid
    if grid.n < 3:
        raise ValueError("Laplacian stencils need at least 3 nodes")
    u = f.values
    r = grid.nodes
    lo, di, up = grid.laplacian_bands
    out = np.empty_like(u)
    m = grid.n - 1
    out[0] = di[0] * u[0] + up[0] * u[1]
    out[1:m] = lo[1:] * u[0 : m - 1] + di[1:] * u[1:m] + up[1:] * u[2 : m + 1]
    # one-sided closure at r = R: 4-point u_rr plus 3-point u_r
    k = min(4, grid.n)
    w2 = _fd_weights(r[-k:], r[-1], 2)
    w1 = _fd_weights(r[-3:], r[-1], 1)
    out[-1] = w2 @ u[-k:] + (grid.d - 1) / r[-1] * (w1 @ u[-3:])
    return RadialField(grid, out)
