"""Finite-volume solver for the 1D kinetic limit on the torus.

    (d_t + v d_x) f = -f + rho(x) * int dy K(M_rho(x, |x - y|)) f(y, v)

The collision integral is discretized in mass coordinates: around each
x-cell the other cells enter the ball in rings of equal distance, and each
ring is weighted by the mean of K over the mass it adds.  Those weights
telescope to ``int_0^1 K = 1``, so gain and loss balance exactly on the grid.
Time stepping is Strang splitting: half transport, exponential relaxation
towards the frozen gain, half transport.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .kernel import KernelSpec, eval_kernel, kernel_antiderivative
from .particle_sim import InitialLaw

__all__ = [
    "PhaseGrid",
    "DistributionFn",
    "make_grid",
    "grid_for_law",
    "initial_distribution",
    "density",
    "partial_mass",
    "gain_weights",
    "collision_gain",
    "transport",
    "step",
    "solve",
    "write_csv",
    "write_dump",
    "read_dump",
]


@dataclass(frozen=True)
class PhaseGrid:
    Nx: int
    Nv: int
    L: float = 1.0
    v_min: float = -2.0
    v_max: float = 2.0

    def __post_init__(self):
        if self.Nx < 2 or self.Nv < 2:
            raise ValueError("grid needs Nx, Nv >= 2")
        if not self.L > 0 or not self.v_max > self.v_min:
            raise ValueError("grid extents must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.Nv

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def v_centers(self) -> np.ndarray:
        return self.v_min + (np.arange(self.Nv) + 0.5) * self.dv


@dataclass(frozen=True)
class DistributionFn:
    """Cell-averaged density on a :class:`PhaseGrid`, values of shape (Nx, Nv)."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.Nx, self.grid.Nv):
            raise ValueError(f"values shape {vals.shape} does not match grid")
        if np.any(vals < 0):
            raise ValueError("distribution must be nonnegative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.dx * self.grid.dv)

    def cell_masses(self) -> np.ndarray:
        return self.values * (self.grid.dx * self.grid.dv)


def make_grid(Nx: int, Nv: int, L: float = 1.0, v_min: float = -2.0, v_max: float = 2.0):
    return PhaseGrid(Nx, Nv, L, v_min, v_max)


def grid_for_law(law: InitialLaw | str, Nx: int = 64, Nv: int | None = None,
                 L: float = 1.0) -> PhaseGrid:
    """Velocity grid covering the support of the initial velocity law.

    Two-point data sit at the centres of a 2-cell grid on [-2, 2].
    """
    name = law.name if isinstance(law, InitialLaw) else law
    if name == "uniform_x_two_point_v":
        return PhaseGrid(Nx, 2, L, -2.0, 2.0)
    if name == "uniform_x_uniform_v":
        return PhaseGrid(Nx, Nv or 32, L, -1.0, 1.0)
    return PhaseGrid(Nx, Nv or 32, L, -5.0, 5.0)


def initial_distribution(grid: PhaseGrid, law: InitialLaw | str) -> DistributionFn:
    """Cell averages of f0 = rho0(x) g(v) with unit mass."""
    if isinstance(law, str):
        law = InitialLaw(law)
    edges = np.arange(grid.Nx + 1) * grid.dx
    k = 2.0 * np.pi / grid.L
    # exact cell integrals of 1 + a cos(k x)
    rho_mass = grid.dx + law.x_amplitude * (np.sin(k * edges[1:]) - np.sin(k * edges[:-1])) / k
    rho_mass = rho_mass / rho_mass.sum()
    vc = grid.v_centers
    if law.name == "uniform_x_two_point_v":
        g_mass = np.where(np.isclose(np.abs(vc), 1.0), 1.0, 0.0)
        if g_mass.sum() != 2:
            raise ValueError("two-point velocities need cell centres at -1 and +1")
    elif law.name == "uniform_x_uniform_v":
        ve = grid.v_min + np.arange(grid.Nv + 1) * grid.dv
        g_mass = np.clip(np.minimum(ve[1:], 1.0) - np.maximum(ve[:-1], -1.0), 0.0, None)
    else:
        from math import erf, sqrt

        ve = grid.v_min + np.arange(grid.Nv + 1) * grid.dv
        cdf = np.array([0.5 * (1.0 + erf(e / sqrt(2.0))) for e in ve])
        g_mass = np.diff(cdf)
    g_mass = g_mass / g_mass.sum()
    vals = np.outer(rho_mass, g_mass) / (grid.dx * grid.dv)
    return DistributionFn(grid, vals)


def density(f: DistributionFn) -> np.ndarray:
    return f.values.sum(axis=1) * f.grid.dv


def partial_mass(rho: np.ndarray, x_cell: int, R: float, dx: float) -> float:
    """Mass of ``rho`` on the torus interval ``[x - R, x + R]`` around a cell centre.

    Built from the cumulative profile with linear interpolation inside cells;
    ``R >= L/2`` saturates at the total mass.
    """
    rho = np.asarray(rho, dtype=float)
    Nx = rho.size
    L = Nx * dx
    if R < 0:
        raise ValueError("radius must be nonnegative")
    total = float(rho.sum() * dx)
    if R >= L / 2:
        return total
    cum = np.concatenate(([0.0], np.cumsum(rho) * dx))
    centre = (x_cell + 0.5) * dx

    def F(y):
        # cumulative mass on the unrolled line
        wraps, rem = divmod(y, L)
        pos = rem / dx
        k = min(int(pos), Nx - 1)
        return wraps * total + cum[k] + rho[k] * (rem - k * dx)

    return float(F(centre + R) - F(centre - R))


def _ring_masses(rho: np.ndarray, dx: float) -> np.ndarray:
    """Mass per distance ring around every cell, shape (Nx, n_rings)."""
    Nx = rho.size
    n_rings = Nx // 2 + 1
    ring = np.empty((Nx, n_rings))
    ring[:, 0] = rho
    for ell in range(1, n_rings):
        if 2 * ell == Nx:
            ring[:, ell] = np.roll(rho, -ell)
        else:
            ring[:, ell] = np.roll(rho, -ell) + np.roll(rho, ell)
    return ring * dx


def gain_weights(rho: np.ndarray, dx: float, spec: KernelSpec) -> np.ndarray:
    """Matrix ``w[x, y]`` with ``sum_y w[x, y] rho[y] dx = 1`` for every x."""
    rho = np.asarray(rho, dtype=float)
    Nx = rho.size
    ring = _ring_masses(rho, dx)
    total = ring.sum(axis=1, keepdims=True)
    m_hi = np.cumsum(ring, axis=1) / total
    m_hi[:, -1] = 1.0
    m_lo = np.concatenate([np.zeros((Nx, 1)), m_hi[:, :-1]], axis=1)
    dm = m_hi - m_lo
    dK = kernel_antiderivative(spec, m_hi) - kernel_antiderivative(spec, m_lo)
    with np.errstate(invalid="ignore", divide="ignore"):
        ring_w = np.where(dm > 0, dK / np.where(dm > 0, dm, 1.0),
                          eval_kernel(spec, np.clip(m_lo, 0.0, 1.0)))
    # ring weights are per unit normalized mass; undo the normalization
    ring_w = ring_w / total
    w = np.empty((Nx, Nx))
    cols = np.arange(Nx)
    for ell in range(ring.shape[1]):
        w[cols, (cols + ell) % Nx] = ring_w[:, ell]
        w[cols, (cols - ell) % Nx] = ring_w[:, ell]
    return w


def collision_gain(f: DistributionFn, spec: KernelSpec) -> np.ndarray:
    rho = density(f)
    w = gain_weights(rho, f.grid.dx, spec)
    return rho[:, None] * (w @ f.values) * f.grid.dx


def transport(values: np.ndarray, grid: PhaseGrid, tau: float) -> np.ndarray:
    """Exact-shift free flight by ``tau`` with periodic linear interpolation."""
    out = np.empty_like(values)
    for j, v in enumerate(grid.v_centers):
        shift = v * tau / grid.dx
        n = int(np.floor(shift))
        theta = shift - n
        col = values[:, j]
        a = np.roll(col, n)
        if theta == 0.0:
            out[:, j] = a
        else:
            out[:, j] = (1.0 - theta) * a + theta * np.roll(col, n + 1)
    return out


def step(f: DistributionFn, spec: KernelSpec, dt: float) -> DistributionFn:
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = f.grid
    half = transport(f.values, g, 0.5 * dt)
    mid = DistributionFn(g, half)
    decay = np.exp(-dt)
    relaxed = decay * half + (1.0 - decay) * collision_gain(mid, spec)
    return DistributionFn(g, transport(relaxed, g, 0.5 * dt))


def solve(f0: DistributionFn, spec: KernelSpec, t_end: float, dt: float,
          output_times=None) -> list[DistributionFn]:
    """Integrate to each output time (default ``[t_end]``), shortening the last step."""
    times = sorted(float(t) for t in (output_times if output_times is not None else [t_end]))
    if times and (times[0] < 0 or times[-1] > t_end + 1e-12):
        raise ValueError("output times must lie in [0, t_end]")
    out = []
    f = f0
    t = 0.0
    for target in times:
        n = int(np.ceil((target - t) / dt - 1e-9))
        for k in range(n):
            h = dt if k < n - 1 else (target - t) - (n - 1) * dt
            f = step(f, spec, h)
        t = target
        out.append(f)
    return out


def write_csv(f: DistributionFn, path) -> None:
    xs, vs = f.grid.x_centers.tolist(), f.grid.v_centers.tolist()
    vals = f.values.tolist()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,v,f\n")
        for a in range(f.grid.Nx):
            for b in range(f.grid.Nv):
                fh.write(f"{xs[a]!r},{vs[b]!r},{vals[a][b]!r}\n")


_DUMP_HEADER = "<4sII3d"  # magic, Nx, Nv, L, v_min, v_max


def write_dump(f: DistributionFn, path) -> None:
    """Binary grid dump: little-endian header then row-major doubles."""
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack(_DUMP_HEADER, b"TAKF", g.Nx, g.Nv, g.L, g.v_min, g.v_max))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_dump(path) -> DistributionFn:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize(_DUMP_HEADER))
        magic, Nx, Nv, L, v_min, v_max = struct.unpack(_DUMP_HEADER, head)
        if magic != b"TAKF":
            raise ValueError(f"{path}: not a distribution dump")
        vals = np.frombuffer(fh.read(), dtype="<f8")
    grid = PhaseGrid(Nx, Nv, L, v_min, v_max)
    return DistributionFn(grid, vals.reshape(Nx, Nv))
