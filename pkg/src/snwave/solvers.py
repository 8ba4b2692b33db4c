"""Time-marching wave solvers on the per-level moving meshes.

Both solvers use the three-level implicit scheme with the stiffness
matrix applied to the unknown frame: marching forward the unknown is
u^{m+1}, marching backward it is p^{m-1}.  Assembly happens on the
unknown's own mesh and the two known frames are interpolated onto it,
which keeps every linear solve tridiagonal and symmetric positive
definite after Dirichlet elimination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import MovingDomainSpec, TimeGrid, build_spatial_mesh
from .fem import (
    ControlSamples,
    NodalField,
    assemble_mass,
    assemble_stiffness,
    boundary_flux_left,
    interpolate,
    solve_tridiagonal,
)

__all__ = [
    "Trajectory",
    "ForwardProblem",
    "BackwardProblem",
    "solve_forward",
    "solve_backward",
    "duality_residual",
    "assemble_left_boundary",
    "trajectory_l2_distance",
    "trajectory_l2_norm",
]


@dataclass(frozen=True)
class Trajectory:
    """One nodal field per time level; frame m lives on the mesh of level m."""

    grid: TimeGrid
    frames: list = field(repr=False)

    def __post_init__(self):
        if len(self.frames) != self.grid.M + 1:
            raise ValueError(
                f"trajectory has {len(self.frames)} frames for {self.grid.M + 1} levels"
            )

    def flux_left(self, m: int, method: str = "one-sided") -> float:
        return boundary_flux_left(self.frames[m], method=method)


@dataclass(frozen=True)
class ForwardProblem:
    """Initial-value problem marched from t = 0.

    ``left_boundary`` prescribes the Dirichlet value at x = 0 for every
    level; the moving endpoint is always 0.  ``source`` is an optional
    per-level forcing paired against test functions (used by the
    backward/forward equivalence oracle; the production systems are
    homogeneous).
    """

    left_boundary: np.ndarray = field(repr=False)
    ic0: Optional[NodalField] = None
    ic1: Optional[NodalField] = None
    source: Optional[Sequence[NodalField]] = None


@dataclass(frozen=True)
class BackwardProblem:
    """Terminal-value problem marched from t = T down to 0.

    Boundary values are homogeneous at both ends.  ``terminal0`` and
    ``terminal1`` are the state and its time derivative at t = T (zero
    by default); the last two frames are seeded as terminal0 and
    terminal0 - dt*terminal1, mirroring the forward starting rule.
    """

    source: Sequence[NodalField] = field(repr=False)
    terminal0: Optional[NodalField] = None
    terminal1: Optional[NodalField] = None


def assemble_left_boundary(controls, grid: TimeGrid) -> np.ndarray:
    """Sum control samples into per-level Dirichlet data at x = 0.

    The final level, which carries no sample of its own, takes the value
    of the last interval so the boundary trace is left-continuous at T.
    """
    left = np.zeros(grid.M + 1)
    for c in controls:
        c.check_aligned(grid)
        left += np.where(c.level_mask(grid), c.values, 0.0)
    left[grid.M] = left[grid.M - 1]
    return left


def _level_meshes(spec: MovingDomainSpec, grid: TimeGrid, N: int):
    return [build_spatial_mesh(spec, t, N) for t in grid.levels]


def _imposed(values: np.ndarray, v_left: float, v_right: float) -> np.ndarray:
    values[0] = v_left
    values[-1] = v_right
    return values


def _step_solve(mesh, dt, rhs_interior_full, v_left, v_right):
    """Solve (M/dt^2 + K) v = rhs with Dirichlet values eliminated by rows."""
    mass = assemble_mass(mesh)
    stiff = assemble_stiffness(mesh)
    A = stiff.add(mass, 1.0 / dt**2)
    rhs = rhs_interior_full[1:-1].copy()
    rhs[0] -= A.lower[0] * v_left
    rhs[-1] -= A.upper[-1] * v_right
    x = solve_tridiagonal(A.interior(), rhs)
    out = np.empty(mesh.n_nodes)
    out[0] = v_left
    out[-1] = v_right
    out[1:-1] = x
    return out


def solve_forward(problem: ForwardProblem, spec: MovingDomainSpec,
                  grid: TimeGrid, N: int) -> Trajectory:
    """March the three-level implicit scheme from the initial data.

    Frame 0 is the initial displacement, frame 1 the first-order start
    ic0 + dt*ic1, both carrying the prescribed boundary values; for
    m >= 1 the frame m+1 solves

        M (v - 2 u~^m + u~^{m-1})/dt^2 + K v = M s^{m+1}

    on the level-(m+1) mesh, where the tilde marks interpolation of the
    earlier frames onto that mesh.
    """
    if len(problem.left_boundary) != grid.M + 1:
        raise ValueError(
            f"left boundary has {len(problem.left_boundary)} values for "
            f"{grid.M + 1} levels"
        )
    if problem.source is not None and len(problem.source) != grid.M + 1:
        raise ValueError("source must provide one field per time level")
    meshes = _level_meshes(spec, grid, N)
    dt = grid.dt
    left = problem.left_boundary

    ic0 = problem.ic0 if problem.ic0 is not None else NodalField.zeros(meshes[0])
    ic1 = problem.ic1 if problem.ic1 is not None else NodalField.zeros(meshes[0])
    if ic0.mesh.n_nodes != N + 1 or ic1.mesh.n_nodes != N + 1:
        raise ValueError("initial fields must live on the t=0 mesh with N+1 nodes")

    frames = [None] * (grid.M + 1)
    f0 = _imposed(ic0.values.copy(), left[0], 0.0)
    frames[0] = NodalField(mesh=meshes[0], values=f0)

    start = NodalField(mesh=meshes[0], values=ic0.values + dt * ic1.values)
    f1 = _imposed(interpolate(start, meshes[1]).values, left[1], 0.0)
    frames[1] = NodalField(mesh=meshes[1], values=f1)

    for m in range(1, grid.M):
        mesh = meshes[m + 1]
        um = interpolate(frames[m], mesh).values
        umm = interpolate(frames[m - 1], mesh).values
        mass = assemble_mass(mesh)
        rhs = mass.matvec((2.0 * um - umm) / dt**2)
        if problem.source is not None:
            rhs += mass.matvec(problem.source[m + 1].values)
        vals = _step_solve(mesh, dt, rhs, left[m + 1], 0.0)
        frames[m + 1] = NodalField(mesh=mesh, values=vals)
    return Trajectory(grid=grid, frames=frames)


def solve_backward(problem: BackwardProblem, spec: MovingDomainSpec,
                   grid: TimeGrid, N: int) -> Trajectory:
    """March the adjoint-type scheme from t = T down to t = 0.

    Frames M and M-1 are seeded from the terminal data; for m from M-1
    down to 1 the frame m-1 solves

        M (p~^{m+1} - 2 p~^m + v)/dt^2 + K v = M s^{m-1}

    on the level-(m-1) mesh with homogeneous Dirichlet values.
    """
    if len(problem.source) != grid.M + 1:
        raise ValueError("source must provide one field per time level")
    meshes = _level_meshes(spec, grid, N)
    dt = grid.dt

    term0 = problem.terminal0 if problem.terminal0 is not None else NodalField.zeros(meshes[-1])
    term1 = problem.terminal1 if problem.terminal1 is not None else NodalField.zeros(meshes[-1])
    if term0.mesh.n_nodes != N + 1 or term1.mesh.n_nodes != N + 1:
        raise ValueError("terminal fields must live on the t=T mesh with N+1 nodes")

    frames = [None] * (grid.M + 1)
    fM = _imposed(term0.values.copy(), 0.0, 0.0)
    frames[grid.M] = NodalField(mesh=meshes[-1], values=fM)

    start = NodalField(mesh=meshes[-1], values=term0.values - dt * term1.values)
    fM1 = _imposed(interpolate(start, meshes[grid.M - 1]).values, 0.0, 0.0)
    frames[grid.M - 1] = NodalField(mesh=meshes[grid.M - 1], values=fM1)

    for m in range(grid.M - 1, 0, -1):
        mesh = meshes[m - 1]
        pp = interpolate(frames[m + 1], mesh).values
        pm = interpolate(frames[m], mesh).values
        mass = assemble_mass(mesh)
        rhs = mass.matvec(problem.source[m - 1].values + (2.0 * pm - pp) / dt**2)
        vals = _step_solve(mesh, dt, rhs, 0.0, 0.0)
        frames[m - 1] = NodalField(mesh=mesh, values=vals)
    return Trajectory(grid=grid, frames=frames)


def _mass_ip(a: NodalField, b: NodalField) -> float:
    return float(a.values @ assemble_mass(a.mesh).matvec(b.values))


def trajectory_l2_distance(a: Trajectory, b: Trajectory) -> float:
    """Space-time L2 distance, rectangle rule in time, mass pairing in space."""
    if a.grid.M != b.grid.M:
        raise ValueError("trajectories live on different time grids")
    acc = 0.0
    for m in range(a.grid.M):
        d = NodalField(mesh=a.frames[m].mesh,
                       values=a.frames[m].values - b.frames[m].values)
        acc += a.grid.dt * _mass_ip(d, d)
    return float(np.sqrt(acc))


def trajectory_l2_norm(a: Trajectory) -> float:
    acc = 0.0
    for m in range(a.grid.M):
        acc += a.grid.dt * _mass_ip(a.frames[m], a.frames[m])
    return float(np.sqrt(acc))


def duality_residual(forward_bdata: ControlSamples, source: Sequence[NodalField],
                     spec: MovingDomainSpec, grid: TimeGrid, N: int) -> float:
    """Consistency gap between the state/adjoint pairing and the boundary term.

    Drives u-hat forward with the given boundary data and zero initial
    data, drives p backward with the given source, and compares the
    volume pairing sum_m dt <source^m, u-hat^m> against the boundary
    pairing sum_m dt (d p/d nu)(0, t^m) w^m, where d/d nu = -d/dx is the
    outward conormal derivative at the controlled end.  The two agree up
    to the O(dt + h^2) mismatch of the marching pair; the return value is
    their absolute sum over the larger magnitude.
    """
    forward_bdata.check_aligned(grid)
    left = assemble_left_boundary([forward_bdata], grid)
    u_hat = solve_forward(ForwardProblem(left_boundary=left), spec, grid, N)
    p = solve_backward(BackwardProblem(source=source), spec, grid, N)

    volume = 0.0
    for m in range(grid.M):
        volume += grid.dt * _mass_ip(source[m], u_hat.frames[m])
    mask = forward_bdata.level_mask(grid)
    boundary = 0.0
    for m in np.nonzero(mask)[0]:
        boundary += grid.dt * (-p.flux_left(int(m))) * forward_bdata.values[m]
    scale = max(abs(volume), abs(boundary))
    if scale == 0.0:
        return 0.0
    return abs(volume + boundary) / scale
