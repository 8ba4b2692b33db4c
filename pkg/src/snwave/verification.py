"""Built-in oracle battery behind the CLI ``verify`` subcommand.

Each check returns (name, passed, detail).  The same properties are
asserted at full size in the test suite; here the heavier ones run at
reduced resolution so the whole battery stays fast.
"""

from __future__ import annotations

import numpy as np

from .geometry import (
    BoundarySegments,
    MovingDomainSpec,
    build_spatial_mesh,
    build_time_grid,
    compute_Tc,
    trapezoid_stats,
)
from .fem import ControlSamples, NodalField, assemble_mass, assemble_stiffness
from .solvers import (
    BackwardProblem,
    ForwardProblem,
    duality_residual,
    solve_backward,
    solve_forward,
)
from .game import SNConfig, fixed_point_solve, nash_residual

# Independently computed control-time constant for k = 1/4 (50-digit
# evaluation of exp(32/27)*4, truncated to double precision).
TC_QUARTER = 17.597834287066328


def _check_tc():
    got = compute_Tc(0.25)
    ok = abs(got - TC_QUARTER) <= 1e-3
    return "tc-formula", ok, f"compute_Tc(0.25) = {got:.6f}"


def _check_border():
    tc = compute_Tc(0.25)
    refs = {1: 41.936, 5: 202.484, 10: 403.167}
    worst = 0.0
    for mult, ref in refs.items():
        spec = MovingDomainSpec(k=0.25, T=mult * tc)
        st = trapezoid_stats(spec, target_edge=mult * tc / 128.0)
        worst = max(worst, abs(st.border_length - ref) / ref)
    return "border-length", worst <= 0.01, f"max relative gap {worst:.4f}"


def _manufactured_error(NM):
    spec = MovingDomainSpec(k=0.0, T=1.0)
    grid = build_time_grid(1.0, NM)
    mesh = build_spatial_mesh(spec, 0.0, NM)
    x = mesh.nodes
    prob = ForwardProblem(
        left_boundary=np.zeros(NM + 1),
        ic0=NodalField(mesh=mesh, values=np.sin(np.pi * x)),
        ic1=NodalField.zeros(mesh),
    )
    traj = solve_forward(prob, spec, grid, NM)
    err = 0.0
    for m in range(NM + 1):
        exact = np.sin(np.pi * x) * np.cos(np.pi * grid.levels[m])
        d = traj.frames[m].values - exact
        err += grid.dt * float(d @ assemble_mass(mesh).matvec(d))
    return np.sqrt(err)


def _check_manufactured():
    e1 = _manufactured_error(50)
    e2 = _manufactured_error(100)
    ok = e1 / e2 >= 1.7
    return "manufactured-convergence", ok, f"error ratio 50->100 = {e1 / e2:.3f}"


def _check_reversal():
    NM = 64
    spec = MovingDomainSpec(k=0.0, T=1.0)
    grid = build_time_grid(1.0, NM)
    mesh = build_spatial_mesh(spec, 0.0, NM)
    x = mesh.nodes
    src = [NodalField(mesh=mesh, values=np.sin(2 * np.pi * x) * np.cos(3.0 * t))
           for t in grid.levels]
    back = solve_backward(BackwardProblem(source=src), spec, grid, NM)
    rev = [src[NM - m] for m in range(NM + 1)]
    fwd = solve_forward(ForwardProblem(left_boundary=np.zeros(NM + 1), source=rev),
                        spec, grid, NM)
    gap = max(float(np.max(np.abs(back.frames[NM - m].values - fwd.frames[m].values)))
              for m in range(NM + 1))
    return "backward-reversal", gap <= 1e-10, f"max frame gap {gap:.2e}"


def _check_zero_data():
    spec = MovingDomainSpec(k=0.25, T=4.0)
    grid = build_time_grid(4.0, 32)
    traj = solve_forward(ForwardProblem(left_boundary=np.zeros(33)), spec, grid, 32)
    ok = all(np.all(f.values == 0.0) for f in traj.frames)
    return "zero-data-zero-trajectory", ok, "all frames exactly zero" if ok else "nonzero frame"


def _check_dissipative():
    NM = 64
    spec = MovingDomainSpec(k=0.0, T=1.0)
    grid = build_time_grid(1.0, NM)
    mesh = build_spatial_mesh(spec, 0.0, NM)
    x = mesh.nodes
    prob = ForwardProblem(
        left_boundary=np.zeros(NM + 1),
        ic0=NodalField(mesh=mesh, values=np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x)),
        ic1=NodalField(mesh=mesh, values=0.5 * np.sin(2 * np.pi * x)),
    )
    traj = solve_forward(prob, spec, grid, NM)
    mass = assemble_mass(mesh)
    stiff = assemble_stiffness(mesh)
    energy = []
    for m in range(NM):
        d = (traj.frames[m + 1].values - traj.frames[m].values) / grid.dt
        kin = float(d @ mass.matvec(d))
        cross = float(traj.frames[m + 1].values @ stiff.matvec(traj.frames[m].values))
        energy.append(kin + cross)
    drift = float(np.max(np.diff(energy)))
    ok = drift <= 1e-10 * max(1.0, abs(energy[0]))
    return "implicit-scheme-dissipative", ok, f"max energy increase {drift:.2e}"


def _check_degenerate():
    tc = compute_Tc(0.25)
    spec = MovingDomainSpec(k=0.25, T=tc)
    grid = build_time_grid(tc, 40)
    cfg = SNConfig(sigma=100.0, epsilon=1e-12, max_iter=3)
    res = fixed_point_solve(cfg, spec, grid, 40)
    ok = (np.all(res.w1.values == 0.0)
          and all(np.all(f.values == 0.0) for f in res.psi.frames)
          and all(np.all(f.values == 0.0) for f in res.phi.frames))
    return "degenerate-subsystem-zero", ok, "psi, phi, w1 exactly zero"


def _check_zero_target():
    tc = compute_Tc(0.25)
    spec = MovingDomainSpec(k=0.25, T=tc)
    grid = build_time_grid(tc, 40)
    cfg = SNConfig(sigma=100.0, u2=0.0)
    res = fixed_point_solve(cfg, spec, grid, 40)
    ok = (res.converged and res.iterations == 1
          and np.all(res.w2.values == 0.0)
          and all(np.all(f.values == 0.0) for f in res.u.frames))
    return "zero-target-fixed-point", ok, f"iterations = {res.iterations}"


def _check_duality():
    NM = 100
    spec = MovingDomainSpec(k=0.0, T=1.0)
    grid = build_time_grid(1.0, NM)
    mesh = build_spatial_mesh(spec, 0.0, NM)
    x = mesh.nodes
    src = [NodalField(mesh=mesh, values=np.sin(np.pi * x) * (1.0 + t))
           for t in grid.levels]
    seg = (0.0, 0.5)
    vals = np.zeros(NM + 1)
    mask = grid.levels < 0.5
    vals[mask] = np.sin(np.pi * grid.levels[mask] / 0.5) ** 2
    ctrl = ControlSamples(segment=seg, values=vals)
    res = duality_residual(ctrl, src, spec, grid, NM)
    return "duality-residual", res <= 0.05, f"relative residual {res:.4f}"


def _check_nash_residual():
    tc = compute_Tc(0.25)
    spec = MovingDomainSpec(k=0.25, T=tc)
    grid = build_time_grid(tc, 50)
    cfg = SNConfig(sigma=100.0)
    res = fixed_point_solve(cfg, spec, grid, 50)
    segs = BoundarySegments.disjoint_halves(tc)
    r = nash_residual(res.w2, res.p, 100.0, segs, grid)
    ok = res.converged and r <= 1e-3
    return "follower-best-response", ok, f"residual {r:.2e}, iterations {res.iterations}"


ALL_CHECKS = [
    _check_tc,
    _check_border,
    _check_manufactured,
    _check_reversal,
    _check_zero_data,
    _check_dissipative,
    _check_degenerate,
    _check_zero_target,
    _check_duality,
    _check_nash_residual,
]


def run_all():
    """Run every check; returns a list of (name, passed, detail)."""
    results = []
    for check in ALL_CHECKS:
        results.append(check())
    return results
