"""Hierarchical two-control fixed point: state, adjoints and control updates.

One sweep solves the four fields in sequence: the state u driven by the
current controls, its adjoint p (source u - u2, zero terminal data), the
auxiliary forward field psi, and its adjoint phi (source psi).  Both
control updates read the outward conormal derivative d/d nu = -d/dx of
the matching adjoint at the controlled end x = 0:

    follower   w2 = (1/sigma) * d p / d nu     on its segment,
    leader     w1 =             d phi / d nu   on its segment,

and psi's boundary data on the follower segment is (1/sigma) d phi/d nu
of the previous sweep's phi.  The outward-normal orientation is what
makes each update the descent direction for the discrete cost it
minimizes; a finite-difference probe of the follower cost is provided as
an independent check (``nash_gradient_check``).

With zero phi terminal data and a zero initial leader, psi, phi and w1
stay exactly zero at every sweep and the iteration reduces to the
u <-> p loop in the follower control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .geometry import BoundarySegments, MovingDomainSpec, TimeGrid, build_spatial_mesh
from .fem import ControlSamples, NodalField, assemble_mass, control_l2_norm
from .solvers import (
    BackwardProblem,
    ForwardProblem,
    Trajectory,
    assemble_left_boundary,
    solve_backward,
    solve_forward,
    trajectory_l2_distance,
)

__all__ = [
    "SNConfig",
    "IterationRecord",
    "SNResult",
    "NashCheckResult",
    "DivergenceError",
    "follower_update",
    "leader_update",
    "stopping_quantity",
    "fixed_point_solve",
    "evaluate_J",
    "evaluate_J2",
    "nash_residual",
    "nash_gradient_check",
]

# Denominators below this are treated as exactly zero in the relative
# stopping criterion.
_ZERO_NORM = 1e-14

TargetLike = Union[float, Callable[[np.ndarray, float], np.ndarray]]


class DivergenceError(RuntimeError):
    """Raised when a sweep produces non-finite values; carries diagnostics."""

    def __init__(self, message: str, payload: dict):
        super().__init__(message)
        self.payload = payload


@dataclass
class SNConfig:
    """Parameters of the fixed-point driver."""

    sigma: float
    epsilon: float = 1e-5
    max_iter: int = 100
    u2: TargetLike = 10.0
    segments: Optional[BoundarySegments] = None
    phi_terminal: Optional[tuple] = None
    initial_controls: Optional[tuple] = None

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class IterationRecord:
    """One sweep of the log.

    ``du_l2`` is the space-time distance between this sweep's state and
    the previous one (0 at the first sweep); ``dw_l2`` sums the control
    changes produced by this sweep; ``stop_qty`` is the relative change
    of the control pair.
    """

    n: int
    stop_qty: float
    du_l2: float
    dw_l2: float
    J: float
    J2: float


@dataclass
class SNResult:
    """Outcome of a fixed-point run.

    ``u`` and ``p`` are recomputed from the final controls so the stored
    state/adjoint pair is consistent with ``w1``/``w2``; ``psi`` and
    ``phi`` are the last sweep's fields.
    """

    converged: bool
    iterations: int
    w1: ControlSamples
    w2: ControlSamples
    u: Trajectory
    p: Trajectory
    psi: Trajectory
    phi: Trajectory
    log: list = field(default_factory=list)
    iterates: Optional[list] = None  # per-sweep (w1, w2, psi, phi) when requested


def follower_update(p: Trajectory, sigma: float, segments: BoundarySegments,
                    grid: TimeGrid) -> ControlSamples:
    """Best response of the follower: (1/sigma) times p's outward flux at x=0."""
    mask = segments.follower_mask(grid)
    values = np.zeros(grid.M + 1)
    for m in np.nonzero(mask)[0]:
        values[m] = -p.flux_left(int(m)) / sigma
    return ControlSamples(segment=segments.sigma2, values=values)


def leader_update(phi: Trajectory, segments: BoundarySegments,
                  grid: TimeGrid) -> ControlSamples:
    """Leader update: phi's outward flux at x=0 on the leader segment."""
    mask = segments.leader_mask(grid)
    values = np.zeros(grid.M + 1)
    for m in np.nonzero(mask)[0]:
        values[m] = -phi.flux_left(int(m))
    return ControlSamples(segment=segments.sigma1, values=values)


def _pair_norm(w1: ControlSamples, w2: ControlSamples, grid: TimeGrid) -> float:
    return math.hypot(control_l2_norm(w1, grid), control_l2_norm(w2, grid))


def _diff(a: ControlSamples, b: ControlSamples) -> ControlSamples:
    return ControlSamples(segment=a.segment, values=a.values - b.values)


def stopping_quantity(new: tuple, old: tuple, grid: TimeGrid) -> float:
    """Relative change of the control pair, ||new - old|| / ||new||.

    When the denominator vanishes the quantity is 0 if the numerator
    also vanishes (a genuine fixed point at zero) and +inf otherwise.
    """
    w1n, w2n = new
    w1o, w2o = old
    num = _pair_norm(_diff(w1n, w1o), _diff(w2n, w2o), grid)
    den = _pair_norm(w1n, w2n, grid)
    if den < _ZERO_NORM:
        return 0.0 if num < _ZERO_NORM else math.inf
    return num / den


def _target_fields(u2: TargetLike, spec: MovingDomainSpec, grid: TimeGrid, N: int):
    fields = []
    for m, t in enumerate(grid.levels):
        mesh = build_spatial_mesh(spec, float(t), N)
        if callable(u2):
            vals = np.asarray(u2(mesh.nodes, float(t)), dtype=float)
        else:
            vals = np.full(mesh.n_nodes, float(u2))
        fields.append(NodalField(mesh=mesh, values=vals))
    return fields


def evaluate_J2(u: Trajectory, w2: ControlSamples, u2: TargetLike, sigma: float,
                grid: TimeGrid) -> float:
    """Follower cost: tracking misfit over the space-time domain plus
    sigma/2 times the squared control norm."""
    w2.check_aligned(grid)
    track = 0.0
    for m in range(grid.M):
        fld = u.frames[m]
        if callable(u2):
            tgt = np.asarray(u2(fld.mesh.nodes, float(grid.levels[m])), dtype=float)
        else:
            tgt = np.full(fld.mesh.n_nodes, float(u2))
        d = fld.values - tgt
        track += grid.dt * float(d @ assemble_mass(fld.mesh).matvec(d))
    return 0.5 * track + 0.5 * sigma * control_l2_norm(w2, grid) ** 2


def evaluate_J(w1: ControlSamples, grid: TimeGrid) -> float:
    """Leader cost: half the squared control norm on its segment."""
    return 0.5 * control_l2_norm(w1, grid) ** 2


def _solve_state(w1, w2, spec, grid, N):
    left = assemble_left_boundary([w1, w2], grid)
    return solve_forward(ForwardProblem(left_boundary=left), spec, grid, N)


def _solve_adjoint(u, u2_fields, spec, grid, N):
    source = [NodalField(mesh=u.frames[m].mesh,
                         values=u.frames[m].values - u2_fields[m].values)
              for m in range(grid.M + 1)]
    return solve_backward(BackwardProblem(source=source), spec, grid, N)


def fixed_point_solve(config: SNConfig, spec: MovingDomainSpec, grid: TimeGrid,
                      N: int, keep_iterates: bool = False) -> SNResult:
    """Iterate state, adjoints and control updates until the relative
    control change drops below epsilon or the iteration cap is reached.

    Hitting the cap returns a result with ``converged=False``; only
    non-finite values raise (``DivergenceError`` with a diagnostics
    payload).  With ``keep_iterates`` the result also records every
    sweep's updated controls and auxiliary fields.
    """
    segments = config.segments or BoundarySegments.disjoint_halves(grid.T)
    u2_fields = _target_fields(config.u2, spec, grid, N)
    mesh_T = build_spatial_mesh(spec, grid.T, N)

    phi_terminal = (None, None)
    if config.phi_terminal is not None:
        phi_terminal = tuple(
            f if isinstance(f, NodalField) or f is None
            else NodalField(mesh=mesh_T, values=np.asarray(f, dtype=float))
            for f in config.phi_terminal
        )

    if config.initial_controls is not None:
        w1, w2 = config.initial_controls
        w1.check_aligned(grid)
        w2.check_aligned(grid)
    else:
        w1 = ControlSamples.zeros(segments.sigma1, grid)
        w2 = ControlSamples.zeros(segments.sigma2, grid)

    phi_prev: Optional[Trajectory] = None
    u_prev: Optional[Trajectory] = None
    psi = phi = None
    log: list = []
    iterates: Optional[list] = [] if keep_iterates else None
    converged = False
    iterations = config.max_iter

    follower_idx = np.nonzero(segments.follower_mask(grid))[0]
    for n in range(config.max_iter):
        u = _solve_state(w1, w2, spec, grid, N)
        if not np.isfinite(u.frames[grid.M].values).all():
            raise DivergenceError(
                f"non-finite state values at sweep {n}",
                payload={"iteration": n, "field": "state", "sigma": config.sigma,
                         "T": grid.T, "M": grid.M, "N": N},
            )
        p = _solve_adjoint(u, u2_fields, spec, grid, N)

        psi_bc = np.zeros(grid.M + 1)
        if phi_prev is not None:
            for m in follower_idx:
                psi_bc[m] = -phi_prev.flux_left(int(m)) / config.sigma
            psi_bc[grid.M] = psi_bc[grid.M - 1]
        psi = solve_forward(ForwardProblem(left_boundary=psi_bc), spec, grid, N)
        phi = solve_backward(
            BackwardProblem(source=psi.frames, terminal0=phi_terminal[0],
                            terminal1=phi_terminal[1]),
            spec, grid, N,
        )

        w1_new = leader_update(phi, segments, grid)
        w2_new = follower_update(p, config.sigma, segments, grid)
        if not (np.all(np.isfinite(w1_new.values)) and np.all(np.isfinite(w2_new.values))):
            raise DivergenceError(
                f"non-finite control values at sweep {n}",
                payload={"iteration": n, "field": "controls", "sigma": config.sigma,
                         "T": grid.T, "M": grid.M, "N": N,
                         "w1_finite": bool(np.all(np.isfinite(w1_new.values))),
                         "w2_finite": bool(np.all(np.isfinite(w2_new.values)))},
            )

        stop = stopping_quantity((w1_new, w2_new), (w1, w2), grid)
        du = 0.0 if u_prev is None else trajectory_l2_distance(u, u_prev)
        dw = (control_l2_norm(_diff(w1_new, w1), grid)
              + control_l2_norm(_diff(w2_new, w2), grid))
        log.append(IterationRecord(
            n=n, stop_qty=stop, du_l2=du, dw_l2=dw,
            J=evaluate_J(w1, grid), J2=evaluate_J2(u, w2, config.u2, config.sigma, grid),
        ))

        w1, w2 = w1_new, w2_new
        phi_prev, u_prev = phi, u
        if keep_iterates:
            iterates.append((w1, w2, psi, phi))
        if stop <= config.epsilon:
            converged = True
            iterations = n + 1
            break

    u_final = _solve_state(w1, w2, spec, grid, N)
    p_final = _solve_adjoint(u_final, u2_fields, spec, grid, N)
    return SNResult(converged=converged, iterations=iterations, w1=w1, w2=w2,
                    u=u_final, p=p_final, psi=psi, phi=phi, log=log,
                    iterates=iterates)


def nash_residual(w2: ControlSamples, p: Trajectory, sigma: float,
                  segments: BoundarySegments, grid: TimeGrid) -> float:
    """Relative defect of the follower characterization at a candidate point.

    Measures || sigma*w2 - dp/dnu ||_{L2(segment)} / (sigma ||w2||); zero
    exactly at the follower's best response to the state that produced p.
    """
    mask = segments.follower_mask(grid)
    defect = 0.0
    for m in np.nonzero(mask)[0]:
        r = sigma * w2.values[m] - (-p.flux_left(int(m)))
        defect += grid.dt * r * r
    denom = sigma * control_l2_norm(w2, grid)
    if denom == 0.0:
        return math.sqrt(defect)
    return math.sqrt(defect) / denom


@dataclass(frozen=True)
class NashCheckResult:
    """Finite-difference probe of the follower cost around a candidate point.

    ``fd`` holds centered-difference directional derivatives of the
    follower cost, ``analytic`` the adjoint-flux pairing for the same
    directions.  ``max_rel_discrepancy`` is the largest |fd - analytic|
    over max(|fd|, |analytic|, sigma*||w2||*||direction||), and
    ``max_scaled_analytic`` the largest |analytic| under the same scale;
    both are small at a true equilibrium.
    """

    max_rel_discrepancy: float
    max_scaled_analytic: float
    fd: np.ndarray
    analytic: np.ndarray
    scale: float


def nash_gradient_check(w1: ControlSamples, w2: ControlSamples, config: SNConfig,
                        spec: MovingDomainSpec, grid: TimeGrid, N: int,
                        n_directions: int = 5, seed: int = 0) -> NashCheckResult:
    """Compare brute-force directional derivatives of the follower cost
    against the adjoint-flux pairing.

    Directions are smooth seeded sine profiles supported on the follower
    segment, normalized to unit control norm.  The centered difference
    uses delta = 1e-4 * max(1, ||w2||); the analytic pairing for a
    direction d is sum_m dt (sigma w2_m - (dp/dnu)_m) d_m.
    """
    segments = config.segments or BoundarySegments.disjoint_halves(grid.T)
    mask = segments.follower_mask(grid)
    idx = np.nonzero(mask)[0]
    if len(idx) < 2:
        raise ValueError("follower segment holds fewer than 2 time levels")

    u = _solve_state(w1, w2, spec, grid, N)
    u2_fields = _target_fields(config.u2, spec, grid, N)
    p = _solve_adjoint(u, u2_fields, spec, grid, N)
    flux = np.array([-p.flux_left(int(m)) for m in idx])  # dp/dnu at x=0

    a, b = segments.sigma2
    s = (grid.levels[idx] - a) / (b - a)
    rng = np.random.default_rng(seed)
    w2_norm = control_l2_norm(w2, grid)
    delta = 1e-4 * max(1.0, w2_norm)

    fd = np.empty(n_directions)
    analytic = np.empty(n_directions)
    rels = np.empty(n_directions)
    scale = 0.0
    for d in range(n_directions):
        coefs = rng.standard_normal(3)
        profile = sum(c * np.sin((j + 1) * np.pi * s) for j, c in enumerate(coefs))
        dvals = np.zeros(grid.M + 1)
        dvals[idx] = profile
        direction = ControlSamples(segment=segments.sigma2, values=dvals)
        dnorm = control_l2_norm(direction, grid)
        direction = ControlSamples(segment=segments.sigma2, values=dvals / dnorm)

        cost = []
        for sgn in (+1.0, -1.0):
            w2_pert = ControlSamples(segment=segments.sigma2,
                                     values=w2.values + sgn * delta * direction.values)
            u_pert = _solve_state(w1, w2_pert, spec, grid, N)
            cost.append(evaluate_J2(u_pert, w2_pert, config.u2, config.sigma, grid))
        fd[d] = (cost[0] - cost[1]) / (2.0 * delta)
        analytic[d] = grid.dt * float(
            np.sum((config.sigma * w2.values[idx] - flux) * direction.values[idx])
        )
        scale = config.sigma * w2_norm  # directions have unit norm
        rels[d] = abs(fd[d] - analytic[d]) / max(abs(fd[d]), abs(analytic[d]), scale)

    scaled_ana = np.abs(analytic) / max(scale, _ZERO_NORM)
    return NashCheckResult(
        max_rel_discrepancy=float(np.max(rels)),
        max_scaled_analytic=float(np.max(scaled_ana)),
        fd=fd, analytic=analytic, scale=scale,
    )
