"""Finite-difference discretisation of the transport generator.

First-order upwind differences on the uniform grid (backward for the
right-moving hot stream, forward for the left-moving cold stream) and an
unconditionally stable implicit Euler time stepper.  The generator is a
dense (2n x 2n) matrix acting on the stacked nodal vector [zh; zc]; the
rows of the two inflow nodes zh(0) and zc(1) are identically zero so the
Dirichlet values are carried through a step unchanged.  Time stepping
reuses one LU factorisation per (generator, dt) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .model import ExchangerParams, Field, SpatialGrid, l2_norm, l2_norm_real


@dataclass(frozen=True)
class DiscreteGenerator:
    """Dense upwind discretisation of the (possibly shifted) generator.

    ``mat`` represents A + shift*I on the unconstrained nodes when
    ``kappa`` was not supplied, and A + shift*I - kappa*C with output
    C z = zc(0) when it was.  Rows 0 (hot inflow) and 2n-1 (cold inflow)
    are zero.
    """

    grid: SpatialGrid
    params: ExchangerParams
    shift: float
    mat: np.ndarray = field(repr=False)
    has_injection: bool

    @property
    def output_index(self) -> int:
        """Index of the measured node zc(0) in the stacked vector."""
        return self.grid.n


def unconstrained_indices(n: int) -> np.ndarray:
    """Stacked-vector indices not pinned by the inflow conditions."""
    return np.concatenate([np.arange(1, n), np.arange(n, 2 * n - 1)])


def assemble_generator(
    params: ExchangerParams,
    grid: SpatialGrid,
    shift: float = 0.0,
    kappa: Optional[Field] = None,
) -> DiscreteGenerator:
    """Assemble the dense upwind matrix of A + shift*I (- kappa*C).

    Parameters
    ----------
    params : ExchangerParams
    grid : SpatialGrid
    shift : float
        Real spectral shift added on the unconstrained diagonal.
    kappa : Field, optional
        Output-injection gain; when given, column n (the zc(0) node)
        receives -kappa at every unconstrained row.
    """
    n = grid.n
    dx = grid.dx
    L = np.zeros((2 * n, 2 * n), dtype=complex)

    # hot stream, backward differences; row 0 stays zero (inflow node)
    for i in range(1, n):
        L[i, i] += -params.u1 / dx - params.c1 + shift
        L[i, i - 1] += params.u1 / dx
        L[i, n + i] += params.c1

    # cold stream, forward differences; row 2n-1 stays zero (inflow node)
    for i in range(0, n - 1):
        L[n + i, n + i] += -params.u2 / dx - params.c2 + shift
        L[n + i, n + i + 1] += params.u2 / dx
        L[n + i, i] += params.c2

    if kappa is not None:
        if kappa.grid.n != n:
            raise ValueError("kappa lives on a different grid")
        g = kappa.stacked()
        rows = unconstrained_indices(n)
        L[rows, n] -= g[rows]

    return DiscreteGenerator(
        grid=grid, params=params, shift=float(shift), mat=L, has_injection=kappa is not None
    )


@dataclass(frozen=True)
class EulerSolver:
    """Cached LU factorisation of (I - dt*L) for one generator."""

    dt: float
    lu: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)


def euler_factorization(gen: DiscreteGenerator, dt: float) -> EulerSolver:
    """Factor I - dt*L once; raises LinAlgError on a singular system."""
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    B = np.eye(2 * gen.grid.n, dtype=complex) - dt * gen.mat
    lu, piv = la.lu_factor(B)
    pivot_min = np.min(np.abs(np.diag(lu)))
    if not np.isfinite(pivot_min) or pivot_min < 1e-300:
        raise np.linalg.LinAlgError(
            f"implicit Euler system singular for dt={dt} (min pivot {pivot_min:.3e})"
        )
    return EulerSolver(dt=dt, lu=lu, piv=piv)


def step_implicit_euler(
    state: Field,
    gen: DiscreteGenerator,
    dt: float,
    solver: Optional[EulerSolver] = None,
) -> Field:
    """One implicit Euler step (I - dt*L) z_new = z_old.

    The zero rows of L give identity rows in the system, so constrained
    entries pass through unchanged; boundary forcing is applied by
    writing the inflow values into the state before stepping.
    """
    if solver is None:
        solver = euler_factorization(gen, dt)
    elif abs(solver.dt - dt) > 1e-15 * max(1.0, abs(dt)):
        raise ValueError("cached solver was factored for a different dt")
    z = la.lu_solve((solver.lu, solver.piv), state.stacked())
    return Field.from_stacked(state.grid, z)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled values on an increasing time axis starting at 0.

    ``values`` holds one entry per time: rows of an array for scalar
    payloads, a list for Field snapshots.  The axis need not be uniform
    (snapshot series may end on a shorter final interval when the stride
    does not divide the step count).
    """

    times: np.ndarray
    values: object

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("times must be a non-empty 1-d array")
        if t[0] != 0.0:
            raise ValueError(f"times must start at 0, got {t[0]!r}")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if len(self.values) != t.size:
            raise ValueError("values must have one entry per time")

    def __len__(self) -> int:
        return len(self.times)


def simulate(
    gen: DiscreteGenerator,
    init: Field,
    dt: float,
    t_final: float,
    snapshot_stride: int = 1,
) -> tuple[TimeSeries, TimeSeries]:
    """March the semi-discrete system with implicit Euler.

    Returns
    -------
    norms : TimeSeries
        Rows (norm_complex, norm_real): trapezoidal L2 norm of the state
        and of its real part, at every step including t=0.
    snapshots : TimeSeries
        Field snapshots every ``snapshot_stride`` steps; the initial and
        final states are always included.

    The step count is ceil(t_final / dt), so when t_final is not an
    integer multiple of dt the run extends past t_final by a fraction of
    one step rather than shortening the horizon.
    """
    if t_final <= 0.0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    if snapshot_stride < 1:
        raise ValueError(f"snapshot_stride must be >= 1, got {snapshot_stride}")
    # the 1e-9 backs off float noise in t_final/dt, e.g. 5.0/2.5e-3
    steps = math.ceil(t_final / dt - 1e-9)
    if steps < 1:
        steps = 1

    solver = euler_factorization(gen, dt)
    state = init.copy()

    norms = np.empty((steps + 1, 2))
    snap_times = [0.0]
    snap_fields = [state.copy()]
    norms[0] = (l2_norm(state), l2_norm_real(state))

    for k in range(1, steps + 1):
        state = step_implicit_euler(state, gen, dt, solver)
        norms[k] = (l2_norm(state), l2_norm_real(state))
        if k % snapshot_stride == 0 or k == steps:
            snap_times.append(k * dt)
            snap_fields.append(state.copy())

    times = dt * np.arange(steps + 1)
    return (
        TimeSeries(times=times, values=norms),
        TimeSeries(times=np.array(snap_times), values=snap_fields),
    )
