"""Problem data for the counter-flow heat-exchanger transport system.

Two temperature profiles on the unit interval, advected in opposite
directions and coupled through a heat-exchange term:

    d/dt Th(x,t) = -u1 d/dx Th(x,t) - c1 (Th - Tc)
    d/dt Tc(x,t) = +u2 d/dx Tc(x,t) + c2 (Th - Tc)

with inflow boundary conditions Th(0,t) and Tc(1,t).  This module holds
the immutable value objects shared by every other module (parameters,
spatial grid, state fields) together with the single L2 discretisation
convention used throughout: trapezoidal quadrature on the grid nodes and
an inner product that is linear in its first argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ExchangerParams:
    """Physical parameters of the exchanger.

    Parameters
    ----------
    u1, u2 : float
        Transport velocities of the hot and cold stream.  Both strictly
        positive; the hot stream moves to the right, the cold stream to
        the left.
    c1, c2 : float
        Heat-exchange coefficients, non-negative.  Zero coupling turns
        the system into two independent transport equations, a useful
        exactly-solvable reference case; the spectral machinery needs
        c1 > 0 and checks that itself.
    """

    u1: float = 1.0
    u2: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self) -> None:
        for name in ("u1", "u2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("c1", "c2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class SystemMatrices:
    """Constant coefficient matrices of the first-order system.

    ``U`` is the diagonal transport matrix diag(-u1, u2) acting on d/dx,
    ``M`` the 2x2 exchange matrix, so that d/dt T = U T_x + M T.
    """

    U: np.ndarray
    M: np.ndarray


def system_matrices(params: ExchangerParams) -> SystemMatrices:
    """Assemble the 2x2 coefficient matrices from the parameters."""
    U = np.diag([-params.u1, params.u2]).astype(float)
    M = np.array(
        [
            [-params.c1, params.c1],
            [params.c2, -params.c2],
        ],
        dtype=float,
    )
    return SystemMatrices(U=U, M=M)


def exchange_norm(params: ExchangerParams) -> float:
    """Spectral norm of the exchange matrix M.

    Used as the coupling-strength constant in energy estimates; for the
    rank-one M above it equals sqrt(2) * sqrt(c1^2 + c2^2).
    """
    M = system_matrices(params).M
    return float(np.linalg.svd(M, compute_uv=False)[0])


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of n nodes on [0, 1] including both endpoints."""

    n: int
    x: np.ndarray = field(repr=False)
    dx: float

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError(f"need at least 3 grid nodes, got {self.n}")
        if self.x.shape != (self.n,):
            raise ValueError("x must hold exactly n nodes")
        self.x.setflags(write=False)

    @classmethod
    def uniform(cls, n: int) -> "SpatialGrid":
        if n < 3:
            raise ValueError(f"need at least 3 grid nodes, got {n}")
        x = np.linspace(0.0, 1.0, n)
        return cls(n=n, x=x, dx=1.0 / (n - 1))


def trapezoid_weights(grid: SpatialGrid) -> np.ndarray:
    """Trapezoidal quadrature weights on the grid nodes."""
    w = np.full(grid.n, grid.dx)
    w[0] = w[-1] = 0.5 * grid.dx
    return w


@dataclass
class Field:
    """Pair of nodal profiles (hot, cold) sampled on a common grid.

    Values are stored complex so that analytic eigenfunctions and real
    temperature profiles share one container.  The two components must
    have the grid's length.
    """

    grid: SpatialGrid
    zh: np.ndarray
    zc: np.ndarray

    def __post_init__(self) -> None:
        self.zh = np.asarray(self.zh, dtype=complex)
        self.zc = np.asarray(self.zc, dtype=complex)
        if self.zh.shape != (self.grid.n,) or self.zc.shape != (self.grid.n,):
            raise ValueError(
                f"components must have shape ({self.grid.n},), got "
                f"{self.zh.shape} and {self.zc.shape}"
            )

    @classmethod
    def zeros(cls, grid: SpatialGrid) -> "Field":
        return cls(grid, np.zeros(grid.n, dtype=complex), np.zeros(grid.n, dtype=complex))

    @classmethod
    def from_stacked(cls, grid: SpatialGrid, vec: np.ndarray) -> "Field":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (2 * grid.n,):
            raise ValueError(f"stacked vector must have length {2 * grid.n}")
        return cls(grid, vec[: grid.n].copy(), vec[grid.n :].copy())

    def stacked(self) -> np.ndarray:
        """Concatenate (hot, cold) into a single length-2n vector."""
        return np.concatenate([self.zh, self.zc])

    def copy(self) -> "Field":
        return Field(self.grid, self.zh.copy(), self.zc.copy())

    def real_part(self) -> "Field":
        return Field(self.grid, self.zh.real.astype(complex), self.zc.real.astype(complex))


def l2_inner(a: Field, b: Field, /) -> complex:
    """Trapezoidal L2 inner product, linear in the first argument.

    <a, b> = int_0^1 (a_h conj(b_h) + a_c conj(b_c)) dx
    """
    if a.grid.n != b.grid.n:
        raise ValueError("fields live on different grids")
    w = trapezoid_weights(a.grid)
    return complex(np.sum(w * (a.zh * np.conj(b.zh) + a.zc * np.conj(b.zc))))


def l2_norm(a: Field) -> float:
    """Trapezoidal L2 norm of a two-component field."""
    w = trapezoid_weights(a.grid)
    s = np.sum(w * (np.abs(a.zh) ** 2 + np.abs(a.zc) ** 2))
    return float(np.sqrt(max(s.real, 0.0)))


def l2_norm_real(a: Field) -> float:
    """Trapezoidal L2 norm of the real parts only."""
    w = trapezoid_weights(a.grid)
    s = np.sum(w * (a.zh.real**2 + a.zc.real**2))
    return float(np.sqrt(max(s, 0.0)))
