"""Spectral theory of the shifted error generator.

The boundary eigenvalue problem for the shifted generator A_s = A + lo*I
reduces to a quadratic exponent equation: an eigenfunction candidate for
the eigenvalue lam is built from exponentials exp(mu1*x), exp(mu2*x)
where mu1, mu2 solve

    mu^2 + theta1*mu + theta2 = 0,

with coefficients determined by s = lam - lo and the physical
parameters.  The hot inflow condition is built into the candidate; the
cold inflow condition yields the scalar characteristic function f(lam)
whose roots are the eigenvalues.  All exponential differences are
evaluated in the half-sum/half-difference (sinh/cosh) form so the
computation stays accurate for large or nearly equal exponents and has
a well-defined limit at a double root.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .discretize import DiscreteGenerator, assemble_generator, unconstrained_indices
from .model import ExchangerParams, Field, SpatialGrid, l2_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CharacteristicCoefficients:
    """Quadratic exponent data for one eigenvalue candidate.

    ``theta1``, ``theta2`` are the coefficients of the exponent
    quadratic; ``mu1``, ``mu2`` its roots ordered by descending
    (real, imaginary) part.
    """

    theta1: complex
    theta2: complex
    mu1: complex
    mu2: complex


def _exponent_quadratic(
    lam: complex, params: ExchangerParams, lambda_o: float
) -> tuple[complex, complex]:
    s = complex(lam) - lambda_o
    u1, u2, c1, c2 = params.u1, params.u2, params.c1, params.c2
    theta1 = ((u2 - u1) * s + u2 * c1 - u1 * c2) / (u1 * u2)
    theta2 = -(s * s + s * (c1 + c2)) / (u1 * u2)
    return theta1, theta2


def _require_coupling(params: ExchangerParams) -> None:
    if params.c1 <= 0.0:
        raise ValueError(
            "the boundary eigenvalue problem needs c1 > 0 (the cold component "
            "is recovered from the hot equation by dividing by c1)"
        )


def _quadratic_roots(b: complex, c: complex) -> tuple[complex, complex]:
    """Roots of mu^2 + b*mu + c = 0, cancellation-safe, (Re, Im)-descending."""
    disc = np.sqrt(complex(b * b - 4.0 * c))
    # pick the sign that adds constructively to -b
    if (np.conj(b) * disc).real > 0.0:
        disc = -disc
    q = 0.5 * (-b + disc)
    if q == 0.0:
        r1 = r2 = 0.5 * (-b)
    else:
        r1, r2 = q, c / q
    if (r1.real, r1.imag) < (r2.real, r2.imag):
        r1, r2 = r2, r1
    return complex(r1), complex(r2)


def characteristic_coefficients(
    lam: complex, params: ExchangerParams, lambda_o: float
) -> CharacteristicCoefficients:
    """Exponent quadratic coefficients and roots at the candidate lam."""
    theta1, theta2 = _exponent_quadratic(lam, params, lambda_o)
    mu1, mu2 = _quadratic_roots(theta1, theta2)
    return CharacteristicCoefficients(theta1=theta1, theta2=theta2, mu1=mu1, mu2=mu2)


def characteristic_f(
    lam: complex,
    params: ExchangerParams,
    lambda_o: float,
    exponents: str = "roots",
) -> complex:
    """Boundary characteristic function; its roots are eigenvalues.

    f(lam) is the cold-stream inflow value of the eigenfunction
    candidate.  ``exponents`` selects how the two exponentials are
    obtained from the quadratic:

    - "roots": solve mu^2 + theta1*mu + theta2 = 0 (the meaningful
      reading; the candidate then satisfies the interior equations).
    - "verbatim": use theta1, theta2 themselves as exponents.  Kept
      only as a cross-check of the alternative literal reading; it does
      not vanish on the discrete spectrum.

    The exponential differences are evaluated through the identities
    e^a - e^b = 2 e^m sinh(d), a e^a - b e^b = e^m (2m sinh d + 2d cosh d)
    with m = (a+b)/2, d = (a-b)/2, which remain exact as d -> 0; at an
    exact double root both differences vanish and f = 0.
    """
    _require_coupling(params)
    s = complex(lam) - lambda_o
    theta1, theta2 = _exponent_quadratic(lam, params, lambda_o)
    if exponents == "roots":
        mu1, mu2 = _quadratic_roots(theta1, theta2)
    elif exponents == "verbatim":
        mu1, mu2 = theta1, theta2
    else:
        raise ValueError(f"unknown exponents mode {exponents!r}")

    m = 0.5 * (mu1 + mu2)
    d = 0.5 * (mu1 - mu2)
    em = np.exp(m)
    ediff = 2.0 * em * np.sinh(d)
    mudiff = em * (2.0 * m * np.sinh(d) + 2.0 * d * np.cosh(d))
    u1, c1 = params.u1, params.c1
    return complex((u1 / c1) * mudiff + ((s + c1) / c1) * ediff)


def eigenfunction(
    lam: complex, params: ExchangerParams, lambda_o: float, grid: SpatialGrid
) -> Field:
    """Analytic eigenfunction candidate sampled on the grid.

    The hot component is e^{mu1 x} - e^{mu2 x} (zero at the hot inflow
    by construction); the cold component follows from the hot interior
    equation.  At an exact double root mu1 == mu2 the difference
    collapses and the null field is returned; callers must check for it.
    """
    _require_coupling(params)
    coeff = characteristic_coefficients(lam, params, lambda_o)
    mu1, mu2 = coeff.mu1, coeff.mu2
    s = complex(lam) - lambda_o
    m = 0.5 * (mu1 + mu2)
    d = 0.5 * (mu1 - mu2)
    x = grid.x
    emx = np.exp(m * x)
    sh = np.sinh(d * x)
    ch = np.cosh(d * x)
    vh = 2.0 * emx * sh
    dvh = emx * (2.0 * m * sh + 2.0 * d * ch)
    u1, c1 = params.u1, params.c1
    vc = (u1 / c1) * dvh + ((s + c1) / c1) * vh
    return Field(grid, vh, vc)


def newton_polish(
    lam0: complex,
    params: ExchangerParams,
    lambda_o: float,
    max_iter: int = 30,
) -> tuple[complex, bool]:
    """Refine an eigenvalue estimate by Newton iteration on f.

    The derivative is taken by central differences with step scaled to
    the iterate.  Returns (lam, converged); convergence means
    |f(lam)| <= 1e-12 * (1 + |f(lam0)|).
    """
    lam = complex(lam0)
    f0 = abs(characteristic_f(lam, params, lambda_o))
    tol = 1e-12 * (1.0 + f0)
    for _ in range(max_iter):
        f = characteristic_f(lam, params, lambda_o)
        if abs(f) <= tol:
            return lam, True
        h = 1e-7 * (1.0 + abs(lam))
        fp = characteristic_f(lam + h, params, lambda_o)
        fm = characteristic_f(lam - h, params, lambda_o)
        df = (fp - fm) / (2.0 * h)
        if df == 0.0 or not np.isfinite(df):
            return lam, False
        step = f / df
        if not np.isfinite(step) or abs(step) > 10.0 * (1.0 + abs(lam0)):
            return lam, False
        lam = lam - step
    return lam, bool(abs(characteristic_f(lam, params, lambda_o)) <= tol)


@dataclass(frozen=True)
class Mode:
    """One spectral mode: eigenvalue, unit-norm eigenfunction, residual.

    ``residual`` is ||L z - lam z|| / ||z|| in the trapezoidal L2 norm
    against the discrete generator the mode was extracted from.
    ``source`` is one of:

    - "discrete": raw eigensolver output, eigenvalue not refined;
    - "polished": the eigenvalue was confirmed by Newton iteration on
      the characteristic function, but the discrete eigenvector had the
      smaller residual and was kept;
    - "analytic": the sampled analytic eigenfunction at the polished
      eigenvalue replaced the discrete pair.
    """

    lam: complex
    eigenfunction: Field
    residual: float
    source: str


@dataclass(frozen=True)
class Spectrum:
    """Discrete spectrum of one assembled generator, Re-descending."""

    params: ExchangerParams
    grid: SpatialGrid
    shift: float
    modes: list[Mode] = field(repr=False)


def mode_residual(gen: DiscreteGenerator, z: Field, lam: complex) -> float:
    """Relative eigen-residual ||L z - lam z|| / ||z|| (trapezoidal L2)."""
    v = z.stacked()
    r = gen.mat @ v - complex(lam) * v
    return l2_norm(Field.from_stacked(gen.grid, r)) / l2_norm(z)


def _normalize_phase(z: Field) -> Field:
    """Unit L2 norm with the largest-magnitude sample rotated real-positive."""
    nrm = l2_norm(z)
    if nrm == 0.0:
        raise ValueError("cannot normalize the null field")
    v = z.stacked() / nrm
    k = int(np.argmax(np.abs(v)))
    pivot = v[k]
    if abs(pivot) > 0.0:
        v = v * (np.conj(pivot) / abs(pivot))
    return Field.from_stacked(z.grid, v)


def discrete_spectrum(gen: DiscreteGenerator) -> Spectrum:
    """Eigen-decompose the generator on its unconstrained nodes.

    The two inflow rows are identically zero, so the spectrum of the
    operator with homogeneous inflow conditions is that of the submatrix
    on the remaining 2n-2 nodes.  Eigenvectors are embedded back with
    zeros at the constrained nodes, unit-normalized, and sorted by
    descending (real, imaginary) eigenvalue part.

    Only open-loop generators are accepted: an injected gain changes the
    operator, and the characteristic-function machinery downstream
    assumes the plain (shifted) generator.
    """
    if gen.has_injection:
        raise ValueError("discrete_spectrum expects a generator assembled without a gain")
    n = gen.grid.n
    idx = unconstrained_indices(n)
    sub = gen.mat[np.ix_(idx, idx)]
    try:
        vals, vecs = la.eig(sub)
    except la.LinAlgError as exc:
        raise la.LinAlgError(
            f"eigensolver failed on the {2 * n - 2}x{2 * n - 2} generator submatrix "
            f"(n={n}, shift={gen.shift}, params={gen.params})"
        ) from exc
    order = np.lexsort((-vals.imag, -vals.real))
    modes = []
    for j in order:
        full = np.zeros(2 * n, dtype=complex)
        full[idx] = vecs[:, j]
        z = _normalize_phase(Field.from_stacked(gen.grid, full))
        modes.append(
            Mode(
                lam=complex(vals[j]),
                eigenfunction=z,
                residual=mode_residual(gen, z, vals[j]),
                source="discrete",
            )
        )
    return Spectrum(params=gen.params, grid=gen.grid, shift=gen.shift, modes=modes)


def unstable_modes(
    spectrum: Spectrum,
    params: ExchangerParams,
    lambda_o: float,
    re_threshold: float = 0.0,
) -> list[Mode]:
    """Select modes with Re(lam) >= re_threshold and refine them.

    Each selected discrete eigenvalue is Newton-polished on the
    characteristic function and the corresponding analytic eigenfunction
    is sampled; the analytic candidate replaces the discrete eigenvector
    only when its discrete eigen-residual is smaller.  A degenerate
    (null) analytic candidate — the exact double-root case — is logged
    and the discrete mode kept.  Eigenvalues within 1e-6 of the
    threshold trigger a warning since the selected count is then
    sensitive to rounding.
    """
    if abs(spectrum.shift - lambda_o) > 1e-12 * max(1.0, abs(lambda_o)):
        raise ValueError(
            f"spectrum was computed with shift {spectrum.shift}, not lambda_o={lambda_o}"
        )
    gen = assemble_generator(params, spectrum.grid, shift=spectrum.shift)
    guard = 1e-9
    selected = [m for m in spectrum.modes if m.lam.real >= re_threshold - guard]
    near = [m.lam for m in spectrum.modes if abs(m.lam.real - re_threshold) <= 1e-6]
    if near:
        warnings.warn(
            f"{len(near)} eigenvalue(s) within 1e-6 of the selection threshold "
            f"{re_threshold}; the unstable count is sensitive to rounding",
            stacklevel=2,
        )

    out = []
    for m in selected:
        lam_p, ok = newton_polish(m.lam, params, lambda_o)
        best = m
        if ok:
            best = Mode(
                lam=m.lam, eigenfunction=m.eigenfunction, residual=m.residual, source="polished"
            )
            v = eigenfunction(lam_p, params, lambda_o, spectrum.grid)
            max_sample = max(np.max(np.abs(v.zh)), np.max(np.abs(v.zc)))
            if l2_norm(v) <= 1e-10 * max_sample or max_sample == 0.0:
                logger.info(
                    "analytic candidate at lam=%s is (numerically) the null field "
                    "(double-root degeneracy); keeping the discrete eigenvector",
                    lam_p,
                )
            else:
                v = _normalize_phase(v)
                r = mode_residual(gen, v, lam_p)
                if r < best.residual:
                    best = Mode(lam=lam_p, eigenfunction=v, residual=r, source="analytic")
        out.append(best)
    return out
