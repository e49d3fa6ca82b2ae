"""Observer gain design on the unstable spectral subspace.

The unstable eigenvectors of the shifted generator span an invariant
subspace; an orthonormal basis of that span is built by modified
Gram-Schmidt (with one re-orthogonalization pass) in the trapezoidal L2
inner product, while tracking the combination coefficients back to the
original modes.  Because the span is exactly invariant, the projected
operator matrix is assembled from the eigenvalues and inner products
alone, the boundary output restricts to a row vector, and an output
injection computed there by a filter Riccati equation shifts precisely
the unstable part of the full discrete spectrum: the closed-loop
spectrum is the union of the projected closed-loop eigenvalues and the
untouched stable modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .discretize import assemble_generator
from .model import ExchangerParams, Field, SpatialGrid, l2_inner, l2_norm
from .spectral import Mode, Spectrum, discrete_spectrum, unstable_modes

__all__ = [
    "UnstableBasis",
    "ProjectedSystem",
    "ObservabilityReport",
    "ObserverGain",
    "HautusError",
    "RiccatiError",
    "DesignBundle",
    "orthonormalize",
    "project_system",
    "hautus_check",
    "design_gain",
    "synthesize_kappa",
    "design_observer",
]


@dataclass(frozen=True)
class UnstableBasis:
    """Orthonormal basis of the unstable span with provenance.

    ``fields[i]`` = sum_j combo[i, j] * modes[j].eigenfunction, with
    <fields[i], fields[k]> = delta_ik in the trapezoidal L2 product.
    """

    grid: SpatialGrid
    modes: list[Mode] = field(repr=False)
    fields: list[Field] = field(repr=False)
    combo: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return len(self.fields)


@dataclass(frozen=True)
class ProjectedSystem:
    """Finite-dimensional observer design data on the unstable span.

    ``A`` is the projected shifted generator, ``C`` the boundary output
    row, ``Q``/``R`` the filter Riccati weights, ``K`` the injection
    column once designed (None before).
    """

    lambda_o: float
    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    K: np.ndarray | None = None
    residual: float | None = None

    @property
    def q(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class ObservabilityReport:
    """Hautus test result: per-eigenvalue smallest singular values."""

    eigenvalues: np.ndarray
    margins: np.ndarray
    tol: float
    passed: bool


class HautusError(RuntimeError):
    """Projected pair failed the Hautus observability test."""

    def __init__(self, message: str, report: "ObservabilityReport | None" = None):
        super().__init__(message)
        self.report = report


class RiccatiError(RuntimeError):
    """Riccati solve failed to produce a verified stabilizing gain."""

    def __init__(self, message: str, residual: float | None = None,
                 closed_loop: np.ndarray | None = None):
        super().__init__(message)
        self.residual = residual
        self.closed_loop = closed_loop


def orthonormalize(modes: list[Mode], grid: SpatialGrid) -> UnstableBasis:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Tracks the combination matrix so each basis field is an explicit
    linear combination of the input eigenfunctions.  A collapse of the
    running norm below 1e-10 means the input modes are (numerically)
    linearly dependent; the error names the offending mode index.
    """
    q = len(modes)
    fields: list[Field] = []
    rows: list[np.ndarray] = []
    for i, mode in enumerate(modes):
        if mode.eigenfunction.grid.n != grid.n:
            raise ValueError(f"mode {i} lives on a different grid")
        w = mode.eigenfunction.copy()
        g = np.zeros(q, dtype=complex)
        g[i] = 1.0
        for _ in range(2):
            for k, wk in enumerate(fields):
                c = l2_inner(w, wk)
                w = Field(grid, w.zh - c * wk.zh, w.zc - c * wk.zc)
                g = g - c * rows[k]
        r = l2_norm(w)
        if r < 1e-10:
            raise ValueError(
                f"mode index {i} is linearly dependent on modes 0..{i - 1} "
                f"(residual norm {r:.3e} after orthogonalization)"
            )
        fields.append(Field(grid, w.zh / r, w.zc / r))
        rows.append(g / r)
    combo = np.array(rows, dtype=complex).reshape(q, q)
    return UnstableBasis(grid=grid, modes=list(modes), fields=fields, combo=combo)


def project_system(basis: UnstableBasis, lambda_o: float) -> ProjectedSystem:
    """Project the shifted generator and boundary output onto the span.

    The span is invariant, so the action on basis fields is exact:
    A[k, i] = sum_j combo[i, j] * lam_j * <v_j, w_k>.  No differencing
    of the discrete operator is involved.
    """
    q = basis.q
    A = np.zeros((q, q), dtype=complex)
    C = np.zeros((1, q), dtype=complex)
    ip_vw = np.array(
        [[l2_inner(m.eigenfunction, w) for w in basis.fields] for m in basis.modes],
        dtype=complex,
    ).reshape(q, q)
    lam = np.array([m.lam for m in basis.modes], dtype=complex)
    for i in range(q):
        for k in range(q):
            A[k, i] = np.sum(basis.combo[i, :] * lam * ip_vw[:, k])
        C[0, i] = basis.fields[i].zc[0]
    Q = (lambda_o + 2.0) ** 2 * np.eye(q)
    R = np.eye(1)
    return ProjectedSystem(lambda_o=float(lambda_o), A=A, C=C, Q=Q, R=R)


def hautus_check(sys: ProjectedSystem, tol: float = 1e-8) -> ObservabilityReport:
    """Hautus observability test on the projected pair (A, C).

    For every eigenvalue of A the stacked matrix [lam*I - A; C] must
    have smallest singular value above tol.
    """
    q = sys.q
    if q == 0:
        return ObservabilityReport(
            eigenvalues=np.zeros(0, complex), margins=np.zeros(0), tol=tol, passed=True
        )
    eigs = la.eigvals(sys.A)
    margins = np.empty(q)
    for j, lam in enumerate(eigs):
        stacked = np.vstack([lam * np.eye(q) - sys.A, sys.C])
        margins[j] = la.svdvals(stacked)[-1]
    return ObservabilityReport(
        eigenvalues=eigs, margins=margins, tol=tol, passed=bool(np.all(margins > tol))
    )


def _realify(M: np.ndarray) -> np.ndarray:
    """Complex matrix -> real block form [[Re, -Im], [Im, Re]]."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def riccati_residual(sys: ProjectedSystem, P: np.ndarray) -> float:
    """Frobenius residual of the filter Riccati equation at P, over ||Q||.

    ||A P + P A^H - P C^H R^{-1} C P + Q||_F / ||Q||_F.  Normalizing by
    the weight matrix makes the measure invariant under a common
    rescaling of Q, R, and P; the raw residual grows with ||P|| through
    roundoff alone.
    """
    A, C, Q, R = sys.A, sys.C, sys.Q, sys.R
    res = A @ P + P @ A.conj().T - P @ C.conj().T @ la.solve(R, C @ P) + Q
    return float(np.linalg.norm(res) / np.linalg.norm(Q))


def design_gain(sys: ProjectedSystem) -> ProjectedSystem:
    """Solve the filter Riccati equation and verify the injection.

    The complex pair (A, C) is lifted to the real block form, the
    continuous-time ARE is solved there, and the Hermitian solution is
    read back.  The gain K = P C^H R^{-1} is accepted only when the
    Riccati residual is at most 1e-8 and A - K C is verified Hurwitz;
    otherwise RiccatiError carries the diagnostics.
    """
    q = sys.q
    if q == 0:
        return ProjectedSystem(
            lambda_o=sys.lambda_o, A=sys.A, C=sys.C, Q=sys.Q, R=sys.R,
            K=np.zeros((0, 1), dtype=complex), residual=0.0,
        )
    Ar = _realify(sys.A)
    Cr = _realify(sys.C)
    Qr = _realify(sys.Q.astype(complex))
    Rr = _realify(sys.R.astype(complex))
    try:
        # control-form ARE on the transposed pair == filter ARE for (Ar, Cr)
        Pr = la.solve_continuous_are(Ar.T, Cr.T, Qr, Rr)
    except (la.LinAlgError, ValueError) as exc:
        raise RiccatiError(f"Riccati solver failed: {exc}") from exc
    P = Pr[:q, :q] + 1j * Pr[q:, :q]
    P = 0.5 * (P + P.conj().T)
    res = riccati_residual(sys, P)
    if not np.isfinite(res) or res > 1e-8:
        raise RiccatiError(
            f"Riccati residual {res:.3e} exceeds 1e-8", residual=res
        )
    K = P @ sys.C.conj().T @ la.inv(sys.R)
    cl = la.eigvals(sys.A - K @ sys.C)
    if np.max(cl.real) >= 0.0:
        raise RiccatiError(
            f"projected closed loop not Hurwitz (max Re {np.max(cl.real):.3e})",
            residual=res, closed_loop=cl,
        )
    return ProjectedSystem(
        lambda_o=sys.lambda_o, A=sys.A, C=sys.C, Q=sys.Q, R=sys.R, K=K, residual=res
    )


@dataclass(frozen=True)
class ObserverGain:
    """Output-injection gain as a nodal field plus its basis coordinates."""

    kappa: Field
    coefficients: np.ndarray
    lambda_o: float
    basis_id: str


def synthesize_kappa(sys: ProjectedSystem, basis: UnstableBasis) -> ObserverGain:
    """Expand the projected injection column in the basis fields."""
    if sys.K is None:
        raise ValueError("design_gain must run before synthesizing kappa")
    if sys.q != basis.q:
        raise ValueError(f"projected system has q={sys.q} but basis has q={basis.q}")
    kappa = Field.zeros(basis.grid)
    coeff = sys.K[:, 0] if sys.q else np.zeros(0, dtype=complex)
    for k_i, w in zip(coeff, basis.fields):
        kappa = Field(basis.grid, kappa.zh + k_i * w.zh, kappa.zc + k_i * w.zc)
    basis_id = f"n{basis.grid.n}-lo{sys.lambda_o:g}-q{basis.q}"
    return ObserverGain(
        kappa=kappa, coefficients=coeff, lambda_o=sys.lambda_o, basis_id=basis_id
    )


@dataclass(frozen=True)
class DesignBundle:
    """All artifacts of one design pass, successful or not.

    ``failure`` is None on success, otherwise a short reason; ``gain``
    is present only on success.
    """

    lambda_o: float
    spectrum: Spectrum = field(repr=False)
    modes: list[Mode] = field(repr=False)
    basis: UnstableBasis = field(repr=False)
    system: ProjectedSystem = field(repr=False)
    observability: ObservabilityReport
    gain: ObserverGain | None
    failure: str | None

    @property
    def riccati_residual(self) -> float:
        r = self.system.residual
        return float("nan") if r is None else r


def design_observer(
    params: ExchangerParams,
    grid: SpatialGrid,
    lambda_o: float,
    hautus_tol: float = 1e-8,
    raise_on_failure: bool = True,
) -> DesignBundle:
    """Full design pass: spectrum -> basis -> projection -> gain.

    With ``raise_on_failure`` a failed Hautus test raises HautusError
    and a failed Riccati solve propagates RiccatiError; otherwise the
    bundle comes back with ``failure`` set and ``gain`` None so callers
    can report every stage.
    """
    gen = assemble_generator(params, grid, shift=lambda_o)
    spectrum = discrete_spectrum(gen)
    modes = unstable_modes(spectrum, params, lambda_o)
    basis = orthonormalize(modes, grid)
    system = project_system(basis, lambda_o)
    report = hautus_check(system, tol=hautus_tol)
    if not report.passed:
        msg = (
            f"Hautus test failed at lambda_o={lambda_o:g}: smallest margin "
            f"{float(np.min(report.margins)):.3e} <= {hautus_tol:g}"
        )
        if raise_on_failure:
            raise HautusError(msg, report=report)
        return DesignBundle(
            lambda_o=float(lambda_o), spectrum=spectrum, modes=modes, basis=basis,
            system=system, observability=report, gain=None, failure=msg,
        )
    try:
        designed = design_gain(system)
    except RiccatiError as exc:
        if raise_on_failure:
            raise
        return DesignBundle(
            lambda_o=float(lambda_o), spectrum=spectrum, modes=modes, basis=basis,
            system=system, observability=report, gain=None, failure=str(exc),
        )
    gain = synthesize_kappa(designed, basis)
    return DesignBundle(
        lambda_o=float(lambda_o), spectrum=spectrum, modes=modes, basis=basis,
        system=designed, observability=report, gain=gain, failure=None,
    )
