"""Self-contained consistency checks for a configured problem.

Each check compares a measured quantity against an explicit bound and
the suite reports one row per check.  Discretisation-dependent
quantities use self-scaled tolerances: the characteristic function at a
discrete eigenvalue is compared against dx * |f'| * max(1,|mu|)^2 (the
first-order eigenvalue perturbation a first-order scheme can cause),
and the mixed eigen-residual against dx * max(1,|mu|)^2.  Decay-rate
fits are deliberately not part of this suite; they are experiment
outputs, not consistency invariants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .design import design_observer
from .discretize import DiscreteGenerator, assemble_generator, unconstrained_indices
from .experiment import ExperimentConfig
from .model import Field, SpatialGrid, exchange_norm, l2_inner, l2_norm, trapezoid_weights
from .spectral import (
    _normalize_phase,
    characteristic_coefficients,
    characteristic_f,
    eigenfunction,
    mode_residual,
    newton_polish,
)


@dataclass(frozen=True)
class CheckResult:
    """One validation row: measured value against its bound."""

    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""


def _char_derivative(lam, params, lambda_o) -> complex:
    h = 1e-7 * (1.0 + abs(lam))
    fp = characteristic_f(lam + h, params, lambda_o)
    fm = characteristic_f(lam - h, params, lambda_o)
    return (fp - fm) / (2.0 * h)


def random_dirichlet_field(grid: SpatialGrid, rng: np.random.Generator) -> Field:
    """Complex standard-normal field with the inflow nodes pinned to zero."""
    zh = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    zc = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    zh[0] = 0.0
    zc[-1] = 0.0
    return Field(grid, zh, zc)


def energy_form(gen: DiscreteGenerator, z: Field) -> float:
    """Re<z, L z> / ||z||^2 in the trapezoidal inner product."""
    w_full = np.concatenate([trapezoid_weights(gen.grid)] * 2)
    v = z.stacked()
    lv = gen.mat @ v
    norm_sq = float(np.sum(w_full * np.abs(v) ** 2).real)
    if norm_sq == 0.0:
        raise ValueError("energy form of the null field is undefined")
    return float(np.sum(w_full * v * np.conj(lv)).real) / norm_sq


def max_dissipativity_excess(
    gen: DiscreteGenerator,
    kappa_norm: float,
    rng: np.random.Generator,
    count: int = 100,
) -> float:
    """Worst sampled margin against the injected energy bound.

    For ``count`` random fields honouring the inflow conditions, measures
    Re<z, L z>/||z||^2 - (||M|| + ||kappa||^2 / u2); the discrete bound
    says this never exceeds 10*dx.
    """
    params = gen.params
    const = exchange_norm(params) + kappa_norm**2 / params.u2
    worst = -np.inf
    for _ in range(count):
        z = random_dirichlet_field(gen.grid, rng)
        worst = max(worst, energy_form(gen, z) - const)
    return float(worst)


def run_validation_suite(config: ExperimentConfig) -> list[CheckResult]:
    """Run every consistency check for the configured problem.

    Covers, per prescribed rate: basis orthonormality, the Hautus
    margin, the projected and full closed-loop spectra, the Riccati
    residual, and the two self-scaled spectral cross-checks between the
    discrete eigensolver and the analytic boundary problem.  One global
    check bounds the open-loop energy growth rate by the exchange-matrix
    norm.
    """
    checks: list[CheckResult] = []
    params = config.params
    grid = SpatialGrid.uniform(config.n)
    dx = grid.dx

    # open-loop dissipativity: the energy growth rate in the weighted L2
    # norm, restricted to states honouring the zero inflow conditions,
    # is bounded by the exchange-matrix norm (upwinding only dissipates)
    gen = assemble_generator(params, grid, shift=0.0)
    idx = unconstrained_indices(grid.n)
    w2 = np.concatenate([trapezoid_weights(grid)] * 2)[idx]
    sub = gen.mat[np.ix_(idx, idx)]
    G = 0.5 * (np.diag(w2) @ sub + sub.conj().T @ np.diag(w2))
    growth = float(np.max(la.eigh(G, np.diag(w2), eigvals_only=True)))
    bound = exchange_norm(params)
    checks.append(
        CheckResult(
            name="open-loop-energy-growth",
            passed=growth <= bound + 1e-9,
            measured=growth,
            bound=bound,
            detail="max weighted-sym eigenvalue of L vs ||M||",
        )
    )

    for lo in config.rates:
        tag = f"lo{lo:g}"
        bundle = design_observer(params, grid, lo, raise_on_failure=False)
        basis, sys = bundle.basis, bundle.system
        q = basis.q

        gram = np.array(
            [[l2_inner(wi, wk) for wk in basis.fields] for wi in basis.fields],
            dtype=complex,
        ).reshape(q, q)
        ortho_err = float(np.max(np.abs(gram - np.eye(q)))) if q else 0.0
        checks.append(
            CheckResult(
                name=f"basis-orthonormality-{tag}",
                passed=ortho_err <= 1e-10,
                measured=ortho_err,
                bound=1e-10,
                detail=f"q={q} max |Gram - I|",
            )
        )

        margin = float(np.min(bundle.observability.margins)) if q else np.inf
        checks.append(
            CheckResult(
                name=f"hautus-margin-{tag}",
                passed=bundle.observability.passed,
                measured=margin,
                bound=bundle.observability.tol,
                detail="smallest singular value of [lam I - A; C]",
            )
        )

        if sys.K is None:
            checks.append(
                CheckResult(
                    name=f"riccati-residual-{tag}",
                    passed=False,
                    measured=np.inf,
                    bound=1e-8,
                    detail="gain design failed: " + (bundle.failure or "unknown"),
                )
            )
            continue

        checks.append(
            CheckResult(
                name=f"riccati-residual-{tag}",
                passed=bundle.riccati_residual <= 1e-8,
                measured=bundle.riccati_residual,
                bound=1e-8,
                detail="Frobenius residual of the filter ARE over ||Q||",
            )
        )

        # eig(A) must reproduce the unstable eigenvalues (invariant span)
        if q:
            proj_eigs = la.eigvals(sys.A)
            lam_modes = [m.lam for m in bundle.modes]
            remaining = list(range(q))
            match_dist = 0.0
            for ev in proj_eigs:
                j = min(remaining, key=lambda r: abs(lam_modes[r] - ev))
                match_dist = max(match_dist, abs(lam_modes[j] - ev))
                remaining.remove(j)
        else:
            match_dist = 0.0
        checks.append(
            CheckResult(
                name=f"projected-spectrum-match-{tag}",
                passed=match_dist <= 1e-6,
                measured=match_dist,
                bound=1e-6,
                detail="greedy eig(A)-to-mode matching, max distance",
            )
        )

        proj_max = (
            float(np.max(la.eigvals(sys.A - sys.K @ sys.C).real)) if q else -np.inf
        )
        checks.append(
            CheckResult(
                name=f"projected-hurwitz-{tag}",
                passed=proj_max < 0.0,
                measured=proj_max,
                bound=0.0,
                detail="max Re of projected closed loop (shifted frame)",
            )
        )

        cl_gen = assemble_generator(params, grid, shift=0.0, kappa=bundle.gain.kappa)
        cl_eigs = la.eigvals(cl_gen.mat[np.ix_(idx, idx)])
        cl_max = float(np.max(cl_eigs.real))
        checks.append(
            CheckResult(
                name=f"closed-loop-margin-{tag}",
                passed=cl_max <= -lo + 1e-6,
                measured=cl_max,
                bound=-lo,
                detail="max Re of the full discrete closed loop",
            )
        )

        rng = np.random.default_rng(config.seed)
        excess = max_dissipativity_excess(cl_gen, l2_norm(bundle.gain.kappa), rng)
        checks.append(
            CheckResult(
                name=f"dissipativity-sample-{tag}",
                passed=excess <= 10.0 * dx,
                measured=excess,
                bound=10.0 * dx,
                detail="100 random fields: Re<z,Lz>/||z||^2 - (||M|| + ||kappa||^2/u2)",
            )
        )

        # spectral cross-checks between eigensolver and boundary problem
        ratio_f = 0.0
        ratio_r = 0.0
        for m in bundle.modes:
            lam_d = m.lam
            coeff = characteristic_coefficients(lam_d, params, lo)
            mu_sq = max(1.0, abs(coeff.mu1), abs(coeff.mu2)) ** 2
            fval = abs(characteristic_f(lam_d, params, lo))
            dfval = abs(_char_derivative(lam_d, params, lo))
            if dfval > 0.0:
                ratio_f = max(ratio_f, fval / (dx * dfval * mu_sq))
            lam_p, ok = newton_polish(lam_d, params, lo)
            if ok:
                v = eigenfunction(lam_p, params, lo, grid)
                max_sample = max(np.max(np.abs(v.zh)), np.max(np.abs(v.zc)))
                if l2_norm(v) > 1e-10 * max_sample:
                    v = _normalize_phase(v)
                    shifted_gen = assemble_generator(params, grid, shift=lo)
                    res = mode_residual(shifted_gen, v, lam_d)
                    ratio_r = max(ratio_r, res / (dx * mu_sq))
        checks.append(
            CheckResult(
                name=f"char-magnitude-{tag}",
                passed=ratio_f <= 1.0,
                measured=ratio_f,
                bound=1.0,
                detail="|f(lam_d)| relative to dx * |f'| * max(1,|mu|)^2",
            )
        )
        checks.append(
            CheckResult(
                name=f"eigen-residual-{tag}",
                passed=ratio_r <= 1.0,
                measured=ratio_r,
                bound=1.0,
                detail="analytic-mode residual relative to dx * max(1,|mu|)^2",
            )
        )

    return checks
