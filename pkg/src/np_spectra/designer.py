"""Inverse shape design from partial Fredholm spectra.

Minimizes, over shapes D, the functional

    J_{I,a,b}(D) = 1/2 sum_{i<=I} w_i^2 (lambda_i(D) - lambda_i(B))^2
                   + (alpha/2)(|D|-1)^2 + (beta/2) int_D 2 x1^2 + x2^2,

with w_i = 1/lambda_i(B), by damped Gauss-Newton over a truncated Fourier
basis of normal perturbation fields, inside a successive-refinement loop
I = 1..N that warm-starts each level with the previous stabilized shape.
The area penalty removes the scale invariance of the spectrum, the moment
regularizer pins translation and rotation.

Update fields live in a (2 m_cut + 1)-dimensional Fourier basis: the
design problem is exponentially ill-posed, so the parametrization itself
is the regularization.  The printed Gauss-Newton direction of the source
formula composes the normal-equations inverse only with the data term;
penalty terms enter as plain gradients, and a small Levenberg damping
mu = 1e-8 tr(J^T J)/m keeps the solve well-posed.

The eigenvalue 1/2 is excluded throughout (shape independent).  Exactly
symmetric initial shapes carry degenerate eigenvalue pairs for which the
single-eigenvalue Hadamard formula is undefined; a tiny seeded
symmetry-breaking field is applied to the initial mesh, and transient
near-clusters during iteration use the block derivative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from ._parallel import map_indexed
from .errors import DesignError, InvalidCurveError, NPSpectraError
from .geometry import (
    BoundaryMesh,
    CurveSpec,
    area_and_moment,
    build_mesh,
    fourier_spec_from_mesh,
    perturb_mesh,
    resample_uniform_arclength,
)
from .operator import Spectrum, assemble_np, assemble_single_layer, spectrum
from .shape_calculus import PerturbationField, first_variation

#: eigenvalues below this are consider unresolved by the discretization
EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class DesignConfig:
    n_targets: int = 7
    c1: float = 0.01
    c2: float = 0.01
    tol: float = 5e-4
    m_cut: int = 16
    max_inner_iters: int = 80
    line_search_grid: int = 10
    rng_seed: int = 0
    noise_sigma: float = 0.01
    mesh_n: int = 256
    verify_n: int = 512
    symmetry_break: float = 1e-3
    max_step_fraction: float = 0.05
    alpha_cap_scale: float = 1e6
    threads: int = 1

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.tol <= 0 or self.n_targets < 1:
            raise DesignError("need C1, C2, tol > 0 and at least one target")


@dataclass
class DesignState:
    mesh: BoundaryMesh
    level: int
    alpha: float = 0.0
    beta: float = 0.0
    objective_parts: tuple = (0.0, 0.0, 0.0)
    history: list = field(default_factory=list)
    stabilized: dict = field(default_factory=dict)
    spectrum_cache: Spectrum | None = None


def add_noise(targets: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Multiplicative noise lambda_i (1 + sigma xi_i), xi ~ U(-1, 1), seeded."""
    if sigma < 0:
        raise DesignError("sigma must be nonnegative")
    targets = np.asarray(targets, dtype=float)
    xi = np.random.default_rng(seed).uniform(-1.0, 1.0, size=len(targets))
    return targets * (1.0 + sigma * xi)


def targets_from_mesh(mesh: BoundaryMesh, count: int, k_extra: int = 4) -> np.ndarray:
    """First `count` positive-branch eigenvalues (1/2 excluded) of a shape."""
    sp = spectrum(assemble_np(mesh), assemble_single_layer(mesh), k_max=count + k_extra)
    vals = sp.pos[:count]
    if len(vals) < count or np.any(vals <= EIGENVALUE_FLOOR):
        raise DesignError(f"shape has fewer than {count} resolved positive eigenvalues")
    return vals


def _spectrum_for(mesh: BoundaryMesh, level: int):
    k_max = 2 * level + 4
    sl = assemble_single_layer(mesh)
    return spectrum(assemble_np(mesh), sl, k_max=k_max), sl


def objective(
    mesh: BoundaryMesh,
    targets: np.ndarray,
    level: int,
    alpha: float,
    beta: float,
    spec: Spectrum | None = None,
) -> tuple[float, tuple]:
    """Objective value and its parts ((J_I)_0, A, B) at the given penalties."""
    if spec is None:
        spec, _ = _spectrum_for(mesh, level)
    lam = spec.pos[:level]
    if len(lam) < level or np.any(lam <= EIGENVALUE_FLOOR):
        raise DesignError(f"fewer than {level} eigenvalues above the noise floor")
    w = 1.0 / targets[:level]
    j0 = 0.5 * float(np.sum(w**2 * (lam - targets[:level]) ** 2))
    area, moment = area_and_moment(mesh)
    a_pen = (area - 1.0) ** 2
    value = j0 + 0.5 * alpha * a_pen + 0.5 * beta * moment
    return value, (j0, a_pen, moment)


def update_penalties(parts: tuple, config: DesignConfig) -> tuple[float, float]:
    """alpha_n = C1 (J_I)_0 / A, beta_n = C2 (J_I)_0 / B, with the area
    term capped once the area is essentially exact."""
    j0, a_pen, moment = parts
    if j0 == 0.0:
        return 0.0, 0.0
    if a_pen < 1e-12:
        alpha = min(config.c1 * j0 / 1e-12, config.alpha_cap_scale * config.c1)
    else:
        alpha = config.c1 * j0 / a_pen
    beta = config.c2 * j0 / moment
    return alpha, beta


def _fourier_basis(n: int, m_cut: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n) / n
    cols = [np.ones(n)]
    for m in range(1, m_cut + 1):
        cols.append(np.cos(m * theta))
        cols.append(np.sin(m * theta))
    return np.column_stack(cols)


@dataclass(frozen=True)
class StepInfo:
    direction: PerturbationField
    descent_product: float
    fallback_steepest: bool


#: eigenvalues within this relative gap are treated as one cluster when
#: building the Jacobian (the sorted-branch map is nonsmooth at ties)
CLUSTER_REL_GAP = 0.05


def _clusters(lams: np.ndarray, rel: float = CLUSTER_REL_GAP) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(lams)):
        if abs(lams[i] - lams[i - 1]) < rel * abs(lams[i - 1]):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def gauss_newton_step(
    mesh: BoundaryMesh,
    spec: Spectrum,
    sl_op,
    targets: np.ndarray,
    level: int,
    alpha: float,
    beta: float,
    config: DesignConfig,
) -> StepInfo:
    """Damped Gauss-Newton direction in the Fourier field basis.

    Simple eigenvalues contribute residuals w_i (lambda_i - t_i) with
    Hadamard derivatives as Jacobian rows.  Near-degenerate clusters are
    nonsmooth in the sorted branches (the two one-sided slopes are the
    extreme eigenvalues of the projected block), so their residuals are
    replaced by the cluster power sums sum lambda^k, k = 1..q, which are
    smooth symmetric functions with derivatives k tr(Lambda^{k-1} B) and
    encode the same set match.

    The iteration updates X <- X - gamma * direction, so the returned
    field points toward larger objective.
    """
    n = mesh.n
    basis = _fourier_basis(n, config.m_cut)
    m_dim = basis.shape[1]
    w = 1.0 / targets[:level]
    lams = spec.pos[:level]

    gram = sl_op.gram()
    phis = spec.eigenfunctions[:, :level]
    gphis = gram @ phis

    def column(m):
        k1 = first_variation(mesh, PerturbationField(basis[:, m]))
        return np.einsum("ni,ni->i", k1.entries @ phis, gphis)  # diag of the block

    diag_ders = np.column_stack(map_indexed(column, range(m_dim), threads=config.threads))

    rows = [w[i] * diag_ders[i] for i in range(level)]
    resid_list = [w[i] * (lams[i] - targets[i]) for i in range(level)]

    # penalties as least-squares rows: (alpha/2)(|D|-1)^2 = (1/2) rho_A^2
    # with rho_A = sqrt(alpha)(|D|-1), similarly (beta/2) B = (1/2) rho_B^2.
    # Added raw (outside the normal equations) they routinely cancel the
    # data direction; inside, the damping arbitrates the scales.
    area, moment = area_and_moment(mesh)
    x = mesh.nodes
    moment_density = 2.0 * x[:, 0] ** 2 + x[:, 1] ** 2
    if alpha > 0:
        resid_list.append(np.sqrt(alpha) * (area - 1.0))
        rows.append(np.sqrt(alpha) * (basis.T @ mesh.weights))
    if beta > 0 and moment > 0:
        resid_list.append(np.sqrt(beta * moment))
        rows.append(
            np.sqrt(beta) / (2.0 * np.sqrt(moment)) * (basis.T @ (mesh.weights * moment_density))
        )

    jac = np.vstack(rows)
    resid = np.asarray(resid_list)
    grad = jac.T @ resid

    # Damped least squares with the damping raised, when necessary, until
    # the direction field is no larger than a fraction of the diameter
    # (trust region).  The spec damping 1e-8 tr(J^T J)/m is the floor; at
    # degenerate eigenvalue pairs the Jacobian loses rank and the raised
    # damping continuously suppresses the unreachable components (heavy
    # damping limits to steepest descent, the rank-deficiency fallback).
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    proj = u.T @ resid
    mu_floor = 1e-8 * np.sum(s**2) / m_dim
    h_cap = 0.25 * mesh.diameter

    def field_for(mu):
        delta = vt.T @ (s * proj / (s**2 + mu))
        return delta, basis @ delta

    mu = mu_floor
    delta, values = field_for(mu)
    fallback = False
    if np.abs(values).max() > h_cap:
        fallback = True
        lo, hi = mu_floor, max(s.max() ** 2, mu_floor) * 1e8
        for _ in range(60):
            mid = np.sqrt(lo * hi)
            delta, values = field_for(mid)
            if np.abs(values).max() > h_cap:
                lo = mid
            else:
                hi = mid
        delta, values = field_for(hi)
    descent = float(delta @ grad)
    if descent < 0 or not np.all(np.isfinite(delta)):
        delta = grad
        fallback = True
        descent = float(grad @ grad)
        values = basis @ delta

    return StepInfo(
        direction=PerturbationField(values=values, basis=delta),
        descent_product=descent,
        fallback_steepest=fallback,
    )


def line_search(
    mesh: BoundaryMesh,
    direction: PerturbationField,
    targets: np.ndarray,
    level: int,
    alpha: float,
    beta: float,
    current_value: float,
    config: DesignConfig,
) -> tuple[float, BoundaryMesh | None, float]:
    """Geometric-grid line search on the full objective.

    gamma_0 scales the first trial to a max node displacement of 5% of
    the diameter; each smaller gamma halves it.  Self-intersecting or
    otherwise invalid trials are skipped.  Returns (gamma, mesh, value);
    gamma = 0 with the original mesh signals stagnation.
    """
    hmax = np.abs(direction.values).max()
    if hmax == 0.0 or not np.isfinite(hmax):
        return 0.0, None, current_value
    gamma0 = config.max_step_fraction * mesh.diameter / hmax
    # keep the first trial inside the tubular fold guard
    fold = np.abs(direction.values * mesh.curvatures).max()
    if fold > 0:
        gamma0 = min(gamma0, 0.7 / fold)
    best = (0.0, None, current_value)
    for k in range(config.line_search_grid):
        gamma = gamma0 * 0.5**k
        try:
            # parameter-preserving trials keep the discretization error
            # correlated with the current mesh, so tiny steps see the true
            # objective slope instead of resampling noise
            trial = perturb_mesh(mesh, direction.values, -gamma, resample="param")
            value, _ = objective(trial, targets, level, alpha, beta)
        except NPSpectraError:
            continue
        if value < best[2]:
            best = (gamma, trial, value)
    return best


def _maybe_resample(mesh: BoundaryMesh, ratio: float = 3.0) -> BoundaryMesh:
    """Re-equidistribute nodes in arclength once the parametrization speed
    spread exceeds `ratio` (accumulated distortion from param-preserving
    steps)."""
    from .geometry import resample_uniform_arclength

    if mesh.speed.max() / mesh.speed.min() > ratio:
        return resample_uniform_arclength(mesh)
    return mesh


def _break_symmetry(mesh: BoundaryMesh, config: DesignConfig) -> BoundaryMesh:
    if config.symmetry_break <= 0:
        return mesh
    rng = np.random.default_rng([config.rng_seed, 0xBEEF])
    fld = PerturbationField.random_band_limited(mesh.n, config.m_cut, rng)
    scale = config.symmetry_break * mesh.diameter / np.abs(fld.values).max()
    return perturb_mesh(mesh, fld.values * scale, 1.0, resample="arclength")


@dataclass
class DesignResult:
    final_mesh: BoundaryMesh
    final_level: int
    targets: np.ndarray
    final_eigenvalues: np.ndarray
    residuals: np.ndarray
    history: list
    level_residues: dict
    stagnated: bool
    stabilized_specs: dict

    def report(self) -> dict:
        return {
            "schema": "np-spectra/design-report-1",
            "final_level": self.final_level,
            "targets": self.targets.tolist(),
            "final_eigenvalues": self.final_eigenvalues.tolist(),
            "relative_residuals": self.residuals.tolist(),
            "level_residues": {str(k): v for k, v in self.level_residues.items()},
            "stagnated": self.stagnated,
            "iterations": len(self.history),
        }

    def save_history_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iter", "I", "objective", "gamma", "alpha", "beta"])
            for row in self.history:
                writer.writerow(
                    [
                        row["iter"],
                        row["level"],
                        f"{row['objective']:.12g}",
                        f"{row['gamma']:.12g}",
                        f"{row['alpha']:.12g}",
                        f"{row['beta']:.12g}",
                    ]
                )


def run_design(
    targets: np.ndarray, config: DesignConfig, initial: CurveSpec | BoundaryMesh
) -> DesignResult:
    """Successive-refinement Gauss-Newton reconstruction.

    For I = 1..N the level iterates until the objective change drops
    below the tolerance (or the line search stagnates), records the
    stabilized shape, and warm-starts the next level.  The answer is the
    stabilized shape with the smallest data residue (J_N)_0, re-verified
    on the finer mesh.
    """
    targets = np.sort(np.asarray(targets, dtype=float))[::-1]
    n_levels = min(config.n_targets, len(targets))
    if n_levels < 1:
        raise DesignError("no targets supplied")
    if np.any(targets[:n_levels] <= 0):
        raise DesignError("targets must be positive (positive branch, 1/2 excluded)")

    if isinstance(initial, BoundaryMesh):
        mesh = initial
    else:
        if initial.n != config.mesh_n:
            initial = CurveSpec(initial.family, initial.params, config.mesh_n)
        mesh = build_mesh(initial)
    mesh = _break_symmetry(mesh, config)

    state = DesignState(mesh=mesh, level=1)
    it_global = 0
    any_progress = False

    # Levels begin at I = 2: with a single target the objective only sees
    # the larger member of any near-degenerate pair, and minimizing a
    # nonsmooth max zigzags with steps the size of the gap.
    first_level = min(2, n_levels)
    for level in range(first_level, n_levels + 1):
        state.level = level
        resample_retry = True
        last_good: BoundaryMesh | None = None
        n_iter = 0
        while n_iter < config.max_inner_iters:
            n_iter += 1
            try:
                spec, sl_op = _spectrum_for(state.mesh, level)
                _, parts = objective(state.mesh, targets, level, 0.0, 0.0, spec=spec)
            except NPSpectraError:
                # a resample can push a marginal mesh over an assembly
                # guard; fall back to the last evaluable iterate
                if last_good is not None:
                    state.mesh = last_good
                break
            last_good = state.mesh
            alpha, beta = update_penalties(parts, config)
            value = parts[0] + 0.5 * alpha * parts[1] + 0.5 * beta * parts[2]
            state.alpha, state.beta = alpha, beta
            state.objective_parts = parts

            step = gauss_newton_step(
                state.mesh, spec, sl_op, targets, level, alpha, beta, config
            )
            gamma, new_mesh, new_value = line_search(
                state.mesh, step.direction, targets, level, alpha, beta, value, config
            )
            it_global += 1
            state.history.append(
                {
                    "iter": it_global,
                    "level": level,
                    "inner": n_iter,
                    "objective": value,
                    "new_objective": new_value,
                    "gamma": gamma,
                    "alpha": alpha,
                    "beta": beta,
                    "j0": parts[0],
                    "area_penalty": parts[1],
                    "moment": parts[2],
                    "descent_product": step.descent_product,
                    "fallback_steepest": step.fallback_steepest,
                }
            )
            if gamma == 0.0 or new_mesh is None:
                # a stale node distribution can block the line search; one
                # arclength re-equidistribution gets a second opinion
                if resample_retry:
                    resample_retry = False
                    state.mesh = resample_uniform_arclength(state.mesh)
                    continue
                break
            state.mesh = _maybe_resample(new_mesh)
            any_progress = True
            if abs(value - new_value) < config.tol:
                break
        state.stabilized[level] = state.mesh

    # Step 3: pick the stabilized level with minimal full data residue
    level_residues = {}
    for level, m in state.stabilized.items():
        try:
            _, parts = objective(m, targets, n_levels, 0.0, 0.0)
            level_residues[level] = parts[0]
        except DesignError:
            level_residues[level] = np.inf
    best_level = min(level_residues, key=level_residues.get)
    best_mesh = state.stabilized[best_level]

    fine_spec = CurveSpec(
        fourier_spec_from_mesh(best_mesh).family,
        fourier_spec_from_mesh(best_mesh).params,
        config.verify_n,
    )
    fine_mesh = build_mesh(fine_spec, check_simple=False)
    final_eigs = targets_from_mesh(fine_mesh, n_levels)
    residuals = np.abs(final_eigs - targets[:n_levels]) / targets[:n_levels]

    return DesignResult(
        final_mesh=best_mesh,
        final_level=best_level,
        targets=targets[:n_levels],
        final_eigenvalues=final_eigs,
        residuals=residuals,
        history=state.history,
        level_residues=level_residues,
        stagnated=not any_progress,
        stabilized_specs={lvl: fourier_spec_from_mesh(m) for lvl, m in state.stabilized.items()},
    )
