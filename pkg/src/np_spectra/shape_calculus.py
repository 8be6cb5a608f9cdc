"""Hadamard shape derivatives of the NP operator and its eigenvalues.

For a normal perturbation x -> x + eps h(x) nu(x) the transported operator
expands as K*_eps o Psi_eps = K* + eps K1 + O(eps^2), with the assembled
first-variation kernel (2pi-normalized like K* itself)

    K1(x, y) = (1/2pi) [ K_{h,0} F_{h,1} + K_{h,1} ](x, y),

    F_h     = <x-y, h(x)nu(x) - h(y)nu(y)> / |x-y|^2
    F_{h,1} = -2 F_h + tau(x)h(x) - tau(y)h(y)
    K_{h,0} = <x-y, nu(x)> / |x-y|^2
    K_{h,1} = [<h(x)nu(x)-h(y)nu(y), nu(x)>
               - <x-y, tau(x)h(x)nu(x) + h'(x)T(x)>] / |x-y|^2

where tau is the curvature in the X'' = tau nu orientation (tau = -kappa
with kappa the geometric curvature stored on meshes) and h' is the
arclength derivative.  Diagonal limits, from fourth-order Taylor
expansion of the parametrization (u = arclength offset):

    F_h -> kappa h,  F_{h,1} -> -2 kappa h,
    K_{h,1} -> kappa^2 h - h''/2   (its two 1/u poles cancel in the sum),
    combined kernel -> -h''/2.

Eigenvalue derivatives follow from Osborn's bound for collectively
compact approximations: for a simple eigenvalue with H-normalized
eigenfunction phi, d(lambda)/d(eps) = <K1 phi, phi>_H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import MultipleEigenvalueError
from .geometry import BoundaryMesh, spectral_derivative
from .operator import OperatorMatrix, Spectrum, assemble_np

#: eigenvalue-gap below which a single-eigenvalue derivative is refused
SIMPLE_GAP = 1e-6


@dataclass(frozen=True)
class PerturbationField:
    """Normal displacement sampled at mesh nodes, optionally carrying the
    truncated Fourier coefficients it was synthesized from."""

    values: np.ndarray
    basis: np.ndarray | None = None

    @staticmethod
    def from_fourier(coeffs: np.ndarray, n: int) -> "PerturbationField":
        """h(theta) = c_0 + sum_m c_{2m-1} cos(m theta) + c_{2m} sin(m theta)."""
        coeffs = np.asarray(coeffs, dtype=float)
        theta = 2.0 * np.pi * np.arange(n) / n
        vals = np.full(n, coeffs[0])
        m_cut = (len(coeffs) - 1) // 2
        for m in range(1, m_cut + 1):
            vals += coeffs[2 * m - 1] * np.cos(m * theta)
            if 2 * m < len(coeffs):
                vals += coeffs[2 * m] * np.sin(m * theta)
        return PerturbationField(values=vals, basis=coeffs)

    @staticmethod
    def random_band_limited(
        n: int, max_mode: int, rng: np.random.Generator, scale: float = 1.0
    ) -> "PerturbationField":
        coeffs = rng.standard_normal(2 * max_mode + 1) * scale
        return PerturbationField.from_fourier(coeffs, n)


@dataclass(frozen=True)
class FirstVariationKernel:
    """Dense discretization of the first-variation operator K1 for a fixed
    field h; linear in h."""

    entries: np.ndarray
    mesh: BoundaryMesh
    field: PerturbationField


def arclength_derivatives(mesh: BoundaryMesh, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second arclength derivatives of nodal values."""
    dh = spectral_derivative(h) / mesh.speed
    d2h = spectral_derivative(dh) / mesh.speed
    return dh, d2h


def first_variation(mesh: BoundaryMesh, field: PerturbationField) -> FirstVariationKernel:
    h = np.ascontiguousarray(field.values, dtype=float)
    if h.shape != (mesh.n,):
        raise ValueError(f"field must have shape ({mesh.n},)")
    dh, d2h = arclength_derivatives(mesh, h)
    entries = _kernels.first_variation_matrix(
        mesh.nodes, mesh.tangents, mesh.normals, mesh.curvatures, mesh.weights, h, dh, d2h
    )
    return FirstVariationKernel(entries=entries, mesh=mesh, field=field)


def eigenvalue_derivative(
    spec: Spectrum, kernel: FirstVariationKernel, sl_op: OperatorMatrix, i: int
) -> float:
    """Shape derivative of the i-th positive-branch eigenvalue (0-based).

    Requires the eigenvalue to be simple: the nearest retained neighbor
    must be farther than SIMPLE_GAP, otherwise the perturbation splits the
    eigenvalue and no single derivative exists.
    """
    lam = spec.pos[i]
    others = np.concatenate([spec.pos[:i], spec.pos[i + 1 :], [spec.half]])
    gap = np.min(np.abs(others - lam)) if len(others) else np.inf
    if gap < SIMPLE_GAP:
        raise MultipleEigenvalueError(
            f"eigenvalue {lam:.8f} has a neighbor within {gap:.2e}; the perturbation "
            "splits it and Hadamard's formula for a simple eigenvalue does not apply"
        )
    phi = spec.eigenfunctions[:, i]
    gram = sl_op.gram()
    return float((kernel.entries @ phi) @ (gram @ phi))


def derivative_block(
    spec: Spectrum,
    kernel: FirstVariationKernel,
    sl_op: OperatorMatrix,
    indices,
    cluster_rel: float = 0.0,
) -> np.ndarray:
    """First-order derivatives for a (possibly clustered) index set.

    Within a cluster of near-degenerate eigenvalues the derivatives are
    the eigenvalues of the projected block <K1 phi_a, phi_b>_H, sorted to
    match the descending eigenvalue order (degenerate first-order
    perturbation theory); for simple eigenvalues this reduces to the
    diagonal entry.  ``cluster_rel`` widens the clustering gap to a
    fraction of the eigenvalue: the diagonal formula is only a useful
    secant model for steps that move an eigenvalue by much less than its
    gap, so optimization callers cluster anything within a few percent.
    """
    indices = list(indices)
    gram = sl_op.gram()
    phis = spec.eigenfunctions[:, indices]
    block = (kernel.entries @ phis).T @ (gram @ phis)
    out = np.empty(len(indices))
    lams = spec.pos[indices]
    start = 0
    while start < len(indices):
        stop = start + 1
        while stop < len(indices) and abs(lams[stop] - lams[stop - 1]) < max(
            SIMPLE_GAP, cluster_rel * abs(lams[stop - 1])
        ):
            stop += 1
        if stop - start == 1:
            out[start] = block[start, start]
        else:
            sub = block[start:stop, start:stop]
            vals = np.linalg.eigvalsh(0.5 * (sub + sub.T))
            out[start:stop] = np.sort(vals)[::-1]
        start = stop
    return out


def geometric_derivatives(mesh: BoundaryMesh, field: PerturbationField) -> tuple[float, float]:
    """Shape derivatives of area and of the moment integral 2x1^2 + x2^2:
    d|D| = oint h, d(moment) = oint (2x1^2 + x2^2) h."""
    h = np.asarray(field.values, dtype=float)
    d_area = float(np.sum(mesh.weights * h))
    x = mesh.nodes
    d_moment = float(np.sum(mesh.weights * (2.0 * x[:, 0] ** 2 + x[:, 1] ** 2) * h))
    return d_area, d_moment


def transported_np_error(mesh: BoundaryMesh, field: PerturbationField, eps: float) -> float:
    """Operator-norm size of K*_eps o Psi_eps - K* - eps K1.

    The perturbed operator is assembled on the same parameter grid (the
    diffeomorphism maps node k to node k), so the matrix difference is
    the transported operator error; it should scale like eps^2.
    """
    from .geometry import perturb_mesh

    mesh_eps = perturb_mesh(mesh, field.values, eps, resample="param")
    k_eps = assemble_np(mesh_eps).entries
    k0 = assemble_np(mesh).entries
    k1 = first_variation(mesh, field).entries
    return float(np.linalg.norm(k_eps - k0 - eps * k1, 2))
