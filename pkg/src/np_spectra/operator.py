"""Dense Nystrom discretization of the Neumann-Poincare operator and the
single-layer potential, and the Fredholm spectrum in the energy space H.

The NP kernel <x-y, nu_x> / (2pi |x-y|^2) is smooth on smooth curves, so
plain trapezoid quadrature is spectrally accurate; its diagonal is the
curvature limit kappa/(4pi).  The single layer is assembled with the
Kress product rule for the periodic logarithm: the kernel is split as

    -(1/2pi) log|x-y| = -(1/4pi) log(4 sin^2((t-s)/2)) + smooth remainder

with spectral weights R_|i-j| for the log factor and the trapezoid rule
for the remainder.

Sign conventions: the single layer uses the written kernel
-(1/2pi) log|x-y| (so S[1] = -r log r on a circle of radius r).  Under
this sign the logarithmic energy <phi, S phi> is the positive-definite
inner product of H = L^2_0; the eigenproblem below is symmetric-definite
in it.  The adjoint relation makes the weight vector a left eigenvector
for the eigenvalue 1/2, which is recovered separately from the full
space; the twin branches come from the mean-zero subspace.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import (
    AssemblyError,
    GramNotPositiveDefiniteError,
    NonRealEigenvalueError,
)
from .geometry import BoundaryMesh, spectral_derivative

#: twin-spectrum pairing tolerance, applied to eigenvalues above TWIN_FLOOR
TOL_TWIN = 1e-6
TWIN_FLOOR = 1e-4


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense discretization acting on nodal densities.

    ``entries @ phi`` approximates the boundary function K*[phi] (kind
    ``neumann_poincare``) or S[phi] (kind ``single_layer``) at the nodes;
    quadrature weights are folded into the columns.
    """

    entries: np.ndarray
    mesh: BoundaryMesh
    kind: str

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def gram(self) -> np.ndarray:
        """Weighted energy form W @ entries, symmetrized.

        For the single layer this is the H inner-product matrix; it is
        symmetric to machine precision because the kernel is symmetric.
        """
        g = self.mesh.weights[:, None] * self.entries
        return 0.5 * (g + g.T)


def assemble_np(mesh: BoundaryMesh) -> OperatorMatrix:
    """Assemble the Neumann-Poincare operator K* on the mesh."""
    nodes = np.asarray(mesh.nodes, dtype=float)
    diff = nodes[:, None, :] - nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(r2, 1.0)
    if np.min(r2 + np.eye(mesh.n)) <= 0.0 or r2.min() <= 1e-28:
        i, j = np.unravel_index(np.argmin(r2 + np.eye(mesh.n) * 1e30), r2.shape)
        raise AssemblyError(f"coincident nodes {i} and {j}")
    entries = _kernels.np_kernel_matrix(nodes, mesh.normals, mesh.curvatures, mesh.weights)
    return OperatorMatrix(entries=entries, mesh=mesh, kind="neumann_poincare")


def kress_log_weights(n: int) -> np.ndarray:
    """Kress quadrature weights R_|i-j| for integrating
    f(s) * log(4 sin^2((t-s)/2)) over [0, 2pi) against trapezoid samples.

    Exact for trigonometric polynomials of degree < n/2.
    """
    m = n // 2
    j = np.arange(n)
    u = 2.0 * np.pi * j / n
    orders = np.arange(1, m)
    # R(u) = -4pi/n * sum_{k<m} cos(k u)/k - 2pi/n^2... standard closed form:
    vals = -(4.0 * np.pi / n) * (np.cos(np.outer(u, orders)) / orders).sum(axis=1)
    vals -= (2.0 * np.pi / (n * m)) * np.cos(m * u)
    return vals


def assemble_single_layer(mesh: BoundaryMesh) -> OperatorMatrix:
    """Assemble the single-layer potential S with kernel -(1/2pi) log|x-y|."""
    n = mesh.n
    theta = mesh.theta
    rem = _kernels.log_remainder_matrix(mesh.nodes, mesh.speed, theta)

    r = kress_log_weights(n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    rmat = r[idx]

    # S phi (t_i) = -(1/4pi) sum_j R_{ij} (phi speed)_j
    #              -(1/2pi) (2pi/n) sum_j rem_ij (phi speed)_j
    kernel_sym = -(rmat / (4.0 * np.pi) + rem / n)
    entries = kernel_sym * mesh.speed[None, :]
    return OperatorMatrix(entries=entries, mesh=mesh, kind="single_layer")


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Spectrum:
    """Fredholm eigenvalues with H-orthonormal eigenfunctions.

    ``pos``/``neg`` hold the retained positive branch (descending) and the
    matched negative branch; ``half`` is the separately recovered
    eigenvalue 1/2 (shape independent).  ``eigenfunctions`` are nodal
    values of the positive-branch eigenfunctions, H-orthonormal columns.
    ``oscillation`` holds a_i = ||dphi_i/dT|| / ||phi_i|| in L^2(bdry).
    """

    pos: np.ndarray
    neg: np.ndarray
    half: float
    eigenfunctions: np.ndarray
    neg_eigenfunctions: np.ndarray
    half_eigenfunction: np.ndarray
    oscillation: np.ndarray
    all_eigenvalues: np.ndarray
    mesh: BoundaryMesh

    @property
    def k(self) -> int:
        return len(self.pos)

    def eigenvalues_descending(self, count: int | None = None) -> np.ndarray:
        """[1/2, lambda_1, lambda_2, ...]: the value 1/2 then the positive
        branch in descending order."""
        vals = np.concatenate([[self.half], self.pos])
        return vals if count is None else vals[:count]

    def twin_defects(self, floor: float = TWIN_FLOOR) -> np.ndarray:
        """For each eigenvalue with |lambda| > floor, the distance from
        -lambda to the nearest retained eigenvalue of the other sign."""
        defects = []
        for lam in self.all_eigenvalues:
            if abs(lam) <= floor or abs(lam - 0.5) < 1e-8:
                continue
            defects.append(np.min(np.abs(self.all_eigenvalues + lam)))
        return np.asarray(defects)

    def export_csv(self, path, count: int | None = None) -> None:
        """CSV columns (i, lambda_i, a_i); i = 0 is the eigenvalue 1/2."""
        count = count if count is not None else self.k + 1
        osc_half = _oscillation_index(self.half_eigenfunction, self.mesh)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["i", "lambda_i", "a_i"])
            rows = [(0, self.half, osc_half)] + [
                (i + 1, self.pos[i], self.oscillation[i]) for i in range(self.k)
            ]
            for i, lam, a in rows[:count]:
                writer.writerow([i, f"{lam:.12g}", f"{a:.12g}"])


def _mean_zero_basis(weights: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the discrete mean-zero subspace {w . phi = 0}."""
    return scipy.linalg.null_space(weights[None, :])


def _oscillation_index(phi: np.ndarray, mesh: BoundaryMesh) -> float:
    dphi = spectral_derivative(phi) / mesh.speed
    num = np.sqrt(np.sum(mesh.weights * dphi**2))
    den = np.sqrt(np.sum(mesh.weights * phi**2))
    return float(num / den)


def _half_eigenpair(entries: np.ndarray, k: int = 1, shift: float = 0.5 + 1e-7):
    """Eigenvalues of `entries` nearest 1/2 by shift-invert subspace
    iteration; returns (values, vectors) with k columns."""
    n = entries.shape[0]
    lu = scipy.linalg.lu_factor(entries - shift * np.eye(n))
    rng = np.random.default_rng(0)
    v = np.ones((n, k)) + 1e-3 * rng.standard_normal((n, k))
    for _ in range(50):
        v = scipy.linalg.lu_solve(lu, v)
        v, _ = np.linalg.qr(v)
        block = v.T @ entries @ v
        vals, vecs = np.linalg.eig(block)
        resid = entries @ v @ vecs - v @ vecs * vals[None, :]
        if np.max(np.abs(vals.imag)) < 1e-12 and np.linalg.norm(resid) < 1e-12:
            break
    vals, vecs = np.real(vals), np.real(vecs)
    order = np.argsort(np.abs(vals - 0.5))
    return vals[order], (v @ vecs)[:, order]


def _symmetric_pencil(entries: np.ndarray, gram: np.ndarray, weights: np.ndarray):
    """Project A v = lambda B v with B the H-Gram onto the mean-zero
    subspace; returns (eigenvalues desc, nodal eigenvectors H-orthonormal)."""
    q = _mean_zero_basis(weights)
    b = gram
    a = b @ entries
    a = 0.5 * (a + a.T)
    at = q.T @ a @ q
    bt = q.T @ b @ q
    bt = 0.5 * (bt + bt.T)
    try:
        vals, vecs = scipy.linalg.eigh(at, bt)
    except scipy.linalg.LinAlgError as exc:
        raise GramNotPositiveDefiniteError(
            "single-layer energy form is not positive definite on mean-zero "
            "densities (domain at critical logarithmic capacity); rescale the "
            "domain and retry"
        ) from exc
    order = np.argsort(vals)[::-1]
    return vals[order], q @ vecs[:, order]


def spectrum(np_op: OperatorMatrix, sl_op: OperatorMatrix, k_max: int = 12) -> Spectrum:
    """Fredholm spectrum of the discretized operator.

    Solves the symmetric-definite pencil (B K*, B) with B the single-layer
    energy Gram, restricted to mean-zero densities (twin branches), and
    recovers the eigenvalue 1/2 from the full space by shift-invert
    iteration.  Eigenfunctions are H-orthonormal by construction.
    """
    if np_op.mesh is not sl_op.mesh:
        raise AssemblyError("operator matrices must be assembled on the same mesh")
    mesh = np_op.mesh
    vals, vecs = _symmetric_pencil(np_op.entries, sl_op.gram(), mesh.weights)

    k = min(k_max, np.sum(vals > 0) if np.any(vals > 0) else k_max, len(vals) // 2)
    k = max(int(k), 1)
    pos = vals[:k]
    pos_vecs = vecs[:, :k]

    neg = np.empty(k)
    neg_vecs = np.empty((mesh.n, k))
    neg_candidates = vals[::-1]  # ascending from most negative
    for i in range(k):
        j = int(np.argmin(np.abs(neg_candidates + pos[i])))
        neg[i] = neg_candidates[j]
        neg_vecs[:, i] = vecs[:, len(vals) - 1 - j]

    half_vals, half_vecs = _half_eigenpair(np_op.entries)
    half = float(half_vals[0])
    if abs(half - 0.5) > 1e-3:
        raise NonRealEigenvalueError(
            f"eigenvalue nearest 1/2 converged to {half:.6e}; discretization too coarse"
        )
    hv = half_vecs[:, 0]
    hv = hv / np.sqrt(np.sum(mesh.weights * hv**2))
    if hv @ mesh.weights < 0:
        hv = -hv

    osc = np.array([_oscillation_index(pos_vecs[:, i], mesh) for i in range(k)])
    return Spectrum(
        pos=pos,
        neg=neg,
        half=half,
        eigenfunctions=pos_vecs,
        neg_eigenfunctions=neg_vecs,
        half_eigenfunction=hv,
        oscillation=osc,
        all_eigenvalues=np.concatenate([[half], vals]),
        mesh=mesh,
    )


def spectrum_of_mesh(mesh: BoundaryMesh, k_max: int = 12) -> Spectrum:
    """Convenience: assemble both operators and compute the spectrum."""
    return spectrum(assemble_np(mesh), assemble_single_layer(mesh), k_max=k_max)
