"""Two-body Neumann-Poincare operator and separation sweeps.

For a pair D_1, D_2 = D_1 + v of disjoint copies the operator is the
2N x 2N block matrix with the single-body operators on the diagonal and
the normal derivative of the opposite body's single layer off-diagonal
(smooth kernels: the bodies are disjoint).  The energy Gram extends
blockwise with the cross log-kernel, and the symmetric-definite solve on
the total-mean-zero subspace gives the twin branches plus one copy of
the eigenvalue 1/2; the second copy (multiplicity equals the number of
connected components) is recovered from the full space by two-vector
shift-invert iteration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from ._parallel import map_indexed
from .errors import NonRealEigenvalueError, OverlapError
from .geometry import BoundaryMesh, CurveSpec, build_mesh
from .operator import (
    OperatorMatrix,
    Spectrum,
    _half_eigenpair,
    _symmetric_pencil,
    assemble_np,
    assemble_single_layer,
)

#: default guard: reject separations below this fraction of the diameter
MIN_SEPARATION_FRACTION = 0.05


@dataclass(frozen=True)
class TwoBodyConfig:
    base: CurveSpec
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))


@dataclass(frozen=True)
class TwoBodySystem:
    config: TwoBodyConfig
    mesh1: BoundaryMesh
    mesh2: BoundaryMesh
    entries: np.ndarray
    gram: np.ndarray
    weights: np.ndarray
    separation: float


def boundary_separation(mesh1: BoundaryMesh, mesh2: BoundaryMesh) -> float:
    """Minimum node-to-segment distance between the two boundaries."""
    return min(
        _points_to_segments(mesh1.nodes, mesh2.nodes),
        _points_to_segments(mesh2.nodes, mesh1.nodes),
    )


def _points_to_segments(points: np.ndarray, poly: np.ndarray) -> float:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2[None, :], 0.0, 1.0)
    close = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - close, axis=2)
    return float(d.min())


def assemble_block(
    config: TwoBodyConfig, force: bool = False
) -> TwoBodySystem:
    """Assemble the block operator and its blockwise energy Gram.

    Rejects overlapping bodies, and (without `force`) separations below
    5% of the diameter, where the cross-gap kernel outruns the trapezoid
    rule's resolution.
    """
    mesh1 = build_mesh(config.base)
    mesh2 = BoundaryMesh(
        nodes=mesh1.nodes + config.offset,
        tangents=mesh1.tangents,
        normals=mesh1.normals,
        curvatures=mesh1.curvatures,
        weights=mesh1.weights,
        speed=mesh1.speed,
        total_length=mesh1.total_length,
    )
    sep = boundary_separation(mesh1, mesh2)
    if sep <= 0 or _bodies_overlap(mesh1, mesh2):
        raise OverlapError(f"bodies overlap (offset {config.offset.tolist()})")
    guard = MIN_SEPARATION_FRACTION * mesh1.diameter
    if sep < guard and not force:
        raise OverlapError(
            f"separation {sep:.4g} below {guard:.4g} (5% of diameter); "
            "trapezoid accuracy degrades across the gap, pass force=True to override"
        )

    k_self = assemble_np(mesh1).entries  # translation invariant: shared by both
    cross_12, cross_21 = _kernels.cross_block_matrices(
        mesh1.nodes, mesh1.normals, mesh1.weights, mesh2.nodes, mesh2.normals, mesh2.weights
    )
    entries = np.block([[k_self, cross_12], [cross_21, k_self]])

    sl_self = assemble_single_layer(mesh1).entries
    s12 = _kernels.cross_log_matrix(mesh1.nodes, mesh2.nodes, mesh2.weights)
    s21 = _kernels.cross_log_matrix(mesh2.nodes, mesh1.nodes, mesh1.weights)
    sl = np.block([[sl_self, s12], [s21, sl_self]])
    weights = np.concatenate([mesh1.weights, mesh2.weights])
    gram = weights[:, None] * sl
    gram = 0.5 * (gram + gram.T)

    return TwoBodySystem(
        config=config,
        mesh1=mesh1,
        mesh2=mesh2,
        entries=entries,
        gram=gram,
        weights=weights,
        separation=sep,
    )


def _bodies_overlap(mesh1: BoundaryMesh, mesh2: BoundaryMesh) -> bool:
    # winding test of one boundary's first node w.r.t. the other body
    from .pulse import winding_number

    z1 = mesh1.nodes_c
    z2 = mesh2.nodes_c
    return winding_number(z1, z2[0]) != 0 or winding_number(z2, z1[0]) != 0


@dataclass(frozen=True)
class BlockSpectrum:
    """Two-body spectrum: half_pair holds the two eigenvalues near 1/2
    (one per connected component)."""

    values: np.ndarray
    half_pair: np.ndarray
    separation: float

    def above(self, floor: float = 5e-4) -> np.ndarray:
        vals = self.values[np.abs(self.values) > floor]
        return np.sort(vals)[::-1]


def block_spectrum(system: TwoBodySystem) -> BlockSpectrum:
    """Eigenvalues of the two-body operator.

    The total-mean-zero symmetric pencil carries the twin branches and
    one of the two 1/2 eigenvalues; the other lives on the complement
    and both are recovered together by 2-dim shift-invert iteration.
    """
    vals, _ = _symmetric_pencil(system.entries, system.gram, system.weights)
    half_vals, _ = _half_eigenpair(system.entries, k=2)
    if np.abs(half_vals[:2] - 0.5).max() > 1e-3:
        raise NonRealEigenvalueError(
            f"two-body eigenvalues nearest 1/2 converged to {half_vals[:2]}"
        )
    # the pencil already contains one 1/2 copy (mean-zero combination);
    # replace it with the accurately iterated pair
    keep = np.abs(vals - 0.5) > 1e-4
    values = np.sort(np.concatenate([vals[keep], half_vals[:2]]))[::-1]
    return BlockSpectrum(values=values, half_pair=half_vals[:2], separation=system.separation)


def separation_sweep(
    base: CurveSpec,
    direction: np.ndarray,
    separations,
    force: bool = False,
    threads: int = 1,
) -> list[BlockSpectrum]:
    """Spectra for a list of boundary-gap separations along a direction.

    The offset magnitude realizing each gap is found by bisection on the
    computed boundary separation (monotone in the offset).
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    mesh0 = build_mesh(base)
    width = _extent_along(mesh0, direction)

    def for_gap(gap):
        if gap <= 0:
            raise OverlapError("separations must be positive")
        lo, hi = width + gap, width + gap + 2.0 * gap + 2.0
        cfg = TwoBodyConfig(base, direction * hi)
        # bisection on offset magnitude to match the requested gap
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            sep = boundary_separation(mesh0, _translate(mesh0, direction * mid))
            if sep < gap:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-12 * max(1.0, gap):
                break
        cfg = TwoBodyConfig(base, direction * hi)
        return block_spectrum(assemble_block(cfg, force=force))

    return map_indexed(for_gap, list(separations), threads=threads)


def _translate(mesh: BoundaryMesh, v: np.ndarray) -> BoundaryMesh:
    return BoundaryMesh(
        nodes=mesh.nodes + v,
        tangents=mesh.tangents,
        normals=mesh.normals,
        curvatures=mesh.curvatures,
        weights=mesh.weights,
        speed=mesh.speed,
        total_length=mesh.total_length,
    )


def _extent_along(mesh: BoundaryMesh, direction: np.ndarray) -> float:
    proj = mesh.nodes @ direction
    return float(proj.max() - proj.min())


def sweep_to_csv(spectra: list[BlockSpectrum], path, floor: float = 5e-4) -> None:
    """CSV rows (separation, rank, eigenvalue) for eigenvalues above the floor."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["separation", "rank", "eigenvalue"])
        for spec in spectra:
            for rank, val in enumerate(spec.above(floor), start=1):
                writer.writerow([f"{spec.separation:.12g}", rank, f"{val:.12g}"])
