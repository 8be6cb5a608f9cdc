"""Polarization tensors at complex contrasts and contour sampling.

The 2x2 polarization tensor at contrast lambda is

    m_ij(lambda) = integral  y_i (lambda I - K*)^{-1}[nu_j](y) dsigma(y),

evaluated by one dense complex LU factorization per lambda shared by both
right-hand sides.  Contour integrals (1/2pi i) oint f(lambda) M(lambda)
dlambda are evaluated with the trapezoid rule in the contour parameter,
with dlambda/dtheta computed spectrally from the sample sequence, so the
quadrature is spectrally accurate for analytic contours.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._parallel import map_indexed
from .errors import InvalidCurveError, NearSingularResolventError
from .geometry import BoundaryMesh
from .operator import OperatorMatrix, Spectrum

SAMPLES_SCHEMA = "np-spectra/contour-samples-1"

#: reciprocal condition number below which the resolvent solve is rejected
RCOND_FLOOR = 1e-12


@dataclass(frozen=True)
class ContrastContour:
    """Circular contour center + radius * exp(2 pi i k / n) in the contrast plane."""

    center: complex
    radius: float
    n_samples: int

    def __post_init__(self):
        if self.radius <= 0 or self.n_samples < 1:
            raise InvalidCurveError("contour needs positive radius and sample count")

    @property
    def samples(self) -> np.ndarray:
        k = np.arange(self.n_samples)
        return self.center + self.radius * np.exp(2j * np.pi * k / self.n_samples)

    def encloses(self, value: complex) -> bool:
        return abs(value - self.center) < self.radius

    def validate_against(self, spec: Spectrum, min_distance: float = 1e-3) -> None:
        """Reject contours passing within min_distance of a computed eigenvalue."""
        gaps = np.abs(self.samples[:, None] - spec.all_eigenvalues[None, :])
        if gaps.min() <= min_distance:
            k, i = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise InvalidCurveError(
                f"contour sample {k} is {gaps.min():.2e} from eigenvalue "
                f"{spec.all_eigenvalues[i]:.6f}"
            )


@dataclass(frozen=True)
class ContourSamples:
    """Polarization tensors sampled along a closed contrast contour.

    ``lambdas`` is the ordered sample sequence; ``tensors[k]`` the 2x2
    complex PT at lambdas[k].  ``contour`` is kept when the samples came
    from a ContrastContour (None for externally supplied data).
    """

    lambdas: np.ndarray
    tensors: np.ndarray
    contour: ContrastContour | None = None

    @property
    def n(self) -> int:
        return len(self.lambdas)

    def traces(self) -> np.ndarray:
        return np.trace(self.tensors, axis1=1, axis2=2)

    def to_json(self) -> dict:
        out = {
            "schema": SAMPLES_SCHEMA,
            "samples": [
                {
                    "lambda": [float(l.real), float(l.imag)],
                    "M": [[[float(e.real), float(e.imag)] for e in row] for row in t],
                }
                for l, t in zip(self.lambdas, self.tensors)
            ],
        }
        if self.contour is not None:
            out["contour"] = {
                "center": [self.contour.center.real, self.contour.center.imag],
                "radius": self.contour.radius,
                "n_samples": self.contour.n_samples,
            }
        return out

    @staticmethod
    def from_json(obj: dict) -> "ContourSamples":
        if not str(obj.get("schema", SAMPLES_SCHEMA)).startswith("np-spectra/contour-samples"):
            raise InvalidCurveError(f"unknown samples schema {obj.get('schema')!r}")
        lambdas = np.array(
            [s["lambda"][0] + 1j * s["lambda"][1] for s in obj["samples"]], dtype=complex
        )
        tensors = np.array(
            [
                [[e[0] + 1j * e[1] for e in row] for row in s["M"]]
                for s in obj["samples"]
            ],
            dtype=complex,
        )
        contour = None
        if "contour" in obj:
            c = obj["contour"]
            contour = ContrastContour(c["center"][0] + 1j * c["center"][1], c["radius"], c["n_samples"])
        return ContourSamples(lambdas=lambdas, tensors=tensors, contour=contour)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f)

    @staticmethod
    def load(path) -> "ContourSamples":
        with open(path) as f:
            return ContourSamples.from_json(json.load(f))


def pt_at(np_op: OperatorMatrix, mesh: BoundaryMesh, lam: complex) -> np.ndarray:
    """Polarization tensor M(lambda) by dense complex LU.

    Raises NearSingularResolventError when the shifted system is within
    roughly machine precision of singular (contrast on an eigenvalue).
    """
    n = mesh.n
    a = lam * np.eye(n, dtype=complex) - np_op.entries
    lu, piv = scipy.linalg.lu_factor(a)
    rcond = _rcond_from_lu(a, lu, piv)
    if rcond < RCOND_FLOOR:
        nearest = _nearest_eigenvalue(np_op, lam)
        raise NearSingularResolventError(
            f"resolvent nearly singular at contrast {lam:.6g} "
            f"(rcond {rcond:.1e}); nearest eigenvalue {nearest:.8f}",
            nearest_eigenvalue=nearest,
        )
    rhs = mesh.normals.astype(complex)
    phi = scipy.linalg.lu_solve((lu, piv), rhs)  # columns: nu_1, nu_2
    weighted_nodes = mesh.weights[:, None] * mesh.nodes
    return weighted_nodes.T @ phi  # m_ij = sum_k w_k (x_k)_i phi_j[k]


def _rcond_from_lu(a: np.ndarray, lu: np.ndarray, piv: np.ndarray) -> float:
    anorm = np.linalg.norm(a, 1)
    gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm)
    return float(rcond)


def _nearest_eigenvalue(np_op: OperatorMatrix, lam: complex) -> float:
    eigs = np.linalg.eigvals(np_op.entries)
    return float(np.real(eigs[np.argmin(np.abs(eigs - lam))]))


def sample_contour(
    np_op: OperatorMatrix,
    mesh: BoundaryMesh,
    contour: ContrastContour,
    threads: int = 1,
) -> ContourSamples:
    """Sample M(lambda) on the contour; solves are independent per sample."""
    lambdas = contour.samples

    def one(k):
        try:
            return pt_at(np_op, mesh, lambdas[k])
        except NearSingularResolventError as exc:
            raise NearSingularResolventError(
                f"sample {k}: {exc}", nearest_eigenvalue=exc.nearest_eigenvalue
            ) from exc

    tensors = np.array(map_indexed(one, range(contour.n_samples), threads=threads))
    return ContourSamples(lambdas=lambdas, tensors=tensors, contour=contour)


# ---------------------------------------------------------------------------
# Contour quadrature
# ---------------------------------------------------------------------------
def contour_integral(samples: ContourSamples, f=None) -> np.ndarray:
    """(1/2pi i) oint f(lambda) M(lambda) dlambda over the sampled contour.

    The tangent dlambda/dtheta is evaluated spectrally from the periodic
    sample sequence (exact for circular contours); f defaults to 1.
    """
    lam = samples.lambdas
    n = samples.n
    if n == 1:
        # degenerate single-sample contour: no enclosed area, zero integral
        return np.zeros((2, 2), dtype=complex)
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    dlam = np.fft.ifft(1j * k * np.fft.fft(lam))
    vals = samples.tensors if f is None else samples.tensors * f(lam)[:, None, None]
    return (vals * dlam[:, None, None]).sum(axis=0) / (2j * np.pi * n) * (2 * np.pi)


def check_conjugate_symmetry(samples: ContourSamples, tol: float = 1e-8) -> float:
    """Max deviation of M(conj lambda) from conj M(lambda) over matched pairs."""
    lam = samples.lambdas
    worst = 0.0
    scale = np.abs(samples.tensors).max()
    for i in range(samples.n):
        conj_i = np.argmin(np.abs(lam - np.conj(lam[i])))
        if abs(lam[conj_i] - np.conj(lam[i])) < 1e-12:
            dev = np.abs(samples.tensors[conj_i] - np.conj(samples.tensors[i])).max()
            worst = max(worst, dev / scale)
    return worst
