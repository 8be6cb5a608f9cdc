"""Smooth closed planar curves with spectral differential geometry.

A curve is sampled at N equispaced values of its defining parameter
theta in [0, 2pi).  All derivatives (tangent, normal, curvature, speed)
are computed by Fourier differentiation of the parametrization, so every
downstream quadrature inherits spectral accuracy for analytic curves.
Quadrature weights carry the speed factor |x'(theta)|, which keeps
formulas written per arclength exact on the non-arclength grid.

Conventions
-----------
    orientation : counterclockwise (flipped at construction if needed)
    normal      : outward, equal to the tangent rotated by -pi/2
    curvature   : geometric, +1/r on a circle of radius r
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidCurveError, SelfIntersectionError
from ._kernels import segment_intersections

CURVE_SCHEMA = "np-spectra/curve-spec-1"
MESH_SCHEMA = "np-spectra/mesh-1"

_FAMILIES = ("ellipse", "sine_perturbed_circle", "kite", "fourier", "polyline_resample")


@dataclass(frozen=True)
class CurveSpec:
    """Parametric description of a smooth closed curve.

    Parameters
    ----------
    family : str
        One of ``ellipse``, ``sine_perturbed_circle``, ``kite``,
        ``fourier``, ``polyline_resample``.
    params : dict
        Family parameters: ``{"a":, "b":}`` for ellipse, ``{"delta":,
        "m":}`` for the perturbed circle, ``{}`` for the kite,
        ``{"coefficients": [[re_cx, im_cx, re_cy, im_cy], ...]}`` for a
        truncated Fourier curve (mode k = row index), ``{"points":
        [[x, y], ...]}`` for resampled polylines.
    n : int
        Node count N; must be even and >= 32.
    """

    family: str
    params: dict
    n: int

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidCurveError(f"unknown curve family {self.family!r}")
        if self.n < 32 or self.n % 2 != 0:
            raise InvalidCurveError(f"node count must be even and >= 32, got {self.n}")
        if self.family == "sine_perturbed_circle":
            delta = float(self.params["delta"])
            if abs(delta) >= 1.0:
                raise InvalidCurveError(
                    f"|delta| must be < 1 to keep r = 1 + delta sin(m theta) positive, got {delta}"
                )
            int(self.params["m"])
        if self.family == "ellipse":
            if float(self.params["a"]) <= 0 or float(self.params["b"]) <= 0:
                raise InvalidCurveError("ellipse semi-axes must be positive")

    # -- convenience constructors ------------------------------------------
    @staticmethod
    def ellipse(a: float, b: float, n: int) -> "CurveSpec":
        return CurveSpec("ellipse", {"a": float(a), "b": float(b)}, n)

    @staticmethod
    def sine_perturbed_circle(delta: float, m: int, n: int) -> "CurveSpec":
        return CurveSpec("sine_perturbed_circle", {"delta": float(delta), "m": int(m)}, n)

    @staticmethod
    def kite(n: int) -> "CurveSpec":
        return CurveSpec("kite", {}, n)

    @staticmethod
    def fourier(coefficients: np.ndarray, n: int) -> "CurveSpec":
        """Truncated Fourier curve; ``coefficients[k]`` holds the complex
        mode-k coefficients of x(theta) and y(theta) as 4 reals."""
        coeffs = np.asarray(coefficients, dtype=float)
        return CurveSpec("fourier", {"coefficients": coeffs.tolist()}, n)

    @staticmethod
    def polyline(points: Sequence[Sequence[float]], n: int) -> "CurveSpec":
        pts = np.asarray(points, dtype=float)
        return CurveSpec("polyline_resample", {"points": pts.tolist()}, n)

    def to_json(self) -> dict:
        return {"schema": CURVE_SCHEMA, "family": self.family, "params": self.params, "N": self.n}

    @staticmethod
    def from_json(obj: dict) -> "CurveSpec":
        schema = obj.get("schema", CURVE_SCHEMA)
        _check_schema(schema, CURVE_SCHEMA)
        return CurveSpec(obj["family"], obj.get("params", {}), int(obj["N"]))


@dataclass(frozen=True)
class BoundaryMesh:
    """Discretized closed curve with full differential data.

    Attributes
    ----------
    nodes : (N, 2) float array
        Curve samples at equispaced parameter values.
    tangents : (N, 2) float array
        Unit tangents along the (counterclockwise) parametrization.
    normals : (N, 2) float array
        Unit outward normals (tangent rotated by -pi/2).
    curvatures : (N,) float array
        Geometric curvature, +1/r on a circle of radius r.
    weights : (N,) float array
        Trapezoid-in-parameter quadrature weights (2pi/N) * |x'(theta)|;
        they sum to the total length.
    speed : (N,) float array
        |x'(theta)| at the nodes.
    total_length : float
    """

    nodes: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvatures: np.ndarray
    weights: np.ndarray
    speed: np.ndarray
    total_length: float

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def nodes_c(self) -> np.ndarray:
        """Nodes as complex numbers x + iy."""
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @property
    def diameter(self) -> float:
        span = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(span[0], span[1]))

    def validate(self) -> None:
        """Check the mesh invariants; raises InvalidCurveError on failure."""
        dots = np.abs(np.einsum("ij,ij->i", self.tangents, self.normals))
        if dots.max() > 1e-12:
            raise InvalidCurveError(f"tangent/normal not orthogonal: {dots.max():.2e}")
        for name, vec in (("tangents", self.tangents), ("normals", self.normals)):
            err = np.abs(np.linalg.norm(vec, axis=1) - 1.0).max()
            if err > 1e-12:
                raise InvalidCurveError(f"{name} not unit: {err:.2e}")
        rel = abs(self.weights.sum() - self.total_length) / self.total_length
        if rel > 1e-10:
            raise InvalidCurveError(f"weights do not sum to total length: rel err {rel:.2e}")
        flux = np.abs(self.weights @ self.normals).max()
        if flux > 1e-8 * self.total_length:
            raise InvalidCurveError(f"outward normals do not integrate to zero: {flux:.2e}")

    def to_json(self) -> dict:
        return {
            "schema": MESH_SCHEMA,
            "nodes": self.nodes.tolist(),
            "normals": self.normals.tolist(),
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_json(obj: dict) -> "BoundaryMesh":
        _check_schema(obj.get("schema", MESH_SCHEMA), MESH_SCHEMA)
        nodes = np.asarray(obj["nodes"], dtype=float)
        return mesh_from_samples(nodes)

    def export_nodes_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y"])
            for x, y in self.nodes:
                writer.writerow([f"{x:.12g}", f"{y:.12g}"])


def _check_schema(found: str, expected: str) -> None:
    major = expected.rsplit("-", 1)
    if not str(found).startswith(major[0]):
        raise InvalidCurveError(f"unknown schema {found!r}, expected {expected!r}")
    if str(found) != expected:
        raise InvalidCurveError(f"unsupported schema version {found!r}, expected {expected!r}")


# ---------------------------------------------------------------------------
# Parametrizations
# ---------------------------------------------------------------------------
def _sample_family(spec: CurveSpec, theta: np.ndarray) -> np.ndarray:
    if spec.family == "ellipse":
        a, b = float(spec.params["a"]), float(spec.params["b"])
        return np.column_stack([a * np.cos(theta), b * np.sin(theta)])
    if spec.family == "sine_perturbed_circle":
        delta, m = float(spec.params["delta"]), int(spec.params["m"])
        r = 1.0 + delta * np.sin(m * theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if spec.family == "kite":
        return np.column_stack(
            [np.cos(theta) + 0.65 * np.cos(2 * theta) - 0.65, 1.5 * np.sin(theta)]
        )
    if spec.family == "fourier":
        coeffs = np.asarray(spec.params["coefficients"], dtype=float)
        cx = coeffs[:, 0] + 1j * coeffs[:, 1]
        cy = coeffs[:, 2] + 1j * coeffs[:, 3]
        k = np.arange(len(coeffs))
        phases = np.exp(1j * np.outer(theta, k))
        x = np.real(phases @ cx)
        y = np.real(phases @ cy)
        return np.column_stack([x, y])
    if spec.family == "polyline_resample":
        return _resample_polyline(np.asarray(spec.params["points"], dtype=float), len(theta))
    raise InvalidCurveError(f"unknown curve family {spec.family!r}")


def _resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """Periodic cubic spline through the points, resampled uniformly in
    cumulative chord length."""
    from scipy.interpolate import CubicSpline

    if np.allclose(points[0], points[-1]):
        points = points[:-1]
    closed = np.vstack([points, points[:1]])
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    spline = CubicSpline(chord, closed, bc_type="periodic")
    s = np.linspace(0.0, chord[-1], n, endpoint=False)
    return spline(s)


# ---------------------------------------------------------------------------
# Spectral construction
# ---------------------------------------------------------------------------
def _fourier_modes(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0  # zero the unpaired Nyquist mode in odd-order derivatives
    return k


def mesh_from_samples(nodes: np.ndarray, check_simple: bool = False) -> BoundaryMesh:
    """Build a BoundaryMesh from equispaced-parameter samples of a smooth
    closed curve.

    Orientation is normalized to counterclockwise.  Derivatives come from
    the FFT of the complex positions, so accuracy is spectral in N for
    analytic curves.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.shape[0]
    if n % 2 != 0 or n < 32:
        raise InvalidCurveError(f"node count must be even and >= 32, got {n}")

    c = nodes[:, 0] + 1j * nodes[:, 1]
    # shoelace signed area; flip parameter direction if clockwise
    x, y = nodes[:, 0], nodes[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if signed < 0:
        nodes = np.roll(nodes[::-1], 1, axis=0)
        c = nodes[:, 0] + 1j * nodes[:, 1]

    k = _fourier_modes(n)
    chat = np.fft.fft(c)
    cp = np.fft.ifft(1j * k * chat)
    cpp = np.fft.ifft(-(k**2) * chat)
    speed = np.abs(cp)
    if speed.min() < 1e-12 * speed.max():
        raise InvalidCurveError("degenerate parametrization: |x'(theta)| vanishes")
    tangent_c = cp / speed
    # outward normal = tangent rotated by -pi/2 (CCW orientation)
    normal_c = -1j * tangent_c
    # geometric curvature (x' y'' - y' x'') / |x'|^3 = Im(conj(c') c'') / |c'|^3
    curvature = np.imag(np.conj(cp) * cpp) / speed**3

    weights = (2.0 * np.pi / n) * speed
    mesh = BoundaryMesh(
        nodes=nodes,
        tangents=np.column_stack([tangent_c.real, tangent_c.imag]),
        normals=np.column_stack([normal_c.real, normal_c.imag]),
        curvatures=curvature,
        weights=weights,
        speed=speed,
        total_length=float(weights.sum()),
    )
    if check_simple:
        _assert_simple(mesh)
    return mesh


def build_mesh(spec: CurveSpec, check_simple: bool = True) -> BoundaryMesh:
    """Construct the BoundaryMesh for a curve specification.

    Raises InvalidCurveError for malformed specs and SelfIntersectionError
    if the sampled curve is not simple.
    """
    theta = 2.0 * np.pi * np.arange(spec.n) / spec.n
    nodes = _sample_family(spec, theta)
    return mesh_from_samples(nodes, check_simple=check_simple)


def _assert_simple(mesh: BoundaryMesh) -> None:
    bad = segment_intersections(mesh.nodes)
    if bad:
        raise SelfIntersectionError(
            f"curve self-intersects: segment pairs {bad[:8]}", segments=bad
        )


# ---------------------------------------------------------------------------
# Perturbation and resampling
# ---------------------------------------------------------------------------
def perturb_mesh(
    mesh: BoundaryMesh,
    h: np.ndarray,
    epsilon: float,
    resample: str = "arclength",
) -> BoundaryMesh:
    """Displace the boundary along its outward normal: x -> x + eps*h(x)*nu(x).

    ``resample='arclength'`` re-equidistributes the nodes in arclength of
    the perturbed curve (the defining parameter of the result is then
    arclength); ``resample='param'`` keeps the original parameter grid,
    which preserves the nodewise correspondence x_k -> x_k + eps h_k nu_k.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (mesh.n,):
        raise ValueError(f"h must have shape ({mesh.n},)")
    # tubular-map fold guard: the length element scales by 1 + eps*h*kappa;
    # the offset curve cusps where it reaches zero
    jac_min = float(np.min(1.0 + epsilon * h * mesh.curvatures))
    if jac_min < 0.25:
        raise InvalidCurveError(
            f"perturbation too large for the tubular map: min(1 + eps h kappa) = {jac_min:.3f} < 0.25"
        )
    new_nodes = mesh.nodes + epsilon * h[:, None] * mesh.normals
    out = mesh_from_samples(new_nodes)
    if resample == "arclength":
        out = resample_uniform_arclength(out)
    elif resample != "param":
        raise ValueError("resample must be 'arclength' or 'param'")
    _assert_simple(out)
    return out


def resample_uniform_arclength(mesh: BoundaryMesh) -> BoundaryMesh:
    """Resample the curve at N points equispaced in arclength.

    The arclength function s(theta) is integrated spectrally from |x'|;
    its inverse is found by Newton iteration and positions are evaluated
    by trigonometric interpolation.
    """
    n = mesh.n
    k = _fourier_modes(n)
    speed_hat = np.fft.fft(mesh.speed)
    mean_speed = speed_hat[0].real / n
    with np.errstate(divide="ignore", invalid="ignore"):
        int_hat = np.where(k != 0, speed_hat / (1j * k), 0.0)
    int_hat[0] = 0.0
    osc = np.fft.ifft(int_hat).real  # oscillatory part of s(theta)

    def s_of(theta):
        phases = np.exp(1j * np.outer(theta, k))
        oscillatory = np.real(phases @ (int_hat / n))
        return mean_speed * theta + oscillatory - osc[0]

    def speed_of(theta):
        phases = np.exp(1j * np.outer(theta, k))
        return np.real(phases @ (speed_hat / n))

    targets = mesh.total_length * np.arange(n) / n
    theta = 2.0 * np.pi * np.arange(n) / n  # initial guess
    for _ in range(30):
        resid = s_of(theta) - targets
        theta = theta - resid / speed_of(theta)
        if np.max(np.abs(resid)) < 1e-13 * mesh.total_length:
            break

    chat = np.fft.fft(mesh.nodes_c)
    phases = np.exp(1j * np.outer(theta, k))
    new_c = phases @ (chat / n)
    new_nodes = np.column_stack([new_c.real, new_c.imag])
    return mesh_from_samples(new_nodes)


def transform_mesh(
    mesh: BoundaryMesh,
    rotate: float = 0.0,
    translate: Sequence[float] = (0.0, 0.0),
    scale: float = 1.0,
) -> BoundaryMesh:
    """Apply a rigid motion plus scaling; differential data transforms exactly."""
    if scale <= 0:
        raise InvalidCurveError("scale must be positive")
    rot = np.array([[np.cos(rotate), -np.sin(rotate)], [np.sin(rotate), np.cos(rotate)]])
    t = np.asarray(translate, dtype=float)
    return BoundaryMesh(
        nodes=scale * mesh.nodes @ rot.T + t,
        tangents=mesh.tangents @ rot.T,
        normals=mesh.normals @ rot.T,
        curvatures=mesh.curvatures / scale,
        weights=scale * mesh.weights,
        speed=scale * mesh.speed,
        total_length=scale * mesh.total_length,
    )


# ---------------------------------------------------------------------------
# Integral functionals
# ---------------------------------------------------------------------------
def area_and_moment(mesh: BoundaryMesh) -> tuple[float, float]:
    """Area |D| and the moment integral of 2*x1^2 + x2^2 over D.

    Both are boundary integrals by the divergence theorem; the moment uses
    the fixed antiderivative field (2/3 x1^3, 1/3 x2^3).
    """
    x = mesh.nodes
    xdotnu = np.einsum("ij,ij->i", x, mesh.normals)
    area = 0.5 * np.sum(mesh.weights * xdotnu)
    fld = np.column_stack([(2.0 / 3.0) * x[:, 0] ** 3, (1.0 / 3.0) * x[:, 1] ** 3])
    moment = np.sum(mesh.weights * np.einsum("ij,ij->i", fld, mesh.normals))
    return float(area), float(moment)


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Fourier derivative of periodic nodal values with respect to theta."""
    values = np.asarray(values)
    n = len(values)
    k = _fourier_modes(n)
    vhat = np.fft.fft(values)
    out = np.fft.ifft((1j * k) ** order * vhat)
    return out.real if np.isrealobj(values) else out


def fourier_spec_from_mesh(mesh: BoundaryMesh, max_mode: int | None = None) -> CurveSpec:
    """Encode the mesh as a truncated-Fourier CurveSpec (lossless up to
    max_mode; defaults to all resolvable modes)."""
    n = mesh.n
    if max_mode is None:
        max_mode = n // 2 - 1
    xhat = np.fft.fft(mesh.nodes[:, 0]) / n
    yhat = np.fft.fft(mesh.nodes[:, 1]) / n
    # one-sided coefficients: f(theta) = Re sum_k c_k e^{ik theta}
    cx = np.concatenate([[xhat[0]], 2.0 * xhat[1 : max_mode + 1]])
    cy = np.concatenate([[yhat[0]], 2.0 * yhat[1 : max_mode + 1]])
    coeffs = np.column_stack([cx.real, cx.imag, cy.real, cy.imag])
    return CurveSpec.fourier(coeffs, n)


def save_spec(spec: CurveSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(spec.to_json(), f, indent=2)


def load_spec(path) -> CurveSpec:
    with open(path) as f:
        return CurveSpec.from_json(json.load(f))
