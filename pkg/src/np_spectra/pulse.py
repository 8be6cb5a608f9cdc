"""Pulse-shape design: time pulses h(t) and their contrast curves.

A pulse probing a medium with conductivity ratio sigma and permittivity
ratio eps traces the contrast curve

    lambda(t) = ((sigma+1) h + eps h') / (2(sigma-1) h + 2 eps h'),

a Moebius function of the logarithmic derivative h'/h.  Inverting for a
prescribed curve gives the linear ODE h'/h = p with

    p = ((sigma+1) - 2(sigma-1) lambda) / (eps (2 lambda - 1)),

whose solution h = C exp(int p) specializes, for lambda = A e^{2pi i t}
and (sigma, eps) = (3, 2), to the closed form

    h(t) = e^{-2t} (2 A e^{2pi i t} - 1)^{-i/2pi}

with a continuously tracked complex logarithm.  (The corresponding
source prints the p-denominator with the opposite sign, which is
inconsistent with both the curve formula and this closed form.)

Derivatives of sampled pulses use 4th-order centered finite differences:
the pulses decay like e^{-2t} over windows of length ~20, and local
stencils keep the relative accuracy of h'/h across that dynamic range
where a global spectral derivative would drown the tail in roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchCrossingError, NPSpectraError

#: interior fraction of the window where the bump taper is identically one
FLAT_LO, FLAT_HI = 0.05, 0.95


@dataclass(frozen=True)
class PulseSignal:
    """Complex pulse samples on a uniform grid over (0, T)."""

    t_grid: np.ndarray
    values: np.ndarray
    sigma_ratio: float
    eps_ratio: float
    T: float

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    def check_support(self, tol: float = 1e-10) -> bool:
        scale = np.abs(self.values).max()
        return bool(
            abs(self.values[0]) <= tol * scale and abs(self.values[-1]) <= tol * scale
        )


def smooth_window(t: np.ndarray, T: float) -> np.ndarray:
    """C-infinity bump taper: identically 1 on [0.05T, 0.95T], vanishing at
    the endpoints with all derivatives."""

    def ramp(x):
        out = np.zeros_like(x)
        inside = (x > 0) & (x < 1)
        out[x >= 1] = 1.0
        with np.errstate(over="ignore"):
            e1 = np.exp(-1.0 / np.clip(x[inside], 1e-12, None))
            e2 = np.exp(-1.0 / np.clip(1.0 - x[inside], 1e-12, None))
        out[inside] = e1 / (e1 + e2)
        return out

    lo, hi = FLAT_LO * T, FLAT_HI * T
    return ramp(t / lo) * ramp((T - t) / (T - hi))


def derivative_4th(values: np.ndarray, dt: float) -> np.ndarray:
    """4th-order centered first derivative with periodic wrap (pulses are
    numerically compactly supported, so the wrap is benign)."""
    vm2 = np.roll(values, 2)
    vm1 = np.roll(values, 1)
    vp1 = np.roll(values, -1)
    vp2 = np.roll(values, -2)
    return (vm2 - 8.0 * vm1 + 8.0 * vp1 - vp2) / (12.0 * dt)


def pulse_to_contrast(pulse: PulseSignal) -> np.ndarray:
    """Contrast curve lambda(t) traced by the pulse.

    Outside the pulse's numerical support the contrast is 0/0 and is
    returned as NaN; a vanishing denominator where the pulse is active
    raises (the curve genuinely blows up there).
    """
    sigma, eps = pulse.sigma_ratio, pulse.eps_ratio
    h = pulse.values
    dh = derivative_4th(h, pulse.dt)
    num = (sigma + 1.0) * h + eps * dh
    den = 2.0 * (sigma - 1.0) * h + 2.0 * eps * dh
    # the pulse keeps full relative precision however small it decays, so
    # only exact zeros / underflow are outside support
    local = np.maximum(np.abs(h), pulse.dt * np.abs(dh))
    active = local > 1e-280
    bad = active & (np.abs(den) <= 1e-10 * local)
    if np.any(bad):
        t_bad = pulse.t_grid[np.argmax(bad)]
        raise NPSpectraError(f"contrast denominator vanishes near t = {t_bad:.6g}")
    out = np.full(len(h), np.nan, dtype=complex)
    out[active] = num[active] / den[active]
    return out


def _tracked_log(w: np.ndarray) -> np.ndarray:
    """log w with the argument unwrapped continuously along the sample
    path; rejects under-resolved paths (raw angle jumps above pi/2)."""
    raw = np.angle(w)
    jumps = np.diff(raw)
    wrapped = (jumps + np.pi) % (2.0 * np.pi) - np.pi
    if np.any(np.abs(wrapped) > 0.5 * np.pi):
        k = int(np.argmax(np.abs(wrapped) > 0.5 * np.pi))
        raise BranchCrossingError(
            f"branch tracking lost between samples {k} and {k + 1}: angle jump "
            f"{wrapped[k]:.3f} rad; refine the grid"
        )
    angles = np.concatenate([[raw[0]], raw[0] + np.cumsum(wrapped)])
    return np.log(np.abs(w)) + 1j * angles


def contrast_to_pulse(
    a: float,
    t_grid: np.ndarray,
    sigma: float = 3.0,
    eps: float = 2.0,
    closed_form: bool | None = None,
    window: bool = True,
) -> PulseSignal:
    """Pulse whose contrast curve is the circle lambda(t) = A e^{2pi i t}.

    For (sigma, eps) = (3, 2) the closed form
    h = e^{-2t} (2A e^{2pi i t} - 1)^{-i/2pi} is used; otherwise h is
    exp of the trapezoid integral of p(t) with branch-tracked logs.  A
    C-infinity taper enforces compact support in (0, T); roundtrip
    identities hold on the flat interior of the window.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    T = float(t_grid[-1] + (t_grid[1] - t_grid[0]))
    if abs(2.0 * a) == 1.0:
        raise BranchCrossingError("|2A| = 1 puts a branch point on the contrast circle")
    if closed_form is None:
        closed_form = sigma == 3.0 and eps == 2.0

    if closed_form:
        w = 2.0 * a * np.exp(2j * np.pi * t_grid) - 1.0
        h = np.exp(-2.0 * t_grid) * np.exp(-0.5j / np.pi * _tracked_log(w))
    else:
        lam = a * np.exp(2j * np.pi * t_grid)
        p = ((sigma + 1.0) - 2.0 * (sigma - 1.0) * lam) / (eps * (2.0 * lam - 1.0))
        dt = t_grid[1] - t_grid[0]
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * dt)])
        h = np.exp(integral)

    if window:
        h = h * smooth_window(t_grid, T)
    return PulseSignal(t_grid=t_grid, values=h, sigma_ratio=sigma, eps_ratio=eps, T=T)


def example_pulse(which: int, t_grid: np.ndarray, sigma: float = 3.0, eps: float = 2.0,
                  sigma0: float = 0.3, a: float = 3.0) -> PulseSignal:
    """Gaussian-envelope demonstration pulses (two canned phase profiles)."""
    t = np.asarray(t_grid, dtype=float)
    T = float(t[-1] + (t[1] - t[0]))
    envelope = np.exp(-((t - a) ** 2) / (2.0 * sigma0**2)) / (np.sqrt(2.0 * np.pi) * sigma0)
    if which == 1:
        phase = np.exp(1j * ((t - a) * np.pi / (2.0 * sigma0) + 0.5 * np.pi))
        h = envelope * phase
    elif which == 2:
        phase = np.exp(1j * np.cos(t - a) * np.pi)
        h = -envelope * phase
    else:
        raise ValueError("which must be 1 or 2")
    return PulseSignal(t_grid=t, values=h, sigma_ratio=sigma, eps_ratio=eps, T=T)


def winding_number(curve: np.ndarray, point: complex) -> int:
    """Winding of a closed sample path about a point, by angle summation."""
    raw = np.angle(np.append(curve, curve[0]) - point)
    jumps = np.diff(raw)
    wrapped = (jumps + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(np.sum(wrapped) / (2.0 * np.pi)))


def flat_interior_mask(t_grid: np.ndarray, T: float, fraction: float = 0.8) -> np.ndarray:
    """Boolean mask of the central `fraction` of the window."""
    lo = (1.0 - fraction) / 2.0 * T
    return (t_grid >= lo) & (t_grid <= T - lo)


def export_csv(pulse: PulseSignal, contrast: np.ndarray, path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "re_h", "im_h", "re_lambda", "im_lambda"])
        for t, h, lam in zip(pulse.t_grid, pulse.values, contrast):
            writer.writerow(
                [f"{t:.12g}", f"{h.real:.12g}", f"{h.imag:.12g}",
                 f"{lam.real:.12g}", f"{lam.imag:.12g}"]
            )
