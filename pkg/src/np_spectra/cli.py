"""Command-line surface: mesh, spectrum, pt, recover, design, pulse, multibody.

Every run writes its outputs plus a manifest.json into --out; identical
inputs (including seeds) reproduce byte-identical CSV output.  Exit codes:
0 success, 1 domain error (machine-readable JSON on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import resolve_threads
from .errors import NPSpectraError
from .geometry import CurveSpec, build_mesh, load_spec
from .operator import assemble_np, assemble_single_layer, spectrum

MANIFEST_SCHEMA = "np-spectra/manifest-1"


def _write_manifest(out_dir: Path, command: str, args: dict) -> None:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "arguments": {k: v for k, v in sorted(args.items())},
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_curve(path: str) -> CurveSpec:
    return load_spec(path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_mesh(args) -> None:
    spec = _load_curve(args.curve)
    if args.n:
        spec = CurveSpec(spec.family, spec.params, args.n)
    mesh = build_mesh(spec)
    out = _out_dir(args.out)
    with open(out / "mesh.json", "w") as f:
        json.dump(mesh.to_json(), f)
    mesh.export_nodes_csv(out / "nodes.csv")
    _write_manifest(out, "mesh", {"curve": args.curve, "n": spec.n})


def cmd_spectrum(args) -> None:
    spec = _load_curve(args.curve)
    if args.n:
        spec = CurveSpec(spec.family, spec.params, args.n)
    mesh = build_mesh(spec)
    sp = spectrum(assemble_np(mesh), assemble_single_layer(mesh), k_max=args.k)
    out = _out_dir(args.out)
    sp.export_csv(out / "spectrum.csv", count=args.k)
    if args.eigenfunctions:
        np.save(out / "eigenfunctions.npy", sp.eigenfunctions)
    _write_manifest(
        out, "spectrum", {"curve": args.curve, "n": spec.n, "k": args.k}
    )


def cmd_pt(args) -> None:
    from .polarization import ContrastContour, sample_contour

    spec = _load_curve(args.curve)
    if args.n:
        spec = CurveSpec(spec.family, spec.params, args.n)
    mesh = build_mesh(spec)
    contour = ContrastContour(
        complex(args.center_re, args.center_im), args.radius, args.samples
    )
    samples = sample_contour(
        assemble_np(mesh), mesh, contour, threads=resolve_threads(args.threads)
    )
    out = _out_dir(args.out)
    samples.save(out / "pt_samples.json")
    _write_manifest(
        out,
        "pt",
        {
            "curve": args.curve,
            "n": spec.n,
            "center": [args.center_re, args.center_im],
            "radius": args.radius,
            "samples": args.samples,
        },
    )


def cmd_recover(args) -> None:
    from .polarization import ContourSamples
    from .recovery import method1_recover, method2_extract, method2_profile

    samples = ContourSamples.load(args.pt)
    out = _out_dir(args.out)
    if args.method == 2:
        grid_size = int(round(1.0 / args.grid)) + 1
        profile = method2_profile(samples, sigma0=args.sigma0, t_grid_size=grid_size)
        result = method2_extract(profile, count=args.count)
        profile.export_csv(out / "profile.csv")
        result.export_csv(out / "recovered.csv")
    else:
        result = method1_recover(samples, j_max=args.count, n_pow=args.n_pow)
        with open(out / "recovered.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["rank", "lambda_hat", "c_hat", "multiplicity_estimate"])
            for i, (lam, c) in enumerate(zip(result.values, result.coefficients), 1):
                writer.writerow([i, f"{lam:.12g}", f"{c.real:.12g}", 1])
    _write_manifest(
        out,
        "recover",
        {
            "pt": args.pt,
            "method": args.method,
            "sigma0": args.sigma0,
            "count": args.count,
            "grid": args.grid,
            "n_pow": args.n_pow,
        },
    )


def cmd_design(args) -> None:
    from .designer import DesignConfig, add_noise, run_design
    from .geometry import save_spec

    targets = []
    with open(args.targets) as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#") or row[0] == "lambda":
                continue
            targets.append(float(row[0]))
    targets = np.asarray(targets)
    if args.sigma > 0:
        targets = add_noise(targets, args.sigma, args.seed)
    config = DesignConfig(
        n_targets=min(args.n_targets, len(targets)),
        rng_seed=args.seed,
        noise_sigma=args.sigma,
        threads=resolve_threads(args.threads),
    )
    initial = _load_curve(args.init)
    result = run_design(targets, config, initial)
    out = _out_dir(args.out)
    result.save_history_csv(out / "history.csv")
    with open(out / "report.json", "w") as f:
        json.dump(result.report(), f, indent=2)
    for level, spec in result.stabilized_specs.items():
        save_spec(spec, out / f"shape_level_{level}.json")
    save_spec(result.stabilized_specs[result.final_level], out / "shape_final.json")
    _write_manifest(
        out,
        "design",
        {
            "targets": args.targets,
            "init": args.init,
            "seed": args.seed,
            "sigma": args.sigma,
            "n_targets": args.n_targets,
        },
    )


def cmd_pulse(args) -> None:
    from .pulse import contrast_to_pulse, example_pulse, export_csv, pulse_to_contrast

    t_grid = np.arange(0.0, args.T, args.T / args.samples)
    if args.example:
        pulse = example_pulse(args.example, t_grid, sigma=args.sigma_ratio, eps=args.eps_ratio)
    else:
        pulse = contrast_to_pulse(
            args.amplitude, t_grid, sigma=args.sigma_ratio, eps=args.eps_ratio
        )
    contrast = pulse_to_contrast(pulse)
    out = _out_dir(args.out)
    export_csv(pulse, contrast, out / "pulse.csv")
    _write_manifest(
        out,
        "pulse",
        {
            "amplitude": args.amplitude,
            "example": args.example,
            "T": args.T,
            "samples": args.samples,
            "sigma": args.sigma_ratio,
            "eps": args.eps_ratio,
        },
    )


def cmd_multibody(args) -> None:
    from .multibody import separation_sweep, sweep_to_csv

    base = _load_curve(args.base)
    if args.n:
        base = CurveSpec(base.family, base.params, args.n)
    separations = [float(s) for s in args.separations.split(",")]
    spectra = separation_sweep(
        base,
        np.array([args.dir_x, args.dir_y]),
        separations,
        force=args.force,
        threads=resolve_threads(args.threads),
    )
    out = _out_dir(args.out)
    sweep_to_csv(spectra, out / "sweep.csv", floor=args.floor)
    _write_manifest(
        out,
        "multibody",
        {
            "base": args.base,
            "direction": [args.dir_x, args.dir_y],
            "separations": separations,
            "floor": args.floor,
            "force": args.force,
        },
    )


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="np-spectra",
        description="Fredholm eigenvalues, polarization tensors, and inverse shape design",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build and export a boundary mesh")
    p.add_argument("--curve", required=True, help="curve spec JSON")
    p.add_argument("--n", type=int, default=0, help="override node count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("spectrum", help="Fredholm eigenvalues of a shape")
    p.add_argument("--curve", required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--k", type=int, default=8, help="eigenvalues to export")
    p.add_argument("--eigenfunctions", action="store_true", help="dump nodal eigenfunctions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("pt", help="sample the polarization tensor on a contour")
    p.add_argument("--curve", required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--center-re", type=float, default=0.3)
    p.add_argument("--center-im", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=0.23)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pt)

    p = sub.add_parser("recover", help="recover eigenvalues from PT samples")
    p.add_argument("--pt", required=True, help="ContourSamples JSON")
    p.add_argument("--method", type=int, choices=(1, 2), default=2)
    p.add_argument("--sigma0", type=float, default=0.05)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--grid", type=float, default=0.005, help="t-grid step")
    p.add_argument("--n-pow", type=int, default=8, help="method 1 moment order")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("design", help="inverse shape design from eigenvalue targets")
    p.add_argument("--targets", required=True, help="CSV with one eigenvalue per row")
    p.add_argument("--init", required=True, help="initial curve spec JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=0.0, help="multiplicative target noise")
    p.add_argument("--n-targets", type=int, default=7)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("pulse", help="pulse and contrast-curve synthesis")
    p.add_argument("--amplitude", type=float, default=0.4, help="contrast circle radius A")
    p.add_argument("--example", type=int, choices=(1, 2), default=0)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=8000)
    p.add_argument("--sigma-ratio", type=float, default=3.0)
    p.add_argument("--eps-ratio", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("multibody", help="two-body spectrum separation sweep")
    p.add_argument("--base", required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--dir-x", type=float, default=0.0)
    p.add_argument("--dir-y", type=float, default=1.0)
    p.add_argument("--separations", required=True, help="comma-separated gaps")
    p.add_argument("--floor", type=float, default=5e-4)
    p.add_argument("--force", action="store_true", help="allow near-touching gaps")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_multibody)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NPSpectraError as exc:
        json.dump(exc.payload(), sys.stderr)
        sys.stderr.write(os.linesep)
        return 1
    except FileNotFoundError as exc:
        json.dump({"error": "FileNotFoundError", "message": str(exc)}, sys.stderr)
        sys.stderr.write(os.linesep)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
