#!/usr/bin/env python3
"""
Command-line interface for plasmon-resonance shape reconstruction
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

# Add repository root to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from scripts.config import RuntimeSettings, configure_logging
from scripts.errors import ConfigurationError, DegeneracyError, PlasmoshapeError
from scripts.experiments import DEFAULT_SEEDS, PRESETS, run_experiment, write_experiment
from scripts.forward import (
    DEFAULT_FORWARD_NODES,
    DEFAULT_MEASUREMENT_RADIUS,
    DEFAULT_MEASUREMENTS,
    NOISE_MODELS,
    IncidentField,
    MeasurementGrid,
    add_noise,
    forward_map,
)
from scripts.geometry import DEFAULT_MODES, PRESET_SHAPES, TrigShape, discretize, load_shape
from scripts.inversion import (
    DEFAULT_INVERSE_NODES,
    STEP_CONTROLS,
    InversionConfig,
    complete_posterior,
    lm_reconstruct,
    random_mu,
)
from scripts.io_utils import write_rows
from scripts.material import DrudeParams, MaterialConfig, resonance_frequencies
from scripts.sensitivity import (
    JACOBIAN_METHODS,
    first_order_remainders,
    named_perturbation,
    sensitivity_kernel,
    spectral_ssf,
)
from scripts.spectrum import DEFAULT_RETAINED_MODES, np_spectrum


def parse_complex(text: str) -> complex:
    """Accept 0.16-1e-6i as well as Python's 0.16-1e-6j"""
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigurationError(f"Cannot parse complex number '{text}'")


def parse_mu(text: str, seed: int) -> float:
    """Numeric regularization or a U(0, 1) draw for 'uniform'"""
    if text == "uniform":
        return random_mu(seed)
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"--mu must be a number or 'uniform', got '{text}'")


def _add_shape(parser, default="bean"):
    parser.add_argument("--shape", default=default,
                        help=f"Preset ({', '.join(PRESET_SHAPES)}), inline JSON or JSON file (default: {default})")


def _add_contrast(parser):
    parser.add_argument("--lambda", dest="lam", type=parse_complex,
                        help="Contrast parameter, e.g. 0.16-1e-6i")
    parser.add_argument("--omega-p", type=float, default=2e15, help="Drude plasma frequency (default: 2e15)")
    parser.add_argument("--gamma", type=float, default=1e14, help="Drude damping (default: 1e14)")
    parser.add_argument("--omega", type=float, help="Operating frequency; selects the Drude model")
    parser.add_argument("--eps-m", type=float, default=1.0,
                        help="Background permittivity in units of the vacuum permittivity (default: 1)")


def _add_grid(parser):
    parser.add_argument("--radius", type=float, default=DEFAULT_MEASUREMENT_RADIUS,
                        help=f"Measurement circle radius (default: {DEFAULT_MEASUREMENT_RADIUS})")
    parser.add_argument("--count", type=int, default=DEFAULT_MEASUREMENTS,
                        help=f"Number of measurement points (default: {DEFAULT_MEASUREMENTS})")


def _contrast(args) -> complex:
    if args.omega is not None:
        drude = DrudeParams(omega_p=args.omega_p, gamma=args.gamma)
        return MaterialConfig(eps_m=args.eps_m * drude.eps0, drude=drude, omega=args.omega).lam
    if args.lam is None:
        raise ConfigurationError("Give --lambda or a Drude frequency via --omega")
    return args.lam


def _emit(payload, out_dir, name):
    if out_dir:
        path = Path(out_dir) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)
        print(f"💾 Saved {path}")
    else:
        print(json.dumps(payload, indent=2))


def cmd_spectrum(args) -> int:
    shape = load_shape(args.shape)
    spec = np_spectrum(discretize(shape, args.n), args.J)
    print(f"🔬 NP spectrum of {shape.name} (n={args.n}, J={args.J})")
    _emit({"shape": shape.name, "n": args.n, "lambdas": [float(v) for v in spec.lambdas]},
          args.out, "spectrum.json")
    if args.out:
        write_rows(Path(args.out) / "eigenvalues.csv", ("j", "lambda"),
                   [(j, float(v)) for j, v in enumerate(spec.lambdas, start=1)])
    return 0


def cmd_resonance(args) -> int:
    shape = load_shape(args.shape)
    spec = np_spectrum(discretize(shape, args.n), args.J)
    drude = DrudeParams(omega_p=args.omega_p, gamma=args.gamma)
    modes = resonance_frequencies(drude, args.eps_m * drude.eps0, spec)
    rows = [(m.index + 1, m.eigenvalue, m.omega, m.lam.real if m.lam is not None else None,
             m.lam.imag if m.lam is not None else None) for m in modes]
    header = ("j", "lambda_j", "omega_j", "lambda_re", "lambda_im")
    print(f"🔬 Resonance frequencies of {shape.name}")
    if args.out:
        path = write_rows(Path(args.out) / "resonance.csv", header, rows)
        print(f"💾 Saved {path}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"✅ {sum(m.resonant for m in modes)} resonant of {len(modes)} entries")
    return 0


def cmd_forward(args) -> int:
    shape = load_shape(args.shape)
    lam = _contrast(args)
    grid = MeasurementGrid(radius=args.radius, count=args.count)
    data = forward_map(shape, args.n, lam, IncidentField.linear(), grid)
    if args.delta > 0:
        data = add_noise(data, args.delta, args.seed, args.noise_model)
    meta = {"shape": shape.name, **data.metadata()}
    rows = [(t, u.real, u.imag) for t, u in zip(grid.angles, data.values)]
    print(f"📡 Far field of {shape.name} at λ = {lam}")
    if args.out:
        _emit(meta, args.out, "forward.json")
        path = write_rows(Path(args.out) / "forward.csv", ("t", "re_u", "im_u"), rows)
        print(f"💾 Saved {path}")
    else:
        print(json.dumps(meta))
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(("t", "re_u", "im_u"))
        writer.writerows(rows)
    return 0


def cmd_ssf(args) -> int:
    shape = load_shape(args.shape)
    lam = _contrast(args)
    curve = discretize(shape, args.n)
    grid = MeasurementGrid(radius=args.radius, count=args.count)
    H = IncidentField.linear()
    h = named_perturbation(args.h, curve)
    direct = sensitivity_kernel(curve, lam, H, grid).pair(h)
    payload = {"shape": shape.name, "n": args.n, "lambda": [lam.real, lam.imag], "h": args.h,
               "direct": [[v.real, v.imag] for v in direct]}
    print(f"🧭 Shape sensitivity of {shape.name} along {args.h}")
    try:
        spectral = spectral_ssf(curve, np_spectrum(curve, args.J), lam, H, grid, h)
        payload["spectral"] = [[v.real, v.imag] for v in spectral.values]
        payload["discrepancy"] = float(np.linalg.norm(spectral.values - direct) / max(np.linalg.norm(direct), 1e-300))
        payload["tail"] = spectral.tail
        payload["dist_squared"] = spectral.distance_squared
    except DegeneracyError as e:
        print(f"⚠️  Spectral expansion skipped: {e}")
    if args.check:
        remainders, orders = first_order_remainders(curve, lam, H, grid, h)
        payload["remainders"] = [float(r) for r in remainders]
        payload["orders"] = [float(o) for o in orders]
        print(f"📊 Observed orders: {', '.join(f'{o:.2f}' for o in orders)}")
    _emit(payload, args.out, "ssf.json")
    return 0


def cmd_reconstruct(args) -> int:
    truth = load_shape(args.shape)
    lam = _contrast(args)
    grid = MeasurementGrid(radius=args.radius, count=args.count)
    mu = parse_mu(args.mu, args.seed)
    cfg = InversionConfig(mu=mu, delta=args.delta, max_iter=args.max_iter, m=args.m,
                          n_inverse=args.n_inverse, jacobian_method=args.jacobian, seed=args.seed,
                          parseval=args.parseval, step_control=args.step_control)
    data = add_noise(forward_map(truth, args.n_forward, lam, IncidentField.linear(), grid),
                     args.delta, args.seed, args.noise_model)

    print(f"🔬 Reconstructing {truth.name} at λ = {lam} (δ = {args.delta}, μ = {mu:g})")
    run = lm_reconstruct(data, TrigShape.circle(args.init_radius, args.m), cfg, q_true=truth)
    if args.delta > 0 and mu > 0:
        run = complete_posterior(run, data, N_e=args.samples, q_true=truth)

    out = Path(args.out) if args.out else Path(RuntimeSettings.from_env().output_dir) / "reconstruct"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run.json", "w") as f:
        json.dump({"shape": truth.name, "data": data.metadata(), **run.to_json()}, f, indent=2)
    coeff_names = [f"a{k}" for k in range(args.m + 1)] + [f"b{k}" for k in range(1, args.m + 1)]
    iterate_rows = []
    for k, q in enumerate(run.iterates):
        step = run.step_norms[k - 1] if k > 0 else None
        e = run.e_gamma_history[k] if k < len(run.e_gamma_history) else None
        iterate_rows.append((k, step, e, *q.vector))
    write_rows(out / "iterates.csv", ("iteration", "step_norm", "e_gamma", *coeff_names), iterate_rows)
    if run.bands is not None:
        b = run.bands
        write_rows(out / "bands.csv", ("t", "q_map", "lower", "upper"), zip(b.t, b.center, b.lower, b.upper))
    if run.svd is not None:
        write_rows(out / "singulars.csv", ("index", "singular_value"),
                   enumerate(run.svd.singular_values, start=1))

    status = "✅ Converged" if run.converged else "⚠️  Stopped"
    print(f"{status} after {run.iterations} iterations, e_γ = {run.e_gamma_map:.3e}")
    print(f"💾 Results saved to {out}")
    return 0


def cmd_experiment(args) -> int:
    seeds = list(range(args.seeds))
    deltas = args.deltas or None
    print(f"🧪 Running {args.preset} over {len(seeds)} seeds")
    result = run_experiment(args.preset, seeds, deltas=deltas, samples=args.samples,
                            max_iter=args.max_iter, threads=args.threads, step_control=args.step_control)
    paths = write_experiment(result, args.out)
    for row in result.summary():
        mean = row["e_gamma_mean"]
        text = f"{mean:.3e}" if mean is not None else "n/a"
        print(f"📊 λ = {complex(row['lambda_re'], row['lambda_im'])}, δ = {row['delta']}, "
              f"{row['mu_mode']}: mean e_γ = {text} ({row['failed']} failed)")
    print(f"💾 Wrote {len(paths)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plasmoshape",
                                     description="Plasmon-resonance enhanced shape reconstruction")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    spectrum_parser = subparsers.add_parser("spectrum", help="Neumann-Poincaré eigenvalues of a shape")
    _add_shape(spectrum_parser)
    spectrum_parser.add_argument("-n", "--n", type=int, default=128, help="Node count (default: 128)")
    spectrum_parser.add_argument("-J", "--J", type=int, default=DEFAULT_RETAINED_MODES,
                                 help=f"Retained modes (default: {DEFAULT_RETAINED_MODES})")
    spectrum_parser.add_argument("-o", "--out", help="Output directory")

    resonance_parser = subparsers.add_parser("resonance", help="Drude resonance frequencies of each mode")
    _add_shape(resonance_parser)
    _add_contrast(resonance_parser)
    resonance_parser.add_argument("-n", "--n", type=int, default=128, help="Node count (default: 128)")
    resonance_parser.add_argument("-J", "--J", type=int, default=DEFAULT_RETAINED_MODES, help="Retained modes")
    resonance_parser.add_argument("-o", "--out", help="Output directory")

    forward_parser = subparsers.add_parser("forward", help="Far-field data of a shape")
    _add_shape(forward_parser)
    _add_contrast(forward_parser)
    _add_grid(forward_parser)
    forward_parser.add_argument("-n", "--n", type=int, default=DEFAULT_FORWARD_NODES,
                                help=f"Node count (default: {DEFAULT_FORWARD_NODES})")
    forward_parser.add_argument("--delta", type=float, default=0.0, help="Noise level (default: 0)")
    forward_parser.add_argument("--seed", type=int, default=0, help="Noise seed (default: 0)")
    forward_parser.add_argument("--noise-model", default="absolute", choices=NOISE_MODELS)
    forward_parser.add_argument("-o", "--out", help="Output directory")

    ssf_parser = subparsers.add_parser("ssf", help="Direct and spectral shape sensitivity")
    _add_shape(ssf_parser)
    _add_contrast(ssf_parser)
    _add_grid(ssf_parser)
    ssf_parser.add_argument("--h", default="cos2", help="Perturbation: const, cosK or sinK (default: cos2)")
    ssf_parser.add_argument("-n", "--n", type=int, default=DEFAULT_FORWARD_NODES, help="Node count")
    ssf_parser.add_argument("-J", "--J", type=int, default=DEFAULT_RETAINED_MODES, help="Retained modes")
    ssf_parser.add_argument("--check", action="store_true", help="Report first-order remainders and orders")
    ssf_parser.add_argument("-o", "--out", help="Output directory")

    reconstruct_parser = subparsers.add_parser("reconstruct", help="Reconstruct a shape from synthetic data")
    _add_shape(reconstruct_parser)
    _add_contrast(reconstruct_parser)
    _add_grid(reconstruct_parser)
    reconstruct_parser.add_argument("--delta", type=float, default=0.01, help="Noise level (default: 0.01)")
    reconstruct_parser.add_argument("--mu", default="0.1", help="Regularization value or 'uniform' (default: 0.1)")
    reconstruct_parser.add_argument("--m", type=int, default=DEFAULT_MODES, help=f"Modes (default: {DEFAULT_MODES})")
    reconstruct_parser.add_argument("--n-forward", type=int, default=DEFAULT_FORWARD_NODES)
    reconstruct_parser.add_argument("--n-inverse", type=int, default=DEFAULT_INVERSE_NODES)
    reconstruct_parser.add_argument("--init-radius", type=float, default=0.7, help="Initial circle (default: 0.7)")
    reconstruct_parser.add_argument("--max-iter", type=int, default=100)
    reconstruct_parser.add_argument("--jacobian", default="finite_difference", choices=JACOBIAN_METHODS)
    reconstruct_parser.add_argument("--parseval", action="store_true", help="Penalize the L² norm of q")
    reconstruct_parser.add_argument("--step-control", default="star", choices=STEP_CONTROLS,
                                    help="Halve steps to stay star-shaped, or also until the misfit drops (default: star)")
    reconstruct_parser.add_argument("--noise-model", default="absolute", choices=NOISE_MODELS)
    reconstruct_parser.add_argument("--seed", type=int, default=0)
    reconstruct_parser.add_argument("--samples", type=int, default=10000, help="Laplace samples N_e")
    reconstruct_parser.add_argument("-o", "--out", help="Output directory (default: PLASMOSHAPE_OUTPUT_DIR/reconstruct)")

    experiment_parser = subparsers.add_parser("experiment", help="Multi-seed benchmark sweep")
    experiment_parser.add_argument("--preset", required=True, choices=list(PRESETS))
    experiment_parser.add_argument("--seeds", type=int, default=DEFAULT_SEEDS,
                                   help=f"Number of seeds 0..N-1 (default: {DEFAULT_SEEDS})")
    experiment_parser.add_argument("--deltas", type=float, nargs="+", help="Noise levels (default: 0.01 0.05)")
    experiment_parser.add_argument("--samples", type=int, default=10000, help="Laplace samples per run")
    experiment_parser.add_argument("--max-iter", type=int, default=100)
    experiment_parser.add_argument("--threads", type=int, help="Worker threads (default: PLASMOSHAPE_THREADS)")
    experiment_parser.add_argument("--step-control", choices=STEP_CONTROLS, help="Override the preset step control")
    experiment_parser.add_argument("-o", "--out", required=True, help="Output directory")
    return parser


COMMANDS = {
    "spectrum": cmd_spectrum,
    "resonance": cmd_resonance,
    "forward": cmd_forward,
    "ssf": cmd_ssf,
    "reconstruct": cmd_reconstruct,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    try:
        configure_logging(RuntimeSettings.from_env())
        return COMMANDS[args.command](args)
    except PlasmoshapeError as e:
        print(f"❌ Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
