"""Command-line front door: reproducible generation, reconstruction, scoring.

Subcommands: gen-traffic, gen-dataset, reconstruct, evaluate. Exit codes:
0 success, 2 usage error, 3 data/shape error, 4 I/O error. Generation
commands require --seed. Flag defaults may come from a `key = value` config
file (--config), and relative paths resolve against $V2XSENSE_DATA_DIR when
it is set.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import mobility, reconstructor, sensing
from .channel import band_by_name, load_band_file
from .cs_baseline import CsSolverConfig, fista_reconstruct, omp_reconstruct
from .errors import V2xError
from .evaluation import evaluate_run, render_table
from .specgen import SpectrumSample

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

DATA_DIR_ENV = "V2XSENSE_DATA_DIR"


def _resolve(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _read_config_defaults(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    defaults = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise V2xError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            defaults[key.replace("-", "_")] = val
    return defaults


def _scenario_from_args(args) -> ds.ScenarioConfig:
    road = mobility.RoadConfig(
        length_m=args.road_length,
        lanes_per_direction=args.lanes,
        light_position_m=args.road_length / 2 if args.light_position is None
        else args.light_position,
        light_cycle=(args.green, args.red),
        time_step_s=args.time_step,
    )
    vehicle = mobility.VehicleParams(max_speed_mps=args.max_speed,
                                     spawn_mean_interval_s=args.spawn_mean)
    return ds.ScenarioConfig(road=road, vehicle=vehicle)


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--road-length", type=float, default=1000.0)
    p.add_argument("--lanes", type=int, default=2,
                   help="lanes per direction (default 2)")
    p.add_argument("--light-position", type=float, default=None,
                   help="stop line position in m (default mid-road)")
    p.add_argument("--green", type=float, default=30.0)
    p.add_argument("--red", type=float, default=30.0)
    p.add_argument("--time-step", type=float, default=1.0)
    p.add_argument("--max-speed", type=float, default=55.56)
    p.add_argument("--spawn-mean", type=float, default=2.5,
                   help="mean vehicle inter-arrival per direction, seconds")


def _band_from_args(args):
    if getattr(args, "band_file", None):
        return load_band_file(_resolve(args.band_file))
    return band_by_name(args.band)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2xsense",
        description="C-V2X spectrum sensing workbench")
    parser.add_argument("--config", default=None,
                        help="key = value file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traffic", help="simulate or ingest vehicle trajectories")
    p.add_argument("--duration", type=float, default=None,
                   help="simulated seconds (conflicts with --fcd)")
    p.add_argument("--fcd", default=None, help="SUMO fcd-export XML to ingest")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    _add_scenario_flags(p)

    p = sub.add_parser("gen-dataset", help="generate labeled spectrum samples")
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--val", type=int, required=True)
    p.add_argument("--test", type=int, required=True)
    p.add_argument("--snr", type=float, default=30.0)
    p.add_argument("--band", default="sub6ghz", choices=["sub6ghz", "thz"])
    p.add_argument("--band-file", default=None,
                   help="key = value band configuration overriding --band")
    p.add_argument("--n-subcarriers", type=int, default=256)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_scenario_flags(p)

    p = sub.add_parser("reconstruct", help="estimate spectra for a dataset split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test", choices=list(ds.SPLIT_NAMES))
    p.add_argument("--method", required=True, choices=["omp", "fista", "learned"])
    p.add_argument("--weights", default=None, help="V2XW weights (learned method)")
    p.add_argument("--matrix", default=None, help="V2XM sensing matrix file")
    p.add_argument("--m", type=int, default=None, help="measurement count")
    p.add_argument("--rate", type=float, default=None,
                   help="compression rate m/n_s (alternative to --m)")
    p.add_argument("--matrix-kind", default="random_bernoulli",
                   choices=["random_bernoulli", "random_gaussian"])
    p.add_argument("--matrix-seed", type=int, default=0)
    p.add_argument("--k", type=int, default=25, help="OMP sparsity budget")
    p.add_argument("--lam", type=float, default=None, help="FISTA L1 weight")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True, help="estimates container path")

    p = sub.add_parser("evaluate", help="score estimates against a dataset split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test", choices=list(ds.SPLIT_NAMES))
    p.add_argument("--estimates", default=None,
                   help="estimates container from `reconstruct`")
    p.add_argument("--oracle", action="store_true",
                   help="score the clean spectra against themselves")
    p.add_argument("--method-name", default=None,
                   help="label for the report (defaults from inputs)")
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-table", default=None)
    p.add_argument("--plot", action="store_true",
                   help="write overlay and metric-bar images")
    p.add_argument("--plot-dir", default="plots")
    p.add_argument("--plot-samples", type=int, default=3)
    return parser


def _apply_config_defaults(parser, argv):
    """Pull --config out of argv and fold its values in as parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        defaults = _read_config_defaults(_resolve(known.config))
        for action in parser._subparsers._group_actions[0].choices.values():
            usable = {k: v for k, v in defaults.items()
                      if any(a.dest == k for a in action._actions)}
            action.set_defaults(**usable)
    return argv


def cmd_gen_traffic(args) -> int:
    if (args.duration is None) == (args.fcd is None):
        print("gen-traffic requires exactly one of --duration or --fcd",
              file=sys.stderr)
        return EXIT_USAGE
    if args.fcd is not None:
        trajectory = mobility.parse_fcd_file(_resolve(args.fcd))
    else:
        if args.seed is None:
            print("--seed is required with --duration", file=sys.stderr)
            return EXIT_USAGE
        scenario = _scenario_from_args(args)
        trajectory = mobility.run_scenario(scenario.road, scenario.vehicle,
                                           args.duration, args.seed)
    out = _resolve(args.out)
    trajectory.write_csv(out)
    print(f"wrote {len(trajectory)} frames to {out}")
    return EXIT_OK


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def cmd_gen_dataset(args) -> int:
    band = _band_from_args(args)
    scenario = _scenario_from_args(args)
    out = _resolve(args.out)
    data = ds.generate_dataset(scenario, band, args.snr,
                               (args.train, args.val, args.test), args.seed,
                               path=out, n_subcarriers=args.n_subcarriers,
                               jobs=args.jobs)
    header = data.header
    print(f"band={header.band} snr_db={header.snr_db:g} "
          f"n_subcarriers={header.n_subcarriers} "
          f"counts={header.counts} seed={header.seed}")
    print(f"sha256 {_sha256(out)}  {out}")
    return EXIT_OK


def _solver_matrix(args, n_s: int) -> sensing.SensingMatrix:
    if args.matrix:
        phi = sensing.load_matrix(_resolve(args.matrix))
        if phi.n_s != n_s:
            raise V2xError(f"matrix n_s={phi.n_s} does not match dataset "
                           f"n_subcarriers={n_s}")
        return phi
    if args.m is not None:
        m = args.m
    elif args.rate is not None:
        if not 0 < args.rate < 1:
            raise V2xError("--rate must lie in (0, 1)")
        m = round(args.rate * n_s)
    else:
        raise V2xError("omp/fista need --matrix, --m, or --rate")
    return sensing.random_sensing_matrix(m, n_s, kind=args.matrix_kind,
                                         rng=args.matrix_seed)


def cmd_reconstruct(args) -> int:
    data = ds.read_dataset(_resolve(args.dataset))
    samples = data.split(args.split)
    n_s = data.header.n_subcarriers

    if args.method == "learned":
        if not args.weights:
            print("--method learned requires --weights", file=sys.stderr)
            return EXIT_USAGE
        weights = reconstructor.load_weights(_resolve(args.weights))
        if weights.architecture.n_s != n_s:
            raise V2xError(
                f"weights n_s={weights.architecture.n_s} does not match "
                f"dataset n_subcarriers={n_s}")
        noisy = np.stack([s.noisy for s in samples]) if samples else \
            np.zeros((0, n_s), dtype=np.complex128)
        estimates = reconstructor.forward_complex(noisy, weights) \
            if samples else noisy
    else:
        phi = _solver_matrix(args, n_s)
        config = CsSolverConfig(epsilon=args.epsilon, max_iterations=args.max_iter,
                                lam=args.lam, sparsity_k=args.k,
                                tolerance=args.tol)
        solver = omp_reconstruct if args.method == "omp" else fista_reconstruct
        estimates = np.empty((len(samples), n_s), dtype=np.complex128)
        for i, sample in enumerate(samples):
            y = sensing.compress(sample.noisy, phi)
            estimates[i], _ = solver(y, phi, config)

    est_samples = [
        SpectrumSample(clean=estimates[i], noisy=s.noisy, mask=s.mask,
                       scale=s.scale, snr_db=s.snr_db, band=s.band)
        for i, s in enumerate(samples)
    ]
    counts = [0, 0, 0]
    counts[ds.SPLIT_NAMES.index(args.split)] = len(est_samples)
    header = ds.DatasetHeader(band=data.header.band, snr_db=data.header.snr_db,
                              n_subcarriers=n_s, counts=tuple(counts),
                              seed=data.header.seed)
    out = _resolve(args.out)
    ds.write_dataset(out, header, est_samples)
    print(f"wrote {len(est_samples)} {args.method} estimates to {out}")
    return EXIT_OK


def _write_plots(args, samples, estimates, report) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = _resolve(args.plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(min(args.plot_samples, len(samples))):
        fig, ax = plt.subplots(figsize=(9, 3.2))
        ax.plot(np.abs(samples[i].clean), label="original", lw=1.2)
        ax.plot(np.abs(estimates[i]), label="reconstruction", lw=1.0, alpha=0.8)
        ax.set_xlabel("subcarrier")
        ax.set_ylabel("magnitude")
        ax.legend(loc="upper right")
        fig.tight_layout()
        path = plot_dir / f"spectrum_{args.split}_{i}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(6, 3.2))
    names = ["MSE", "cosine", "SSIM", "Pd", "Pf"]
    values = [report.mse, report.cosine, report.ssim,
              report.p_d or 0.0, report.p_f or 0.0]
    ax.bar(names, values)
    ax.set_ylabel("value")
    fig.tight_layout()
    path = plot_dir / f"metrics_{args.split}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def cmd_evaluate(args) -> int:
    data = ds.read_dataset(_resolve(args.dataset))
    samples = data.split(args.split)
    if args.oracle == (args.estimates is not None):
        print("evaluate requires exactly one of --estimates or --oracle",
              file=sys.stderr)
        return EXIT_USAGE
    if args.oracle:
        estimates = [s.clean for s in samples]
        method_name = args.method_name or "oracle"
        rate = None
    else:
        est_data = ds.read_dataset(_resolve(args.estimates))
        est_samples = est_data.split(args.split)
        if len(est_samples) != len(samples):
            raise V2xError(
                f"estimates hold {len(est_samples)} '{args.split}' records, "
                f"dataset holds {len(samples)}")
        estimates = [s.clean for s in est_samples]
        method_name = args.method_name or Path(args.estimates).stem
        rate = None

    lookup = {id(s): e for s, e in zip(samples, estimates)}
    report = evaluate_run(samples, lambda s: lookup[id(s)],
                          method_name=method_name, compression_rate=rate)
    payload = report.to_json()
    if args.out_json:
        path = _resolve(args.out_json)
        path.write_text(payload + "\n", encoding="utf-8")
        print(f"wrote report to {path}")
    table = render_table([report])
    if args.out_table:
        _resolve(args.out_table).write_text(table, encoding="utf-8")
    print(table, end="")
    if args.plot:
        for path in _write_plots(args, samples, estimates, report):
            print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "gen-traffic": cmd_gen_traffic,
    "gen-dataset": cmd_gen_dataset,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (V2xError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
