"""Command-line entry point: ``rotiq <command> ...``.

Every command that takes ``--out DIR`` writes ``DIR/config.json`` holding the
exact argument vector (with seeds resolved), so ``rotiq replay DIR/config.json``
reruns it.  Exit codes: 0 success, 1 domain or I/O error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import RotiqError

CONFIG_VERSION = 1
CONFIG_FILE = "config.json"
SEED_ENV = "ROTIQ_SEED"


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise RotiqError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _qubit_range(text: str) -> list[int]:
    """``4..10``, ``4,6,8`` or a mix such as ``4..6,9``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad qubit range {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty qubit range")
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


# --------------------------------------------------------------------------
# output helpers

def _write_echo(out: Path, argv: Sequence[str], args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    flags = {k: v for k, v in vars(args).items() if k not in ("func",) and not k.startswith("_")}
    payload = {"format_version": CONFIG_VERSION, "tool_version": __version__,
               "argv": list(argv), "args": flags}
    (out / CONFIG_FILE).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _svg_line_plot(path: Path, xs: Sequence[float], ys: Sequence[float], xlabel: str, ylabel: str) -> None:
    w, h, pad = 480, 320, 50
    finite = [(x, y) for x, y in zip(xs, ys) if math.isfinite(y)]
    if not finite:
        raise RotiqError("nothing finite to plot")
    x0, x1 = min(x for x, _ in finite), max(x for x, _ in finite)
    y0, y1 = min(y for _, y in finite), max(y for _, y in finite)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def sy(y):
        return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad)

    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in finite)
    dots = "".join(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3"/>' for x, y in finite)
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
        f'<rect width="{w}" height="{h}" fill="white"/>'
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>'
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>'
        f'<g fill="steelblue">{dots}</g>'
        f'<text x="{w / 2}" y="{h - 12}" text-anchor="middle">{xlabel}</text>'
        f'<text x="14" y="{h / 2}" transform="rotate(-90 14 {h / 2})" text-anchor="middle">{ylabel}</text>'
        f'<text x="{pad}" y="{h - pad + 16}" text-anchor="middle">{_g(x0)}</text>'
        f'<text x="{w - pad}" y="{h - pad + 16}" text-anchor="middle">{_g(x1)}</text>'
        f'<text x="{pad - 4}" y="{h - pad}" text-anchor="end">{y0:.2f}</text>'
        f'<text x="{pad - 4}" y="{pad}" text-anchor="end">{y1:.2f}</text>'
        "</svg>\n")


# --------------------------------------------------------------------------
# commands

def cmd_dataset_gen(args: argparse.Namespace) -> int:
    from .data import SyntheticSpec, generate_dataset
    spec = SyntheticSpec(args.classes, args.size, args.size, args.noise, args.per_class,
                         args.seed, args.ring_width)
    manifest = generate_dataset(spec, args.out)
    print(f"wrote {manifest.count} images to {args.out}")
    return 0


def cmd_encode_preview(args: argparse.Namespace) -> int:
    from .data import load_arrays
    from .encoding import ImageGrid, build_sampling, encode, reconstruct_image, write_pgm
    manifest, images, labels = load_arrays(args.data)
    if not 0 <= args.index < manifest.count:
        raise RotiqError(f"index {args.index} outside the {manifest.count}-image dataset")
    image = ImageGrid.from_array(images[args.index])
    sampling = build_sampling(args.nrad, args.norb, image.width, image.height)
    state = encode(image, sampling).real
    xy = sampling.vertex_coords
    rows = []
    for r in range(sampling.n_radii):
        for k in range(sampling.n_angles):
            i = r * sampling.n_angles + k
            rows.append([i, r, k, _g(xy[r, k, 0]), _g(xy[r, k, 1]), _g(state[i])])
    out = Path(args.out)
    _write_rows(out / "samples.csv", ["index", "radius", "vertex", "x", "y", "amplitude"], rows)
    if args.pgm:
        write_pgm(out / "original.pgm", image)
        write_pgm(out / "reconstruction.pgm", reconstruct_image(state, sampling))
    print(f"label={labels[args.index]} amplitudes={len(rows)}")
    return 0


def _model_config(args: argparse.Namespace, dataset_classes: int | None):
    from .model import ModelConfig
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        raw.setdefault("seed", args.seed)
        return ModelConfig.from_dict(raw)
    missing = [f for f in ("nrad", "norb", "layers") if getattr(args, f) is None]
    if missing:
        raise RotiqError("without --config, --nrad, --norb and --layers are required")
    classes = args.classes if args.classes is not None else (dataset_classes or 1)
    return ModelConfig(args.nrad, args.norb, args.layers, args.arch.upper(), classes,
                       args.seed, args.orbital_rz, args.full_image)


def _split(count: int, val: int | None) -> tuple[slice, slice]:
    n_val = count // 5 if val is None else val
    if not 0 < n_val < count:
        raise RotiqError(f"validation size {n_val} leaves no training or validation data")
    return slice(0, count - n_val), slice(count - n_val, count)


def cmd_train(args: argparse.Namespace) -> int:
    from .data import load_arrays
    from .trainer import TrainConfig, prepare_states, train, write_metrics_csv
    loaded = load_arrays(args.data) if args.data is not None else None
    config = _model_config(args, loaded[0].spec.n_classes if loaded else None)
    tconfig = TrainConfig(args.epochs, args.batch, args.shuffle_seed if args.shuffle_seed is not None
                          else args.seed, args.eval_every, args.lr)
    if args.dry_run:
        print(f"qubits={config.n_qubits} params={config.n_params} "
              f"architecture={config.architecture.value} layers={config.layers} ok")
        return 0
    if loaded is None:
        raise RotiqError("--data is required unless --dry-run is given")
    manifest, images, labels = loaded
    if manifest.spec.n_classes > config.n_classes:
        raise RotiqError(f"dataset has {manifest.spec.n_classes} classes, model only {config.n_classes}")
    tr, va = _split(manifest.count, args.val)
    states = prepare_states(config, images)
    out = Path(args.out)

    def one(rep: int):
        return train(config, states[tr], labels[tr], states[va], labels[va], tconfig,
                     repeat=rep, out_dir=out / "checkpoints")

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(one, range(args.repeats)))
    rows = [row for res in results for row in res.metrics.rows]
    write_metrics_csv(out / "metrics.csv", rows)
    summary = []
    for i, first in enumerate(results[0].metrics.rows):
        accs = [res.metrics.rows[i].val_acc for res in results]
        losses = [res.metrics.rows[i].loss for res in results]
        summary.append([first.epoch, first.step, _g(np.mean(losses)), _g(np.mean(accs)),
                        _g(min(accs)), _g(max(accs))])
    _write_rows(out / "summary.csv", ["epoch", "step", "mean_loss", "mean_val_acc", "min_val_acc",
                                      "max_val_acc"], summary)
    finals = [res.metrics.final_accuracy() for res in results]
    print(f"final_val_acc mean={_g(np.mean(finals))} min={_g(min(finals))} max={_g(max(finals))}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .data import load_arrays
    from .model import build_circuit
    from .trainer import evaluate, load_checkpoint, prepare_states
    config, params, _, _ = load_checkpoint(args.checkpoint)
    manifest, images, labels = load_arrays(args.data)
    part = slice(0, manifest.count) if args.all else _split(manifest.count, args.val)[1]
    states = prepare_states(config, images[part])
    acc = evaluate(config, build_circuit(config), params, states, labels[part])
    _write_rows(Path(args.out) / "eval.csv", ["examples", "accuracy"], [[len(states), _g(acc)]])
    print(f"accuracy={_g(acc)} examples={len(states)}")
    return 0


def cmd_bp_scan(args: argparse.Namespace) -> int:
    from .analysis import BPScanConfig, VarianceReport, gradient_variance_scan
    config = BPScanConfig(tuple(args.n), args.rule, args.layers, args.samples, args.seed, args.input)

    def one(n: int):
        sub = BPScanConfig((n,), config.rule, config.layers, config.samples, config.seed,
                           config.input_state)
        return gradient_variance_scan(sub).rows[0]

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        report = VarianceReport(list(pool.map(one, config.qubits)))
    out = Path(args.out)
    report.write_csv(out / "bp_scan.csv")
    slope = report.slope if len(report.rows) > 1 else math.nan
    _write_rows(out / "bp_scan_fit.csv", ["rule", "log2_variance_slope"], [[str(config.rule), _g(slope)]])
    if args.svg:
        _svg_line_plot(out / "bp_scan.svg", [r.n for r in report.rows],
                       [math.log2(r.variance) if r.variance > 0 else -math.inf for r in report.rows],
                       "qubits n", "log2 Var[dl/dtheta]")
    for r in report.rows:
        print(f"n={r.n} n_rad={r.n_rad} variance={_g(r.variance)} se={_g(r.variance_se)}")
    print(f"slope={_g(slope)}")
    return 0


def cmd_moments(args: argparse.Namespace) -> int:
    from .analysis import estimate_loss_moments, input_state
    from .model import ModelConfig
    from .pauli import predicted_moments
    state = input_state(args.input, args.nrad, args.norb, args.seed)
    pred = predicted_moments(state, args.y, args.nrad, args.norb)
    n = args.nrad + args.norb
    printed = 2.0 ** (n - 1) / 4.0 ** (args.nrad - 1) * pred.semisimple_purity
    rows = []
    for layers in args.layers:
        est = estimate_loss_moments(ModelConfig(args.nrad, args.norb, layers, seed=args.seed),
                                    state, args.y, args.samples, args.seed)
        rel = abs(est.variance - pred.variance) / pred.variance if pred.variance > 0 else math.nan
        rows.append([layers, est.samples, _g(est.mean), _g(est.mean_se), _g(est.variance),
                     _g(est.variance_se), _g(pred.mean), _g(pred.variance), _g(printed), _g(rel)])
        print(f"layers={layers} mean={_g(est.mean)}+-{_g(est.mean_se)} variance={_g(est.variance)}"
              f"+-{_g(est.variance_se)} predicted={_g(pred.variance)}")
    _write_rows(Path(args.out) / "moments.csv",
                ["layers", "samples", "mean", "mean_se", "variance", "variance_se", "predicted_mean",
                 "predicted_variance", "printed_form_variance", "relative_deviation"], rows)
    return 0


def cmd_dla_verify(args: argparse.Namespace) -> int:
    from .pauli import verify_dla
    rep = verify_dla(args.nrad, args.norb, include_phase=not args.no_phase)
    print(f"computed={rep.computed_dim} formula={rep.formula_dim} match={str(rep.matched).lower()}")
    if args.out:
        _write_rows(Path(args.out) / "dla.csv",
                    ["n_rad", "n_orb", "computed", "formula", "raw_closure", "phase_included", "match"],
                    [[rep.n_rad, rep.n_orb, rep.computed_dim, rep.formula_dim, rep.raw_dim,
                      str(rep.phase_included).lower(), str(rep.matched).lower()]])
    return 0 if rep.matched else 1


def cmd_dla_closure(args: argparse.Namespace) -> int:
    from .pauli import equivariant_generators, lie_closure, write_operators
    span = lie_closure(equivariant_generators(args.nrad, args.norb), dim_cap=args.cap)
    path = Path(args.out) / "closure.txt"
    write_operators(path, span.basis, f"orthonormal basis of the Lie closure, n_rad={args.nrad} "
                                      f"n_orb={args.norb} dim={span.dim}")
    print(f"dim={span.dim} capped={str(span.capped).lower()} written={path}")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    raw = json.loads(Path(args.config).read_text())
    if raw.get("format_version") != CONFIG_VERSION:
        raise RotiqError(f"config format version {raw.get('format_version')!r}, "
                         f"this tool reads {CONFIG_VERSION}")
    argv = list(raw["argv"])
    if args.out is not None:
        argv = _replace_flag(argv, "--out", args.out)
    return main(argv)


def _replace_flag(argv: list[str], flag: str, value: str) -> list[str]:
    out = []
    skip = False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag + "="):
            continue
        out.append(a)
    return out + [flag, value]


# --------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rotiq", description="Rotation-equivariant quantum classifiers: data, "
                                          "training and trainability experiments.")
    p.add_argument("--version", action="version", version=f"rotiq {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="command")

    def seeded(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")

    def threaded(sp):
        sp.add_argument("--threads", type=_positive, default=os.cpu_count() or 1,
                        help="parallel workers; results do not depend on it")

    ds = sub.add_parser("dataset", help="synthetic dataset tools")
    ds_sub = ds.add_subparsers(dest="action", parser_class=_Parser, metavar="action")
    gen = ds_sub.add_parser("gen", help="generate a labelled synthetic dataset")
    gen.add_argument("--out", required=True)
    gen.add_argument("--classes", type=int, default=4)
    gen.add_argument("--size", type=int, default=32, help="image width and height")
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--per-class", type=int, default=128)
    gen.add_argument("--ring-width", type=float, default=0.1)
    seeded(gen)
    gen.set_defaults(func=cmd_dataset_gen)

    ep = sub.add_parser("encode-preview", help="dump the polygon samples of one image")
    ep.add_argument("--data", required=True)
    ep.add_argument("--index", type=int, default=0)
    ep.add_argument("--nrad", type=int, required=True)
    ep.add_argument("--norb", type=int, required=True)
    ep.add_argument("--out", required=True)
    ep.add_argument("--pgm", action="store_true", help="also write original and reconstruction")
    ep.set_defaults(func=cmd_encode_preview)

    tr = sub.add_parser("train", help="train a classifier with ADAM")
    tr.add_argument("--config", help="model config JSON (fields of ModelConfig)")
    tr.add_argument("--nrad", type=int)
    tr.add_argument("--norb", type=int)
    tr.add_argument("--layers", type=int)
    tr.add_argument("--arch", choices=["equivariant", "generic"], default="equivariant")
    tr.add_argument("--classes", type=int, default=None, help="default: the dataset's class count")
    tr.add_argument("--orbital-rz", action="store_true")
    tr.add_argument("--full-image", action="store_true")
    tr.add_argument("--data")
    tr.add_argument("--val", type=int, default=None, help="last N images form the validation split")
    tr.add_argument("--epochs", type=int, default=10)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--batch", type=_positive, default=32)
    tr.add_argument("--eval-every", type=int, default=0)
    tr.add_argument("--shuffle-seed", type=int, default=None)
    tr.add_argument("--repeats", type=_positive, default=1)
    tr.add_argument("--out", default="run")
    tr.add_argument("--dry-run", action="store_true", help="validate the configuration only")
    seeded(tr)
    threaded(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--val", type=int, default=None)
    ev.add_argument("--all", action="store_true", help="evaluate every image, not only the validation split")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    bp = sub.add_parser("bp-scan", help="gradient variance versus qubit count")
    bp.add_argument("--rule", required=True, help="fixed:K, prop:R or log:C")
    bp.add_argument("--n", type=_qubit_range, required=True, help="e.g. 4..12")
    bp.add_argument("--layers", type=_positive, default=32)
    bp.add_argument("--samples", type=int, default=1000)
    bp.add_argument("--input", choices=["image", "zero", "plus"], default="image")
    bp.add_argument("--out", required=True)
    bp.add_argument("--svg", action="store_true", help="also draw log2 variance against n")
    seeded(bp)
    threaded(bp)
    bp.set_defaults(func=cmd_bp_scan)

    mo = sub.add_parser("moments", help="Monte-Carlo loss moments against the closed form")
    mo.add_argument("--nrad", type=int, required=True)
    mo.add_argument("--norb", type=int, required=True)
    mo.add_argument("--layers", type=_int_list, default=[4, 16, 64])
    mo.add_argument("--samples", type=int, default=1000)
    mo.add_argument("--y", type=int, default=1, help="1-based class whose loss is sampled")
    mo.add_argument("--input", choices=["image", "zero", "plus"], default="image")
    mo.add_argument("--out", required=True)
    seeded(mo)
    mo.set_defaults(func=cmd_moments)

    dla = sub.add_parser("dla", help="dynamical Lie algebra tools")
    dla_sub = dla.add_subparsers(dest="action", parser_class=_Parser, metavar="action")
    ver = dla_sub.add_parser("verify", help="closure dimension against the closed form")
    ver.add_argument("--nrad", type=int, required=True)
    ver.add_argument("--norb", type=int, required=True)
    ver.add_argument("--no-phase", action="store_true", help="report the raw closure only")
    ver.add_argument("--out")
    ver.set_defaults(func=cmd_dla_verify)
    clo = dla_sub.add_parser("closure", help="write an orthonormal basis of the closure")
    clo.add_argument("--nrad", type=int, required=True)
    clo.add_argument("--norb", type=int, required=True)
    clo.add_argument("--cap", type=int, default=None)
    clo.add_argument("--out", required=True)
    clo.set_defaults(func=cmd_dla_closure)

    rp = sub.add_parser("replay", help="rerun a command from its config.json")
    rp.add_argument("config")
    rp.add_argument("--out", default=None, help="write outputs here instead of the original location")
    rp.set_defaults(func=cmd_replay)
    return p


def _canonical_argv(argv: list[str], args: argparse.Namespace) -> list[str]:
    if hasattr(args, "seed") and "--seed" not in argv and not any(a.startswith("--seed=") for a in argv):
        return argv + ["--seed", str(args.seed)]
    return argv


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        target = parser
        if args.command is not None:
            target = parser._subparsers._group_actions[0].choices[args.command]
        target.print_help(sys.stderr)
        return 2
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        if args.func is not cmd_replay and getattr(args, "out", None) and not getattr(args, "dry_run", False):
            _write_echo(Path(args.out), _canonical_argv(argv, args), args)
        return args.func(args)
    except (RotiqError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"rotiq: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
