"""Command-line entry point for reproducible similarity runs.

Subcommands: ``gen`` (synthetic datasets), ``train`` (learned measures),
``eval`` (1-NN accuracy), ``dist`` (dissimilarity matrix export),
``gradcheck`` (finite-difference verification of the training gradients)
and ``rerun`` (re-execute a previously written resolved config).

Every run writes its fully resolved configuration as ``config.json``
next to its outputs; re-executing that file reproduces the outputs
bitwise for the same package version.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    Dataset,
    SyntheticSpec,
    gen_synthetic,
    load_dataset,
    save_dataset,
    split,
    znormalize_dataset,
)
from .elastic import dtw, euclidean, twed
from .evaluate import accuracy_line, distance_matrix, nn_classify, write_matrix_csv
from .nn.optim import DivergenceError
from .seeding import substream
from .warping import (
    _allpairs_forward,
    _diag_forward,
    encode,
    encoder_config,
    load_model,
    pair_loss_gradient_check,
    save_model,
    train_similarity,
    warper_config,
)

CLASSIC_MEASURES = ("dtw", "twed", "euclidean")
LEARNED_MEASURES = ("siamese-cnn", "siamese-rnn", "neuralwarp-cnn", "neuralwarp-rnn")
MEASURES = CLASSIC_MEASURES + LEARNED_MEASURES


def _write_run_config(out_dir: Path, command: str, args) -> None:
    options = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    blob = {"version": __version__, "command": command, "options": options}
    (out_dir / "config.json").write_text(
        json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _prepare_out(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path: str, fmt: str, znorm: bool, pad_to=None, truncate=None) -> Dataset:
    if pad_to is not None and pad_to != "max":
        pad_to = int(pad_to)
    dataset = load_dataset(path, fmt, pad_to=pad_to, truncate=truncate)
    return znormalize_dataset(dataset) if znorm else dataset


class LearnedMeasure:
    """Log-domain similarity scorer around a trained checkpoint.

    Encodings are memoized per series object, so repeated 1-NN and
    matrix evaluations encode each instance once.
    """

    def __init__(self, store, enc_cfg, warper_cfg, symmetrize: bool = False):
        self.store = store
        self.enc_cfg = enc_cfg
        self.warper_cfg = warper_cfg
        self.symmetrize = symmetrize
        self._cache: dict[int, tuple[object, np.ndarray]] = {}

    def _encode(self, series) -> np.ndarray:
        key = id(series)
        hit = self._cache.get(key)
        if hit is None:
            hit = (series, encode(series, self.store, self.enc_cfg, "eval"))
            self._cache[key] = hit
        return hit[1]

    def _log_score(self, ea, eb) -> float:
        if self.warper_cfg is not None:
            log_s, _ = _allpairs_forward(ea[None], eb[None], self.store, self.warper_cfg)
        else:
            log_s, _ = _diag_forward(ea[None], eb[None])
        return float(log_s[0])

    def __call__(self, a, b) -> float:
        ea, eb = self._encode(a), self._encode(b)
        forward = self._log_score(ea, eb)
        if not self.symmetrize:
            return forward
        return float(np.logaddexp(forward, self._log_score(eb, ea)) - np.log(2.0))


def _build_measure(args, parser: argparse.ArgumentParser):
    name = args.measure
    if name in CLASSIC_MEASURES:
        if args.checkpoint:
            parser.error(f"measure {name!r} is non-parametric and takes no --checkpoint")
        if name == "dtw":
            band = args.band
            return (lambda a, b: dtw(a, b, band)[0]), "distance"
        if name == "twed":
            nu, lam = args.twed_stiffness, args.twed_penalty
            return (lambda a, b: twed(a, b, nu, lam)), "distance"
        return euclidean, "distance"
    if not args.checkpoint:
        parser.error(f"measure {name!r} is learned and requires --checkpoint")
    store, enc_cfg, warper_cfg, extra = load_model(args.checkpoint)
    trained_as = extra.get("measure")
    if trained_as and trained_as != name:
        parser.error(f"checkpoint was trained as {trained_as!r}, not {name!r}")
    return LearnedMeasure(store, enc_cfg, warper_cfg, args.symmetrize), "similarity"


def _write_loss_csv(trace, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for iteration, raw, smoothed in trace:
            fh.write(f"{iteration},{raw!r},{smoothed!r}\n")


# ------------------------------------------------------------- commands


def cmd_gen(args, parser) -> int:
    if min(args.classes, args.per_class, args.len, args.channels) < 1:
        parser.error("--classes, --per-class, --len and --channels must be positive")
    if args.shift >= args.len:
        parser.error("--shift must be smaller than --len")
    out = _prepare_out(args.out)
    spec = SyntheticSpec(
        num_classes=args.classes,
        instances_per_class=args.per_class,
        length=args.len,
        channels=args.channels,
        shift_range=args.shift,
        warp_strength=args.warp,
        noise_sigma=args.noise,
    )
    dataset = gen_synthetic(spec, substream(args.seed, "gen"))
    save_dataset(dataset, out / "dataset.mts")
    try:
        train_part, test_part = split(dataset, args.test_fraction, args.seed)
        save_dataset(train_part, out / "train.mts")
        save_dataset(test_part, out / "test.mts")
        note = f" (train {len(train_part)}, test {len(test_part)})"
    except ValueError:
        note = " (too small for a split; train.mts/test.mts not written)"
    _write_run_config(out, "gen", args)
    print(f"wrote {len(dataset)} instances to {out / 'dataset.mts'}" + note)
    return 0


def cmd_train(args, parser) -> int:
    if args.measure not in LEARNED_MEASURES:
        parser.error(f"measure {args.measure!r} is non-parametric and takes no training")
    if args.iters is None:
        args.iters = 10_000 if args.scale == "desk" else 1_000_000
    if args.batch_pairs is None:
        args.batch_pairs = 30 if args.scale == "desk" else 100
    if args.batch_pairs < 2 or args.batch_pairs % 2:
        parser.error("--batch-pairs must be an even number >= 2")
    out = _prepare_out(args.out)
    dataset = _load(args.data, args.format, args.znorm, args.pad_to, args.truncate)
    kind = args.measure.rsplit("-", 1)[1]
    enc_cfg = encoder_config(kind, args.scale)
    warper_cfg = warper_config(args.scale) if args.measure.startswith("neuralwarp") else None
    result = train_similarity(
        dataset,
        enc_cfg,
        warper_cfg,
        iterations=args.iters,
        pairs_per_side=args.batch_pairs // 2,
        lr=args.lr,
        seed=args.seed,
        log_every=args.log_every,
    )
    save_model(
        result.store,
        enc_cfg,
        warper_cfg,
        out / "model.ckpt",
        extra={"measure": args.measure, "scale": args.scale, "seed": args.seed,
               "learning_rate": result.learning_rate, "restarted": result.restarted},
    )
    _write_loss_csv(result.trace, out / "loss.csv")
    _write_run_config(out, "train", args)
    final = result.trace[-1][2] if result.trace else float("nan")
    print(f"trained {args.measure} for {args.iters} iterations "
          f"(rate {result.learning_rate}, final smoothed loss {final:.6f})")
    return 0


def cmd_eval(args, parser) -> int:
    measure, semantics = _build_measure(args, parser)
    out = _prepare_out(args.out)
    train_set = _load(args.train_data, args.format, args.znorm, args.pad_to, args.truncate)
    test_set = _load(args.test_data, args.format, args.znorm, args.pad_to, args.truncate)
    accuracy, _ = nn_classify(train_set, test_set, measure, semantics, jobs=args.jobs)
    line = accuracy_line(args.measure, Path(args.test_data).stem, len(train_set), len(test_set), accuracy)
    (out / "accuracy.csv").write_text(line + "\n", encoding="utf-8")
    _write_run_config(out, "eval", args)
    print(line)
    return 0


def cmd_dist(args, parser) -> int:
    measure, semantics = _build_measure(args, parser)
    out = _prepare_out(args.out)
    dataset = _load(args.data, args.format, args.znorm, args.pad_to, args.truncate)
    matrix = distance_matrix(dataset, measure, semantics, jobs=args.jobs)
    write_matrix_csv(matrix, out / "dist.csv")
    _write_run_config(out, "dist", args)
    print(f"wrote {matrix.values.shape[0]}x{matrix.values.shape[1]} matrix to {out / 'dist.csv'}")
    return 0


def cmd_gradcheck(args, parser) -> int:
    lines = []
    passed = True
    for kind in ("cnn", "rnn"):
        enc_cfg = encoder_config(kind, args.scale)
        warper_cfg = warper_config(args.scale)
        err = float(pair_loss_gradient_check(enc_cfg, warper_cfg, t=8, channels=1, seed=args.seed))
        ok = err < args.threshold
        passed = passed and ok
        lines.append(f"{kind},{err!r},{'PASS' if ok else 'FAIL'}")
    for line in lines:
        print(line)
    if args.out:
        out = _prepare_out(args.out)
        (out / "gradcheck.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        _write_run_config(out, "gradcheck", args)
    return 0 if passed else 1


def cmd_rerun(args, parser) -> int:
    blob = json.loads(Path(args.config).read_text(encoding="utf-8"))
    command = blob["command"]
    options = dict(blob["options"])
    options["out"] = args.out
    argv = [command] + _options_to_argv(options)
    return main(argv)


def _options_to_argv(options: dict) -> list[str]:
    argv = []
    for key, value in sorted(options.items()):
        if value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    return argv


# --------------------------------------------------------------- parser


def _add_data_flags(sub, *names):
    for name in names:
        sub.add_argument(name, required=True, help="dataset file")
    sub.add_argument("--format", choices=("mts-v1", "ucr-tsv"), default="mts-v1")
    sub.add_argument("--znorm", action="store_true", help="z-normalize each channel at load")
    sub.add_argument("--pad-to", default=None, help="'max' or an integer target length for ragged input")
    sub.add_argument("--truncate", type=int, default=None, help="cut rows down to this length")


def _add_measure_flags(sub):
    sub.add_argument("--measure", choices=MEASURES, required=True)
    sub.add_argument("--checkpoint", default=None, help="trained model (learned measures only)")
    sub.add_argument("--band", type=int, default=None, help="restrict DTW to |i-j| <= band")
    sub.add_argument("--twed-stiffness", type=float, default=0.001)
    sub.add_argument("--twed-penalty", type=float, default=1.0)
    sub.add_argument("--symmetrize", action="store_true",
                     help="average the learned score over both argument orders")
    sub.add_argument("--jobs", type=int, default=1, help="parallel workers for scoring")


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"warpsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate a synthetic dataset (plus a stratified split)")
    gen.add_argument("--classes", type=int, required=True)
    gen.add_argument("--per-class", type=int, required=True)
    gen.add_argument("--len", type=int, required=True)
    gen.add_argument("--channels", type=int, default=1)
    gen.add_argument("--shift", type=int, default=8, help="max circular shift and per-event position jitter")
    gen.add_argument("--warp", type=float, default=0.2, help="warp strength: background resampling and event duration jitter")
    gen.add_argument("--noise", type=float, default=0.1, help="white noise std")
    gen.add_argument("--test-fraction", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    train = subs.add_parser("train", help="train a learned similarity measure")
    _add_data_flags(train, "--data")
    train.add_argument("--measure", choices=MEASURES, required=True)
    train.add_argument("--scale", choices=("desk", "paper"), default="desk")
    train.add_argument("--iters", type=int, default=None, help="default: 10000 desk, 1000000 paper")
    train.add_argument("--batch-pairs", type=int, default=None, help="total pairs per batch; default: 30 desk, 100 paper")
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--log-every", type=int, default=0)
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="1-NN accuracy of a measure")
    _add_data_flags(ev, "--train-data", "--test-data")
    _add_measure_flags(ev)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    dist = subs.add_parser("dist", help="export the pairwise dissimilarity matrix")
    _add_data_flags(dist, "--data")
    _add_measure_flags(dist)
    dist.add_argument("--out", required=True)
    dist.set_defaults(func=cmd_dist)

    grad = subs.add_parser("gradcheck", help="finite-difference check of the training gradients")
    grad.add_argument("--scale", choices=("desk",), default="desk")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--threshold", type=float, default=1e-3)
    grad.add_argument("--out", default=None)
    grad.set_defaults(func=cmd_gradcheck)

    rerun = subs.add_parser("rerun", help="re-execute a resolved config file")
    rerun.add_argument("--config", required=True)
    rerun.add_argument("--out", required=True)
    rerun.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
