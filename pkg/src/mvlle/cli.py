"""Command-line front end: ``mvlle synth | fit | eval``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
Diagnostics go to stderr; results go to files in ``--out``.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_views, read_labels, synth_multiview, write_matrix, write_views
from .evaluate import classify_embedding, concat_embeddings, retrieval_protocol
from .graphs import CONSENSUS_KINDS, KERNELS, SOURCES, ConsensusVariant, KernelSpec
from .solver import PREPROCESSING, FitConfig, fit

logger = logging.getLogger("mvlle")

_DEFAULTS = FitConfig()
_EMBEDDING_HEADER = "# embedding: {d} rows (dimensions) x {n} columns (samples)"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _path_list(text):
    return [p.strip() for p in str(text).split(",") if p.strip()]


def _bandwidth(text):
    if text == "median":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be a number or 'median', got {text!r}") from None


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="mvlle", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic multi-view dataset", formatter_class=fmt)
    p.add_argument("--n", type=int, default=100, help="number of samples")
    p.add_argument("--views", type=int, default=2, help="number of views")
    p.add_argument("--classes", type=int, default=3, help="number of classes")
    p.add_argument("--latent-dim", type=int, default=2, help="latent dimension")
    p.add_argument("--view-dims", type=_int_list, default=None, help="comma-separated feature count per view (default: 5 each)")
    p.add_argument("--noise", type=float, default=0.0, help="isotropic noise standard deviation")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", default=None, help="output directory (required)")
    p.add_argument("--config", default=None, help="key=value file of defaults; flags override it")

    p = sub.add_parser("fit", help="fit multi-view embeddings", formatter_class=fmt)
    p.add_argument("--views", type=_path_list, default=None, help="comma-separated view CSV files (required)")
    p.add_argument("--labels", default=None, help="label file, one label per line (recorded in the manifest)")
    p.add_argument("--has-header", type=_bool, nargs="?", const=True, default=False, help="view files start with a header row")
    p.add_argument("--k", type=int, default=_DEFAULTS.k, help="neighbours per sample")
    p.add_argument("--dims", type=_int_list, default=[_DEFAULTS.dims], help="embedding dimension, one value or one per view")
    p.add_argument("--lambda-c", type=float, default=_DEFAULTS.lambda_c, help="consensus weight")
    p.add_argument("--lambda-r", type=float, default=_DEFAULTS.lambda_r, help="smoothness weight (recorded, no effect)")
    p.add_argument("--kernel", choices=KERNELS, default=_DEFAULTS.kernel.kind, help="similarity kernel")
    p.add_argument("--degree", type=int, default=_DEFAULTS.kernel.degree, help="polynomial kernel degree")
    p.add_argument("--offset", type=float, default=_DEFAULTS.kernel.offset, help="polynomial kernel offset")
    p.add_argument("--bandwidth", type=_bandwidth, default=_DEFAULTS.kernel.bandwidth, help="gaussian bandwidth or 'median'")
    p.add_argument("--variant", choices=CONSENSUS_KINDS, default=_DEFAULTS.variant.kind, help="consensus operator")
    p.add_argument("--source", choices=SOURCES, default=_DEFAULTS.variant.source, help="build consensus graphs from embeddings or inputs")
    p.add_argument("--tol", type=float, default=_DEFAULTS.tol, help="relative objective change for convergence")
    p.add_argument("--max-sweeps", type=int, default=_DEFAULTS.max_sweeps, help="sweep limit")
    p.add_argument("--skip-trivial", type=_bool, default=_DEFAULTS.skip_trivial, help="drop the constant eigenvector")
    p.add_argument("--eps-reg", type=float, default=_DEFAULTS.eps_reg, help="relative regularization of local Gram matrices")
    p.add_argument("--preprocess", choices=PREPROCESSING, default=_DEFAULTS.preprocess, help="per-view feature scaling")
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed, help="seed recorded in the manifest")
    p.add_argument("--out", default=None, help="output directory (required)")
    p.add_argument("--config", default=None, help="key=value file of defaults; flags override it")

    p = sub.add_parser("eval", help="evaluate embeddings against labels", formatter_class=fmt)
    p.add_argument("--embeddings", type=_path_list, default=None, help="comma-separated embedding CSVs written by fit (required)")
    p.add_argument("--labels", default=None, help="label file (required)")
    p.add_argument("--task", choices=("classify", "retrieve"), default="classify", help="evaluation task")
    p.add_argument("--train-ratio", type=float, default=0.5, help="training fraction per split")
    p.add_argument("--repeats", type=int, default=30, help="number of random splits")
    p.add_argument("--seed", type=int, default=0, help="split seed; repeat r uses seed + r")
    p.add_argument("--metric", choices=("l1", "l2"), default=None, help="distance (default: l2 to classify, l1 to retrieve)")
    p.add_argument("--top-k", type=int, default=2, help="retrieval cutoff")
    p.add_argument("--out", default=None, help="output directory (required)")
    p.add_argument("--config", default=None, help="key=value file of defaults; flags override it")
    return parser


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required: synth, fit or eval")
    if args.config:
        sub = _subparser(parser, args.command)
        known = {a.dest: a for a in sub._actions}
        overrides = {}
        for key, value in read_config(args.config).items():
            if key not in known or key in ("config", "help"):
                sub.error(f"unknown key {key!r} in {args.config}")
            action = known[key]
            conv = action.type or str
            try:
                overrides[key] = conv(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                sub.error(f"bad value for {key} in {args.config}: {exc}")
            if action.choices is not None and overrides[key] not in action.choices:
                sub.error(f"{key} in {args.config} must be one of {sorted(action.choices)}")
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    for name in {"synth": ("out",), "fit": ("views", "out"), "eval": ("embeddings", "labels", "out")}[args.command]:
        if getattr(args, name) is None:
            _subparser(parser, args.command).error(f"--{name.replace('_', '-')} is required")
    return args


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def config_from_args(args) -> FitConfig:
    dims = args.dims[0] if len(args.dims) == 1 else tuple(args.dims)
    return FitConfig(
        k=args.k,
        dims=dims,
        lambda_c=args.lambda_c,
        lambda_r=args.lambda_r,
        kernel=KernelSpec(args.kernel, args.degree, args.offset, args.bandwidth),
        variant=ConsensusVariant(args.variant, args.source),
        tol=args.tol,
        max_sweeps=args.max_sweeps,
        skip_trivial=args.skip_trivial,
        eps_reg=args.eps_reg,
        preprocess=args.preprocess,
        seed=args.seed,
    )


def _resolved_flags(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "verbose")}


def run_synth(args) -> None:
    n_views = args.views
    dims = args.view_dims or [5] * n_views
    ds = synth_multiview(args.n, n_views, args.classes, args.latent_dim, dims, args.noise, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {
        "command": "synth",
        "config": _resolved_flags(args),
        "seed": args.seed,
        "version": __version__,
        "started": _now(),
    })
    write_views(ds, out)
    logger.info("wrote %d views of %d samples to %s", n_views, args.n, out)


def run_fit(args) -> None:
    config = config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = list(args.views) + ([args.labels] if args.labels else [])
    _write_json(out / "manifest.json", {
        "command": "fit",
        "config": _resolved_flags(args),
        "inputs": {str(p): _digest(p) for p in inputs},
        "seed": config.seed,
        "version": __version__,
        "started": _now(),
    })
    dataset = load_views(args.views, args.labels, has_header=args.has_header)
    result = fit(dataset, config)
    logger.info("fit finished after %d sweeps (converged=%s)", result.sweeps, result.converged)

    # results land only after the whole fit succeeded
    for v, U in enumerate(result.embeddings):
        write_matrix(out / f"embedding_{v}.csv", U, _EMBEDDING_HEADER.format(d=U.shape[0], n=U.shape[1]))
    tmp = out / ".convergence.csv.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("sweep,objective\n")
        for sweep, value in enumerate(result.objective_trace):
            fh.write(f"{sweep},{format(value, '.17g')}\n")
    os.replace(tmp, out / "convergence.csv")
    _write_json(out / "summary.json", {
        "converged": result.converged,
        "sweeps": result.sweeps,
        "objective_final": result.objective_final,
    })


def read_embedding(path) -> np.ndarray:
    """Load a ``d x N`` embedding CSV written by ``fit`` (comment lines skipped)."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", dtype=float, ndmin=2))


def run_eval(args) -> None:
    labels = read_labels(args.labels)
    embeddings = [read_embedding(p) for p in args.embeddings]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {
        "command": "eval",
        "config": _resolved_flags(args),
        "inputs": {str(p): _digest(p) for p in [*args.embeddings, args.labels]},
        "seed": args.seed,
        "version": __version__,
        "started": _now(),
    })

    def score(E):
        if args.task == "classify":
            rep = classify_embedding(E, labels, args.train_ratio, args.repeats, args.seed, args.metric or "l2")
            return {"mean_accuracy": rep.mean_accuracy, "max_accuracy": rep.max_accuracy, "repeats": rep.repeats}
        rep = retrieval_protocol(E, labels, args.top_k, args.metric or "l1")
        return {
            "precision": rep.precision,
            "recall": rep.recall,
            "map": rep.map,
            "f1_standard": rep.f1_standard,
            "f1_paper": rep.f1_paper,
            "top_k": rep.top_k,
        }

    report = score(concat_embeddings(embeddings))
    if len(embeddings) > 1:
        for v, E in enumerate(embeddings):
            report.update({f"view_{v}.{key}": value for key, value in score(E).items()})
    _write_json(out / "report.json", report)


def dispatch(argv=None) -> int:
    """Run one command; returns the process exit status."""
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    runner = {"synth": run_synth, "fit": run_fit, "eval": run_eval}[args.command]
    try:
        runner(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"mvlle {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
