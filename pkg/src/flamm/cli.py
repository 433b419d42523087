"""flamm: second-moment-matching feature learning for domain adaptation.

Subcommands: ingest, fit, transform, train, eval, grid, curve, run.

Every option can also come from ``--config FILE``, a flat ``key = value``
file whose keys mirror the long flags (``gamma1 = 10,20,30``,
``reg-c = 1``).  Flags given on the command line win over the file.

Raw corpora are read either from a directory tree
``<split>/<label>/<docid>.txt`` (labels: pos/neg, +1/-1, 1/0, spam/ham,
or ``unlabeled``) or from a manifest whose lines are
``<split> <label> <path>``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
import zipfile
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import CoralModel, PcaModel, coral_align, pca_fit, pca_transform
from .classifier import LOSSES, accuracy, load_model, save_model, train
from .data import ingest, read_labeled, read_sparse, scan_corpus_dir, scan_manifest, write_sparse
from .errors import FlammError, InvalidInputError
from .experiment import (AMAZON_GAMMAS, METHODS, PCA_DIMS, SPAM_GAMMAS, ExperimentConfig,
                         candidate_grid, choose_params, distance_curve, fit_method_stack,
                         format_curve, holdout, load_dataset, run_on_dataset)
from .stack import STACK_MAGIC, apply_stack, load_stack, save_stack

log = logging.getLogger("flamm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(FlammError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_PRESETS = {"amazon": AMAZON_GAMMAS, "spam": SPAM_GAMMAS}


def float_list(text):
    text = str(text).strip()
    if text.lower() in _PRESETS:
        return _PRESETS[text.lower()]
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_list(text):
    text = str(text).strip()
    if text.lower() == "default":
        return PCA_DIMS
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# dest -> converter for options that may appear in a config file
_OPTIONS = {
    "source": str, "target": str, "target_unlabeled": str, "method": str,
    "gamma1": float_list, "gamma2": float_list, "layers": int_list,
    "pca_dim": int_list, "coral_lambda": float_list, "val_size": int,
    "seed": int, "reg_c": float, "loss": str, "out": str, "format": str,
    "gamma2_scale_by_n": _bool, "model": str, "input": str, "side": str,
    "corpus": str, "manifest": str, "vocab_size": int, "idf_splits": str,
}


def read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().lstrip("-").replace("-", "_")
            if key not in _OPTIONS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _OPTIONS[key](value.strip())
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def _common(p):
    p.add_argument("--config", help="flat key = value file mirroring these flags")
    p.add_argument("--source", help="labeled source sparse file")
    p.add_argument("--target", help="target sparse file (labeled pool)")
    p.add_argument("--target-unlabeled", dest="target_unlabeled",
                   help="extra unlabeled target samples used for feature learning")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--gamma1", type=float_list, help="comma list, or 'amazon'/'spam'")
    p.add_argument("--gamma2", type=float_list, help="comma list, or 'amazon'/'spam'")
    p.add_argument("--layers", type=int_list, help="layer count(s) K")
    p.add_argument("--pca-dim", dest="pca_dim", type=int_list,
                   help="comma list, or 'default' for 50,100,...,300")
    p.add_argument("--coral-lambda", dest="coral_lambda", type=float_list)
    p.add_argument("--gamma2-scale-by-n", dest="gamma2_scale_by_n", type=_bool,
                   help="multiply gamma2 by the sample count (default true)")
    p.add_argument("--val-size", dest="val_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--reg-c", dest="reg_c", type=float)
    p.add_argument("--loss", choices=LOSSES)
    p.add_argument("--out", help="output path (stdout when omitted, where allowed)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="flamm", description=__doc__.split("\n\n")[0],
                     epilog=__doc__.split("\n\n", 1)[1],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"flamm {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p)
        return p

    p = add("ingest", "tokenize a raw corpus and write tf-idf sparse files per split")
    p.add_argument("--corpus", help="directory laid out as <split>/<label>/<docid>.txt")
    p.add_argument("--manifest", help="file of '<split> <label> <path>' lines")
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--idf-splits", dest="idf_splits",
                   help="comma list of splits to fit idf on (default: all)")

    add("fit", "learn a representation (sfl/flamm stack, pca or coral) and save it")

    p = add("transform", "apply a saved representation to a sparse file")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--side", choices=("source", "target"),
                   help="for coral models: align as source or pass through as target")

    add("train", "train the linear classifier on a labeled sparse file")

    p = add("eval", "score a saved classifier on a labeled sparse file")
    p.add_argument("--model")

    add("grid", "select hyperparameters on a target validation subset")
    add("curve", "emit per-layer moment-gap distances")
    add("run", "select, fit, train and evaluate end to end")
    return parser


def resolve(args):
    """Merge config file values under explicit flags."""
    merged = {}
    if args.config:
        merged.update(read_config(args.config))
    for key in _OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def experiment_config(opts):
    fields = ExperimentConfig.__dataclass_fields__
    kwargs = {k: v for k, v in opts.items() if k in fields}
    try:
        return ExperimentConfig(**kwargs)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require(opts, *keys):
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _single(config):
    grid = candidate_grid(config)
    if len(grid) != 1:
        raise UsageError(f"expected a single parameter setting, got {len(grid)}; "
                         "use 'grid' or 'run' to select among several")
    return grid[0]


def cmd_ingest(opts):
    _require(opts, "out")
    if bool(opts.get("corpus")) == bool(opts.get("manifest")):
        raise UsageError("give exactly one of --corpus or --manifest")
    docs = scan_corpus_dir(opts["corpus"]) if opts.get("corpus") else scan_manifest(opts["manifest"])
    splits = opts.get("idf_splits")
    splits = {s.strip() for s in splits.split(",") if s.strip()} if splits else None
    summary = ingest(docs, opts["out"], vocab_size=opts.get("vocab_size", 5000),
                     idf_splits=splits)
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_fit(opts):
    _require(opts, "source", "target", "out")
    config = experiment_config(opts)
    params = _single(config)
    data = load_dataset(config)
    Xs, Xt = data.source.X, data.target_all
    if config.method in ("sfl", "flamm"):
        model, _ = fit_method_stack(config.method, params, Xs, Xt, config.gamma2_scale_by_n)
        save_stack(model, config.out)
    elif config.method == "pca":
        model = pca_fit(np.hstack([Xs, Xt]), min(params["pca_dim"], Xs.shape[0]))
        np.savez(config.out, kind="pca", mean=model.mean, basis=model.basis,
                 eigenvalues=model.eigenvalues)
    elif config.method == "coral":
        model, _ = coral_align(Xs, Xt, params["coral_lambda"])
        np.savez(config.out, kind="coral", whiten=model.whiten, recolor=model.recolor,
                 lam=model.lam, source_mean=model.source_mean,
                 target_mean=model.target_mean)
    else:
        raise UsageError("the raw method has nothing to fit")


def _load_representation(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == STACK_MAGIC:
        return load_stack(path)
    if zipfile.is_zipfile(path):
        with np.load(path) as z:
            kind = str(z["kind"])
            if kind == "pca":
                return PcaModel(z["mean"], z["basis"], z["eigenvalues"])
            if kind == "coral":
                return CoralModel(z["whiten"], z["recolor"], float(z["lam"]),
                                  z["source_mean"], z["target_mean"])
    raise InvalidInputError(f"{path}: not a saved representation")


def cmd_transform(opts):
    _require(opts, "model", "input", "out")
    model = _load_representation(opts["model"])
    X, y = read_sparse(opts["input"])
    if isinstance(model, PcaModel):
        Z = pca_transform(X, model)
    elif isinstance(model, CoralModel):
        side = opts.get("side")
        if side is None:
            raise UsageError("coral models need --side source or --side target")
        Z = model.transform_source(X) if side == "source" else X
    else:
        Z = apply_stack(X, model)
    write_sparse(opts["out"], Z, y)


def cmd_train(opts):
    _require(opts, "source", "out")
    data = read_labeled(opts["source"])
    model = train(data, opts.get("reg_c", 1.0), opts.get("loss", "hinge"))
    save_model(model, opts["out"])


def cmd_eval(opts):
    _require(opts, "model", "target")
    model = load_model(opts["model"])
    data = read_labeled(opts["target"])
    acc = accuracy(model, data)
    if opts.get("format", "json") == "csv":
        text = f"accuracy,n\n{acc!r},{data.n}\n"
    else:
        text = json.dumps({"accuracy": acc, "n": data.n}, sort_keys=True) + "\n"
    _emit(text, opts.get("out"))


def cmd_grid(opts):
    _require(opts, "source", "target")
    config = experiment_config(opts)
    data = load_dataset(config)
    val_idx, _ = holdout(data, config)
    best, table = choose_params(data, config, val_idx)
    if config.format == "csv":
        keys = list(best)
        lines = [",".join(keys + ["accuracy"])]
        lines += [",".join([repr(row["params"][k]) for k in keys] + [repr(row["accuracy"])])
                  for row in table]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({"method": config.method, "best": best, "scores": table,
                           "n_validation": int(len(val_idx)), "seed": config.seed,
                           "version": __version__}, indent=2, sort_keys=True) + "\n"
    _emit(text, config.out)


def cmd_curve(opts):
    _require(opts, "source", "target")
    config = experiment_config(opts)
    _emit(format_curve(distance_curve(config), config.format), config.out)


def cmd_run(opts):
    _require(opts, "source", "target")
    config = experiment_config(opts)
    data = load_dataset(config)
    report = run_on_dataset(data, config)
    # built fully in memory first so a failure never leaves a partial report
    _emit(report.render(config.format), config.out)


COMMANDS = {
    "ingest": cmd_ingest, "fit": cmd_fit, "transform": cmd_transform,
    "train": cmd_train, "eval": cmd_eval, "grid": cmd_grid, "curve": cmd_curve,
    "run": cmd_run,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        COMMANDS[args.command](opts)
    except FlammError as exc:
        print(f"flamm {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"flamm {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
