"""Experiment orchestration: validation-based selection, fitting, reporting."""

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .baselines import coral_align, pca_fit, pca_transform
from .classifier import LabeledSet, accuracy, train
from .data import read_sparse, split_indices
from .errors import FlammError, InvalidInputError
from .stack import LayerParams, fit_stack

log = logging.getLogger(__name__)

METHODS = ("raw", "pca", "coral", "sfl", "flamm")

AMAZON_GAMMAS = tuple(float(g) for g in range(10, 101, 10))
SPAM_GAMMAS = tuple(float(g) for g in range(10, 151, 20))
PCA_DIMS = (50, 100, 150, 200, 250, 300)


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = None
    target: str = None
    target_unlabeled: str = None
    method: str = "flamm"
    gamma1: tuple = AMAZON_GAMMAS
    gamma2: tuple = AMAZON_GAMMAS
    layers: tuple = (2,)
    pca_dim: tuple = PCA_DIMS
    coral_lambda: tuple = (1.0,)
    gamma2_scale_by_n: bool = True
    val_size: int = 500
    seed: int = 0
    reg_c: float = 1.0
    loss: str = "hinge"
    out: str = None
    format: str = "json"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.format not in ("json", "csv"):
            raise InvalidInputError(f"format must be json or csv, got {self.format!r}")
        for name in ("gamma1", "gamma2", "layers", "pca_dim", "coral_lambda"):
            value = getattr(self, name)
            if np.isscalar(value):
                value = (value,)
            object.__setattr__(self, name, tuple(value))
        object.__setattr__(self, "layers", tuple(int(k) for k in self.layers))
        object.__setattr__(self, "pca_dim", tuple(int(k) for k in self.pca_dim))
        if self.val_size < 0:
            raise InvalidInputError("val_size must be >= 0")

    def echo(self):
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


@dataclass(frozen=True)
class Dataset:
    """In-memory experiment inputs; target columns are ``pool`` then ``unlabeled``."""

    source: LabeledSet
    pool: LabeledSet
    unlabeled: np.ndarray = None
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.source.X.shape[0]
        if self.pool.X.shape[0] != d:
            raise InvalidInputError(
                f"target has {self.pool.X.shape[0]} features, source has {d}")
        if self.unlabeled is not None and self.unlabeled.shape[0] != d:
            raise InvalidInputError(
                f"unlabeled target has {self.unlabeled.shape[0]} features, source has {d}")

    @property
    def target_all(self):
        if self.unlabeled is None or self.unlabeled.shape[1] == 0:
            return self.pool.X
        return np.hstack([self.pool.X, self.unlabeled])


def _drop_empty(X, y, name, dropped):
    keep = np.any(X != 0, axis=0)
    if not keep.all():
        ids = np.flatnonzero(~keep).tolist()
        dropped[name] = ids
        log.info("dropping %d all-zero %s samples: %s", len(ids), name, ids)
        X = X[:, keep]
        y = None if y is None else y[keep]
    return X, y


def load_dataset(config):
    if not config.source or not config.target:
        raise InvalidInputError("both a source and a target file are required")
    dropped = {}
    Xs, ys = read_sparse(config.source)
    if ys is None:
        raise InvalidInputError(f"{config.source}: source file must be labeled")
    Xt, yt = read_sparse(config.target)
    if yt is None:
        raise InvalidInputError(f"{config.target}: target file must be labeled")
    Xs, ys = _drop_empty(Xs, ys, "source", dropped)
    Xt, yt = _drop_empty(Xt, yt, "target", dropped)
    unlabeled = None
    if config.target_unlabeled:
        unlabeled, _ = read_sparse(config.target_unlabeled)
        unlabeled, _ = _drop_empty(unlabeled, None, "target_unlabeled", dropped)
    return Dataset(LabeledSet(Xs, ys), LabeledSet(Xt, yt), unlabeled, dropped)


def candidate_grid(config):
    """Sorted, de-duplicated parameter dicts the chosen method consumes."""
    m = config.method
    if m == "raw":
        points = [()]
    elif m == "pca":
        points = [(k,) for k in config.pca_dim]
    elif m == "coral":
        points = [(float(lam),) for lam in config.coral_lambda]
    elif m == "sfl":
        points = [(float(g1), 0.0, k) for g1 in config.gamma1 for k in config.layers]
    else:
        points = [(float(g1), float(g2), k) for g1 in config.gamma1
                  for g2 in config.gamma2 for k in config.layers]
    if not points:
        raise InvalidInputError(f"empty parameter grid for method {m!r}")
    keys = {"raw": (), "pca": ("pca_dim",), "coral": ("coral_lambda",),
            "sfl": ("gamma1", "gamma2", "layers"),
            "flamm": ("gamma1", "gamma2", "layers")}[m]
    return [dict(zip(keys, p)) for p in sorted(set(points))]


def stack_params(method, params, gamma2_scale_by_n=True):
    """Layer parameters for a stack method; ``sfl`` always drops the gap term."""
    if method not in ("sfl", "flamm"):
        raise InvalidInputError(f"method {method!r} does not fit a stack")
    g2 = 0.0 if method == "sfl" else params["gamma2"]
    return LayerParams(params["gamma1"], g2, gamma2_scale_by_n)


def fit_method_stack(method, params, X_S, X_T, gamma2_scale_by_n=True):
    """Fit the stack a grid point describes; returns ``(StackModel, DomainPair)``."""
    return fit_stack(X_S, X_T, stack_params(method, params, gamma2_scale_by_n),
                     params["layers"])


@dataclass(frozen=True)
class Representation:
    source: np.ndarray
    target: np.ndarray
    distances: tuple = None


def learn_representation(method, params, X_S, X_T, gamma2_scale_by_n=True):
    """Fit ``method`` on both domains and return the transformed matrices."""
    if method == "raw":
        return Representation(X_S, X_T)
    if method == "pca":
        k = min(int(params["pca_dim"]), X_S.shape[0])
        model = pca_fit(np.hstack([X_S, X_T]), k)
        return Representation(pca_transform(X_S, model), pca_transform(X_T, model))
    if method == "coral":
        _, aligned = coral_align(X_S, X_T, params["coral_lambda"])
        return Representation(aligned, X_T)
    if method in ("sfl", "flamm"):
        model, pair = fit_method_stack(method, params, X_S, X_T, gamma2_scale_by_n)
        return Representation(pair.source, pair.target, model.per_layer_distance)
    raise InvalidInputError(f"unknown method {method!r}")


def evaluate(data, method, params, eval_idx, reg_c=1.0, loss="hinge",
             gamma2_scale_by_n=True):
    """Learn features, train on transformed source, score on pool columns."""
    rep = learn_representation(method, params, data.source.X, data.target_all,
                               gamma2_scale_by_n)
    model = train(LabeledSet(rep.source, data.source.y), reg_c, loss)
    pool_X = rep.target[:, :data.pool.n]
    scored = LabeledSet(pool_X[:, eval_idx], data.pool.y[eval_idx])
    return accuracy(model, scored), rep


def argmax_params(scored):
    """Pick the best ``(params, accuracy)`` entry.

    Ties go to the lexicographically smallest parameter tuple.
    """
    if not scored:
        raise InvalidInputError("nothing to select from")
    best = None
    for params, acc in scored:
        key = (-acc, tuple(params.values()))
        if best is None or key < best[0]:
            best = (key, params)
    return best[1]


def stv_select(data, method, grid, val_idx, reg_c=1.0, loss="hinge",
               gamma2_scale_by_n=True):
    """Score every grid point on the target validation columns.

    Returns ``(best_params, [(params, accuracy), ...])``.
    """
    if not grid:
        raise InvalidInputError("empty parameter grid")
    if len(val_idx) == 0:
        raise InvalidInputError("validation set is empty")
    unique = []
    for p in grid:
        if p not in unique:
            unique.append(p)
    scored = []
    for params in unique:
        acc, _ = evaluate(data, method, params, val_idx, reg_c, loss, gamma2_scale_by_n)
        log.debug("stv %s %s -> %.4f", method, params, acc)
        scored.append((params, acc))
    return argmax_params(scored), scored


@dataclass
class RunReport:
    method: str
    params: dict
    accuracy: float
    n_test: int
    n_validation: int
    distances: list
    seed: int
    validation: list
    dropped: dict
    config: dict
    version: str = __version__
    timings: dict = field(default_factory=dict)

    def to_dict(self, timings=True):
        out = asdict(self)
        if not timings:
            out.pop("timings")
        return out

    def to_json(self, timings=True):
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2) + "\n"

    def to_csv(self, timings=True):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerow(["method", self.method])
        for k, v in self.params.items():
            writer.writerow([f"params.{k}", repr(v)])
        writer.writerow(["accuracy", repr(self.accuracy)])
        writer.writerow(["n_test", self.n_test])
        writer.writerow(["n_validation", self.n_validation])
        writer.writerow(["seed", self.seed])
        writer.writerow(["version", self.version])
        for i, dist in enumerate(self.distances or [], start=1):
            writer.writerow([f"distance.{i}", repr(dist)])
        if timings:
            for k, v in self.timings.items():
                writer.writerow([f"timing.{k}", repr(v)])
        return buf.getvalue()

    def render(self, fmt="json", timings=True):
        return self.to_json(timings) if fmt == "json" else self.to_csv(timings)


class StageError(FlammError):
    """Wraps a module error with the pipeline stage it came from."""

    def __init__(self, stage, exc):
        self.stage = stage
        self.cause = exc
        self.exit_code = getattr(exc, "exit_code", 2)
        super().__init__(f"[{stage}] {exc}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except FlammError as exc:
        raise StageError(name, exc) from exc


def holdout(data, config):
    """Split the target pool into validation and test column indices."""
    if config.val_size >= data.pool.n:
        raise InvalidInputError(
            f"validation size {config.val_size} leaves no test samples "
            f"in a pool of {data.pool.n}")
    return split_indices(data.pool.n, config.val_size, config.seed)


def choose_params(data, config, val_idx):
    grid = candidate_grid(config)
    if len(grid) == 1:
        return grid[0], []
    if len(val_idx) == 0:
        raise InvalidInputError("a grid with several points needs val_size > 0")
    best, scored = stv_select(data, config.method, grid, val_idx, config.reg_c,
                              config.loss, config.gamma2_scale_by_n)
    return best, [{"params": p, "accuracy": a} for p, a in scored]


def run_on_dataset(data, config):
    timings = {}
    t0 = time.perf_counter()
    val_idx, test_idx = _stage("split", holdout, data, config)
    best, table = _stage("select", choose_params, data, config, val_idx)
    timings["select"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    acc, rep = _stage("evaluate", evaluate, data, config.method, best, test_idx,
                      config.reg_c, config.loss, config.gamma2_scale_by_n)
    timings["evaluate"] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0
    return RunReport(
        method=config.method,
        params=best,
        accuracy=acc,
        n_test=int(len(test_idx)),
        n_validation=int(len(val_idx)),
        distances=list(rep.distances) if rep.distances is not None else [],
        seed=config.seed,
        validation=table,
        dropped=data.dropped,
        config=config.echo(),
        timings=timings,
    )


def run_experiment(config):
    """Load the configured files, select parameters, and report test accuracy."""
    data = _stage("ingest", load_dataset, config)
    return run_on_dataset(data, config)


def distance_curve(config, data=None):
    """Per-layer moment-gap distances as ``[(layer, distance), ...]``.

    Layer 1 is the original representation; a K-layer model yields K + 1
    points.
    """
    if config.method not in ("sfl", "flamm"):
        raise InvalidInputError("distance curves need method sfl or flamm")
    if data is None:
        data = _stage("ingest", load_dataset, config)
    grid = candidate_grid(config)
    if len(grid) == 1:
        params = grid[0]
    else:
        val_idx, _ = _stage("split", holdout, data, config)
        params, _ = _stage("select", choose_params, data, config, val_idx)
    model, _ = _stage("fit", fit_method_stack, config.method, params, data.source.X,
                      data.target_all, config.gamma2_scale_by_n)
    return [(k + 1, d) for k, d in enumerate(model.per_layer_distance)]


def format_curve(curve, fmt="json"):
    if fmt == "json":
        return json.dumps([{"layer": k, "distance": d} for k, d in curve], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["layer", "distance"])
    for k, d in curve:
        writer.writerow([k, repr(d)])
    return buf.getvalue()


def with_overrides(config, **kwargs):
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
