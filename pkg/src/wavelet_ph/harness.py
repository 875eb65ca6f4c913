"""Experiment driver: configuration, 10x10-fold cross-validation, outputs."""

from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import sidecar
from . import spectral as sp
from .errors import ConfigError
from .features import feature_vector, profile_for
from .graphs import Dataset, load_tudataset
from .model import Classifier, WaveletImages
from .persistence import extended_persistence
from .vectorize import AffineRescale, fit_rescale, vectorise_diagram

log = logging.getLogger(__name__)

MODES = ("wavelet-opt", "control")
FEATURE_SETS = ("persistence-only", "with-nonpersistence")

# accuracy recording epochs keyed by (features, mode)
RECORD_EPOCHS = {
    "MUTAG": (25, 125, 25, 75),
    "COX2": (50, 50, 25, 25),
    "DHFR": (125, 250, 125, 45),
    "NCI1": (270, 270, 500, 370),
    "PROTEINS": (50, 50, 125, 125),
    "IMDB-BINARY": (100, 25, 75, 50),
}
BATCH_SIZES = {"MUTAG": 10, "COX2": 9, "DHFR": 11, "NCI1": 20, "IMDB-BINARY": 50}
FALLBACK_BATCH = {"PROTEINS": 20}
ALIASES = {"IMDB-B": "IMDB-BINARY"}


def canonical_name(name: str) -> str:
    up = name.upper()
    return ALIASES.get(up, up)


def record_epoch_for(dataset: str, mode: str, features: str) -> int:
    table = RECORD_EPOCHS.get(canonical_name(dataset))
    if table is None:
        return 100
    col = FEATURE_SETS.index(features) * 2 + (0 if mode == "control" else 1)
    return table[col]


@dataclass
class ExperimentConfig:
    dataset: str = "MUTAG"
    data_dir: str = "data"
    basis: str = "rbf"
    mode: str = "wavelet-opt"
    features: str = "with-nonpersistence"
    batch_size: int | None = None
    epochs: int | None = None
    record_epoch: int | None = None
    lr_nn: float = 1e-3
    lr_theta: float | None = None
    theta_freeze_epoch: int = 50
    partition_seeds: list = field(default_factory=lambda: list(range(10)))
    training_seed: int = 0
    n_folds: int = 10
    max_jobs: int | None = None
    workers: int = 1
    output_dir: str = "results"
    cache_dir: str | None = None
    eigensolver: str = "jacobi"

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).resolved()

    def resolved(self) -> "ExperimentConfig":
        """Copy with table defaults filled in and values validated."""
        cfg = dataclasses.replace(self, partition_seeds=list(self.partition_seeds))
        if cfg.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if cfg.features not in FEATURE_SETS:
            raise ConfigError(f"features must be one of {FEATURE_SETS}")
        if cfg.basis not in ("rbf", "chebyshev"):
            raise ConfigError("basis must be 'rbf' or 'chebyshev'")
        if cfg.eigensolver not in ("jacobi", "lapack"):
            raise ConfigError("eigensolver must be 'jacobi' or 'lapack'")
        name = canonical_name(cfg.dataset)
        if cfg.batch_size is None:
            cfg.batch_size = BATCH_SIZES.get(name, FALLBACK_BATCH.get(name, 20))
        if cfg.record_epoch is None:
            cfg.record_epoch = record_epoch_for(name, cfg.mode, cfg.features)
        if cfg.epochs is None:
            cfg.epochs = cfg.record_epoch
        if cfg.lr_theta is None:
            cfg.lr_theta = 1e-1 if name == "IMDB-BINARY" else 1e-2
        for key in ("batch_size", "epochs", "record_epoch", "n_folds", "workers"):
            if int(getattr(cfg, key)) < 1:
                raise ConfigError(f"{key} must be positive")
        if cfg.record_epoch > cfg.epochs:
            raise ConfigError("record_epoch exceeds epochs")
        if not cfg.partition_seeds:
            raise ConfigError("need at least one partition seed")
        return cfg

    @property
    def batch_size_from_table(self) -> bool:
        return canonical_name(self.dataset) in BATCH_SIZES


# -- precomputation --------------------------------------------------------------


@dataclass
class Workspace:
    dataset: Dataset
    spectra: list
    raw_param: sp.Parametrisation
    param: sp.Parametrisation
    theta_init: np.ndarray
    rescale: AffineRescale
    static_images: np.ndarray
    features: np.ndarray

    def blocks(self) -> list:
        return [self.param.block(i) for i in range(len(self.dataset))]


def _cache_path(cfg: ExperimentConfig) -> Path | None:
    if not cfg.cache_dir:
        return None
    return Path(cfg.cache_dir) / f"{canonical_name(cfg.dataset)}_{cfg.basis}.wph"


def _spectra_to_arrays(spectra) -> dict:
    return {
        "sizes": np.array([s.n for s in spectra], dtype=np.int64),
        "eigenvalues": np.concatenate([s.eigenvalues for s in spectra]),
        "eigenvectors": np.concatenate([s.eigenvectors.ravel() for s in spectra]),
    }


def _spectra_from_arrays(arrays: dict) -> list:
    out, vpos, epos = [], 0, 0
    for n in arrays["sizes"]:
        n = int(n)
        lam = arrays["eigenvalues"][vpos : vpos + n]
        vec = arrays["eigenvectors"][epos : epos + n * n].reshape(n, n)
        out.append(sp.SpectralData(lam, vec))
        vpos += n
        epos += n * n
    return out


def precompute(cfg: ExperimentConfig, dataset: Dataset | None = None) -> Workspace:
    """Spectra, parametrisation, initial coefficients, static images and features."""
    cfg = cfg.resolved()
    if dataset is None:
        dataset = load_tudataset(cfg.data_dir, cfg.dataset)
    profile = profile_for(canonical_name(cfg.dataset))
    cache = _cache_path(cfg)
    arrays = None
    if cache is not None and cache.exists():
        arrays, meta = sidecar.load(cache)
        if meta.get("n_graphs") != len(dataset) or meta.get("profile") != profile:
            log.warning("cache %s does not match the dataset; recomputing", cache)
            arrays = None
    if arrays is not None:
        spectra = _spectra_from_arrays(arrays)
    else:
        spectra = [sp.graph_spectrum(g, cfg.eigensolver) for g in dataset.graphs]

    raw = sp.build_parametrisation(spectra, sp.make_basis(cfg.basis))
    param = sp.recondition(raw)
    theta = sp.least_squares_init(param, sp.stacked_signature(spectra, sp.heat_kernel(10.0)))
    rescale = fit_rescale(sp.apply(param, theta))

    if arrays is not None:
        static, feats = arrays["static_images"], arrays["features"]
    else:
        hks = sp.stacked_signature(spectra, sp.heat_kernel(0.1))
        static_rescale = fit_rescale(hks)
        static = np.stack(
            [vectorise_diagram(extended_persistence(g, f), static_rescale)[0] for g, f in zip(dataset.graphs, raw.split(hks))]
        )
        feats = np.stack([feature_vector(s, profile) for s in spectra])
        if cache is not None:
            payload = _spectra_to_arrays(spectra)
            payload["static_images"] = static
            payload["features"] = feats
            payload["singular_values"] = raw.singular_values
            sidecar.save(cache, payload, {"dataset": dataset.name, "basis": cfg.basis, "n_graphs": len(dataset), "profile": profile})
    if cfg.features == "persistence-only":
        feats = np.zeros((len(dataset), 0))
    return Workspace(dataset, spectra, raw, param, theta, rescale, static, feats)


# -- folds and training ------------------------------------------------------------


def make_folds(n: int | Dataset, seed: int, k: int = 10) -> list[np.ndarray]:
    n = len(n) if isinstance(n, Dataset) else int(n)
    if n < k:
        raise ValueError(f"need at least {k} graphs, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


@dataclass
class FoldResult:
    partition_seed: int
    fold: int
    n_train: int
    n_test: int
    record_epoch: int
    accuracy: float
    final_train_loss: float
    nongeneric: int
    train_loss: list
    test_accuracy: list
    theta: np.ndarray


class TestLeakError(RuntimeError):
    __test__ = False  # not a pytest class despite the name


def train_fold(ws: Workspace, cfg: ExperimentConfig, train_idx, test_idx, seed) -> FoldResult:
    """Train one model; ``seed`` is anything accepted by ``np.random.default_rng``."""
    rng = np.random.default_rng(seed)
    labels = ws.dataset.labels
    model = Classifier(ws.features.shape[1], rng)
    theta = ad.parameter(ws.theta_init.copy())
    images = WaveletImages(list(ws.dataset.graphs), ws.blocks(), ws.rescale)
    adam = ad.Adam(lr=cfg.lr_nn)
    sgd = ad.SGD(lr=cfg.lr_theta)
    freeze = 0 if cfg.mode == "control" else cfg.theta_freeze_epoch
    train_idx = np.asarray(train_idx)
    test_idx = np.asarray(test_idx)
    test_set = set(test_idx.tolist())
    cached = None
    losses, accs = [], []
    recorded = float("nan")
    for epoch in range(cfg.epochs):
        learn_theta = epoch < freeze
        if not learn_theta and cached is None:
            cached = images.images(theta.data, range(len(ws.dataset)))
        order = rng.permutation(train_idx)
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            if test_set.intersection(batch.tolist()):
                raise TestLeakError("test graph found in a training batch")
            opt = images(theta, batch) if learn_theta else cached[batch]
            logits = model.forward(opt, ws.static_images[batch], ws.features[batch], True, rng)
            loss = ad.bce_with_logits(logits, labels[batch])
            model.zero_grad()
            theta.zero_grad()
            loss.backward()
            adam.step(model.params)
            if learn_theta:
                sgd.step({"theta": theta})
            batch_losses.append(float(loss.data))
        losses.append(float(np.mean(batch_losses)))
        test_imgs = cached[test_idx] if cached is not None else images.images(theta.data, test_idx)
        logits = model.forward(test_imgs, ws.static_images[test_idx], ws.features[test_idx], False)
        acc = float(np.mean((logits.data > 0) == (labels[test_idx] == 1)))
        accs.append(acc)
        if epoch + 1 == cfg.record_epoch:
            recorded = acc
    return FoldResult(-1, -1, len(train_idx), len(test_idx), cfg.record_epoch, recorded, losses[-1], images.nongeneric, losses, accs, theta.data.copy())


def fold_seed(cfg: ExperimentConfig, partition_seed: int, fold: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(cfg.training_seed), int(partition_seed), int(fold)])


def jobs_for(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    jobs = [(s, k) for s in cfg.partition_seeds for k in range(cfg.n_folds)]
    return jobs if cfg.max_jobs is None else jobs[: cfg.max_jobs]


def run_job(ws: Workspace, cfg: ExperimentConfig, partition_seed: int, fold: int) -> FoldResult:
    folds = make_folds(len(ws.dataset), partition_seed, cfg.n_folds)
    test = folds[fold]
    train = np.concatenate([f for i, f in enumerate(folds) if i != fold])
    try:
        res = train_fold(ws, cfg, train, test, fold_seed(cfg, partition_seed, fold))
    except Exception as exc:
        raise RuntimeError(f"fold (partition seed {partition_seed}, fold {fold}) failed: {exc}") from exc
    return dataclasses.replace(res, partition_seed=partition_seed, fold=fold)


_WORKER: dict = {}


def _worker_job(args):
    return run_job(_WORKER["ws"], _WORKER["cfg"], *args)


@dataclass
class ResultSheet:
    partition_seeds: list
    fold_means: list
    grand_mean: float
    std: float
    folds: list

    @classmethod
    def from_folds(cls, results: list[FoldResult]) -> "ResultSheet":
        seeds = sorted({r.partition_seed for r in results}, key=[r.partition_seed for r in results].index)
        means = [float(np.mean([r.accuracy for r in results if r.partition_seed == s])) for s in seeds]
        return cls(seeds, means, float(np.mean(means)), float(np.std(means)), results)


def run_experiment(cfg: ExperimentConfig, ws: Workspace | None = None, write: bool = True) -> ResultSheet:
    cfg = cfg.resolved()
    ws = ws or precompute(cfg)
    jobs = jobs_for(cfg)
    log.info("%d fold experiments on %s (%s, %s)", len(jobs), cfg.dataset, cfg.mode, cfg.features)
    if cfg.workers > 1 and len(jobs) > 1:
        import multiprocessing as mp

        _WORKER.update(ws=ws, cfg=cfg)
        with ProcessPoolExecutor(cfg.workers, mp_context=mp.get_context("fork")) as pool:
            results = list(pool.map(_worker_job, jobs))
    else:
        results = []
        for s, k in jobs:
            res = run_job(ws, cfg, s, k)
            log.info("partition %d fold %d: accuracy %.4f", s, k, res.accuracy)
            results.append(res)
    sheet = ResultSheet.from_folds(results)
    if write:
        write_outputs(sheet, cfg)
    return sheet


# -- outputs -----------------------------------------------------------------------

RESULT_FIELDS = ("partition_seed", "fold", "n_train", "n_test", "record_epoch", "accuracy", "final_train_loss", "nongeneric")


def result_rows(sheet: ResultSheet) -> list[list[str]]:
    return [[repr(getattr(r, k)) if isinstance(getattr(r, k), float) else str(getattr(r, k)) for k in RESULT_FIELDS] for r in sheet.folds]


def write_outputs(sheet: ResultSheet, cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        w.writerows(result_rows(sheet))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["partition_seed", "mean_accuracy"])
        for s, m in zip(sheet.partition_seeds, sheet.fold_means):
            w.writerow([s, repr(m)])
        w.writerow(["grand_mean", repr(sheet.grand_mean)])
        w.writerow(["std", repr(sheet.std)])
        w.writerow(["batch_size", cfg.batch_size])
        w.writerow(["batch_size_source", "table" if cfg.batch_size_from_table else "default"])
    for r in sheet.folds:
        with open(out / f"loss_curve_s{r.partition_seed}_f{r.fold}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "test_accuracy"])
            for e, (l, a) in enumerate(zip(r.train_loss, r.test_accuracy), start=1):
                w.writerow([e, repr(l), repr(a)])
    return out


def read_results(path) -> list[dict]:
    with open(Path(path) / "results.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def summarise(path) -> ResultSheet:
    """Rebuild a ResultSheet from a results directory."""
    rows = read_results(path)
    results = [
        FoldResult(int(r["partition_seed"]), int(r["fold"]), int(r["n_train"]), int(r["n_test"]), int(r["record_epoch"]),
                   float(r["accuracy"]), float(r["final_train_loss"]), int(r["nongeneric"]), [], [], np.zeros(0))
        for r in rows
    ]
    return ResultSheet.from_folds(results)


# -- diagnostics -------------------------------------------------------------------


def _svg_lines(xs, series: list, title: str, logy: bool = False) -> str:
    w, h, pad = 480, 320, 40
    ys = [np.log10(np.maximum(s, 1e-300)) if logy else np.asarray(s) for s in series]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    hi = hi if hi > lo else lo + 1
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    x1 = x1 if x1 > x0 else x0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def py(y):
        return h - pad - (y - lo) / (hi - lo) * (h - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
             f'<text x="{pad}" y="20" font-size="12">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" fill="none" stroke="black"/>']
    for y in ys:
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, y))
        parts.append(f'<polyline fill="none" stroke="steelblue" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def emit_diagnostics(cfg: ExperimentConfig, out_dir=None, svg: bool = False, spectra=None) -> list[Path]:
    """Singular-value spread per basis kind and the sampled reconditioned basis."""
    cfg = cfg.resolved()
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if spectra is None:
        dataset = load_tudataset(cfg.data_dir, cfg.dataset)
        spectra = [sp.graph_spectrum(g, cfg.eigensolver) for g in dataset.graphs]
    name = canonical_name(cfg.dataset)
    grid = np.linspace(0.0, 2.0, 200)
    written = []
    for kind in ("rbf", "chebyshev"):
        raw = sp.build_parametrisation(spectra, sp.make_basis(kind))
        rec = sp.recondition(raw)
        rec_sigma = sp.jacobi_svd(rec.matrix)[0]
        path = out / f"singular_values_{name}_{kind}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "sigma", "sigma_ratio", "reconditioned_sigma_ratio"])
            full = sp.jacobi_svd(raw.matrix)[0]
            for k, s in enumerate(full):
                r = rec_sigma[k] / rec_sigma[0] if k < len(rec_sigma) else ""
                w.writerow([k + 1, repr(float(s)), repr(float(s / full[0])), r if r == "" else repr(float(r))])
        written.append(path)
        values = rec.basis.evaluate(grid)
        path = out / f"reconditioned_basis_{name}_{kind}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"h{k + 1}" for k in range(values.shape[1])])
            for x, row in zip(grid, values):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
        written.append(path)
        if svg:
            p = out / f"singular_values_{name}_{kind}.svg"
            p.write_text(_svg_lines(np.arange(1, len(full) + 1), [full / full[0]], f"{name} {kind}: sigma_k / sigma_max (log10)", logy=True))
            written.append(p)
            p = out / f"reconditioned_basis_{name}_{kind}.svg"
            p.write_text(_svg_lines(grid, list(values.T), f"{name} {kind}: reconditioned basis"))
            written.append(p)
    return written
