"""Training loop, evaluation, ablation grids and the end-to-end gradient check."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .config import GRID, RunConfig
from .data import Dataset, batch_iter, load_dataset, make_split
from .metrics import MetricsReport, evaluate_predictions
from .model import PARAM_GROUPS, GraphCLDTA, batch_losses, param_group, predict
from .objective import LossWeights, NumericError
from .optim import Adam
from .plotting import plot_ablation, plot_history
from .protein import PAD, tokenize_protein
from .smiles import parse_smiles

logger = logging.getLogger(__name__)

EPOCH_COLUMNS = ["epoch", "L_mse", "L_gcl", "L_uniform_d", "L_uniform_t", "L_joint", "val_mse", "val_ci", "val_r2m"]
BETA_SWEEP = GRID["beta"]


def loss_weights(cfg: RunConfig) -> LossWeights:
    return LossWeights(alpha=cfg.alpha, beta=cfg.beta, tau=cfg.tau, epsilon=cfg.epsilon)


@dataclass
class TrainState:
    config: RunConfig
    model: GraphCLDTA
    optimizer: Adam
    epoch: int = 0  # completed epochs
    best_val_mse: float = math.inf
    best_epoch: int = -1
    best_params: dict[str, np.ndarray] | None = None
    history: list[dict] = field(default_factory=list)

    @classmethod
    def fresh(cls, cfg: RunConfig) -> TrainState:
        model = GraphCLDTA(cfg)
        return cls(cfg, model, Adam(model.parameters(), lr=cfg.learning_rate))

    def best_model(self) -> GraphCLDTA:
        if self.best_params is None:
            return self.model
        model = GraphCLDTA(self.config)
        model.load_state_dict(self.best_params)
        return model

    def save(self, path) -> None:
        arrays = {f"param.{k}": v for k, v in self.model.state_dict().items()}
        if self.best_params is not None:
            arrays.update({f"best.{k}": v for k, v in self.best_params.items()})
        arrays.update(self.optimizer.state())
        meta = {
            "config": self.config.to_dict(),
            "epoch": self.epoch,
            # batch order and noise are drawn from generators seeded by (seed, epoch)
            "rng": {"seed": self.config.seed, "next_epoch": self.epoch},
            "best_val_mse": None if math.isinf(self.best_val_mse) else self.best_val_mse,
            "best_epoch": self.best_epoch,
            "history": self.history,
        }
        save_arrays(path, arrays, meta)

    @classmethod
    def load(cls, path) -> TrainState:
        arrays, meta = load_arrays(path)
        try:
            cfg = RunConfig(**meta["config"])
        except (TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: bad stored config ({exc})") from None
        state = cls.fresh(cfg)
        code = "f4" if cfg.precision == "float32" else "f8"
        expected = {f"param.{n}": (p.shape, code) for n, p in state.model.named_parameters()}
        load_arrays(path, expected)  # shape/type validation
        state.model.load_state_dict({n: arrays[f"param.{n}"] for n, _ in state.model.named_parameters()})
        if "best." + state.model.named_parameters()[0][0] in arrays:
            state.best_params = {n: arrays[f"best.{n}"] for n, _ in state.model.named_parameters()}
        state.optimizer.load_state(arrays)
        state.epoch = int(meta["epoch"])
        state.best_val_mse = math.inf if meta["best_val_mse"] is None else float(meta["best_val_mse"])
        state.best_epoch = int(meta["best_epoch"])
        state.history = list(meta["history"])
        return state


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


class EpochLog:
    """Tab-separated per-epoch log; floats are written with full precision."""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        if not append or not self.path.exists():
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh, delimiter="\t", lineterminator="\n").writerow(EPOCH_COLUMNS)

    def write(self, row: dict) -> None:
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh, delimiter="\t", lineterminator="\n").writerow(
                [row["epoch"]] + [_fmt(row.get(c)) for c in EPOCH_COLUMNS[1:]])


def _batch_inputs(ds: Dataset, idx, max_length: int):
    samples = [ds.samples[i] for i in idx]
    return ([s.drug_id for s in samples], [s.target_id for s in samples],
            np.array([s.affinity for s in samples]))


def fit(state: TrainState, ds: Dataset, train_idx, val_idx=None, log_path=None, checkpoint_path=None,
        epochs: int | None = None) -> TrainState:
    """Run epochs ``state.epoch .. epochs-1``; the state is updated in place."""
    cfg = state.config
    epochs = cfg.epochs if epochs is None else epochs
    weights = loss_weights(cfg)
    proteins = ds.tokens(cfg.max_protein_length)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("empty training set")
    log = EpochLog(log_path, append=state.epoch > 0) if log_path else None
    model, opt = state.model, state.optimizer
    for epoch in range(state.epoch, epochs):
        t0 = time.perf_counter()
        noise_rng = np.random.default_rng([cfg.seed, epoch, 1])
        totals: dict[str, float] = {}
        n_batches = 0
        for batch in batch_iter(train_idx, cfg.batch_size, cfg.seed, epoch):
            drug_ids, target_ids, labels = _batch_inputs(ds, batch, cfg.max_protein_length)
            opt.zero_grad()
            losses = batch_losses(model, ds.graphs, proteins, drug_ids, target_ids, labels, weights, noise_rng,
                                  cosine=cfg.cosine_similarity, sphere=cfg.uniformity_on_sphere)
            ad.backward(losses.joint)
            for p in opt.params:
                if p.grad is not None and not np.all(np.isfinite(p.grad)):
                    raise NumericError(f"non-finite gradient at epoch {epoch}")
            opt.step()
            for k, v in losses.values().items():
                totals[k] = totals.get(k, 0.0) + v
            n_batches += 1
        row = {"epoch": epoch, **{k: v / n_batches for k, v in totals.items()}}
        if val_idx is not None and len(val_idx) >= 3:
            rep = evaluate(model, ds, val_idx, cfg)
            row.update(val_mse=rep.mse, val_ci=rep.ci, val_r2m=rep.r2m)
            if rep.mse < state.best_val_mse:
                state.best_val_mse, state.best_epoch = rep.mse, epoch
                state.best_params = model.state_dict()
        state.epoch = epoch + 1
        state.history.append(row)
        if log:
            log.write(row)
        if checkpoint_path:
            state.save(checkpoint_path)
        logger.info("epoch %d joint %.4f mse %.4f val_mse %s (%.1fs)", epoch, row["L_joint"], row["L_mse"],
                    row.get("val_mse"), time.perf_counter() - t0)
    return state


def evaluate(model: GraphCLDTA, ds: Dataset, indices, cfg: RunConfig, label: str = "") -> MetricsReport:
    """Deterministic metrics on ``indices`` (no noise injection)."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("empty evaluation set")
    drug_ids, target_ids, labels = _batch_inputs(ds, indices, cfg.max_protein_length)
    pred = predict(model, ds.graphs, ds.tokens(cfg.max_protein_length), drug_ids, target_ids, cfg.batch_size)
    return evaluate_predictions(pred, labels, config_digest=cfg.digest(), label=label)


def load_from_config(cfg: RunConfig) -> Dataset:
    return load_dataset(cfg.drugs, cfg.targets, cfg.affinities, name=cfg.dataset_name,
                        transform=None if cfg.transform == "none" else cfg.transform)


def train(cfg: RunConfig, fold: int | None = None, ds: Dataset | None = None, out_dir=None,
          resume: TrainState | None = None) -> tuple[TrainState, MetricsReport | None]:
    """Train on four CV folds of the non-test pool and validate on ``fold``."""
    ds = ds if ds is not None else load_from_config(cfg)
    fold = cfg.fold if fold is None else fold
    plan = make_split(ds, cfg.seed)
    train_idx, val_idx = plan.fold(fold)
    state = resume if resume is not None else TrainState.fresh(cfg)
    log_path = ckpt = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path, ckpt = out_dir / "epochs.tsv", out_dir / "last.ckpt"
        ds.write_rejects(out_dir)
    fit(state, ds, train_idx, val_idx, log_path=log_path, checkpoint_path=ckpt)
    report = evaluate(state.best_model(), ds, val_idx, cfg, label=f"fold{fold}/validation")
    if out_dir is not None:
        plot_history(state.history, out_dir / "epochs.png")
        (out_dir / "validation.json").write_text(report.to_json() + "\n")
    return state, report


# ---------------------------------------------------------------------------
# ablation


@dataclass
class AblationRow:
    dataset: str
    mode: str
    alpha: float
    beta: float
    mse: float
    ci: float
    r2m: float
    mse_std: float
    n_seeds: int
    config_digest: str

    COLUMNS = ["dataset", "mode", "alpha", "beta", "mse", "ci", "r2m", "mse_std", "n_seeds", "config_digest"]

    def cells(self) -> list[str]:
        return [self.dataset, self.mode, repr(self.alpha), repr(self.beta), f"{self.mse:.6f}", f"{self.ci:.6f}",
                f"{self.r2m:.6f}", f"{self.mse_std:.6f}", str(self.n_seeds), self.config_digest]


def ablation_settings(cfg: RunConfig, mode: str) -> list[dict]:
    if mode == "alpha-off":
        return [{"alpha": 0.0}, {"alpha": cfg.alpha}]
    if mode == "beta-sweep":
        return [{"beta": float(b)} for b in BETA_SWEEP]
    raise ValueError(f"unknown ablation mode {mode!r}")


def ablate(cfg: RunConfig, mode: str, ds: Dataset | None = None, seeds=None,
           out_dir=None) -> tuple[list[AblationRow], list[MetricsReport]]:
    """Train every setting of the grid for each seed; validation metrics averaged over seeds.

    The data split is fixed by ``cfg.seed``; per-run seeds change initialisation,
    batch order and noise.
    """
    ds = ds if ds is not None else load_from_config(cfg)
    seeds = [cfg.seed] if seeds is None else list(seeds)
    plan = make_split(ds, cfg.seed)
    train_idx, val_idx = plan.fold(cfg.fold)
    rows, reports = [], []
    for setting in ablation_settings(cfg, mode):
        scfg = cfg.replace(**setting)
        per_seed = []
        for seed in seeds:
            rcfg = scfg.replace(seed=seed)
            state = fit(TrainState.fresh(rcfg), ds, train_idx, val_idx)
            rep = evaluate(state.best_model(), ds, val_idx, rcfg,
                           label=f"{mode} alpha={rcfg.alpha} beta={rcfg.beta} seed={seed}")
            reports.append(rep)
            per_seed.append(rep)
        mses = np.array([r.mse for r in per_seed])
        rows.append(AblationRow(
            dataset=ds.name, mode=mode, alpha=scfg.alpha, beta=scfg.beta, mse=float(mses.mean()),
            ci=float(np.mean([r.ci for r in per_seed])), r2m=float(np.mean([r.r2m for r in per_seed])),
            mse_std=float(mses.std()), n_seeds=len(seeds), config_digest=scfg.digest(),
        ))
    if out_dir is not None:
        write_ablation(rows, reports, out_dir, mode)
    return rows, reports


def write_ablation(rows: list[AblationRow], reports: list[MetricsReport], out_dir, mode: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / f"ablation_{mode}.tsv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(AblationRow.COLUMNS)
        for r in rows:
            w.writerow(r.cells())
    with open(out / f"ablation_{mode}.jsonl", "w") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")
    plot_ablation(rows, out / f"ablation_{mode}.png")
    return table


# ---------------------------------------------------------------------------
# gradient check

GRADCHECK_DRUGS = ["CC(=O)Oc1ccccc1C(=O)O", "c1ccncc1", "CCN(CC)CC", "OC(=O)CCCl"]


@dataclass
class GradcheckRow:
    group: str
    max_rel_err: float
    n_coords: int
    passed: bool


@dataclass
class GradcheckReport:
    rows: list[GradcheckRow]
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def format(self) -> str:
        lines = ["group\tmax_rel_err\tn_coords\tstatus"]
        for r in self.rows:
            lines.append(f"{r.group}\t{r.max_rel_err:.3e}\t{r.n_coords}\t{'PASS' if r.passed else 'FAIL'}")
        return "\n".join(lines)


def gradcheck_config(cfg: RunConfig) -> RunConfig:
    return cfg.replace(drug_dim=8, target_dim=8, max_protein_length=32, embed_dim=8, conv_channels=[4, 8, 8],
                       precision="float64", batch_size=8)


def gradcheck(cfg: RunConfig, h: float = 1e-5, tol: float = 1e-4, seed: int = 7) -> GradcheckReport:
    """Finite-difference check of the full joint loss on a 4-drug / 2-target micro-batch."""
    t0 = time.perf_counter()
    tiny = gradcheck_config(cfg)
    rng = np.random.default_rng(seed)
    model = GraphCLDTA(tiny, seed=seed)
    for name, p in model.named_parameters():
        if p.ndim == 1:  # biases: move off the ReLU kink at exactly zero
            p.data[...] = rng.uniform(-0.2, 0.2, size=p.shape)
    graphs = {f"d{i}": parse_smiles(s) for i, s in enumerate(GRADCHECK_DRUGS)}
    proteins = {"t0": tokenize_protein("MKTAYIAKQRQISFVKSHFSRQ", tiny.max_protein_length),
                "t1": tokenize_protein("MSDNGPQNQRNAPRITFGGPSDSTGSNQNGERSGARSKQRRPQGLPNNTASWFT",
                                       tiny.max_protein_length)}
    drug_ids = [f"d{i}" for i in range(4) for _ in range(2)]
    target_ids = [f"t{j}" for _ in range(4) for j in range(2)]
    labels = rng.uniform(5.0, 10.0, size=len(drug_ids))
    weights = loss_weights(tiny)

    def build():
        return batch_losses(model, graphs, proteins, drug_ids, target_ids, labels, weights,
                            np.random.default_rng(seed + 1), cosine=tiny.cosine_similarity,
                            sphere=tiny.uniformity_on_sphere).joint

    named = model.named_parameters()
    params = [p for _, p in named]
    coords = {}
    for i, (name, p) in enumerate(named):
        if name == "cnn.embedding":
            coords[i] = range(p.shape[1] * (PAD + 1), p.data.size)  # padding row is frozen
    fd = ad.finite_diff_check(build, params, h=h, tol=tol, coords=coords)
    rows = []
    for group in PARAM_GROUPS:
        idx = [i for i, (n, _) in enumerate(named) if param_group(n) == group]
        err = max(fd.per_param[i] for i in idx)
        n = sum(len(coords[i]) if i in coords else params[i].data.size for i in idx)
        rows.append(GradcheckRow(group, err, n, bool(np.isfinite(err) and err <= tol)))
    return GradcheckReport(rows, tol, time.perf_counter() - t0)
