"""Private/shared networks, the combined loss and the sequential cyclic trainer.

Each domain ``k`` has a private network mapping its own features to a common
latent space of width ``latent_dim``; one shared network classifies latents
from every domain. Training visits the domains in turn. During domain ``k``'s
phase only private ``k`` and the shared network are updated, using

    total = alpha * cross_entropy + beta * mean_j MMD^2(Z_k, Z_j)

where the reference latents ``Z_j`` of the other domains are computed once per
phase in eval mode and held fixed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hetnids import nncore
from hetnids.adaptation import KernelConfig, mmd2_with_grad
from hetnids.dataprep.datasets import DomainDataset
from hetnids.nncore import AdamState, MlpParams
from hetnids.seeding import derive_seed, rng_for

PROB_CLAMP = 1e-12


class TrainingDiverged(RuntimeError):
    """A loss became non-finite. ``history`` holds everything recorded so far."""

    def __init__(self, message: str, history: "TrainHistory"):
        super().__init__(message)
        self.history = history


@dataclass
class TrainConfig:
    alpha: float = 1.0
    beta: float = 1.0
    latent_dim: int = 32
    private_hidden: int = 64
    shared_hidden: int = 16
    max_cycles: int = 1000
    epochs_per_phase: int = 2
    cycle_subset_size: int = 512
    batch_size: int = 128
    kernel: KernelConfig = field(default_factory=KernelConfig)
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float | None = None
    seed: int = 0
    early_stop: float | None = None  # stop once mean val accuracy reaches this
    eval_every: int = 1
    domain_order: tuple[int, ...] | None = None  # None -> ascending

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.max_cycles < 1 or self.epochs_per_phase < 1:
            raise ValueError("max_cycles and epochs_per_phase must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.cycle_subset_size < 2 or self.eval_every < 1 or self.latent_dim < 1:
            raise ValueError("cycle_subset_size >= 2, eval_every >= 1, latent_dim >= 1 required")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel"] = self.kernel.to_dict()
        if self.domain_order is not None:
            d["domain_order"] = list(self.domain_order)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "kernel" in d and isinstance(d["kernel"], dict):
            d["kernel"] = KernelConfig.from_dict(d["kernel"])
        if d.get("domain_order") is not None:
            d["domain_order"] = tuple(int(k) for k in d["domain_order"])
        return cls(**d)


@dataclass
class BaselineConfig:
    hidden: tuple[int, ...] = (64, 32, 16)
    dropout_p: float = 0.2
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        return cls(**d)


@dataclass
class LossBreakdown:
    ce: float
    mmd: float
    total: float


@dataclass
class EpochRecord:
    cycle: int
    domain: int
    epoch: int
    ce: float
    mmd: float
    total: float


@dataclass
class EvalRecord:
    cycle: int
    val_accuracy: list[float]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.val_accuracy))


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    evals: list[EvalRecord] = field(default_factory=list)
    best_cycle: int | None = None
    best_score: float | None = None
    aborted: str | None = None

    def mmd_trace(self) -> list[tuple[int, float]]:
        """Mean recorded MMD^2 per cycle, in cycle order."""
        by_cycle: dict[int, list[float]] = {}
        for r in self.epochs:
            by_cycle.setdefault(r.cycle, []).append(r.mmd)
        return [(c, float(np.mean(v))) for c, v in sorted(by_cycle.items())]

    def write_epoch_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "domain", "epoch", "ce", "mmd", "total"])
            for r in self.epochs:
                w.writerow([r.cycle, r.domain, r.epoch, repr(r.ce), repr(r.mmd), repr(r.total)])
        return path

    def write_mmd_trace_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "mean_mmd"])
            for c, m in self.mmd_trace():
                w.writerow([c, repr(m)])
        return path

    def to_dict(self) -> dict:
        return {
            "epochs": [asdict(r) for r in self.epochs],
            "evals": [{"cycle": e.cycle, "val_accuracy": e.val_accuracy} for e in self.evals],
            "best_cycle": self.best_cycle,
            "best_score": self.best_score,
            "aborted": self.aborted,
        }


@dataclass
class HeteroModel:
    privates: list[MlpParams]
    shared: MlpParams
    latent_dim: int
    private_states: list[AdamState]
    shared_state: AdamState

    @property
    def n_domains(self) -> int:
        return len(self.privates)

    def copy(self) -> "HeteroModel":
        import copy

        return copy.deepcopy(self)


def private_specs(d_in: int, hidden: int, latent: int):
    return [nncore.linear(d_in, hidden), nncore.batchnorm(hidden), nncore.relu(hidden),
            nncore.linear(hidden, latent)]


def shared_specs(latent: int, hidden: int):
    return [nncore.linear(latent, hidden), nncore.relu(hidden), nncore.linear(hidden, 1),
            nncore.sigmoid(1)]


def build_model(domain_dims, cfg: TrainConfig | None = None) -> HeteroModel:
    """Private ``[d_k -> hidden -> latent]`` per domain plus shared ``[latent -> 16 -> 1]``."""
    cfg = cfg or TrainConfig()
    domain_dims = [int(d) for d in domain_dims]
    if not domain_dims or any(d < 1 for d in domain_dims):
        raise ValueError(f"invalid domain dims {domain_dims}")
    privates = [
        nncore.init_mlp(private_specs(d, cfg.private_hidden, cfg.latent_dim),
                        derive_seed(cfg.seed, "private", k))
        for k, d in enumerate(domain_dims)
    ]
    shared = nncore.init_mlp(shared_specs(cfg.latent_dim, cfg.shared_hidden),
                             derive_seed(cfg.seed, "shared"))
    hyper = dict(lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    return HeteroModel(
        privates, shared, cfg.latent_dim,
        [nncore.init_adam(p, **hyper) for p in privates],
        nncore.init_adam(shared, **hyper),
    )


def forward_domain(model: HeteroModel, domain_id: int, X, mode: str = "eval",
                   seed: int | None = None, update_stats: bool = True):
    """Return ``(Z, yhat, (private_cache, shared_cache))`` for one domain's batch."""
    if not 0 <= domain_id < model.n_domains:
        raise IndexError(f"unknown domain {domain_id}")
    Z, c_priv = nncore.forward(model.privates[domain_id], X, mode, seed, update_stats)
    yhat, c_sh = nncore.forward(model.shared, Z, mode, None if seed is None else seed + 1,
                                update_stats)
    return Z, yhat[:, 0], (c_priv, c_sh)


def ce_loss(yhat, y) -> float:
    """Mean binary cross-entropy with probabilities clamped to [1e-12, 1-1e-12]."""
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if yhat.shape != y.shape:
        raise ValueError(f"length mismatch: {yhat.shape[0]} predictions, {y.shape[0]} labels")
    p = np.clip(yhat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def ce_grad(yhat, y) -> np.ndarray:
    """Derivative of :func:`ce_loss` with respect to ``yhat``."""
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.clip(yhat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return (p - y) / (p * (1.0 - p)) / len(y)


def _mmd_term(Z_active, Z_refs, kernel: KernelConfig, with_grad: bool):
    if not Z_refs:
        return 0.0, np.zeros_like(Z_active)
    total, grad = 0.0, np.zeros_like(Z_active)
    for Zr in Z_refs:
        if Zr.shape[1] != Z_active.shape[1]:
            raise ValueError(f"latent dims differ: {Z_active.shape[1]} vs {Zr.shape[1]}")
        v, g, _ = mmd2_with_grad(Z_active, Zr, kernel)
        total += v
        if with_grad:
            grad += g
    k = len(Z_refs)
    return total / k, grad / k


def combined_loss(yhat, y, Z_active, Z_refs, cfg: TrainConfig) -> LossBreakdown:
    ce = ce_loss(yhat, y)
    mmd, _ = _mmd_term(np.asarray(Z_active, dtype=np.float64), list(Z_refs), cfg.kernel, False)
    return LossBreakdown(ce, mmd, cfg.alpha * ce + cfg.beta * mmd)


def loss_and_grads(model: HeteroModel, domain_id: int, X, y, Z_refs, cfg: TrainConfig,
                   seed: int | None = None, update_stats: bool = True):
    """Forward, combined loss and backward for one minibatch of the active domain.

    Returns ``(LossBreakdown, private_grads, shared_grads)``. No parameter
    other than batchnorm running statistics is touched.
    """
    Z, yhat, (c_priv, c_sh) = forward_domain(model, domain_id, X, "train", seed, update_stats)
    ce = ce_loss(yhat, y)
    mmd, dZ_mmd = _mmd_term(Z, list(Z_refs), cfg.kernel, cfg.beta != 0)
    loss = LossBreakdown(ce, mmd, cfg.alpha * ce + cfg.beta * mmd)
    dyhat = (cfg.alpha * ce_grad(yhat, y))[:, None]
    g_sh, dZ = nncore.backward(model.shared, c_sh, dyhat)
    if cfg.beta != 0:
        dZ = dZ + cfg.beta * dZ_mmd
    g_priv, _ = nncore.backward(model.privates[domain_id], c_priv, dZ)
    return loss, g_priv, g_sh


def _apply(model: HeteroModel, domain_id: int, g_priv, g_sh, clip_norm):
    nncore.adam_step(model.privates[domain_id], g_priv, model.private_states[domain_id], clip_norm)
    nncore.adam_step(model.shared, g_sh, model.shared_state, clip_norm)


def predict_proba(model: HeteroModel, domain_id: int, X) -> np.ndarray:
    return forward_domain(model, domain_id, X, "eval")[1]


def predict(model: HeteroModel, domain_id: int, X) -> np.ndarray:
    """Hard labels: 1 iff the predicted probability is at least 0.5."""
    return (predict_proba(model, domain_id, X) >= 0.5).astype(np.int64)


def _accuracy(pred, y) -> float:
    return float(np.mean(pred == y))


# --- minibatch schedule ------------------------------------------------------


@dataclass
class Minibatch:
    cycle: int
    domain: int
    epoch: int
    rows: np.ndarray  # indices into the domain's training split
    ref_rows: dict[int, np.ndarray]  # domain j -> indices into phase reference latents
    seed: int


@dataclass
class PhasePlan:
    cycle: int
    domain: int
    subset: np.ndarray
    ref_subsets: dict[int, np.ndarray]  # domain j -> indices into j's training split
    batches: list[list[Minibatch]]  # per epoch


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [order[s:s + batch_size] for s in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        # a one-row batch cannot be batch-normalised; fold it into its neighbour
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def phase_plan(cfg: TrainConfig, cycle: int, domain: int, train_sizes) -> PhasePlan:
    """The deterministic data plan for one phase of one cycle."""
    base = cfg.seed
    n = train_sizes[domain]
    m = min(cfg.cycle_subset_size, n)
    subset = rng_for(base, "subset", cycle, domain).choice(n, size=m, replace=False)
    refs = {}
    for j, nj in enumerate(train_sizes):
        if j != domain:
            refs[j] = rng_for(base, "ref", cycle, domain, j).choice(
                nj, size=min(cfg.cycle_subset_size, nj), replace=False)
    epochs = []
    for e in range(cfg.epochs_per_phase):
        order = rng_for(base, "order", cycle, domain, e).permutation(m)
        epoch_batches = []
        for b, chunk in enumerate(_batches(order, cfg.batch_size)):
            ref_rows = {
                j: rng_for(base, "refbatch", cycle, domain, e, b, j).choice(
                    len(r), size=min(len(chunk), len(r)), replace=False)
                for j, r in refs.items()
            }
            epoch_batches.append(Minibatch(cycle, domain, e, subset[chunk], ref_rows,
                                           derive_seed(base, "dropout", cycle, domain, e, b)))
        epochs.append(epoch_batches)
    return PhasePlan(cycle, domain, subset, refs, epochs)


def _domain_order(cfg: TrainConfig, k: int) -> list[int]:
    order = list(range(k)) if cfg.domain_order is None else list(cfg.domain_order)
    if sorted(order) != list(range(k)):
        raise ValueError(f"domain_order {order} is not a permutation of 0..{k - 1}")
    return order


def _check_domains(domains):
    if len(domains) < 2:
        raise ValueError("cyclic training needs at least two domains")
    for k, (tr, va) in enumerate(domains):
        if tr.n < 2 or va.n < 1:
            raise ValueError(f"domain {k}: empty training or validation split")


def train_cyclic(model: HeteroModel, domains, cfg: TrainConfig):
    """Sequential cyclic training.

    ``domains`` is a list of ``(train, val)`` DomainDataset pairs, already
    resampled and scaled. Returns the model restored to its best validation
    checkpoint (highest mean accuracy across domains) and the history.
    """
    _check_domains(domains)
    k = len(domains)
    if k != model.n_domains:
        raise ValueError(f"model has {model.n_domains} private networks, got {k} domains")
    order = _domain_order(cfg, k)
    sizes = [tr.n for tr, _ in domains]
    hist = TrainHistory()
    best: HeteroModel | None = None

    for cycle in range(cfg.max_cycles):
        for i in order:
            plan = phase_plan(cfg, cycle, i, sizes)
            # frozen reference latents of every other domain
            ref_Z = {
                j: nncore.forward(model.privates[j], domains[j][0].features[rows], "eval")[0]
                for j, rows in plan.ref_subsets.items()
            }
            X, y = domains[i][0].features, domains[i][0].labels
            for e, epoch_batches in enumerate(plan.batches):
                ce, mm, tot = [], [], []
                for mb in epoch_batches:
                    refs = [ref_Z[j][r] for j, r in sorted(mb.ref_rows.items())]
                    loss, g_priv, g_sh = loss_and_grads(model, i, X[mb.rows], y[mb.rows], refs,
                                                        cfg, mb.seed)
                    if not np.isfinite(loss.total):
                        hist.aborted = f"non-finite loss at cycle {cycle}, domain {i}, epoch {e}"
                        raise TrainingDiverged(hist.aborted, hist)
                    _apply(model, i, g_priv, g_sh, cfg.clip_norm)
                    ce.append(loss.ce)
                    mm.append(loss.mmd)
                    tot.append(loss.total)
                hist.epochs.append(EpochRecord(cycle, i, e, float(np.mean(ce)),
                                               float(np.mean(mm)), float(np.mean(tot))))

        last = cycle == cfg.max_cycles - 1
        if (cycle + 1) % cfg.eval_every == 0 or last:
            accs = [_accuracy(predict(model, j, va.features), va.labels)
                    for j, (_, va) in enumerate(domains)]
            rec = EvalRecord(cycle, accs)
            hist.evals.append(rec)
            if hist.best_score is None or rec.mean_accuracy > hist.best_score:
                hist.best_score, hist.best_cycle = rec.mean_accuracy, cycle
                best = model.copy()
            if cfg.early_stop is not None and rec.mean_accuracy >= cfg.early_stop:
                break

    return (best if best is not None else model), hist


def train_plain_ce(model: HeteroModel, batches, cfg: TrainConfig) -> list[float]:
    """Cross-entropy-only updates over an explicit minibatch sequence.

    ``batches`` yields ``(domain_id, X, y, seed)``. Each item updates the
    domain's private network and the shared network. Returns the per-batch
    loss ``alpha * ce``. Used as the reference the cyclic trainer must reduce
    to when ``beta == 0``.
    """
    losses = []
    for domain_id, X, y, seed in batches:
        Z, yhat, (c_priv, c_sh) = forward_domain(model, domain_id, X, "train", seed)
        losses.append(cfg.alpha * ce_loss(yhat, y))
        g_sh, dZ = nncore.backward(model.shared, c_sh, (cfg.alpha * ce_grad(yhat, y))[:, None])
        g_priv, _ = nncore.backward(model.privates[domain_id], c_priv, dZ)
        _apply(model, domain_id, g_priv, g_sh, cfg.clip_norm)
    return losses


# --- baseline --------------------------------------------------------------


def baseline_specs(d_in: int, cfg: BaselineConfig):
    specs, width = [], d_in
    for h in cfg.hidden:
        specs += [nncore.linear(width, h), nncore.batchnorm(h), nncore.relu(h),
                  nncore.dropout(h, cfg.dropout_p)]
        width = h
    specs += [nncore.linear(width, 1), nncore.sigmoid(1)]
    return specs


def predict_baseline(net: MlpParams, X) -> np.ndarray:
    return (nncore.forward(net, X, "eval")[0][:, 0] >= 0.5).astype(np.int64)


def train_baseline(train: DomainDataset, val: DomainDataset, cfg: BaselineConfig | None = None):
    """Standalone per-domain classifier trained with cross-entropy only.

    Returns the best-validation-accuracy parameters and the history (one
    record per epoch, ``cycle`` holding the epoch number).
    """
    cfg = cfg or BaselineConfig()
    net = nncore.init_mlp(baseline_specs(train.d, cfg), derive_seed(cfg.seed, "baseline"))
    hist = TrainHistory()
    if cfg.epochs <= 0:
        return net, hist
    if train.n < 2 or val.n < 1:
        raise ValueError("baseline needs >= 2 training rows and a non-empty validation split")
    state = nncore.init_adam(net, lr=cfg.lr)
    best = net.copy()
    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, "baseline-order", epoch).permutation(train.n)
        losses = []
        for b, rows in enumerate(_batches(order, cfg.batch_size)):
            out, cache = nncore.forward(net, train.features[rows], "train",
                                        derive_seed(cfg.seed, "baseline-dropout", epoch, b))
            yb = train.labels[rows]
            loss = ce_loss(out[:, 0], yb)
            if not np.isfinite(loss):
                hist.aborted = f"non-finite loss at epoch {epoch}"
                raise TrainingDiverged(hist.aborted, hist)
            grads, _ = nncore.backward(net, cache, ce_grad(out[:, 0], yb)[:, None])
            nncore.adam_step(net, grads, state)
            losses.append(loss)
        ce = float(np.mean(losses))
        hist.epochs.append(EpochRecord(epoch, 0, 0, ce, 0.0, ce))
        acc = _accuracy(predict_baseline(net, val.features), val.labels)
        hist.evals.append(EvalRecord(epoch, [acc]))
        if hist.best_score is None or acc > hist.best_score:
            hist.best_score, hist.best_cycle = acc, epoch
            best = net.copy()
    return best, hist


# --- persistence -------------------------------------------------------------


def save_model(model: HeteroModel, directory, domain_names=None, feature_ids=None,
               extra: dict | None = None) -> Path:
    """One checkpoint per network plus ``model.json`` binding privates to domains."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (net, st) in enumerate(zip(model.privates, model.private_states)):
        fname = f"private_{k}.npz"
        nncore.save_checkpoint(directory / fname, net, st)
        entries.append({
            "domain": k,
            "file": fname,
            "name": domain_names[k] if domain_names else f"domain{k}",
            "feature_ids": list(feature_ids[k]) if feature_ids else None,
        })
    nncore.save_checkpoint(directory / "shared.npz", model.shared, model.shared_state)
    manifest = {"latent_dim": model.latent_dim, "privates": entries, "shared": "shared.npz",
                **(extra or {})}
    (directory / "model.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_model(directory) -> HeteroModel:
    directory = Path(directory)
    manifest = json.loads((directory / "model.json").read_text())
    privates, states = [], []
    for entry in sorted(manifest["privates"], key=lambda e: e["domain"]):
        net, st, _ = nncore.load_checkpoint(directory / entry["file"])
        privates.append(net)
        states.append(st or nncore.init_adam(net))
    shared, sst, _ = nncore.load_checkpoint(directory / manifest["shared"])
    return HeteroModel(privates, shared, manifest["latent_dim"], states,
                       sst or nncore.init_adam(shared))
