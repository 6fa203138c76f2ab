"""Multi-task training: BCE on the match decision plus an attention contrast loss."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import Tensor
from .datagen import Sample, load_samples
from .encoding import JointInput, encode_pair
from .model import MatchingModel, ModelConfig, extract_mapping

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "split", "loss_sm", "loss_me", "roc_auc", "pr_auc", "f1", "acc", "top1", "mrr"]


class NonFiniteLoss(RuntimeError):
    pass


class EmptyTruePairs(ValueError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 30
    lam: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hop_schedule: str = "interleaved"
    shuffle: bool = True
    hidden: int = 140
    num_layers: int = 4
    heads: int = 1
    fc_layers: int = 4
    fc_hidden: int = 128
    epsilon: float = 0.5
    share_branches: bool = False
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")

    def model_config(self, num_labels: int) -> ModelConfig:
        return ModelConfig(
            num_labels=num_labels, hidden=self.hidden, num_layers=self.num_layers,
            heads=self.heads, fc_layers=self.fc_layers, fc_hidden=self.fc_hidden,
            hop_schedule=self.hop_schedule, epsilon=self.epsilon,
            share_branches=self.share_branches, seed=self.seed,
        )

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        """Flat ``key = value`` file; ``lambda`` is accepted for ``lam``. Unknown keys raise."""
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "lambda":
                key = "lam"
            if key not in known:
                raise KeyError(f"config line {lineno}: unknown key {key!r}")
            t = str(known[key])
            if t == "bool":
                kwargs[key] = value.lower() in ("1", "true", "yes")
            elif t == "int":
                kwargs[key] = int(value)
            elif t == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def describe(self) -> str:
        rows = asdict(self)
        rows["lambda"] = rows.pop("lam")
        return "\n".join(f"{k} = {v}" for k, v in rows.items())


# ------------------------------------------------------------------- losses


def loss_sm(y_hat: Tensor, y: int) -> Tensor:
    """Binary cross-entropy of one prediction (log clamped at 1e-12)."""
    if y == 1:
        return ad.scale(ad.log(y_hat), -1.0)
    return ad.scale(ad.log(ad.sub(1.0, y_hat)), -1.0)


def symmetric_attention(attention: Sequence[Tensor]) -> Tensor:
    """Head-averaged ``(A + A^T) / 2``, the same quantity the explanation reports."""
    total = None
    for a in attention:
        s = ad.scale(ad.add(a, ad.transpose(a)), 0.5)
        total = s if total is None else ad.add(total, s)
    return ad.scale(total, 1.0 / len(attention)) if len(attention) > 1 else total


def loss_me(attention: Sequence[Tensor], true_pairs: Sequence[tuple[int, int]],
            same_label_pairs: Sequence[tuple[int, int]]) -> Tensor:
    """``sum_true exp(-a) / (sum_same exp(-a) - sum_true exp(-a) + 1)``.

    Pairs are (row, col) indices into the joint node space. ``same_label_pairs``
    must include the true pairs, so the denominator is ``1 + sum over decoys``.
    """
    if not true_pairs:
        raise EmptyTruePairs("positive sample without mapping pairs")
    sym = symmetric_attention(attention)
    ti, tj = zip(*true_pairs)
    si, sj = zip(*same_label_pairs)
    num = ad.sum_all(ad.exp(ad.scale(ad.take_entries(sym, ti, tj), -1.0)))
    all_same = ad.sum_all(ad.exp(ad.scale(ad.take_entries(sym, si, sj), -1.0)))
    den = ad.add(ad.sub(all_same, num), 1.0)
    return ad.divide(num, den)


def true_pairs_of(mapping: dict[int, int], pattern_count: int) -> list[tuple[int, int]]:
    return [(i, pattern_count + j) for i, j in sorted(mapping.items())]


def sample_loss(model: MatchingModel, inp: JointInput, label: int, mapping, lam: float):
    """Total loss plus its parts; also returns the prediction and attention."""
    y_hat, attention = model.forward(inp)
    l_sm = loss_sm(y_hat, label)
    l_me = None
    total = l_sm
    if label == 1 and lam > 0:
        l_me = loss_me(attention, true_pairs_of(mapping, inp.pattern_count), inp.same_label_pairs())
        total = ad.add(l_sm, ad.scale(l_me, lam))
    return total, l_sm, l_me, y_hat, attention


# -------------------------------------------------------------------- adam


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls({k: np.zeros_like(p.data) for k, p in params.items()},
                   {k: np.zeros_like(p.data) for k, p in params.items()})


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray | None], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place bias-corrected Adam update. Missing gradients count as zero."""
    state.t += 1
    c1 = 1 - beta1 ** state.t
    c2 = 1 - beta2 ** state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape or state.m[name].shape != p.data.shape:
            raise ad.ShapeMismatch(f"adam: {name} {p.data.shape} vs grad {g.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------- training


def split_by_target(samples: Sequence[Sample], val_fraction: float, seed: int):
    """Hold out whole target graphs so no validation target is seen in training."""
    targets = sorted({s.target_path for s in samples})
    if val_fraction <= 0 or len(targets) < 2:
        return list(samples), []
    rng = np.random.default_rng([seed, 7])
    order = [targets[i] for i in rng.permutation(len(targets))]
    n_val = max(1, int(round(val_fraction * len(targets))))
    val_targets = set(order[:n_val])
    train = [s for s in samples if s.target_path not in val_targets]
    val = [s for s in samples if s.target_path in val_targets]
    return train, val


@dataclass
class EvalResult:
    scores: np.ndarray
    labels: np.ndarray
    rankings: list[dict]
    mappings: list[dict]
    loss_sm: float
    loss_me: float

    def summary(self, threshold: float = 0.5) -> dict[str, float]:
        out = dict(loss_sm=self.loss_sm, loss_me=self.loss_me)
        if len(set(self.labels.tolist())) == 2:
            out["roc_auc"] = metrics.roc_auc(self.scores, self.labels)
            out["pr_auc"] = metrics.pr_auc(self.scores, self.labels)
        else:
            out["roc_auc"] = out["pr_auc"] = float("nan")
        out["f1"], out["acc"] = metrics.f1_accuracy(self.scores, self.labels, threshold)
        if self.mappings:
            out["top1"] = metrics.topk_accuracy(self.rankings, self.mappings, 1)
            out["top5"] = metrics.topk_accuracy(self.rankings, self.mappings, 5)
            out["top10"] = metrics.topk_accuracy(self.rankings, self.mappings, 10)
            out["mrr"] = metrics.mrr(self.rankings, self.mappings)
        else:
            out["top1"] = out["top5"] = out["top10"] = out["mrr"] = float("nan")
        return out


def evaluate(model: MatchingModel, samples: Sequence[Sample], lam: float = 1.0,
             inputs: Sequence[JointInput] | None = None) -> EvalResult:
    scores, labels, rankings, mappings = [], [], [], []
    sm_total, me_total, n_pos = 0.0, 0.0, 0
    for k, s in enumerate(samples):
        inp = inputs[k] if inputs is not None else encode_pair(s.pattern, s.target, model.config.num_labels)
        y_hat, attention = model.forward(inp)
        y = y_hat.item()
        scores.append(y)
        labels.append(s.label)
        sm_total += loss_sm(y_hat, s.label).item()
        if s.label == 1 and s.mapping:
            n_pos += 1
            if lam > 0:
                me_total += loss_me(attention, true_pairs_of(s.mapping, inp.pattern_count),
                                    inp.same_label_pairs()).item()
            rankings.append(extract_mapping(attention, inp.pattern_count, model.config.epsilon).rankings)
            mappings.append(s.mapping)
    n = max(len(samples), 1)
    return EvalResult(np.array(scores), np.array(labels), rankings, mappings,
                      sm_total / n, me_total / max(n_pos, 1))


def _write_row(writer, epoch: int, split: str, summary: dict[str, float]) -> None:
    writer.writerow([epoch, split] + [repr(float(summary[c])) for c in METRIC_COLUMNS[2:]])


def train_model(samples: Sequence[Sample], num_labels: int, config: TrainConfig,
                metrics_path=None, val_samples: Sequence[Sample] | None = None,
                progress: bool = False) -> tuple[MatchingModel, list[dict]]:
    """Train on ``samples`` (one update per sample) and return the model and per-epoch logs.

    Without explicit ``val_samples``, ``config.val_fraction`` of the targets is
    held out.
    """
    if val_samples is None:
        train_set, val_set = split_by_target(samples, config.val_fraction, config.seed)
    else:
        train_set, val_set = list(samples), list(val_samples)
    model = MatchingModel(config.model_config(num_labels))
    params = model.named_parameters()
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng([config.seed, 1])

    train_inputs = [encode_pair(s.pattern, s.target, num_labels) for s in train_set]
    val_inputs = [encode_pair(s.pattern, s.target, num_labels) for s in val_set]

    history: list[dict] = []
    fh = open(metrics_path, "w", newline="") if metrics_path else None
    writer = csv.writer(fh, lineterminator="\n") if fh else None
    if writer:
        writer.writerow(METRIC_COLUMNS)
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(train_set)) if config.shuffle else np.arange(len(train_set))
            scores, labels, rankings, mappings = [], [], [], []
            sm_sum, me_sum, n_pos = 0.0, 0.0, 0
            for idx in order:
                s, inp = train_set[idx], train_inputs[idx]
                total, l_sm, l_me, y_hat, attention = sample_loss(model, inp, s.label, s.mapping, config.lam)
                value = total.item()
                if not math.isfinite(value):
                    raise NonFiniteLoss(f"non-finite loss {value} at epoch {epoch} on sample "
                                        f"{s.query_path or idx} (target {s.target_path})")
                ad.backward(total)
                grads = {k: p.grad for k, p in params.items()}
                adam_step(params, grads, state, config.learning_rate,
                          config.beta1, config.beta2, config.adam_eps)
                for p in params.values():
                    p.zero_grad()
                sm_sum += l_sm.item()
                scores.append(y_hat.item())
                labels.append(s.label)
                if s.label == 1 and s.mapping:
                    n_pos += 1
                    if l_me is not None:
                        me_sum += l_me.item()
                    rankings.append(extract_mapping(attention, inp.pattern_count, model.config.epsilon).rankings)
                    mappings.append(s.mapping)
            train_res = EvalResult(np.array(scores), np.array(labels), rankings, mappings,
                                   sm_sum / max(len(train_set), 1), me_sum / max(n_pos, 1))
            row = dict(epoch=epoch, split="train", **train_res.summary())
            history.append(row)
            if writer:
                _write_row(writer, epoch, "train", row)
            if val_set:
                val_row = dict(epoch=epoch, split="val",
                               **evaluate(model, val_set, config.lam, val_inputs).summary())
                history.append(val_row)
                if writer:
                    _write_row(writer, epoch, "val", val_row)
            if progress:
                msg = f"epoch {epoch}: train loss_sm={row['loss_sm']:.4f} loss_me={row['loss_me']:.4f}"
                if val_set:
                    msg += (f" | val roc={val_row['roc_auc']:.4f} acc={val_row['acc']:.4f} "
                            f"top1={val_row['top1']:.4f} mrr={val_row['mrr']:.4f}")
                log.info(msg)
            if fh:
                fh.flush()
    finally:
        if fh:
            fh.close()
    return model, history


def train(manifest, num_labels: int, config: TrainConfig, checkpoint_path,
          metrics_path=None, progress: bool = False) -> tuple[Path, Path]:
    """Train from a manifest, write the checkpoint and CSV metrics log, return both paths."""
    samples = load_samples(manifest, num_labels)
    checkpoint_path = Path(checkpoint_path)
    if metrics_path is None:
        metrics_path = checkpoint_path.with_name(checkpoint_path.name + ".metrics.csv")
    model, _ = train_model(samples, num_labels, config, metrics_path, progress=progress)
    model.save(checkpoint_path)
    return checkpoint_path, Path(metrics_path)
