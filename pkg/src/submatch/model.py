"""Dual-branch matching network, readout/classifier and mapping explanation."""
from __future__ import annotations

import io
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoding import JointInput
from .glema import GlemaLayerParams, glema_forward, hop_schedule, uniform_init


@dataclass
class ModelConfig:
    num_labels: int
    hidden: int = 140
    num_layers: int = 4
    heads: int = 1
    fc_layers: int = 4
    fc_hidden: int = 128
    hop_schedule: str = "interleaved"
    leaky_slope: float = 0.2
    epsilon: float = 0.5
    share_branches: bool = False
    seed: int = 0

    @property
    def hops(self) -> list[int]:
        return hop_schedule(self.hop_schedule, self.num_layers)

    def to_lines(self) -> list[str]:
        return [f"{k} = {v}" for k, v in asdict(self).items()]

    @classmethod
    def from_dict(cls, raw: dict[str, str]) -> "ModelConfig":
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, value in raw.items():
            if key not in types:
                raise KeyError(f"unknown model config key {key!r}")
            kwargs[key] = _coerce(types[key], value)
        return cls(**kwargs)


def _coerce(type_name, value: str):
    t = str(type_name)
    if t == "bool":
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if t == "int":
        return int(value)
    if t == "float":
        return float(value)
    return value


@dataclass
class Explanation:
    """Pattern-to-target alignment read off the final cross-branch attention.

    ``triples`` holds ``(pattern node, target node, p)`` with ``p >= epsilon``
    and ``p > 0``;
    ``rankings[i]`` lists every target candidate of pattern node ``i`` as
    ``(target node, p)`` sorted by ``p`` descending, ties by target id.
    """

    triples: list[tuple[int, int, float]]
    rankings: dict[int, list[tuple[int, float]]]
    probabilities: np.ndarray = field(repr=False)

    def top1(self) -> dict[int, int | None]:
        return {i: (r[0][0] if r else None) for i, r in self.rankings.items()}


def mapping_probabilities(attention, pattern_count: int) -> np.ndarray:
    """Head-averaged ``(a_ij + a_ji) / 2`` on the pattern-by-target block."""
    mats = [a.data if isinstance(a, Tensor) else np.asarray(a) for a in attention]
    sym = sum(0.5 * (m + m.T) for m in mats) / len(mats)
    return sym[:pattern_count, pattern_count:]


def extract_mapping(attention, pattern_count: int, epsilon: float = 0.5) -> Explanation:
    probs = mapping_probabilities(attention, pattern_count)
    triples = []
    rankings: dict[int, list[tuple[int, float]]] = {}
    for i in range(probs.shape[0]):
        row = probs[i]
        cand = np.nonzero(row > 0)[0]
        # stable sort on -p keeps ascending target id among ties
        order = cand[np.argsort(-row[cand], kind="stable")]
        rankings[i] = [(int(j), float(row[j])) for j in order]
        for j in cand[row[cand] >= epsilon]:
            triples.append((i, int(j), float(row[j])))
    return Explanation(triples, rankings, probs)


class MatchingModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        c = config
        self.intra: list[GlemaLayerParams] = []
        self.cross: list[GlemaLayerParams] = []
        in_dim = 2 * c.num_labels
        for l in range(c.num_layers):
            intra = GlemaLayerParams.init(in_dim, c.hidden, c.heads, rng, f"layer{l}.intra.", c.leaky_slope)
            if c.share_branches:
                cross = intra
            else:
                cross = GlemaLayerParams.init(in_dim, c.hidden, c.heads, rng, f"layer{l}.cross.", c.leaky_slope)
            self.intra.append(intra)
            self.cross.append(cross)
            in_dim = c.hidden

        self.fc: list[tuple[Tensor, Tensor]] = []
        width = c.hidden
        for i in range(c.fc_layers - 1):
            W = uniform_init(rng, (width, c.fc_hidden), width, f"fc{i}.W")
            b = Tensor(np.zeros((1, c.fc_hidden)), requires_grad=True, name=f"fc{i}.b")
            self.fc.append((W, b))
            width = c.fc_hidden
        self.W_y = uniform_init(rng, (width, 1), width, "out.W")
        self.b_y = Tensor(np.zeros((1, 1)), requires_grad=True, name="out.b")

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for layer in self.intra + self.cross:
            out.update(layer.named_parameters())
        for W, b in self.fc:
            out[W.name] = W
            out[b.name] = b
        out[self.W_y.name] = self.W_y
        out[self.b_y.name] = self.b_y
        return out

    def node_features(self, inp: JointInput) -> tuple[Tensor, list[Tensor]]:
        """Final node features and the last cross layer's per-head 1-hop attention."""
        if inp.x.shape[1] != 2 * self.config.num_labels:
            raise ad.ShapeMismatch(
                f"input width {inp.x.shape[1]} != 2 * num_labels ({2 * self.config.num_labels})"
            )
        x = Tensor(inp.x)
        attention: list[Tensor] = []
        for intra, cross, k in zip(self.intra, self.cross, self.config.hops):
            x_in, _ = glema_forward(x, inp.a_in, intra, k, inp.directed)
            x_cr, attention = glema_forward(x, inp.a_cr, cross, k, inp.directed)
            x = ad.sub(x_cr, x_in)
        return x, attention

    def classify(self, features: Tensor, pattern_count: int) -> Tensor:
        h = ad.mean_rows_subset(features, range(pattern_count))
        for W, b in self.fc:
            h = ad.relu(ad.add(ad.matmul(h, W), b))
        return ad.sigmoid(ad.add(ad.matmul(h, self.W_y), self.b_y))

    def forward(self, inp: JointInput) -> tuple[Tensor, list[Tensor]]:
        """Return the match probability (1x1) and last cross-branch attention per head."""
        feats, attention = self.node_features(inp)
        return self.classify(feats, inp.pattern_count), attention

    def predict(self, inp: JointInput) -> tuple[float, Explanation]:
        y, attention = self.forward(inp)
        return y.item(), extract_mapping(attention, inp.pattern_count, self.config.epsilon)

    # ---------------------------------------------------------- checkpoints

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, p in params.items():
            if p.data.shape != state[k].shape:
                raise ad.ShapeMismatch(f"{k}: {p.data.shape} vs {state[k].shape}")
            p.data[...] = state[k]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(checkpoint_text(self))

    @classmethod
    def load(cls, path) -> "MatchingModel":
        with open(path) as fh:
            text = fh.read()
        header, body = [], []
        lines = text.splitlines()
        for idx, line in enumerate(lines):
            if line.startswith("tensor "):
                body = lines[idx:]
                break
            if line.strip() and not line.startswith("#"):
                header.append(line)
        raw = {}
        for line in header:
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
        model = cls(ModelConfig.from_dict(raw))
        model.load_state_dict(ad.load_tensors("\n".join(body)))
        return model


def checkpoint_text(model: MatchingModel) -> str:
    buf = io.StringIO()
    buf.write("# matching model checkpoint\n")
    for line in model.config.to_lines():
        buf.write(line + "\n")
    buf.write(ad.dump_tensors(model.named_parameters()))
    return buf.getvalue()
