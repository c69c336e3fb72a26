"""Encoder, embedding head and category head."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .nn import checkpoint
from .nn.functional import bn_relu_pool, conv1d, linear, softmax_rows
from .nn.tensor import Tensor, no_grad, parameter


@dataclass(frozen=True)
class ConvBlockSpec:
    out_channels: int
    kernel: int
    pool: int


DEFAULT_BLOCKS = (ConvBlockSpec(16, 7, 4), ConvBlockSpec(32, 5, 4), ConvBlockSpec(64, 3, 4))


@dataclass(frozen=True)
class ModelConfig:
    class_count: int
    input_length: int = 1024
    blocks: tuple[ConvBlockSpec, ...] = DEFAULT_BLOCKS
    embed_dim: int = 128
    hidden_dim: int = 256

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        blocks = tuple(b if isinstance(b, ConvBlockSpec) else ConvBlockSpec(**b)
                       for b in self.blocks)
        for b in blocks:
            if b.kernel % 2 == 0:
                raise ValueError("conv kernels must be odd")
        object.__setattr__(self, "blocks", blocks)
        if self.feature_length < 1:
            raise ValueError("input too short for the pooling stack")

    @property
    def feature_length(self) -> int:
        n = self.input_length
        for b in self.blocks:
            n //= b.pool
        return n

    @property
    def representation_dim(self) -> int:
        return self.blocks[-1].out_channels * self.feature_length

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = [asdict(b) for b in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "blocks" in d:
            d["blocks"] = tuple(ConvBlockSpec(**b) for b in d["blocks"])
        return cls(**d)


def _uniform(rng, bound, shape):
    return rng.uniform(-bound, bound, size=shape)


class ScdcModel:
    """Three conv blocks feeding two MLP heads.

    Parameters live in ``self.params`` (name -> Tensor); batch-norm running
    statistics live in ``self.buffers``. ``training`` selects batch or running
    statistics.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.training = True
        rng = np.random.default_rng(0) if rng is None else rng
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}
        cin = 1
        for i, b in enumerate(config.blocks):
            bound = 1.0 / np.sqrt(cin * b.kernel)
            self.params[f"enc.{i}.conv.w"] = _uniform(rng, bound, (b.out_channels, cin, b.kernel))
            self.params[f"enc.{i}.conv.b"] = _uniform(rng, bound, (b.out_channels,))
            self.params[f"enc.{i}.bn.gamma"] = np.ones(b.out_channels)
            self.params[f"enc.{i}.bn.beta"] = np.zeros(b.out_channels)
            self.buffers[f"enc.{i}.bn.mean"] = np.zeros(b.out_channels)
            self.buffers[f"enc.{i}.bn.var"] = np.ones(b.out_channels)
            cin = b.out_channels
        d = config.representation_dim
        for head, out in (("emb", config.embed_dim), ("cat", config.class_count)):
            for j, (fan_in, fan_out) in enumerate(((d, config.hidden_dim),
                                                   (config.hidden_dim, out))):
                bound = 1.0 / np.sqrt(fan_in)
                self.params[f"{head}.{j}.w"] = _uniform(rng, bound, (fan_in, fan_out))
                self.params[f"{head}.{j}.b"] = _uniform(rng, bound, (fan_out,))
        self.params = {k: parameter(v, name=k) for k, v in self.params.items()}

    # -- modes -----------------------------------------------------------------
    def train(self) -> "ScdcModel":
        self.training = True
        return self

    def eval(self) -> "ScdcModel":
        self.training = False
        return self

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    # -- forward ---------------------------------------------------------------
    def encode(self, x) -> Tensor:
        """``[B, L]`` spectra to flattened ``[B, D]`` representations."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 2 or x.shape[1] != self.config.input_length:
            raise ValueError(
                f"expected [B, {self.config.input_length}] input, got {x.shape}")
        p = self.params
        h = x.reshape(x.shape[0], 1, x.shape[1])
        for i, b in enumerate(self.config.blocks):
            h = conv1d(h, p[f"enc.{i}.conv.w"], p[f"enc.{i}.conv.b"], padding="same")
            h = bn_relu_pool(h, p[f"enc.{i}.bn.gamma"], p[f"enc.{i}.bn.beta"],
                             self.buffers[f"enc.{i}.bn.mean"],
                             self.buffers[f"enc.{i}.bn.var"], self.training, b.pool)
        return h.reshape(h.shape[0], -1)

    def _mlp(self, head: str, h: Tensor) -> Tensor:
        p = self.params
        h = linear(h, p[f"{head}.0.w"], p[f"{head}.0.b"]).relu()
        return linear(h, p[f"{head}.1.w"], p[f"{head}.1.b"])

    def embed_head(self, h: Tensor) -> Tensor:
        return self._mlp("emb", h)

    def category_logits(self, h: Tensor) -> Tensor:
        return self._mlp("cat", h)

    def category_head(self, h: Tensor) -> Tensor:
        return softmax_rows(self.category_logits(h))

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        """Eval-mode class probabilities for ``[N, L]`` inputs."""
        return self._batched(x, batch_size, lambda h: self.category_head(h).data)

    def embed(self, x, batch_size: int = 256) -> np.ndarray:
        return self._batched(x, batch_size, lambda h: self.embed_head(h).data)

    def _batched(self, x, batch_size, fn) -> np.ndarray:
        was = self.training
        self.eval()
        try:
            x = np.asarray(x, dtype=np.float64)
            with no_grad():
                outs = [fn(self.encode(x[i:i + batch_size]))
                        for i in range(0, len(x), batch_size)]
        finally:
            self.training = was
        return np.concatenate(outs) if outs else np.zeros((0, 0))

    def predict_class(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Argmax label (lowest index wins ties) and its probability."""
        probs = self.predict_proba(x)
        return argmax_confidence(probs)

    # -- persistence -------------------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {k: t.data for k, t in self.params.items()}
        out.update(self.buffers)
        return out

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {"model": self.config.to_dict()}
        meta.update(extra_meta or {})
        checkpoint.save(path, self.state_arrays(), meta)

    @classmethod
    def load(cls, path) -> tuple["ScdcModel", dict]:
        arrays, meta = checkpoint.load(path)
        model = cls(ModelConfig.from_dict(meta["model"]))
        model.load_arrays(arrays)
        return model.eval(), meta

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        expected = set(self.params) | set(self.buffers)
        if set(arrays) != expected:
            raise checkpoint.CheckpointError("checkpoint arrays do not match model layout")
        for k, t in self.params.items():
            if arrays[k].shape != t.shape:
                raise checkpoint.CheckpointError(f"{k}: shape {arrays[k].shape} != {t.shape}")
            t.data = arrays[k].copy()
        for k in self.buffers:
            self.buffers[k] = arrays[k].copy()


def argmax_confidence(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.argmax(probs, axis=1)
    return labels, probs[np.arange(len(probs)), labels]
