"""Variant assembly: GRU, GRU-SE, GRU-CM, and GRU-A share the same recurrent
core and head; they differ only in whether embeddings and message passing
exist and in how the conditioning vector is pooled."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conditioning as cond_mod
from . import recurrent as rec_mod
from .autodiff import RngStream, Tensor
from .errors import ConfigError
from .sensors import ActiveSet, SensorCatalog

VARIANTS = ("gru", "gru-se", "gru-cm", "gru-a")
CONDITIONED_VARIANTS = ("gru-se", "gru-cm")


@dataclass
class ModelConfig:
    variant: str
    task: str                      # "classification" | "regression"
    num_classes: int | None = None
    embed_width: int | None = None  # default: half the catalog size
    hidden: int = rec_mod.DEFAULT_HIDDEN
    layers: int = rec_mod.DEFAULT_LAYERS
    head_hidden: int | None = None  # default: hidden
    dropout: float = 0.2
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.task not in ("classification", "regression"):
            raise ConfigError(f"task must be classification or regression, got {self.task!r}")
        if self.task == "classification" and not self.num_classes:
            raise ConfigError("classification needs num_classes")
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError(f"hidden and layers must be positive, got {self.hidden}/{self.layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    def resolved_embed_width(self, catalog_size: int) -> int:
        if self.embed_width is not None:
            return self.embed_width
        return cond_mod.default_embed_width(catalog_size)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "task": self.task, "num_classes": self.num_classes,
            "embed_width": self.embed_width, "hidden": self.hidden, "layers": self.layers,
            "head_hidden": self.head_hidden, "dropout": self.dropout,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class Model:
    config: ModelConfig
    catalog: SensorCatalog
    gru: rec_mod.GruStack
    head: rec_mod.OutputHead
    embeddings: cond_mod.EmbeddingTable | None = None
    condnet: cond_mod.ConditioningNet | None = None
    _params: dict = field(default_factory=dict, repr=False)

    @property
    def variant(self) -> str:
        return self.config.variant

    def parameters(self) -> dict[str, Tensor]:
        """Stable path -> tensor map; embedding paths start with 'embeddings.'
        so the trainer can route them to the momentum-free optimizer."""
        if not self._params:
            out: dict[str, Tensor] = {}
            if self.embeddings is not None:
                out["embeddings.vectors"] = self.embeddings.vectors
            if self.condnet is not None:
                for k, t in self.condnet.tensors().items():
                    out[f"condnet.{k}"] = t
            for k, t in self.gru.tensors().items():
                out[f"gru.{k}"] = t
            for k, t in self.head.tensors().items():
                out[f"head.{k}"] = t
            self._params = out
        return self._params

    def conditioning_for(self, active: ActiveSet, training: bool = False, rng=None):
        """The variant-specific conditioning vector, or None for the plain
        and all-sensors variants."""
        if self.variant == "gru-cm":
            return cond_mod.conditioning_vector(active, self.embeddings, self.condnet,
                                                training, rng)
        if self.variant == "gru-se":
            return cond_mod.conditioning_vector_se(active, self.embeddings)
        return None

    def forward_batch(self, values, active: ActiveSet, training: bool = False, rng=None) -> Tensor:
        cond = self.conditioning_for(active, training, rng)
        return rec_mod.forward_batch(values, cond, self.gru, self.head, training, rng)

    def predict(self, values, active: ActiveSet) -> np.ndarray:
        """Inference on [B, T, d] values: class labels for classification,
        normalized outputs in (0, 1) for regression."""
        out = self.forward_batch(values, active, training=False).data
        if self.config.task == "classification":
            return np.argmax(out, axis=1)
        return out[:, 0]


def build_model(config: ModelConfig, catalog: SensorCatalog, rng: RngStream) -> Model:
    """Initialise a model. Init streams are split per module path so that
    variants share identical recurrent/head initialisation for a given seed."""
    d = catalog.size
    embed_width = config.resolved_embed_width(d)
    conditioned = config.variant in CONDITIONED_VARIANTS
    input_width = d + (embed_width if conditioned else 0)

    embeddings = condnet = None
    if conditioned:
        embeddings = cond_mod.EmbeddingTable.init(d, embed_width, rng.split("embeddings"))
    if config.variant == "gru-cm":
        condnet = cond_mod.ConditioningNet.init(
            embed_width, rng.split("condnet"),
            dropout_rate=config.dropout, leaky_slope=config.leaky_slope)

    gru = rec_mod.GruStack.init(input_width, config.hidden, config.layers, rng.split("gru"))
    out_width = config.num_classes if config.task == "classification" else 1
    head = rec_mod.OutputHead.init(
        config.hidden, config.head_hidden or config.hidden, out_width,
        config.task, rng.split("head"), dropout_rate=config.dropout)
    return Model(config=config, catalog=catalog, gru=gru, head=head,
                 embeddings=embeddings, condnet=condnet)


def clone_model(model: Model) -> Model:
    """Deep copy of all parameter arrays (used by fine-tuning protocols)."""
    twin = build_model(model.config, model.catalog, RngStream(0))
    src, dst = model.parameters(), twin.parameters()
    for key, tensor in dst.items():
        tensor.data = src[key].data.copy()
        tensor.grad = None
    return twin


def set_parameters(model: Model, arrays: dict) -> None:
    params = model.parameters()
    missing = set(params) ^ set(arrays)
    if missing:
        raise ConfigError(f"parameter keys do not match model: {sorted(missing)}")
    for key, tensor in params.items():
        # always copy: the model mutates its tensors in place during training
        # and must never alias a checkpoint's arrays
        tensor.data = np.array(arrays[key], dtype=np.float64, order="C", copy=True)
        tensor.grad = None
