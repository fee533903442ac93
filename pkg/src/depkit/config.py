"""Run configuration: architecture dimensions, training schedule, paths.

The paper profile carries the full-scale defaults; the desk profile shrinks
every dimension while preserving the architecture, for fast local runs.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

DEFAULT_SEED = 94

LOSS_WEIGHTS = {
    "upos": 0.05,
    "xpos": 0.05,
    "feats": 0.2,
    "lemma": 0.05,
    "arc": 0.2,
    "label": 0.8,
}


@dataclass
class RunConfig:
    profile: str = "paper"
    seed: int = DEFAULT_SEED

    # encoder
    d_word: int = 100            # transformed word embedding size
    d_trainable_word: int = 100  # fallback table width when no external file
    d_char_emb: int = 64
    char_filters: tuple = (512, 128, 64)
    char_dilations: tuple = (1, 2, 4)
    char_kernel: int = 3
    hidden: int = 512
    bilstm_layers: int = 2
    root_at_features: bool = False

    # tagger and lemmatizer heads
    upos_hidden: int = 64
    xpos_hidden: int = 64
    feats_hidden: int = 128
    lemma_char_emb: int = 256
    lemma_filters: tuple = (256, 256, 256)
    lemma_dilations: tuple = (1, 2, 4)
    lemma_kernel: int = 3
    lemma_reduce: int = 32
    lemma_slack: int = 5

    # parser
    arc_dim: int = 512
    label_dim: int = 128
    K: int = 3
    cycle_loss: bool = True

    # regularization
    gaussian_dropout_rate: float = 0.25
    gaussian_noise_std: float = 0.2
    dropout: float = 0.25
    recurrent_dropout: float = 0.25
    l2_network: float = 1e-6
    l2_embeddings: float = 1e-5

    # training
    loss_weights: dict = field(default_factory=lambda: dict(LOSS_WEIGHTS))
    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.9
    batch_words: int = 2500
    max_epochs: int = 400
    plateau_patience: int = 10
    lr_reductions_max: int = 2
    self_train: bool = False

    # paths (optional, used by the CLI)
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    raw_path: str | None = None
    embeddings_path: str | None = None
    model_path: str | None = None

    @property
    def d_char_out(self):
        return self.char_filters[-1]

    @property
    def d_concat(self):
        return self.d_word + self.d_char_out

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("char_filters", "char_dilations", "lemma_filters", "lemma_dilations"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("char_filters", "char_dilations", "lemma_filters", "lemma_dilations"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path):
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def desk_profile(**overrides):
    """Small-dimension profile for experiments that must run in seconds."""
    cfg = RunConfig(
        profile="desk",
        d_word=32,
        d_trainable_word=32,
        d_char_emb=16,
        char_filters=(32, 32, 32),
        hidden=64,
        upos_hidden=32,
        xpos_hidden=32,
        feats_hidden=32,
        lemma_char_emb=32,
        lemma_filters=(32, 32, 32),
        lemma_reduce=16,
        arc_dim=64,
        label_dim=32,
        batch_words=500,
        max_epochs=50,
    )
    return dataclasses.replace(cfg, **overrides)


def paper_profile(**overrides):
    return dataclasses.replace(RunConfig(), **overrides)


def make_config(profile="paper", **overrides):
    if profile == "desk":
        return desk_profile(**overrides)
    if profile == "paper":
        return paper_profile(**overrides)
    raise ValueError(f"unknown profile {profile!r}")
