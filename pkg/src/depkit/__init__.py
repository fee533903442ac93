"""depkit: a jointly trained tagger, lemmatizer, and graph-based dependency
parser with a trace-of-powers cycle penalty on the arc adjacency matrix."""

from .config import RunConfig, desk_profile, make_config, paper_profile
from .conllu import (
    Feats,
    Sentence,
    Token,
    Treebank,
    load_raw_corpus,
    parse_conllu,
    validate_tree,
    write_conllu,
)
from .model import JointModel
from .modelfile import load_model, save_model
from .vocab import build_lexicon, build_trainable_embeddings, load_embeddings

__version__ = "0.1.0"

__all__ = [
    "Feats",
    "JointModel",
    "RunConfig",
    "Sentence",
    "Token",
    "Treebank",
    "build_lexicon",
    "build_trainable_embeddings",
    "desk_profile",
    "load_embeddings",
    "load_model",
    "load_raw_corpus",
    "make_config",
    "paper_profile",
    "parse_conllu",
    "save_model",
    "validate_tree",
    "write_conllu",
    "__version__",
]
