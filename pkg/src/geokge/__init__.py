"""Geospatial knowledge-graph embeddings with geometric feature alignment."""

__version__ = "0.1.0"

from . import evaluate, features, geometry, kernels, kgdata, model, optim, synth, train
from .errors import GeokgeError
from .geometry import Geometry, GeometryError, de9im, de9im_matches
from .kgdata import Triple, Vocabulary, ingest_triples, split_dataset
from .model import EmbeddingSpace, init_params
from .train import TrainConfig, load_checkpoint, save_checkpoint

__all__ = [
    "__version__",
    "evaluate", "features", "geometry", "kernels", "kgdata",
    "model", "optim", "synth", "train",
    "GeokgeError",
    "Geometry",
    "GeometryError",
    "de9im",
    "de9im_matches",
    "Triple",
    "Vocabulary",
    "ingest_triples",
    "split_dataset",
    "EmbeddingSpace",
    "init_params",
    "TrainConfig",
    "load_checkpoint",
    "save_checkpoint",
]
