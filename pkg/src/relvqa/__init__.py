"""Relation-aware graph attention for visual question answering.

The library builds implicit, spatial, and semantic relation graphs over
detected image regions, encodes them with question-adaptive multi-head graph
attention, fuses the relation-aware features with a pooled question vector,
predicts answers with a two-layer head, and ensembles the three relation
models at inference time. Everything runs on a small numpy-backed
reverse-mode autodiff core with a finite-difference gradient checker.
"""

from . import autodiff, config, data, encoders, fusion, geometry, graphs, model, question, training
from .autodiff import (
    ConfigError,
    DimensionError,
    GradCheckReport,
    Node,
    ParamStore,
    ValidationError,
    backward,
    gradcheck,
    load_checkpoint,
    save_checkpoint,
)
from .config import LrSchedule, RunConfig, lr_at
from .data import VqaExample, generate_synthetic, load_dataset, oracle_answer, save_dataset
from .geometry import BBox, classify_spatial, inverse_spatial_class, relative_geometry, sinusoidal_embed
from .graphs import RegionSet, RelationGraph, SemanticTriple, build_implicit, build_semantic, build_spatial
from .model import PreparedExample, RelationModel, full_pipeline_gradcheck, prepare_example
from .question import TokenSequence, Vocabulary, encode_question, gru_step
from .fusion import answer_distribution, bce_loss, ensemble, fuse_butd, predict, vqa_accuracy
from .training import OptimizerState, adamax_step, evaluate_ensemble, evaluate_model, train

__version__ = "0.1.0"
