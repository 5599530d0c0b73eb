"""Classical text classification over pluggable embeddings.

Pipeline pieces: corpus loading, normalization, featurization (TF-IDF,
pooled word vectors, precomputed sentence vectors, optional PCA), class
rebalancing by lexical augmentation, eight classical learners behind one
train/predict contract, grid search, and dual F1 evaluation.
"""

from hopeml.corpus import ClassLabel, Document, LabeledCorpus, class_counts, load_corpus, write_corpus
from hopeml.metrics import EvalReport, evaluate, format_report
from hopeml.features import (
    EmbeddingTable,
    FeatureMatrix,
    PcaModel,
    Vocabulary,
    load_embedding_table,
    load_precomputed_vectors,
    pca_fit,
    pca_transform,
    pool_document,
    tfidf_fit,
    tfidf_transform,
)
from hopeml.augment import AugmentConfig, balance_classes, random_deletion, random_insertion, random_swap
from hopeml.models import TrainConfig, TrainedModel, load_model, predict, predict_proba, save_model, train
from hopeml.tuning import DEFAULT_GRIDS, GridSpec, TrialResult, enumerate_grid, run_grid_search
from hopeml.cli import ExperimentConfig, run_experiment

__version__ = "0.1.0"
