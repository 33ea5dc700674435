"""Genetic-algorithm optimised similarity graphs for importance-based classification."""

__version__ = "0.1.0"

from .baselines import (ConfusionCounts, Metrics, SyntheticSpec, confusion_counts,
                        generate_synthetic, knng_classify, metrics)
from .evolve import GaConfig, GanetModel, Genome, run_ganet
from .graphcore import (ClassGraph, ImportanceConfig, MapMatrix, SimilarityMatrix,
                        build_map_all, classify, compute_similarity, decode,
                        degree_importance, pagerank_importance)
from .modelfile import load_model, save_model
from .spectra import (PreprocessConfig, SpectrumDataset, SplitSpec, load_csv,
                      normalize_amide, preprocess, save_csv, savgol_smooth,
                      split_by_subject, truncate)
