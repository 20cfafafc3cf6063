"""Spatial-spectral hyperspectral classification with spectral-angle unaries and Potts MRFs."""
from .hypercube import (DataError, LabelMap, SpectralCube, Split, SplitSpec, filter_classes, load_cube,
                        load_labels, make_split, normalize_bands, write_cube, write_labels)
from .maxflow import CutResult, FlowNetwork, cut_capacity, max_flow
from .mrf import (GridGraph, PottsParams, alpha_expansion, exact_minimize, expansion_move, partition_function,
                  potts, total_energy)
from .protocol import ExperimentConfig, ResultTable, TrialResult, overall_accuracy, run_experiment, run_trial, select_beta
from .spectral import EsamParams, SeParams, esam, kernel_matrix, se_kernel, spectral_angle
from .unary import (LrModel, TrainingSet, UnaryField, load_external_probabilities, lr_probabilities, neglog_unary,
                    sam_unary, train_lr)

__version__ = "0.1.0"
