"""Mixing-matrix identification for k-sparse underdetermined mixtures."""

from .datagen import GenConfig, generate, gen_mixing_matrix, gen_sparse_sources, mix
from .evaluation import bas, frob_error, match_columns
from .mixing_id import identify_mixing_evd, identify_mixing_ransac
from .pipeline import identify
from .subspace_id import OcsSet, identify_ocs

__version__ = "0.1.0"
