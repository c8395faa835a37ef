"""Sparse wavelet grids for exponentially weighted Besov spaces with mixed smoothness."""
from .besov import BesovParams, DyadicBox, ExponentialWeight, lpw_error, sequence_quasinorm, weight_measure
from .index_calculus import IndexNorm, Mix, ScaledLinf, WeightedL1, check_smoothness_bound, delta_eval
from .sparse_grid import (
    GridParams,
    GridTruncationError,
    SparseGrid,
    build_grid,
    error_bound,
    grid_centers,
    level_threshold,
    truncate,
)
from .wavelets import (
    CoefficientField,
    DyadicTable,
    WaveletBasis,
    analyze,
    build_basis,
    eval_1d,
    eval_tensor,
    reconstruct,
    tabulate,
)

__version__ = "0.1.0"
