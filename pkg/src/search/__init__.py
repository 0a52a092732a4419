"""
Search Package

Exhaustive and guided search for ECBF gains, and training dataset export.
"""

from .grid import GridSpec, grid_search, load_grid
from .dataset import DatasetRow, export_dataset, load_dataset, write_dataset
from .guided import (
    GridComparison,
    GuidedConfig,
    GuidedResult,
    compare_with_grid,
    guided_dataset,
    guided_search,
    load_guided_config,
    merge_boards,
    reachable_lattice,
    run_guided_radii
)

__all__ = [
    'GridSpec', 'grid_search', 'load_grid',
    'DatasetRow', 'export_dataset', 'load_dataset', 'write_dataset',
    'GridComparison', 'GuidedConfig', 'GuidedResult', 'compare_with_grid', 'guided_dataset',
    'guided_search', 'load_guided_config', 'merge_boards', 'reachable_lattice', 'run_guided_radii'
]
