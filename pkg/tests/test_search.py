"""
Unit tests for the grid search, the guided search and dataset export.
"""

import os
import tempfile
import unittest

from config.ecbf_config import FULL_GRID, GUIDED_SEARCH
from src.manipulator.model import ConfigurationError
from src.search.dataset import export_dataset, load_dataset, write_dataset
from src.search.grid import GridSpec, grid_search, load_grid
from src.search.guided import (
    GuidedConfig,
    compare_with_grid,
    guided_dataset,
    guided_search,
    load_guided_config,
    merge_boards,
    reachable_lattice
)
from src.simulation.scoring import ScoreBoard
from tests.fixtures import record, ur10_scenario


class CountingEvaluator:
    """Run effort grows with every call, so each run scores below all earlier ones."""

    def __init__(self):
        self.calls = 0

    def __call__(self, r_o, kappa1, kappa2):
        self.calls += 1
        return record(kappa1, kappa2, r_o=r_o, run_ctrl=float(self.calls), run_tsep=1.0)


class ImprovingEvaluator(CountingEvaluator):
    """Run effort shrinks with every call, so each run is a new best."""

    def __call__(self, r_o, kappa1, kappa2):
        self.calls += 1
        return record(kappa1, kappa2, r_o=r_o, run_ctrl=1.0 / self.calls, run_tsep=1.0)


def bowl(r_o, kappa1, kappa2):
    """Effort landscape with its minimum at (9, 7)."""
    return record(kappa1, kappa2, r_o=r_o, run_ctrl=(kappa1 - 9) ** 2 + (kappa2 - 7) ** 2 + 1.0, run_tsep=1.0)


def never(r_o, kappa1, kappa2):
    raise AssertionError(f"unexpected evaluation of ({r_o}, {kappa1}, {kappa2})")


class TestGuidedConfig(unittest.TestCase):
    """Test cases for guided search settings."""

    def test_defaults(self):
        """Test the default guided search settings."""
        config = GuidedConfig()
        self.assertEqual((config.gamma, config.i_limit, config.j_limit), (2.0, 3, 3))
        self.assertEqual(config.kappa2_cap_ratio, 1.3)
        self.assertEqual(config.budget, 200)

    def test_shipped_file(self):
        """Test loading the shipped guided search settings."""
        config = load_guided_config(GUIDED_SEARCH)
        self.assertEqual(len(config.radii), 8)
        self.assertEqual(GuidedConfig.from_dict(config.to_dict()), config)

    def test_rejects_invalid_values(self):
        """Test rejection of invalid guided search settings."""
        with self.assertRaises(ConfigurationError):
            GuidedConfig(gamma=0.0)
        with self.assertRaises(ConfigurationError):
            GuidedConfig(i_limit=0)
        with self.assertRaises(ConfigurationError):
            GuidedConfig(kappa_max=0.5)
        with self.assertRaises(ConfigurationError):
            GuidedConfig.from_dict({"gama": 2.0})


class TestGuidedSearch(unittest.TestCase):
    """Test cases for the two-counter guided search."""

    def test_decreasing_scores_trace(self):
        """Test the visiting order when every score decreases."""
        config = GuidedConfig(i_limit=2, j_limit=2)
        result = guided_search(config, 0.2, evaluator=CountingEvaluator())
        expected = [(1, 1), (1, 3), (3, 1), (3, 3), (3, 5), (5, 1), (5, 3), (5, 5)]
        self.assertEqual(result.sequence, [(float(a), float(b)) for a, b in expected])
        self.assertEqual(result.evals, 8)
        self.assertEqual(result.termination, 'j_limit')
        self.assertFalse(result.truncated)
        self.assertEqual((result.best_params.kappa1, result.best_params.kappa2), (1.0, 1.0))
        self.assertEqual(result.best_score, 1.0)

    def test_finds_bowl_minimum(self):
        """Test that the guided search finds the best point of a score bowl."""
        config = GuidedConfig()
        result = guided_search(config, 0.2, evaluator=bowl)
        self.assertEqual((result.best_params.kappa1, result.best_params.kappa2), (9.0, 7.0))
        self.assertEqual(result.evals, 43)
        best_seen = max(result.board.runs, key=lambda run: run.score)
        self.assertEqual((best_seen.kappa1, best_seen.kappa2), (9.0, 7.0))

    def test_kappa2_cap_respected(self):
        """Test that kappa2 never exceeds its cap relative to kappa1."""
        config = GuidedConfig()
        for evaluator in (bowl, CountingEvaluator(), ImprovingEvaluator()):
            result = guided_search(GuidedConfig(kappa_max=20.0), 0.2, evaluator=evaluator)
            for kappa1, kappa2 in result.sequence:
                self.assertLess(kappa2, config.kappa2_cap_ratio * kappa1 + config.gamma)
                self.assertLessEqual(kappa2, 20.0)

    def test_kappa_max_termination(self):
        """Test termination at the largest allowed gain."""
        result = guided_search(GuidedConfig(kappa_max=5.0), 0.2, evaluator=ImprovingEvaluator())
        expected = [(1, 1), (1, 3), (3, 1), (3, 3), (3, 5), (5, 1), (5, 3), (5, 5)]
        self.assertEqual(result.sequence, [(float(a), float(b)) for a, b in expected])
        self.assertEqual(result.termination, 'kappa_max')

    def test_budget_truncates(self):
        """Test that the evaluation budget truncates the search."""
        result = guided_search(GuidedConfig(budget=5), 0.2, evaluator=bowl)
        self.assertEqual(result.evals, 5)
        self.assertTrue(result.truncated)
        self.assertEqual(result.termination, 'budget')
        self.assertIsNotNone(result.best_params)

    def test_no_good_runs(self):
        """Test the result when no run is good."""
        def failing(r_o, kappa1, kappa2):
            return record(kappa1, kappa2, r_o=r_o, good_run=False, min_h=-0.1)

        result = guided_search(GuidedConfig(budget=20), 0.2, evaluator=failing)
        self.assertIsNone(result.best_params)
        self.assertEqual(result.best_score, 0.0)

    def test_needs_scenario_or_evaluator(self):
        """Test that a search needs something to evaluate."""
        with self.assertRaises(ConfigurationError):
            guided_search(GuidedConfig(), 0.2)

    def test_full_history_replays_without_evaluating(self):
        """Test that a complete history is replayed without new runs."""
        first = guided_search(GuidedConfig(), 0.2, evaluator=bowl)
        again = guided_search(GuidedConfig(), 0.2, evaluator=never, history=first.board.runs)
        self.assertEqual(again.sequence, first.sequence)
        self.assertEqual([run.to_dict() for run in again.board.runs], [run.to_dict() for run in first.board.runs])

    def test_partial_history_resumes(self):
        """Test resuming from a partial history."""
        first = guided_search(GuidedConfig(), 0.2, evaluator=bowl)
        calls = []

        def counted(r_o, kappa1, kappa2):
            calls.append((kappa1, kappa2))
            return bowl(r_o, kappa1, kappa2)

        again = guided_search(GuidedConfig(), 0.2, evaluator=counted, history=first.board.runs[:10])
        self.assertEqual(again.sequence, first.sequence)
        self.assertEqual(calls, first.sequence[10:])

    def test_diverging_history_is_dropped(self):
        """Test that a history that disagrees with the search is discarded."""
        history = [bowl(0.2, 5.0, 5.0)]
        with self.assertLogs('src.search.guided', level='WARNING'):
            result = guided_search(GuidedConfig(), 0.2, evaluator=bowl, history=history)
        self.assertEqual(result.sequence[0], (1.0, 1.0))
        self.assertEqual(result.evals, 43)

    def test_compare_with_grid(self):
        """Test the comparison of guided and grid results."""
        grid = GridSpec((0.2,), tuple(range(1, 21, 2)))
        grid_board = grid_search(grid, ur10_scenario(), evaluator=bowl)
        guided = guided_search(GuidedConfig(), 0.2, evaluator=bowl)
        comparison = compare_with_grid(guided, grid_board)
        self.assertEqual(comparison.ratio, 1.0)
        self.assertEqual(comparison.grid_evals, 100)
        self.assertAlmostEqual(comparison.eval_fraction, 0.43)

    def test_reachable_lattice_covers_search(self):
        """Test that every pair a search visits lies on the reachable lattice."""
        config = GuidedConfig()
        lattice = reachable_lattice(config)
        self.assertEqual(len(lattice), len(set(lattice)))
        self.assertEqual(lattice[:3], [(1.0, 1.0), (1.0, 3.0), (3.0, 1.0)])
        for evaluator in (bowl, CountingEvaluator(), ImprovingEvaluator()):
            result = guided_search(config, 0.2, evaluator=evaluator)
            self.assertTrue(set(result.sequence) <= set(lattice))
        self.assertTrue(all(k1 <= 100.0 and k2 <= 100.0 for k1, k2 in lattice))

    def test_compare_needs_grid_runs_at_radius(self):
        """Test that the comparison needs grid runs at the same radius."""
        guided = guided_search(GuidedConfig(budget=3), 0.2, evaluator=bowl)
        with self.assertRaises(ConfigurationError):
            compare_with_grid(guided, ScoreBoard([record(1, 1, r_o=0.4)]))

    def test_merge_boards(self):
        """Test merging scoreboards."""
        first = guided_search(GuidedConfig(budget=4), 0.2, evaluator=bowl)
        second = guided_search(GuidedConfig(budget=3), 0.4, evaluator=bowl)
        merged = merge_boards([second, first])
        self.assertEqual(len(merged), 7)
        self.assertEqual(merged.radii(), [0.2, 0.4])
        self.assertEqual([run.key for run in merged.runs], sorted(run.key for run in merged.runs))

    def test_guided_dataset_from_simulations(self):
        """Test the guided dataset built from real simulations."""
        config = GuidedConfig(budget=3, radii=(0.1, 0.2))
        results, board, rows = guided_dataset(config, ur10_scenario(), k=2)
        self.assertEqual([result.r_o for result in results], [0.1, 0.2])
        self.assertEqual([result.evals for result in results], [3, 3])
        self.assertEqual(len(board), 6)
        self.assertEqual([row.r_o for row in rows], [0.1, 0.1, 0.2, 0.2])
        self.assertEqual([row.rank for row in rows], [1, 2, 1, 2])


class TestGridSearch(unittest.TestCase):
    """Test cases for the exhaustive search."""

    def setUp(self):
        self.grid = GridSpec((0.1, 0.2), (1.0, 3.0, 5.0))
        self.scenario = ur10_scenario()

    def test_full_grid_size(self):
        """Test the size of the shipped full grid."""
        grid = load_grid(FULL_GRID)
        self.assertEqual(grid.size, 1352)
        self.assertEqual(len(grid.combinations()), 1352)

    def test_rejects_invalid_grids(self):
        """Test rejection of invalid grid files."""
        with self.assertRaises(ConfigurationError):
            GridSpec((), (1.0,))
        with self.assertRaises(ConfigurationError):
            GridSpec((0.2, 0.1), (1.0,))
        with self.assertRaises(ConfigurationError):
            GridSpec((0.1,), (0.0, 1.0))

    def test_runs_every_combination(self):
        """Test that the grid evaluates every combination once."""
        board = grid_search(self.grid, self.scenario, evaluator=bowl)
        self.assertEqual(len(board), 18)
        self.assertEqual([run.key for run in board.runs], self.grid.combinations())

    def test_order_independent(self):
        """Test that evaluation order does not change the scoreboard."""
        ordered = grid_search(self.grid, self.scenario, evaluator=bowl)
        shuffled = grid_search(self.grid, self.scenario, evaluator=bowl, shuffle_seed=7)
        self.assertEqual(ordered.to_dict(), shuffled.to_dict())

    def test_resume_skips_existing_runs(self):
        """Test that resuming skips evaluated combinations."""
        board = ScoreBoard([bowl(0.1, 1.0, 1.0), bowl(0.2, 5.0, 3.0)])
        calls = []

        def counted(r_o, kappa1, kappa2):
            calls.append((r_o, kappa1, kappa2))
            return bowl(r_o, kappa1, kappa2)

        grid_search(self.grid, self.scenario, board=board, evaluator=counted)
        self.assertEqual(len(calls), 16)
        self.assertNotIn((0.1, 1.0, 1.0), calls)
        self.assertEqual(len(board), 18)

    def test_single_run_grid(self):
        """Test a grid with a single combination."""
        board = grid_search(GridSpec((0.2,), (3.0,)), self.scenario)
        self.assertEqual(len(board), 1)
        self.assertTrue(board.runs[0].good_run)
        self.assertEqual(board.runs[0].score, 1.0)

    def test_checkpoint_callback(self):
        """Test the per-run checkpoint callback."""
        seen = []
        grid_search(self.grid, self.scenario, evaluator=bowl, on_result=seen.append)
        self.assertEqual(len(seen), 18)


class TestDataset(unittest.TestCase):
    """Test cases for dataset export."""

    def test_top_k_per_radius(self):
        """Test selecting the top runs per radius."""
        board = grid_search(GridSpec((0.1, 0.2), tuple(range(1, 16, 2))), ur10_scenario(), evaluator=bowl)
        rows = export_dataset(board, 5)
        self.assertEqual(len(rows), 10)
        first = [row for row in rows if row.r_o == 0.1]
        self.assertEqual([row.rank for row in first], [1, 2, 3, 4, 5])
        self.assertEqual((first[0].kappa1, first[0].kappa2), (9.0, 7.0))
        scores = [row.score for row in first]
        self.assertEqual(scores, sorted(scores, reverse=True))

    def test_ties_go_to_smaller_gains(self):
        """Test that equal scores rank the smaller gains first."""
        board = ScoreBoard([record(5, 5), record(3, 7), record(3, 5), record(1, 9, run_ctrl=20.0)])
        board.rescore()
        rows = export_dataset(board, 3)
        self.assertEqual([(row.kappa1, row.kappa2) for row in rows], [(3.0, 5.0), (3.0, 7.0), (5.0, 5.0)])

    def test_k_larger_than_good_runs(self):
        """Test a k larger than the number of good runs."""
        board = ScoreBoard([record(1, 1), record(3, 3, good_run=False)])
        board.rescore()
        self.assertEqual(len(export_dataset(board, 5)), 1)

    def test_radius_without_good_runs(self):
        """Test a radius without good runs."""
        board = ScoreBoard([record(1, 1, r_o=0.1), record(1, 1, r_o=0.6, good_run=False)])
        board.rescore()
        with self.assertLogs('src.search.dataset', level='WARNING'):
            rows = export_dataset(board, 5)
        self.assertEqual([row.r_o for row in rows], [0.1])

    def test_rejects_k_below_one(self):
        """Test rejection of k below one."""
        with self.assertRaises(ConfigurationError):
            export_dataset(ScoreBoard(), 0)

    def test_csv_round_trip(self):
        """Test writing and reading the dataset CSV."""
        board = ScoreBoard([record(1, 1), record(3, 3, run_ctrl=20.0)])
        board.rescore()
        rows = export_dataset(board, 5)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_dataset(write_dataset(rows, os.path.join(tmp, 'dataset.csv')))
        self.assertEqual(loaded, rows)

    def test_missing_dataset(self):
        """Test the error for a missing dataset file."""
        with self.assertRaises(FileNotFoundError):
            load_dataset('/nonexistent/dataset.csv')


if __name__ == '__main__':
    unittest.main()
