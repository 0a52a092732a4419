"""
Command-line interface: simulate, grid, guided, train and predict.

Logs go to stderr; machine-readable results are printed to stdout. Exit codes:
0 success, 2 usage or configuration error, 3 unsafe initial state, 4 runtime
fault (QP failure or training divergence).
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence

from config.ecbf_config import (
    DATASET_FILE,
    DEFAULT_SCENARIO,
    ECBF_OUTPUT_DIR,
    FULL_GRID,
    GUIDED_HISTORY_FILE,
    GUIDED_SEARCH,
    LOSS_CURVE_FILE,
    METADATA_FILE,
    MODEL_FILE,
    REFERENCE_TRAJECTORY_FILE,
    RESULTS_FILE,
    SCORE_PLOT,
    SCOREBOARD_FILE,
    SUMMARY_FILE,
    TRAJECTORY_FILE,
    TRAJECTORY_PLOT,
    get_worker_count
)
from src.predictor.mlp import forward, load_model, save_model
from src.predictor.training import TrainConfig, TrainingDivergedError, predict_and_filter, train, write_loss_curve
from src.safety.cbf_filter import FilterFault
from src.search.dataset import export_dataset, load_dataset, write_dataset
from src.search.grid import grid_search, load_grid
from src.search.guided import compare_with_grid, guided_dataset, load_guided_config
from src.simulation.engine import RunResult, simulate, wrist_deviation, write_summary, write_trajectory
from src.simulation.scenario import UnsafeInitialStateError, load_scenario
from src.simulation.scoring import RunRecord, ScoreBoard, score_runs

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSAFE = 3
EXIT_FAULT = 4


def _output_path(args, name: str) -> str:
    os.makedirs(args.output, exist_ok=True)
    return os.path.join(args.output, name)


def _write_metadata(args, started: datetime, extra: Optional[Dict] = None) -> None:
    """Timestamps and arguments go to a sidecar so every other output is reproducible."""
    arguments = {key: value for key, value in vars(args).items() if key != 'handler'}
    data = {
        "command": args.command,
        "arguments": arguments,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat()
    }
    if extra:
        data.update(extra)
    with open(_output_path(args, METADATA_FILE), 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, default=str)


def _print_run(result: RunResult) -> None:
    print(f"good_run={result.good_run} min_h={result.min_h:.10g} run_ctrl={result.run_ctrl:.10g} "
          f"run_tsep={result.run_tsep:.10g} final_err={result.final_err:.10g} fault={result.fault or 'none'}")


def _print_best(board: ScoreBoard) -> None:
    for r_o in board.radii():
        best = board.best(r_o)
        if best is None:
            print(f"r_o={r_o:g} no good run")
        else:
            print(f"r_o={r_o:g} kappa1={best.kappa1:g} kappa2={best.kappa2:g} score={best.score:.6f}")


def _single_run_score(result: RunResult) -> float:
    """Score of a run scored against itself as the whole population."""
    board = score_runs(ScoreBoard([RunRecord.from_result(result)]))
    return board.runs[0].score


def cmd_simulate(args) -> int:
    """Run one scenario and write its trajectory log and summary."""
    started = datetime.now(timezone.utc)
    scenario = load_scenario(args.scenario)
    if args.radius is not None:
        scenario = scenario.with_radius(args.radius)
    if args.kappa1 is not None or args.kappa2 is not None:
        scenario = scenario.with_params(args.kappa1 if args.kappa1 is not None else scenario.cbf.kappa1,
                                        args.kappa2 if args.kappa2 is not None else scenario.cbf.kappa2)
    if args.no_cbf:
        scenario = scenario.with_overrides(cbf_enabled=False)
    if args.no_wrist_lock:
        scenario = scenario.with_overrides(wrist_lock=False)

    result = simulate(scenario)
    write_trajectory(result, _output_path(args, TRAJECTORY_FILE))
    write_summary(result, _output_path(args, SUMMARY_FILE), score=_single_run_score(result))

    reference = None
    extra = {}
    if args.reference:
        reference = simulate(scenario.with_overrides(cbf_enabled=False))
        write_trajectory(reference, _output_path(args, REFERENCE_TRAJECTORY_FILE))
        extra["wrist_deviation"] = wrist_deviation(result, reference)
        print(f"wrist_deviation={extra['wrist_deviation']:.10g}")

    if args.plot:
        from src.simulation.plots import plot_run
        plot_run(result, scenario.obstacle, _output_path(args, TRAJECTORY_PLOT), reference=reference)

    _print_run(result)
    _write_metadata(args, started, extra)
    return EXIT_FAULT if result.fault else EXIT_OK


def cmd_grid(args) -> int:
    """Exhaustive search over the grid config; resumable from the saved scoreboard."""
    started = datetime.now(timezone.utc)
    grid = load_grid(args.grid)
    scenario = load_scenario(args.scenario)
    workers = get_worker_count(args.workers)

    board_path = _output_path(args, SCOREBOARD_FILE)
    board = ScoreBoard()
    if args.resume and os.path.exists(board_path):
        board = ScoreBoard.load(board_path)
        logger.info(f"Loaded {len(board)} runs from {board_path}")

    def save_checkpoint(record: RunRecord) -> None:
        board.save(board_path)

    board = grid_search(grid, scenario, workers=workers, board=board, on_result=save_checkpoint)
    board.save(board_path)
    board.write_results(_output_path(args, RESULTS_FILE))
    write_dataset(export_dataset(board, args.dataset_k), _output_path(args, DATASET_FILE))
    if args.plot:
        from src.simulation.plots import plot_scores
        plot_scores(board, _output_path(args, SCORE_PLOT))

    _print_best(board)
    print(f"runs={len(board)} grid_size={grid.size}")
    _write_metadata(args, started, {"workers": workers})
    return EXIT_OK


def _load_histories(path: str) -> Dict[float, List[RunRecord]]:
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    return {float(r_o): [RunRecord(**run) for run in runs] for r_o, runs in data.items()}


def cmd_guided(args) -> int:
    """Guided search per radius, merged dataset and optional comparison with a grid board."""
    started = datetime.now(timezone.utc)
    config = load_guided_config(args.config)
    if args.radius:
        config = replace(config, radii=tuple(args.radius))
    scenario = load_scenario(args.scenario)
    workers = get_worker_count(args.workers)

    history_path = _output_path(args, GUIDED_HISTORY_FILE)
    histories = _load_histories(history_path) if args.resume and os.path.exists(history_path) else None

    results, board, rows = guided_dataset(config, scenario, k=args.dataset_k, workers=workers, histories=histories)
    with open(history_path, 'w', encoding='utf-8') as f:
        json.dump({str(result.r_o): [run.to_dict() for run in result.board.runs] for result in results}, f, indent=2)

    board.save(_output_path(args, SCOREBOARD_FILE))
    board.write_results(_output_path(args, RESULTS_FILE))
    write_dataset(rows, _output_path(args, DATASET_FILE))

    grid_size = len(load_grid(args.grid).kappa_values) ** 2 if args.grid else None
    grid_board = ScoreBoard.load(args.grid_board) if args.grid_board else None
    for result in results:
        best = result.best_params
        line = f"r_o={result.r_o:g} "
        line += f"kappa1={best.kappa1:g} kappa2={best.kappa2:g} score={result.best_score:.6f}" if best else "no good run"
        line += f" evals={result.evals}"
        if grid_size:
            line += f" grid_size={grid_size}"
        if result.truncated:
            line += " truncated=True"
        print(line)
        if grid_board is not None:
            comparison = compare_with_grid(result, grid_board)
            print(f"r_o={result.r_o:g} guided_score={comparison.guided_score:.6f} "
                  f"grid_best_score={comparison.grid_best_score:.6f} ratio={comparison.ratio:.4f} "
                  f"eval_fraction={comparison.eval_fraction:.4f}")

    _write_metadata(args, started, {"workers": workers})
    return EXIT_OK


def cmd_train(args) -> int:
    """Train the gain predictor on a dataset CSV."""
    started = datetime.now(timezone.utc)
    rows = load_dataset(args.dataset)
    config = TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed, patience=args.patience)
    model = train(rows, config)
    save_model(model, _output_path(args, MODEL_FILE))
    write_loss_curve(model, _output_path(args, LOSS_CURVE_FILE))
    print(f"final_loss={model.metadata['final_loss']:.10g} best_loss={model.metadata['best_loss']:.10g} "
          f"epochs={model.metadata['epochs']}")
    _write_metadata(args, started)
    return EXIT_OK


def cmd_predict(args) -> int:
    """Predict gains for a radius and optionally run the filtered simulation with them."""
    started = datetime.now(timezone.utc)
    model = load_model(args.model)
    kappa1, kappa2 = forward(model, args.radius)
    print(f"kappa1={kappa1:.10g} kappa2={kappa2:.10g}")
    if not args.run:
        return EXIT_OK

    scenario = load_scenario(args.scenario)
    result = predict_and_filter(model, args.radius, scenario)
    write_trajectory(result, _output_path(args, TRAJECTORY_FILE))
    write_summary(result, _output_path(args, SUMMARY_FILE), score=_single_run_score(result))
    if args.plot:
        from src.simulation.plots import plot_run
        plot_run(result, scenario.with_radius(args.radius).obstacle, _output_path(args, TRAJECTORY_PLOT),
                 title=f"r_o={args.radius} predicted kappa1={kappa1:.3f} kappa2={kappa2:.3f}")
    _print_run(result)
    _write_metadata(args, started)
    return EXIT_FAULT if result.fault else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='ECBF safety filter experiments for serial manipulators')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable debug logging')
    parser.add_argument('--output', '-o', default=ECBF_OUTPUT_DIR, help='Output directory')
    subparsers = parser.add_subparsers(dest='command', required=True)

    sim = subparsers.add_parser('simulate', help='Run one scenario')
    sim.add_argument('scenario', nargs='?', default=DEFAULT_SCENARIO, help='Scenario JSON file')
    sim.add_argument('--kappa1', type=float, help='Override kappa1')
    sim.add_argument('--kappa2', type=float, help='Override kappa2')
    sim.add_argument('--radius', type=float, help='Override the obstacle radius (m)')
    sim.add_argument('--no-cbf', action='store_true', help='Run without the safety filter')
    sim.add_argument('--no-wrist-lock', action='store_true', help='Let the filter act on the wrist joints')
    sim.add_argument('--reference', action='store_true', help='Also run without the filter and compare wrist poses')
    sim.add_argument('--plot', action='store_true', help='Write an SVG of the run')
    sim.set_defaults(handler=cmd_simulate)

    grid = subparsers.add_parser('grid', help='Exhaustive grid search')
    grid.add_argument('--grid', default=FULL_GRID, help='Grid config JSON file')
    grid.add_argument('--scenario', default=DEFAULT_SCENARIO, help='Base scenario JSON file')
    grid.add_argument('--workers', help='Worker processes (overrides ECBF_WORKERS)')
    grid.add_argument('--resume', action='store_true', help='Skip combinations already in the saved scoreboard')
    grid.add_argument('--dataset-k', type=int, default=5, help='Dataset rows per radius')
    grid.add_argument('--plot', action='store_true', help='Write a score heat map')
    grid.set_defaults(handler=cmd_grid)

    guided = subparsers.add_parser('guided', help='Guided search per obstacle radius')
    guided.add_argument('--config', default=GUIDED_SEARCH, help='Guided search config JSON file')
    guided.add_argument('--scenario', default=DEFAULT_SCENARIO, help='Base scenario JSON file')
    guided.add_argument('--radius', type=float, nargs='+', help='Radii to search (overrides the config)')
    guided.add_argument('--workers', help='Worker processes, one radius each')
    guided.add_argument('--resume', action='store_true', help='Replay the saved search history first')
    guided.add_argument('--dataset-k', type=int, default=5, help='Dataset rows per radius')
    guided.add_argument('--grid', default=FULL_GRID, help='Grid config used to report the grid size')
    guided.add_argument('--grid-board', help='Scoreboard of a grid search to compare against')
    guided.set_defaults(handler=cmd_guided)

    trainer = subparsers.add_parser('train', help='Train the gain predictor')
    trainer.add_argument('--dataset', required=True, help='Dataset CSV file')
    trainer.add_argument('--epochs', type=int, default=5000, help='Training epochs')
    trainer.add_argument('--lr', type=float, default=0.05, help='Learning rate')
    trainer.add_argument('--seed', type=int, default=0, help='Weight initialisation seed')
    trainer.add_argument('--patience', type=int, default=0, help='Early-stop patience in epochs, 0 disables')
    trainer.set_defaults(handler=cmd_train)

    predict = subparsers.add_parser('predict', help='Predict gains for an obstacle radius')
    predict.add_argument('--model', required=True, help='Model JSON file')
    predict.add_argument('--radius', type=float, required=True, help='Obstacle radius (m)')
    predict.add_argument('--run', action='store_true', help='Run the filtered simulation with the predicted gains')
    predict.add_argument('--scenario', default=DEFAULT_SCENARIO, help='Base scenario JSON file')
    predict.add_argument('--plot', action='store_true', help='Write an SVG of the run')
    predict.set_defaults(handler=cmd_predict)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run a subcommand and map failures to exit codes.

    Returns:
        int: Process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        return args.handler(args)
    except UnsafeInitialStateError as e:
        logger.error(f"Unsafe initial state: {e}")
        return EXIT_UNSAFE
    except FileNotFoundError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except ValueError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (FilterFault, TrainingDivergedError) as e:
        logger.error(f"Runtime fault: {e}")
        return EXIT_FAULT


if __name__ == '__main__':
    sys.exit(main())
