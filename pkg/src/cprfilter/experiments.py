"""
Running configured experiments and writing their output files
--------------------------------------------------------------

Every run writes three files into its output directory:

``solution.csv``
    columns ``x, u``; the final solution evaluated at ``sample_resolution``
    equispaced points per element, element endpoints included (so interface
    points appear twice and jumps stay visible).
``energy.csv``
    columns ``t, mass, energy_M, energy_MFinv, max_epsilon``, one row per time
    level.
``meta.json``
    the resolved configuration, the package version and run flags.

Floats are written with 17 significant digits so that they round-trip exactly.

.. autofunction:: execute
.. autofunction:: sweep
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from cprfilter.config import ExperimentConfig
from cprfilter.errors import BlowUpError
from cprfilter.timestepping import RunRecord, Strategy, run

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
THREADS_VARIABLE = "SOLVER_THREADS"


@dataclass(frozen=True)
class ExecutionResult:
    record: RunRecord
    out_dir: Path
    blew_up: bool


# {{{ output

def sample_solution(record: RunRecord, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Equispaced samples of the final solution, element by element."""
    state = record.final_state
    xi = np.linspace(-1.0, 1.0, resolution)
    x = state.mesh.physical_points(xi)
    u = state.ops.evaluate(state.u, xi)
    return x.ravel(), u.ravel()


def _write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> None:
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",",
               header=",".join(header), comments="")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "value"):
        return value.value
    return value


def write_outputs(record: RunRecord, config: ExperimentConfig, out_dir: Path) -> None:
    from cprfilter import __version__

    out_dir.mkdir(parents=True, exist_ok=True)

    x, u = sample_solution(record, config.sample_resolution)
    _write_csv(out_dir / "solution.csv", ["x", "u"], [x, u])
    _write_csv(
        out_dir / "energy.csv",
        ["t", "mass", "energy_M", "energy_MFinv", "max_epsilon"],
        [record.times, record.mass, record.energy_M, record.energy_MFinv,
         record.max_epsilon],
    )

    meta = {
        "version": __version__,
        "config": config.as_dict(),
        "run": {k: v for k, v in record.metadata.items() if k not in config.as_dict()},
        "completed_steps": record.steps,
        "blowup_step": record.blowup_step,
    }
    with open(out_dir / "meta.json", "w") as f:
        json.dump(_jsonable(meta), f, indent=2, sort_keys=True)
        f.write("\n")

# }}}


def execute(config: ExperimentConfig, out_dir: str | Path) -> ExecutionResult:
    """Run *config* and write its output files into *out_dir*.

    A blow-up is not raised; the output up to the last finite time level is
    written and the result is flagged. I/O failures propagate as
    :exc:`OSError`.
    """
    out_dir = Path(out_dir)
    try:
        record = run(config)
        blew_up = False
    except BlowUpError as exc:
        if exc.record is None:
            raise
        record = exc.record
        blew_up = True
        logger.error("run blew up at step %d", exc.step)

    write_outputs(record, config, out_dir)
    return ExecutionResult(record=record, out_dir=out_dir, blew_up=blew_up)


# {{{ sweeps

SUMMARY_COLUMNS = ("epsilon", "s", "final_energy", "min_u", "max_u", "blew_up")


def _sweep_point(args: tuple[ExperimentConfig, Path]) -> tuple[Any, ...]:
    config, out_dir = args
    result = execute(config, out_dir)
    _, u = sample_solution(result.record, config.sample_resolution)
    return (
        config.epsilon,
        config.s,
        float(result.record.energy_M[-1]),
        float(np.min(u)),
        float(np.max(u)),
        int(result.blew_up),
    )


def max_workers() -> int:
    """Worker count: :envvar:`SOLVER_THREADS` if set, else the CPU count."""
    text = os.environ.get(THREADS_VARIABLE)
    if text:
        try:
            n = int(text)
        except ValueError:
            raise ValueError(f"{THREADS_VARIABLE} must be an integer, got {text!r}") from None
        return max(n, 1)
    return os.cpu_count() or 1


def sweep_configs(
    config: ExperimentConfig, epsilons: Sequence[float], orders: Sequence[int]
) -> list[ExperimentConfig]:
    """One fixed-strength configuration per grid point.

    Adaptive or unfiltered base configurations are turned into fixed-strength
    split filtering; ε = 0 then reproduces the unfiltered run exactly.
    """
    strategy = config.strategy
    if strategy is Strategy.NONE:
        strategy = Strategy.SPLIT
    return [
        config.replace(strategy=strategy, strength_policy="fixed", epsilon=float(eps), s=int(s))
        for s in orders
        for eps in epsilons
    ]


def sweep(
    config: ExperimentConfig,
    epsilons: Sequence[float],
    orders: Sequence[int],
    out_dir: str | Path,
) -> list[tuple[Any, ...]]:
    """Run a grid over filter strength and order.

    Each run goes to ``out_dir/s<s>_eps<epsilon>``; the summary rows (also
    written to ``out_dir/summary.csv``) follow :data:`SUMMARY_COLUMNS`.
    Runs that blow up are recorded and the sweep continues.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [
        (cfg, out_dir / f"s{cfg.s}_eps{cfg.epsilon:g}")
        for cfg in sweep_configs(config, epsilons, orders)
    ]

    workers = min(max_workers(), len(jobs))
    if workers <= 1:
        rows = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))

    with open(out_dir / "summary.csv", "w") as f:
        f.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(FLOAT_FORMAT % v if isinstance(v, float) else str(v)
                             for v in row) + "\n")

    return rows

# }}}


__all__ = [
    "ExecutionResult",
    "SUMMARY_COLUMNS",
    "execute",
    "max_workers",
    "sample_solution",
    "sweep",
    "sweep_configs",
    "write_outputs",
]
