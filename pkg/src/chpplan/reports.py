"""CSV reports of year runs and comparisons.

Per run directory:

    run.json             sample, method, horizon, seed, expected_value, total
    year_result.csv      one row per week: cost components, penalties, end state
    weekly/week_XX.csv   hourly trace of the realized week
    biomass_storage.csv  end-of-week biomass level, deliveries and tonnes
    heat_production.csv  weekly demand, CHP, auxiliary and missed heat, power
    options_usage.csv    contracted base/up/down per week and contract, and usage
    plan.csv             the contract plan the run used
    runtimes.csv         wall-clock seconds per solve
    model_sizes.csv      variable and row counts per model shape

Everything but runtimes.csv is a pure function of the run inputs.
"""

import logging
from collections.abc import Sequence
from pathlib import Path

import pandas as pd
from pydantic import BaseModel
from pydantic import ConfigDict

from chpplan.errors import DataError
from chpplan.orchestrator import YearResult
from chpplan.phase1 import PLAN_COLUMNS
from chpplan.phase2 import COMPONENTS
from chpplan.phase2 import TRACE_COLUMNS

logger = logging.getLogger('reports')

FLOAT_FORMAT = '%.6f'

YEAR_COLUMNS = [
    'week',
    'total',
    *COMPONENTS,
    'missed_heat',
    'excess_storage',
    'biomass_level',
    'thermal_level',
    'chp_on',
    'planned_objective',
]
STORAGE_COLUMNS = ['week', 'biomass_level', 'deliveries', 'delivered']
HEAT_COLUMNS = ['week', 'demand', 'q_chp', 'q_aux', 'q_miss', 'p']
OPTIONS_COLUMNS = ['week', 'contract', 'B', 'B_up', 'B_down', 'used_up', 'used_down']
RUNTIME_COLUMNS = ['stage', 'week', 'seconds']
SIZE_COLUMNS = ['model', 'continuous', 'integer', 'binary', 'constraints', 'nonzeros']


class RunRecord(BaseModel):
    """What `compare` needs to know about a finished run."""

    model_config = ConfigDict(frozen=True)

    sample: str
    method: str
    horizon: int
    seed: int
    expected_value: bool
    total: float

    @classmethod
    def of(cls, result: YearResult) -> 'RunRecord':
        return cls(
            sample=result.sample,
            method=result.method,
            horizon=result.horizon,
            seed=result.seed,
            expected_value=result.expected_value,
            total=result.total,
        )


def _write(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    except OSError as e:
        raise DataError(f'cannot write report: {e.strerror}', str(path)) from None
    return path


def _year_frames(result: YearResult | None) -> dict[str, pd.DataFrame]:
    weeks = result.weeks if result is not None else ()
    year, storage, heat, options = [], [], [], []
    for w in weeks:
        end = w.end_state
        year.append(
            (
                w.week + 1,
                w.total,
                *(getattr(w, name) for name in COMPONENTS),
                w.missed_heat,
                w.excess_storage,
                end.biomass_level,
                end.thermal_level,
                int(end.chp_on),
                w.planned_objective,
            )
        )
        trace = w.trace
        storage.append(
            (w.week + 1, end.biomass_level, int(trace['deliveries'].sum()),
             trace['delivered'].sum())
        )
        heat.append(
            (
                w.week + 1,
                trace['demand'].sum(),
                trace['q_chp'].sum(),
                trace['q_aux'].sum(),
                trace['q_miss'].sum(),
                trace['p'].sum(),
            )
        )
        plan = result.plan
        used = {}
        if w.decisions is not None:
            for j, cid in enumerate(w.decisions.contract_ids):
                used[cid] = (w.decisions.up[j].sum(), w.decisions.down[j].sum())
        for j, cid in enumerate(plan.contract_ids):
            if plan.deliveries[j, w.week] == 0:
                continue
            up, down = used.get(cid, (0.0, 0.0))
            options.append(
                (
                    w.week + 1,
                    cid,
                    plan.base[j, w.week],
                    plan.up[j, w.week],
                    plan.down[j, w.week],
                    up,
                    down,
                )
            )
    runtimes = [(r.stage, r.week, r.seconds) for r in result.runtimes] if result else []
    sizes = []
    plan_frame = pd.DataFrame(columns=PLAN_COLUMNS)
    if result:
        sizes = [(label, *s.as_dict().values()) for label, s in result.model_sizes]
        plan_frame = result.plan.to_frame()
    return {
        'year_result.csv': pd.DataFrame(year, columns=YEAR_COLUMNS),
        'biomass_storage.csv': pd.DataFrame(storage, columns=STORAGE_COLUMNS),
        'heat_production.csv': pd.DataFrame(heat, columns=HEAT_COLUMNS),
        'options_usage.csv': pd.DataFrame(options, columns=OPTIONS_COLUMNS),
        'plan.csv': plan_frame,
        'runtimes.csv': pd.DataFrame(runtimes, columns=RUNTIME_COLUMNS),
        'model_sizes.csv': pd.DataFrame(sizes, columns=SIZE_COLUMNS),
    }


def write_year(result: YearResult | None, out_dir: str | Path) -> list[Path]:
    """All per-run files; `None` writes the headers only."""
    root = Path(out_dir)
    weekly = root / 'weekly'
    try:
        weekly.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(
            f'cannot create output directory: {e.strerror}', str(root)
        ) from None
    frames = _year_frames(result)
    written = [_write(frame, root / name) for name, frame in frames.items()]
    if result is None:
        header = pd.DataFrame(columns=TRACE_COLUMNS)
        written.append(_write(header, weekly / 'week_00.csv'))
        return written
    for w in result.weeks:
        written.append(_write(w.trace, weekly / f'week_{w.week + 1:02d}.csv'))
    manifest = root / 'run.json'
    manifest.write_text(RunRecord.of(result).model_dump_json(indent=2) + '\n')
    written.append(manifest)
    logger.info(f'wrote {len(written)} report files to {root}')
    return written


def write_reports(
    results: YearResult | Sequence[YearResult] | pd.DataFrame, out_dir: str | Path
) -> list[Path]:
    """Reports for one run, several runs (one sub-directory each) or a comparison."""
    root = Path(out_dir)
    if isinstance(results, pd.DataFrame):
        root.mkdir(parents=True, exist_ok=True)
        return [_write(results, root / 'comparison.csv')]
    if isinstance(results, YearResult):
        return write_year(results, root)
    if len(results) == 0:
        return write_year(None, root)
    if len(results) == 1:
        return write_year(results[0], root)
    written = []
    for r in results:
        written += write_year(r, root / f'{r.sample}_{r.configuration}_s{r.seed}')
    return written


def read_run(run_dir: str | Path) -> RunRecord:
    path = Path(run_dir) / 'run.json'
    try:
        return RunRecord.model_validate_json(path.read_text())
    except FileNotFoundError:
        raise DataError('run directory has no run.json', str(run_dir)) from None
    except ValueError as e:
        raise DataError(f'unreadable run record: {e}', str(path)) from None
