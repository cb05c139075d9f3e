import json
import logging
from collections.abc import Mapping
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pydantic

from chpplan import config
from chpplan.errors import DataError

from .params import ContractSpec
from .params import PlantConfig
from .timeseries import YearSeries
from .timeseries import clip_outliers
from .timeseries import expand_daily_to_hourly
from .timeseries import trim_to_year

logger = logging.getLogger('loader')

QUANTITIES = ('demand', 'elec_price', 'fuel_price')

BUNDLED = {
    'A': 'municipality_a.json',
    'B': 'municipality_b.json',
}


def _format_errors(exc: pydantic.ValidationError, prefix: str) -> str:
    lines = []
    for err in exc.errors():
        loc = '.'.join(str(part) for part in (prefix, *err['loc']) if part != '')
        lines.append(f'{loc}: {err["msg"]}')
    return '; '.join(lines)


def load_and_validate(
    document: str | Path | Mapping[str, Any],
) -> tuple[PlantConfig, list[ContractSpec]]:
    """Parse one municipality document into a plant config and its contracts."""
    if isinstance(document, Mapping):
        doc = dict(document)
        source = '<document>'
    else:
        source = str(document)
        try:
            doc = json.loads(Path(document).read_text())
        except FileNotFoundError:
            raise DataError('config file not found', source) from None
        except json.JSONDecodeError as e:
            raise DataError(f'not valid JSON: {e}', source) from None

    if 'contracts' not in doc:
        raise DataError('Field required', 'contracts')
    raw_contracts = doc.pop('contracts')
    errors = []
    try:
        plant = PlantConfig.model_validate(doc)
    except pydantic.ValidationError as e:
        errors.append(_format_errors(e, ''))
    contracts = []
    for i, raw in enumerate(raw_contracts):
        try:
            contracts.append(ContractSpec.model_validate(raw))
        except pydantic.ValidationError as e:
            errors.append(_format_errors(e, f'contracts.{i}'))
    if errors:
        raise DataError('; '.join(errors), source)

    ids = [c.id for c in contracts]
    if len(set(ids)) != len(ids):
        raise DataError('contract ids must be unique', 'contracts')
    logger.debug(f'loaded {plant.name!r} with {len(contracts)} contracts from {source}')
    return plant, contracts


def bundled_config(municipality: str) -> tuple[PlantConfig, list[ContractSpec]]:
    try:
        filename = BUNDLED[municipality.upper()]
    except KeyError:
        raise DataError(f'no bundled data for {municipality!r}', 'municipality')
    text = resources.files('chpplan.data').joinpath(filename).read_text()
    return load_and_validate(json.loads(text))


def read_series(path: str | Path) -> pd.Series:
    """Read a `timestamp,value` CSV, imputing isolated gaps by interpolation."""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError('series file not found', str(path)) from None
    if list(frame.columns) != ['timestamp', 'value']:
        raise DataError(
            f'expected header timestamp,value got {",".join(frame.columns)}', str(path)
        )
    index = pd.to_datetime(frame['timestamp'], utc=True)
    series = pd.Series(frame['value'].astype(float).to_numpy(), index=index)
    if series.isna().any():
        logger.warning(f'{path}: imputing {int(series.isna().sum())} missing values')
        series = series.interpolate(limit_direction='both')
    return series


def _is_daily(series: pd.Series) -> bool:
    if len(series) < 2:
        return False
    step = series.index[1] - series.index[0]
    return step >= pd.Timedelta(days=1)


def load_year(
    files: Mapping[str, str | Path],
    label: str,
    n_hours: int = config.HOURS_PER_YEAR,
) -> YearSeries:
    """One summer-to-summer year from per-quantity CSV files."""
    values = {}
    for quantity in QUANTITIES:
        if quantity not in files:
            raise DataError(f'missing {quantity} series', label)
        series = read_series(files[quantity])
        arr = series.to_numpy()
        if _is_daily(series):
            arr = expand_daily_to_hourly(arr)
        arr = trim_to_year(arr, n_hours)
        if quantity == 'elec_price':
            arr = clip_outliers(arr)
        values[quantity] = arr
    return YearSeries(label, **values)


def load_archive(
    directory: str | Path, n_hours: int = config.HOURS_PER_YEAR
) -> list[YearSeries]:
    """All `<quantity>_<year>.csv` triples in `directory`, oldest first."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError('archive directory not found', str(root))
    labels = sorted({p.stem.rsplit('_', 1)[-1] for p in root.glob('demand_*.csv')})
    if not labels:
        raise DataError('no demand_<year>.csv files', str(root))
    years = []
    for label in labels:
        files = {q: root / f'{q}_{label}.csv' for q in QUANTITIES}
        years.append(load_year(files, label, n_hours))
    logger.info(f'archive {root}: years {", ".join(labels)}')
    return years


def load_sample(
    directory: str | Path,
    label: str | None = None,
    n_hours: int = config.HOURS_PER_YEAR,
) -> YearSeries:
    """A realization to evaluate against: `demand.csv`, `elec_price.csv`, ..."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError('sample directory not found', str(root))
    files = {q: root / f'{q}.csv' for q in QUANTITIES}
    return load_year(files, label or root.name, n_hours)


def write_series(path: str | Path, values: np.ndarray, start: str = '2016-06-01'):
    index = pd.date_range(start, periods=len(values), freq='h', tz='UTC')
    stamps = index.strftime('%Y-%m-%dT%H:%M:%S%z')
    frame = pd.DataFrame({'timestamp': stamps, 'value': values})
    frame.to_csv(path, index=False, lineterminator='\n')
