"""Small synthetic plants and the demand-spike fixture.

The spike fixture runs at 24 hours per week. Demand is 5 MW every hour except
in `spike_week`, where it jumps to 12 MW. The shipped plan delivers 170 t a
week with an 85 t up-option. Covering the spike needs roughly 80 t of extra
biomass in storage at the start of the spike week, so only a horizon that
sees the spike one week ahead can buy the week-before up-option in time.
"""

import dataclasses as dtc
import json
from pathlib import Path

import numpy as np

from chpplan import config
from chpplan.domain.loader import QUANTITIES
from chpplan.domain.loader import write_series
from chpplan.domain.params import ContractSpec
from chpplan.domain.params import PlantConfig
from chpplan.domain.timeseries import YearSeries
from chpplan.phase1 import ContractPlan

SPIKE_HOURS_PER_WEEK = 24

SPIKE_WEEKS = 12

SPIKE_WEEK = 6

ARCHIVE_LABELS = ('2011', '2012', '2013', '2014', '2015')

SAMPLE_LABEL = '2016'

TOY_PLANT = {
    'name': 'toy',
    'chp': {
        'p_max': 10,
        'p_min': 1,
        'q_max': 10,
        'theta': -0.2,
        'xi': 0.5,
        'ramp_up': 10,
        'ramp_down': 10,
        'eff_power': 0.5,
        'eff_heat': 0.5,
        'min_up': 1,
        'min_down': 1,
    },
    'aux': {'q_max': 2, 'eff': 1.0, 'om_cost': 100, 'tax': 0, 'co2_tax': 0},
    'biomass_storage': {
        'cap': 10000,
        'safety_high': 0,
        'safety_low': 0,
        'heating_season': [1, 1],
        'max_outflow': 100,
        'delivery_gap': 0,
        'initial': 20,
        'calorific': 1.0,
        'inventory_cost': 0.001,
    },
    'thermal_storage': {'cap_min': 0, 'cap_max': 0, 'max_flow': 1, 'initial': 0},
    'cost': {
        'chp_op': 2,
        'startup': 0,
        'shutdown': 0,
        'elec_tax': 10,
        'biomass_incentive': 0,
        'biomass_share_target': 0,
        'penalty_store': 1000,
        'penalty_miss': 10000,
        'penalty_bm': 0,
    },
}

SPIKE_CONTRACT = {
    'id': 'S',
    'base_price': 50,
    'up_price': 20,
    'down_price': 20,
    'amount_min': 0,
    'amount_max': 300,
    'freq': 24,
    'deliveries_min': 0,
    'deliveries_max': SPIKE_WEEKS,
    'opt_up': 0.5,
    'opt_down': 0,
}


def toy_plant(**overrides) -> PlantConfig:
    """The toy plant, with top-level sections replaced by `overrides`."""
    doc = {**TOY_PLANT, **overrides}
    return PlantConfig.model_validate(doc)


def spike_contract(**overrides) -> ContractSpec:
    return ContractSpec.model_validate({**SPIKE_CONTRACT, **overrides})


def flat_year(
    label: str,
    n_weeks: int,
    hours_per_week: int,
    demand: float,
    elec_price: float = 0.0,
    fuel_price: float = 30.0,
    spike_week: int | None = None,
    spike_demand: float = 12.0,
) -> YearSeries:
    """Constant series, with `spike_demand` over the 0-based `spike_week`."""
    n_hours = n_weeks * hours_per_week
    load = np.full(n_hours, float(demand))
    if spike_week is not None:
        start = spike_week * hours_per_week
        load[start : start + hours_per_week] = spike_demand
    elec = np.full(n_hours, float(elec_price))
    return YearSeries(label, load, elec, np.full(n_hours, float(fuel_price)))


def flat_archive(
    n_weeks: int,
    hours_per_week: int,
    demand: float = 5.0,
    spike_week: int | None = None,
    labels=ARCHIVE_LABELS,
    **kwargs,
) -> list[YearSeries]:
    return [
        flat_year(
            label, n_weeks, hours_per_week, demand, spike_week=spike_week, **kwargs
        )
        for label in labels
    ]


def spike_plan(n_weeks: int = SPIKE_WEEKS) -> ContractPlan:
    ones = np.ones((1, n_weeks))
    return ContractPlan(
        ('S',), np.array([True]), ones.astype(int), 170 * ones, 85 * ones, 0 * ones
    )


@dtc.dataclass(frozen=True)
class SpikeFixture:
    plant: PlantConfig
    contracts: list[ContractSpec]
    plan: ContractPlan
    archive: list[YearSeries]
    sample: YearSeries
    hours_per_week: int = SPIKE_HOURS_PER_WEEK
    n_weeks: int = SPIKE_WEEKS
    spike_week: int = SPIKE_WEEK


def spike_fixture() -> SpikeFixture:
    """Archive years and sample cover a full year of 24-hour weeks."""
    hpw = SPIKE_HOURS_PER_WEEK
    archive = flat_archive(config.WEEKS_PER_YEAR, hpw, spike_week=SPIKE_WEEK)
    sample = flat_year(
        SAMPLE_LABEL, config.WEEKS_PER_YEAR, hpw, 5.0, spike_week=SPIKE_WEEK
    )
    return SpikeFixture(toy_plant(), [spike_contract()], spike_plan(), archive, sample)


def _write_year(directory: Path, year: YearSeries, suffix: str):
    for quantity in QUANTITIES:
        write_series(directory / f'{quantity}{suffix}.csv', getattr(year, quantity))


def write_fixture(directory: str | Path, fixture: SpikeFixture | None = None) -> dict:
    """Lay out a fixture as CLI input files; returns their paths by role."""
    fixture = fixture or spike_fixture()
    root = Path(directory)
    archive_dir, sample_dir = root / 'archive', root / 'sample' / fixture.sample.label
    archive_dir.mkdir(parents=True, exist_ok=True)
    sample_dir.mkdir(parents=True, exist_ok=True)

    document = fixture.plant.model_dump(mode='json')
    document['contracts'] = [c.model_dump(mode='json') for c in fixture.contracts]
    config_path = root / 'plant.json'
    config_path.write_text(json.dumps(document, indent=2) + '\n')
    for year in fixture.archive:
        _write_year(archive_dir, year, f'_{year.label}')
    _write_year(sample_dir, fixture.sample, '')
    plan_path = root / 'plan.csv'
    fixture.plan.write_csv(plan_path)
    return {
        'config': config_path,
        'archive': archive_dir,
        'sample': sample_dir,
        'plan': plan_path,
    }
