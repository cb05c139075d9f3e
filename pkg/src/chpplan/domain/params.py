"""Plant, storage, cost and contract parameters of one municipality.

All models are frozen pydantic models; cross-field rules raise with the name
of the violated invariant so that `loader.load_and_validate` can report them
next to the field path.
"""

from typing import Annotated

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator

NonNegative = Annotated[float, Field(ge=0)]
Positive = Annotated[float, Field(gt=0)]
Efficiency = Annotated[float, Field(gt=0, le=1)]
PerUnit = Annotated[float, Field(ge=0, le=1)]


class _Params(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class ChpParams(_Params):
    """Extraction-condensing CHP unit, hourly values."""

    p_max: float
    p_min: float
    q_max: Positive
    theta: float
    xi: Positive
    ramp_up: Positive
    ramp_down: Positive
    eff_power: Efficiency
    eff_heat: Efficiency
    min_up: Annotated[int, Field(ge=1)]
    min_down: Annotated[int, Field(ge=1)]

    @model_validator(mode='after')
    def _power_bounds(self):
        if not 0 < self.p_min <= self.p_max:
            raise ValueError('invariant 0 < p_min <= p_max violated')
        return self

    def fuel_per_power(self) -> float:
        return 1.0 / self.eff_power

    def fuel_per_heat(self) -> float:
        # theta is negative: extracting heat costs fuel
        return -self.theta / self.eff_heat


class AuxBoilerParams(_Params):
    q_max: Positive
    eff: Efficiency
    om_cost: NonNegative
    tax: NonNegative
    co2_tax: NonNegative

    @property
    def fixed_cost(self) -> float:
        return self.om_cost + self.tax + self.co2_tax


class BiomassStorageParams(_Params):
    """Biomass storage; the safety level is two-level over the year."""

    cap: Positive
    safety_high: NonNegative
    safety_low: NonNegative
    heating_season: tuple[int, int] = (20, 45)
    max_outflow: Positive
    delivery_gap: Annotated[int, Field(ge=0)]
    initial: NonNegative
    calorific: Positive
    inventory_cost: NonNegative

    @model_validator(mode='after')
    def _levels(self):
        if self.safety_high > self.cap or self.safety_low > self.cap:
            raise ValueError('invariant 0 <= safety_level <= cap violated')
        if self.initial > self.cap:
            raise ValueError('invariant initial in [0, cap] violated')
        first, last = self.heating_season
        if not 1 <= first <= last:
            raise ValueError('invariant 1 <= heating_season[0] <= heating_season[1]')
        return self

    def safety_level(self, week: int) -> float:
        """Minimum inventory in 1-based `week`."""
        first, last = self.heating_season
        return self.safety_high if first <= week <= last else self.safety_low

    def safety_profile(self, n_weeks: int, first_week: int = 1) -> list[float]:
        return [self.safety_level(first_week + i) for i in range(n_weeks)]


class ThermalStorageParams(_Params):
    cap_min: NonNegative
    cap_max: NonNegative
    max_flow: Positive
    initial: NonNegative

    @model_validator(mode='after')
    def _levels(self):
        if not self.cap_min <= self.initial <= self.cap_max:
            raise ValueError('invariant cap_min <= initial <= cap_max violated')
        return self


class CostParams(_Params):
    chp_op: NonNegative
    startup: NonNegative
    shutdown: NonNegative
    elec_tax: float
    biomass_incentive: float
    biomass_share_target: PerUnit
    penalty_store: NonNegative
    penalty_miss: NonNegative
    penalty_bm: NonNegative


class ContractSpec(_Params):
    id: Annotated[str, Field(pattern=r'^[A-Za-z0-9_.-]+$', max_length=32)]
    base_price: NonNegative
    up_price: NonNegative
    down_price: NonNegative
    amount_min: NonNegative
    amount_max: NonNegative
    freq: Annotated[int, Field(gt=0)]
    deliveries_min: Annotated[int, Field(ge=0)]
    deliveries_max: Annotated[int, Field(ge=0)]
    opt_up: PerUnit
    opt_down: PerUnit

    @model_validator(mode='after')
    def _bounds(self):
        if self.amount_min > self.amount_max:
            raise ValueError('invariant 0 <= amount_min <= amount_max violated')
        if self.deliveries_min > self.deliveries_max:
            raise ValueError('invariant deliveries_min <= deliveries_max violated')
        return self

    @property
    def fixed(self) -> bool:
        return self.opt_up == 0 and self.opt_down == 0

    def window_weeks(self, hours_per_week: int = 168) -> int:
        """Weeks summed by the weekly frequency constraint."""
        return max(self.freq // hours_per_week, 1)

    def deliveries_per_window(self, hours_per_week: int = 168) -> int:
        return max(hours_per_week // self.freq, 1)


class PlantConfig(_Params):
    name: str
    chp: ChpParams
    aux: AuxBoilerParams
    biomass_storage: BiomassStorageParams
    thermal_storage: ThermalStorageParams
    cost: CostParams
