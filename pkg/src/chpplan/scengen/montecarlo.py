import dataclasses as dtc
import logging

import numpy as np

from chpplan import config
from chpplan.errors import DataError

from .armax import ArmaxModel
from .armax import fourier_terms

logger = logging.getLogger('montecarlo')


@dtc.dataclass(frozen=True)
class PathBundle:
    """Equiprobable simulated paths, one (n_paths, horizon) array per quantity."""

    paths: dict[str, np.ndarray]
    seed: int

    def __post_init__(self):
        if not self.paths:
            raise DataError('a path bundle needs at least one quantity', 'paths')
        shapes = {arr.shape for arr in self.paths.values()}
        if len(shapes) != 1:
            raise DataError(f'paths differ in shape: {sorted(shapes)}', 'paths')
        for arr in self.paths.values():
            arr.flags.writeable = False

    @property
    def n_paths(self) -> int:
        return next(iter(self.paths.values())).shape[0]

    @property
    def horizon(self) -> int:
        return next(iter(self.paths.values())).shape[1]

    @property
    def quantities(self) -> tuple[str, ...]:
        return tuple(self.paths)

    def join(self, other: 'PathBundle') -> 'PathBundle':
        """Same paths with the quantities of `other` added alongside."""
        overlap = set(self.paths) & set(other.paths)
        if overlap:
            raise DataError(f'quantities simulated twice: {sorted(overlap)}', 'paths')
        return PathBundle({**self.paths, **other.paths}, self.seed)


def sub_seed(seed: int, *keys: int) -> int:
    """Independent child seed for (seed, keys), e.g. (master, week, purpose)."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def innovations(n_paths: int, horizon: int, seed: int) -> np.ndarray:
    """Standard normal draws, one independent generator stream per path.

    Path i only depends on (seed, i), so any slice of paths can be drawn
    on its own and the result does not depend on evaluation order.
    """
    streams = np.random.SeedSequence(seed).spawn(n_paths)
    return np.vstack(
        [np.random.default_rng(s).standard_normal(horizon) for s in streams]
    )


def _recurse(model: ArmaxModel, shocks: np.ndarray) -> np.ndarray:
    n_paths, horizon = shocks.shape
    p, q = model.ar_order, model.ma_order
    index = model.next_index + np.arange(horizon)
    seasonal = model.intercept + fourier_terms(
        index, model.n_harmonics, model.period
    ) @ model.fourier

    values = np.empty((n_paths, p + horizon))
    values[:, :p] = model.last_values[len(model.last_values) - p :]
    errors = np.empty((n_paths, q + horizon))
    errors[:, :q] = model.last_residuals[len(model.last_residuals) - q :]
    for h in range(horizon):
        mean = np.full(n_paths, seasonal[h])
        for i in range(1, p + 1):
            mean += model.ar[i - 1] * values[:, p + h - i]
        for j in range(1, q + 1):
            mean += model.ma[j - 1] * errors[:, q + h - j]
        errors[:, q + h] = shocks[:, h]
        values[:, p + h] = mean + shocks[:, h]
    return values[:, p:]


def point_forecast(model: ArmaxModel, horizon: int, clip_at_zero: bool = False):
    """Deterministic recursion with all future innovations at zero."""
    out = _recurse(model, np.zeros((1, horizon)))[0]
    return np.clip(out, 0, None) if clip_at_zero else out


def simulate_paths(
    model: ArmaxModel,
    horizon: int,
    n_paths: int = config.N_PATHS,
    seed: int = 0,
    quantity: str = 'demand',
    clip_at_zero: bool | None = None,
) -> PathBundle:
    """Monte Carlo trajectories of one fitted model; demand is truncated at 0."""
    if horizon < 1 or n_paths < 1:
        raise DataError(f'need horizon >= 1 and n_paths >= 1, got {horizon}, {n_paths}')
    if clip_at_zero is None:
        clip_at_zero = quantity == 'demand'

    shocks = model.residual_std * innovations(n_paths, horizon, seed)
    paths = _recurse(model, shocks)
    if clip_at_zero:
        paths = np.clip(paths, 0, None)
    logger.debug(f'simulated {n_paths} x {horizon} {quantity} paths (seed={seed})')
    return PathBundle({quantity: paths}, seed)
