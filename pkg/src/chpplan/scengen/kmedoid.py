import logging
from collections.abc import Mapping

import numpy as np

from chpplan import config
from chpplan.domain.timeseries import Resolution
from chpplan.domain.timeseries import Scenario
from chpplan.domain.timeseries import ScenarioSet
from chpplan.domain.timeseries import TimeGrid
from chpplan.errors import DataError

from .montecarlo import PathBundle

logger = logging.getLogger('kmedoid')

CLUSTERED = ('demand', 'elec_price')


def standardized_features(bundle: PathBundle) -> np.ndarray:
    """Joint feature rows: each quantity scaled by its global mean and std."""
    blocks = []
    for quantity in CLUSTERED:
        if quantity not in bundle.paths:
            continue
        arr = bundle.paths[quantity]
        std = arr.std()
        blocks.append((arr - arr.mean()) / (std if std > 0 else 1.0))
    if not blocks:
        raise DataError(f'bundle holds none of {CLUSTERED}', 'paths')
    return np.hstack(blocks)


def pairwise_distances(features: np.ndarray) -> np.ndarray:
    sq = np.einsum('ij,ij->i', features, features)
    d2 = sq[:, None] + sq[None, :] - 2 * features @ features.T
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.clip(d2, 0, None))


def total_dissimilarity(distances: np.ndarray, medoids) -> float:
    return float(distances[:, list(medoids)].min(axis=1).sum())


def _farthest_point_init(distances: np.ndarray, k: int, first: int) -> list[int]:
    medoids = [first]
    nearest = distances[:, first].copy()
    while len(medoids) < k:
        masked = nearest.copy()
        masked[medoids] = -1.0
        nxt = int(np.argmax(masked))
        medoids.append(nxt)
        nearest = np.minimum(nearest, distances[:, nxt])
    return medoids


def k_medoids(
    distances: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = config.KMEDOID_MAX_ITER,
) -> tuple[list[int], np.ndarray]:
    """PAM best-swap search; returns medoid indices and the cluster of each point."""
    n = distances.shape[0]
    if not 1 <= k <= n:
        raise DataError(f'need 1 <= k <= n_paths, got k={k}, n_paths={n}', 'k')

    first = int(np.random.default_rng(seed).integers(n))
    medoids = _farthest_point_init(distances, k, first)
    cost = total_dissimilarity(distances, medoids)

    iteration = 0
    for iteration in range(max_iter):
        to_medoids = distances[:, medoids]
        order = np.argsort(to_medoids, axis=1, kind='stable')
        near = order[:, 0]
        d1 = to_medoids[np.arange(n), near]
        d2 = (
            to_medoids[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        )
        swap_cost = np.empty((k, n))
        for slot in range(k):
            # distance each point keeps if the medoid in `slot` leaves
            remaining = np.where(near == slot, d2, d1)
            swap_cost[slot] = np.minimum(distances, remaining[:, None]).sum(axis=0)
        swap_cost[:, medoids] = np.inf
        best = int(np.argmin(swap_cost))
        slot, candidate = divmod(best, n)
        if swap_cost[slot, candidate] >= cost - 1e-9 * max(cost, 1.0):
            break
        medoids[slot] = candidate
        cost = float(swap_cost[slot, candidate])
    else:
        logger.warning(f'k-medoid stopped after {max_iter} iterations')
    logger.debug(f'k-medoid converged after {iteration} swaps, cost {cost:.6g}')

    assignment = np.argmin(distances[:, medoids], axis=1)
    # a medoid always belongs to its own cluster, even among duplicate paths
    assignment[medoids] = np.arange(k)
    return medoids, assignment


def reduce_k_medoid(
    bundle: PathBundle,
    k: int = config.N_REPRESENTATIVES,
    seed: int | None = None,
    fill: Mapping[str, np.ndarray] | None = None,
    hours_per_week: int = config.HOURS_PER_WEEK,
    max_iter: int = config.KMEDOID_MAX_ITER,
) -> ScenarioSet:
    """Reduce a bundle to k medoid scenarios weighted by cluster size.

    Quantities not simulated in the bundle (typically the fuel price) are
    taken from `fill`, shared by every scenario.
    """
    if k > bundle.n_paths:
        raise DataError(f'k={k} exceeds n_paths={bundle.n_paths}', 'k')
    fill = dict(fill or {})
    for quantity in ('demand', 'elec_price', 'fuel_price'):
        if quantity not in bundle.paths and quantity not in fill:
            raise DataError(f'no paths and no fill values for {quantity}', quantity)

    distances = pairwise_distances(standardized_features(bundle))
    medoids, assignment = k_medoids(
        distances, k, bundle.seed if seed is None else seed, max_iter
    )
    sizes = np.bincount(assignment, minlength=k)
    n = bundle.n_paths

    # most probable first, ties by path index
    ranked = sorted(range(k), key=lambda s: (-sizes[s], medoids[s]))
    scenarios = []
    for slot in ranked:
        m = medoids[slot]
        series = {
            q: bundle.paths[q][m] if q in bundle.paths else fill[q]
            for q in ('demand', 'elec_price', 'fuel_price')
        }
        scenarios.append(Scenario(sizes[slot] / n, label=f'path{m}', **series))
    grid = TimeGrid(Resolution.HOURLY, bundle.horizon, hours_per_week)
    logger.debug(
        f'reduced {n} paths to {k}: sizes {[int(sizes[s]) for s in ranked]}'
    )
    return ScenarioSet(grid, tuple(scenarios))
