"""ARMA model with Fourier regressors for the weekly cycle.

Estimation is conditional least squares in two steps (Hannan-Rissanen):
a long autoregression recovers the innovations, which then enter the final
regression as lagged regressors next to the AR lags and the Fourier terms.
"""

import dataclasses as dtc
import logging

import numpy as np

from chpplan import config
from chpplan.errors import DataError

logger = logging.getLogger('armax')


def fourier_terms(index: np.ndarray, n_harmonics: int, period: int) -> np.ndarray:
    """(len(index), 2*n_harmonics) matrix of sin/cos pairs, harmonic by harmonic."""
    index = np.asarray(index, dtype=float)
    columns = []
    for k in range(1, n_harmonics + 1):
        angle = 2 * np.pi * k * index / period
        columns.append(np.sin(angle))
        columns.append(np.cos(angle))
    if not columns:
        return np.empty((len(index), 0))
    return np.column_stack(columns)


def _lags(values: np.ndarray, order: int, rows: np.ndarray) -> np.ndarray:
    if order == 0:
        return np.empty((len(rows), 0))
    return np.column_stack([values[rows - i] for i in range(1, order + 1)])


@dtc.dataclass(frozen=True)
class ArmaxModel:
    ar: np.ndarray
    ma: np.ndarray
    fourier: np.ndarray
    intercept: float
    residual_std: float
    fit_window: int
    period: int = config.HOURS_PER_WEEK
    std_errors: np.ndarray = dtc.field(default_factory=lambda: np.empty(0))
    # last observations and innovations, newest last, for the simulation start
    last_values: np.ndarray = dtc.field(default_factory=lambda: np.empty(0))
    last_residuals: np.ndarray = dtc.field(default_factory=lambda: np.empty(0))
    next_index: int = 0

    def __post_init__(self):
        if self.residual_std < 0:
            raise DataError('invariant residual_std >= 0 violated', 'residual_std')
        if len(self.fourier) % 2:
            raise DataError('fourier coefficients come in sin/cos pairs', 'fourier')
        if len(self.last_values) < len(self.ar):
            raise DataError('not enough history to start the AR recursion')
        if len(self.last_residuals) < len(self.ma):
            raise DataError('not enough innovations to start the MA recursion')

    @property
    def ar_order(self) -> int:
        return len(self.ar)

    @property
    def ma_order(self) -> int:
        return len(self.ma)

    @property
    def n_harmonics(self) -> int:
        return len(self.fourier) // 2

    def coefficients(self) -> dict[str, np.ndarray]:
        """Estimates keyed by block, aligned with `std_errors` when present."""
        return {
            'intercept': np.array([self.intercept]),
            'fourier': self.fourier,
            'ar': self.ar,
            'ma': self.ma,
        }

    def ar_roots(self) -> np.ndarray:
        if self.ar_order == 0:
            return np.empty(0)
        # 1 - phi_1 z - ... - phi_p z^p, highest power first for np.roots
        return np.roots(np.concatenate([-self.ar[::-1], [1.0]]))


def check_stationary(ar: np.ndarray, margin: float = config.STATIONARITY_MARGIN):
    if len(ar) == 0:
        return
    roots = np.roots(np.concatenate([-np.asarray(ar)[::-1], [1.0]]))
    if np.any(np.abs(roots) <= margin):
        raise DataError(
            f'non-stationary AR part: root modulus {np.abs(roots).min():.4f} '
            f'<= {margin}',
            'ar',
        )


def _ols(design: np.ndarray, target: np.ndarray):
    beta, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = target - design @ beta
    dof = max(len(target) - design.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.pinv(design.T @ design)
    return beta, resid, np.sqrt(np.clip(np.diag(cov), 0, None)), np.sqrt(sigma2)


def fit_armax(
    history,
    ar_order: int = config.AR_ORDER,
    ma_order: int = config.MA_ORDER,
    n_harmonics: int = config.N_HARMONICS,
    start_index: int = 0,
    period: int = config.HOURS_PER_WEEK,
) -> ArmaxModel:
    """Fit ARMA(ar_order, ma_order) plus Fourier terms to an hourly history.

    `start_index` is the position of the first observation in the weekly
    cycle; simulation continues the cycle from the end of the history.
    """
    y = np.asarray(history, dtype=float)
    n = len(y)
    if min(ar_order, ma_order, n_harmonics) < 0:
        raise DataError('model orders must be >= 0', 'orders')
    if n < config.MIN_FIT_WEEKS * period:
        raise DataError(
            f'insufficient data: {n} observations, '
            f'need {config.MIN_FIT_WEEKS * period}',
            'history',
        )
    if not np.all(np.isfinite(y)):
        raise DataError('history contains missing values after imputation', 'history')

    index = start_index + np.arange(n)
    tail = max(ar_order, 1)
    if np.ptp(y) == 0:
        logger.debug(f'constant history {y[0]}, degenerate fit')
        return ArmaxModel(
            ar=np.zeros(ar_order),
            ma=np.zeros(ma_order),
            fourier=np.zeros(2 * n_harmonics),
            intercept=float(y[0]),
            residual_std=0.0,
            fit_window=n,
            period=period,
            last_values=y[-tail:].copy(),
            last_residuals=np.zeros(max(ma_order, 1)),
            next_index=start_index + n,
        )

    fourier = fourier_terms(index, n_harmonics, period)

    # step 1: long autoregression for the innovations
    innovations = np.zeros(n)
    long_order = 0
    if ma_order > 0:
        long_order = max(10, 2 * (ar_order + ma_order))
        rows = np.arange(long_order, n)
        design = np.column_stack(
            [np.ones(len(rows)), fourier[rows], _lags(y, long_order, rows)]
        )
        _, resid, _, _ = _ols(design, y[rows])
        innovations[rows] = resid

    # step 2: regression on AR lags and lagged innovations
    start = max(ar_order, long_order + ma_order)
    rows = np.arange(start, n)
    if len(rows) <= 1 + 2 * n_harmonics + ar_order + ma_order:
        raise DataError('insufficient data for the requested orders', 'history')
    design = np.column_stack(
        [
            np.ones(len(rows)),
            fourier[rows],
            _lags(y, ar_order, rows),
            _lags(innovations, ma_order, rows),
        ]
    )
    beta, resid, se, sigma = _ols(design, y[rows])
    nf = 2 * n_harmonics
    ar = beta[1 + nf : 1 + nf + ar_order]
    ma = beta[1 + nf + ar_order :]
    check_stationary(ar)

    residuals = np.zeros(n)
    residuals[rows] = resid
    model = ArmaxModel(
        ar=ar,
        ma=ma,
        fourier=beta[1 : 1 + nf],
        intercept=float(beta[0]),
        residual_std=float(sigma),
        fit_window=n,
        period=period,
        std_errors=se,
        last_values=y[-tail:].copy(),
        last_residuals=residuals[-max(ma_order, 1) :].copy(),
        next_index=start_index + n,
    )
    logger.debug(
        f'fitted ARMA({ar_order},{ma_order})+{n_harmonics} harmonics on {n} points, '
        f'ar={np.round(ar, 4).tolist()} ma={np.round(ma, 4).tolist()} '
        f'sigma={sigma:.4g}'
    )
    return model
