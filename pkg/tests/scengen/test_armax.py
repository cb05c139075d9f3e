import numpy as np
import pytest as pt

from chpplan.errors import DataError
from chpplan.scengen.armax import check_stationary
from chpplan.scengen.armax import fit_armax
from chpplan.scengen.armax import fourier_terms


def ar1(phi: float, n: int, seed: int = 7, mean: float = 0.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    y = np.empty(n)
    y[0] = e[0]
    for t in range(1, n):
        y[t] = phi * y[t - 1] + e[t]
    return y + mean


def test_recovers_ar1_coefficient():
    model = fit_armax(ar1(0.8, 5000), ar_order=1, ma_order=0, n_harmonics=0)
    assert model.ar_order == 1
    assert 0.7 <= model.ar[0] <= 0.9
    assert model.residual_std == pt.approx(1.0, abs=0.1)
    assert np.all(np.abs(model.ar_roots()) > 1)


def test_recovers_ma_term():
    rng = np.random.default_rng(3)
    e = rng.standard_normal(6000)
    y = np.empty_like(e)
    y[0] = e[0]
    for t in range(1, len(e)):
        y[t] = 0.5 * y[t - 1] + e[t] + 0.4 * e[t - 1]
    model = fit_armax(y, ar_order=1, ma_order=1, n_harmonics=0)
    assert model.ar[0] == pt.approx(0.5, abs=0.1)
    assert model.ma[0] == pt.approx(0.4, abs=0.1)


def test_recovers_weekly_cycle():
    period = 24
    t = np.arange(20 * period)
    rng = np.random.default_rng(11)
    y = 10 + 3 * np.sin(2 * np.pi * t / period) + 0.1 * rng.standard_normal(len(t))
    model = fit_armax(y, ar_order=0, ma_order=0, n_harmonics=1, period=period)
    assert model.intercept == pt.approx(10, abs=0.05)
    assert model.fourier[0] == pt.approx(3, abs=0.05)
    assert model.fourier[1] == pt.approx(0, abs=0.05)
    assert model.next_index == len(t)


def test_standard_errors_line_up_with_coefficients():
    model = fit_armax(ar1(0.6, 2000, mean=5.0), ar_order=2, ma_order=1, n_harmonics=3)
    blocks = model.coefficients()
    assert sum(len(v) for v in blocks.values()) == len(model.std_errors)
    assert model.n_harmonics == 3
    assert np.all(model.std_errors >= 0)


def test_constant_history_gives_degenerate_model():
    model = fit_armax(np.full(4 * 168, 12.0))
    assert model.residual_std == 0.0
    assert model.intercept == 12.0
    assert not np.any(model.ar)


def test_insufficient_data():
    with pt.raises(DataError, match='insufficient data'):
        fit_armax(np.arange(100.0))
    with pt.raises(DataError, match='missing values'):
        fit_armax(np.full(4 * 168, np.nan))
    with pt.raises(DataError, match='orders'):
        fit_armax(ar1(0.5, 1000), ar_order=-1)


def test_stationarity_check():
    check_stationary(np.array([0.5]))
    check_stationary(np.array([]))
    with pt.raises(DataError, match='non-stationary'):
        check_stationary(np.array([1.0]))
    with pt.raises(DataError, match='non-stationary'):
        check_stationary(np.array([0.6, 0.5]))


def test_fourier_terms_shape():
    terms = fourier_terms(np.arange(168), 3, 168)
    assert terms.shape == (168, 6)
    assert terms[42, 0] == pt.approx(1.0)
    assert terms[0, 1] == pt.approx(1.0)
    assert fourier_terms(np.arange(4), 0, 168).shape == (4, 0)
