import math

import numpy as np
import pytest

from backend.quantum.errors import InsufficientPoints
from backend.runner.fitting import collapse_spread, fit_power_law


def test_exact_power_law_is_recovered():
    x = np.array([0.01, 0.02, 0.04, 0.08, 0.16])
    y = 3.0 * x ** 2
    fit = fit_power_law(x, y)
    assert fit.alpha == pytest.approx(2.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 5
    assert np.allclose(fit.predict(x), y)


def test_three_points_are_not_enough():
    with pytest.raises(InsufficientPoints):
        fit_power_law([1.0, 2.0, 3.0], [1.0, 4.0, 9.0])


def test_nonpositive_points_are_dropped(caplog):
    x = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
    y = [5.0, 1.0, 8.0, 64.0, 512.0, -1.0]
    fit = fit_power_law(x, y)
    assert fit.n_points == 4
    assert fit.alpha == pytest.approx(3.0)
    assert "Dropped 2" in caplog.text


def test_dropping_below_minimum_raises():
    with pytest.raises(InsufficientPoints):
        fit_power_law([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 0.0, 4.0])


def test_fit_to_dict_keys():
    fit = fit_power_law([1.0, 2.0, 4.0, 8.0], [2.0, 4.0, 8.0, 16.0])
    assert set(fit.to_dict()) == {'alpha', 'c', 'prefactor', 'r_squared', 'n_points'}
    assert fit.to_dict()['c'] == pytest.approx(math.log(2.0))


def test_identical_groups_collapse_exactly():
    x = [0.1, 0.2, 0.4]
    y = [0.5 * v ** 2 for v in x]
    assert collapse_spread({1: (x, y), 2: (x, y), 3: (x, y)}, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_collapse_spread_of_shifted_prefactors():
    x = [0.1, 0.2, 0.4]
    groups = {
        1: (x, [1.0 * v ** 2 for v in x]),
        2: (x, [1.5 * v ** 2 for v in x]),
        3: (x, [2.0 * v ** 2 for v in x]),
    }
    assert collapse_spread(groups, 2.0) == pytest.approx(1.0 / 1.5)


def test_single_group_has_no_spread():
    assert collapse_spread({4: ([0.1, 0.2], [1.0, 2.0])}, 1.0) == 0.0
