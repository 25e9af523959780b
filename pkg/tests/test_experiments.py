import csv
import io
import json

import numpy as np
import pytest

from hslab.core import make_params
from hslab.errors import HslabError, RegimeError
from hslab.experiments import (audit_gradient, bump_field, bump_remainders, diagonal_field, fit_loglog,
                               sharpness_bump, sharpness_diag, stability_sample)
from hslab.functionals import deficit


def test_fit_loglog_exact_power():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_loglog(x, 3.0 * x ** -1.5)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0) and fit.accepted
    assert not fit_loglog(x[:3], x[:3]).accepted
    with pytest.raises(ValueError):
        fit_loglog(x, -x)


def test_diagonal_gradient_audit():
    P = make_params(4, 1.5, 0.5)
    assert audit_gradient(diagonal_field(P, 8)) <= 1e-5


def test_bump_gradient_audit():
    P = make_params(5, 2.5, 1)
    fld = bump_field(P, 40.0, 0.1).as_axisym()
    assert audit_gradient(fld, r_range=(39.1, 40.9), theta_range=(1e-3, 0.02)) <= 1e-5
    lit = bump_field(P, 40.0, 0.1, prefactor="literal")
    assert audit_gradient(lit, r_range=(39.1, 40.9), theta_range=(1e-3, 0.02)) <= 1e-5


def test_audit_catches_wrong_gradient():
    P = make_params(4, 1.5, 0.5)
    fld = diagonal_field(P, 8)
    bad = type(fld)(fld.value, lambda r, t: tuple(1.01 * g for g in fld.grad(r, t)))
    with pytest.raises(HslabError):
        audit_gradient(bad)


def test_diagonal_limit_is_extremal():
    P = make_params(4, 1.5, 0.5)
    rep = deficit(diagonal_field(P, 10 ** 6), P)
    assert abs(rep.deficit) <= 1e-8 * rep.grad_p


def test_regimes():
    with pytest.raises(RegimeError):
        sharpness_diag(make_params(5, 2, 1))
    with pytest.raises(RegimeError):
        sharpness_bump(make_params(4, 1.5, 0.5))
    with pytest.raises(ValueError):
        sharpness_bump(make_params(5, 2.5, 1), x0_norm=5)
    with pytest.raises(ValueError):
        sharpness_diag(make_params(4, 1.5, 0.5), n_list=(16, 8))


def test_bump_remainders_decay():
    P = make_params(5, 2.5, 1)
    prev = None
    for L in (10.0, 20.0, 40.0, 80.0):
        r1, r2, u0 = bump_remainders(P, L)
        assert abs(r1) <= u0 and abs(r2) <= u0
        if prev is not None:
            assert abs(r1) < prev[0] and abs(r2) < prev[1]
        prev = (abs(r1), abs(r2))


def test_bump_table_format():
    P = make_params(5, 2.5, 1)
    tab = sharpness_bump(P, 40.0, (0.1, 0.05, 0.025, 0.0125))
    rows = list(csv.reader(io.StringIO(tab.to_csv())))
    assert rows[0] == ["control", "deficit", "distance", "quotient"]
    assert len(rows) == 5
    assert float(rows[1][0]) == 0.1
    body = json.loads(tab.to_json())
    assert body["gamma"] == "2.5"
    assert set(body["fits"]) == {"deficit", "distance"}
    assert np.all(tab.deficits > 0)
    # the quotient column is deficit / d^gamma
    assert np.allclose(tab.quotients, tab.deficits / tab.distances ** P.gamma, rtol=1e-14)
    assert float(body["meta"]["eps_over_U_at_x0_min"]) >= 1.0


@pytest.fixture(scope="module")
def stab():
    P = make_params(5, 2, 1)
    return P, stability_sample(P, 12, seed=42)


def test_stability_floor(stab):
    P, res = stab
    assert res.empirical_B > 0
    assert res.gamma == 2.0
    for s in res.samples:
        assert s["deficit"] >= res.empirical_B * s["d"] ** res.gamma
        assert 0.01 <= s["rel_distance"] <= 0.3
    assert res.worst["quotient"] == res.empirical_B


def test_stability_prefix_and_monotone(stab):
    P, res = stab
    half = stability_sample(P, 6, seed=42)
    assert half.samples == res.samples[:6]
    assert res.empirical_B <= half.empirical_B


def test_stability_deterministic(stab):
    P, res = stab
    again = stability_sample(P, 12, seed=42)
    assert again.as_dict() == res.as_dict()
    other = stability_sample(P, 3, seed=43)
    assert other.samples[0] != res.samples[0]


def test_stability_low_p():
    P = make_params(3, 1.5, 0.45)
    res = stability_sample(P, 4, seed=1)
    assert res.empirical_B > 0 and res.gamma == 2.0
