import csv
import io

import numpy as np
import pytest

from submatch.theory import (
    bound_curve, check_error_bound, check_fixed_point, check_uniform_reduction, commutation_gap,
    diffusion_operator, emit_bound_curve, error_bound, random_attention, series_operator,
)


def test_bound_values():
    assert error_bound(0.5, 3) == 0.0625
    assert error_bound(0.3, 10) == pytest.approx(0.7 ** 11)
    assert error_bound(0.3, 10) == pytest.approx(0.019773, abs=5e-7)
    assert error_bound(0.4, 0) == pytest.approx(0.6)


def test_bound_monotone():
    alphas = np.linspace(0.05, 0.95, 10)
    for a in alphas:
        vals = [error_bound(a, k) for k in range(12)]
        assert all(x > y for x, y in zip(vals, vals[1:]))
    for k in range(5):
        vals = [error_bound(a, k) for a in alphas]
        assert all(x > y for x, y in zip(vals, vals[1:]))


def test_random_attention_row_stochastic(rng):
    a = random_attention(12, rng)
    np.testing.assert_allclose(a.sum(axis=1), 1.0)
    assert np.all(np.diag(a) == 0) and np.all(a >= 0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("k", [1, 3, 6, 10])
def test_error_bound_holds(alpha, k):
    for n in (2, 9, 30):
        check = check_error_bound(n, alpha, k, seed=n)
        assert check.passed, check


def test_error_bound_alpha_domain():
    with pytest.raises(ValueError):
        check_error_bound(5, 1.0, 3)


def test_operator_is_stochastic_and_converges(rng):
    a1 = random_attention(8, rng)
    op = diffusion_operator(a1, 0.3, 400)
    np.testing.assert_allclose(op.sum(axis=1), 1.0)
    # limit is the resolvent alpha (I - (1-alpha) A)^-1
    ref = 0.3 * np.linalg.inv(np.eye(8) - 0.7 * a1)
    np.testing.assert_allclose(op, ref, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.01, 0.5, 0.99])
def test_uniform_reduction(alpha, rng):
    a1 = random_attention(10, rng)
    xp = rng.normal(size=(10, 4))
    assert check_uniform_reduction(a1, xp, alpha, 7) <= 1e-12


def test_heterogeneous_teleport_differs_from_mean(rng):
    from submatch.autodiff import Tensor
    from submatch.glema import diffuse, uniform_diffusion
    a1 = random_attention(10, rng)
    xp = rng.normal(size=(10, 3))
    beta = rng.uniform(0.1, 0.9, size=(10, 1))
    het = diffuse(Tensor(a1), Tensor(xp), Tensor(beta), 6).data
    assert np.abs(het - uniform_diffusion(a1, xp, float(beta.mean()), 6)).max() > 1e-3


def test_fixed_point_uniform_half(rng):
    a1 = random_attention(10, rng)
    c = check_fixed_point(a1, rng.normal(size=(10, 3)), np.full(10, 0.5))
    assert c.passed and c.contraction_ratio <= 0.5 + 1e-9


def test_fixed_point_heterogeneous(rng):
    for _ in range(10):
        n = int(rng.integers(2, 20))
        a1 = random_attention(n, rng)
        c = check_fixed_point(a1, rng.normal(size=(n, 2)), rng.uniform(0.2, 0.8, n))
        assert c.passed and c.contraction_ratio <= 0.8 + 1e-9 and c.residual <= 1e-10


def test_fixed_point_strong_teleport(rng):
    a1 = random_attention(10, rng)
    c = check_fixed_point(a1, rng.normal(size=(10, 3)), np.full(10, 0.99))
    assert c.residual <= 1e-12


def test_fixed_point_matches_series(rng):
    a1 = random_attention(7, rng)
    xp = rng.normal(size=(7, 2))
    beta = np.full(7, 0.4)
    from submatch.glema import uniform_diffusion
    np.testing.assert_allclose(series_operator(a1, beta) @ xp, uniform_diffusion(a1, xp, 0.4, 400), atol=1e-12)


def test_commutation_only_for_uniform_teleport(rng):
    a1 = random_attention(8, rng)
    assert commutation_gap(a1, np.full(8, 0.3)) <= 1e-15
    assert commutation_gap(a1, rng.uniform(0.2, 0.8, 8)) > 1e-3


def test_bound_curve_csv(tmp_path):
    alphas = [round(0.3 + 0.1 * i, 1) for i in range(7)]
    path = tmp_path / "curve.csv"
    text = emit_bound_curve(alphas, range(1, 11), path=path, sizes=(6, 12), seeds=range(2), horizon=300)
    assert path.read_text() == text
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 70 and list(rows[0]) == ["alpha", "K", "bound", "empirical_err"]
    for a in alphas:
        b = [float(r["bound"]) for r in rows if float(r["alpha"]) == a]
        assert all(x > y for x, y in zip(b, b[1:]))
    assert all(float(r["empirical_err"]) <= float(r["bound"]) for r in rows)
    with pytest.raises(ValueError):
        emit_bound_curve([], [1])


def test_bound_curve_k_zero():
    rows = bound_curve([0.4], [0], sizes=(5,), seeds=range(1), horizon=200)
    assert rows[0]["bound"] == pytest.approx(0.6)
