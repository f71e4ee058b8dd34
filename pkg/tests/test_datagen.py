import numpy as np
import pytest

from enroute.datagen import (
    ArFieldSpec,
    ar2_autocorrelation,
    ar2_field,
    ar2_series,
    ar2_variance,
    field_covariance,
    load_grid,
    sample_field,
    save_grid,
    to_fixed_point,
)
from enroute.errors import InvalidArgument


def lag_corr(x, k):
    x = x - x.mean()
    return float(x[:-k] @ x[k:] / (x @ x))


def test_near_white_for_small_rho():
    x = ar2_series(100_000, 1e-6, 359, seed=1)
    assert abs(lag_corr(x, 1)) < 0.05


def test_high_correlation_rows():
    g = ar2_field(ArFieldSpec(0.99, 359, 200, 3))
    r1 = np.mean([lag_corr(row, 1) for row in g])
    assert r1 > 0.95
    assert ar2_autocorrelation(0.99, 359, 1)[1] == pytest.approx(2 * 0.99 * np.cos(np.radians(359)) / (1 + 0.99**2))


@pytest.mark.parametrize("omega", [99.0, 359.0])
def test_series_matches_theory(omega):
    x = ar2_series(100_000, 0.99 if omega == 99.0 else 0.9, omega, seed=5)
    rho = 0.99 if omega == 99.0 else 0.9
    r = ar2_autocorrelation(rho, omega, 3)
    for k in (1, 2, 3):
        assert abs(lag_corr(x, k) - r[k]) < 0.05
    assert np.var(x) == pytest.approx(ar2_variance(rho, omega), rel=0.1)


def test_field_deterministic_and_variance_stable():
    a = ar2_field(ArFieldSpec(0.99, 99, 64, 7))
    assert np.array_equal(a, ar2_field(ArFieldSpec(0.99, 99, 64, 7)))
    v = np.array([ar2_field(ArFieldSpec(0.99, 99, 100, s)).var() for s in range(20)])
    assert v.std() / v.mean() < 0.5


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        ArFieldSpec(1.0, 10)
    with pytest.raises(InvalidArgument):
        ArFieldSpec(0.5, 10, 0)


def test_sampling():
    g = np.arange(16.0).reshape(4, 4)
    assert sample_field(g, [[1.0, 2.0]])[0] == g[2, 1]
    v = sample_field(g, [[1.2, 2.2], [1.7, 2.9]])
    assert v[0] == v[1]
    assert sample_field(g, [[4.0, 4.0]])[0] == g[3, 3]
    assert np.all(sample_field(np.ones((5, 5)), np.random.default_rng(0).uniform(0, 5, (9, 2))) == 1)
    with pytest.raises(InvalidArgument):
        sample_field(g, [[-0.1, 1]])


def test_covariance_symmetric_psd():
    pos = np.random.default_rng(1).uniform(0, 600, (30, 2))
    c = field_covariance(pos, 0.99, 359)
    assert np.allclose(c, c.T) and np.allclose(np.diag(c), 1.0)
    assert np.linalg.eigvalsh(c).min() > -1e-9


def test_fixed_point():
    q = to_fixed_point([0.0, 1e9, -1e9, 1.0], sigma=1.0)
    assert q.tolist() == [2048, 4095, 0, 2560]


def test_grid_dump_round_trip(tmp_path):
    g = np.random.default_rng(0).normal(size=(7, 7))
    p = tmp_path / "g.bin"
    save_grid(g, p)
    assert p.stat().st_size == 16 + 49 * 8
    assert np.array_equal(load_grid(p), g)
    p.write_bytes(b"nope")
    with pytest.raises(InvalidArgument):
        load_grid(p)
