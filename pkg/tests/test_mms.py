"""Manufactured cases: exact-field identities, sources, convergence plumbing."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from nspnp.mms import (
    ERROR_FIELDS,
    case_by_name,
    convergence_study,
    example1,
    example2,
    example3,
    exact_eval,
    run_case,
    source_eval,
)
from nspnp.scheme import SchemeParams


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def sample_points(case, rng, n=50):
    ax, ay, bx, by = case.bounds
    x = rng.uniform(ax, bx, size=n)
    y = rng.uniform(ay, by, size=n)
    t = rng.uniform(0.05, 1.0, size=n)
    return x, y, t


def test_case_lookup():
    for name in ("example1", "example2", "example3"):
        assert case_by_name(name).name == name
    with pytest.raises(ValueError):
        case_by_name("example9")


def test_case_defaults_match_published_settings():
    ex1 = example1()
    assert ex1.bounds == (-1.0, -1.0, 1.0, 1.0)
    assert (ex1.bounds[2] - ex1.bounds[0]) / ex1.nx == pytest.approx(0.05)
    assert ex1.c0 == 10.0 and ex1.t_final == 1.0
    assert ex1.taus == (1 / 10, 1 / 20, 1 / 40, 1 / 80)

    ex2 = example2()
    assert (ex2.bounds[2] - ex2.bounds[0]) / ex2.nx == pytest.approx(0.025)
    assert ex2.t_final == 0.1
    assert ex2.taus == (1 / 100, 1 / 200, 1 / 400, 1 / 800)

    ex3 = example3()
    assert ex3.bounds == (0.0, 0.0, 1.0, 1.0)
    assert (ex3.bounds[2] - ex3.bounds[0]) / ex3.nx == pytest.approx(0.01)
    assert ex3.c0 == 5.0
    assert ex3.exact is None and ex3.velocity_bc is None


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_exact_velocity_is_divergence_free(name, rng):
    case = case_by_name(name)
    x, y, t = sample_points(case, rng)
    grad = exact_eval(case, "u", x, y, t, grad=True)
    divergence = grad[0, 0] + grad[1, 1]
    assert np.abs(divergence).max() < 1e-12


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_poisson_identity_between_exact_fields(name, rng):
    # The manufactured potential is a Laplace eigenfunction, so the charge
    # equation -lap(phi) = c1 - c2 reduces to 2 pi^2 phi = c1 - c2 exactly.
    case = case_by_name(name)
    x, y, t = sample_points(case, rng)
    phi = exact_eval(case, "phi", x, y, t)
    c1 = exact_eval(case, "c1", x, y, t)
    c2 = exact_eval(case, "c2", x, y, t)
    np.testing.assert_allclose(2.0 * np.pi**2 * phi, c1 - c2, atol=1e-12)


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_exact_velocity_trace_is_tangential(name, rng):
    case = case_by_name(name)
    ax, ay, bx, by = case.bounds
    s = rng.uniform(ay, by, size=40)
    t = np.full_like(s, 0.7)
    for x_edge in (ax, bx):
        u = exact_eval(case, "u", np.full_like(s, x_edge), s, t)
        assert np.abs(u[0]).max() < 1e-12  # normal component on x = const
    for y_edge in (ay, by):
        u = exact_eval(case, "u", s, np.full_like(s, y_edge), t)
        assert np.abs(u[1]).max() < 1e-12


def test_example1_concentration_source_at_time_zero(rng):
    # At t = 0 every sin(t) factor vanishes, so the first concentration
    # source collapses to its time-derivative part 3 cos(pi x) cos(pi y).
    case = example1()
    x, y, _ = sample_points(case, rng)
    f1, f2, fu = source_eval(case, x, y, np.zeros_like(x))
    np.testing.assert_allclose(f1, 3.0 * np.cos(np.pi * x) * np.cos(np.pi * y), atol=1e-13)
    np.testing.assert_allclose(f2, np.cos(np.pi * x) * np.cos(np.pi * y), atol=1e-13)
    np.testing.assert_allclose(fu, np.stack([
        np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
        -np.sin(2 * np.pi * y) * np.cos(2 * np.pi * x),
    ]), atol=1e-13)


def test_source_eval_zero_for_source_free_case(rng):
    case = example3()
    x, y, t = sample_points(case, rng)
    f1, f2, fu = source_eval(case, x, y, t)
    assert not f1.any() and not f2.any() and not fu.any()


def test_exact_eval_validates_field_and_gradients(rng):
    case = example1()
    with pytest.raises(ValueError):
        exact_eval(case, "vorticity", 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        exact_eval(example3(), "c1", 0.0, 0.0, 0.0)
    # Gradient closures agree with central differences of the values.
    x, y, t = sample_points(case, rng, n=10)
    step = 1e-6
    for field in ("c1", "phi", "p"):
        grad = exact_eval(case, field, x, y, t, grad=True)
        fd_x = (
            exact_eval(case, field, x + step, y, t)
            - exact_eval(case, field, x - step, y, t)
        ) / (2 * step)
        np.testing.assert_allclose(grad[0], fd_x, rtol=0.0, atol=1e-8)


def test_run_case_returns_trace_and_report():
    case = dataclasses.replace(example1(), nx=8)
    params = SchemeParams(tau=0.1, t_final=0.2, c0=10.0)
    state, records, report = run_case(case, params)
    assert len(records) == 3  # initial snapshot plus two steps
    assert state.time == pytest.approx(0.2)
    assert report is not None
    assert set(report.errors) == set(ERROR_FIELDS)
    for l2, h1s, h1 in report.errors.values():
        assert 0 < l2 < 10 and h1 >= h1s >= 0


def test_run_case_without_exact_solution_has_no_report():
    case = dataclasses.replace(example3(), nx=8)
    params = SchemeParams(tau=0.1, t_final=0.2, c0=5.0)
    _, records, report = run_case(case, params)
    assert report is None
    assert len(records) == 3


def test_convergence_study_rates_and_columns():
    case = dataclasses.replace(example1(), nx=8)
    params = SchemeParams(tau=0.1, t_final=0.2, c0=10.0)
    rows = convergence_study(case, params, [0.1, 0.05])
    assert len(rows) == 2
    assert rows[0]["rate_c1_L2"] is None
    for field in ("c1", "c2", "phi", "u"):
        assert f"e_{field}_L2" in rows[0] and f"e_{field}_H1" in rows[0]
    assert "e_p_L2" in rows[0] and "rate_p_L2" in rows[1]
    assert "e_p_H1" not in rows[0]
    expected = np.log(rows[0]["e_c1_L2"] / rows[1]["e_c1_L2"]) / np.log(2.0)
    assert rows[1]["rate_c1_L2"] == pytest.approx(expected)


def test_convergence_study_rejects_empty_and_exactless():
    case = dataclasses.replace(example1(), nx=8)
    params = SchemeParams(tau=0.1, t_final=0.2, c0=10.0)
    with pytest.raises(ValueError):
        convergence_study(case, params, [])
    with pytest.raises(ValueError):
        convergence_study(dataclasses.replace(example3(), nx=8), params, [0.1])
