import numpy as np
import pytest

from filtered_ma.grid import build_direction_set, build_grid
from filtered_ma.operators import monotone_ma_eval, sample_source
from filtered_ma.problems import EXAMPLES, X0, make_example


def test_c2_at_centre():
    p = make_example("c2", 0.1)
    assert p.exact(*X0) == pytest.approx(1.0)
    assert p.f(*X0) == pytest.approx(1.0)


def test_c1_vanishes_on_inner_disc():
    p = make_example("c1", 0.1)
    rng = np.random.default_rng(0)
    r = 0.2 * np.sqrt(rng.uniform(size=1000))
    t = rng.uniform(0, 2 * np.pi, 1000)
    x, y = 0.5 + r * np.cos(t), 0.5 + r * np.sin(t)
    assert np.all(p.exact(x, y) == 0.0)
    assert np.all(p.f(x, y) == 0.0)
    assert p.f(*X0) == 0.0


def test_cone_source():
    h = 1 / 30
    g = build_grid(31)
    p = make_example("cone", h)
    f = g.sample(p.f)
    k = g.index(15, 15)
    assert f[k] == pytest.approx(3600.0)
    assert np.count_nonzero(f) == 1


def test_cone_stencil_reach_scales_source():
    h = 1 / 30
    p = make_example("cone", h, stencil_reach=np.sqrt(5))
    assert p.f(0.5, 0.5) == pytest.approx(4 / (5 * h * h))


def test_cone_rejects_even_n():
    with pytest.raises(ValueError):
        make_example("cone", 1 / 29)


def test_unknown_example():
    with pytest.raises(ValueError):
        make_example("saddle", 0.1)


@pytest.mark.parametrize("name", EXAMPLES)
def test_sources_nonnegative(name):
    rng = np.random.default_rng(1)
    p = make_example(name, 1 / 30)
    x, y = rng.uniform(size=(2, 10**6))
    f = p.f(x, y)
    assert np.all(f >= 0)


@pytest.mark.parametrize("name", EXAMPLES)
def test_boundary_data_matches_exact(name):
    p = make_example(name, 1 / 30)
    t = np.linspace(0, 1, 101)
    for x, y in [(t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)]:
        assert np.array_equal(p.g(x, y), p.exact(x, y))


def test_blowup_source_finite_on_interior_nodes():
    for n in (31, 63, 127):
        g = build_grid(n)
        f = sample_source(make_example("blowup", g.h), g)
        assert np.all(np.isfinite(f))


def test_blowup_corner_is_singular():
    p = make_example("blowup", 0.1)
    assert np.isinf(p.f(1.0, 1.0))
    assert p.g(1.0, 1.0) == 0.0


@pytest.mark.parametrize("name", ["c2", "blowup"])
def test_monotone_consistency_under_refinement(name):
    # residual of the exact solution shrinks as h and dtheta shrink together
    res = []
    for n, w in [(15, 1), (31, 2), (61, 3)]:
        g = build_grid(n)
        p = make_example(name, g.h)
        ev = monotone_ma_eval(g.sample(p.exact), p, g, build_direction_set(w))
        inner = [k for k in g.interior if 0.25 <= g.coords[0][k] <= 0.75 and 0.25 <= g.coords[1][k] <= 0.75]
        res.append(np.max(np.abs(ev.residual[inner])))
    assert res[0] > res[1] > res[2]
