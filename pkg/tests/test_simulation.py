import math

import numpy as np
import pytest
from scipy import integrate, stats

from ulcreg.errors import RejectionStall, UlcError
from ulcreg.sample import Box
from ulcreg.simulation import (
    DesignGeneratorConfig,
    NoiseConfig,
    TargetFunction,
    derive_seed,
    evaluate_target,
    generate_design,
    generate_noise,
    geometric_schedule,
    polar_radius_density,
    sample_polar_radii,
    synthetic_catalog,
)


def test_derived_seeds_are_distinct_and_stable():
    seeds = {derive_seed(7, run, stream) for run in range(100) for stream in range(4)}
    assert len(seeds) == 400
    assert derive_seed(7, 3, 1) == derive_seed(7, 3, 1)
    assert derive_seed(7, 3, 1) != derive_seed(8, 3, 1)


class TestSchedule:
    def test_example_one_blocks(self):
        assert geometric_schedule(10, 5000) == (1, 10, 100, 1000, 3889)

    def test_powers_of_two(self):
        assert geometric_schedule(2, 4095) == tuple(2**i for i in range(12))

    def test_short_remainder_merges(self):
        s = geometric_schedule(10, 1200)
        assert sum(s) == 1200 and list(s) == sorted(s)

    def test_config_rejects_bad_schedules(self):
        with pytest.raises(UlcError):
            DesignGeneratorConfig("switch_blocks", 10, schedule=(4, 2, 8))
        with pytest.raises(UlcError):
            DesignGeneratorConfig("switch_blocks", 10, schedule=(1, 2))
        with pytest.raises(UlcError):
            DesignGeneratorConfig("iid_uniform", 0)


class TestDesigns:
    @pytest.mark.parametrize("kind", ["iid_uniform", "switch_blocks", "polar", "truncated_gaussian"])
    def test_deterministic_exact_count_and_inside(self, kind):
        cfg = DesignGeneratorConfig(kind, 5000, seed=11, schedule=geometric_schedule(10, 5000))
        a = generate_design(cfg)
        b = generate_design(cfg)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.n == 5000
        assert np.all(cfg.domain.contains(a.points))
        assert not np.array_equal(a.points, generate_design(cfg.with_seed(12)).points)

    def test_switch_blocks_alternate_halves(self):
        sched = geometric_schedule(10, 5000)
        pts = generate_design(DesignGeneratorConfig("switch_blocks", 5000, seed=3, schedule=sched)).points
        bounds = np.cumsum((0,) + sched)
        signs = [np.sign(pts[a:b, 0]) for a, b in zip(bounds[:-1], bounds[1:])]
        for s in signs:
            assert np.all(s == s[0])
        for s, t in zip(signs, signs[1:]):
            assert s[0] == -t[0]

    def test_first_side_is_a_fair_coin(self):
        sched = (1, 2, 4)
        firsts = [generate_design(DesignGeneratorConfig("switch_blocks", 7, seed=s, schedule=sched,
                                                        domain=Box.unit(2))).points[0, 0] < 0.5
                  for s in range(400)]
        assert abs(np.mean(firsts) - 0.5) < 4 * 0.5 / math.sqrt(400)

    def test_subsequence_means(self):
        sched = geometric_schedule(2, 2**13 - 1)
        for seed in range(20):
            cfg = DesignGeneratorConfig("switch_blocks", 2**13 - 1, domain=Box.unit(2), seed=seed,
                                        schedule=sched, first_side="lower")
            x = generate_design(cfg).points[:, 0]
            assert abs(x[: 2**12 - 1].mean() - 7 / 12) <= 0.02
            assert abs(x.mean() - 5 / 12) <= 0.02

    def test_regular_grid(self):
        pts = generate_design(DesignGeneratorConfig("regular_grid", 16, domain=Box.unit(2))).points
        assert pts.shape == (16, 2)
        np.testing.assert_allclose(np.unique(pts[:, 0]), [0.125, 0.375, 0.625, 0.875])
        with pytest.raises(UlcError):
            generate_design(DesignGeneratorConfig("regular_grid", 15, domain=Box.unit(2)))

    def test_custom_sampler(self):
        cfg = DesignGeneratorConfig("custom", 5, domain=Box.unit(1),
                                    sampler=lambda n, rng: rng.uniform(0, 1, n))
        assert generate_design(cfg).points.shape == (5, 1)

    def test_rejection_stall(self):
        cfg = DesignGeneratorConfig("truncated_gaussian", 10, sd=1000.0,
                                    domain=Box([0.0, 0.0], [1e-3, 1e-3]))
        with pytest.raises(RejectionStall):
            generate_design(cfg)


class TestPolar:
    def test_density_normalised(self):
        val, _ = integrate.quad(polar_radius_density, 0, 2, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_radius_histogram_chi_square(self):
        r = sample_polar_radii(100_000, np.random.default_rng(0))
        edges = np.linspace(0, 2, 21)
        observed, _ = np.histogram(r, edges)
        probs = np.array([integrate.quad(polar_radius_density, a, b)[0]
                          for a, b in zip(edges[:-1], edges[1:])])
        expected = probs / probs.sum() * r.size
        assert stats.chisquare(observed, expected).pvalue > 0.001


class TestTargets:
    def test_point_values(self):
        assert evaluate_target(TargetFunction("logistic_cubic"), (0, 0)) == 2.5
        assert evaluate_target(TargetFunction("radial_sinc"), (0, 0)) == 10.0
        assert evaluate_target(TargetFunction("radial_sinc"), (1e-9, 0)) == pytest.approx(10.0)
        assert evaluate_target(TargetFunction("wiener", dim=1, seed=4), 0.0) == 0.0
        assert evaluate_target(TargetFunction("constant", c=1.25), (0.3, 0.1)) == 1.25

    def test_formulas(self):
        x, y = 0.13, -0.4
        assert evaluate_target(TargetFunction("logistic_cubic"), (x, y)) == pytest.approx(
            5 / (1 + math.exp(-20 * x)) - 2 * y**3, rel=1e-14)
        r = math.hypot(x, y)
        assert evaluate_target(TargetFunction("radial_sinc"), (x, y)) == pytest.approx(
            math.sin(10 * r) / r, rel=1e-14)

    def test_wiener_increments(self):
        w = TargetFunction("wiener", dim=1, seed=2)
        grid = np.linspace(0, 1, 2**16 + 1)
        inc = np.diff(w(grid[:, None]))
        assert np.std(inc) * math.sqrt(2**16) == pytest.approx(1.0, abs=0.02)
        np.testing.assert_array_equal(w(grid[:, None]), TargetFunction("wiener", dim=1, seed=2)(grid[:, None]))

    @pytest.mark.parametrize("alpha,zeta,dim", [(0.5, 2.0, 2), (1.0, 1.0, 2), (0.3, 0.7, 1)])
    def test_holder_quotients(self, alpha, zeta, dim):
        f = TargetFunction("holder", dim=dim, alpha=alpha, zeta=zeta, seed=5)
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (100_000, dim))
        y = x + rng.normal(0, 1, (100_000, dim)) * 10.0 ** rng.uniform(-6, 0, (100_000, 1))
        dist = np.abs(x - y).max(axis=1)
        q = np.abs(f(x) - f(y)) / dist**alpha
        assert q.max() <= zeta


class TestNoise:
    def test_zero_sigma(self):
        for kind in ("iid_gaussian", "mds_example"):
            assert np.all(generate_noise(NoiseConfig(kind, 0.0, 1), 50) == 0)

    def test_gaussian_mean(self):
        xi = generate_noise(NoiseConfig("iid_gaussian", 0.5, 3), 10**6)
        assert abs(xi.mean()) <= 4 * 0.5 / 1e3
        assert xi.std() == pytest.approx(0.5, rel=0.01)

    def test_deterministic(self):
        cfg = NoiseConfig("mds_example", 0.5, 9)
        np.testing.assert_array_equal(generate_noise(cfg, 100), generate_noise(cfg, 100))

    def test_mds_conditional_mean(self):
        xi = generate_noise(NoiseConfig("mds_example", 0.5, 4), 10**6)
        prev, cur = xi[:-1], xi[1:]
        edges = np.quantile(prev, np.linspace(0, 1, 11))
        which = np.clip(np.searchsorted(edges, prev, side="right") - 1, 0, 9)
        for b in range(10):
            c = cur[which == b]
            assert abs(c.mean()) < 3 * c.std() / math.sqrt(c.size)

    def test_mds_scale_depends_on_predecessor(self):
        xi = generate_noise(NoiseConfig("mds_example", 1.0, 4), 10**5)
        scale = np.abs(xi[1:]) / (0.5 + 0.5 * np.abs(np.sin(xi[:-1])))
        assert np.mean(scale**2) == pytest.approx(1.0, rel=0.03)

    def test_negative_sigma(self):
        with pytest.raises(UlcError):
            NoiseConfig("iid_gaussian", -1.0)


def test_synthetic_catalog_shape():
    cat = synthetic_catalog(seed=1)
    assert cat.shape == (10184, 3)
    assert cat[:, 2].min() == 2.7 and cat[:, 2].max() == 7.8
    assert np.all(np.isfinite(cat))
    np.testing.assert_array_equal(cat, synthetic_catalog(seed=1))
