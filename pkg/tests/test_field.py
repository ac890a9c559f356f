"""Target bounds, root-zone aggregation, crop/weather generators, and
multi-zone composition."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrisched.errors import InvalidBounds
from irrisched.field import (
    FieldState,
    ForcingNoise,
    NoiseSpec,
    WeatherDay,
    WeatherModel,
    ZoneConfig,
    default_zones,
    field_step,
    gdd_step,
    generate_weather,
    kc_of_gdd,
    perturb_forcing,
    root_zone_moisture,
    sample_initial_state,
    target_bounds,
    zone_rngs,
)
from irrisched.soilsim import LOAM, ColumnGrid, ColumnState, psi_from_theta

GRID = ColumnGrid()


class TestTargetBounds:
    def test_reference_zone_values(self):
        # theta_wp back-solved from the 0.280/0.200 targets at MAD = 0.5
        nu_upper, nu_lower = target_bounds(0.280, 0.120, 0.5)
        assert nu_upper == pytest.approx(0.280)
        assert nu_lower == pytest.approx(0.200)
        nu_upper, nu_lower = target_bounds(0.300, 0.160, 0.5)
        assert (nu_upper, nu_lower) == (pytest.approx(0.300), pytest.approx(0.230))

    def test_mad_one_gives_wilting_point(self):
        _, nu_lower = target_bounds(0.28, 0.12, 1.0)
        assert nu_lower == pytest.approx(0.12)

    def test_mad_to_zero_approaches_field_capacity(self):
        _, nu_lower = target_bounds(0.28, 0.12, 1e-9)
        assert nu_lower == pytest.approx(0.28, abs=1e-8)

    def test_invalid_inputs(self):
        with pytest.raises(InvalidBounds):
            target_bounds(0.2, 0.3, 0.5)
        with pytest.raises(InvalidBounds):
            target_bounds(0.3, 0.2, 0.0)
        with pytest.raises(InvalidBounds):
            target_bounds(0.3, 0.2, 1.5)

    def test_zone_config_consistency(self):
        for cfg in default_zones():
            assert cfg.nu_lower == pytest.approx(
                cfg.theta_fc - cfg.mad * (cfg.theta_fc - cfg.theta_wp)
            )
            assert cfg.nu_lower < cfg.nu_upper


class TestRootZoneMoisture:
    def test_uniform_profile(self):
        y = np.full(21, 0.25)
        assert root_zone_moisture(y, 0.5, GRID) == pytest.approx(0.25, rel=1e-12)

    def test_top_weighted_example(self):
        # direct weighted-sum oracle: top quarter at 0.30, rest at 0.20
        y = np.full(21, 0.20)
        groups = GRID.quarter_slices(0.5)
        y[groups[0]] = 0.30
        assert root_zone_moisture(y, 0.5, GRID) == pytest.approx(
            0.4 * 0.30 + 0.6 * 0.20, rel=1e-12
        )

    def test_quarter_weights_exact(self):
        # each quarter isolated recovers exactly its weight
        for q, w in enumerate((0.4, 0.3, 0.2, 0.1)):
            y = np.zeros(21)
            y[GRID.quarter_slices(0.5)[q]] = 1.0
            assert root_zone_moisture(y, 0.5, GRID) == pytest.approx(w, rel=1e-12)

    def test_boundary_nodes_go_shallow(self):
        groups = GRID.quarter_slices(0.5)
        # depth 0.125 is node 5: belongs to the first quarter
        assert 5 in groups[0]
        assert 5 not in groups[1]
        assert [len(g) for g in groups] == [6, 5, 5, 5]

    def test_rooting_depth_exceeds_column(self):
        with pytest.raises(ValueError):
            root_zone_moisture(np.full(21, 0.2), 0.6, GRID)


class TestCropCoefficient:
    def test_gdd_step(self):
        assert gdd_step(15.0) == 10.0
        assert gdd_step(5.0) == 0.0
        assert gdd_step(3.0) == 0.0

    def test_kc_at_zero_clamped(self):
        # raw polynomial constant term is -0.0207
        assert kc_of_gdd(0.0) == 0.0

    def test_kc_polynomial_value(self):
        # polynomial oracle: -0.0207 + 2.66 + 0.047 - 2.0 + 0.27
        assert kc_of_gdd(1000.0) == pytest.approx(0.9563, abs=1e-12)

    def test_clamp_never_raises_positive_values(self):
        for g in np.linspace(100, 1200, 40):
            raw = -0.0207 + 0.00266 * g + 4.7e-8 * g**2 - 2.0e-9 * g**3 + 2.70e-13 * g**4
            if raw >= 0:
                assert kc_of_gdd(g) == raw

    @given(st.floats(min_value=0, max_value=2000))
    @settings(max_examples=200, deadline=None)
    def test_kc_continuous_and_nonnegative(self, g):
        k = kc_of_gdd(g)
        assert k >= 0.0
        assert abs(kc_of_gdd(g + 1e-7) - k) < 1e-4


class TestWeatherGenerator:
    def test_et0_range(self):
        days = generate_weather(500, np.random.default_rng(0))
        et0_mm = np.array([d.et0 for d in days]) * 1000.0
        assert np.all(et0_mm >= 1.04)
        assert np.all(et0_mm <= 9.0)

    def test_no_rain_when_wet_prob_zero(self):
        model = WeatherModel(rain_wet_prob=0.0)
        days = generate_weather(200, np.random.default_rng(1), model)
        assert all(d.precip == 0.0 for d in days)

    def test_deterministic_given_seed(self):
        a = generate_weather(113, np.random.default_rng(42))
        b = generate_weather(113, np.random.default_rng(42))
        assert a == b

    def test_wet_day_frequency(self):
        days = generate_weather(20000, np.random.default_rng(2))
        wet_frac = np.mean([d.precip > 0 for d in days])
        assert wet_frac == pytest.approx(0.25, abs=0.02)


class TestPerturbForcing:
    def test_zero_noise_identity(self):
        spec = NoiseSpec(forcing=ForcingNoise(0, 0, 0, 0))
        w = WeatherDay(et0=0.005, precip=0.002, t_avg=18.0)
        out, kc = perturb_forcing(w, 0.9, 3, spec, np.random.default_rng(0))
        assert out == w
        assert kc == 0.9

    def test_noise_grows_with_lead(self):
        spec = NoiseSpec()
        w = WeatherDay(et0=0.005, precip=0.0, t_avg=18.0)
        rng = np.random.default_rng(3)
        stds = []
        for lead in (0, 5, 10):
            draws = [perturb_forcing(w, 0.9, lead, spec, rng)[0].et0 for _ in range(4000)]
            stds.append(np.std(draws))
        assert stds[0] < stds[1] < stds[2]

    def test_growth_capped(self):
        spec = NoiseSpec()
        assert spec.growth(0) == 1.0
        assert spec.growth(100) == spec.forecast_growth_cap

    def test_clipped_nonnegative(self):
        spec = NoiseSpec()
        w = WeatherDay(et0=1e-5, precip=0.0, t_avg=18.0)
        rng = np.random.default_rng(4)
        for _ in range(200):
            out, kc = perturb_forcing(w, 0.0, 10, spec, rng)
            assert out.et0 >= 0.0
            assert out.precip >= 0.0
            assert kc >= 0.0


class TestFieldStep:
    def _setup(self, n=3):
        configs = default_zones()[:n]
        states = [
            ColumnState(np.full(21, psi_from_theta(0.24, cfg.phi))) for cfg in configs
        ]
        return configs, FieldState(states)

    def test_single_zone_matches_direct_step(self):
        from irrisched.soilsim import observe, step_day

        configs, fs = self._setup(1)
        cfg = configs[0]
        w = WeatherDay(et0=0.005, precip=0.001, t_avg=16.0)
        noise = NoiseSpec(process_std=0.0, output_std=0.0)
        fs2, ys = field_step(fs, [0.008], w, 0.9, configs, GRID, noise, None)

        from irrisched.soilsim import DailyForcing

        direct = step_day(
            fs.zones[0],
            DailyForcing(u_irr=0.008, precip=0.001, et0=0.005, kc=0.9),
            cfg.phi, GRID, cfg.feddes(),
        )
        assert np.allclose(fs2.zones[0].psi, direct.psi)
        assert np.allclose(ys[0], observe(direct, cfg.phi))

    def test_zone_permutation_invariance(self):
        configs, fs = self._setup(3)
        w = WeatherDay(et0=0.006, precip=0.0, t_avg=17.0)
        noise = NoiseSpec()
        u = np.array([0.004, 0.0, 0.01])

        _, ys = field_step(fs, u, w, 0.8, configs, GRID, noise, zone_rngs(9, 3))

        perm = [2, 0, 1]
        configs_p = [configs[i] for i in perm]
        fs_p = FieldState([fs.zones[i].copy() for i in perm])
        rngs = zone_rngs(9, 3)
        _, ys_p = field_step(
            fs_p, u[perm], w, 0.8, configs_p, GRID, noise, [rngs[i] for i in perm]
        )
        for j, i in enumerate(perm):
            assert np.array_equal(ys_p[j], ys[i])

    def test_zone_trajectory_invariant_to_neighbors(self):
        configs, fs = self._setup(3)
        w = WeatherDay(et0=0.006, precip=0.0, t_avg=17.0)
        noise = NoiseSpec()

        _, ys_a = field_step(
            fs.copy(), [0.0, 0.0, 0.0], w, 0.8, configs, GRID, noise, zone_rngs(5, 3)
        )
        _, ys_b = field_step(
            fs.copy(), [0.0, 0.03, 0.03], w, 0.8, configs, GRID, noise, zone_rngs(5, 3)
        )
        assert np.array_equal(ys_a[0], ys_b[0])

    def test_three_zone_output_shapes(self):
        configs, fs = self._setup(3)
        w = WeatherDay(et0=0.005, precip=0.0, t_avg=16.0)
        noise = NoiseSpec(process_std=0.0002, output_std=0.0005)
        fs2, ys = field_step(fs, [0.0, 0.0, 0.0], w, 0.7, configs, GRID, noise, zone_rngs(0, 3))
        assert len(ys) == 3
        assert all(y.shape == (21,) for y in ys)
        assert fs2.day_index == 1
        assert fs2.gdd_cum == pytest.approx(11.0)

    def test_initial_state_sampler_in_range(self):
        cfg = default_zones()[0]
        rng = np.random.default_rng(11)
        for _ in range(50):
            state = sample_initial_state(cfg, GRID, rng)
            from irrisched.soilsim import water_content

            theta = water_content(state.psi, cfg.phi)
            assert np.all(theta >= cfg.nu_lower - 0.03 - 1e-9)
            assert np.all(theta <= cfg.nu_upper + 1e-9)
            assert np.ptp(theta) < 1e-12
