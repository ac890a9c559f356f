"""Closed-form hydraulic property checks against independent oracles.

Frozen expected values were computed by direct evaluation of the van
Genuchten / Mualem closed forms with mpmath at 40 significant digits
(see the derivations in the test bodies).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrisched.soilsim import (
    CLAY_LOAM,
    LOAM,
    SANDY_LOAM,
    HydraulicParams,
    capillary_capacity,
    conductivity,
    psi_from_theta,
    water_content,
)
from irrisched.soilsim.hydraulics import conductivity_slope

SOILS = [LOAM, SANDY_LOAM, CLAY_LOAM]


class TestWaterContent:
    def test_saturation_limit(self):
        for phi in SOILS:
            assert water_content(0.0, phi) == phi.theta_s
            assert water_content(0.5, phi) == phi.theta_s

    def test_dry_limit(self):
        # tail mass below 1e-6 requires the steeper retention curve
        assert water_content(-1.0e6, SANDY_LOAM) == pytest.approx(
            SANDY_LOAM.theta_r, abs=1e-6
        )

    def test_loam_closed_form_value(self):
        # mpmath oracle: theta(-1.0 m, loam) at 40 digits
        assert water_content(-1.0, LOAM) == pytest.approx(
            0.24213178471815216, rel=1e-12
        )

    def test_range(self):
        psi = np.linspace(-100.0, 1.0, 500)
        for phi in SOILS:
            theta = water_content(psi, phi)
            assert np.all(theta >= phi.theta_r)
            assert np.all(theta <= phi.theta_s)

    @given(st.floats(min_value=-1e4, max_value=-1e-6))
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_psi(self, psi):
        for phi in SOILS:
            assert water_content(psi, phi) <= water_content(psi * 0.5, phi) + 1e-15


class TestCapillaryCapacity:
    def test_saturated_branch_regularization(self):
        assert capillary_capacity(0.1, LOAM) == 1.0e-5
        assert capillary_capacity(0.0, LOAM) == 1.0e-5

    def test_matches_finite_difference(self):
        h = 1e-6
        for phi in SOILS:
            for psi in [-0.01, -0.5, -2.0, -10.0, -50.0]:
                fd = (water_content(psi + h, phi) - water_content(psi - h, phi)) / (2 * h)
                assert capillary_capacity(psi, phi) == pytest.approx(fd, rel=1e-6)

    def test_loam_frozen_value(self):
        # mpmath oracle: dtheta/dpsi(-2.0 m, loam)
        assert capillary_capacity(-2.0, LOAM) == pytest.approx(
            0.030694685006178946, rel=1e-12
        )

    def test_dry_tail_vanishes(self):
        assert capillary_capacity(-1e9, SANDY_LOAM) == pytest.approx(0.0, abs=1e-9)

    @given(st.floats(min_value=-1e5, max_value=10.0))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_everywhere(self, psi):
        for phi in SOILS:
            assert capillary_capacity(psi, phi) >= 0.0


class TestConductivity:
    def test_saturated_limit(self):
        for phi in SOILS:
            assert conductivity(0.0, phi) == phi.Ks
            assert conductivity(2.0, phi) == phi.Ks

    def test_loam_mualem_frozen_value(self):
        # mpmath oracle: Ks*sqrt(Se)*(1-(1-Se^(1/m))^m)^2 at psi = -1 m
        assert conductivity(-1.0, LOAM) == pytest.approx(3.9413184696039795e-9, rel=1e-10)

    def test_monotone_nondecreasing(self):
        psi = np.linspace(-50.0, 0.5, 2000)
        for phi in SOILS:
            k = conductivity(psi, phi)
            assert np.all(np.diff(k) >= -1e-25)

    def test_slope_matches_finite_difference(self):
        for phi in SOILS:
            for psi in [-0.05, -0.3, -1.0, -5.0, -20.0]:
                h = 1e-7 * max(1.0, abs(psi))
                fd = (conductivity(psi + h, phi) - conductivity(psi - h, phi)) / (2 * h)
                assert conductivity_slope(psi, phi) == pytest.approx(fd, rel=1e-5)


class TestInversion:
    @given(st.floats(min_value=0.01, max_value=0.99))
    @settings(max_examples=100, deadline=None)
    def test_round_trip(self, se_target):
        for phi in SOILS:
            theta = phi.theta_r + se_target * (phi.theta_s - phi.theta_r)
            psi = psi_from_theta(theta, phi)
            assert water_content(psi, phi) == pytest.approx(theta, rel=1e-9)

    def test_saturation_maps_to_zero(self):
        assert psi_from_theta(LOAM.theta_s, LOAM) == 0.0


class TestParamValidation:
    def test_rejects_bad_ordering(self):
        with pytest.raises(ValueError):
            HydraulicParams(Ks=1e-6, theta_s=0.2, theta_r=0.3, alpha=1.0, n=1.5)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            HydraulicParams(Ks=0.0, theta_s=0.4, theta_r=0.05, alpha=1.0, n=1.5)
        with pytest.raises(ValueError):
            HydraulicParams(Ks=1e-6, theta_s=0.4, theta_r=0.05, alpha=1.0, n=1.0)


def test_parameter_fixture_round_trip(tmp_path):
    import yaml

    from irrisched.soilsim import load_parameter_sets

    path = tmp_path / "soils.yaml"
    data = {
        "zone_a": dict(Ks=2.9e-6, theta_s=0.43, theta_r=0.078, alpha=3.6, n=1.56),
    }
    path.write_text(yaml.safe_dump(data))
    loaded = load_parameter_sets(path)
    assert loaded["zone_a"] == LOAM
