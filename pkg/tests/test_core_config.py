import math

import pytest
from hypothesis import given, strategies as st

from hdqkd.config import (DEFAULT_CONFIG, ConfigError, WavelengthPlan, dumps_config,
                          parse_config, validate, violations)
from hdqkd.core import (ChannelBudget, NoiseBudget, db_to_linear, dbm_to_watts,
                        linear_to_db, photons_per_gate, watts_to_dbm)


@pytest.mark.parametrize("db, lin", [(0.0, 1.0), (10.0, 0.1), (20.52, 8.872e-3)])
def test_db_to_linear_examples(db, lin):
    assert db_to_linear(db) == pytest.approx(lin, rel=1e-4)


@given(st.floats(min_value=1e-9, max_value=1.0))
def test_db_round_trip(x):
    assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_linear_to_db_rejects_non_positive(bad):
    with pytest.raises(ValueError):
        linear_to_db(bad)


def test_dbm_helpers():
    assert dbm_to_watts(0.0) == pytest.approx(1e-3)
    assert watts_to_dbm(dbm_to_watts(-38.5)) == pytest.approx(-38.5)


def test_photons_per_gate_inversion():
    h, c = 6.62607015e-34, 299792458.0
    p = h * c / (1555.62e-9 * 1e-10)
    assert photons_per_gate(p, 1555.62, 1e-10) == pytest.approx(1.0, rel=1e-12)


def test_defaults_are_valid():
    assert violations(DEFAULT_CONFIG) == []
    assert validate(DEFAULT_CONFIG) is DEFAULT_CONFIG


def test_probabilities_must_sum_to_one():
    bad = DEFAULT_CONFIG.replace(intensity_probs=(0.5, 0.06, 0.43))
    with pytest.raises(ConfigError) as err:
        validate(bad)
    assert any("probabilities sum" in v for v in err.value.violations)


def test_decoy_ordering():
    bad = DEFAULT_CONFIG.replace(intensities=(0.1, 0.54, 0.0002))
    with pytest.raises(ConfigError) as err:
        validate(bad)
    assert any("decoy ordering violated" in v for v in err.value.violations)


@pytest.mark.parametrize("change", [
    {"dimension": 3},
    {"dimension": 1},
    {"p_time_basis": 1.0},
    {"detector_efficiency": 1.2},
    {"eps_sec": 0.0},
    {"interferometer_transmittance": 0.0},
    {"l0_km": -1.0},
    {"frame_policy": "weekly"},
])
def test_invalid_fields_are_reported(change):
    assert violations(DEFAULT_CONFIG.replace(**change))


def test_all_violations_listed_together():
    bad = DEFAULT_CONFIG.replace(intensity_probs=(0.5, 0.06, 0.43), dimension=3)
    assert len(violations(bad)) >= 2


def test_validation_is_idempotent():
    once = validate(DEFAULT_CONFIG.replace(dimension=8))
    assert validate(once) == once


def test_wavelength_plan_grid():
    plan = WavelengthPlan.grid(1555.62, 1585.2, 0.8, 3)
    assert plan.quantum_nm == pytest.approx((1555.62, 1556.42, 1557.22))
    assert plan.classical_nm == pytest.approx((1585.2, 1586.0, 1586.8))
    assert plan.problems() == []


def test_wavelength_plan_overlap_is_a_problem():
    plan = WavelengthPlan((1550.0, 1550.8), (1550.8, 1560.0), 0.8)
    assert plan.problems()


def test_config_text_round_trip():
    cfg = DEFAULT_CONFIG.replace(dimension=8, psd_w_per_nm=3.3e-6, frame_policy="clock-per-bin")
    assert parse_config(dumps_config(cfg)) == cfg


@pytest.mark.parametrize("text", ["[nowhere]\nx = 1\n", "[room]\nroom_w = 3\n"])
def test_parse_rejects_unknown_entries(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_channel_budget_product():
    b = ChannelBudget(0.8, 0.1, 0.3, 0.3)
    assert b.eta_total == pytest.approx(0.8 * 0.1 * 0.3 * 0.3, rel=1e-12)
    assert b.loss_db == pytest.approx(-10 * math.log10(b.eta_total))
    with pytest.raises(ValueError):
        ChannelBudget(1.1, 1, 1, 1)


def test_noise_budget_sum():
    nb = NoiseBudget(1e-9, 2e-9, 3e-10, 1e-8)
    assert nb.n_total == pytest.approx(1e-9 + 2e-9 + 3e-10 + 1e-8, rel=1e-12)
    with pytest.raises(ValueError):
        NoiseBudget(-1e-9, 0, 0, 0)
