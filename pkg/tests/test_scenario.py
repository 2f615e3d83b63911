import math
from pathlib import Path

import pytest
import yaml

from ionrabi import Scenario, parse_scenario, scenario_from_dict
from ionrabi.errors import SchemaError
from ionrabi.scenario import KHZ

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
GOLDEN_SCENARIOS = ["fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6"]


def _minimal(**overrides):
    doc = {
        "schema_version": 1,
        "name": "test",
        "model": {"kind": "JC", "g": 45.24},
        "initial": {"kind": "fock", "n": 0, "qubit": "down"},
        "times": {"t_end": 1.0, "n_points": 11},
    }
    doc.update(overrides)
    return doc


class TestGoldenFiles:
    def test_fig4_parameters(self):
        sc = parse_scenario(SCENARIO_DIR / "fig4.scenario")
        spec = sc.model_spec()
        assert sc.model["kind"] == "NonlinearQRM"
        assert spec.eta == 0.67898
        assert spec.omega0_R == 0.0
        assert spec.g / spec.omega_R == pytest.approx(4.0)
        assert sc.initial == {"kind": "fock", "n": 0, "qubit": "down"}

    def test_fig3_parameters(self):
        sc = parse_scenario(SCENARIO_DIR / "fig3.scenario")
        assert sc.model["kind"] == "NonlinearAntiJC"
        assert sc.model["eta"] == 0.4518
        assert sc.lindblad == {"gamma_ratio": 2.0}
        assert sc.initial["kind"] == "thermal"
        assert sc.initial["nbar"] == 1.0
        assert sc.times["t_end"] == 100.0

    def test_fig6_coupling_ratio(self):
        spec = parse_scenario(SCENARIO_DIR / "fig6.scenario").model_spec()
        assert spec.g / spec.omega_R == pytest.approx(3.7)

    @pytest.mark.parametrize("name", GOLDEN_SCENARIOS)
    def test_round_trip(self, name, tmp_path):
        sc = parse_scenario(SCENARIO_DIR / f"{name}.scenario")
        path = tmp_path / "row.yaml"
        sc.save(path)
        assert parse_scenario(path) == sc


class TestUnits:
    def test_khz_conversion(self):
        sc = scenario_from_dict(_minimal())
        assert sc.model_spec().g == pytest.approx(45.24 * 2 * math.pi * 1e3)
        assert KHZ == pytest.approx(2 * math.pi * 1e3)


class TestValidation:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.scenario"
        p.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            parse_scenario(p)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(SchemaError, match="cannot read"):
            parse_scenario(tmp_path / "missing.scenario")

    def test_invalid_yaml(self, tmp_path):
        p = tmp_path / "broken.scenario"
        p.write_text("model: [unclosed")
        with pytest.raises(SchemaError, match="YAML"):
            parse_scenario(p)

    def test_unknown_top_level_key(self):
        with pytest.raises(SchemaError, match="unknown key"):
            scenario_from_dict(_minimal(extra=1))

    def test_unknown_model_key(self):
        doc = _minimal(model={"kind": "JC", "g": 1.0, "eta": 0.5})
        with pytest.raises(SchemaError, match="model.*unknown key"):
            scenario_from_dict(doc)

    def test_missing_required_key(self):
        doc = _minimal()
        del doc["times"]
        with pytest.raises(SchemaError, match="missing required"):
            scenario_from_dict(doc)

    def test_version_mismatch(self):
        with pytest.raises(SchemaError, match="version"):
            scenario_from_dict(_minimal(schema_version=2))

    def test_bad_kind(self):
        with pytest.raises(SchemaError, match="kind"):
            scenario_from_dict(_minimal(model={"kind": "Tavis", "g": 1.0}))

    def test_non_numeric_field(self):
        with pytest.raises(SchemaError, match="expected a number"):
            scenario_from_dict(_minimal(model={"kind": "JC", "g": "strong"}))

    def test_bool_rejected_as_number(self):
        with pytest.raises(SchemaError, match="expected a number"):
            scenario_from_dict(_minimal(model={"kind": "JC", "g": True}))

    def test_bad_initial(self):
        with pytest.raises(SchemaError, match="initial.kind"):
            scenario_from_dict(_minimal(initial={"kind": "squeezed", "r": 1.0}))
        with pytest.raises(SchemaError, match="qubit"):
            scenario_from_dict(_minimal(
                initial={"kind": "fock", "n": 0, "qubit": "sideways"}))
        with pytest.raises(SchemaError, match="must be >= 0"):
            scenario_from_dict(_minimal(initial={"kind": "thermal", "nbar": -1.0}))

    def test_bad_times(self):
        with pytest.raises(SchemaError, match="t_end"):
            scenario_from_dict(_minimal(times={"t_end": -1.0, "n_points": 5}))
        with pytest.raises(SchemaError, match="n_points"):
            scenario_from_dict(_minimal(times={"t_end": 1.0, "n_points": 1}))

    def test_unknown_observable(self):
        with pytest.raises(SchemaError, match="unknown observable"):
            scenario_from_dict(_minimal(outputs={"observables": ["parity"]}))

    def test_two_tone_lindblad_rejected(self):
        doc = _minimal(
            model={"kind": "TwoTone", "eta": 0.1, "Omega": 133.26, "nu": 5000.0,
                   "delta_r": 11.31, "delta_b": -11.31},
            lindblad={"gamma_ratio": 2.0},
        )
        with pytest.raises(SchemaError, match="two-tone"):
            scenario_from_dict(doc)

    def test_model_level_error_surfaces_at_parse(self):
        doc = _minimal(model={"kind": "TwoTone", "eta": 0.4, "Omega": 3.0,
                              "nu": 5000.0, "g": 100.0,
                              "delta_r": 11.31, "delta_b": -11.31})
        with pytest.raises((SchemaError, ValueError), match="inconsistent coupling"):
            scenario_from_dict(doc)

    def test_negative_truncation(self):
        with pytest.raises(SchemaError, match="truncation"):
            scenario_from_dict(_minimal(truncation=0))


class TestDefaults:
    def test_outputs_default_to_all(self):
        sc = scenario_from_dict(_minimal())
        assert sc.outputs["observables"] == ["sigma_z", "fidelity", "n_mean", "phonons"]
        assert sc.outputs["snapshot_times"] == []

    def test_qubit_defaults_down(self):
        sc = scenario_from_dict(_minimal(initial={"kind": "fock", "n": 2}))
        assert sc.initial["qubit"] == "down"

    def test_round_trip_applies_normalization(self, tmp_path):
        sc = scenario_from_dict(_minimal(initial={"kind": "fock", "n": 2}))
        p = tmp_path / "s.yaml"
        sc.save(p)
        again = parse_scenario(p)
        assert again == sc
        assert yaml.safe_load(sc.to_yaml())["initial"]["qubit"] == "down"
