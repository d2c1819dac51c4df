"""
Unit tests for config loading, result writers and presets
"""

import math
from pathlib import Path

import numpy as np
import pytest

from src.core.exceptions import ConfigError
from src.core.funcspace import PI, Interval, PiecewiseFunction
from src.core.spectral import compute_Iak, compute_Ik
from src.models.schemas import CouplingSpec, InitialDataSpec, RunConfig
from src.tools.config_loader import apply_overrides, dump_config, load_config, locate_key, parse_config
from src.tools.csv_export import ResultWriter, config_hash, read_provenance, read_table, sample_table
from src.tools.presets import (
    build_coupling, build_initial_data, piecewise_from_spec, piecewise_to_spec, tune_vanishing_mode,
)


VALID = """{
  "coupling": {"preset": "q1"},
  "omega": {"lo": 0.3, "hi": 1.5},
  "T": 1.0,
  "K": 4
}"""


class TestConfigLoader:
    """JSON RunConfig parsing with located errors."""

    def test_parse_valid(self):
        """Test a minimal config fills defaults."""
        config = parse_config(VALID)
        assert config.K == 4
        assert config.mode == "distributed"
        assert config.tolerances.biortho == 1e-8

    def test_round_trip(self):
        """Test parse ∘ dump is the identity."""
        config = parse_config(VALID)
        assert parse_config(dump_config(config)) == config

    def test_syntax_error_location(self):
        """Test a missing comma is reported at its line."""
        broken = VALID.replace('"hi": 1.5},', '"hi": 1.5}')
        with pytest.raises(ConfigError, match="line 4") as info:
            parse_config(broken)
        assert info.value.line == 4

    def test_validation_error_location(self):
        """Test T ≤ 0 names the key and its line."""
        bad = VALID.replace('"T": 1.0', '"T": -1.0')
        with pytest.raises(ConfigError, match="line 4, column 3: T") as info:
            parse_config(bad, "run.json")
        assert info.value.line == 4
        assert "run.json" in str(info.value)

    def test_unknown_key_rejected(self):
        """Test extra keys are refused."""
        extra = VALID.replace('"K": 4', '"K": 4,\n  "colour": "blue"')
        with pytest.raises(ConfigError, match="colour"):
            parse_config(extra)

    def test_bad_interval(self):
        """Test ω must satisfy lo < hi."""
        with pytest.raises(ConfigError, match="omega"):
            parse_config(VALID.replace('"lo": 0.3', '"lo": 2.0'))

    def test_locate_nested_key(self):
        """Test nested paths resolve to the deepest named key."""
        # "hi" sits on line 3, column 24
        assert locate_key(VALID, ("omega", "hi")) == (3, 24)
        assert locate_key(VALID, ("missing",)) is None

    def test_overrides(self):
        """Test None overrides are ignored and others validated."""
        config = parse_config(VALID)
        merged = apply_overrides(config, {"K": 9, "T": None, "seed": 3})
        assert merged.K == 9 and merged.T == 1.0 and merged.seed == 3
        with pytest.raises(ConfigError, match="override"):
            apply_overrides(config, {"K": 0})

    def test_missing_file(self, tmp_path):
        """Test a missing path is a ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_load_from_file(self, tmp_path):
        """Test load_config reads and applies overrides."""
        path = tmp_path / "run.json"
        path.write_text(VALID, encoding="utf-8")
        assert load_config(path, {"T": 0.5}).T == 0.5

    def test_checked_in_configs(self):
        """Test every file under configs/ validates."""
        paths = sorted(Path(__file__).resolve().parents[2].joinpath("configs").glob("*.json"))
        assert paths
        for path in paths:
            assert load_config(path).K >= 1


class TestResultWriter:
    """Provenance headers and CSV precision."""

    def setup_method(self):
        """Set up test fixtures."""
        self.config = parse_config(VALID)

    def test_config_hash_is_stable(self):
        """Test equal configs hash equally and K changes the hash."""
        same = parse_config(dump_config(self.config))
        assert config_hash(same) == config_hash(self.config)
        assert config_hash(apply_overrides(self.config, {"K": 5})) != config_hash(self.config)
        assert len(config_hash(self.config)) == 64

    def test_header_and_table(self, tmp_path):
        """Test the provenance lines precede a readable table."""
        writer = ResultWriter(tmp_path, self.config, "analyze", seed=7)
        path = writer.write_table("spectral.csv", [{"k": 1, "I_k": 1.0 / 3.0}, {"k": 2, "I_k": 0.5}])
        text = path.read_text(encoding="utf-8")
        assert text.startswith("# provenance:")
        # 17 significant digits
        assert "0.33333333333333331" in text
        fields = read_provenance(path)
        assert fields["config_hash"] == config_hash(self.config)
        assert fields["K"] == "4"
        assert fields["seed"] == "7"
        frame = read_table(path)
        assert list(frame.columns) == ["k", "I_k"]
        assert frame["I_k"].iloc[0] == 1.0 / 3.0

    def test_deterministic_bytes(self, tmp_path):
        """Test identical inputs give byte-identical files."""
        rows = [{"k": k, "value": math.sqrt(k)} for k in range(1, 6)]
        a = ResultWriter(tmp_path / "a", self.config, "analyze").write_table("t.csv", rows)
        b = ResultWriter(tmp_path / "b", self.config, "analyze").write_table("t.csv", rows)
        assert a.read_bytes() == b.read_bytes()

    def test_lines_and_samples(self, tmp_path):
        """Test report lines and the long-form sample table."""
        writer = ResultWriter(tmp_path, self.config, "verify")
        path = writer.write_lines("verify.txt", ["ratio=0", "result=pass"])
        assert path.read_text(encoding="utf-8").rstrip().endswith("result=pass")
        frame = sample_table(np.array([0.0, 1.0]), np.array([0.5, 0.7, 0.9]), np.arange(6.0).reshape(2, 3))
        assert len(frame) == 6
        assert frame.iloc[4].tolist() == [1.0, 0.7, 4.0]


class TestPresets:
    """Coupling and initial-data builders."""

    def setup_method(self):
        """Set up test fixtures."""
        self.omega = Interval(1.0, 2.0)

    def test_named_couplings(self):
        """Test every named preset builds."""
        for name in ("zero", "q1", "px", "p1", "cos2", "surrogate", "surrogate_left", "bump_p"):
            cp = build_coupling(CouplingSpec(preset=name), self.omega)
            assert cp.p is not None and cp.q is not None

    def test_surrogate_parameters(self):
        """Test τ and M reach the cosine surrogate."""
        cp = build_coupling(CouplingSpec(preset="surrogate", params={"tau": 0.4, "modes": 12}), self.omega)
        assert cp.q.order == 12
        assert "tau=0.4" in cp.name

    def test_unknown_preset(self):
        """Test an unknown name is a ConfigError listing the known ones."""
        with pytest.raises(ConfigError, match="Unknown coupling preset"):
            build_coupling(CouplingSpec(preset="nope"), self.omega)

    def test_explicit_piecewise(self):
        """Test explicit p and q survive a spec round trip."""
        q = PiecewiseFunction.bump(0.2, 0.8)
        spec = piecewise_to_spec(q)
        back = piecewise_from_spec(spec)
        x = np.linspace(0.0, 3.0, 13)
        assert np.allclose(back(x), q(x), atol=1e-14)
        cp = build_coupling(CouplingSpec(q=spec), self.omega)
        assert np.allclose(cp.q(x), q(x), atol=1e-14)

    def test_tuned_vanishing_mode(self):
        """Test the tuned q vanishes on ω and cancels I_2 and I_{a,2}."""
        cp = tune_vanishing_mode(2, self.omega)
        assert np.max(np.abs(cp.q(np.linspace(1.0, 2.0, 101)))) <= 1e-15
        assert abs(compute_Ik(cp, 2)) <= 1e-10
        assert abs(compute_Iak(cp, 1.0, 2)) <= 1e-10
        assert cp.name == "tuned_k2"

    def test_tuned_without_right_room(self):
        """Test only the left bumps are added when ω reaches close to π."""
        omega = Interval(1.0, 2.8)
        cp = tune_vanishing_mode(2, omega)
        assert np.max(np.abs(cp.q(np.linspace(1.0, PI, 101)))) <= 1e-15
        assert abs(compute_Iak(cp, 1.0, 2)) <= 1e-10
        with pytest.raises(ValueError, match="room on the left"):
            tune_vanishing_mode(2, Interval(0.2, 1.0))

    def test_initial_data(self):
        """Test sine-mode initial data and the exclusive-source rule."""
        y1, y2 = build_initial_data(InitialDataSpec(y1_modes={1: 1.0}, y2_modes={2: -0.5}))
        assert y1.coefficient(1) == 1.0
        assert y2.coefficient(2) == -0.5
        spec = InitialDataSpec(y1_modes={1: 1.0}, y1=piecewise_to_spec(PiecewiseFunction.constant(1.0)))
        with pytest.raises(ConfigError, match="not both"):
            build_initial_data(spec)
