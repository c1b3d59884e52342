from pathlib import Path

import pytest

from src.config import RunConfig, load_config, parse_config, preset_path, serialize_config
from src.constants import PRESETS_DIR
from src.errors import ConfigError
from src.lindblad import MAX_EIG_SIZE

MINIMAL = """
[system]
g1 = 6.0
g2 = 6.0
omega_c = 2.0
"""


def with_lines(*extra: str) -> str:
    return MINIMAL + "\n".join(extra) + "\n"


class TestParseConfig:
    def test_minimal(self) -> None:
        """Test that the three couplings are enough and the rest defaults."""
        config = parse_config(MINIMAL)
        assert config.system.g1 == 6.0
        assert config.system.kappa == 1.0
        assert config.run.omega_points == 4001
        assert config.output.directory == Path("output")
        assert config.output.separator == ","

    def test_comments_and_spacing(self) -> None:
        """Test that comments and blank lines are ignored."""
        text = "# header\n[system]  ; trailing\n  g1=1.5 # inline\ng2 = 1\n\nomega_c = 2\n"
        config = parse_config(text)
        assert config.system.g1 == 1.5

    def test_markers_inside_values(self) -> None:
        """Test that '#' and ';' only start a comment after whitespace."""
        text = with_lines("[output]", "directory = runs/out#1;b  # trailing")
        assert parse_config(text).output.directory == Path("runs/out#1;b")
        text = with_lines("[output]", "directory = runs/plain;comment")
        assert parse_config(text).output.directory == Path("runs/plain;comment")

    def test_ep_values_list(self) -> None:
        """Test comma and whitespace separated drive amplitudes."""
        config = parse_config(with_lines("[run]", "ep_values = 0.02, 0.06 0.45"))
        assert config.run.ep_values == (0.02, 0.06, 0.45)

    def test_booleans_and_literals(self) -> None:
        """Test boolean and choice values."""
        config = parse_config(
            with_lines("[run]", "keep_cross_damping = false", "backend = eig", "figure = fig7")
        )
        assert config.run.keep_cross_damping is False
        assert config.run.backend == "eig"
        assert config.run.figure == "fig7"


class TestConfigErrors:
    def test_truncation_below_minimum(self) -> None:
        """Test that n_trunc = 2 is rejected with its key and line."""
        with pytest.raises(ConfigError, match="invalid system.n_trunc") as info:
            parse_config(with_lines("n_trunc = 2"))
        assert info.value.key == "n_trunc"
        assert info.value.line == 6
        assert str(info.value).startswith("line 6: ")

    def test_unknown_key(self) -> None:
        """Test that misspelled keys are rejected."""
        with pytest.raises(ConfigError, match="unknown key system.kapa") as info:
            parse_config(with_lines("kapa = 1.0"))
        assert info.value.line == 6

    def test_unknown_section(self) -> None:
        """Test that only the known sections are accepted."""
        with pytest.raises(ConfigError, match=r"unknown section \[plot\]"):
            parse_config(with_lines("[plot]"))

    def test_duplicates(self) -> None:
        """Test that repeated keys and sections are rejected."""
        with pytest.raises(ConfigError, match="duplicate key system.g1"):
            parse_config(with_lines("g1 = 2.0"))
        with pytest.raises(ConfigError, match=r"duplicate section \[system\]"):
            parse_config(with_lines("[system]"))

    def test_missing_required_key(self) -> None:
        """Test that a missing coupling is named."""
        with pytest.raises(ConfigError, match="missing required key system.omega_c"):
            parse_config("[system]\ng1 = 1\ng2 = 1\n")

    def test_non_numeric(self) -> None:
        """Test that a value of the wrong type names its key."""
        with pytest.raises(ConfigError, match="invalid system.kappa"):
            parse_config(with_lines("kappa = fast"))

    def test_syntax(self) -> None:
        """Test lines without '=' and keys before any section."""
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config(with_lines("kappa 1.0"))
        with pytest.raises(ConfigError, match="outside of any section"):
            parse_config("g1 = 1.0\n" + MINIMAL)
        with pytest.raises(ConfigError, match="empty value"):
            parse_config(with_lines("kappa ="))

    def test_line_floor_range(self) -> None:
        """Test that the line floor is a fraction between 0 and 1."""
        assert parse_config(with_lines("[run]", "line_floor = 0")).run.line_floor == 0.0
        with pytest.raises(ConfigError, match="invalid run.line_floor"):
            parse_config(with_lines("[run]", "line_floor = 2"))

    def test_grid_ordering(self) -> None:
        """Test that an inverted frequency grid is rejected."""
        with pytest.raises(ConfigError, match="omega_max must be larger"):
            parse_config(with_lines("[run]", "omega_min = 1", "omega_max = -1"))


class TestConfigFiles:
    @pytest.mark.parametrize("name", ["fig4", "fig5", "fig6", "fig7"])
    def test_presets_roundtrip(self, name) -> None:
        """Test that every preset loads and serializes back to an equal config."""
        config = load_config(preset_path(name, PRESETS_DIR))
        assert config.run.figure == name
        assert parse_config(serialize_config(config)) == config

    def test_fig6_preset(self) -> None:
        """Test the values of the Mollow preset."""
        config = load_config(PRESETS_DIR / "fig6.cfg")
        assert config.system.kappa == 0.25
        assert config.system.big_delta == 0.1
        assert config.run.ep_values == (0.02, 0.06, 0.45)

    @pytest.mark.parametrize("name", ["fig6", "fig7"])
    def test_spectrum_presets_use_the_dense_backend(self, name) -> None:
        """Test that the spectrum presets pick the eig backend within its size cap."""
        config = load_config(PRESETS_DIR / f"{name}.cfg")
        assert config.run.backend == "eig"
        assert (4 * config.system.n_trunc) ** 2 <= MAX_EIG_SIZE
        assert config.run.peak_prominence == 1e-6

    def test_missing_file(self, tmp_path) -> None:
        """Test that an unreadable file is a config error."""
        with pytest.raises(ConfigError, match="cannot read config file"):
            load_config(tmp_path / "absent.cfg")

    def test_unknown_preset(self) -> None:
        """Test that only the known figures have presets."""
        with pytest.raises(ConfigError, match="unknown figure"):
            preset_path("fig9", PRESETS_DIR)

    def test_serialized_defaults(self) -> None:
        """Test that serialization writes every set field."""
        text = serialize_config(RunConfig(system=parse_config(MINIMAL).system))
        assert "keep_cross_damping = true" in text
        assert "figure" not in text
