"""Run configuration: a sectioned ``key = value`` text format.

    [system]
    g1 = 6.0
    ...
    [run]
    omega_points = 4001
    [output]
    directory = output

``#`` and ``;`` start comments at the start of a line or after whitespace.
Keys are checked against the models below, unknown keys are rejected, and
every error names the key and its line.
"""

import logging
import re
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from src.constants import FIGURE_PRESETS, MAX_LIOUVILLIAN_SIZE
from src.errors import ConfigError
from src.params import SystemParams

Finite = Annotated[float, Field(allow_inf_nan=False)]
Positive = Annotated[float, Field(gt=0.0, allow_inf_nan=False)]
FigureName = Literal["fig4", "fig5", "fig6", "fig7"]


class RunSettings(BaseModel):
    """Settings shared by the subcommands; each one reads the keys it needs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    omega_min: Finite = Field(-8.0, description="Lower end of the frequency grid.")
    omega_max: Finite = Field(8.0, description="Upper end of the frequency grid.")
    omega_points: Annotated[int, Field(ge=3)] = Field(
        4001, description="Number of frequency samples."
    )
    ep_min: Annotated[float, Field(ge=0.0, allow_inf_nan=False)] = Field(
        0.0, description="First drive amplitude of the Stark sweep."
    )
    ep_max: Annotated[float, Field(ge=0.0, allow_inf_nan=False)] = Field(
        0.5, description="Last drive amplitude of the Stark sweep."
    )
    ep_points: Annotated[int, Field(ge=1)] = Field(
        51, description="Number of drive amplitudes in the Stark sweep."
    )
    ep_values: tuple[Annotated[float, Field(ge=0.0, allow_inf_nan=False)], ...] = Field(
        (), description="Drive amplitudes of the spectrum runs; empty means system.ep."
    )
    n_max: Annotated[int, Field(ge=1)] = Field(
        3, description="Highest manifold reported by manifolds/couplings/validate."
    )
    keep_cross_damping: bool = Field(
        True, description="Keep the off-diagonal damping entries in the generator."
    )
    check_convergence: bool = Field(
        True, description="Repeat the Stark sweep at twice the truncation."
    )
    backend: Literal["resolvent", "eig"] = Field(
        "resolvent", description="Spectrum backend."
    )
    peak_prominence: Positive = Field(
        1e-6, description="Peak prominence threshold relative to the spectrum maximum."
    )
    line_floor: Annotated[float, Field(ge=0.0, le=1.0, allow_inf_nan=False)] = Field(
        1e-6,
        description="Smallest reported line height relative to the tallest (eig backend).",
    )
    assignment_window: Positive = Field(
        0.1, description="Largest distance between a peak and its catalog transition."
    )
    figure: FigureName | None = Field(None, description="Dataset built by `figures`.")
    dump_operators: bool = Field(
        False, description="Write H0, Hd and Heff matrix dumps from `manifolds`."
    )
    max_liouvillian_size: Annotated[int, Field(ge=1)] = Field(
        MAX_LIOUVILLIAN_SIZE, description="Cap on the Liouvillian side."
    )

    @field_validator("ep_values", mode="before")
    @classmethod
    def split_values(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(v for v in re.split(r"[,\s]+", value.strip()) if v)
        return value

    @model_validator(mode="after")
    def check_ranges(self) -> "RunSettings":
        if self.omega_max <= self.omega_min:
            raise ValueError("omega_max must be larger than omega_min")
        if self.ep_max < self.ep_min:
            raise ValueError("ep_max must not be smaller than ep_min")
        return self


class OutputSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: Path = Field(Path("output"), description="Where artifacts are written.")
    format: Literal["csv", "tsv"] = Field("csv", description="Table format.")

    @property
    def separator(self) -> str:
        return "," if self.format == "csv" else "\t"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    system: SystemParams
    run: RunSettings = RunSettings()
    output: OutputSettings = OutputSettings()


SECTIONS: dict[str, type[BaseModel]] = {
    "system": SystemParams,
    "run": RunSettings,
    "output": OutputSettings,
}

_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
# a comment marker starts a line or follows whitespace; "out#1" is a value
_COMMENT = re.compile(r"(?:^|\s)[#;].*$")


def _strip_comment(line: str) -> str:
    return _COMMENT.sub("", line).strip()


def _read_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        header = _HEADER.match(line)
        if header:
            current = header.group(1).lower()
            if current not in SECTIONS:
                raise ConfigError(f"unknown section [{current}]", line=lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", line=lineno)
            sections[current] = {}
            continue
        entry = _ENTRY.match(line)
        if not entry:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = entry.group(1), entry.group(2).strip()
        if current is None:
            raise ConfigError(f"key {key!r} outside of any section", key=key, line=lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {current}.{key}", key=key, line=lineno)
        if key not in SECTIONS[current].model_fields:
            raise ConfigError(f"unknown key {current}.{key}", key=key, line=lineno)
        if value == "":
            raise ConfigError(f"empty value for {current}.{key}", key=key, line=lineno)
        sections[current][key] = (value, lineno)
    return sections


def _build_section(name: str, entries: dict[str, tuple[str, int]]) -> BaseModel:
    model = SECTIONS[name]
    try:
        return model(**{key: value for key, (value, _) in entries.items()})
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        line = entries[key][1] if key in entries else None
        if error["type"] == "missing":
            raise ConfigError(f"missing required key {name}.{key}", key=key) from None
        where = f"{name}.{key}" if key else f"[{name}]"
        raise ConfigError(f"invalid {where}: {error['msg']}", key=key, line=line) from None


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate a configuration text.

    Raises:
        ConfigError: on syntax errors, unknown sections or keys, duplicates,
            missing required keys and values rejected by the models.
    """
    sections = _read_sections(text)
    built = {name: _build_section(name, sections.get(name, {})) for name in SECTIONS}
    return RunConfig(**built)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Text form of a config, every field written out; parses back to an equal config."""
    lines: list[str] = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for key in type(section).model_fields:
            value = getattr(section, key)
            if value is None or value == ():
                continue
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def load_config(path: Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    logging.debug("Loaded config from %s", path)
    return parse_config(text)


def preset_path(name: str, presets_dir: Path) -> Path:
    if name not in FIGURE_PRESETS:
        raise ConfigError(f"unknown figure {name!r}, expected one of {FIGURE_PRESETS}")
    return presets_dir / f"{name}.cfg"
