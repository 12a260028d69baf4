"""On-disk experiment configs (TOML) and run reports (JSON).

A config looks like::

    schema_version = 1

    [squeezer_a]            # one of: r | squeezed_db [+ antisqueezed_db] | OPO keys
    squeezed_db = -7.0

    [squeezer_b]
    parametric_gain = 9.0
    efficiency = 0.89
    jitter_rms = 1.0        # degrees
    sideband_freq = 1.25    # MHz
    cavity_bandwidth = 10.0 # MHz, half width

    [teleporter]
    gain_x = 1.0
    gain_p = 1.0
    input_alpha = [0.0, 0.0]  # real, imaginary
    quantize_gain = false

    [efficiencies]          # path_a, path_b, alice_homodyne_x, alice_homodyne_p, victor_homodyne
    [jitter]                # squeezer_a, squeezer_b, epr_bs, alice_bs, victor_lo (degrees)

    [engine]
    kind = "monte_carlo"    # or "heisenberg"
    shots = 100000
    seed = 0
    workers = 1

    [sweep]                 # gains = [...]  or  start/stop/step
    [sequence]              # n_max
    [output]                # report, table: output paths

Unknown keys and out-of-range values are rejected with the line they sit on.
Variances are linear in shot-noise units throughout; the ``*_db`` keys are
converted on load.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, CvteleError, InvalidParameter
from .opo import OpoParams, SqueezeLevels
from .teleporter import ENGINES, Efficiencies, Jitter, TeleporterConfig, TeleportReport

SCHEMA_VERSION = 1
BUNDLED = ("paper_fig3", "paper_fig4", "paper_classical", "paper_opo_budget")

_TOP_KEYS = {"schema_version", "squeezer_a", "squeezer_b", "teleporter", "efficiencies",
             "jitter", "engine", "sweep", "sequence", "output"}
_OPO_KEYS = {f.name for f in fields(OpoParams)}
_SECTION_KEYS = {
    "teleporter": {"gain_x", "gain_p", "input_alpha", "quantize_gain"},
    "efficiencies": {f.name for f in fields(Efficiencies)},
    "jitter": {f.name for f in fields(Jitter)},
    "engine": {"kind", "shots", "seed", "workers"},
    "sweep": {"gains", "start", "stop", "step"},
    "sequence": {"n_max"},
    "output": {"report", "table"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    teleporter: TeleporterConfig
    gains: tuple[float, ...] | None = None
    n_max: int | None = None
    outputs: dict[str, str] = field(default_factory=dict)


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    """Best-effort line number of ``key`` in ``[section]`` (or of the header)."""
    current = None
    header = re.compile(r"^\s*\[([^\]]+)\]")
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return lineno
    return None


def _number(value: Any, where: str, line: int | None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}", line)
    return float(value)


def _integer(value: Any, where: str, line: int | None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}", line)
    return value


def _squeezer(table: dict, name: str, text: str):
    keys = set(table)
    line = _line_of(text, name)
    simple = {"r", "squeezed_db", "antisqueezed_db"}
    unknown = keys - simple - _OPO_KEYS
    if unknown:
        k = sorted(unknown)[0]
        raise ConfigError(f"unknown key {name}.{k}", _line_of(text, name, k))
    vals = {k: _number(v, f"{name}.{k}", _line_of(text, name, k)) for k, v in table.items()}
    if keys & _OPO_KEYS:
        if keys & simple:
            raise ConfigError(f"{name}: mix of OPO keys and r/squeezed_db", line)
        if "parametric_gain" not in keys:
            raise ConfigError(f"{name}: OPO squeezer needs parametric_gain", line)
        return OpoParams(**vals)
    if keys == {"r"}:
        return vals["r"]
    if keys == {"squeezed_db"}:
        return -vals["squeezed_db"] * math.log(10.0) / 20.0
    if keys == {"squeezed_db", "antisqueezed_db"}:
        return SqueezeLevels(10 ** (vals["squeezed_db"] / 10), 10 ** (vals["antisqueezed_db"] / 10))
    raise ConfigError(f"{name}: give exactly one of r, squeezed_db[, antisqueezed_db] or OPO keys", line)


def _gains(table: dict, text: str) -> tuple[float, ...]:
    line = _line_of(text, "sweep")
    if "gains" in table:
        if set(table) != {"gains"}:
            raise ConfigError("sweep: use either gains or start/stop/step", line)
        gains = table["gains"]
        if not isinstance(gains, list):
            raise ConfigError("sweep.gains must be a list", _line_of(text, "sweep", "gains"))
        return tuple(_number(g, "sweep.gains", _line_of(text, "sweep", "gains")) for g in gains)
    if set(table) != {"start", "stop", "step"}:
        raise ConfigError("sweep needs gains or start, stop and step", line)
    return gain_range(*(_number(table[k], f"sweep.{k}", _line_of(text, "sweep", k))
                        for k in ("start", "stop", "step")))


def gain_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    """Inclusive, evenly spaced gains rounded to 12 digits."""
    if step <= 0 or stop < start:
        raise ConfigError(f"bad gain range {start}:{stop}:{step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + k * step, 12) for k in range(count))


def _anchor(text: str, message: str) -> str:
    """Prefix ``message`` with the line of the first config key it mentions."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*([A-Za-z_]+)\s*=", line)
        if m and re.search(rf"\b{m.group(1)}\b", message):
            return f"line {lineno}: {message}"
    return message


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None) from None

    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key}", _line_of(text, None, key) or _line_of(text, key))
    if "schema_version" not in data:
        raise ConfigError("missing schema_version", 1)
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data['schema_version']!r}, expected {SCHEMA_VERSION}",
                          _line_of(text, None, "schema_version"))
    for section, allowed in _SECTION_KEYS.items():
        table = data.get(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"{section} must be a table", _line_of(text, None, section))
        for key in table:
            if key not in allowed:
                raise ConfigError(f"unknown key {section}.{key}", _line_of(text, section, key))

    def num(section: str, key: str) -> float:
        return _number(data[section][key], f"{section}.{key}", _line_of(text, section, key))

    try:
        kwargs: dict[str, Any] = {}
        for name in ("squeezer_a", "squeezer_b"):
            if name in data:
                kwargs[name] = _squeezer(data[name], name, text)
        tel = data.get("teleporter", {})
        for key in ("gain_x", "gain_p"):
            if key in tel:
                kwargs[key] = num("teleporter", key)
        if "input_alpha" in tel:
            alpha = tel["input_alpha"]
            line = _line_of(text, "teleporter", "input_alpha")
            if not (isinstance(alpha, list) and len(alpha) == 2):
                raise ConfigError("teleporter.input_alpha must be [real, imag]", line)
            kwargs["input_alpha"] = complex(_number(alpha[0], "input_alpha", line),
                                            _number(alpha[1], "input_alpha", line))
        if "quantize_gain" in tel:
            if not isinstance(tel["quantize_gain"], bool):
                raise ConfigError("teleporter.quantize_gain must be true or false",
                                  _line_of(text, "teleporter", "quantize_gain"))
            kwargs["quantize_gain"] = tel["quantize_gain"]
        if "efficiencies" in data:
            kwargs["efficiencies"] = Efficiencies(**{k: num("efficiencies", k) for k in data["efficiencies"]})
        if "jitter" in data:
            kwargs["jitter"] = Jitter(**{k: num("jitter", k) for k in data["jitter"]})
        eng = data.get("engine", {})
        if "kind" in eng:
            if eng["kind"] not in ENGINES:
                raise ConfigError(f"engine.kind must be one of {ENGINES}", _line_of(text, "engine", "kind"))
            kwargs["engine"] = eng["kind"]
        for key in ("shots", "seed", "workers"):
            if key in eng:
                kwargs[key] = _integer(eng[key], f"engine.{key}", _line_of(text, "engine", key))
        teleporter = TeleporterConfig(**kwargs)

        gains = _gains(data["sweep"], text) if "sweep" in data else None
        n_max = None
        if "n_max" in data.get("sequence", {}):
            n_max = _integer(data["sequence"]["n_max"], "sequence.n_max", _line_of(text, "sequence", "n_max"))
        outputs = {k: str(v) for k, v in data.get("output", {}).items()}
    except ConfigError:
        raise
    except CvteleError as exc:
        # physically invalid values keep their own error type (exit code 3)
        raise InvalidParameter(_anchor(text, str(exc))) from None
    return ExperimentConfig(teleporter, gains, n_max, outputs)


def load_config(path_or_name: str | Path) -> ExperimentConfig:
    """Load a config file, or a bundled config by name (e.g. ``paper_fig3``)."""
    name = str(path_or_name)
    if name in BUNDLED:
        text = resources.files("cvtele.configs").joinpath(f"{name}.toml").read_text()
    else:
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {name}: {exc.strerror}") from None
    return parse_config(text)


def _squeezer_dict(spec) -> dict:
    if isinstance(spec, OpoParams):
        return {f.name: getattr(spec, f.name) for f in fields(spec)}
    if isinstance(spec, SqueezeLevels):
        return {"squeezed_db": 10 * math.log10(spec.squeezed),
                "antisqueezed_db": 10 * math.log10(spec.antisqueezed)}
    return {"r": float(spec)}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-data echo of a config, in the same layout as the TOML file."""
    t = cfg.teleporter
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "squeezer_a": _squeezer_dict(t.squeezer_a),
        "squeezer_b": _squeezer_dict(t.squeezer_b),
        "teleporter": {
            "gain_x": t.gain_x,
            "gain_p": t.gain_p,
            "input_alpha": [complex(t.input_alpha).real, complex(t.input_alpha).imag],
            "quantize_gain": t.quantize_gain,
        },
        "efficiencies": {f.name: getattr(t.efficiencies, f.name) for f in fields(Efficiencies)},
        "jitter": {f.name: getattr(t.jitter, f.name) for f in fields(Jitter)},
        "engine": {"kind": t.engine, "shots": t.shots, "seed": t.seed, "workers": t.workers},
    }
    if cfg.gains is not None:
        out["sweep"] = {"gains": list(cfg.gains)}
    if cfg.n_max is not None:
        out["sequence"] = {"n_max": cfg.n_max}
    if cfg.outputs:
        out["output"] = dict(cfg.outputs)
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    return parse_config(dumps_toml(data))


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dumps_toml(data: dict) -> str:
    """Minimal TOML writer for the flat two-level config layout."""
    lines = []
    for k, v in data.items():
        if not isinstance(v, dict):
            lines.append(f"{k} = {_toml_value(v)}")
    for k, v in data.items():
        if isinstance(v, dict):
            lines.append(f"\n[{k}]")
            lines.extend(f"{kk} = {_toml_value(vv)}" for kk, vv in v.items())
    return "\n".join(lines) + "\n"


def _payload_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def emit_report(report: TeleportReport, cfg: ExperimentConfig, command: str, metadata: dict | None = None) -> str:
    """Serialize a run as one JSON document.

    Everything except the ``metadata`` block is covered by ``payload_sha256``,
    so identical runs produce identical hashes regardless of timestamps.
    """
    from . import __version__

    payload = {
        "command": command,
        "tool_version": __version__,
        "seed": cfg.teleporter.seed,
        "config": config_to_dict(cfg),
        "report": report.to_dict(),
    }
    doc = dict(payload)
    doc["payload_sha256"] = _payload_hash(payload)
    doc["metadata"] = metadata or {}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_report(text: str) -> tuple[TeleportReport, ExperimentConfig, dict]:
    doc = json.loads(text)
    payload = {k: doc[k] for k in ("command", "tool_version", "seed", "config", "report")}
    if _payload_hash(payload) != doc.get("payload_sha256"):
        raise ConfigError("report payload does not match its hash")
    return TeleportReport.from_dict(doc["report"]), config_from_dict(doc["config"]), doc


def format_table(header: list[str], rows: list[list[float]]) -> str:
    """Comma-separated table with a header row; floats printed with repr."""
    def cell(v) -> str:
        if isinstance(v, str) or (isinstance(v, int) and not isinstance(v, bool)):
            return str(v)
        return repr(float(v))

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Replace teleporter fields for CLI flags that were actually given."""
    given = {k: v for k, v in overrides.items() if v is not None}
    if not given:
        return cfg
    try:
        return replace(cfg, teleporter=replace(cfg.teleporter, **given))
    except CvteleError as exc:
        raise ConfigError(str(exc)) from None

