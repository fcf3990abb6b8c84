"""Scenario configuration: schema, defaults, validation and hashing.

Configs are JSON documents::

    {
      "schema_version": 1,
      "scenario": "CvHeterodyneResend",
      "master_seed": 12345,
      "n_trials": 100000,
      "parameters": {"T": 0.1, "V": 25},
      "output": {"format": "json", "path": null}
    }

Missing parameters take the documented defaults; unknown keys are errors.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

SCHEMA_VERSION = 1
_U64 = 1 << 64


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class Scenario(enum.Enum):
    CV_PASSIVE = "CvPassive"
    CV_HETERODYNE_RESEND = "CvHeterodyneResend"
    CV_EXCESS_NOISE_TEST = "CvExcessNoiseTest"
    BB84_PRS = "Bb84Prs"
    DECOY_PNS = "DecoyPns"
    DECOY_CBS = "DecoyCbs"
    KEY_RATE_SWEEP = "KeyRateSweep"
    DELETION_OPTIMIZER = "DeletionOptimizer"


#: CLI subcommand -> scenarios it can run (first one is the default).
SUBCOMMANDS: dict[str, tuple[Scenario, ...]] = {
    "cv": (Scenario.CV_HETERODYNE_RESEND, Scenario.CV_PASSIVE, Scenario.CV_EXCESS_NOISE_TEST),
    "bb84": (Scenario.BB84_PRS,),
    "decoy": (Scenario.DECOY_PNS, Scenario.DECOY_CBS),
    "keyrate": (Scenario.KEY_RATE_SWEEP,),
    "optimize": (Scenario.DELETION_OPTIMIZER,),
}


@dataclass(frozen=True)
class Param:
    kind: type
    default: Any
    lo: Optional[float] = None
    hi: Optional[float] = None
    lo_open: bool = False
    hi_open: bool = False
    choices: Optional[tuple[str, ...]] = None
    nullable: bool = False
    doc: str = ""

    def range_text(self) -> str:
        if self.choices:
            return "{" + ", ".join(self.choices) + "}"
        if self.kind is bool:
            return "{true, false}"
        lo = "-inf" if self.lo is None else _fmt(self.lo)
        hi = "inf" if self.hi is None else _fmt(self.hi)
        left = "(" if self.lo_open or self.lo is None else "["
        right = ")" if self.hi_open or self.hi is None else "]"
        return f"{left}{lo},{hi}{right}"


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _unit(default, **kw) -> Param:
    return Param(float, default, 0.0, 1.0, **kw)


def _pos(default, **kw) -> Param:
    return Param(float, default, 0.0, None, lo_open=True, **kw)


def _nonneg(default, **kw) -> Param:
    return Param(float, default, 0.0, None, **kw)


_CV_COMMON = {
    "T": _unit(0.1, lo_open=True, doc="transmittance"),
    "V": _pos(25.0, doc="modulation variance (shot-noise units)"),
    "var_nA": _nonneg(None, nullable=True, doc="Adam's uncertainty variance; null = 0.01*V"),
    "var_nB": _nonneg(1.0, doc="Babe's homodyne noise variance"),
    "var_nE_passive": _nonneg(1.0, doc="Eve's homodyne noise variance (passive tap)"),
    "var_nE_het": _nonneg(2.0, doc="Eve's heterodyne noise variance"),
    "delta_T": _unit(0.0, hi_open=True, doc="absolute transmittance uncertainty"),
}

SCHEMAS: dict[Scenario, dict[str, Param]] = {
    Scenario.CV_PASSIVE: dict(_CV_COMMON),
    Scenario.CV_HETERODYNE_RESEND: dict(_CV_COMMON),
    Scenario.CV_EXCESS_NOISE_TEST: {
        **_CV_COMMON,
        "delta_T": _unit(0.02, hi_open=True, doc="absolute transmittance uncertainty"),
        "n_pulses": Param(int, 1000, 100, None, doc="pulses per variance estimate"),
        "alpha": _unit(0.05, lo_open=True, hi_open=True, doc="target false-alarm probability"),
        "statistic": Param(str, "variance", choices=("variance", "residual")),
    },
    Scenario.BB84_PRS: {
        "n_sent": Param(int, 400_000, 1, None, doc="qubits per session"),
        "eta": _unit(0.1, lo_open=True, doc="channel transmittance"),
        "attack_fraction": _unit(None, nullable=True, doc="null = qber_budget / 0.25"),
        "qber_budget": _unit(0.02, doc="QBER Eve allows herself"),
        "attack_basis_angle": Param(float, math.pi / 8, doc="Eve's basis angle (rad)"),
        "deletion_policy": Param(
            str, "delete_bit_one", choices=("none", "delete_bit_one", "delete_low_confidence")
        ),
        "deletion_threshold": _unit(0.9),
        "check_fraction": _unit(0.1),
        "qber_threshold": _unit(0.11),
        "intrinsic_error": _unit(0.0),
        "match_arrival_rate": Param(bool, False),
    },
    Scenario.DECOY_PNS: {
        "s_signal": _nonneg(0.5),
        "s_decoy": _nonneg(0.1),
        "p_signal": _unit(0.5, lo_open=True, hi_open=True),
        "eta": _unit(0.1, lo_open=True),
        "n_pulses": Param(int, 100_000, 1, None, doc="pulses per ensemble"),
        "tolerance_sigmas": _pos(3.0),
        "attack": Param(str, "naive_pns", choices=("none", "naive_pns")),
        "strength": _unit(1.0, doc="fraction of pulses routed through the attack"),
    },
    Scenario.DECOY_CBS: {
        "kappa": _unit(0.9),
        "s_a": _nonneg(1.0),
        "s_b": _nonneg(0.0),
        "prior_a": _unit(0.5, lo_open=True, hi_open=True),
    },
    Scenario.KEY_RATE_SWEEP: {
        "qber_lo": Param(float, 0.0, 0.0, 0.5),
        "qber_hi": Param(float, 0.25, 0.0, 0.5),
        "qber_step": Param(float, 0.01, 0.0, 0.5, lo_open=True),
        "n": _nonneg(10_000.0, doc="key length for leak_EC and the I_E profile"),
        "f_factor": _pos(1.2),
        "lam": _unit(0.01, lo_open=True, hi_open=True),
    },
    Scenario.DELETION_OPTIMIZER: {
        "ensemble": Param(str, "bb84", choices=("bb84", "single")),
        "deletion_budget": _unit(0.0, hi_open=True),
        "basis_grid": Param(int, 720, 1, None),
        "n_thresholds": Param(int, 100, 2, None),
    },
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    parameters: dict[str, Any]
    master_seed: int = 0
    n_trials: int = 1000
    output_format: str = "json"
    output_path: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    @property
    def resolved(self) -> dict[str, Any]:
        """Parameters with null defaults replaced by their derived values."""
        return resolve_parameters(self.scenario, self.parameters)

    def canonical(self) -> dict[str, Any]:
        """Semantically meaningful fields only (what the hash covers)."""
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario.value,
            "master_seed": self.master_seed,
            "n_trials": self.n_trials,
            "parameters": dict(sorted(self.resolved.items())),
        }

    def to_dict(self) -> dict[str, Any]:
        """Config echo; reloading it yields an identical config."""
        return {
            "schema_version": self.schema_version,
            "scenario": self.scenario.value,
            "master_seed": self.master_seed,
            "n_trials": self.n_trials,
            "parameters": dict(sorted(self.parameters.items())),
            "output": {"format": self.output_format, "path": self.output_path},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_parameters(self, **overrides) -> "ScenarioConfig":
        raw = self.to_dict()
        raw["parameters"] = {**self.parameters, **overrides}
        return config_from_dict(raw)


def _coerce(key: str, value: Any, param: Param) -> Any:
    if value is None:
        if param.nullable:
            return None
        raise ConfigError(f"parameter {key!r} may not be null; allowed range {param.range_text()}")
    if param.kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"parameter {key!r} must be a boolean, got {value!r}")
        return value
    if param.kind is str:
        if not isinstance(value, str) or (param.choices and value not in param.choices):
            raise ConfigError(f"parameter {key!r}={value!r} not in {param.range_text()}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"parameter {key!r} must be numeric, got {value!r}")
    if param.kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"parameter {key!r} must be an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"parameter {key!r} must be finite, got {value!r}")
    lo_bad = param.lo is not None and (value <= param.lo if param.lo_open else value < param.lo)
    hi_bad = param.hi is not None and (value >= param.hi if param.hi_open else value > param.hi)
    if lo_bad or hi_bad:
        raise ConfigError(f"parameter {key!r}={value!r} outside allowed range {param.range_text()}")
    return value


def validate_parameters(scenario: Scenario, params: dict[str, Any]) -> dict[str, Any]:
    schema = SCHEMAS[scenario]
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ConfigError(
            f"unknown parameter(s) {unknown} for scenario {scenario.value}; "
            f"allowed: {sorted(schema)}"
        )
    out = {k: _coerce(k, params.get(k, param.default), param) for k, param in schema.items()}
    _cross_check(scenario, resolve_parameters(scenario, out))
    return out


def resolve_parameters(scenario: Scenario, params: dict[str, Any]) -> dict[str, Any]:
    p = dict(params)
    if "var_nA" in p and p["var_nA"] is None:
        p["var_nA"] = 0.01 * p["V"]
    if scenario is Scenario.BB84_PRS and p["attack_fraction"] is None:
        from ..bb84 import BREIDBART_ERROR, max_attack_fraction

        p["attack_fraction"] = max_attack_fraction(p["qber_budget"], BREIDBART_ERROR)
    return p


def _cross_check(scenario: Scenario, p: dict[str, Any]) -> None:
    if "delta_T" in p:
        if p["T"] - p["delta_T"] <= 0:
            raise ConfigError(f"parameter 'delta_T'={p['delta_T']!r} must satisfy T - delta_T > 0")
        if scenario is Scenario.CV_EXCESS_NOISE_TEST and p["T"] + p["delta_T"] > 1:
            raise ConfigError(f"parameter 'delta_T'={p['delta_T']!r} must satisfy T + delta_T <= 1")
    if scenario is Scenario.DECOY_PNS and p["s_signal"] == p["s_decoy"]:
        raise ConfigError("parameters 's_signal' and 's_decoy' must differ")
    if scenario is Scenario.DECOY_CBS and p["s_a"] == p["s_b"]:
        raise ConfigError("parameters 's_a' and 's_b' must differ")
    if scenario is Scenario.KEY_RATE_SWEEP and p["qber_hi"] < p["qber_lo"]:
        raise ConfigError("parameter 'qber_hi' must be >= 'qber_lo'")


_TOP_KEYS = {"schema_version", "scenario", "master_seed", "n_trials", "parameters", "output"}


def config_from_dict(raw: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {unknown}; allowed: {sorted(_TOP_KEYS)}")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"key 'schema_version'={version!r} unsupported; expected {SCHEMA_VERSION}")
    if "scenario" not in raw:
        raise ConfigError(
            "missing key 'scenario'; allowed: " + ", ".join(s.value for s in Scenario)
        )
    try:
        scenario = Scenario(raw["scenario"])
    except ValueError:
        raise ConfigError(
            f"key 'scenario'={raw['scenario']!r} not in {{{', '.join(s.value for s in Scenario)}}}"
        ) from None
    seed = raw.get("master_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < _U64:
        raise ConfigError(f"key 'master_seed'={seed!r} outside allowed range [0,2**64)")
    n_trials = raw.get("n_trials", 1000)
    if isinstance(n_trials, bool) or not isinstance(n_trials, int) or n_trials < 0:
        raise ConfigError(f"key 'n_trials'={n_trials!r} outside allowed range [0,inf)")
    params = raw.get("parameters", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("key 'parameters' must be an object")
    output = raw.get("output", {}) or {}
    fmt = output.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"key 'output.format'={fmt!r} not in {{json, csv}}")
    extra = sorted(set(output) - {"format", "path"})
    if extra:
        raise ConfigError(f"unknown output key(s) {extra}; allowed: ['format', 'path']")
    return ScenarioConfig(
        scenario=scenario,
        parameters=validate_parameters(scenario, dict(params)),
        master_seed=seed,
        n_trials=n_trials,
        output_format=fmt,
        output_path=output.get("path"),
    )


def load_config(source: str | Path) -> ScenarioConfig:
    """Load a config from a file path or from inline JSON text."""
    if isinstance(source, Path) or not str(source).lstrip().startswith("{"):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from exc
    else:
        text = str(source)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def default_config(scenario: Scenario | str, **top) -> ScenarioConfig:
    raw = {"scenario": Scenario(scenario).value, **top}
    return config_from_dict(raw)
