"""Experiment configuration files (TOML).

Flat keys describe the model and sweep; the policy roster is an array of
``[[policy]]`` tables::

    m_cells = 5
    family = "poisson"          # or "finite" with pmf_f / pmf_g lists
    lambda_f = 2.0
    lambda_g = 0.001
    s_ratio = 10.0
    theta_grid = [50, 100, 150, 200, 250, 300]
    trials_per_hypothesis = 1000
    master_seed = 42
    # priors = [0.2, 0.2, 0.2, 0.2, 0.2]   (default uniform)
    # max_steps_factor = 20                (default)

    [[policy]]
    kind = "dbs"
    [[policy]]
    kind = "sluggish"
    p = 0.1
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .harness import ExperimentConfig
from .observation import ObservationModel
from .policies import PolicyKind

_REQUIRED = ("m_cells", "family", "s_ratio", "theta_grid", "trials_per_hypothesis", "master_seed")
_OPTIONAL = ("lambda_f", "lambda_g", "pmf_f", "pmf_g", "priors", "max_steps_factor", "policy")
_POLICY_KEYS = ("kind", "p")


class ConfigError(ValueError):
    pass


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=", re.MULTILINE)
    m = pattern.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(path, text, key, message):
    line = _line_of(text, key) if key else None
    where = f"{path}:{line}" if line else str(path)
    raise ConfigError(f"{where}: key '{key}': {message}" if key else f"{where}: {message}")


def _number(path, text, data, key, kind=float):
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, text, key, f"expected a number, got {value!r}")
    if kind is int and not isinstance(value, int):
        _fail(path, text, key, f"expected an integer, got {value!r}")
    return kind(value)


def _num_list(path, text, data, key):
    value = data[key]
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
        _fail(path, text, key, f"expected a list of numbers, got {value!r}")
    return [float(v) for v in value]


def parse_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a configuration file.

    Raises :class:`ConfigError` naming the file, line and key at fault.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from exc
    return config_from_dict(data, path=path, text=text)


def config_from_dict(data: dict, *, path="<config>", text: str = "") -> ExperimentConfig:
    for key in data:
        if key not in _REQUIRED + _OPTIONAL:
            _fail(path, text, key, "unknown key")
    for key in _REQUIRED:
        if key not in data:
            _fail(path, text, None, f"missing required key '{key}'")

    m_cells = _number(path, text, data, "m_cells", int)
    if m_cells < 2:
        _fail(path, text, "m_cells", f"need at least 2 cells, got {m_cells}")

    family = data["family"]
    try:
        if family == "poisson":
            for key in ("lambda_f", "lambda_g"):
                if key not in data:
                    _fail(path, text, None, f"poisson family needs '{key}'")
            model = ObservationModel.poisson(
                _number(path, text, data, "lambda_f"), _number(path, text, data, "lambda_g")
            )
        elif family == "finite":
            for key in ("pmf_f", "pmf_g"):
                if key not in data:
                    _fail(path, text, None, f"finite family needs '{key}'")
            model = ObservationModel.finite(_num_list(path, text, data, "pmf_f"), _num_list(path, text, data, "pmf_g"))
        else:
            _fail(path, text, "family", f"expected 'poisson' or 'finite', got {family!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(path, text, "family", f"invalid model: {exc}")

    policies = []
    roster = data.get("policy", [{"kind": "dbs"}, {"kind": "chernoff"}, {"kind": "sluggish", "p": 0.1}, {"kind": "dgf"}])
    if not isinstance(roster, list) or not roster:
        _fail(path, text, "policy", "expected one or more [[policy]] tables")
    for entry in roster:
        if not isinstance(entry, dict):
            _fail(path, text, "policy", "expected one or more [[policy]] tables")
        for key in entry:
            if key not in _POLICY_KEYS:
                _fail(path, text, key, "unknown key in [[policy]] table")
        if "kind" not in entry:
            _fail(path, text, "policy", "[[policy]] table without 'kind'")
        try:
            policies.append(PolicyKind.parse(str(entry["kind"]), entry.get("p")))
        except ValueError as exc:
            _fail(path, text, "kind", str(exc))
    if len({p.label for p in policies}) != len(policies):
        _fail(path, text, "policy", "duplicate policy in roster")

    kwargs = dict(
        m_cells=m_cells,
        model=model,
        theta_grid=tuple(_num_list(path, text, data, "theta_grid")),
        s_ratio=_number(path, text, data, "s_ratio"),
        policies=tuple(policies),
        trials_per_hypothesis=_number(path, text, data, "trials_per_hypothesis", int),
        master_seed=_number(path, text, data, "master_seed", int),
    )
    if "priors" in data:
        kwargs["priors"] = tuple(_num_list(path, text, data, "priors"))
    if "max_steps_factor" in data:
        kwargs["max_steps_factor"] = _number(path, text, data, "max_steps_factor")
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in kwargs if msg.startswith(k)), None)
        _fail(path, text, key, msg)
