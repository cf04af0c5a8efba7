"""Run configuration: INI file + CLI overrides.

One flat key-value store with sections covers every command. Values live
as strings (exactly what the file holds) and are converted on access, so a
bad value is reported with its section and key. Unknown sections or keys in
a config file are rejected rather than ignored: a typo should fail loudly,
not silently fall back to a default.

Empty string means "unset" for optional keys. ``write`` emits the resolved
state; feeding that file back through ``--config`` reproduces the run.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import FormatError

DEFAULTS: dict[str, dict[str, str]] = {
    "data": {
        "window": "15",
        "val_samples": "14",
        "normalization": "per-district",
        "gap_policy": "interpolate",
        "stats_rows": "",
    },
    "model": {
        "kind": "lstm",
        "hidden": "64,64,64",
    },
    "train": {
        "matrix": "",
        "district": "",
        "learning_rate": "0.05",
        "total_steps": "2000",
        "batch_size": "32",
        "eval_every": "100",
        "seed": "0",
        "mode": "stateless",
        "clip": "",
        "shuffle_epochs": "false",
        "lanes": "5",
        "lane_steps": "27",
        "lane_train_steps": "25",
    },
    "baseline": {
        "matrix": "",
        "district": "",
        "p": "4",
        "d": "0",
        "q": "4",
        "constant": "true",
        "restarts": "0",
        "seed": "0",
        "horizon": "14",
        "return_kind": "simple",
    },
    "synth": {
        "districts": "4",
        "months": "154",
        "start": "2004-01",
        "base_price": "20000",
        "district_spread": "0.1",
        "trend": "60",
        "amplitude": "800",
        "period": "12",
        "phase_step": "0",
        "noise": "0",
        "txns_per_cell": "8",
        "missing_prob": "0",
        "seasonal_mode": "additive",
        "seed": "0",
    },
    "forecast": {
        "checkpoint": "",
        "matrix": "",
        "steps": "2",
    },
    "gradcheck": {
        "kind": "lstm",
        "hidden": "8",
        "input_dim": "3",
        "window": "15",
        "epsilon": "1e-5",
        "tolerance": "1e-4",
        "seed": "0",
    },
    "sweep": {
        "matrix": "",
        "units": "4,16,64,256",
        "workers": "1",
    },
    "ingest": {
        "input": "",
        "start": "",
        "end": "",
        "alt_date_format": "",
    },
    "output": {
        "root": "",
        "figures": "true",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class RunConfig:
    def __init__(self, values: dict[str, dict[str, str]]):
        self._values = values

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: dict(kv) for s, kv in DEFAULTS.items()})

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RunConfig":
        """Defaults overlaid with the file at ``path`` (when given)."""
        cfg = cls.defaults()
        if path is None:
            return cfg
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise FormatError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in DEFAULTS:
                raise FormatError(f"{path}: unknown config section [{section}]")
            for key, value in parser[section].items():
                if key not in DEFAULTS[section]:
                    raise FormatError(f"{path}: unknown key {key!r} in [{section}]")
                cfg._values[section][key] = value.strip()
        return cfg

    def override(self, section: str, key: str, value):
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise FormatError(f"unknown config key [{section}] {key!r}")
        if isinstance(value, bool):
            value = "true" if value else "false"
        self._values[section][key] = str(value)

    # -- typed access ------------------------------------------------------

    def get(self, section: str, key: str) -> str:
        return self._values[section][key]

    def _convert(self, section, key, conv, kind):
        raw = self.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise FormatError(
                f"config [{section}] {key} = {raw!r} is not {kind}") from None

    def get_int(self, section: str, key: str) -> int:
        return self._convert(section, key, int, "an integer")

    def get_float(self, section: str, key: str) -> float:
        return self._convert(section, key, float, "a number")

    def get_bool(self, section: str, key: str) -> bool:
        raw = self.get(section, key).lower()
        if raw in _TRUE:
            return True
        if raw in _FALSE:
            return False
        raise FormatError(f"config [{section}] {key} = {raw!r} is not a boolean")

    def get_opt_int(self, section: str, key: str) -> int | None:
        return None if self.get(section, key) == "" else self.get_int(section, key)

    def get_opt_float(self, section: str, key: str) -> float | None:
        return None if self.get(section, key) == "" else self.get_float(section, key)

    def get_opt_str(self, section: str, key: str) -> str | None:
        raw = self.get(section, key)
        return raw if raw else None

    def get_int_list(self, section: str, key: str) -> list[int]:
        raw = self.get(section, key)
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            raise FormatError(f"config [{section}] {key} is empty")
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise FormatError(
                f"config [{section}] {key} = {raw!r} is not a comma-separated "
                f"integer list") from None

    # -- persistence -------------------------------------------------------

    def write(self, path: str | Path):
        parser = configparser.ConfigParser(interpolation=None)
        for section in DEFAULTS:
            parser[section] = dict(self._values[section])
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)
