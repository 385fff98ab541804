"""Flat dotted-key experiment configs.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines
ignored.  Values are plain scalars; a comma-separated list turns the key
into a sweep axis.  Keys sharing the prefix before the first dot form one
axis group: multi-valued keys inside a group zip together (and must agree
on length), distinct groups take the cross product.  That makes
"teacher.order = 0,1,2,2" + "teacher.contexts = 1,12,96,144" four teachers,
crossed with "objective = TAID,KL,RKL" into twelve runs.

The raw text is preserved for hashing: a manifest stores the config copy
and the sha256 of exactly that copy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["ExperimentConfig", "parse_config", "load_config", "config_hash"]

KINDS = ("distill", "sweep", "theory", "theory_trials")


@dataclass
class ExperimentConfig:
    text: str
    values: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.values.get("kind", "")

    def get(self, key, default=None):
        return self.values.get(key, default)

    # -- typed accessors -----------------------------------------------------

    def _one(self, key, default, required):
        raw = self.values.get(key)
        if raw is None:
            if required and default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        if isinstance(raw, list):
            raise ConfigError(f"key {key!r} must be single-valued here")
        return raw

    def get_int(self, key, default=None, required=False) -> int:
        raw = self._one(key, default, required)
        if raw is default:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {raw!r} is not an integer") from exc

    def get_float(self, key, default=None, required=False) -> float:
        raw = self._one(key, default, required)
        if raw is default:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {raw!r} is not a number") from exc

    def get_bool(self, key, default=None, required=False) -> bool:
        raw = self._one(key, default, required)
        if raw is default:
            return default
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"key {key!r}: {raw!r} is not a boolean")

    def get_str(self, key, default=None, required=False) -> str:
        return self._one(key, default, required)

    # -- sweep expansion -----------------------------------------------------

    def axes(self) -> dict:
        """Group name -> list of {key: value} assignments (zipped per group)."""
        groups: dict[str, dict] = {}
        for key, raw in self.values.items():
            if not isinstance(raw, list):
                continue
            group = key.split(".", 1)[0]
            groups.setdefault(group, {})[key] = raw
        axes = {}
        for group, keyed in sorted(groups.items()):
            lengths = {len(v) for v in keyed.values()}
            if len(lengths) != 1:
                raise ConfigError(
                    f"axis group {group!r} has unequal list lengths {sorted(lengths)}"
                )
            (n,) = lengths
            axes[group] = [
                {k: keyed[k][i] for k in sorted(keyed)} for i in range(n)
            ]
        return axes

    def expand_runs(self) -> list[dict]:
        """Cross product of axis groups; each run is a flat key->scalar dict."""
        base = {k: v for k, v in self.values.items() if not isinstance(v, list)}
        runs = [dict(base)]
        for _, assignments in sorted(self.axes().items()):
            runs = [
                {**run, **assign} for run in runs for assign in assignments
            ]
        return runs


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if "," in value:
            values[key] = [v.strip() for v in value.split(",")]
        else:
            values[key] = value
    cfg = ExperimentConfig(text=text, values=values)
    if cfg.kind not in KINDS:
        raise ConfigError(
            f"key 'kind': expected one of {KINDS}, got {cfg.kind!r}"
        )
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
