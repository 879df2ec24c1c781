"""Experiment configuration: sectioned key-value files with typed values.

Values are Python literals (numbers, strings, lists, tuples, booleans);
anything that is not a literal is kept as a bare string, which is how
family expressions such as ``power(2)`` are written.  Every diagnostic
carries the file name and line number of the offending entry.

Example::

    [experiment]
    task = transport
    seed = 0

    [density]
    axes = ["power(2)"]
    form = defphi
"""
from __future__ import annotations

import ast
import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError

TASKS = ("transport", "isoperimetry", "stability", "rearrange", "pde")
AXIS_FAMILIES = ("gaussian", "power", "quadratic_shift", "softplus_mixture", "custom_table")

_KEY_LINE = re.compile(r"^\s*([^=:\s\[#;][^=:]*?)\s*[=:]")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")


@dataclass(frozen=True)
class Entry:
    value: Any
    line: int


@dataclass
class ExperimentConfig:
    """Parsed configuration; ``sections`` maps section -> key -> Entry."""

    path: str
    sections: dict
    task: str = ""
    seed: int = 0

    def has(self, section, key):
        return key in self.sections.get(section, {})

    def get(self, section, key, default=None, kind=None, required=False):
        sec = self.sections.get(section, {})
        if key not in sec:
            if required:
                raise ConfigError(f"missing key {key!r} in section [{section}]", path=self.path)
            return default
        e = sec[key]
        if kind is not None and not _is_kind(e.value, kind):
            raise ConfigError(f"{section}.{key} must be {_kind_name(kind)}, got {e.value!r}",
                              line=e.line, path=self.path)
        return e.value

    def line_of(self, section, key):
        e = self.sections.get(section, {}).get(key)
        return None if e is None else e.line

    def error(self, section, key, message):
        return ConfigError(message, line=self.line_of(section, key), path=self.path)


def _is_kind(value, kind):
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind is list:
        return isinstance(value, (list, tuple))
    return isinstance(value, kind)


def _kind_name(kind):
    return {float: "a number", int: "an integer", list: "a list", str: "a string", bool: "a boolean"}.get(
        kind, kind.__name__)


def parse_value(text: str):
    text = text.strip()
    if text in ("true", "True", "yes", "on"):
        return True
    if text in ("false", "False", "no", "off"):
        return False
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _line_index(lines):
    """(section, key) -> 1-based line number."""
    out, section = {}, None
    for i, raw in enumerate(lines, start=1):
        m = _SECTION_LINE.match(raw)
        if m:
            section = m.group(1).strip()
            continue
        if raw[:1] in (" ", "\t") or raw.lstrip().startswith(("#", ";")):
            continue
        m = _KEY_LINE.match(raw)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = i
    return out


def loads(text: str, path: str = "<string>") -> ExperimentConfig:
    """Parse configuration text.

    Raises
    ------
    ConfigError
        On syntax errors, duplicate keys, unknown tasks or bad seeds.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None,
                                   strict=True)
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry before the first [section] header", line=exc.lineno, path=path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"duplicate entry: {exc.message.splitlines()[0]}", line=exc.lineno,
                          path=path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected key = value)", line=line, path=path) from None
    lines = _line_index(text.splitlines())
    sections = {}
    for name in cp.sections():
        sec = {}
        for key, raw in cp.items(name):
            line = lines.get((name, key))
            if raw is None or raw.strip() == "":
                raise ConfigError(f"empty value for {name}.{key}", line=line, path=path)
            sec[key] = Entry(parse_value(raw), line)
        sections[name] = sec
    cfg = ExperimentConfig(path, sections)
    task = cfg.get("experiment", "task", required=True)
    if task not in TASKS:
        raise cfg.error("experiment", "task", f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    cfg.task = task
    seed = cfg.get("experiment", "seed", 0, kind=int)
    if seed < 0:
        raise cfg.error("experiment", "seed", "seed must be non-negative")
    cfg.seed = seed
    return cfg


def load(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(p)) from None
    return loads(text, str(p))


# -- call expressions -------------------------------------------------------------------

@dataclass(frozen=True)
class Call:
    """A parsed ``name(arg, key=value)`` expression with literal arguments."""

    name: str
    args: tuple = ()
    kwargs: dict = field(default_factory=dict)


def parse_call(text, cfg: Optional[ExperimentConfig] = None, section=None, key=None) -> Call:
    def fail(msg):
        if cfg is not None:
            raise cfg.error(section, key, msg)
        raise ConfigError(msg)

    if not isinstance(text, str):
        fail(f"expected an expression like name(args), got {text!r}")
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError:
        fail(f"cannot parse expression {text!r}")
    if isinstance(node, ast.Name):
        return Call(node.id)
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)):
        fail(f"expected name(args), got {text!r}")
    try:
        args = tuple(ast.literal_eval(a) for a in node.args)
        kwargs = {k.arg: ast.literal_eval(k.value) for k in node.keywords}
    except ValueError:
        fail(f"arguments of {text!r} must be literals")
    return Call(node.func.id, args, kwargs)


__all__ = ["AXIS_FAMILIES", "Call", "ExperimentConfig", "TASKS", "load", "loads", "parse_call", "parse_value"]
