"""Experiment configuration: flat key-value text with sections."""

from __future__ import annotations

import ast
import configparser
import io
from dataclasses import dataclass, field

from .errors import ParseError
from .loadpath import LoadingPath

KINDS = ("generate", "train", "evaluate", "ablate", "fit-phenom", "fem")


@dataclass
class ExperimentConfig:
    """Parsed experiment description.

    ``raw`` keeps the literal section/key/value mapping for the manifest
    echo; typed accessors pull the values each experiment kind needs.
    """

    kind: str
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParseError(f"unknown experiment kind {self.kind!r}; "
                             f"expected one of {KINDS}")

    def section(self, name):
        return self.raw.get(name, {})

    def get(self, section, key, default=None):
        return self.section(section).get(key, default)

    def require(self, section, key):
        try:
            return self.raw[section][key]
        except KeyError as exc:
            raise ParseError(f"config needs [{section}] {key}") from exc

    def loading_path(self, section="path", key="segments"):
        segs = self.require(section, key)
        return LoadingPath(tuple(segs))


def _parse_value(text):
    """Literal-eval a value, falling back to the raw string."""
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text, kind=None):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}") from exc
    raw = {s: {k: _parse_value(v) for k, v in cp.items(s)}
           for s in cp.sections()}
    exp = raw.get("experiment", {})
    file_kind = exp.get("kind")
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ParseError(f"config kind {file_kind!r} does not match the "
                         f"requested command {kind!r}")
    kind = kind or file_kind
    if kind is None:
        raise ParseError("config needs [experiment] kind = <...>")
    return ExperimentConfig(kind=str(kind), seed=int(exp.get("seed", 0)),
                            raw=raw)


def load_config(path, kind=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), kind=kind)


def dump_config(cfg):
    """Round-trippable text of the raw mapping (manifest echo)."""
    out = io.StringIO()
    for section, items in cfg.raw.items():
        out.write(f"[{section}]\n")
        for k, v in items.items():
            out.write(f"{k} = {v!r}\n")
        out.write("\n")
    return out.getvalue()
