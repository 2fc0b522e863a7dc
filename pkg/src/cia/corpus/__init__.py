"""Bundled version pairs (``name.v1.ir`` / ``name.v2.ir``)."""
from __future__ import annotations

from importlib import resources

from ..ir.parser import parse_program


def names() -> list[str]:
    files = resources.files(__name__).iterdir()
    return sorted({f.name[: -len(".v1.ir")] for f in files if f.name.endswith(".v1.ir")})


def path(name: str, version: int):
    return resources.files(__name__) / f"{name}.v{version}.ir"


def source(name: str, version: int) -> str:
    return path(name, version).read_text()


def load(name: str):
    """Parsed (v1, v2) programs of a bundled pair."""
    return parse_program(source(name, 1)), parse_program(source(name, 2))
