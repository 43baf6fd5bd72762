"""Versioned prompt templates (`<name>.<version>.txt`, `string.Template`
syntax). Rendered prompts carry their template id `<name>@<version>`."""

from functools import cache
from pathlib import Path
from string import Template
from typing import Iterable

from foresight.exceptions import PreconditionError

PROMPTS_PATH = Path(__file__).parent
EMPTY = "(none)"


@cache
def load_template(name: str, version: str) -> Template:
    path = PROMPTS_PATH / f"{name}.{version}.txt"
    if not path.exists():
        raise PreconditionError(f"Unknown prompt template: `{name}@{version}`")
    return Template(path.read_text(encoding="utf-8"))


def template_id(name: str, version: str) -> str:
    return f"{name}@{version}"


def render(name: str, version: str, **values: object) -> str:
    try:
        return load_template(name, version).substitute(**values)
    except KeyError as e:
        raise PreconditionError(f"Missing prompt value {e} for `{name}`") from e


def bullets(items: Iterable[str]) -> str:
    lines = [f"- {item}" for item in items]
    return "\n".join(lines) or EMPTY


def numbered(items: Iterable[str]) -> str:
    lines = [f"[{ix}] {item}" for ix, item in enumerate(items, 1)]
    return "\n".join(lines) or EMPTY
