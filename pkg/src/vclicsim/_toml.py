import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_toml(path) -> dict:
    with Path(path).open("rb") as fh:
        return tomllib.load(fh)


def loads_toml(text: str) -> dict:
    return tomllib.loads(text)
