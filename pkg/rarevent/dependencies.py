# `tomllib` entered the standard library in Python 3.11; older interpreters
# get the API-compatible `tomli` backport declared in pyproject.toml.

import sys
from typing import Any


def get_toml_loader() -> Any:
    """Return a module exposing `load` / `loads` for TOML documents."""
    if sys.version_info >= (3, 11):
        import tomllib

        return tomllib
    import tomli  # pragma: no cover

    return tomli  # pragma: no cover


def get_pandas() -> Any:
    """Import pandas, which is only needed for tabular traces and reports."""
    import pandas as pd

    return pd
