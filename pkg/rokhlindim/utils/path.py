import os
from pathlib import Path


def get_out_path(path: str | Path | None = None) -> Path:
    """
    If path not set, return the default path stored in the environment
    variable `ROKHLINDIM_OUT`. If unset, return `./rokhlindim-out`.
    """
    return Path(path or os.environ.get('ROKHLINDIM_OUT', 'rokhlindim-out'))

