# Derived from `dandi.support.pyout`
# https://github.com/dandi/dandi-cli/blob/master/dandi/support/pyout.py
# Apache License Version 2.0
import datetime
import logging
from collections import Counter
from contextlib import contextmanager
from typing import Any

import humanize
import pyout

lg = logging.getLogger(__name__)


Status = dict[str, Any]

RUNNING = "○"
DONE = "done"
FAILED = "failed"
ERROR = "error"
SKIP = "skipped"


def counts(values):
    return [f"{v:d} {k}" for k, v in Counter(values).items()]


def elapsed(v):
    """Format a duration in seconds like a human"""
    if v in ["", None]:
        return ""
    return humanize.precisedelta(
        datetime.timedelta(seconds=v), minimum_unit="milliseconds",
        format="%0.0f",
    )


def get_style_stages(hide_if_missing=True) -> dict:
    style = {
        "summary_": {"bold": True},
        "header_": {"bold": True},
        "default_": {"missing": ""},
        "stage": {
            "bold": True,
            "align": "left",
            "width": {"truncate": "right", "min": 12},
            "aggregate": lambda _: "Summary:",
        },
        "status": {
            "color": {"lookup": {
                SKIP: "blue",
                RUNNING: "yellow",
                DONE: "green",
                FAILED: "red",
                ERROR: "red",
            }},
            "aggregate": counts,
        },
        "message": {
            "color": {
                "re_lookup": [
                    ["^exists", "yellow"],
                    ["^(failed|error|ERROR)", "red"],
                ]
            },
        },
        "elapsed": {
            "transform": elapsed,
            "align": "right",
        },
    }
    if hide_if_missing:
        if "hide" in pyout.elements.schema["definitions"]:
            lg.debug("pyout with 'hide' support detected")
            style["default_"]["hide"] = "if_missing"
            # to avoid https://github.com/pyout/pyout/pull/102
            for f in style:
                if not f.endswith("_"):
                    style[f]["hide"] = "if_missing"
            style["stage"]["hide"] = False
        else:
            lg.warning(
                "pyout without 'hide' support. Expect too many columns"
            )
    return style


class LogSafeTabular(pyout.Tabular):
    """A pyout table that mutes stream logging while it is displayed"""

    @staticmethod
    def exclude_all(r):
        return False

    def __enter__(self):
        super().__enter__()
        root = logging.getLogger()
        if root.handlers:
            for h in root.handlers:
                # Use `type()` instead of `isinstance()` because FileHandler is
                # a subclass of StreamHandler, and we don't want to disable it:
                if type(h) is logging.StreamHandler:
                    h.addFilter(self.exclude_all)
            self.__added_handler = None
        else:
            self.__added_handler = logging.NullHandler()
            root.addHandler(self.__added_handler)
        return self

    def __exit__(self, exc_type, exc_value, tb):
        try:
            super().__exit__(exc_type, exc_value, tb)
        finally:
            root = logging.getLogger()
            for h in root.handlers:
                if type(h) is logging.StreamHandler:
                    h.removeFilter(self.exclude_all)
            if self.__added_handler is not None:
                root.removeHandler(self.__added_handler)
                self.__added_handler = None


@contextmanager
def stage_tab(hide_if_missing=True):
    """Live table with one row per pipeline stage"""
    columns = ["stage", "status", "message", "elapsed"]
    with LogSafeTabular(
        columns, style=get_style_stages(hide_if_missing)
    ) as tab:
        yield tab


class PlainTab:
    """
    Fallback printer with the same call interface as a pyout table:
    each update is logged instead of drawn
    """

    def __init__(self):
        self.rows: dict[str, Status] = {}

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, tb):
        return False

    def __call__(self, status: Status) -> None:
        row = self.rows.setdefault(status.get('stage', ''), {})
        row.update(status)
        if status.get('status') in (DONE, FAILED, ERROR, SKIP):
            lg.info(
                f"{row.get('stage', '')}: {row['status']} "
                f"{row.get('message', '')}".rstrip()
            )
