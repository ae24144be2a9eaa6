import csv
import io
import json
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np

lg = logging.getLogger(__name__)


def jsonable(obj):
    """
    Convert a nested structure into plain JSON types.

    Fractions become "p/q" strings, numpy scalars and arrays become
    Python numbers and lists, tuples become lists.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def dumps_json(src, **kwargs) -> str:
    """Serialize with our formatting convention (`indent=2`, final newline)"""
    kwargs.setdefault('indent', 2)
    return json.dumps(jsonable(src), **kwargs) + '\n'


def read_json(src, **kwargs):
    """
    Read a JSON file

    Parameters
    ----------
    src : str or Path or file-like
        Input path

    Returns
    -------
    obj : dict
        Nested structure
    """
    if isinstance(src, (str, Path)):
        with open(src, 'rt') as fsrc:
            return read_json(fsrc, **kwargs)
    return json.load(src, **kwargs)


def dumps_csv(rows, header=None, **kwargs) -> str:
    """Serialize a table of rows (lists or dicts) to CSV text"""
    rows = list(rows)
    buffer = io.StringIO(newline='')
    if rows and isinstance(rows[0], dict):
        header = header or list(rows[0].keys())
        writer = csv.DictWriter(buffer, header, lineterminator='\n', **kwargs)
        writer.writeheader()
        writer.writerows([
            {k: _cell(row.get(k)) for k in header} for row in rows
        ])
    else:
        writer = csv.writer(buffer, lineterminator='\n', **kwargs)
        if header:
            writer.writerow(header)
        writer.writerows([[_cell(x) for x in row] for row in rows])
    return buffer.getvalue()


def _cell(x):
    x = jsonable(x)
    if isinstance(x, (list, dict)):
        return json.dumps(x)
    if x is None:
        return ''
    return x

