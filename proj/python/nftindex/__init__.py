"""Hedonic NFT price index, bubble dating and mispricing.

Thin wrappers over the compiled core. JSON documents cross the boundary as
strings and come back as dicts.
"""

import json

from . import _core
from ._core import (
    IoError,
    NumericalError,
    ValidationError,
    adf_statistic,
    bsadf,
    bsadf_signal,
    detect_bubbles,
    moving_average,
    undersold_probability,
)

__all__ = [
    "IoError",
    "NumericalError",
    "ValidationError",
    "adf_statistic",
    "assess",
    "bsadf",
    "bsadf_signal",
    "build_index",
    "critical_values",
    "detect_bubbles",
    "fit",
    "ingest_report",
    "moving_average",
    "run_cli",
    "simulate",
    "undersold_probability",
]


def _dumps(model):
    return model if isinstance(model, str) else json.dumps(model)


def ingest_report(assets, sales, format=""):
    return json.loads(_core.ingest_report(str(assets), str(sales), format))


def fit(assets, sales, format="", huber_delta=1.345, max_iterations=200, tolerance=1e-8, threads=1):
    """Fits the time-dummy model to an asset file and a sales file."""
    return json.loads(
        _core.fit_files(str(assets), str(sales), format, huber_delta, max_iterations, tolerance, threads)
    )


def build_index(model, base_value=100.0):
    return _core.build_index(_dumps(model), base_value)


def critical_values(horizon, min_window, **kwargs):
    return json.loads(_core.critical_values(horizon, min_window, **kwargs))


def assess(model, collection, freq, period, price):
    return _core.assess(_dumps(model), collection, tuple(freq), period, price)


def simulate(spec, out_dir):
    """Writes a synthetic market into out_dir and returns its true parameters."""
    return json.loads(_core.simulate(_dumps(spec), str(out_dir)))


def run_cli(*args):
    return _core.run_cli(["nftindex", *map(str, args)])
