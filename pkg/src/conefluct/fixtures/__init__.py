"""Shipped reference fixture: a calibrated interior 2x2 law with pinned values.

The law was produced by the pipeline itself (see ``scripts/build_reference_fixture.py``)
and its manifest pins the spectral and harmonic quantities with tolerances;
the validation suite re-derives them and checks against the pins.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from ..matrix_law import MatrixLaw

__all__ = ["reference_law", "reference_manifest", "reference_law_text"]


def _read(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def reference_law_text() -> str:
    """Raw JSON text of the shipped law file (round-trips exactly)."""
    return _read("reference_law.json")


def reference_law() -> MatrixLaw:
    obj = json.loads(reference_law_text())
    atoms = [np.asarray(entries, dtype=float) for entries in obj["atoms"]]
    return MatrixLaw.from_entries(atoms, np.asarray(obj["weights"], dtype=float))


def reference_manifest() -> dict:
    """Pinned quantities (drift, variance, potential bound, harmonic values)."""
    return json.loads(_read("reference_manifest.json"))
