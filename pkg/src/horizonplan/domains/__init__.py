"""Benchmark domains and the instance-file loader."""

from __future__ import annotations

from pathlib import Path

from ..mdp import MdpModel, ModelError
from . import ctp, racetrack, sailing, tabular

__all__ = ["ctp", "sailing", "racetrack", "tabular", "load_instance"]


def load_instance(path: str | Path) -> MdpModel:
    """Parse an instance file into its model; the format is sniffed from the
    first non-comment token (``ctp``, ``sailing``, ``racetrack``, ``tabular``)."""
    path = Path(path)
    text = path.read_text()
    token = ""
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            token = stripped.split()[0]
            break
    name = path.stem
    if token == "ctp":
        return ctp.CtpModel(ctp.parse_instance(text, name=name))
    if token == "sailing":
        return sailing.SailingModel(sailing.parse_instance(text, name=name))
    if token == "racetrack":
        return racetrack.RacetrackModel(racetrack.parse_instance(text, name=name))
    if token == "tabular":
        return tabular.parse_model(text, name=name)
    raise ModelError(f"unrecognized instance format {token!r} in {path}")
