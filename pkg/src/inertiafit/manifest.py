"""JSON event manifests.

A manifest lists the trace files of one event and the metadata needed to
build an :class:`~inertiafit.timeseries.EventDataset`::

    {
      "f_n_hz": 50.0,
      "p_load_mw": 315.0,
      "onset_s": 1.0,                      # optional, detected when absent
      "traces": [
        {"path": "frequency.csv", "role": "frequency"},
        {"path": "pfr_G1.csv", "role": "pfr", "channel_id": "G1"},
        {"path": "contingency.csv", "role": "contingency"}
      ],
      "washout": {"t_w_s": 0.06, "inertias_mws": {"G1": 600.0}},   # optional
      "fit": {"horizon_s": 20, "d_max": 10, "tol": 1e-8,
              "max_iter": 200, "multistart": true}                  # optional
    }

Trace paths are relative to the manifest's directory.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidConfig, TraceFileNotFound
from .estimators import FitOptions
from .preprocess import DEFAULT_T_W, WashoutConfig
from .timeseries import EventDataset, Unit, build_event_dataset, load_trace_csv

__all__ = ["EventManifest", "load_manifest", "file_digest"]

ROLES = ("frequency", "pfr", "contingency")


@dataclass(frozen=True, eq=False)
class EventManifest:
    path: str
    dataset: EventDataset
    washout: Optional[WashoutConfig]
    fit: FitOptions
    files: tuple = ()
    raw: dict = field(default_factory=dict)

    def digest(self) -> str:
        """SHA-256 over the manifest and every referenced trace file."""
        h = hashlib.sha256()
        for p in (self.path, *self.files):
            h.update(os.path.basename(p).encode())
            h.update(file_digest(p).encode())
        return h.hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_manifest(path) -> EventManifest:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise TraceFileNotFound(f"manifest not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise InvalidConfig(f"{path}: manifest must be a JSON object")
    for key in ("f_n_hz", "p_load_mw", "traces"):
        if key not in raw:
            raise InvalidConfig(f"{path}: missing key {key!r}")

    base = os.path.dirname(os.path.abspath(path))
    by_role = {r: [] for r in ROLES}
    files = []
    for entry in raw["traces"]:
        role = entry.get("role")
        if role not in ROLES:
            raise InvalidConfig(f"{path}: unknown trace role {role!r}")
        fpath = os.path.join(base, entry["path"])
        if not os.path.exists(fpath):
            raise TraceFileNotFound(f"trace file not found: {fpath}")
        unit = Unit.HZ if role == "frequency" else Unit.MW
        by_role[role].append(load_trace_csv(fpath, unit=unit,
                                            channel_id=entry.get("channel_id")))
        files.append(fpath)
    if len(by_role["frequency"]) != 1 or len(by_role["contingency"]) != 1:
        raise InvalidConfig(f"{path}: need exactly one frequency and one contingency trace")
    if not by_role["pfr"]:
        raise InvalidConfig(f"{path}: no pfr traces listed")

    dataset = build_event_dataset(
        by_role["frequency"][0], by_role["pfr"], by_role["contingency"][0],
        f_n=float(raw["f_n_hz"]), p_load=float(raw["p_load_mw"]),
        onset=raw.get("onset_s", "auto"),
    )

    washout = None
    if raw.get("washout"):
        w = raw["washout"]
        washout = WashoutConfig(
            f_n=dataset.f_n,
            generator_inertias={k: float(v) for k, v in w.get("inertias_mws", {}).items()},
            t_w=float(w.get("t_w_s", DEFAULT_T_W)),
        )
    fit = FitOptions.from_dict(raw.get("fit", {}))
    return EventManifest(path=path, dataset=dataset, washout=washout, fit=fit,
                         files=tuple(files), raw=raw)
