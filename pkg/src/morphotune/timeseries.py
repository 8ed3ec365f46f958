"""Uniformly sampled multi-channel records with an event log."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    dt: float
    channels: dict[str, np.ndarray]
    events: list[tuple[float, str]] = field(default_factory=list)
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError(f"channel lengths differ: {sorted(lengths)}")
        times = [e[0] for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("events must be time-ordered")

    def __len__(self) -> int:
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * len(self)

    def window(self, start: float, stop: float | None = None) -> "TimeSeries":
        """Samples with ``start <= t < stop`` (events filtered alike)."""
        t = self.t
        stop = t[-1] + self.dt if stop is None else stop
        mask = (t >= start - 1e-12) & (t < stop - 1e-12)
        idx = np.flatnonzero(mask)
        t0 = t[idx[0]] if len(idx) else start
        return TimeSeries(
            self.dt,
            {k: v[mask] for k, v in self.channels.items()},
            [e for e in self.events if start <= e[0] < stop],
            t0=float(t0),
            meta=dict(self.meta),
        )

    def to_csv(self, path=None, fmt: str = "%.10g") -> str:
        names = list(self.channels)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *names])
        cols = [self.t, *(self.channels[n] for n in names)]
        for row in zip(*cols):
            w.writerow([fmt % v for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        if header[0] != "t":
            raise ValueError("first CSV column must be t")
        t = data[:, 0]
        dt = float(np.median(np.diff(t))) if len(t) > 1 else 1.0
        return cls(dt, {h: data[:, i + 1] for i, h in enumerate(header[1:])}, t0=float(t[0]))

    def manifest(self, parameters: dict | None = None, seed: int | None = None) -> dict:
        return {
            "dt": self.dt,
            "t0": self.t0,
            "samples": len(self),
            "channels": list(self.channels),
            "parameters": parameters or {},
            "seed": seed,
            "events": [[t, kind] for t, kind in self.events],
        }

    def to_json(self, path=None, parameters: dict | None = None, seed: int | None = None) -> str:
        text = json.dumps(self.manifest(parameters, seed), indent=2, sort_keys=True, default=_jsonable)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        from dataclasses import asdict

        return asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
