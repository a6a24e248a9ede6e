"""
Anytime traces
Timestamped energy records and their CSV form
"elapsed_seconds,energy,partition_level,event".
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

from liftedmap.core.exceptions import InputError

CSV_HEADER = ("elapsed_seconds", "energy", "partition_level", "event")


class TraceEvent(str, Enum):
    START = "start"
    MOVE = "move"
    REFINE = "refine"
    STOP = "stop"


@dataclass(frozen=True)
class TraceRow:
    elapsed: float
    energy: float
    level: int
    event: TraceEvent


@dataclass
class AnytimeTrace:
    """Rows in recording order; elapsed is non-decreasing"""

    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def times(self) -> list[float]:
        return [row.elapsed for row in self.rows]

    @property
    def energies(self) -> list[float]:
        return [row.energy for row in self.rows]

    @property
    def final_energy(self) -> float:
        return self.rows[-1].energy if self.rows else math.inf

    def events(self, event: TraceEvent) -> list[int]:
        """Row indices carrying the given event"""
        return [k for k, row in enumerate(self.rows) if row.event == event]

    def is_monotone(self, tolerance: float = 0.0) -> bool:
        """True if no row's energy exceeds its predecessor's by more than tolerance"""
        return all(b.energy <= a.energy + tolerance for a, b in zip(self.rows, self.rows[1:]))

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow([f"{row.elapsed:.6f}", repr(row.energy), row.level, row.event.value])

    @classmethod
    def read_csv(cls, path: Path) -> "AnytimeTrace":
        """
        Load a trace CSV

        Raises:
            InputError: If the file is missing or malformed
        """
        try:
            with open(path, newline="") as handle:
                reader = csv.reader(handle)
                header = next(reader, None)
                if header is None or tuple(header) != CSV_HEADER:
                    raise InputError(f"{path}: not a trace CSV (header {header})")
                rows = [
                    TraceRow(float(elapsed), float(value), int(level), TraceEvent(event))
                    for elapsed, value, level, event in reader
                ]
        except OSError as exc:
            raise InputError(f"Cannot read trace {path}: {exc}") from exc
        except ValueError as exc:
            raise InputError(f"{path}: malformed trace row: {exc}") from exc
        return cls(rows)


class TraceRecorder:
    """
    Shared monotonic clock and trace sink for one run

    Every solver and the C2F driver of a run append to the same recorder so
    the concatenated trace is on one time axis.
    """

    def __init__(self, clock: Callable[[], float] = time.monotonic, enabled: bool = True):
        self._clock = clock
        self._origin = clock()
        self.enabled = enabled
        self.trace = AnytimeTrace()

    def elapsed(self) -> float:
        return self._clock() - self._origin

    def record(self, energy: float, event: TraceEvent, level: int = 0) -> None:
        if self.enabled:
            self.trace.rows.append(TraceRow(self.elapsed(), float(energy), int(level), event))

    def extend(self, rows: Iterable[TraceRow]) -> None:
        self.trace.rows.extend(rows)


class Deadline:
    """Absolute point on a recorder's clock; None means unbounded"""

    def __init__(self, recorder: TraceRecorder, seconds: Optional[float]):
        self._recorder = recorder
        self.at = None if seconds is None else recorder.elapsed() + seconds

    def expired(self) -> bool:
        return self.at is not None and self._recorder.elapsed() >= self.at

    def remaining(self) -> Optional[float]:
        return None if self.at is None else max(self.at - self._recorder.elapsed(), 0.0)
