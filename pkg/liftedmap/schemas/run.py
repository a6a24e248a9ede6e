"""
Run configuration schema
"""
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

from liftedmap.core.config import settings
from liftedmap.mrf.color_passing import CPSpec
from liftedmap.mrf.partition import Partition

DEGENERATE = "degenerate"

ScheduleEntry = Union[tuple[int, int], Literal["degenerate"]]


class RunConfig(BaseModel):
    """One harness run: task, mode, schedule, criteria, inputs and output directory"""

    task: Literal["stereo", "segment"]
    mode: Literal["flat", "static", "c2f", "threshold"] = "c2f"
    schedule: list[ScheduleEntry] = Field(
        default_factory=list,
        description="(N_L, N_iter) levels or 'degenerate', coarsest first; the flat model is implicit",
    )
    threshold: Optional[float] = Field(None, ge=0, description="Fixed threshold for mode=threshold")
    k: Optional[int] = Field(None, ge=1, description="No-improvement trigger; defaults per task")
    count_unit: Literal["move", "cycle"] = "move"
    budget: Optional[float] = Field(None, ge=0, description="Global wall-clock budget in seconds")
    solver: Literal["expansion", "icm"] = "expansion"

    # stereo inputs
    left: Optional[Path] = None
    right: Optional[Path] = None
    truth: Optional[Path] = None
    max_disparity: int = Field(85, ge=1)

    # segmentation inputs
    image: Optional[Path] = None
    seeds: Optional[Path] = None
    labels: int = Field(2, ge=1)
    groups_bins: int = Field(4, ge=1)
    cell: int = Field(16, ge=1)

    out: Path = Path("out")
    write_trace: bool = True
    debug_partitions: bool = False
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)

    @model_validator(mode="after")
    def check_mode_inputs(self):
        """Mode- and task-specific fields must be present"""
        if self.task == "stereo" and (self.left is None or self.right is None):
            raise ValueError("stereo runs need --left and --right")
        if self.task == "segment" and (self.image is None or self.seeds is None):
            raise ValueError("segment runs need --image and --seeds")
        if self.task == "segment" and self.solver != "expansion":
            raise ValueError("segment runs only support the expansion solver")
        if self.mode == "static" and len(self.schedule) != 1:
            raise ValueError("static mode needs exactly one level in the schedule")
        if self.mode == "threshold":
            if self.threshold is None and not any(entry != DEGENERATE for entry in self.schedule):
                raise ValueError("threshold mode needs --threshold or a CP level to match")
        for entry in self.schedule:
            if entry != DEGENERATE:
                CPSpec(*entry)
        return self

    @property
    def num_labels(self) -> int:
        return self.max_disparity if self.task == "stereo" else self.labels

    @property
    def no_improve_rounds(self) -> int:
        """K: 4 for stereo, |L| for segmentation unless given"""
        if self.k is not None:
            return self.k
        return 4 if self.task == "stereo" else self.labels

    def default_schedule(self) -> list[ScheduleEntry]:
        """Published refinement sequences, capped at |L|"""
        if self.task == "stereo":
            return [(min(n, self.num_labels), 1) for n in (1, 2, 3)]
        half = max(1, math.ceil(self.labels / 2))
        return [(half, 2), (half, 3)]

    def level_specs(self, num_vars: int) -> list[Union[CPSpec, Partition]]:
        """Schedule entries as CP specs or explicit partitions"""
        entries = self.schedule or (self.default_schedule() if self.mode == "c2f" else [])
        return [Partition.degenerate(num_vars) if entry == DEGENERATE else CPSpec(*entry) for entry in entries]
