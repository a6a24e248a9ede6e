"""
Stopping criteria schema
"""
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from liftedmap.core.config import settings


class StoppingCriteria(BaseModel):
    """When an anytime solver (or one C2F level) stops"""

    model_config = ConfigDict(frozen=True)

    no_improve_rounds: Optional[int] = Field(
        4, ge=1, description="Stop after K consecutive attempts without improvement; None runs to convergence"
    )
    wall_clock_budget: Optional[float] = Field(None, ge=0, description="Seconds; 0 returns the start immediately")
    energy_tolerance: float = Field(
        default_factory=lambda: settings.ENERGY_TOLERANCE,
        ge=0,
        description="Minimum decrease counted as improvement",
    )
    min_relative_gain: float = Field(
        0.0, ge=0, lt=1, description="Fraction of |energy| an attempt must gain to count as improvement"
    )
    count_unit: Literal["move", "cycle"] = Field(
        "move", description="What one improvement attempt is: a single move or a full label cycle"
    )

    def with_budget(self, budget: Optional[float]) -> "StoppingCriteria":
        """Copy with the tighter of the two budgets"""
        if budget is None:
            return self
        if self.wall_clock_budget is not None:
            budget = min(budget, self.wall_clock_budget)
        return self.model_copy(update={"wall_clock_budget": max(budget, 0.0)})

    def until_converged(self) -> "StoppingCriteria":
        """Copy that only stops on convergence or the budget"""
        return self.model_copy(update={"no_improve_rounds": None})
