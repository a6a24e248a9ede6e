"""
Problem parameter schemas for the stereo and segmentation pipelines
"""
from pydantic import BaseModel, ConfigDict, Field, model_validator


class StereoParams(BaseModel):
    """Matching-cost and smoothness parameters of the stereo MRF"""

    model_config = ConfigDict(frozen=True)

    max_disparity: int = Field(85, ge=1, description="Number of disparity labels |L|")
    window_radius: int = Field(1, ge=0, description="Cost aggregation window radius in pixels")
    cost_truncation: float = Field(20.0, gt=0, description="Per-pixel absolute difference cap")
    smoothness_truncation: float = Field(2.0, gt=0, description="Truncation t of the linear pairwise term")
    w_high: float = Field(2.0, gt=0)
    w_mid: float = Field(1.0, gt=0)
    w_low: float = Field(0.5, gt=0)
    color_breakpoint_low: float = Field(8.0, ge=0, description="Color difference (channel sum) below which w_high applies")
    color_breakpoint_high: float = Field(30.0, ge=0, description="Color difference at or above which w_low applies")

    @model_validator(mode="after")
    def check_ordering(self):
        """Weights must be strictly decreasing, breakpoints increasing"""
        if not self.w_high > self.w_mid > self.w_low:
            raise ValueError("Pairwise weights must satisfy w_high > w_mid > w_low")
        if not self.color_breakpoint_low < self.color_breakpoint_high:
            raise ValueError("color_breakpoint_low must be below color_breakpoint_high")
        return self


class ConcaveSpec(BaseModel):
    """Two-piece concave F(z) = min(z, theta + epsilon * (z - theta))"""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(3.0, ge=0, description="Breakpoint where the shallow piece takes over")
    epsilon: float = Field(0.2, ge=0, lt=1, description="Slope of the shallow piece")

    @property
    def slopes(self) -> tuple[float, float]:
        return (1.0, self.epsilon)

    @property
    def intercepts(self) -> tuple[float, float]:
        return (0.0, self.theta * (1.0 - self.epsilon))


class SegmentationParams(BaseModel):
    """Appearance, edge-weight and edge-group parameters of the cooperative model"""

    model_config = ConfigDict(frozen=True)

    num_labels: int = Field(2, ge=1)
    unary_scale: float = Field(0.05, gt=0, description="Multiplier on seed-color distance")
    edge_scale: float = Field(14.0, gt=0, description="Multiplier lambda on exp(-beta * |dc|^2)")
    num_color_bins: int = Field(4, ge=1)
    cell_size: int = Field(16, ge=1)
    concave: ConcaveSpec = Field(default_factory=ConcaveSpec)
