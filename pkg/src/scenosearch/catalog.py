"""Actor model catalog: body extents and motion limits per model key."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelSpec:
    """Physical description of one actor model.

    length/width are the footprint used for collision checks; the motion
    limits bound what the simulator lets the model do regardless of the
    commanding agent or controller.
    """

    length: float
    width: float
    max_speed: float
    max_accel: float
    max_decel: float
    max_steer: float
    wheelbase: float

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0 or self.wheelbase <= 0:
            raise ValueError("model dimensions must be strictly positive")
        if self.wheelbase >= self.length:
            raise ValueError("wheelbase must be smaller than body length")
        if min(self.max_speed, self.max_accel, self.max_decel, self.max_steer) < 0:
            raise ValueError("model limits must be non-negative")

    @property
    def extent(self) -> tuple[float, float]:
        return (self.length, self.width)


VehicleModelCatalog = dict[str, ModelSpec]

# Walkers are modelled as 0.5 x 0.5 m point-mass followers; obstacle models
# never move, so their limits are zero apart from the footprint.
DEFAULT_CATALOG: VehicleModelCatalog = {
    "sedan": ModelSpec(4.5, 1.9, 15.0, 3.0, 6.0, 0.6, 2.8),
    "suv": ModelSpec(4.9, 2.0, 14.0, 2.8, 5.5, 0.55, 2.9),
    "van": ModelSpec(5.4, 2.1, 12.0, 2.2, 5.0, 0.5, 3.2),
    "pedestrian": ModelSpec(0.5, 0.5, 1.5, 1.0, 2.0, 0.0, 0.3),
    "barrier": ModelSpec(2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
    "crate": ModelSpec(1.2, 1.2, 0.0, 0.0, 0.0, 0.0, 0.6),
}

NPC_VEHICLE_MODELS = ("sedan", "suv", "van")
WALKER_MODELS = ("pedestrian",)
OBSTACLE_MODELS = ("barrier", "crate")
