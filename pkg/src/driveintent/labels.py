"""The five maneuver classes and their left/right mirror relation."""

from __future__ import annotations

from enum import Enum


class ManeuverLabel(str, Enum):
    GO_STRAIGHT = "go_straight"
    LEFT_LANE_CHANGE = "left_lane_change"
    LEFT_TURN = "left_turn"
    RIGHT_LANE_CHANGE = "right_lane_change"
    RIGHT_TURN = "right_turn"

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)

    def mirror(self) -> "ManeuverLabel":
        return _MIRROR[self]

    @staticmethod
    def from_index(i: int) -> "ManeuverLabel":
        return CLASS_ORDER[i]


# Stable class ordering used for logits, confusion matrices and reports.
CLASS_ORDER = [
    ManeuverLabel.GO_STRAIGHT,
    ManeuverLabel.LEFT_LANE_CHANGE,
    ManeuverLabel.LEFT_TURN,
    ManeuverLabel.RIGHT_LANE_CHANGE,
    ManeuverLabel.RIGHT_TURN,
]

N_CLASSES = len(CLASS_ORDER)

_MIRROR = {
    ManeuverLabel.GO_STRAIGHT: ManeuverLabel.GO_STRAIGHT,
    ManeuverLabel.LEFT_LANE_CHANGE: ManeuverLabel.RIGHT_LANE_CHANGE,
    ManeuverLabel.RIGHT_LANE_CHANGE: ManeuverLabel.LEFT_LANE_CHANGE,
    ManeuverLabel.LEFT_TURN: ManeuverLabel.RIGHT_TURN,
    ManeuverLabel.RIGHT_TURN: ManeuverLabel.LEFT_TURN,
}
