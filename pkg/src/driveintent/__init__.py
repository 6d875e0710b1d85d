"""Driver maneuver anticipation pipeline: data, augmentation, model, eval."""

from .labels import CLASS_ORDER, N_CLASSES, ManeuverLabel

__all__ = ["ManeuverLabel", "CLASS_ORDER", "N_CLASSES"]
__version__ = "0.1.0"
