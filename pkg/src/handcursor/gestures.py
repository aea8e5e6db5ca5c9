"""Gesture label alphabet and the fixed class order used everywhere."""

import enum


class GestureLabel(enum.Enum):
    FIST = "fist"
    PALM = "palm"
    POINT_LEFT = "point_left"
    POINT_RIGHT = "point_right"
    # Produced only by the open-set gate, never by argmax.
    UNKNOWN = "unknown"


#: Index order of the four trained classes. Logits, reference vectors and
#: confusion matrices all use this order; ties break toward the lower index.
CLASS_ORDER = (
    GestureLabel.FIST,
    GestureLabel.PALM,
    GestureLabel.POINT_LEFT,
    GestureLabel.POINT_RIGHT,
)

CLASS_NAMES = tuple(label.value for label in CLASS_ORDER)

N_CLASSES = len(CLASS_ORDER)


def label_from_name(name: str) -> GestureLabel:
    try:
        return GestureLabel(name)
    except ValueError:
        raise ValueError(f"unknown gesture name {name!r}") from None
