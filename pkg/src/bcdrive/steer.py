"""The 3-way steering label: -1 = left, 0 = straight, +1 = right."""

import numpy as np

from .errors import ContractError

LEFT = -1
STRAIGHT = 0
RIGHT = 1

# Ordered by class value; index = label + 1. Argmax ties resolve to the
# first (smallest) index, i.e. toward LEFT.
CLASSES = (LEFT, STRAIGHT, RIGHT)


def validate(label: int) -> int:
    """Return the label if it is one of -1, 0, +1; raise otherwise."""
    if label not in (-1, 0, 1):
        raise ContractError(f"steering label must be -1, 0 or 1, got {label!r}")
    return int(label)


def to_index(label: int) -> int:
    return validate(label) + 1


def from_index(index: int) -> int:
    if index not in (0, 1, 2):
        raise ContractError(f"class index must be 0, 1 or 2, got {index!r}")
    return index - 1


def one_hot(label: int) -> np.ndarray:
    """Length-3 one-hot target vector for the given label."""
    target = np.zeros(3, dtype=np.float64)
    target[to_index(label)] = 1.0
    return target
