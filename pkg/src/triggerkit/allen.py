"""Interval algebra: temporal distances and a total temporal order on events.

The order between two events is read off the sign pattern of their four
start/end time differences.  Exactly 13 sign patterns are realizable for
intervals of positive duration, one per atomic interval relation.  The
resulting pairwise direction is equivalent to sorting by
(end ascending, start descending, id ascending), which gives a total
order: "u precedes v" always has exactly one orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TemporalDistance:
    """Signed start/end differences (j relative to i), in seconds."""

    ds: float    # ts_j - ts_i
    de: float    # te_j - te_i
    dse: float   # ts_j - te_i
    des: float   # te_j - ts_i

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ds, self.de, self.dse, self.des)


@dataclass(frozen=True)
class AllenOrder:
    relation: str
    forward: bool  # True: i precedes j; False: j precedes i


# Sign pattern of (ds, de, dse, des) -> (relation, i-precedes-j).
# Patterns are the realizable ones for positive-duration intervals.
SIGN_TABLE: dict[tuple[int, int, int, int], tuple[str, bool]] = {
    (1, 1, 1, 1): ("before", True),
    (-1, -1, -1, -1): ("before", False),
    (-1, 1, -1, 1): ("during", True),     # i inside j: i precedes j
    (1, -1, -1, 1): ("during", False),    # j inside i: j precedes i
    (1, 1, -1, 1): ("overlaps", True),
    (-1, -1, -1, 1): ("overlaps", False),
    (1, 1, 0, 1): ("meets", True),
    (-1, -1, -1, 0): ("meets", False),
    (0, 1, -1, 1): ("starts", True),
    (0, -1, -1, 1): ("starts", False),
    (-1, 0, -1, 1): ("finishes", True),
    (1, 0, -1, 1): ("finishes", False),
    (0, 0, -1, 1): ("equals", True),      # direction falls back to id order
}

RELATIONS = ("before", "during", "overlaps", "meets", "starts", "finishes", "equals")


def temporal_distance(interval_i: tuple[float, float],
                      interval_j: tuple[float, float]) -> TemporalDistance:
    """Four signed differences between two (start, end) intervals."""
    tsi, tei = interval_i
    tsj, tej = interval_j
    return TemporalDistance(tsj - tsi, tej - tei, tsj - tei, tej - tsi)


def _sign(x: float) -> int:
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


def allen_order(interval_i: tuple[float, float], interval_j: tuple[float, float],
                id_i: int = 0, id_j: int = 1) -> AllenOrder:
    """Atomic relation and direction between two positive-duration intervals.

    Identical intervals tie-break on id: the lower id precedes.
    """
    tsi, tei = interval_i
    tsj, tej = interval_j
    if not (tsi < tei and tsj < tej):
        raise ValueError("intervals must have positive duration")
    d = temporal_distance(interval_i, interval_j)
    pattern = (_sign(d.ds), _sign(d.de), _sign(d.dse), _sign(d.des))
    if pattern not in SIGN_TABLE:
        raise ValueError(f"unrealizable sign pattern {pattern}")
    relation, forward = SIGN_TABLE[pattern]
    if relation == "equals":
        if id_i == id_j:
            raise ValueError("equal intervals need distinct ids to order")
        forward = id_i < id_j
    return AllenOrder(relation, forward)


def order_key(interval: tuple[float, float], ident: int) -> tuple[float, float, int]:
    """Sort key realizing the pairwise order as a total order."""
    ts, te = interval
    return (te, -ts, ident)


def precedes(interval_i, interval_j, id_i: int = 0, id_j: int = 1) -> bool:
    return allen_order(interval_i, interval_j, id_i, id_j).forward


def angle_between(ax: float, ay: float, bx: float, by: float) -> float:
    """Unsigned angle between two vectors, in radians."""
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na <= 0.0 or nb <= 0.0:
        return 0.0
    c = (ax * bx + ay * by) / (na * nb)
    return math.acos(max(-1.0, min(1.0, c)))
