"""Driver route preference: inverted tables over historical paths.

Per time slot, an inverted driver table (IDT) maps vehicle -> segment ->
{path id: order index} so that "how often did this driver use segment m" and
"how often did m precede n on one path" are dictionary lookups.  Preference
for a candidate transition combines route experience (a saturating logistic
of the traversal count) with an add-one transition probability over the next
layer's candidates, and is blended with the CRF transition score.
"""

from __future__ import annotations

import json
import math
import os

from .slots import TimeSlot, slot_of

__all__ = [
    "TimeSlot",
    "slot_of",
    "InvertedDriverTable",
    "experience",
    "transition_probability",
    "preference_score",
    "superpose",
    "build_tables",
    "save_tables",
    "load_tables",
    "DEFAULT_ALPHA",
    "DEFAULT_X_SAT",
]

DEFAULT_ALPHA = 0.7
DEFAULT_X_SAT = 50.0
IDT_FILES = {
    TimeSlot.MORNING_PEAK: "idt_morning.json",
    TimeSlot.EVENING_PEAK: "idt_evening.json",
    TimeSlot.NORMAL: "idt_normal.json",
}


class InvertedDriverTable:
    """Inverted index of one slot's stored paths.

    _table[vehicle][segment] = {path_id: order of the segment on that path};
    _paths is the registry path_id -> segment list.  A (vehicle, segment,
    path) entry exists iff the stored path contains the segment.
    """

    def __init__(self):
        self._table = {}
        self._paths = {}
        self._owner = {}  # path_id -> vehicle

    def insert_path(self, vehicle, segments) -> int:
        if not segments:
            raise ValueError(f"vehicle {vehicle}: cannot insert an empty path")
        pid = len(self._paths)
        self._paths[pid] = list(map(int, segments))
        self._owner[pid] = vehicle
        by_seg = self._table.setdefault(vehicle, {})
        for order, seg in enumerate(segments):
            by_seg.setdefault(int(seg), {}).setdefault(pid, order)
        return pid

    def path(self, path_id):
        return self._paths[path_id]

    def paths_of(self, vehicle):
        return [pid for pid, v in self._owner.items() if v == vehicle]

    def traversal_count(self, vehicle, segment) -> int:
        """Number of stored paths of this vehicle containing the segment."""
        return len(self._table.get(vehicle, {}).get(int(segment), ()))

    def ordered_pair_count(self, vehicle, seg_m, seg_n) -> int:
        """Stored paths of this vehicle where seg_m appears before seg_n
        (anywhere on the path, not only adjacent)."""
        by_seg = self._table.get(vehicle, {})
        on_m = by_seg.get(int(seg_m))
        on_n = by_seg.get(int(seg_n))
        if not on_m or not on_n:
            return 0
        if len(on_m) > len(on_n):
            return sum(1 for pid, o in on_n.items() if on_m.get(pid, o) < o)
        return sum(1 for pid, o in on_m.items() if o < on_n.get(pid, o))

    def to_dict(self):
        return {
            "paths": {str(pid): segs for pid, segs in self._paths.items()},
            "owners": {str(pid): veh for pid, veh in self._owner.items()},
            "table": {
                veh: {str(seg): {str(pid): order for pid, order in by_path.items()}
                      for seg, by_path in by_seg.items()}
                for veh, by_seg in self._table.items()
            },
        }

    @classmethod
    def from_dict(cls, doc) -> "InvertedDriverTable":
        idt = cls()
        idt._paths = {int(pid): list(map(int, segs)) for pid, segs in doc["paths"].items()}
        idt._owner = {int(pid): veh for pid, veh in doc["owners"].items()}
        idt._table = {
            veh: {int(seg): {int(pid): int(order) for pid, order in by_path.items()}
                  for seg, by_path in by_seg.items()}
            for veh, by_seg in doc["table"].items()
        }
        return idt


def experience(traversal_count: float, x_sat: float = DEFAULT_X_SAT) -> float:
    """Logistic route familiarity rising from ~0 at no history toward 1 at
    x_sat traversals; the exponent is clamped to [-5, 5]."""
    a = 10.0 / x_sat
    z = a * traversal_count - 5.0
    z = max(-5.0, min(5.0, z))
    return 1.0 / (1.0 + math.exp(-z))


def transition_probability(
    idt: InvertedDriverTable,
    vehicle,
    seg_m,
    seg_n,
    next_candidates,
    normalized: bool = False,
) -> float:
    """Add-one probability that this driver continues from seg_m to seg_n,
    against the other candidates of the next layer.

    The default keeps the literal add-one form (single +1 in the
    denominator); normalized=True uses Laplace smoothing so the
    probabilities over next_candidates sum to one.
    """
    num = idt.ordered_pair_count(vehicle, seg_m, seg_n) + 1.0
    total = sum(idt.ordered_pair_count(vehicle, seg_m, j) for j in next_candidates)
    if normalized:
        return num / (total + len(list(next_candidates)))
    return num / (total + 1.0)


def preference_score(
    idt: InvertedDriverTable,
    vehicle,
    seg_m,
    seg_n,
    next_candidates,
    x_sat: float = DEFAULT_X_SAT,
    normalized: bool = False,
) -> float:
    """Route experience on seg_m times the transition probability to seg_n."""
    f = experience(idt.traversal_count(vehicle, seg_m), x_sat)
    p = transition_probability(idt, vehicle, seg_m, seg_n, next_candidates, normalized)
    return f * p


def superpose(h: float, delta: float, alpha: float = DEFAULT_ALPHA) -> float:
    """Blend preference h with the CRF transition score delta."""
    return alpha * h + (1.0 - alpha) * delta


def build_tables(history) -> dict:
    """IDTs for all three slots from (vehicle_id, start_timestamp, path) triples."""
    tables = {slot: InvertedDriverTable() for slot in TimeSlot}
    for vehicle, t0, path in history:
        tables[slot_of(t0)].insert_path(vehicle, path)
    return tables


def save_tables(out_dir, tables):
    for slot, name in IDT_FILES.items():
        with open(os.path.join(out_dir, name), "w") as f:
            json.dump(tables[slot].to_dict(), f, sort_keys=True, separators=(",", ":"))
            f.write("\n")


def load_tables(in_dir) -> dict:
    tables = {}
    for slot, name in IDT_FILES.items():
        with open(os.path.join(in_dir, name)) as f:
            tables[slot] = InvertedDriverTable.from_dict(json.load(f))
    return tables
