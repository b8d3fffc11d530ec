"""Time-of-day slots used for segment speeds and driver history tables."""

from enum import IntEnum


class TimeSlot(IntEnum):
    MORNING_PEAK = 0
    EVENING_PEAK = 1
    NORMAL = 2


SLOT_NAMES = ("morning", "evening", "normal")

# local-clock slot windows in seconds since midnight, half-open
MORNING_WINDOW = (7 * 3600 + 30 * 60, 9 * 3600 + 30 * 60)
EVENING_WINDOW = (17 * 3600 + 30 * 60, 19 * 3600 + 30 * 60)


def slot_of(timestamp: int) -> TimeSlot:
    """Slot containing a timestamp (whole seconds, interpreted on the local clock)."""
    s = int(timestamp) % 86400
    if MORNING_WINDOW[0] <= s < MORNING_WINDOW[1]:
        return TimeSlot.MORNING_PEAK
    if EVENING_WINDOW[0] <= s < EVENING_WINDOW[1]:
        return TimeSlot.EVENING_PEAK
    return TimeSlot.NORMAL
