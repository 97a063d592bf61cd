"""Scoring for the three self-report instruments used in workshop evaluation.

CHS: six items on 1-6; total plus two subscales. The subscale mapping (agency
= odd items 1/3/5, pathways = even items 2/4/6) follows the published
instrument, which does not vary by study. TS-SF: six items on 1-7, reported
as the item mean. UMUX-Lite: two items on 1-7, also reported as the mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..errors import OutOfRange, WrongItemCount

# instrument -> (item count, low, high)
INSTRUMENTS: dict[str, tuple[int, int, int]] = {
    "CHS": (6, 1, 6),
    "TSSF": (6, 1, 7),
    "UMUX": (2, 1, 7),
}

CHS_AGENCY_ITEMS = (0, 2, 4)  # items 1, 3, 5
CHS_PATHWAYS_ITEMS = (1, 3, 5)  # items 2, 4, 6


def _check_items(items: Sequence[int], instrument: str) -> list[int]:
    count, low, high = INSTRUMENTS[instrument]
    if len(items) != count:
        raise WrongItemCount(f"{instrument} needs {count} items, got {len(items)}")
    values = []
    for i, value in enumerate(items):
        if isinstance(value, bool) or not isinstance(value, int):
            raise OutOfRange(f"{instrument} item {i + 1} must be an integer, got {value!r}")
        if not low <= value <= high:
            raise OutOfRange(
                f"{instrument} item {i + 1} must be in [{low}, {high}], got {value}"
            )
        values.append(value)
    return values


@dataclass(frozen=True)
class ChsScore:
    total: int
    agency: int
    pathways: int

    def to_dict(self) -> dict:
        return {"total": self.total, "agency": self.agency, "pathways": self.pathways}


def score_chs(items: Sequence[int]) -> ChsScore:
    values = _check_items(items, "CHS")
    agency = sum(values[i] for i in CHS_AGENCY_ITEMS)
    pathways = sum(values[i] for i in CHS_PATHWAYS_ITEMS)
    return ChsScore(total=agency + pathways, agency=agency, pathways=pathways)


def score_tssf(items: Sequence[int]) -> float:
    values = _check_items(items, "TSSF")
    return sum(values) / len(values)


def score_umux_lite(items: Sequence[int]) -> float:
    values = _check_items(items, "UMUX")
    return sum(values) / len(values)
