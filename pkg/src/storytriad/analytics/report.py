"""Batch analysis of pre/post workshop questionnaires from CSV files.

CSV format (UTF-8, comma-separated)::

    participant,instrument,timing,i1,i2,i3,i4,i5,i6
    p01,CHS,pre,4,5,4,3,5,4
    p01,TSSF,post,6,5,7,6,5,6
    p01,UMUX,post,6,5,,,,

Instruments with fewer than six items leave the trailing cells empty. The
report covers CHS descriptives and paired tests (total and both subscales,
with both d variants), TS-SF reliability and descriptives, UMUX-Lite
descriptives, and five-number summaries ready for boxplot rendering.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ParseError, ParticipantMismatch, StorytriadError
from .scales import INSTRUMENTS, score_chs, score_tssf, score_umux_lite
from .stats import PairedTestResult, ReliabilityResult, cronbach_alpha, paired_t

_MAX_ITEMS = 6
_EXPECTED_HEADER = ["participant", "instrument", "timing"] + [
    f"i{i}" for i in range(1, _MAX_ITEMS + 1)
]
_INSTRUMENT_ALIASES = {
    "CHS": "CHS",
    "TSSF": "TSSF",
    "TS-SF": "TSSF",
    "UMUX": "UMUX",
    "UMUX-LITE": "UMUX",
    "UMUXLITE": "UMUX",
}


@dataclass(frozen=True)
class ScaleResponse:
    participant: str
    instrument: str  # "CHS" | "TSSF" | "UMUX"
    timing: str  # "pre" | "post"
    items: tuple[int, ...]


def read_responses(path: str | Path) -> list[ScaleResponse]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    rows = list(csv.reader(text.splitlines()))
    rows = [row for row in rows if any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError(f"{path}: file is empty")
    header = [cell.strip().lower() for cell in rows[0]]
    if header != _EXPECTED_HEADER:
        raise ParseError(
            f"{path}: header must be {','.join(_EXPECTED_HEADER)!r}, got {','.join(header)!r}"
        )
    if len(rows) == 1:
        raise ParseError(f"{path}: no data rows")

    responses = []
    seen: set[tuple[str, str, str]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(_EXPECTED_HEADER):
            raise ParseError(f"{path}:{lineno}: expected {len(_EXPECTED_HEADER)} columns")
        participant = row[0].strip()
        instrument = _INSTRUMENT_ALIASES.get(row[1].strip().upper())
        timing = row[2].strip().lower()
        if not participant:
            raise ParseError(f"{path}:{lineno}: empty participant id")
        if instrument is None:
            raise ParseError(f"{path}:{lineno}: unknown instrument {row[1].strip()!r}")
        if timing not in ("pre", "post"):
            raise ParseError(f"{path}:{lineno}: timing must be pre or post, got {row[2]!r}")
        cells = [cell.strip() for cell in row[3:]]
        expected_count = INSTRUMENTS[instrument][0]
        filled = [cell for cell in cells[:expected_count]]
        if any(cells[expected_count:]):
            raise ParseError(
                f"{path}:{lineno}: {instrument} takes {expected_count} items, extra cells found"
            )
        try:
            items = tuple(int(cell) for cell in filled)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: items must be integers") from None
        key = (participant, instrument, timing)
        if key in seen:
            raise ParseError(
                f"{path}:{lineno}: duplicate row for {participant}/{instrument}/{timing}"
            )
        seen.add(key)
        try:
            _SCORERS[instrument](items)  # validates count and range
        except StorytriadError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        responses.append(ScaleResponse(participant, instrument, timing, items))
    return responses


_SCORERS = {"CHS": score_chs, "TSSF": score_tssf, "UMUX": score_umux_lite}


def _descriptives(values: Sequence[float]) -> dict:
    n = len(values)
    return {
        "n": n,
        "mean": statistics.fmean(values) if n else None,
        "sd": statistics.stdev(values) if n >= 2 else None,
        "min": min(values) if n else None,
        "max": max(values) if n else None,
    }


def _boxplot(values: Sequence[float]) -> dict:
    """Five-number summary (linear-interpolation quartiles) plus the mean."""
    data = sorted(float(v) for v in values)
    if len(data) < 2:
        single = data[0] if data else None
        return {"n": len(data), "min": single, "q1": single, "median": single,
                "q3": single, "max": single, "mean": single}
    q1, median, q3 = statistics.quantiles(data, n=4, method="inclusive")
    return {
        "n": len(data),
        "min": data[0],
        "q1": q1,
        "median": median,
        "q3": q3,
        "max": data[-1],
        "mean": statistics.fmean(data),
    }


@dataclass
class AnalysisReport:
    participants: list[str]
    chs_pre: dict
    chs_post: dict
    chs_paired: dict[str, PairedTestResult]
    tssf: dict
    tssf_alpha: ReliabilityResult | None
    umux: dict
    boxplots: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "participants": {"n": len(self.participants), "ids": self.participants},
            "chs": {
                "pre": self.chs_pre,
                "post": self.chs_post,
                "paired": {name: r.to_dict() for name, r in self.chs_paired.items()},
            },
            "tssf": {
                "scores": self.tssf,
                "alpha": self.tssf_alpha.to_dict() if self.tssf_alpha else None,
            },
            "umux": {"scores": self.umux},
            "boxplots": self.boxplots,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_markdown(self) -> str:
        lines = ["# Workshop analysis", ""]
        lines.append(f"Participants: {len(self.participants)}")
        lines.append("")
        lines.append("## Momentary hope (CHS)")
        lines.append("")
        lines.append("| scale | M pre | M post | t | df | p (two-tailed) | d_z | d_av |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for name, r in self.chs_paired.items():
            lines.append(
                f"| {name} | {r.mean_pre:.2f} | {r.mean_post:.2f} | {r.t:.2f} "
                f"| {r.df} | {r.p_two_tailed:.3f} | {r.d_z:.2f} | {r.d_av:.2f} |"
            )
        lines.append("")
        lines.append("## Narrative immersion (TS-SF)")
        lines.append("")
        if self.tssf["n"]:
            lines.append(
                f"M = {self.tssf['mean']:.2f}/7"
                + (f", SD = {self.tssf['sd']:.2f}" if self.tssf["sd"] is not None else "")
            )
            if self.tssf_alpha is not None:
                lines.append(f"Internal consistency: Cronbach's alpha = {self.tssf_alpha.alpha:.2f}")
        else:
            lines.append("No TS-SF responses.")
        lines.append("")
        lines.append("## Usability (UMUX-Lite)")
        lines.append("")
        if self.umux["n"]:
            lines.append(
                f"M = {self.umux['mean']:.2f}/7"
                + (f", SD = {self.umux['sd']:.2f}" if self.umux["sd"] is not None else "")
            )
        else:
            lines.append("No UMUX-Lite responses.")
        lines.append("")
        lines.append("## Boxplot data")
        lines.append("")
        lines.append("| panel | min | q1 | median | q3 | max | mean |")
        lines.append("|---|---|---|---|---|---|---|")
        for name, box in self.boxplots.items():
            lines.append(
                f"| {name} | {box['min']:.2f} | {box['q1']:.2f} | {box['median']:.2f} "
                f"| {box['q3']:.2f} | {box['max']:.2f} | {box['mean']:.2f} |"
            )
        lines.append("")
        return "\n".join(lines)


def _index_by_participant(
    responses: Iterable[ScaleResponse], instrument: str, timing: str
) -> dict[str, tuple[int, ...]]:
    return {
        r.participant: r.items
        for r in responses
        if r.instrument == instrument and r.timing == timing
    }


def analyze_workshop(pre_csv: str | Path, post_csv: str | Path) -> AnalysisReport:
    """Join the two files on participant id and compute the report."""
    pre = read_responses(pre_csv)
    post = read_responses(post_csv)

    chs_pre = _index_by_participant(pre, "CHS", "pre")
    chs_post = _index_by_participant(post, "CHS", "post")
    if not chs_pre or not chs_post:
        raise ParseError("both files must contain CHS rows (pre and post)")
    missing_in_post = sorted(set(chs_pre) - set(chs_post))
    missing_in_pre = sorted(set(chs_post) - set(chs_pre))
    if missing_in_post or missing_in_pre:
        details = []
        if missing_in_pre:
            details.append(f"missing in pre file: {', '.join(missing_in_pre)}")
        if missing_in_post:
            details.append(f"missing in post file: {', '.join(missing_in_post)}")
        raise ParticipantMismatch("; ".join(details))

    ids = sorted(chs_pre)
    pre_scores = [score_chs(list(chs_pre[pid])) for pid in ids]
    post_scores = [score_chs(list(chs_post[pid])) for pid in ids]

    def column(scores, attr):
        return [getattr(s, attr) for s in scores]

    chs_paired = {
        name: paired_t(column(pre_scores, name), column(post_scores, name))
        for name in ("total", "agency", "pathways")
    }
    chs_pre_desc = {name: _descriptives(column(pre_scores, name)) for name in ("total", "agency", "pathways")}
    chs_post_desc = {name: _descriptives(column(post_scores, name)) for name in ("total", "agency", "pathways")}

    tssf_rows = _index_by_participant(post, "TSSF", "post")
    tssf_scores = [score_tssf(list(items)) for _, items in sorted(tssf_rows.items())]
    tssf_alpha = None
    if len(tssf_rows) >= 2:
        tssf_alpha = cronbach_alpha([list(items) for _, items in sorted(tssf_rows.items())])

    umux_rows = _index_by_participant(post, "UMUX", "post")
    umux_scores = [score_umux_lite(list(items)) for _, items in sorted(umux_rows.items())]

    boxplots = {
        "chs_total_pre": _boxplot(column(pre_scores, "total")),
        "chs_total_post": _boxplot(column(post_scores, "total")),
        "chs_agency_pre": _boxplot(column(pre_scores, "agency")),
        "chs_agency_post": _boxplot(column(post_scores, "agency")),
        "chs_pathways_pre": _boxplot(column(pre_scores, "pathways")),
        "chs_pathways_post": _boxplot(column(post_scores, "pathways")),
    }
    if tssf_scores:
        boxplots["tssf_post"] = _boxplot(tssf_scores)
    if umux_scores:
        boxplots["umux_post"] = _boxplot(umux_scores)

    return AnalysisReport(
        participants=ids,
        chs_pre=chs_pre_desc,
        chs_post=chs_post_desc,
        chs_paired=chs_paired,
        tssf=_descriptives(tssf_scores),
        tssf_alpha=tssf_alpha,
        umux=_descriptives(umux_scores),
        boxplots=boxplots,
    )
