"""Run and search reports, and their human / jsonl / csv renderings.

Every rendering is byte-stable for identical inputs: fixed column order, fixed
float formatting, no timestamps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, TextIO

CSV_COLUMNS = [
    "scenario_id",
    "protocol",
    "delta_r_ps",
    "strategy",
    "distance_correctness",
    "link_correctness",
    "availability",
    "violation",
    "decider",
    "subject",
    "actual_distance_m",
    "chain_length",
    "measured_threshold_ps",
    "analytic_target_ps",
]

FORMATS = ("human", "jsonl", "csv")


def _fmt_float(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6f}"


def _verdict_word(v) -> str:
    if not v.applicable:
        return "n/a"
    return "holds" if v.holds else "violated"


@dataclass
class ViolationRow:
    scenario_id: str
    protocol: str
    delta_r_ps: Optional[int]
    strategy: str
    kind: str
    decider: Optional[str]
    subject: Optional[str]
    actual_distance_m: float
    chain_length: Optional[int]
    window: Optional[tuple[int, int]] = None


@dataclass
class ThresholdRow:
    scenario_id: str
    protocol: str
    strategy: str
    measured_threshold_ps: int
    analytic_target_ps: int
    last_attack_ps: Optional[int] = None
    probes: int = 0


@dataclass
class Report:
    scenario_id: str
    protocol: str
    delta_r_ps: Optional[int] = None
    strategy: str = ""
    decisions: list[dict] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    violations: list[ViolationRow] = field(default_factory=list)
    thresholds: list[ThresholdRow] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    trace_digest: Optional[str] = None
    notes: list[str] = field(default_factory=list)
    seed: Optional[int] = None

    @classmethod
    def from_run(cls, scenario, trace, verdicts: dict) -> "Report":
        adv = scenario.adversary
        delta_r = adv.delta_r if adv is not None else None
        strategy = adv.strategy.label if adv is not None else ""
        proto = scenario.protocol.protocol.value
        decisions = []
        for d in trace.decisions:
            m = d.measured
            decisions.append({
                "t": d.t_decided, "decider": d.decider, "subject": d.subject, "verdict": d.verdict.value,
                "reason": m.reason, "elapsed_ps": m.elapsed_ps, "bound_ps": m.bound_ps,
                "d_tof_m": m.d_tof_m, "d_loc_m": m.d_loc_m, "evidence": list(d.evidence),
            })
        rows = []
        for name, v in verdicts.items():
            for viol in v.violations:
                dec = viol.decision
                rows.append(ViolationRow(
                    scenario.name, proto, delta_r, strategy, viol.kind.value,
                    dec.decider if dec else None, dec.subject if dec else None,
                    viol.actual_distance_m, viol.chain_length, viol.window,
                ))
        accepts = sum(1 for d in trace.decisions if d.accepted)
        avail = verdicts.get("availability")
        summary = {
            "events": len(trace),
            "transmissions": len(trace.transmissions),
            "deliveries": len(trace.deliveries),
            "decisions": len(decisions),
            "accepts": accepts,
            "rejects": len(decisions) - accepts,
            "violations": len(rows),
            "precondition_unmet": len(avail.unmet) if avail else 0,
        }
        notes = ["availability: window-based reconstruction; precondition-unmet sessions are not violations"]
        return cls(scenario.name, proto, delta_r, strategy, decisions, verdicts, rows, [], summary,
                   trace.digest(), notes, scenario.seed)

    @property
    def all_hold(self) -> bool:
        return all(v.holds for v in self.verdicts.values()) and not self.violations


def _verdict_record(v) -> dict:
    return {
        "property": v.property, "applicable": v.applicable, "holds": v.holds,
        "violations": len(v.violations), "precondition_unmet_sessions": list(v.unmet),
        "stats": {k: v.stats[k] for k in sorted(v.stats)},
    }


def _csv_text(r: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    words = {name: _verdict_word(v) for name, v in r.verdicts.items()}
    for row in r.violations:
        w.writerow([
            row.scenario_id, row.protocol, "inf" if row.delta_r_ps is None else row.delta_r_ps, row.strategy,
            words.get("distance_correctness", ""), words.get("link_correctness", ""),
            words.get("availability", ""), row.kind, row.decider or "", row.subject or "",
            _fmt_float(row.actual_distance_m), "" if row.chain_length is None else row.chain_length, "", "",
        ])
    for t in r.thresholds:
        w.writerow([
            t.scenario_id, t.protocol, "", t.strategy, "", "", "", "", "", "", "", "",
            t.measured_threshold_ps, t.analytic_target_ps,
        ])
    return buf.getvalue()


def _jsonl_text(r: Report) -> str:
    sections = [
        {"section": "summary", "scenario_id": r.scenario_id, "protocol": r.protocol,
         "delta_r_ps": r.delta_r_ps, "strategy": r.strategy, "seed": r.seed, "trace_sha256": r.trace_digest,
         **{k: r.summary[k] for k in sorted(r.summary)}},
        {"section": "decisions", "items": r.decisions},
        {"section": "verdicts", "items": [_verdict_record(v) for v in r.verdicts.values()]},
        {"section": "violations", "items": [
            {"scenario_id": v.scenario_id, "kind": v.kind, "decider": v.decider, "subject": v.subject,
             "actual_distance_m": v.actual_distance_m, "chain_length": v.chain_length,
             "window": list(v.window) if v.window else None, "delta_r_ps": v.delta_r_ps,
             "strategy": v.strategy}
            for v in r.violations]},
    ]
    if r.thresholds:
        sections.append({"section": "thresholds", "items": [
            {"scenario_id": t.scenario_id, "protocol": t.protocol, "strategy": t.strategy,
             "measured_threshold_ps": t.measured_threshold_ps, "analytic_target_ps": t.analytic_target_ps,
             "last_attack_ps": t.last_attack_ps, "probes": t.probes}
            for t in r.thresholds]})
    if r.notes:
        sections.append({"section": "notes", "items": list(r.notes)})
    return "".join(json.dumps(s) + "\n" for s in sections)


def _human_text(r: Report) -> str:
    lines = [f"scenario   {r.scenario_id}", f"protocol   {r.protocol}"]
    if r.strategy:
        dr = "inf" if r.delta_r_ps is None else f"{r.delta_r_ps} ps"
        lines.append(f"adversary  {r.strategy}  delta_r={dr}")
    if r.summary:
        lines.append("summary    " + "  ".join(f"{k}={r.summary[k]}" for k in sorted(r.summary)))
    if r.decisions:
        lines.append("")
        lines.append(f"{'t_ps':>16} {'decider':<8} {'subject':<8} {'verdict':<7} {'reason':<14} "
                     f"{'elapsed_ps':>14} {'bound_ps':>14}")
        for d in r.decisions:
            el = "" if d["elapsed_ps"] is None else d["elapsed_ps"]
            bd = "" if d["bound_ps"] is None else d["bound_ps"]
            lines.append(f"{d['t']:>16} {d['decider']:<8} {d['subject']:<8} {d['verdict']:<7} "
                         f"{d['reason']:<14} {el!s:>14} {bd!s:>14}")
    if r.verdicts:
        lines.append("")
        for name, v in r.verdicts.items():
            extra = f"  ({len(v.unmet)} session(s) precondition-unmet)" if v.unmet else ""
            lines.append(f"{name:<22} {_verdict_word(v):<9} violations={len(v.violations)}{extra}")
    if r.violations:
        lines.append("")
        for v in r.violations:
            lines.append(f"VIOLATION {v.kind:<21} {v.decider or '-'}->{v.subject or '-'} "
                         f"d={v.actual_distance_m:.6f} m chain={v.chain_length if v.chain_length else '-'} "
                         f"[{v.scenario_id}]")
    if r.thresholds:
        lines.append("")
        lines.append(f"{'protocol':<8} {'measured_threshold_ps':>22} {'analytic_target_ps':>19} strategy")
        for t in r.thresholds:
            lines.append(f"{t.protocol:<8} {t.measured_threshold_ps:>22} {t.analytic_target_ps:>19} {t.strategy}")
    return "\n".join(lines) + "\n"


def render_report(r: Report, fmt: str) -> str:
    if fmt == "csv":
        return _csv_text(r)
    if fmt == "jsonl":
        return _jsonl_text(r)
    if fmt == "human":
        return _human_text(r)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(r: Report, fmt: str, sink: TextIO) -> None:
    sink.write(render_report(r, fmt))
    sink.flush()
