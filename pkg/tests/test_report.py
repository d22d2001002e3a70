import csv
import io
import json

from ndsim.report import CSV_COLUMNS, Report, ThresholdRow, render_report
from ndsim.scenario import load_scenario, run_scenario

from test_scenario import SCENARIOS


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_empty_report_csv_is_header_only():
    _, rep = run_scenario(load_scenario(SCENARIOS / "bt_happy.toml"))
    assert _rows(render_report(rep, "csv")) == [CSV_COLUMNS]


def test_violation_row():
    _, rep = run_scenario(load_scenario(SCENARIOS / "bt_blocked_relay.toml"))
    header, row = _rows(render_report(rep, "csv"))
    rec = dict(zip(header, row))
    assert rec["violation"] == "link_correctness"
    assert rec["link_correctness"] == "violated" and rec["distance_correctness"] == "holds"
    assert rec["delta_r_ps"] == "100000" and rec["strategy"] == "min_delay"
    assert rec["chain_length"] == "2" and rec["actual_distance_m"] == "50.000000"


def test_threshold_row():
    rep = Report("s", "BT", thresholds=[ThresholdRow("s", "BT", "near_a/min_delay/both_down", 333_600, 333_564)])
    header, row = _rows(render_report(rep, "csv"))
    rec = dict(zip(header, row))
    assert rec["measured_threshold_ps"] == "333600" and rec["analytic_target_ps"] == "333564"


def test_jsonl_sections():
    _, rep = run_scenario(load_scenario(SCENARIOS / "btl_nlos.toml"))
    recs = [json.loads(x) for x in render_report(rep, "jsonl").splitlines()]
    assert [r["section"] for r in recs][:4] == ["summary", "decisions", "verdicts", "violations"]
    assert recs[3]["items"][0]["kind"] == "availability"


def test_byte_stable():
    s = load_scenario(SCENARIOS / "bt_ultrasound_wormhole.toml")
    outs = {fmt: {render_report(run_scenario(s)[1], fmt) for _ in range(3)} for fmt in ("csv", "jsonl", "human")}
    assert all(len(v) == 1 for v in outs.values())
