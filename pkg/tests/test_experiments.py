import pytest

from selfsched import PORTFOLIO
from selfsched.experiments import (
    SUMMARY_HEADER,
    Campaign,
    ConfigError,
    dump_config,
    emit_selection_summary,
    parse_config,
    run_campaign,
    write_selection_summary,
)
from selfsched.selection import SelectionLogEntry, read_selection_log
from selfsched.schedulers import SchedulerKind

MINIMAL = """
[workload.main]
kind = constant_imbalance
n = 200
t = 8
cost = 1.0
amplitude = 1.5
seed = 3

[system.node]
p = 4
h = 0.02

[campaign]
methods = static, gss, exhaustivesel
repetitions = 2
seed = 7
"""


def write_config(tmp_path, text=MINIMAL, name="campaign.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_minimal_config_defaults(tmp_path):
    campaign = parse_config(write_config(tmp_path))
    assert list(campaign.workloads) == ["main"]
    assert campaign.workloads["main"].n == 200
    assert campaign.systems["node"].p == 4
    assert campaign.methods == ("static", "gss", "exhaustivesel")
    assert campaign.chunk_modes == ("default",)
    assert campaign.rewards == ("lt",)
    assert campaign.repetitions == 2
    assert campaign.rl.alpha == 0.5  # omitted -> default
    assert campaign.rl.gamma == 0.5
    assert campaign.rl.alpha_decay == 0.05
    assert (campaign.rl.r_pos, campaign.rl.r_neutral, campaign.rl.r_neg) == (0.01, -2.0, -4.0)


def test_config_round_trip_through_dump(tmp_path):
    campaign = parse_config(write_config(tmp_path))
    dumped = tmp_path / "dumped.cfg"
    dump_config(campaign, dumped)
    assert parse_config(dumped) == campaign


def test_config_rejects_alpha_out_of_range(tmp_path):
    text = MINIMAL + "\n[rl]\nalpha = 1.5\n"
    with pytest.raises(ConfigError, match=r"line \d+: alpha"):
        parse_config(write_config(tmp_path, text))


def test_config_rejects_unknown_key_with_line(tmp_path):
    text = MINIMAL.replace("h = 0.02", "h = 0.02\nfrequency = 3")
    with pytest.raises(ConfigError, match=r"line 13: unknown key 'frequency'"):
        parse_config(write_config(tmp_path, text))


def test_config_rejects_unknown_method_and_mode(tmp_path):
    with pytest.raises(ConfigError, match="unknown method"):
        parse_config(write_config(tmp_path, MINIMAL.replace("gss,", "turbo,")))
    with pytest.raises(ConfigError, match="unknown chunk mode"):
        parse_config(write_config(tmp_path, MINIMAL + "\nchunk_modes = golden\n"))


def test_config_requires_sections(tmp_path):
    with pytest.raises(ConfigError, match="workload"):
        parse_config(write_config(tmp_path, "[system.s]\np = 2\n[campaign]\nmethods = static\n"))
    with pytest.raises(ConfigError, match=r"\[campaign\]"):
        parse_config(write_config(tmp_path, "[workload.w]\nkind = uniform\nn = 4\nt = 1\n[system.s]\np = 2\n"))


def test_cell_count_is_factor_product():
    from selfsched.core import SystemModel
    from selfsched.workloads import WorkloadSpec

    campaign = Campaign(
        workloads={"a": WorkloadSpec("uniform", n=10, t=2), "b": WorkloadSpec("uniform", n=20, t=2)},
        systems={"s": SystemModel(p=2)},
        methods=("static", "gss", "qlearn"),
        chunk_modes=("default", "expchunk"),
        rewards=("lt", "lib"),
    )
    cells = campaign.cells()
    # per workload: static 2 modes + gss 2 modes + qlearn 2 modes x 2 rewards
    assert len(cells) == 2 * 1 * (2 + 2 + 4)
    assert len(set(cells)) == len(cells)


def test_run_campaign_outputs_and_oracle_row(tmp_path):
    text = MINIMAL.replace("methods = static, gss, exhaustivesel", "methods = static, gss, oracle")
    campaign = parse_config(write_config(tmp_path, text))
    outdir = tmp_path / "out"
    rows = run_campaign(campaign, outdir)
    assert (outdir / "summary.csv").exists()
    header = (outdir / "summary.csv").read_text().splitlines()[0]
    assert header == SUMMARY_HEADER
    by_method = {r["method"]: r for r in rows}
    assert by_method["oracle"]["degradation_pct"] == pytest.approx(0.0, abs=1e-12)
    # zero noise: no method can beat the oracle
    assert all(r["degradation_pct"] >= -1e-9 for r in rows)
    cell = outdir / "main__node__gss__default"
    assert (cell / "selection.csv").exists()
    assert (cell / "selection_rep1.csv").exists()
    entries = read_selection_log(cell / "selection.csv")
    assert len(entries) == 8
    assert all(e.kind is SchedulerKind.GSS for e in entries)


def test_run_campaign_reproducible_bytes(tmp_path):
    config = write_config(tmp_path, MINIMAL + "\n[system.noisy]\np = 4\nh = 0.02\nnoise_sigma = 0.05\n")
    campaign = parse_config(config)
    run_campaign(campaign, tmp_path / "a")
    run_campaign(campaign, tmp_path / "b")
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_run_campaign_constant_kind_row_at_desk_scale(tmp_path):
    text = """
[workload.main]
kind = constant_imbalance
n = 150
t = 4
amplitude = 2.0

[system.node]
p = 4
h = 0.01

[campaign]
methods = static, ss, gss, auto_llvm, tss, static_steal, mfac2, awf_b, awf_c, awf_d, awf_e, maf
repetitions = 1
"""
    campaign = parse_config(write_config(tmp_path, text))
    rows = run_campaign(campaign, tmp_path / "out")
    assert len(rows) == 12
    assert {r["method"] for r in rows} == {k.value for k in PORTFOLIO}
    assert all(r["degradation_pct"] >= -1e-9 for r in rows)


def test_record_chunks_writes_trace(tmp_path):
    text = MINIMAL + "\nrecord_chunks = true\n"
    campaign = parse_config(write_config(tmp_path, text))
    run_campaign(campaign, tmp_path / "out")
    assert (tmp_path / "out" / "main__node__gss__default" / "chunks.csv").exists()


def test_emit_selection_summary_shares():
    entries = [
        SelectionLogEntry(t, "constant", SchedulerKind.GSS, 1, "stable", 1.0, 0.0)
        for t in range(50)
    ]
    summary = emit_selection_summary(entries)
    assert summary["constant"]["shares"] == {"gss": 1.0}
    assert summary["constant"]["learning_share"] == 0.0

    mixed = [
        SelectionLogEntry(t, "agent", SchedulerKind.SS if t < 499 else SchedulerKind.MAF,
                          1, "learning" if t < 144 else "exploiting", 1.0, 0.0)
        for t in range(500)
    ]
    summary = emit_selection_summary(mixed)
    shares = summary["agent"]["shares"]
    assert shares["ss"] == pytest.approx(499 / 500)
    assert shares["others"] == pytest.approx(1 / 500)  # below the 2% fold line
    assert sum(shares.values()) == pytest.approx(1.0)
    assert summary["agent"]["learning_share"] == pytest.approx(0.288)


def test_write_selection_summary(tmp_path):
    entries = [
        SelectionLogEntry(t, "m", SchedulerKind.TSS, 1, "stable", 1.0, 0.0) for t in range(10)
    ]
    out = tmp_path / "sum.csv"
    write_selection_summary(emit_selection_summary(entries), out)
    lines = out.read_text().splitlines()
    assert lines[0] == "method,kind,share"
    assert "m,tss,1.000000" in lines
    assert "m,(learning),0.000000" in lines
