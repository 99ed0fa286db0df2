import csv
import io
import json

import pytest

from capshare import cli, experiments
from capshare.errors import StageError
from capshare.experiments import CSV_HEADER, SKIPPED, SimParams, analyze, builtin_tables
from capshare.model import ServiceLength, SystemConfig
from conftest import two_class


@pytest.fixture
def row1_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"channels": 3, "classes": [
        {"arrival_rate": 1.0, "channels_required": 2, "service": {"type": "exponential", "mean": 1.0}}]}))
    return str(path)


def test_approx_command(row1_file, capsys):
    assert cli.main(["approx", "--config", row1_file]) == 0
    assert "approximate loss = 0.3259" in capsys.readouterr().out


def test_exact_command_with_dump(row1_file, capsys):
    assert cli.main(["exact", "--config", row1_file, "--dump-chain"]) == 0
    out = capsys.readouterr().out
    assert "exact loss = 0.2500" in out and "states = 3" in out and "idle=0" in out


def test_simulate_command(row1_file, capsys):
    assert cli.main(["simulate", "--config", row1_file, "--arrivals", "20000", "--replications", "3",
                     "--seed", "1", "--check"]) == 0
    out = capsys.readouterr().out
    assert "simulated loss" in out and "invariant violations = 0" in out


def test_simulate_trace(row1_file, tmp_path, capsys):
    trace = tmp_path / "trace.txt"
    assert cli.main(["simulate", "--config", row1_file, "--arrivals", "1000", "--replications", "2",
                     "--trace", str(trace)]) == 0
    assert trace.read_text().count("\n") > 1000


def test_analyze_command(row1_file, capsys):
    assert cli.main(["analyze", "--config", row1_file, "--skip-exact"]) == 0
    out = capsys.readouterr().out
    assert "exact = skipped" in out and "approx = 0.3259" in out


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"channels": 2, "classes": [{"arrival_rate": 1, "channels_required": 0, '
                    '"service": {"type": "exponential", "mean": 1}}]}')
    assert cli.main(["approx", "--config", str(path)]) == 2
    assert "NonPositiveChannelsRequired" in capsys.readouterr().err
    assert cli.main(["approx", "--config", str(tmp_path / "missing.json")]) == 2


def test_analyze_examples():
    row = analyze(two_class(2, (1, 2), (1, 9), (1 / 10, 1 / 20)))
    assert round(row.exact, 4) == 0.3187 and round(row.approx.blocking, 4) == 0.3139
    row = analyze(SystemConfig.single(7, 2.0, 2, ServiceLength.exponential(1.0)), run_exact=False)
    assert row.exact == SKIPPED and round(row.approx.blocking, 4) == 0.1444
    assert row.sim == SKIPPED


def test_analyze_tags_stage():
    with pytest.raises(StageError) as err:
        analyze(SystemConfig.single(3, 1.0, 2, ServiceLength.exponential(1.0)), run_exact=False,
                run_sim=True, sim_params=SimParams(arrivals=10))
    assert err.value.stage == "sim"


def test_tables_markdown_skip_sim(capsys):
    code = cli.main(["tables", "--format", "md", "--skip-sim"])
    out = capsys.readouterr().out
    assert out.count("## Table") == 4
    row10 = next(line for line in out.splitlines() if line.startswith("| 10 |"))
    assert "| 0.6875 |" in row10 and "| 0.6075 |" in row10
    # exit status follows the tolerance checks; printed values that cannot be reproduced make it 1
    failures = [f for rep in experiments.reproduce(run_sim=False) for f in rep.failures()]
    assert code == (1 if failures else 0)


def test_tables_csv(tmp_path):
    cli.main(["tables", "--format", "csv", "--skip-sim", "--out", str(tmp_path)])
    for t in (1, 2, 3, 4):
        raw = (tmp_path / f"table{t}.csv").read_bytes()
        assert b"\r" not in raw
        rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
        assert rows[0] == CSV_HEADER
        assert len(rows) - 1 == len(builtin_tables()[t])
        assert all(r[7] == SKIPPED for r in rows[1:])


def test_exit_status_zero_when_all_checks_pass(monkeypatch, capsys):
    good = {1: [r for r in builtin_tables()[1] if r.id in (2, 3, 5)]}
    monkeypatch.setattr(experiments, "builtin_tables", lambda row3_channels_required=1: good)
    assert cli.main(["tables", "--skip-sim"]) == 0
    assert "0 tolerance violation(s)" in capsys.readouterr().err


def test_table4_row3_switch():
    t4 = {r.id: r for r in builtin_tables(row3_channels_required=2)[4]}
    assert t4[3].config.classes[0].channels_required == 2 and t4[3].excluded
    t4 = {r.id: r for r in builtin_tables()[4]}
    assert t4[3].config.classes[0].channels_required == 1


def test_report_flags_out_of_tolerance_rows():
    rep = experiments.TableReport(1, [experiments.evaluate_row(r, False, SimParams()) for r in builtin_tables()[1]],
                                  False)
    flagged = {r.id for r in rep.rows if r.flagged}
    ok = {r.id for r in rep.rows if not r.flagged}
    assert {2, 3, 5, 7, 9} <= ok
    text = experiments.render_markdown(rep)
    assert text.count("FLAG") == len(flagged)


@pytest.mark.parametrize("table, row_id", [(1, 6), (4, 7)])
def test_alternative_inputs_reproduce_printed_values(table, row_id):
    from capshare.approx import approximate_loss
    from capshare.exact import loss_probability_exact

    row = next(r for r in builtin_tables()[table] if r.id == row_id)
    assert abs(loss_probability_exact(row.alternative) - row.exact_paper) <= 5e-4
    assert abs(approximate_loss(row.alternative).blocking - row.approx_paper) <= 5e-4
