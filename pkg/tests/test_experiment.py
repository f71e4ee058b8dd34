import numpy as np
import pytest

from enroute.cli import main
from enroute.errors import ConfigError
from enroute.experiment import (
    CSV_COLUMNS,
    ExperimentConfig,
    aggregate,
    dump_config,
    emit_csv,
    format_csv,
    load_config,
    parse_config,
    run_lossless,
    run_lossy,
)

SMALL = dict(node_count=12, trials=2, epochs=10, grid_size=120, extent=120.0, radius=40.0)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(schemes=("haar", "lifting53"), steps=(1.0, 2.5), radio="fixed", trials=3)
    assert parse_config(dump_config(cfg)) == cfg
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nnode_count = 20   # nodes\nschemes = haar, tklt\n")
    got = load_config(p)
    assert got.node_count == 20 and got.schemes == ("haar", "tklt")


def test_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2") as err:
        parse_config("trials = 3\nbogus = 1\n")
    assert "bogus" in str(err.value) and err.value.line == 2
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("trials three")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("trials = three")
    with pytest.raises(ConfigError):
        parse_config("trials = 0")
    with pytest.raises(ConfigError):
        parse_config("schemes = nope")


def test_empty_table_header_only(tmp_path):
    p = tmp_path / "e.csv"
    emit_csv([], p)
    assert p.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_identity_ratio_zero_and_aggregates():
    rows = run_lossless(ExperimentConfig(schemes=("identity", "haar"), **SMALL))
    assert len(rows) == 4
    for r in rows:
        if r.scheme == "identity":
            assert r.ratio == pytest.approx(0.0, abs=1e-12)
    agg = aggregate(rows)
    haar = [r.ratio for r in rows if r.scheme == "haar"]
    key = ("haar", "variable", "high", 1.0)
    assert agg[key]["ratio_mean"] == pytest.approx(np.mean(haar))
    assert agg[key]["trials"] == 2


def test_csv_deterministic():
    cfg = ExperimentConfig(schemes=("haar-broadcast",), radio="fixed", **SMALL)
    assert format_csv(run_lossless(cfg)) == format_csv(run_lossless(cfg))


def test_lossy_cost_decreases_with_step():
    cfg = ExperimentConfig(schemes=("haar",), steps=(64.0, 1.0, 8.0), **SMALL)
    rows = run_lossy(cfg)
    for trial in range(2):
        costs = [r.C_t for r in rows if r.trial == trial]
        steps = [r.step for r in rows if r.trial == trial]
        assert steps == [1.0, 8.0, 64.0]
        assert all(a > b for a, b in zip(costs, costs[1:]))


def test_lossy_fine_step_high_snr():
    cfg = ExperimentConfig(schemes=("haar",), steps=(5.0,), **SMALL)
    assert all(r.snr_db > 40 for r in run_lossy(cfg))


def test_cli(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("\n".join(f"{k} = {v}" for k, v in SMALL.items()) + "\n")
    out = tmp_path / "r.csv"
    assert main(["lossless", "--config", str(cfg), "--scheme", "haar,identity", "--trials", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS) and len(lines) == 3
    net = tmp_path / "n.json"
    assert main(["gen-net", "--nodes", "5", "--out", str(net)]) == 0
    assert '"parent"' in net.read_text()
    assert main(["verify"]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert main(["lossless", "--config", str(bad)]) != 0
    assert "colour" in capsys.readouterr().err
