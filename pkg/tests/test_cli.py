import json
import subprocess
import sys

import pandas as pd
import pytest

from supplyrisk.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from supplyrisk.io import write_dataset
from supplyrisk.synth import toy_dataset


@pytest.fixture
def toy_dir(tmp_path):
    d = tmp_path / "toy"
    write_dataset(toy_dataset(), d)
    return d


def _csv(path):
    return pd.read_csv(path, comment="#")


def test_validate_prints_counts(toy_dir, capsys):
    assert main(["validate", "--data", str(toy_dir)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["n_firms"] == 6 and report["n_loans"] == 3


def test_fsri_of_the_toy(toy_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["fsri", "--data", str(toy_dir), "--out", str(out)]) == EXIT_OK
    df = _csv(out / "fsri_rank.csv")
    assert df.loc[df.firm == 5, "FSRI"].item() == 0.15
    assert df.loc[df.firm == 5, "FSRI_indir"].item() == pytest.approx(0.1)


def test_esri_preset(tmp_path):
    assert main(["esri", "--preset", "toy", "--out", str(tmp_path)]) == EXIT_OK
    assert len(_csv(tmp_path / "esri.csv")) == 6


def test_zero_scenarios_is_a_usage_error(toy_dir, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["stress", "--data", str(toy_dir), "--n", "0", "--out", str(tmp_path)])
    assert info.value.code == EXIT_USAGE
    assert "must be >= 1" in capsys.readouterr().err


def test_bad_quantile_is_a_configuration_error(toy_dir, tmp_path):
    assert main(["stress", "--data", str(toy_dir), "--q", "1", "--out", str(tmp_path)]) \
        == EXIT_USAGE


def test_no_data_source(tmp_path):
    assert main(["fsri", "--out", str(tmp_path)]) == EXIT_USAGE


def test_broken_data_exits_two(toy_dir, tmp_path, capsys):
    (toy_dir / "banks.csv").write_text("bank_id,equity\n0,5\n1,x\n")
    assert main(["fsri", "--data", str(toy_dir), "--out", str(tmp_path)]) == EXIT_DATA
    assert "banks.csv:3 [equity]" in capsys.readouterr().err


def test_pd_adjust_feeds_stress(toy_dir, tmp_path):
    out = tmp_path / "out"
    args = ["--data", str(toy_dir), "--out", str(out)]
    assert main(["pd-adjust"] + args) == EXIT_OK
    adj = _csv(out / "adjusted_pd.csv")
    # the failure of a, e or f each brings d down
    assert adj.loc[3, "critical"] == "0 4 5"
    assert adj.loc[3, "q"] == pytest.approx(1 - 0.99 ** 4)
    assert main(["stress", "--n", "200", "--seed", "3", "--pd", str(out / "adjusted_pd.csv")]
                + args) == EXIT_OK
    risk = _csv(out / "bank_risk.csv")
    assert risk["bank"].tolist()[-2:] == ["system", "mean"]
    assert risk["EL_pd"].notna().any()
    hist = _csv(out / "loss_histograms.csv")
    assert set(hist.series) >= {"idiosyncratic_direct", "pd_adjusted_adjusted"}


def test_report_is_reproducible(tmp_path):
    args = ["report", "--preset", "toy", "--n", "100", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("fsri_rank", "bank_risk", "loss_histograms", "adjusted_pd"):
        a = [l for l in (tmp_path / "a" / f"{name}.csv").read_text().splitlines()
             if not l.startswith("# created=")]
        b = [l for l in (tmp_path / "b" / f"{name}.csv").read_text().splitlines()
             if not l.startswith("# created=")]
        assert a == b


def test_synth_writes_a_runnable_directory(tmp_path):
    out = tmp_path / "syn"
    assert main(["synth", "--preset", "small", "--n-firms", "80", "--out", str(out)]) == EXIT_OK
    assert main(["validate", "--config", str(out / "run.cfg")]) == EXIT_OK


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "supplyrisk.cli", "esri", "--preset", "toy",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    bad = subprocess.run([sys.executable, "-m", "supplyrisk.cli", "nonsense"],
                         capture_output=True, text=True)
    assert bad.returncode == EXIT_USAGE
