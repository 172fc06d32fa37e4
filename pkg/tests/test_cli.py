"""Command line behavior: exit codes, report contents, file outputs."""

import csv
import math

import numpy as np
import pytest

from mcoutput import Ar1Spec, ChainMatrix, RngStream, generate_ar1, sqrt_batch_size
from mcoutput.cli import (
    dumps_report,
    loads_report,
    main,
    read_chain_csv,
    write_chain_csv,
)


@pytest.fixture(scope="module")
def ar1_csv(tmp_path_factory):
    """A 100k-row AR(1) chain at rho = 0.5 stored the way analyze reads it."""
    path = tmp_path_factory.mktemp("chains") / "ar1.csv"
    chain = generate_ar1(Ar1Spec(rho=0.5), 100_000, RngStream(83))
    write_chain_csv(chain, path)
    return path


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_analyze_long_chain_terminates(ar1_csv, tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["analyze", str(ar1_csv), "--out", str(out)]) == 0
    report = loads_report(out.read_text())
    n = report["input"]["n"]
    assert n == 100_000
    # iid-equivalent fraction for AR(1) at rho = .5 is (1-rho)/(1+rho) = 1/3
    assert 0.28 < report["ess"] / n < 0.39
    assert report["terminated"] is True
    assert report["cutoff_rounded"] == 6146
    assert report["config"]["batch_size"] == 46
    assert report["config"]["estimator"] == "batch-means"
    assert report["rhat"] == pytest.approx(
        math.sqrt(1.0 + 1.0 / report["ess"]), rel=1e-15
    )
    assert report["region"] is not None
    assert report["region_reason"] is None
    assert len(report["quantiles"]) == 2
    shown = capsys.readouterr().out
    assert "terminated=yes" in shown


def test_analyze_report_is_deterministic_and_roundtrips(ar1_csv, tmp_path):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    main(["analyze", str(ar1_csv), "--out", str(out1)])
    main(["analyze", str(ar1_csv), "--out", str(out2)])
    text = out1.read_text()
    assert text == out2.read_text()
    # parse, re-serialize: 17-digit floats make this byte-stable
    assert dumps_report(loads_report(text)) == text


def test_analyze_short_chain_says_run_longer(tmp_path):
    path = tmp_path / "short.csv"
    write_chain_csv(ChainMatrix(RngStream(5).normal(size=500)), path)
    assert main(["analyze", str(path), "--out-dir", str(tmp_path)]) == 2
    report = loads_report((tmp_path / "short_report.json").read_text())
    assert report["terminated"] is False
    assert report["ess"] < report["n_star"]


def test_analyze_constant_column_is_an_error(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("x,y\n" + "".join(f"{v},1.0\n" for v in range(20)))
    assert main(["analyze", str(path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "'y' is constant" in err


def test_analyze_ragged_row_reports_line(tmp_path, capsys):
    path = tmp_path / "ragged.csv"
    path.write_text("x,y\n1.0,2.0\n3.0\n")
    assert main(["analyze", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_analyze_empty_and_missing_files(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["analyze", str(empty)]) == 1
    assert main(["analyze", str(tmp_path / "nope.csv")]) == 1
    assert main(["analyze", str(tmp_path)]) == 1  # IsADirectoryError path
    capsys.readouterr()


def test_analyze_more_columns_than_rows(tmp_path, capsys):
    path = tmp_path / "wide.csv"
    path.write_text("a,b\n1.0,2.0\n")
    assert main(["analyze", str(path)]) == 1
    assert "more columns" in capsys.readouterr().err


def test_analyze_discard_drops_initial_rows(tmp_path):
    path = tmp_path / "warm.csv"
    write_chain_csv(ChainMatrix(RngStream(7).normal(size=100)), path)
    main(["analyze", str(path), "--discard", "40", "--out-dir", str(tmp_path)])
    report = loads_report((tmp_path / "warm_report.json").read_text())
    assert report["input"]["n"] == 60
    assert report["config"]["discard_first"] == 40


def test_chain_csv_roundtrip_is_exact(tmp_path):
    chain = generate_ar1(Ar1Spec(rho=0.3, dim=2), 64, RngStream(11))
    path = tmp_path / "two.csv"
    write_chain_csv(chain, path)
    back = read_chain_csv(path)
    np.testing.assert_array_equal(back.values, chain.values)
    assert [back.label(i) for i in range(2)] == ["col0", "col1"]


def test_demo_small_run_is_deterministic(tmp_path):
    d1, d2 = tmp_path / "one", tmp_path / "two"
    args = ["demo", "--epsilon", "0.3", "--max-n", "2000"]
    assert main(args + ["--out-dir", str(d1)]) == 0
    assert main(args + ["--out-dir", str(d2)]) == 0
    report = loads_report((d1 / "demo_report.json").read_text())
    assert (d1 / "demo_report.json").read_text() == (d2 / "demo_report.json").read_text()
    assert (d1 / "demo_chain.csv").read_text() == (d2 / "demo_chain.csv").read_text()
    assert report["terminated"] is True
    assert [v["n"] for v in report["verdicts"]] == [209, 2000]
    for name in report["files"].values():
        assert (d1 / name).exists()


def test_demo_cutoff_echo_tracks_epsilon(tmp_path):
    assert main(
        ["demo", "--epsilon", "0.025", "--max-n", "500", "--out-dir", str(tmp_path)]
    ) == 2
    report = loads_report((tmp_path / "demo_report.json").read_text())
    assert report["cutoff_rounded"] == 30116
    assert [v["n"] for v in report["verdicts"]] == [500]
    assert main(["demo", "--max-n", "500", "--out-dir", str(tmp_path)]) == 2
    report = loads_report((tmp_path / "demo_report.json").read_text())
    assert report["cutoff_rounded"] == 7529


def test_demo_chain_reanalysis_reproduces_ess(tmp_path):
    """Feeding the demo's own chain back through analyze with the same
    batch length must reproduce the reported ESS bit for bit."""
    main(["demo", "--epsilon", "0.3", "--max-n", "2000", "--out-dir", str(tmp_path)])
    demo_report = loads_report((tmp_path / "demo_report.json").read_text())
    b = demo_report["asymptotic_covariance"]["batch_size"]
    assert b == sqrt_batch_size(demo_report["n"])
    out = tmp_path / "re.json"
    code = main(
        ["analyze", str(tmp_path / "demo_chain.csv"),
         "--batch-size", str(b), "--out", str(out)]
    )
    assert code in (0, 2)
    re_report = loads_report(out.read_text())
    assert re_report["ess"] == demo_report["ess"]
    assert re_report["asymptotic_covariance"]["matrix"] == (
        demo_report["asymptotic_covariance"]["matrix"]
    )


@pytest.fixture()
def small_two_col(tmp_path):
    path = tmp_path / "pair.csv"
    cross = [[1.0, 0.5], [0.5, 1.0]]
    chain = generate_ar1(
        Ar1Spec(rho=0.4, dim=2, cross_correlation=cross), 400, RngStream(13)
    )
    write_chain_csv(chain, path)
    return path


def test_plotdata_writes_every_kind(small_two_col, tmp_path, capsys):
    expected = {
        "trace": ["pair_trace_col0.csv", "pair_trace_col1.csv"],
        "acf": ["pair_acf_col0.csv", "pair_acf_col1.csv"],
        "ccf": ["pair_ccf_col0_col1.csv"],
        "density": [
            "pair_density_col0.csv", "pair_density_col0_markers.csv",
            "pair_density_col1.csv", "pair_density_col1_markers.csv",
        ],
        "region": ["pair_region.csv"],
    }
    for kind, names in expected.items():
        code = main(
            ["plotdata", str(small_two_col), "--kind", kind,
             "--out-dir", str(tmp_path)]
        )
        assert code == 0
        listed = capsys.readouterr().out.splitlines()
        assert len(listed) == len(names)
        for name in names:
            assert (tmp_path / name).exists()


def test_plotdata_acf_band_is_three_over_root_n(small_two_col, tmp_path):
    main(
        ["plotdata", str(small_two_col), "--kind", "acf", "--lags", "10",
         "--out-dir", str(tmp_path)]
    )
    rows = _read_rows(tmp_path / "pair_acf_col0.csv")
    assert rows[0] == ["lag", "value", "band"]
    assert len(rows) == 12  # header plus lags 0..10
    assert float(rows[1][1]) == 1.0
    assert float(rows[1][2]) == 3.0 / math.sqrt(400.0)


def test_plotdata_region_boundary_file(small_two_col, tmp_path):
    main(
        ["plotdata", str(small_two_col), "--kind", "region",
         "--out-dir", str(tmp_path)]
    )
    rows = _read_rows(tmp_path / "pair_region.csv")
    assert rows[0] == ["kind", "x", "y"]
    kinds = [r[0] for r in rows[1:]]
    assert kinds.count("boundary") == 128
    assert kinds[-1] == "center"


def test_plotdata_usage_errors(small_two_col, tmp_path, capsys):
    assert main(
        ["plotdata", str(small_two_col), "--kind", "spiral",
         "--out-dir", str(tmp_path)]
    ) == 1
    assert "unknown kind" in capsys.readouterr().err
    one_col = tmp_path / "one.csv"
    write_chain_csv(ChainMatrix(RngStream(15).normal(size=64)), one_col)
    assert main(
        ["plotdata", str(one_col), "--kind", "region", "--out-dir", str(tmp_path)]
    ) == 1
    assert "two-column" in capsys.readouterr().err


def test_out_dir_environment_variable(tmp_path, monkeypatch):
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("MCOUTPUT_OUT_DIR", str(env_dir))
    path = tmp_path / "tiny.csv"
    write_chain_csv(ChainMatrix(RngStream(17).normal(size=64)), path)
    assert main(["analyze", str(path)]) == 2
    assert (env_dir / "tiny_report.json").exists()


def test_argparse_exits_are_remapped(capsys):
    assert main(["--version"]) == 0
    assert main([]) == 1
    assert main(["analyze"]) == 1
    assert main(["frobnicate"]) == 1
    capsys.readouterr()
