from xmrange.cli import main
from xmrange.oracle import load_workload


def test_generate_then_verify(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    assert main(["generate", "--n", "200", "--seed", "4", "--out", str(wl), "--ops", "300",
                 "--universe", "1000", "--selectivity", "0.05"]) == 0
    assert len(load_workload(wl).ops) == 500
    assert main(["run", "--workload", str(wl), "--block-size", "8", "--verify",
                 "--audit-every", "50"]) == 0
    out = capsys.readouterr().out
    assert "PASS ops=500 queries=30" in out


def test_plain_run_reports_io(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    main(["generate", "--n", "100", "--dist", "clustered", "--out", str(wl), "--ops", "50"])
    assert main(["run", "--workload", str(wl), "--block-size", "16", "--mem-blocks", "12"]) == 0
    out = capsys.readouterr().out
    assert "build reads=" in out and "ops reads=" in out


def test_scaling_writes_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["scaling", "--grid", "2^9;16", "--queries", "5", "--updates", "4",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "n,b,opclass,median_io,mean_io,k_mean,fit_term,fit_kappa"
    assert rows[-1].startswith("512,16,update,")
    main(["scaling", "--grid", "2^9;16", "--queries", "5"])
    assert capsys.readouterr().out.count("512,16,query") == 3


def test_audit_single_structure(capsys):
    assert main(["audit", "--structure", "ladder", "--block-size", "8"]) == 0
    assert capsys.readouterr().out.startswith("ladder: ok")


def test_kernels_command(capsys):
    assert main(["kernels", "--n", "500", "--repeat", "1"]) == 0
    assert "filter_bounds" in capsys.readouterr().out
