import json

import pytest

from panelot import fixtures
from panelot.cli import main
from panelot.model import load_instance

from conftest import write_instance_csvs


def _files(tmp_path, instance, stem="inst"):
    agents, quotas = write_instance_csvs(tmp_path, instance, stem)
    return str(agents), str(quotas)


def test_validate_ok(tmp_path, capsys, t1):
    agents, quotas = _files(tmp_path, t1)
    code = main(["validate", "--agents", agents, "--quotas", quotas, "-k", "2"])
    assert code == 0
    assert "every agent appears" in capsys.readouterr().out


def test_validate_structural_exclusion(tmp_path, capsys):
    inst = fixtures.excluded_agent_instance()
    agents, quotas = _files(tmp_path, inst)
    code = main(["validate", "--agents", agents, "--quotas", quotas, "-k", "2"])
    assert code == 1
    assert "STRUCTURAL_EXCLUSION" in capsys.readouterr().err


def test_select_writes_result_json(tmp_path, t1):
    agents, quotas = _files(tmp_path, t1)
    out = tmp_path / "artifacts"
    code = main(
        [
            "--out", str(out),
            "select",
            "--agents", agents,
            "--quotas", quotas,
            "-k", "2",
            "--objective", "goldilocks:1",
        ]
    )
    assert code == 0
    path = next(out.glob("select_*goldilocks*.json"))
    payload = json.loads(path.read_text())
    assert payload["objective"] == "goldilocks:1"
    assert all(abs(v - 0.5) < 1e-9 for v in payload["pi"].values())


def test_leximin_subcommand(tmp_path, e2):
    agents, quotas = _files(tmp_path, e2)
    out = tmp_path / "artifacts"
    code = main(["--out", str(out), "leximin", "--agents", agents, "--quotas", quotas, "-k", "4"])
    assert code == 0
    payload = json.loads(next(out.glob("select_*leximin*.json")).read_text())
    assert payload["objective"] == "leximin"
    assert min(payload["pi"].values()) == pytest.approx(1.0 / 3.0, abs=1e-6)


def test_legacy_subcommand(tmp_path, t1, capsys):
    agents, quotas = _files(tmp_path, t1)
    out = tmp_path / "artifacts"
    code = main(["--out", str(out), "legacy", "--agents", agents, "--quotas", quotas, "-k", "2"])
    assert code == 0
    payload = json.loads(next(out.glob("legacy_*.json")).read_text())
    assert len(payload["members"]) == 2


def test_round_subcommand(tmp_path, t1):
    agents, quotas = _files(tmp_path, t1)
    out = tmp_path / "artifacts"
    main(
        ["--out", str(out), "select", "--agents", agents, "--quotas", quotas, "-k", "2",
         "--objective", "maximin"]
    )
    result_path = next(out.glob("select_*maximin*.json"))
    code = main(
        ["--out", str(out), "round", "--agents", agents, "--quotas", quotas, "-k", "2",
         "--result", str(result_path), "--m", "100", "--runs", "5"]
    )
    assert code == 0
    lottery = next(out.glob("lottery_*.txt"))
    lines = lottery.read_text().strip().split("\n")
    assert len(lines) == 100
    assert lines[0].startswith("1\t")
    sidecar = json.loads((lottery.parent / (lottery.name + ".json")).read_text())
    assert sidecar["m"] == 100
    stats = json.loads(next(out.glob("lottery_*_stats.json")).read_text())
    assert stats["runs"] == 5


def test_manip_mu_subcommand(tmp_path, e1, capsys):
    agents, quotas = _files(tmp_path, e1)
    out = tmp_path / "artifacts"
    code = main(
        ["--out", str(out), "manip", "--agents", agents, "--quotas", quotas, "-k", "3",
         "--objective", "maximin", "--strategy", "mu"]
    )
    assert code == 0
    text = next(out.glob("manip_*.csv")).read_text()
    header, row = text.strip().split("\n")
    assert header == "metric,c,search,value,witness_coalition,witness_vectors,copies"
    assert row.startswith("int,1,mu,0.000000")


def test_manip_mu_with_pool_copies(tmp_path, e1):
    agents, quotas = _files(tmp_path, e1)
    out = tmp_path / "artifacts"
    code = main(
        ["--out", str(out), "manip", "--agents", agents, "--quotas", quotas, "-k", "3",
         "--objective", "maximin", "--strategy", "mu", "--copies", "2"]
    )
    assert code == 0
    text = next(out.glob("manip_*.csv")).read_text()
    row = text.strip().split("\n")[1]
    assert row.startswith("int,1,mu,0.000000")
    assert row.endswith(",2")


def test_manip_exhaustive_subcommand(tmp_path, e1):
    agents, quotas = _files(tmp_path, e1)
    out = tmp_path / "artifacts"
    code = main(
        ["--out", str(out), "manip", "--agents", agents, "--quotas", quotas, "-k", "3",
         "--objective", "maximin", "--strategy", "exhaustive", "--c", "1", "--metric", "ext"]
    )
    assert code == 0
    text = next(out.glob("manip_*_ext.csv")).read_text()
    assert "0.166667" in text


def test_feature_drop_subcommand(tmp_path, e2):
    agents, quotas = _files(tmp_path, e2)
    out = tmp_path / "artifacts"
    code = main(
        ["--out", str(out), "feature-drop", "--agents", agents, "--quotas", quotas, "-k", "4",
         "--max-drop", "1"]
    )
    assert code == 0
    text = next(out.glob("feature_drop_*.csv")).read_text()
    assert text.splitlines()[0] == "drops,objective,min_prob,max_prob,min_opt,max_opt"


def test_gen_lb_round_trips(tmp_path):
    out = tmp_path / "artifacts"
    code = main(
        ["--out", str(out), "gen-lb", "--kind", "thm43", "--n", "72", "--k", "6",
         "--nmin", "12", "--c", "6"]
    )
    assert code == 0
    inst = load_instance(out / "thm43_agents.csv", out / "thm43_quotas.csv", k=6)
    assert inst.n == 72
    payload = json.loads((out / "thm43_misreport.json").read_text())
    assert len(payload["coalition"]) == 6


def test_domain_error_exit_code(tmp_path, capsys):
    agents = tmp_path / "agents.csv"
    quotas = tmp_path / "quotas.csv"
    agents.write_text("id,f\na1,0\na2,0\na3,1\na4,1\n")
    quotas.write_text("feature,value,min,max\nf,0,2,2\nf,1,2,2\n")
    code = main(["validate", "--agents", str(agents), "--quotas", str(quotas), "-k", "3"])
    assert code == 1
    assert "INFEASIBLE_QUOTAS" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["select"])  # missing required arguments
    assert err.value.code == 2
