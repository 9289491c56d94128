import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barriermc import __version__
from barriermc.cli import CSV_HEADER, ConfigError, ExperimentConfig, main


def cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_round_trip_default():
    cfg = ExperimentConfig()
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


@given(
    r=st.floats(-0.1, 0.2),
    sigma=st.floats(0.01, 2.0),
    lam=st.floats(0, 20),
    barrier=st.floats(1, 500),
    seed=st.integers(0, 2**64 - 1),
    ns=st.lists(st.integers(1, 1000), max_size=5),
    beta=st.one_of(st.none(), st.floats(0.01, 2.0)),
)
@settings(max_examples=100, deadline=None)
def test_config_round_trip_bit_exact(r, sigma, lam, barrier, seed, ns, beta):
    cfg = ExperimentConfig(r=r, sigma=sigma, lam=lam, barrier=barrier, seed=seed, ns=ns, beta1_value=beta)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.to_json() == cfg.to_json()


@pytest.mark.parametrize(
    "bad,field",
    [
        ({"sigma": -1.0}, "model parameters"),
        ({"sigma": "high"}, "sigma"),
        ({"kind": "straddle"}, "kind"),
        ({"ns": [5, 0]}, "ns"),
        ({"ns": [5, 2.5]}, "ns"),
        ({"n_paths": 1}, "n_paths"),
        ({"beta1_source": "pinned"}, "beta1_value"),
        ({"mode": "sideways"}, "mode"),
        ({"barrier": 0.0}, "option spec"),
        ({"seed": -3}, "seed"),
        ({"colour": "red"}, "colour"),
        ({"n_paths": True}, "n_paths"),
    ],
)
def test_config_field_errors(bad, field):
    with pytest.raises(ConfigError, match=field):
        ExperimentConfig.from_dict({**ExperimentConfig().to_dict(), **bad})


def test_config_rejects_non_object():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{nope")


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"sigma": -1}))
    code, out, err = cli(["price", "--config", str(p)], capsys)
    assert code == 2 and out == "" and "sigma" in err


def test_precedence_defaults_config_flags(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 11, "n_paths": 500, "barrier": 120.0}))
    code, out, _ = cli(["price", "-q", "--config", str(p), "--seed", "12", "--n", "3"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["seed"] == 12  # flag beats file
    assert doc["config"]["n_paths"] == 500  # file beats default
    assert doc["config"]["barrier"] == 120.0
    assert doc["config"]["sigma"] == 0.3  # default
    assert doc["result"]["n_paths"] == 500 and doc["result"]["n"] == 3
    assert doc["version"] == __version__


def test_empty_n_list_gives_header_only(capsys):
    code, out, _ = cli(["convergence", "-q", "--n", "", "--format", "csv"], capsys)
    assert code == 0
    assert out == ",".join(CSV_HEADER) + "\n"


def test_convergence_csv_schema_and_determinism(tmp_path, capsys):
    args = ["convergence", "-q", "--n", "3,7", "--paths", "5000", "--beta1", "0.5826", "--format", "csv"]
    code, a, _ = cli(args + ["--threads", "1"], capsys)
    _, b, _ = cli(args + ["--threads", "4"], capsys)
    assert code == 0 and a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert [line.split(",")[0] for line in lines[1:]] == ["3", "7"]
    out = tmp_path / "t.csv"
    cli(args + ["--out", str(out)], capsys)
    assert out.read_text() == a
    meta = json.loads((tmp_path / "t.csv.meta.json").read_text())
    assert meta["config"]["ns"] == [3, 7] and meta["version"] == __version__


def test_convergence_pinned_reference(capsys):
    args = ["convergence", "-q", "--n", "5", "--paths", "2000", "--beta1", "0.5826", "--continuous-ref", "13.24",
            "--mode", "discrete_from_continuous"]
    code, out, _ = cli(args, capsys)
    row = json.loads(out)["result"][0]
    assert row["continuous_ref"] == 13.24
    assert row["rel_err_corrected"] == pytest.approx(abs(row["corrected_price"] - row["discrete_price"]) / row["discrete_price"])


def test_correct_command(capsys):
    code, out, _ = cli(["correct", "-q", "--n", "25", "--paths", "2000", "--beta1", "0.5826"], capsys)
    res = json.loads(out)["result"]
    assert res["shifted_barrier"] == pytest.approx(106.221, abs=5e-4)
    assert res["beta1_used"] == 0.5826
    assert "wall_time" not in out and "threads" not in out


def test_beta1_command_writes_cache(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("BARRIERMC_CACHE_DIR", str(tmp_path))
    code, out, _ = cli(["beta1", "-q", "--samples", "2000", "--J", "5", "--seed", "3"], capsys)
    res = json.loads(out)["result"]
    assert res["J"] == 5 and res["n_samples"] == 2000
    assert json.loads((tmp_path / "beta1.json").read_text()) == res


def test_progress_goes_to_stderr(capsys):
    code, out, err = cli(["price", "--paths", "1000", "--n", "2"], capsys)
    json.loads(out)
    assert err == "" or not err.startswith("{")


def test_check_command(capsys):
    code, out, _ = cli(["check", "-q", "--paths", "20000", "--format", "csv"], capsys)
    assert code == 0, out
    assert out.splitlines()[0] == "check,passed,detail"
    code, out, _ = cli(["check", "-q", "--paths", "20000", "--perturb-drift", "1e-3", "--format", "csv"], capsys)
    assert code == 1
    assert "martingale,False" in out


def test_check_verdicts_stable_across_seeds(capsys):
    verdicts = set()
    for seed in (1, 2):
        code, out, _ = cli(["check", "-q", "--paths", "20000", "--seed", str(seed)], capsys)
        verdicts.add(tuple(r["passed"] for r in json.loads(out)["result"]))
    assert verdicts == {(True,) * 7}


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert __version__ in capsys.readouterr().out
