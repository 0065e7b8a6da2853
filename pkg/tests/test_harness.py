import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings, strategies as st

from blowup_lab import harness as h
from blowup_lab.cli import main

GKW = {"profile": {"family": "gkw", "n": 3},
       "exponents": {"p": [1.5], "expect": {"p1": 1, "p2": 1, "p3": 1.3333333333333333}}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


def summary(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_round_trip_default_sections():
    cfg = h.parse_config(json.dumps({"kind": "all", "profile": {}, "exponents": {}, "eigen": {},
                                     "testfn": {}, "sweep": {}, "duality": {}}))
    again = h.parse_config(cfg.to_json())
    assert again == cfg and again.to_json() == cfg.to_json()


@settings(max_examples=40)
@given(st.sampled_from(["free", "scattering", "gkw"]), st.integers(2, 5),
       st.floats(0.5, 3.0), st.lists(st.floats(1.1, 4.0), min_size=1, max_size=4),
       st.booleans())
def test_round_trip_property(family, n, R, ps, svg):
    data = {"kind": "exponents", "profile": {"family": family, "n": n, "R": R},
            "exponents": {"p": ps}, "output": {"svg": svg}}
    cfg = h.parse_config(json.dumps(data))
    assert h.parse_config(cfg.to_json()) == cfg


@pytest.mark.parametrize("text", [
    '{"kind": "exponents", "bogus": 1}',
    '{"profile": {"family": "free", "dimension": 3}}',
    '{"profile": {"family": "scattering", "params": {"gamma": 1}}}',
    '{"profile": {"family": "nope"}}',
    '{"exponents": {"p": [2.0], "extra": true}}',
    '{"exponents": {"p": [NaN]}}',
    '{"exponents": {"p": [0.5]}}',
    '{"exponents": {"theorems": ["made_up"]}}',
    '{"exponents": {"expect": {"p9": 1}}}',
    '{"kind": "exponents", "kind": "eigen"}',
    '{"sweep": {"dr": "small"}}',
    '{"sweep": {"pad": 2.5}}',
    '{"eigen": {"fit": 1}}',
    '{"duality": {"dr": [0.1]}}',
    '{"profile": {"family": "free", "n": 1}}',
    '{"kind": "plot"}',
    '[1, 2]',
    '{"profile": ',
    '{"testfn": {"upper_q": [1.0]}}',
    '{"testfn": {"q": 0}}',
])
def test_invalid_configs_rejected(text):
    with pytest.raises(h.ConfigError):
        h.parse_config(text)


def test_profile_invariant_violation_is_config_error():
    bad = {"profile": {"family": "table", "params": {"r": [1, 2], "D": [0, 0], "V": [-1, -1]}}}
    with pytest.raises(h.ConfigError):
        h.parse_config(json.dumps(bad))


def test_cli_malformed_config_exit1_no_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["exponents", "--config", write(tmp_path, "{not json"), "--out", str(out)]) == 1
    assert not out.exists()
    assert main(["exponents", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["nosuch", "--config", write(tmp_path, GKW)]) == 1
    assert main(["exponents", "--config", write(tmp_path, GKW), "--jobs", "0"]) == 1


def test_cli_exponents_gkw(tmp_path):
    out = tmp_path / "out"
    assert main(["exponents", "--config", write(tmp_path, GKW), "--out", str(out)]) == 0
    s = summary(out / "exponents" / "summary.json")
    assert s["measured"]["exponents"]["p3"] == 4 / 3
    assert all(s["verdicts"].values()) and s["status"] == 0
    assert (out / "exponents" / "exponents.csv").read_text().startswith("name,value\n")


def test_check_failure_exit3(tmp_path):
    cfg = dict(GKW, exponents={"expect": {"p3": 1.5}})
    out = tmp_path / "out"
    assert main(["exponents", "--config", write(tmp_path, cfg), "--out", str(out)]) == 3
    s = summary(out / "exponents" / "summary.json")
    assert s["verdicts"]["expect_p3"] is False


def test_numerical_failure_exit2(tmp_path):
    cfg = {"profile": {"family": "free"},
           "sweep": {"epsilons": [0.2, 0.3, 0.5, 1.0, 2.0], "dr": 0.1, "T_max": 5.0}}
    out = tmp_path / "out"
    assert main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 2
    s = summary(out / "sweep" / "summary.json")
    assert s["status"] == 2 and "SweepError" in s["error"]


def test_env_overrides_out(tmp_path, monkeypatch):
    env_out = tmp_path / "env"
    monkeypatch.setenv("BLOWUP_LAB_OUT", str(env_out))
    assert main(["exponents", "--config", write(tmp_path, GKW), "--out",
                 str(tmp_path / "flag")]) == 0
    assert (env_out / "exponents" / "summary.json").exists()
    assert not (tmp_path / "flag").exists()


def test_determinism_byte_identical(tmp_path):
    cfg = {"profile": {"family": "free", "n": 3}, "exponents": {},
           "eigen": {"lambdas": [0, 1], "r_max": 100},
           "duality": {"dr": [0.1, 0.05]}, "output": {"svg": True}}
    path = write(tmp_path, cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["all", "--config", path, "--out", str(a)]) == 0
    assert main(["all", "--config", path, "--out", str(b)]) == 0
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b and len(files_a) > 8
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_svg_is_well_formed(tmp_path):
    cfg = {"profile": {"family": "gkw"}, "eigen": {"lambdas": [0, 1], "r_max": 60},
           "output": {"svg": True}}
    out = tmp_path / "out"
    assert main(["eigen", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    root = ET.fromstring((out / "eigen" / "phi.svg").read_text())
    assert root.tag.endswith("svg") and len(root.findall("{*}polyline")) == 2


def test_sweep_small_with_jobs(tmp_path):
    cfg = {"profile": {"family": "free"},
           "sweep": {"epsilons": [40, 30, 20, 12, 8, 4], "dr": 0.05, "T_max": 200.0,
                     "a_range": [1.5, 2.5]}}
    path = write(tmp_path, cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    status = main(["sweep", "--config", path, "--out", str(a), "--jobs", "2"])
    assert status in (0, 3)
    assert main(["sweep", "--config", path, "--out", str(b), "--jobs", "1"]) == status
    assert (a / "sweep" / "sweep.csv").read_bytes() == (b / "sweep" / "sweep.csv").read_bytes()
    s = summary(a / "sweep" / "summary.json")
    assert s["measured"]["bound"]["a"] == pytest.approx(2.0)
    assert s["measured"]["fit"]["n_rows"] >= 4


def test_subcommand_overrides_config_kind(tmp_path):
    cfg = dict(GKW, kind="sweep")
    out = tmp_path / "out"
    assert main(["exponents", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert (out / "exponents").is_dir() and not (out / "sweep").exists()


def test_csv_text_formatting():
    text = h.csv_text([{"a": 0.1, "b": True, "c": None, "d": 3}])
    assert text == "a,b,c,d\n0.10000000000000001,true,,3\n"
