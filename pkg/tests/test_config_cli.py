import json
from pathlib import Path

import numpy as np
import pytest

from driftlab.cli import blocking_constants, fmt, main, read_traces
from driftlab.config import ConfigError, config_from_dict, dump_preset, load_config


def write_doc(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestConfig:
    def test_preset_expands(self):
        cfg = config_from_dict({"preset": "sensor3"})
        assert cfg.V == 20.0
        assert cfg.window == 40
        assert cfg.horizon == 5000
        assert cfg.runs == 1000
        assert cfg.space.F == 4096
        assert cfg.covering.size == 8
        assert cfg.v_sweep == (2.0, 5.0, 20.0)

    def test_scalar_overrides(self):
        cfg = config_from_dict({"preset": "sensor3", "V": 2.0, "runs": 10,
                                "horizon": 99, "seed": 5})
        assert (cfg.V, cfg.runs, cfg.horizon, cfg.seed) == (2.0, 10, 99, 5)

    def test_unknown_key_suggestion(self):
        with pytest.raises(ConfigError, match=r'did you mean "V"'):
            config_from_dict({"preset": "sensor3", "Vee": 4})

    def test_bad_probability_row_named(self):
        doc = dump_preset()
        doc["covering"]["members"][2][0] = 0.0  # row now sums to ~0.99
        with pytest.raises(ConfigError, match=r"covering.members\[2\]"):
            config_from_dict(doc)

    def test_decimal_strings_parse(self):
        doc = dump_preset()
        doc["schedule"]["limit"] = [str(v) for v in doc["schedule"]["limit"]]
        cfg = config_from_dict(doc)
        assert len(cfg.schedule.limit) == 64

    def test_errors_are_collected_not_first_only(self):
        try:
            config_from_dict({"preset": "sensor3", "runs": 0, "horizon": 0,
                              "mode": "bogus"})
        except ConfigError as exc:
            text = str(exc)
            assert "runs" in text and "horizon" in text and "mode" in text
        else:
            pytest.fail("expected ConfigError")

    def test_parse_error_reports_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "preset": "sensor3",\n  broken\n}')
        with pytest.raises(ConfigError, match="line 3"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_dump_round_trips(self):
        cfg = config_from_dict(dump_preset())
        base = config_from_dict({"preset": "sensor3"})
        assert cfg.space.F == base.space.F
        assert np.allclose(cfg.covering.prob_matrix, base.covering.prob_matrix)
        assert cfg.covering.delta == base.covering.delta

    def test_explicit_custom_model(self):
        doc = {
            "seed": 0, "runs": 1, "horizon": 8, "V": 1.0, "window": 2,
            "state_space": [2], "action_space": [2],
            "cost": {"tables": [[[1.0, 0.0], [0.0, 1.0]],
                                 [[0.2, 0.2], [0.8, 0.8]]],
                     "constraints": [0.5]},
            "covering": {"members": [[0.5, 0.5], [0.9, 0.1]],
                         "delta": 1.0, "alpha_delta": 0.95, "beta_delta": 0.05},
            "schedule": {"kind": "piecewise", "limit": [0.5, 0.5],
                         "segments": [[0, [0.5, 0.5]]]},
        }
        cfg = config_from_dict(doc)
        assert cfg.space.F == 4
        assert cfg.covering.size == 2


class TestBlockingConstants:
    def test_exact_factorization(self):
        for t in [1, 2, 3, 10, 99, 100, 4999, 5000, 12345]:
            alpha, u, v = blocking_constants(t)
            assert u * v == t - alpha
            assert u >= 1 and v >= 1 and alpha >= 0
            assert alpha <= max(2 * t**0.5 + 2, 4)

    def test_benchmark_scale(self):
        alpha, u, v = blocking_constants(5000)
        assert (alpha, u, v) == (100, 70, 70)


class TestFmt:
    def test_twelve_significant_digits(self):
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(-0.3946666666666666) == "-0.394666666667"
        assert fmt(5) == "5"
        assert fmt(True) == "true"
        assert fmt(None) == ""


class TestCli:
    def test_smoke_single_slot(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["simulate", "--out", out, "--runs", "1", "--horizon", "1",
                   "--seed", "0"])
        assert rc == 0
        trace = (tmp_path / "o" / "trace_run0000.csv").read_text().splitlines()
        assert trace[0] == "# mode=default"
        assert trace[1].startswith("t,omega,jstar,m,p0")
        assert len(trace) == 3  # comment + header + one slot

    def test_lp_value_in_csv(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["lp", "--out", out]) == 0
        body = (tmp_path / "o" / "lp.csv").read_text()
        assert "value,,-0.394666666667" in body

    def test_empirics_requires_traces(self, tmp_path):
        rc = main(["empirics", "--out", str(tmp_path / "empty"), "--runs", "1",
                   "--horizon", "50"])
        assert rc == 3

    def test_bad_config_exit_code(self, tmp_path):
        p = write_doc(tmp_path, {"preset": "sensor3", "Vee": 1})
        assert main(["lp", "--config", str(p)]) == 2

    def test_mode_recorded_and_literal_labeled(self, tmp_path):
        out = str(tmp_path / "o")
        for cmd in (["simulate", "--runs", "2", "--horizon", "60"], ["bounds"],
                    ["empirics"], ["compare"]):
            assert main(cmd + ["--out", out, "--mode", "literal",
                               "--horizon", "60", "--runs", "2", "--seed", "3"]) == 0
        for name in ("bounds.csv", "compare.csv", "empirics.csv"):
            lines = (tmp_path / "o" / name).read_text().splitlines()
            assert lines[0] == "# mode=literal"
        compare = (tmp_path / "o" / "compare.csv").read_text().splitlines()
        data_rows = [r for r in compare[2:] if r]
        assert all(",literal," in r for r in data_rows)

    def test_read_traces_round_trip(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["simulate", "--out", out, "--runs", "3", "--horizon", "80",
                     "--seed", "9"]) == 0
        cfg = config_from_dict({"preset": "sensor3", "horizon": 80, "runs": 3,
                                "seed": 9, "out_dir": out})
        ens = read_traces(cfg)
        from driftlab.simulate import run_ensemble

        direct = run_ensemble(cfg.sim(), 3)
        assert np.array_equal(ens.jstar, direct.jstar)
        assert np.array_equal(ens.m, direct.m)
        # stored costs round-trip through 12-significant-digit decimal
        assert np.allclose(ens.p, direct.p, atol=1e-11)
        assert np.allclose(ens.final_avg, direct.final_avg, atol=1e-11)

    def test_pipeline_byte_determinism_small(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = str(tmp_path / name)
            for cmd in ("simulate", "lp", "bounds", "empirics", "compare"):
                assert main([cmd, "--out", out, "--seed", "11", "--runs", "3",
                             "--horizon", "90"]) == 0
            outs.append(Path(out))
        files_a = sorted(p.name for p in outs[0].iterdir())
        files_b = sorted(p.name for p in outs[1].iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_preset_dump(self, tmp_path):
        out = str(tmp_path / "o")
        assert main(["preset-dump", "--out", out]) == 0
        doc = json.loads((tmp_path / "o" / "preset_sensor3.json").read_text())
        assert doc["V"] == 20.0
        assert len(doc["covering"]["members"]) == 8
