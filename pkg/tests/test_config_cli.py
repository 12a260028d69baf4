import csv
import io
import json
import math
import subprocess
import sys

import pytest

from cvtele.cli import EXIT_CONFIG, EXIT_PHYSICS, main
from cvtele.config import (
    BUNDLED,
    config_from_dict,
    config_to_dict,
    emit_report,
    gain_range,
    load_config,
    load_report,
    parse_config,
)
from cvtele.errors import ConfigError, InvalidParameter
from cvtele.teleporter import run, run_heisenberg, squeezer_levels

R_7DB = 0.35 * math.log(10)

BASE = """\
schema_version = 1

[squeezer_a]
r = 0.8

[squeezer_b]
r = 0.8

[teleporter]
gain_x = 1.0
gain_p = 1.0

[engine]
kind = "monte_carlo"
shots = 2000
seed = 3
"""


def cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParse:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_bundled_configs_load(self, name):
        cfg = load_config(name)
        assert cfg.teleporter is not None

    def test_bundled_fig3_resource(self):
        t = load_config("paper_fig3").teleporter
        assert 10 * math.log10(squeezer_levels(t.squeezer_a).squeezed) == pytest.approx(-7.0, abs=1e-12)
        assert squeezer_levels(t.squeezer_b).antisqueezed == pytest.approx(10 ** 0.7, rel=1e-12)
        assert (t.engine, t.shots, t.seed, t.workers) == ("monte_carlo", 100_000, 0, 1)

    def test_fig4_sweep_range(self):
        gains = load_config("paper_fig4").gains
        assert len(gains) == 151 and gains[0] == 0.0 and gains[-1] == 1.5
        assert 0.99 in gains

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match=r"line 2: .*frobnicate"):
            parse_config("schema_version = 1\nfrobnicate = 3\n")

    def test_unknown_section_key(self):
        text = BASE.replace("gain_p = 1.0", "gain_p = 1.0\ngain_q = 1.0")
        with pytest.raises(ConfigError, match=r"line 12: .*teleporter\.gain_q") as exc:
            parse_config(text)
        assert exc.value.line == 12

    def test_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(BASE.replace("schema_version = 1", "schema_version = 2"))
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(BASE.replace("schema_version = 1", ""))

    def test_syntax_error_has_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("schema_version = 1\n[teleporter\n")

    def test_physics_violation_keeps_type_and_line(self):
        text = BASE + "\n[efficiencies]\npath_a = 1.5\n"
        with pytest.raises(InvalidParameter, match=r"line 19: .*path_a"):
            parse_config(text)

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="gain_x"):
            parse_config(BASE.replace("gain_x = 1.0", 'gain_x = "one"'))

    def test_squeezer_forms(self):
        text = BASE.replace("r = 0.8\n\n[squeezer_b]", "squeezed_db = -6.0\nantisqueezed_db = 12.0\n\n[squeezer_b]")
        text = text.replace("[squeezer_b]\nr = 0.8", "[squeezer_b]\nparametric_gain = 9.0\nefficiency = 0.89")
        t = parse_config(text).teleporter
        assert t.squeezer_a.antisqueezed == pytest.approx(10 ** 1.2, rel=1e-12)
        assert t.squeezer_b.parametric_gain == 9.0

    def test_dict_round_trip(self):
        text = BASE + "\n[jitter]\nalice_bs = 1.5\n\n[sweep]\ngains = [0.9, 1.0]\n\n[sequence]\nn_max = 4\n"
        cfg = parse_config(text)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_gain_range_inclusive(self):
        assert gain_range(0.0, 0.3, 0.1) == (0.0, 0.1, 0.2, 0.3)

    @pytest.mark.parametrize("args", [(1.0, 0.0, 0.1), (0.0, 1.0, 0.0), (0.0, 1.0, -0.1)])
    def test_gain_range_invalid(self, args):
        with pytest.raises(ConfigError):
            gain_range(*args)


class TestReport:
    def test_round_trip(self):
        cfg = parse_config(BASE)
        rep = run(cfg.teleporter)
        text = emit_report(rep, cfg, "teleport", {"timestamp": "x"})
        rep2, cfg2, doc = load_report(text)
        assert rep2 == rep and cfg2 == cfg and doc["tool_version"]

    def test_hash_ignores_metadata(self):
        cfg = parse_config(BASE)
        rep = run(cfg.teleporter)
        a = json.loads(emit_report(rep, cfg, "teleport", {"timestamp": "a"}))
        b = json.loads(emit_report(rep, cfg, "teleport", {"timestamp": "b"}))
        assert a["payload_sha256"] == b["payload_sha256"]

    def test_tampering_detected(self):
        cfg = parse_config(BASE)
        doc = json.loads(emit_report(run(cfg.teleporter), cfg, "teleport"))
        doc["report"]["fidelity"] = 0.99
        with pytest.raises(ConfigError, match="hash"):
            load_report(json.dumps(doc))


class TestTeleportCommand:
    def test_fig3_bundle(self, capsys):
        code, out, _ = cli(capsys, "teleport", "--config", "paper_fig3")
        assert code == 0
        rep, _, doc = load_report(out)
        assert rep.fidelity == pytest.approx(0.83, abs=0.01)
        assert rep.shots == 100_000 and rep.se_fidelity > 0
        assert "timestamp" in doc["metadata"]

    def test_classical_bundle(self, capsys):
        code, out, _ = cli(capsys, "teleport", "--config", "paper_classical")
        rep, _, _ = load_report(out)
        assert code == 0 and rep.fidelity == pytest.approx(0.5, abs=1e-12)

    def test_determinism(self, capsys, tmp_path):
        path = write(tmp_path, BASE)
        _, first, _ = cli(capsys, "teleport", "--config", path, "--seed", "11")
        _, second, _ = cli(capsys, "teleport", "--config", path, "--seed", "11")
        _, other, _ = cli(capsys, "teleport", "--config", path, "--seed", "12")
        h = [json.loads(t)["payload_sha256"] for t in (first, second, other)]
        assert h[0] == h[1] != h[2]
        strip = [{k: v for k, v in json.loads(t).items() if k != "metadata"} for t in (first, second)]
        assert strip[0] == strip[1]

    def test_overrides(self, capsys, tmp_path):
        path = write(tmp_path, BASE)
        _, out, _ = cli(capsys, "teleport", "--config", path, "--shots", "500", "--seed", "4", "--workers", "2")
        rep, cfg, _ = load_report(out)
        assert (rep.shots, rep.seed, rep.workers) == (500, 4, 2)
        assert cfg.teleporter.shots == 500

    def test_engine_override_and_table(self, capsys, tmp_path):
        path = write(tmp_path, BASE)
        code, out, _ = cli(capsys, "teleport", "--config", path, "--engine", "heisenberg", "--format", "table")
        row = table(out)[0]
        assert code == 0 and row["engine"] == "heisenberg"
        assert float(row["sigma_x"]) == pytest.approx(1 + 2 * math.exp(-1.6), abs=1e-12)

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, out, _ = cli(capsys, "teleport", "--config", "paper_classical", "--out", str(target))
        assert code == 0 and out == ""
        assert load_report(target.read_text())[0].sigma_x == pytest.approx(3.0, abs=1e-12)

    def test_unknown_key_exit_code(self, capsys, tmp_path):
        path = write(tmp_path, BASE.replace("seed = 3", "seed = 3\nsead = 4"))
        code, _, err = cli(capsys, "teleport", "--config", path)
        assert code == EXIT_CONFIG
        assert "sead" in err and "line 17" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = cli(capsys, "teleport", "--config", str(tmp_path / "nope.toml"))
        assert code == EXIT_CONFIG and "nope.toml" in err

    def test_physics_error_exit_code(self, capsys, tmp_path):
        path = write(tmp_path, BASE + "\n[efficiencies]\nvictor_homodyne = -0.2\n")
        code, _, err = cli(capsys, "teleport", "--config", path)
        assert code == EXIT_PHYSICS and "victor_homodyne" in err

    def test_bad_override(self, capsys, tmp_path):
        code, _, _ = cli(capsys, "teleport", "--config", write(tmp_path, BASE), "--shots", "0")
        assert code == EXIT_CONFIG

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "cvtele", "teleport", "--config", "paper_classical", "--format", "table"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert float(table(proc.stdout)[0]["fidelity"]) == pytest.approx(0.5, abs=1e-12)


class TestSweepCommand:
    def test_rows_sorted_with_header(self, capsys):
        code, out, _ = cli(capsys, "sweep-gain", "--config", "paper_fig4", "--gains", "1.2,0.0,0.99,1.0")
        rows = table(out)
        assert code == 0
        assert list(rows[0])[:5] == ["g", "sigma_x_db", "sigma_p_db", "fidelity", "n_s"]
        assert [float(r["g"]) for r in rows] == [0.0, 0.99, 1.0, 1.2]

    def test_values(self, capsys):
        _, out, _ = cli(capsys, "sweep-gain", "--config", "paper_fig4", "--g-range", "0:1.5:0.01")
        rows = {round(float(r["g"]), 2): r for r in table(out)}
        assert len(rows) == 151
        assert float(rows[0.99]["fidelity"]) == pytest.approx(0.842, abs=3e-3)
        assert float(rows[0.0]["sigma_x"]) == pytest.approx(math.cosh(2 * R_7DB), abs=1e-12)
        assert float(rows[1.0]["fidelity"]) == run_heisenberg(load_config("paper_fig4").teleporter).fidelity

    def test_bundled_range(self, capsys):
        _, out, _ = cli(capsys, "sweep-gain", "--config", "paper_fig4")
        assert len(table(out)) == 151

    def test_report_format(self, capsys):
        _, out, _ = cli(capsys, "sweep-gain", "--config", "paper_fig4", "--gains", "1.0", "--format", "report")
        doc = json.loads(out)
        assert doc["rows"][0]["g"] == 1.0

    @pytest.mark.parametrize("flag", [["--g-range", "1:0:0.1"], ["--gains", ""], ["--g-range", "bogus"]])
    def test_empty_or_bad_range(self, capsys, flag):
        code, _, _ = cli(capsys, "sweep-gain", "--config", "paper_fig4", *flag)
        assert code == EXIT_CONFIG

    def test_no_gains_anywhere(self, capsys):
        code, _, err = cli(capsys, "sweep-gain", "--config", "paper_classical")
        assert code == EXIT_CONFIG and "gains" in err


class TestSequentialCommand:
    def test_crossing_for_seven_db(self, capsys, tmp_path):
        path = write(tmp_path, BASE.replace("r = 0.8", f"r = {R_7DB!r}"))
        _, out, _ = cli(capsys, "sequential", "--config", path, "--n-max", "8")
        rows = table(out)
        assert [int(r["n"]) for r in rows] == list(range(1, 9))
        assert [int(r["first_below_half"]) for r in rows] == [0, 0, 0, 0, 0, 1, 0, 0]
        assert float(rows[4]["fidelity"]) == pytest.approx(0.500593, abs=1e-6)

    def test_crossing_without_squeezing(self, capsys):
        _, out, _ = cli(capsys, "sequential", "--config", "paper_classical")
        rows = table(out)
        assert len(rows) == 3
        assert [int(r["first_below_half"]) for r in rows] == [0, 1, 0]
        assert float(rows[1]["fidelity"]) == pytest.approx(1 / 3, abs=1e-12)

    def test_single_row(self, capsys):
        _, out, _ = cli(capsys, "sequential", "--config", "paper_classical", "--n-max", "1")
        assert len(table(out)) == 1

    @pytest.mark.parametrize("n", ["0", "-2"])
    def test_invalid_n(self, capsys, n):
        code, _, _ = cli(capsys, "sequential", "--config", "paper_classical", "--n-max", n)
        assert code == EXIT_CONFIG

    def test_missing_n(self, capsys):
        code, _, _ = cli(capsys, "sequential", "--config", "paper_fig3")
        assert code == EXIT_CONFIG


class TestOpoCommand:
    def test_sideband_delta(self, capsys):
        _, out, _ = cli(capsys, "opo-spectrum", "--gain", "9", "--efficiency", "0.89", "--freqs", "0,1.25")
        rows = table(out)
        assert float(rows[1]["s_minus_db"]) - float(rows[0]["s_minus_db"]) == pytest.approx(0.14, abs=5e-3)

    def test_dc_row_matches_model(self, capsys):
        from cvtele.opo import OpoParams, squeezing_spectrum

        _, out, _ = cli(capsys, "opo-spectrum", "--gain", "9", "--efficiency", "0.89", "--jitter", "1",
                        "--freq-max", "1", "--freq-step", "0.5")
        rows = table(out)
        expected = squeezing_spectrum(OpoParams(9.0, 0.89, 1.0), with_jitter=True)
        assert float(rows[0]["s_minus"]) == expected.squeezed
        assert [float(r["freq_mhz"]) for r in rows] == [0.0, 0.5, 1.0]

    def test_monotone(self, capsys):
        _, out, _ = cli(capsys, "opo-spectrum", "--gain", "11.2", "--efficiency", "0.89")
        values = [float(r["s_minus_db"]) for r in table(out)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_no_pump_all_zero(self, capsys):
        _, out, _ = cli(capsys, "opo-spectrum", "--gain", "1")
        for r in table(out):
            assert float(r["s_minus_db"]) == 0.0 and float(r["s_plus_db"]) == 0.0

    def test_invalid_params(self, capsys):
        assert cli(capsys, "opo-spectrum", "--gain", "0.5")[0] == EXIT_PHYSICS
        assert cli(capsys, "opo-spectrum", "--gain", "9", "--freq-step", "0")[0] == EXIT_CONFIG


class TestCalibrateCommand:
    def test_report(self, capsys):
        code, out, _ = cli(capsys, "calibrate", "--gain", "0.99", "--suppression-db-x", "37.4",
                           "--suppression-db-p", "37.0")
        doc = json.loads(out)
        assert code == 0
        assert doc["simulated"]["suppression_db"] == pytest.approx(40.0, abs=1e-9)
        assert doc["measured_x"]["gain_bound"] == pytest.approx(0.0135, abs=1e-4)
        assert doc["classical_floor"]["variance"] == pytest.approx(3.0, abs=1e-12)
        assert doc["classical_floor"]["db"] == pytest.approx(4.771, abs=5e-4)

    def test_zero_gain_and_floor_flag(self, capsys):
        doc = json.loads(cli(capsys, "calibrate", "--gain", "0")[1])
        assert doc["simulated"]["suppression_db"] == 0.0
        doc = json.loads(cli(capsys, "calibrate", "--gain", "1")[1])
        assert doc["simulated"]["floored"] is True

    def test_table(self, capsys):
        _, out, _ = cli(capsys, "calibrate", "--suppression-db-x", "40", "--format", "table")
        rows = {r["item"]: r for r in table(out)}
        assert float(rows["measured_x"]["value"]) == pytest.approx(0.01, abs=1e-12)
        assert float(rows["classical_floor"]["value"]) == pytest.approx(3.0, abs=1e-12)

    def test_negative_suppression(self, capsys):
        assert cli(capsys, "calibrate", "--suppression-db-x", "-3")[0] == EXIT_PHYSICS
