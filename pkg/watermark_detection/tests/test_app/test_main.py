"""Tests for the wmdetect command line."""

import pandas as pd
import pytest

from watermark_detection.app.main import main


class TestCalibrateCommand:
    def test_redgreen_partial_sum(self, capsys):
        code = main(
            [
                "calibrate", "--scheme", "redgreen", "--mode", "partial", "--regime", "sum",
                "--n", "100", "--gamma", "0.5", "--theta", "0.8",
            ]
        )
        assert code == 0
        assert "gamma_n: 67" in capsys.readouterr().out

    def test_redgreen_complete_sum(self, capsys):
        code = main(["calibrate", "--scheme", "redgreen", "--regime", "sum", "--n", "250"])
        assert code == 0
        assert "gamma_n: 250" in capsys.readouterr().out

    def test_missing_theta_is_a_usage_error(self, capsys):
        code = main(
            ["calibrate", "--scheme", "redgreen", "--mode", "partial", "--regime", "sum",
             "--n", "100"]
        )
        assert code == 2
        assert "theta" in capsys.readouterr().err

    def test_gumbel_fixed_alpha_csv(self, tmp_path, capsys):
        out = tmp_path / "threshold.csv"
        code = main(["calibrate", "--n", "100", "--score", "log", "--csv", str(out)])
        assert code == 0
        row = pd.read_csv(out).iloc[0]
        assert row["gamma_n"] == pytest.approx(-83.5515, abs=1e-3)
        assert row["score"] == "log"

    def test_exponents_need_gumbel_delta(self):
        assert main(["calibrate", "--n", "100", "--score", "log", "--exponents"]) == 2

    @pytest.mark.slow
    def test_exponents(self, capsys):
        code = main(["calibrate", "--n", "100", "--delta", "0.5", "--exponents"])
        assert code == 0
        out = capsys.readouterr().out
        assert "exponents" in out
        assert "  R: " in out

    def test_bad_flag(self):
        assert main(["calibrate", "--n", "ten"]) == 2


class TestGenerateAndDetect:
    def test_redgreen_round_trip(self, tmp_path, capsys):
        """A complete-inheritance red-green text is all green and hits gamma_n = n."""
        path = tmp_path / "rg.tok"
        code = main(
            ["generate", "--scheme", "redgreen", "--n", "60", "--m", "100", "--seed", "3",
             "--output", str(path)]
        )
        assert code == 0
        code = main(["detect", str(path), "--regime", "sum"])
        out = capsys.readouterr().out
        assert code == 0
        assert "statistic: 60" in out
        assert "decision: reject H0" in out

    def test_gumbel_detect_dumps_pivotals(self, tmp_path, capsys):
        path = tmp_path / "g.tok"
        dump = tmp_path / "pivotals.csv"
        assert main(
            ["generate", "--n", "150", "--m", "200", "--delta", "0.3", "--output", str(path)]
        ) == 0
        code = main(["detect", str(path), "--dump-pivotals", str(dump)])
        assert code == 0
        assert "decision: reject H0" in capsys.readouterr().out
        df = pd.read_csv(dump)
        assert list(df.columns) == ["t", "token", "pivotal"]
        assert len(df) == 150

    def test_wrong_salt_on_null_text(self, tmp_path, capsys):
        path = tmp_path / "null.tok"
        main(["generate", "--mode", "null", "--n", "80", "--m", "100", "--output", str(path)])
        code = main(["detect", str(path), "--score", "log", "--salt", "0x1234"])
        assert code == 0
        assert "decision:" in capsys.readouterr().out

    def test_header_salt_is_written(self, tmp_path):
        path = tmp_path / "t.tok"
        main(["generate", "--n", "5", "--m", "50", "--salt", "0xABC", "--output", str(path)])
        assert f"# salt: {0xABC}" in path.read_text()

    def test_malformed_token_file(self, tmp_path, capsys):
        path = tmp_path / "bad.tok"
        path.write_text("# m: 100\n1\ntwo\n")
        assert main(["detect", str(path)]) == 1
        assert ":3:" in capsys.readouterr().err

    def test_missing_token_file(self, tmp_path):
        assert main(["detect", str(tmp_path / "absent.tok")]) == 1


class TestExperimentCommand:
    def test_list_presets(self, capsys):
        assert main(["experiment", "--list-presets"]) == 0
        assert "paper-fig1" in capsys.readouterr().out.split()

    def test_unknown_preset(self):
        assert main(["experiment", "--preset", "paper-fig42"]) == 2

    def test_needs_a_source(self):
        assert main(["experiment"]) == 2

    def test_config_run(self, tmp_path, capsys):
        config = tmp_path / "exp.yaml"
        config.write_text(
            "name: tiny\nscheme: redgreen\nregime: sum\nm: 20\nreps: 30\nlengths: [10, 20]\n"
        )
        output = tmp_path / "tiny.csv"
        trace = tmp_path / "trace.csv"
        code = main(
            ["experiment", "--config", str(config), "--seed", "5", "--output", str(output),
             "--trace", str(trace)]
        )
        assert code == 0
        df = pd.read_csv(output)
        assert set(df["metric"]) == {"type1", "type2", "type1+type2"}
        assert set(df["seed"]) == {5}
        assert len(pd.read_csv(trace)) == 30
        assert "wrote" in capsys.readouterr().out


class TestTopLevel:
    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "wmdetect" in capsys.readouterr().out

    def test_no_command(self):
        assert main([]) == 2
