import csv
import io
import subprocess
import sys

import numpy as np
import pytest
import yaml

from coherent_lora.cli import main
from coherent_lora.experiments import CSV_COLUMNS


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_pattern_csv(tmp_path, capsys):
    out = tmp_path / "pattern.csv"
    code, _, _ = run(["pattern", "--tau", "88", "--lambda-cfo", "0", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["bin", "magnitude", "re", "im"]
    assert len(rows) == 129
    mags = np.array([float(r[1]) for r in rows[1:]])
    assert int(np.argmax(mags)) == 123
    assert mags[123] == pytest.approx(88.86974605, abs=1e-7)


def test_ser_point(capsys):
    code, out, _ = run(["ser", "--snr", "-8", "--sir", "inf", "--method", "exact"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].startswith("7,-8.0,inf,0.0,coherent,exact,ser,1,0.0,")


def test_fer_point_mc(capsys):
    code, out, _ = run(["fer", "--snr", "-6", "--sir", "3", "--trials", "200", "--frame-len", "5",
                        "--seed", "2"], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["F"] == "5" and row["n_trials"] == "200" and row["seed"] == "2"
    assert float(row["ci_low"]) <= float(row["value"]) <= float(row["ci_high"])


def test_required_snr_unreachable(capsys):
    code, out, _ = run(["required-snr", "--sir", "-6", "--target", "0.001", "--bracket", "-5", "5",
                        "--trials", "300"], capsys)
    assert code == 0
    assert "unreachable" in out


def test_bad_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ser", "--snr", "x"])
    assert info.value.code == 2


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_configuration_error_exits_2(capsys):
    code, _, err = run(["ser", "--snr", "-8", "--sf", "13"], capsys)
    assert code == 2 and "sf[0]" in err


def test_unknown_preset_exits_2(capsys):
    code, _, err = run(["preset", "fig9"], capsys)
    assert code == 2 and "fig9" in err


def test_unavailable_method_exits_2(capsys):
    code, _, _ = run(["fer", "--snr", "-8", "--sir", "3", "--receiver", "noncoherent", "--method", "approx"], capsys)
    assert code == 2


def test_numerical_error_exits_3(capsys, monkeypatch):
    from coherent_lora import analytic
    from coherent_lora.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("forced")

    monkeypatch.setattr(analytic, "interference_profile", boom)
    code, _, err = run(["fer", "--snr", "-8", "--sir", "3", "--method", "approx"], capsys)
    assert code == 3 and "numerical" in err


def test_preset_print_spec(capsys):
    code, out, _ = run(["preset", "fig7", "--print-spec"], capsys)
    assert code == 0
    data = yaml.safe_load(out)
    assert data["target_fer"] == 0.1 and data["metric"] == "required_snr"


def test_run_spec_file(tmp_path, capsys):
    spec = dict(name="cli", sf=[7], snr={"start": -8, "stop": -7, "step": 1}, sir_db=[3.0], F=2,
                methods=["mc"], n_trials=100, output=str(tmp_path / "o.csv"))
    f = tmp_path / "s.yaml"
    f.write_text(yaml.safe_dump(spec))
    code, out, _ = run(["run", str(f), "--trials", "150", "--seed", "9"], capsys)
    assert code == 0
    lines = [ln for ln in (tmp_path / "o.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(lines) == 3
    assert lines[1].endswith(",150,9")


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "coherent_lora.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("run", "preset", "pattern", "required-snr", "ser", "fer"):
        assert sub in out.stdout
