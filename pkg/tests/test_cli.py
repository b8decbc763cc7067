import json

import jsonschema
import pytest

from rydmagnon.cli import main, manifest_schema


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def check_manifest(out_dir):
    man = json.loads((out_dir / "manifest.json").read_text())
    jsonschema.validate(man, manifest_schema())
    listed = {f["path"] for f in man["files"]}
    on_disk = {p.relative_to(out_dir).as_posix() for p in out_dir.rglob("*") if p.is_file()}
    assert on_disk - {"manifest.json"} == listed
    return man


def test_verify_exits_zero(tmp_path, capsys):
    code, out, _ = run(["verify", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert "FAIL" not in out
    check_manifest(tmp_path)


def test_potential_outputs(tmp_path, capsys):
    code, out, _ = run(["potential", "--out", str(tmp_path), "--points", "56"], capsys)
    assert code == 0
    assert "rad/us" in out.splitlines()[0]
    header = (tmp_path / "potential.csv").read_text().splitlines()[0].split(",")
    assert {"j_plus_over_2pi_mhz", "j_plus_abs_over_2pi_mhz", "j_minus_rad_per_us"} <= set(header)
    rows = (tmp_path / "table1_comparison.csv").read_text().splitlines()
    assert len(rows) == 23
    assert (tmp_path / "potential.svg").read_text().startswith("<svg")
    man = check_manifest(tmp_path)
    assert man["subcommand"] == "potential"


def test_coeffs_prints_xi1(tmp_path, capsys):
    code, out, _ = run(["coeffs", "--out", str(tmp_path)], capsys)
    assert code == 0
    xi1 = float(out.split("xi1 = ")[1].split()[0])
    assert xi1 == pytest.approx(684, rel=0.02)


def test_json_format(tmp_path, capsys):
    code, _, _ = run(["bands", "--out", str(tmp_path), "--format", "json", "--n-k", "11", "--r-max", "30",
                      "--no-plots"], capsys)
    assert code == 0
    rows = json.loads((tmp_path / "bands.json").read_text())
    assert len(rows) == 11 * 30
    assert not list(tmp_path.glob("*.svg"))
    check_manifest(tmp_path)


def test_pair_with_shots(tmp_path, capsys):
    code, _, _ = run(["pair", "--preset", "tight-pair-frozen", "--out", str(tmp_path), "--shots", "300",
                      "--seed", "3", "--no-plots"], capsys)
    assert code == 0
    shot_files = sorted((tmp_path / "shots").iterdir())
    assert shot_files and shot_files[0].read_text().startswith("# time_us=0.0\n# seed=3\n")
    est = json.loads((tmp_path / "mle" / "populations_t000.json").read_text())
    assert len(est) == 64 and abs(sum(est.values()) - 1) < 1e-9
    check_manifest(tmp_path)


def test_config_error_json(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('preset = "quantum-walk"\n[run]\nmodel = "magic"\n')
    code, _, err = run(["walk", "--config", str(bad), "--out", str(tmp_path / "o")], capsys)
    assert code == 2
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "ConfigError" and payload["exit_code"] == 2


def test_resonance_exit_code(tmp_path, capsys):
    cfg = tmp_path / "res.toml"
    # V(5 um)/2pi = 65.5 MHz: facilitation at Delta/2pi = V
    cfg.write_text('preset = "bound-state-theory"\n[geometry]\nspacing_um = 5.0\nn_sites = 5\n'
                   '[drive]\ndelta_mhz = 65.472\nomega_mhz = 1.0\n')
    code, _, err = run(["coeffs", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 3
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["exit_code"] == 3 and "condition" in payload


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["walk", "--seed", "-1"])
    assert exc.value.code == 2
    assert main(["walk", "--preset", "nope", "--out", "/tmp/unused"]) == 2


def test_byte_identical_reruns(tmp_path, capsys):
    args = ["walk", "--shots", "200", "--seed", "11", "--no-plots"]
    for d in ("a", "b"):
        assert run(args + ["--out", str(tmp_path / d)], capsys)[0] == 0
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
