import pytest

from bakernewton.cli import main, run
from bakernewton.pipeline import CHAIN_FILE


def test_derive_reference(tmp_path, capsys):
    assert main(["derive", "--set", "rho=0.99", "--set", "margin=0", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "p = 24" in out.splitlines()
    assert (tmp_path / "derive.txt").read_text() == out


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("rho = 0.95\n# comment\nnot_a_key = 3\n")
    assert main(["derive", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bad.cfg:3" in capsys.readouterr().err
    cfg.write_text("rho = 0.95\nnx = 1.5\n")
    assert main(["derive", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bad.cfg:2" in capsys.readouterr().err
    cfg.write_text("rho 0.95\n")
    assert main(["derive", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert main(["derive", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_no_admissible_p_exit_1(tmp_path):
    assert run("derive", overrides=["rho=0.51", "margin=0.1"], out_dir=str(tmp_path)) == 1


@pytest.fixture(scope="module")
def calibrated_dir(tmp_path_factory, cal, ref_cfg):
    from bakernewton.pipeline import save_chain
    out = tmp_path_factory.mktemp("cli")
    save_chain(cal, ref_cfg, out)
    return out


def test_invariance_cli(calibrated_dir, capsys):
    assert run("invariance", overrides=["samples=200", "outside_probes=5"],
               out_dir=str(calibrated_dir)) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_orbit_cli(calibrated_dir):
    assert run("orbit", overrides=["orbit_steps=6"], out_dir=str(calibrated_dir)) == 0
    assert (calibrated_dir / "orbit.csv").read_text().startswith("k,log_radius")


def test_render_reproducible(calibrated_dir):
    args = ["nx=5", "ny=4", "tiles=3"]
    assert run("render", overrides=args, out_dir=str(calibrated_dir)) == 0
    first = (calibrated_dir / "render.pnm").read_bytes()
    assert run("render", overrides=args + ["tiles=1"], out_dir=str(calibrated_dir)) == 0
    assert (calibrated_dir / "render.pnm").read_bytes() == first
    assert first.startswith(b"P6\n5 4\n255\n")


def test_stale_chain_rejected(calibrated_dir, capsys):
    assert run("orbit", overrides=["rho=0.96"], out_dir=str(calibrated_dir)) == 2
    assert "calibrated for config" in capsys.readouterr().err
    assert (calibrated_dir / CHAIN_FILE).exists()
