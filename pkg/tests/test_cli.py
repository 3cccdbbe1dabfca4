import csv
import json
import os

import pytest

from phonon_decay import cli
from phonon_decay.config import default_config_text
from phonon_decay.spectrum import save_catalog


@pytest.fixture(scope="module")
def cache(tmp_path_factory, catalog, base_config):
    path = tmp_path_factory.mktemp("cache")
    save_catalog(catalog, path / f"catalog-{base_config.spectrum_hash()}.bin")
    return path


@pytest.fixture
def out(tmp_path, cache, monkeypatch):
    monkeypatch.setenv(cli.CACHE_ENV, str(cache))
    return tmp_path


def _rows(path):
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


def test_spectrum_table(out):
    assert cli.run(["spectrum", "--config", "builtin", "--out", str(out)]) == 0
    rows = _rows(out / "spectrum.csv")
    assert rows[0] == ["nu", "energy_hz", "x_cross_nm"]
    assert float(rows[1][1]) == pytest.approx(-1.58e14, rel=1e-2)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "spectrum"
    assert manifest["catalog_path"].startswith(os.environ[cli.CACHE_ENV])


def test_output_is_deterministic(out):
    a, b = out / "a", out / "b"
    for d in (a, b):
        assert cli.run(["depletion", "--config", "builtin", "--out", str(d), "--bound-only"]) == 0
    assert (a / "depletion.csv").read_bytes() == (b / "depletion.csv").read_bytes()


def test_temperature_override(out):
    assert cli.run(["depletion", "--config", "builtin", "--out", str(out), "--temperature", "30"]) == 0
    text = (out / "depletion_30K.csv").read_text()
    assert "T = 30.0 K" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["overrides"]["temperature"] == 30.0


def test_config_file_round_trip(out):
    cfg = out / "run.cfg"
    cfg.write_text(default_config_text())
    assert cli.run(["elements", "--config", str(cfg), "--out", str(out), "--max-nu", "3"]) == 0
    assert len(_rows(out / "elements.csv")) == 1 + 6


def test_evolve_superposition(out):
    argv = ["evolve", "--config", "builtin", "--out", str(out), "--subset", "100,101",
            "--rho0", "superposition:0,1", "--t-final", "1e-12", "--bound-only", "--samples", "10"]
    assert cli.run(argv) == 0
    rows = _rows(out / "evolve.csv")
    assert rows[0] == ["t_s", "p_100", "p_101", "abs_rho_100_101"]
    assert float(rows[1][3]) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "argv, code",
    [
        (["nonsense", "--config", "builtin"], 1),
        (["rates", "--config", "builtin", "--from", "100000"], 1),
        (["spectrum", "--config", "/no/such/file.cfg"], 3),
        (["evolve", "--config", "builtin", "--subset", "1,2", "--rho0", "0.5"], 1),
    ],
)
def test_exit_codes(out, argv, code):
    assert cli.run([*argv, "--out", str(out)]) == code


def test_bad_config_exits_with_config_code(out):
    cfg = out / "bad.cfg"
    cfg.write_text(default_config_text().replace("alpha = 53 nm^-1", "alpha = 53 kg"))
    assert cli.run(["spectrum", "--config", str(cfg), "--out", str(out)]) == 1
