import json
import shutil

import numpy as np
import pytest
from conftest import data_path, example_path

from gbsopt.basis import BasisSet
from gbsopt.cli import main

HE_GBS = "He 0\nS 3 1.00\n 6.36242139 0.15432897\n 1.15892300 0.53532814\n 0.31364979 0.44463454\n****\n"


def write_config(tmp_path, cfg, name="run.json"):
    for f in ("sto-3g.gbs", "6-31g.gbs"):
        shutil.copy(data_path(f), tmp_path / f)
    (tmp_path / "h2.xyz").write_text("2\nH2\nH 0 0 -0.7\nH 0 0 0.7\n")
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


H2 = {"geometry": {"path": "h2.xyz"}, "basis": {"kind": "ao-file", "path": "sto-3g.gbs"}}


def test_hf_prints_energy(tmp_path, capsys):
    assert main(["hf", "--config", write_config(tmp_path, H2), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "E_elec     -1.831000039" in out
    data = json.loads((tmp_path / "o" / "hf.json").read_text())
    assert data["converged"] and data["W"] == 2


def test_dump_single_function(tmp_path):
    (tmp_path / "he.gbs").write_text(HE_GBS)
    (tmp_path / "he.xyz").write_text("1\nHe\nHe 0 0 0\n")
    cfg = {"geometry": {"path": "he.xyz"}, "basis": {"kind": "ao-file", "path": "he.gbs"}}
    p = write_config(tmp_path, cfg)
    for out in ("a", "b"):
        assert main(["hf", "--config", p, "--dump", "--out", str(tmp_path / out)]) == 0
    for name in ("S.txt", "A.txt", "B.txt"):
        a = (tmp_path / "a" / name).read_bytes()
        assert len(a.decode().splitlines()) == 1
        assert a == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "S.txt").read_text().startswith("1 1 1.00000000000000e+00")


def test_integrals_subcommand(tmp_path):
    cfg = dict(H2, basis={"kind": "ao-file", "path": "6-31g.gbs"})
    assert main(["integrals", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "i")]) == 0
    assert len((tmp_path / "i" / "B.txt").read_text().splitlines()) == 55


def test_validation_errors(tmp_path):
    assert main(["hf", "--config", str(tmp_path / "missing.json")]) == 1
    odd = dict(H2, charge=1)
    assert main(["hf", "--config", write_config(tmp_path, odd)]) == 1
    bad = dict(H2, basis={"kind": "nope"})
    assert main(["hf", "--config", write_config(tmp_path, bad)]) == 1
    (tmp_path / "broken.json").write_text("{")
    assert main(["hf", "--config", str(tmp_path / "broken.json")]) == 1
    roles = dict(H2, optimize={"free": ["spin"]})
    assert main(["optimize", "--config", write_config(tmp_path, roles)]) == 1
    assert main(["hf", "--config", write_config(tmp_path, H2), "--threads", "0"]) == 1


def test_scf_nonconvergence_exit(tmp_path):
    cfg = dict(H2, scf={"max_iter": 1})
    assert main(["hf", "--config", write_config(tmp_path, cfg)]) == 2


def test_optimizer_failure_exit(tmp_path):
    cfg = dict(H2, optimize={"free": ["alpha", "d"], "max_steps": 1})
    assert main(["optimize", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


def test_optimize_round_trip(tmp_path, capsys):
    cfg = dict(H2, optimize={"method": "lbfgs-hz", "free": ["alpha", "d"],
                             "correlations": {"share_element": True}})
    p = write_config(tmp_path, cfg)
    assert main(["optimize", "--config", p, "--out", str(tmp_path / "o")]) == 0
    saved = json.loads((tmp_path / "o" / "basis.json").read_text())
    assert saved["status"] == "converged"
    assert saved["E0"] == pytest.approx(-1.837307, abs=1e-6)
    csv = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()
    assert csv[0] == "step,E0,grad_inf,scf_iters,seconds"
    # the saved basis reproduces its energy through the explicit builder
    (tmp_path / "opt.json").write_text(json.dumps(saved))
    again = dict(H2, basis={"kind": "explicit", "path": "opt.json"})
    capsys.readouterr()
    assert main(["hf", "--config", write_config(tmp_path, again, "again.json")]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("E_elec")][0]
    assert float(line.split()[1]) == pytest.approx(saved["E0"], abs=1e-8)
    assert BasisSet.from_dict(saved).W == 2


def test_gradcheck_cli(tmp_path, capsys):
    cfg = dict(H2, optimize={"free": ["alpha", "d", "center"],
                             "correlations": {"share_element": True, "inversion": True}})
    p = write_config(tmp_path, cfg)
    assert main(["gradcheck", "--config", p]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split()[0] == "theta" and len(out) == 10
    assert main(["gradcheck", "--config", p, "--step", "0"]) == 1


def test_gradcheck_all_frozen(tmp_path, capsys):
    cfg = dict(H2, optimize={"free": []})
    assert main(["gradcheck", "--config", write_config(tmp_path, cfg)]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1


def test_units_override(tmp_path, capsys):
    assert main(["hf", "--config", write_config(tmp_path, H2), "--units", "angstrom"]) == 0
    out = capsys.readouterr().out
    e_nuc = float([ln for ln in out.splitlines() if ln.startswith("E_nuc")][0].split()[1])
    assert e_nuc == pytest.approx(1 / (1.4 * 1.8897259886), abs=1e-9)


@pytest.mark.parametrize("name", ["h2_hf.json", "h4_hf.json", "h2_cdo3.json", "h2_gridbox.json"])
def test_shipped_configs(name, capsys):
    assert main(["hf", "--config", example_path(name)]) == 0
