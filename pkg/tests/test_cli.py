"""End-to-end command-line tests driving cli.main with in-process argv.

The exit-code contract: 0 success, 2 inconclusive/infeasible primary query,
3 solver failure, 4 bad input.
"""

import json

import pytest

from lhsmodels import cli, lhs
from lhsmodels.operators import DensityMatrix, operator_from_json
from lhsmodels.states import sample_hs, RngStream


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture()
def werner_file(tmp_path):
    path = tmp_path / "w42.json"
    assert run("make-state", "--family", "werner", "--params", "w=0.42",
               "--out", str(path)) == 0
    return path


@pytest.fixture()
def phi_plus_file(tmp_path):
    path = tmp_path / "phi.json"
    assert run("make-state", "--family", "phi-plus", "--out", str(path)) == 0
    return path


def test_insphere_solid(capsys):
    assert run("insphere", "--solid", "icosahedron") == 0
    out = capsys.readouterr().out
    assert "measurements: 6" in out
    assert "vertices: 12" in out
    assert "0.79465" in out


def test_insphere_random_and_errors(capsys, tmp_path):
    dest = tmp_path / "set.json"
    assert run("insphere", "--random", "8", "--seed", "3",
               "--out", str(dest)) == 0
    out = capsys.readouterr().out
    assert "measurements: 8" in out
    doc = json.loads(dest.read_text())
    assert len(doc["directions"]) == 8
    assert run("insphere") == 4


def test_make_state_validation(tmp_path):
    assert run("make-state", "--family", "unobtainium") == 4
    assert run("make-state", "--family", "werner") == 4
    assert run("make-state", "--family", "werner", "--params", "w=oops") == 4
    path = tmp_path / "ghz.json"
    assert run("make-state", "--family", "noisy-ghz", "--params", "p=0.1",
               "--out", str(path)) == 0
    doc = json.loads(path.read_text())
    assert doc["dims"] == [2, 2, 2]


def test_sample_writes_states(tmp_path):
    out = tmp_path / "draws"
    assert run("sample", "--measure", "bures", "--n", "4", "--seed", "6",
               "--out", str(out)) == 0
    files = sorted(out.glob("state-*.json"))
    assert len(files) == 4
    assert run("sample", "--measure", "uniform") == 4


class TestCertify:
    def test_certified_writes_certificate(self, tmp_path, werner_file, capsys):
        cert_path = tmp_path / "w42.cert.json"
        code = run("certify", "--state", str(werner_file),
                   "--solid", "icosahedron", "--out", str(cert_path))
        assert code == 0
        out = capsys.readouterr().out
        assert "certified" in out
        cert = lhs.certificate_from_json(json.loads(cert_path.read_text()))
        rho = DensityMatrix(operator_from_json(
            json.loads(werner_file.read_text())))
        assert lhs.verify_certificate(cert, rho).ok(1e-6)

    def test_inconclusive_is_exit_2(self, phi_plus_file):
        assert run("certify", "--state", str(phi_plus_file),
                   "--solid", "octahedron") == 2

    def test_solver_failure_is_exit_3(self, tmp_path, werner_file):
        cfg = tmp_path / "hard.cfg"
        cfg.write_text("# starve the solver\nmax-iterations = 1\n")
        assert run("certify", "--state", str(werner_file),
                   "--config", str(cfg)) == 3

    def test_bad_input_is_exit_4(self, tmp_path, werner_file):
        assert run("certify", "--state", str(tmp_path / "nope.json")) == 4
        assert run("certify", "--state", str(werner_file),
                   "--mode", "weird") == 4

    def test_multipartite_state_routes_by_dims(self, tmp_path):
        path = tmp_path / "ghz.json"
        run("make-state", "--family", "noisy-ghz", "--params", "p=0.1",
            "--out", str(path))
        assert run("certify", "--state", str(path), "--solid", "octahedron",
                   "--out", str(tmp_path / "ghz.cert.json")) == 0


def test_family_prints_threshold(tmp_path, capsys):
    assert run("family", "--family", "werner", "--solid", "icosahedron",
               "--out", str(tmp_path / "f.cert.json")) == 0
    out = capsys.readouterr().out
    assert "theta*: 0.428592" in out


def test_witness_writes_operator(tmp_path, werner_file, capsys):
    dest = tmp_path / "w.witness.json"
    assert run("witness", "--state", str(werner_file), "--kind", "negativity",
               "--out", str(dest)) == 0
    out = capsys.readouterr().out
    assert "mu*: 0.06500000" in out
    doc = json.loads(dest.read_text())
    assert doc["kind"] == "negativity"
    assert operator_from_json(doc["W"]).dims == (2, 2)


def test_gme_reports_value_and_decompositions(tmp_path, capsys):
    state = tmp_path / "ghz.json"
    run("make-state", "--family", "noisy-ghz", "--params", "p=0.1",
        "--out", str(state))
    dest = tmp_path / "ghz.gme.json"
    assert run("gme", "--state", str(state), "--out", str(dest)) == 0
    doc = json.loads(dest.read_text())
    assert set(doc["decompositions"]) == {"A|BC", "B|AC", "C|AB"}
    assert doc["value"] > 0  # this state is not genuinely multipartite


def test_volume_summary_cites_reference_values(tmp_path, capsys):
    assert run("volume", "--count", "12", "--seed", "42",
               "--out", str(tmp_path / "vol")) == 0
    out = capsys.readouterr().out
    assert "separable fraction" in out
    assert "0.242" in out
    assert "0.19" in out and "0.25" in out
    assert (tmp_path / "vol" / "records.csv").exists()
    assert (tmp_path / "vol" / "summary.json").exists()


def test_bisect_amplitude_damped(capsys):
    assert run("bisect", "--family", "amplitude-damped",
               "--solid", "icosahedron", "--bracket", "0.3,0.9",
               "--tol", "0.02") == 0
    assert "theta*: 0.337500" in capsys.readouterr().out


def test_bisect_argument_errors():
    assert run("bisect", "--family", "amplitude-damped",
               "--bracket", "nonsense") == 4
    assert run("bisect", "--family", "amplitude-damped",
               "--solid", "icosahedron", "--bracket", "0.05,0.9") == 4


def test_generate_single_run(tmp_path, capsys):
    assert run("generate", "--count", "1", "--seed", "7", "--max-iters", "3",
               "--out", str(tmp_path / "gen")) == 0
    out = capsys.readouterr().out
    assert "negativity: mean 0.07" in out
    assert (tmp_path / "gen" / "generated-states.jsonl").exists()


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "camp.cfg"
    cfg.write_text("count = 6   # small batch\nseed = 42\n")
    assert run("volume", "--config", str(cfg),
               "--out", str(tmp_path / "a")) == 0
    assert "samples: 6" in capsys.readouterr().out
    assert run("volume", "--config", str(cfg), "--count", "4",
               "--out", str(tmp_path / "b")) == 0
    assert "samples: 4" in capsys.readouterr().out


def test_config_file_validation(tmp_path, werner_file):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this line has no equals\n")
    assert run("certify", "--state", str(werner_file),
               "--config", str(bad)) == 4
    assert run("certify", "--state", str(werner_file),
               "--config", str(tmp_path / "missing.cfg")) == 4


def test_load_config_coercion(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\ncount = 12\ntol-feas = 1e-8\n"
                   "solid = cube\nfull = true\n")
    values = cli.load_config(str(cfg))
    assert values == {"count": 12, "tol_feas": 1e-8,
                      "solid": "cube", "full": True}


def test_every_subcommand_is_registered():
    parser = cli.build_parser()
    names = {p.prog.split()[-1] for p in parser.subcommand_parsers}
    assert names == {"insphere", "make-state", "sample", "certify", "family",
                     "witness", "gme", "volume", "bisect", "tables",
                     "generate", "gme-campaign"}


def test_missing_subcommand_is_bad_input():
    assert run() == 4
