import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from crjets.cli import (
    EXIT_FAIL,
    EXIT_INPUT,
    EXIT_OK,
    jet_document,
    manifold_document,
    map_document,
    read_jet,
    read_map,
    read_submanifold,
    run_command,
)
from crjets.mapping import FormalMap, jet
from corpus import heisenberg, heisenberg_automorphisms

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def sample(name: str) -> str:
    return str(SAMPLES / f"{name}.json")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def fields(text: str) -> dict[str, str]:
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line and not line.startswith(" "))


def test_analyze_heisenberg():
    code, out, _ = run("analyze", sample("heisenberg"))
    f = fields(out)
    assert code == EXIT_OK
    assert f["finite_type"] == "finite" and f["hormander_numbers"] == "[2]"
    assert f["ell0"] == "1" and f["k1"] == "2"
    assert f["finite_type_cross_check"] == "agree"


def test_analyze_flat():
    code, out, _ = run("analyze", sample("flat"))
    f = fields(out)
    assert code == EXIT_OK
    assert f["finite_type"] == "infinite" and f["holomorphically_nondegenerate"] == "no"
    assert f["witness"] == "d/dz"


def test_analyze_other_samples():
    f = fields(run("analyze", sample("ell2"), "--max-ell", 3)[1])
    assert f["ell0"] == "2"
    f = fields(run("analyze", sample("quartic"), "--max-ell", 4)[1])
    assert f["ell0"] == "-" and f["hormander_numbers"] == "[4]"
    f = fields(run("analyze", sample("partial"))[1])
    assert f["holomorphically_nondegenerate"] == "no"


def test_determine_equal():
    code, out, _ = run("determine", sample("heisenberg"), "--map1", sample("id"), "--map2", sample("ext"),
                       "--k0", 2)
    assert code == EXIT_OK
    assert fields(out)["message"] == "equal up to degree 8"


def test_determine_with_cross_check():
    code, out, _ = run("determine", sample("heisenberg"), "--map1", sample("id"), "--map2", sample("ext"),
                       "--cap", 14, "--cross-check")
    f = fields(out)
    assert code == EXIT_OK
    assert f["degreewise_status"] == "unique" and f["degreewise_agrees"] == "yes"


def test_determine_different_jets_fail():
    code, out, _ = run("determine", sample("heisenberg"), "--map1", sample("id"),
                       "--map2", sample("dilation"))
    assert code == EXIT_FAIL and fields(out)["verdict"] == "precondition"


def test_segre_report():
    code, out, _ = run("segre", sample("heisenberg"), "--k", 4, "--diagonal-max", 2)
    assert code == EXIT_OK
    assert "2i*z*chi1 - 2i*chi1*z1 + 2i*z1*chi2" in out
    assert fields(out)["ranks"] == "[1, 2, 2, 2]"
    assert out.count("k=1: ok") == 1 and out.count("k=2: ok") == 1


def test_mapcheck():
    code, out, _ = run("mapcheck", sample("heisenberg"), "--map", sample("parabolic"))
    assert code == EXIT_OK and fields(out)["basic_identity"] == "ok"
    code, out, _ = run("mapcheck", sample("heisenberg"), "--map", sample("shear"))
    assert code == EXIT_FAIL and fields(out)["maps_into"] == "no"
    code, out, _ = run("mapcheck", sample("partial"), "--map", sample("projection"),
                       "--target", sample("heisenberg"))
    assert code == EXIT_OK and fields(out)["cr_submersive"] == "yes"


def test_parametrize_round_trip():
    code, out, _ = run("parametrize", sample("heisenberg"), "--map", sample("parabolic"), "--cap", 13)
    f = fields(out)
    assert code == EXIT_OK
    assert f["degree"] == "3" and f["reproduces_input"] == "yes" and f["cancellation"] == "ok"


def test_parametrize_from_jet_file(tmp_path):
    H = heisenberg_automorphisms(13)["dilation2"]
    p = tmp_path / "jet.json"
    p.write_text(json.dumps(jet_document(jet(H, 2, 1))))
    code, out, _ = run("parametrize", sample("heisenberg"), "--jet", p, "--cap", 13, "--format", "machine")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["status"] == "ok"
    q = tmp_path / "map.json"
    q.write_text(json.dumps(doc["map"]))
    assert read_map(str(q), 1, 1) == H.with_cap(3)


def test_variety_evaluations(tmp_path):
    L = jet(FormalMap.identity(1, 1, 13), 2, 1).replace({(1, (0, 1)): 2})
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(jet_document(L)))
    code, out, _ = run("variety", sample("heisenberg"), "--cap", 13, "--truncation", 3,
                       "--map", sample("dilation"), "--jet", p)
    assert code == EXIT_FAIL
    assert "dilation.json: in variety" in out and "bad.json: violates" in out
    code, out, _ = run("variety", sample("heisenberg"), "--cap", 13, "--truncation", 3,
                       "--map", sample("parabolic"))
    assert code == EXIT_OK


def test_variety_machine_format():
    code, out, _ = run("variety", sample("heisenberg"), "--cap", 13, "--truncation", 3, "--format", "machine")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["equations"] == len(doc["system"])
    labels = {e["label"] for e in doc["system"]}
    assert all(e["conjugate"] in labels for e in doc["system"])


# ---------------------------------------------------------------------------
# input errors

def test_missing_file():
    code, out, err = run("analyze", "no/such/file.json")
    assert code == EXIT_INPUT and out == "" and "no/such/file.json" in err


def test_json_syntax_error_has_line_and_column(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"cap": 8,\n "n": 1,\n "graph": [}\n')
    code, _, err = run("analyze", p)
    assert code == EXIT_INPUT and f"{p}:3:" in err


@pytest.mark.parametrize("doc, where", [
    ({"n": 1, "graph": [[]]}, ":cap"),
    ({"cap": 8, "graph": [[]]}, ":n"),
    ({"cap": 8, "n": 1}, "exactly one of"),
    ({"cap": 8, "n": 1, "graph": [[{"re": [1, 0], "exp": [1, 1, 0]}]]}, ":graph[0][0].re"),
    ({"cap": 8, "n": 1, "graph": [[{"re": [1, 1], "exp": [1, 1]}]]}, ":graph[0][0].exp"),
    ({"cap": 8, "n": 1, "graph": [[{"re": [1, 1], "exp": [1, 0, 0]}]]}, ":graph[0]"),
    ({"cap": 8, "n": 1, "graph": [[{"re": [1, 1], "exp": [1, 1, 0], "x": 1}]]}, "unknown keys"),
    ({"cap": "8", "n": 1, "graph": [[]]}, ":cap"),
    ({"cap": 8, "n": 1, "rho": [[{"re": [1, 1], "exp": [1, 0, 0, 0]}]]}, ":rho"),
])
def test_malformed_submanifold(tmp_path, doc, where):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    code, out, err = run("analyze", p)
    assert code == EXIT_INPUT and out == ""
    assert err.startswith(f"error: {p}") and where in err


def test_map_dimension_mismatch():
    code, _, err = run("mapcheck", sample("heisenberg"), "--map", sample("ext"), "--target", sample("sphere3"))
    assert code == EXIT_INPUT and "ext.json:n_dst" in err


def test_bad_arguments():
    assert run("analyze", sample("heisenberg"), "--cap", 1)[0] == EXIT_INPUT
    assert run("bogus")[0] == EXIT_INPUT
    assert run("determine", sample("heisenberg"), "--map1", sample("id"), "--map2", sample("id"),
               "--jtilde", "x")[0] == EXIT_INPUT
    assert run("analyze", sample("heisenberg"), "--max-length", 9)[0] == EXIT_INPUT
    assert run("parametrize", sample("heisenberg"))[0] == EXIT_INPUT


# ---------------------------------------------------------------------------
# serialization and determinism

def test_documents_round_trip(tmp_path):
    M = heisenberg(8)
    p = tmp_path / "m.json"
    p.write_text(json.dumps(manifold_document(M)))
    assert read_submanifold(str(p)).Q == M.Q
    H = heisenberg_automorphisms(8)["parabolic1/2"]
    p.write_text(json.dumps(map_document(H)))
    assert read_map(str(p), 1, 1) == H
    L = jet(H, 3, 1)
    p.write_text(json.dumps(jet_document(L)))
    assert read_jet(str(p)) == L


def test_graph_and_normal_form_inputs_agree(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(manifold_document(read_submanifold(sample("heisenberg")))))
    a = json.loads(run("analyze", p, "--format", "machine")[1])
    b = json.loads(run("analyze", sample("heisenberg"), "--format", "machine")[1])
    a.pop("name"), b.pop("name")
    assert a == b


@pytest.mark.parametrize("argv", [
    ["analyze", "heisenberg"],
    ["segre", "quartic", "--k", 3],
    ["mapcheck", "heisenberg", "--map", "parabolic"],
])
@pytest.mark.parametrize("fmt", ["text", "machine"])
def test_reports_are_deterministic(argv, fmt):
    args = [sample(a) if a in ("heisenberg", "quartic", "parabolic") else a for a in argv]
    first = run(*args, "--format", fmt)
    assert first[0] in (EXIT_OK, EXIT_FAIL)
    assert run(*args, "--format", fmt) == first
    if fmt == "machine":
        json.loads(first[1])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "crjets", "analyze", sample("heisenberg")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "hormander_numbers: [2]" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "crjets", "analyze", "missing.json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2 and proc.stderr.startswith("error: missing.json")
