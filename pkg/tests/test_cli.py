import json
import subprocess
import sys

import pytest

from rainbowblowup.cli import EXIT_BREACH, EXIT_BUDGET, EXIT_INVALID, EXIT_OK, gen_instance, main, run_pipeline, verify_report
from rainbowblowup.errors import InstanceError


def test_gen_is_deterministic():
    for kind in ("matchings-blowup", "general-blowup", "partial"):
        assert gen_instance(kind, 7) == gen_instance(kind, 7)
    assert gen_instance("matchings-blowup", 1) != gen_instance("matchings-blowup", 2)


def test_gen_infeasible_palette():
    with pytest.raises(InstanceError):
        gen_instance("matchings-blowup", 0, cluster=10, p=0.9, k=1, palette=5)
    assert main(["gen", "matchings-blowup", "--cluster", "10", "--k", "1", "--palette", "5"]) == EXIT_INVALID


def test_embed_exit_zero_and_verify_roundtrip():
    inst = gen_instance("matchings-blowup", 3, r=3, cluster=20, p=0.7, k=2)
    code, out, rep = run_pipeline("embed", inst, {"seed": 3})
    assert code == EXIT_OK and out["verified"] and rep["verified"]
    again = verify_report(json.loads(json.dumps(inst)), json.loads(json.dumps(out)))
    assert again["ok"]


def brute_ok(inst, phi):
    """Edges land on host edges and colour sets are pairwise disjoint."""
    cols = {(min(u, v), max(u, v)): set(cs) for u, v, cs in inst["G"]["colours"]["assignment"]}
    seen = set()
    for x, y in inst["H"]["edges"]:
        key = (min(phi[x], phi[y]), max(phi[x], phi[y]))
        if key not in cols or cols[key] & seen:
            return False
        seen |= cols[key]
    return True


def test_verify_detects_tampering():
    inst = gen_instance("matchings-blowup", 3, r=3, cluster=20, p=0.7, k=2)
    _, out, _ = run_pipeline("embed", inst, {"seed": 3})
    base = {x: v for x, v in out["phi"]}
    X1 = list(range(20))                      # cluster 1 of H
    broken = 0
    for b in X1[1:]:
        phi = dict(base)
        phi[0], phi[b] = base[b], base[0]     # swap inside a cluster keeps the bijection
        rep = verify_report(inst, {"phi": sorted(phi.items())})
        assert rep["checks"]["bijection"]["ok"]
        assert rep["ok"] == brute_ok(inst, phi)
        broken += not rep["ok"]
    assert broken > 0


def test_verify_structural_mismatch():
    inst = gen_instance("matchings-blowup", 3, r=3, cluster=20, p=0.7, k=2)
    _, out, _ = run_pipeline("embed", inst, {"seed": 3})
    with pytest.raises(InstanceError):
        verify_report(inst, {"phi": out["phi"][:-1]})
    with pytest.raises(InstanceError):
        verify_report(inst, {"phi": [[x, 10**6] for x, _ in out["phi"]]})


def test_invalid_json_and_wrong_kind():
    code, _, rep = run_pipeline("embed", "{not json", {})
    assert code == EXIT_INVALID
    code, _, rep = run_pipeline("tree-embed", gen_instance("matchings-blowup", 0), {})
    assert code == EXIT_INVALID and "dirac-tree" in rep["error"]


def test_budget_exhausted_exit_code():
    inst = gen_instance("matchings-blowup", 0, r=3, cluster=20, p=0.3, k=3)
    code, out, rep = run_pipeline("embed", inst, {"seed": 0, "budget_rounds": 1, "budget_attempts": 1})
    assert code == EXIT_BUDGET
    assert not out["verified"] and "diagnostics" in rep


def test_main_files(tmp_path):
    inst = tmp_path / "inst.json"
    emb = tmp_path / "emb.json"
    rep = tmp_path / "rep.json"
    assert main(["gen", "matchings-blowup", "--seed", "2", "--cluster", "20", "--p", "0.7",
                 "--out", str(inst)]) == EXIT_OK
    assert main(["embed", str(inst), "--seed", "2", "--report", str(rep), "--out", str(emb)]) == EXIT_OK
    out = json.loads(emb.read_text())
    assert out["verified"] and json.loads(rep.read_text())["exit_code"] == EXIT_OK
    assert main(["verify", str(inst), str(emb)]) == EXIT_OK
    out["phi"] = out["phi"][:3]
    emb.write_text(json.dumps(out))
    assert main(["verify", str(inst), str(emb)]) == EXIT_INVALID
    assert main(["embed", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_verify_breach_exit(tmp_path):
    inst = gen_instance("matchings-blowup", 3, r=2, cluster=20, p=0.7, k=2)
    _, out, _ = run_pipeline("embed", inst, {"seed": 3})
    # map one vertex of X_1 to the image of another: no longer a bijection
    out["phi"][0][1] = out["phi"][1][1]
    (tmp_path / "i.json").write_text(json.dumps(inst))
    (tmp_path / "e.json").write_text(json.dumps(out))
    assert main(["verify", str(tmp_path / "i.json"), str(tmp_path / "e.json")]) == EXIT_BREACH


@pytest.mark.parametrize("kind,cmd", [("dirac-tree", "tree-embed"), ("partial", "partial-embed"),
                                      ("quasirandom", "quasirandom-embed")])
def test_app_commands(kind, cmd):
    inst = gen_instance(kind, 1)
    code, out, rep = run_pipeline(cmd, inst, {"seed": 1})
    assert code == EXIT_OK, rep.get("error")
    assert verify_report(inst, out)["ok"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rainbowblowup", "gen", "partial", "--seed", "4"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["kind"] == "partial"
