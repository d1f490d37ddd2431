"""Walk through one rainbow blow-up embedding, round by round.

Run:  python3 demos/blowup_walkthrough.py [seed]
"""
import sys

from rainbowblowup.embedder import (EmbedParams, check_feasible, rainbow_blowup_embed, validate_instance,
                                    verify_embedding)
from rainbowblowup.generate import blowup_instance


def main(seed: int = 7) -> None:
    I = blowup_instance("matchings", r=4, cluster=30, p=0.7, k=2, R="cycle", seed=seed)
    st = I.c.stats()
    print(f"host: {I.G.vertex_count} vertices, {len(I.G.edges)} edges, "
          f"{len(st.edge_counts)} colours, each on <= {st.k} edges")
    print(f"target: {len(I.H.edges)} edges, perfect matchings along a {I.r}-cycle")

    val = validate_instance(I, mode="sampled", seed=seed)
    print("validation:", "ok" if val["ok"] else [k for k, v in val["checks"].items() if not v["ok"]])
    print("feasible:", check_feasible(I, {}, D=0)["feasible"])

    res = rainbow_blowup_embed(I, {}, seed=seed, params=EmbedParams(reg_mode="sampled"))
    rep = res.report
    print(f"reservation: {rep['reservation_mode']}, rounds: {rep['T']}")
    for r in rep["rounds"]:
        print(f"  round {r['round']}: clusters {r['clusters']}, attempts {r['attempts']}, "
              f"conflicts {r.get('conflicts', 0)}, sampler draws {r.get('sampler_attempts', 0)}")

    # independent check, nothing shared with the embedder's state
    ver = verify_embedding(I, res.phi)
    print("verified:", ver["ok"], {k: v["ok"] for k, v in ver["checks"].items()})


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
