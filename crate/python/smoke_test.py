#!/usr/bin/env python3
"""Smoke test for the coda_py extension module.

Builds nothing itself: run `cargo build -p coda-py [--release]` first, then
`python3 python/smoke_test.py`. The script locates the compiled cdylib under
target/, exposes it as an importable module, and drives the main surface.
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_coda_py():
    names = ["libcoda_py.so", "coda_py.so", "libcoda_py.dylib", "coda_py.pyd"]
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in names
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("coda_py is not built; run `cargo build -p coda-py` first")
    stage = Path(tempfile.mkdtemp(prefix="coda_py_"))
    shutil.copy2(built, stage / "coda_py.so")
    sys.path.insert(0, str(stage))
    import coda_py

    return coda_py


def main():
    coda_py = import_coda_py()

    # The bundled five-by-four walkthrough instance, played as one game.
    s = coda_py.Scenario.load(str(REPO / "scenarios" / "fig1_trace.json"))
    r = s.place(mode="static")
    assert r.stable is True, r
    assert r.unplaced == [], r.unplaced
    assert r.assignment == {
        "m1": "r1",
        "m2": "r4",
        "m3": "r1",
        "m4": "r3",
        "m5": "r4",
    }, r.assignment
    assert r.trace[0] == "1 S2 m1 r1" and r.trace[-1] == "10 S2 m4 r3", r.trace
    assert sorted(r.alloc["r1"]) == ["m1", "m3"]

    # The seven-microservice application, staged mode plus both objectives.
    t = coda_py.Scenario.load(str(REPO / "scenarios" / "traffic_sign.json"))
    placed = t.place()
    assert placed.stable is True
    report = t.evaluate(placed)
    assert report["completion_time_s"] > 0
    assert report["total_traffic"] >= 0
    assert len(report["per_microservice_completion"]) == len(t.microservice_ids)

    # Baselines share the evaluation path.
    heft = t.heft_oc()
    assert heft.stable is None
    heft_report = t.evaluate(heft)
    assert report["completion_time_s"] <= heft_report["completion_time_s"]
    assert report["total_traffic"] <= heft_report["total_traffic"]
    for result in (t.rtr_rp(), t.cloudpath()):
        assert t.evaluate(result)["completion_time_s"] > 0

    # Sweeps: 4 algorithms x 4 points, deterministic CSV.
    rows = coda_py.run_sweep(t, kind="cpu")
    assert len(rows) == 16
    assert all(row["error"] is None for row in rows)
    csv_a = coda_py.sweep_csv(t, kind="cpu")
    csv_b = coda_py.sweep_csv(t, kind="cpu")
    assert csv_a == csv_b and csv_a.splitlines()[0].startswith("algorithm,")

    # Deterministic generation round-trips through JSON.
    g1 = coda_py.Scenario.generate(seed=11, microservices=9, resources=6)
    g2 = coda_py.Scenario.generate(seed=11, microservices=9, resources=6)
    assert g1.to_json() == g2.to_json()
    again = coda_py.Scenario.from_json(g1.to_json())
    assert again.microservice_ids == g1.microservice_ids
    assert g1.place().stable is True

    print("coda_py smoke test: PASS")


if __name__ == "__main__":
    main()
