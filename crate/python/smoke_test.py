"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation -e crates/py
then run:
    python python/smoke_test.py
"""

import json
import os
import sys
import tempfile

import roadfuzz_py as rf


def main() -> int:
    assert "Town01-lite" in rf.towns()

    seeds = rf.seed_generate(3, "Town01-lite", 50.0, 200.0, 0)
    assert len(seeds) == 3
    for s in seeds:
        assert s.is_valid(), s.validate()
        assert s.ego_ids == ["ego_0"]

    # Same arguments, same documents.
    again = rf.seed_generate(3, "Town01-lite", 50.0, 200.0, 0)
    assert [s.to_json() for s in seeds] == [s.to_json() for s in again]

    child = seeds[0].mutate(rng_seed=4, steps=3)
    assert child.is_valid()

    sim = json.dumps({"max_sim_time": 60.0})
    trace = seeds[0].run(agent="builtin:safe_follower", sim=sim)
    assert trace.termination == "all_routes_completed", trace.termination
    verdicts = json.loads(trace.evaluate())
    assert not any(v["violated"] for v in verdicts["verdicts"])

    pool = rf.WorkerPool(workers=2, sim=sim)
    batch = pool.execute(seeds, agent="builtin:safe_follower")
    assert [t.to_json() for t in batch][0] == trace.to_json()

    try:
        rf.seed_generate(1, "Atlantis")
    except ValueError as e:
        assert "Town01-lite" in str(e)
    else:
        raise AssertionError("unknown town accepted")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "trace.json")
        with open(path, "w") as f:
            f.write(trace.to_json())
        frames = rf.replay(path, os.path.join(tmp, "frames"), 100)
        assert frames[-1].endswith("summary.svg")

    print(f"smoke test ok: {len(seeds)} seeds, {trace.steps} steps, {len(batch)} pooled traces")
    return 0


if __name__ == "__main__":
    sys.exit(main())
