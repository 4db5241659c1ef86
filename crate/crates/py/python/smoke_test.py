"""Smoke test for the hamnav extension module.

Build and install first:  pip install --no-build-isolation crates/py
Then run:                 python crates/py/python/smoke_test.py
"""

import json
import math

import hamnav


def check_retention():
    assert hamnav.retention(2, 0) == 0.5
    assert math.isclose(hamnav.retention(0, 0), 1 / (1 + math.exp(-1)), abs_tol=1e-12)
    assert math.isclose(hamnav.retention(4, 1), 1 / (1 + math.exp(1.5)), abs_tol=1e-12)


def check_sketch_round_trip():
    world = hamnav.World.fixture("office_a")
    sketch = world.sketch()
    again = hamnav.Sketch.from_zip(sketch.to_zip())
    assert again.landmarks == sketch.landmarks
    assert again.path == sketch.path
    distorted = world.sketch(jitter=0.05, omission=1.0, seed=3)
    assert distorted.landmarks == []

    topo = sketch.topomap(node_interval=20.0)
    assert len(topo.plan()) == len(topo.junctions) + 1
    assert topo.prune(5, "move forward") == [5, 6]
    assert topo.prune(5) == [4, 5, 6]
    assert json.loads(topo.to_json())["nodes"]


def check_episode():
    world = hamnav.World.fixture("corridor_b")
    metrics, trace = hamnav.run_episode(world, seed=1)
    assert metrics["success"] == 1.0, metrics
    assert 0.9 <= metrics["spl"] <= 1.0
    records = [json.loads(line) for line in trace.splitlines()]
    assert records[0]["record"] == "header"
    assert records[-1]["record"] == "metrics"
    assert len(records) == int(metrics["steps"]) + 2
    _, again = hamnav.run_episode(world, seed=1)
    assert again == trace

    metrics, _ = hamnav.run_episode(world, max_steps=0)
    assert metrics["success"] == 0.0


def check_parsing():
    chosen, scores = hamnav.parse_scored_response('```json\n{"1": 0.2, "3": 0.6}\n```', ["1", "2", "3"])
    assert chosen == "3"
    assert math.isclose(sum(scores.values()), 1.0)
    try:
        hamnav.parse_scored_response("no idea", ["1"])
    except ValueError:
        pass
    else:
        raise AssertionError("unparseable response accepted")
    assert hamnav.spl(True, 10.0, 20.0) == 0.5
    assert hamnav.spl(False, 10.0, 10.0) == 0.0


def main():
    check_retention()
    check_sketch_round_trip()
    check_episode()
    check_parsing()
    print("hamnav smoke test passed")


if __name__ == "__main__":
    main()
