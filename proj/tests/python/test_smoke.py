import pathlib

import pytest

import acme

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_parse_query_fields():
    q = acme.parse_query("/ising?port=9100&sensor=load&op=avg&epoch=5000")
    assert q["port"] == 9100
    assert q["op"] == "AVG"
    assert q["host"] is None
    assert q["epoch_ms"] == 5000


def test_parse_query_rejects_unknown_field():
    with pytest.raises(ValueError):
        acme.parse_query("/ising?port=1&sensor=s&op=MIN&colour=red")


@pytest.mark.parametrize(
    "op,expected",
    [("MIN", ["1"]), ("MAX", ["9"]), ("SUM", ["15"]), ("COUNT", ["4"]), ("MEDIAN", ["2"]), ("AVG", ["3.75"])],
)
def test_aggregate_matches_central(op, expected):
    assert acme.aggregate(op, ["9", "1", "2", "3"]) == expected


def test_node_timeout():
    assert acme.node_timeout(3, 8, 100.0, 150.0) == 1250.0
    assert acme.node_timeout(8, 8, 100.0, 150.0) == 0.0


def test_tree_shape_is_rooted():
    rows = acme.tree_shape(64, [1, 2])
    assert [r["seed"] for r in rows] == [1, 2]
    assert all(r["max_depth"] >= 1 and r["root_children"] >= 1 for r in rows)


def test_scenario_run_writes_csv(tmp_path):
    written = acme.run_scenario(ROOT / "scenarios" / "tree.ini", tmp_path)
    assert written and all(pathlib.Path(p).exists() for p in written)
