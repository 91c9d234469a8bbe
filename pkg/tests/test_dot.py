from hpam.dag import HpamDag
from hpam.dot import export_dot, pipeline_clusters
from hpam.hpoa import compute_hpoa
from hpam.measure import make_space, uniform_space
from hpam.model import parse_model
from hpam.pipeline import run_pipeline
from importlib import resources


def test_empty_dag():
    assert export_dot(HpamDag()) == "digraph hpam {\n}\n"


def test_two_vertices_one_edge():
    s = make_space("S", ["a", "b"], None, ["1/2", "1/2"])
    t = make_space("T", ["x"], None, ["1"])
    dag = HpamDag().add_vertex(s).add_vertex(t).add_edge("S", "T", {"a": "x", "b": "x"})
    text = export_dot(dag)
    assert text.count("->") == 1
    assert '"S" -> "T" [label="generic"];' in text
    assert '"S" [label="S\\n2 atoms"];' in text
    assert '"T" [label="T\\n1 atom"];' in text
    assert "rankdir=BT;" in text
    assert export_dot(dag) == text


def test_hpoa_annotation():
    s = uniform_space("S", list("abcd"))
    r = compute_hpoa(s, [set("ab")])
    dag = HpamDag().add_vertex(s).add_vertex(r.quotient).add_edge("S", r.quotient.id, r.quotient_map)
    assert 'shape=doubleoctagon' in export_dot(dag, r)


def test_pipeline_clusters_in_stage_order():
    doc = parse_model((resources.files("hpam") / "fixtures" / "alzheimer.hpam").read_text())
    out = run_pipeline(doc.pipeline_spec())
    clusters = pipeline_clusters(out)
    assert [c[0] for c in clusters] == ["base", "stage 1: direct", "stage 2: direct", "stage 3: divergent",
                                        "stage 4: convergent", "hpoa"]
    text = export_dot(out.dag, out.hpoa, clusters)
    positions = [text.index(f"cluster_{i}") for i in range(1, 7)]
    assert positions == sorted(positions)
