"""Entry document parsing, printing, cache behavior, and the fetch client."""

import copy
import json
from pathlib import Path

import httpx
import pytest
from gmpy2 import mpq

from certitrack.belyi import BelyiEntry, P1Model, PlaneModel, SmoothModel
from certitrack.errors import (
    InvalidTriple,
    NetworkError,
    ParseError,
    SchemaMapError,
)
from certitrack.group import Permutation, PermutationTriple
from certitrack.ingest import (
    CacheStore,
    EntryDocument,
    document_for,
    document_from_upstream,
    fetch_entry,
    load_start_fiber,
    parse_entry,
    print_entry,
)
from certitrack.numberfield import NumberField
from certitrack.polysys import MPoly

GOLDEN = Path(__file__).parent / "golden"


def base_doc() -> dict:
    """Minimal valid P1 document: the squaring map."""
    return {
        "label": "pow2",
        "degree": 2,
        "base_field": {
            "min_poly": ["0", "1"],
            "embedding": {"re": "0", "im": "0"},
        },
        "model": {
            "type": "p1",
            "num": {"vars": ["x"], "terms": [{"coeff": ["1"], "exps": [2]}]},
            "den": {"vars": ["x"], "terms": [{"coeff": ["1"], "exps": [0]}]},
        },
        "triple": {"s0": "(1,2)", "s1": "()", "sinf": "(1,2)"},
    }


def parse_doc(doc) -> BelyiEntry:
    return parse_entry(json.dumps(doc))


def broken(path: str, value) -> dict:
    doc = copy.deepcopy(base_doc())
    node = doc
    *steps, last = path.split(".")
    for s in steps:
        node = node[s]
    node[last] = value
    return doc


def perm(s, d):
    return Permutation.from_cycles(s, d)


# ----------------------------------------------------------------- parsing


def test_parse_minimal_p1():
    e = parse_doc(base_doc())
    assert e.label == "pow2" and e.degree == 2
    assert isinstance(e.model, P1Model)
    assert e.field == NumberField([0, 1])
    assert e.embedding_approx == (mpq(0), mpq(0))
    assert e.model.num.terms == {(2,): mpq(1)}
    assert e.expected.s1.is_identity()
    assert e.expected_group_order is None


def test_parse_product_not_identity():
    doc = broken("triple.sinf", "()")
    with pytest.raises(InvalidTriple):
        parse_doc(doc)


def test_parse_zero_denominator_rational():
    doc = broken("model.num.terms", [{"coeff": ["1/0"], "exps": [2]}])
    with pytest.raises(ParseError, match="coeff"):
        parse_doc(doc)


def test_parse_invalid_json():
    with pytest.raises(ParseError, match="invalid JSON"):
        parse_entry("{not json")
    with pytest.raises(ParseError, match="object"):
        parse_entry("[1, 2]")


def test_parse_missing_fields_name_the_path():
    doc = base_doc()
    del doc["model"]["num"]
    with pytest.raises(ParseError, match="model.num"):
        parse_doc(doc)
    doc = base_doc()
    del doc["base_field"]["embedding"]
    with pytest.raises(ParseError, match="base_field.embedding"):
        parse_doc(doc)


def test_parse_bad_cycle_text():
    with pytest.raises(ParseError, match="triple.s0"):
        parse_doc(broken("triple.s0", "(1,2"))
    with pytest.raises(ParseError, match="triple.s1"):
        parse_doc(broken("triple.s1", "(1,7)"))


def test_parse_field_checks():
    with pytest.raises(ParseError, match="squarefree"):
        parse_doc(broken("base_field.min_poly", ["0", "0", "1"]))
    with pytest.raises(ParseError, match="degree"):
        parse_doc(broken("degree", 0))
    with pytest.raises(ParseError, match="degree"):
        parse_doc(broken("degree", "2"))
    with pytest.raises(ParseError, match="label"):
        parse_doc(broken("label", ""))


def test_parse_model_shape_errors():
    with pytest.raises(ParseError, match="model.type"):
        parse_doc(broken("model.type", "weierstrass"))
    bad_terms = [
        {"coeff": ["1"], "exps": [2]},
        {"coeff": ["1"], "exps": [2]},
    ]
    with pytest.raises(ParseError, match="duplicate"):
        parse_doc(broken("model.num.terms", bad_terms))
    with pytest.raises(ParseError, match="exps"):
        parse_doc(broken("model.num.terms", [{"coeff": ["1"], "exps": [2, 0]}]))
    with pytest.raises(ParseError, match="vars"):
        parse_doc(broken("model.num.vars", ["x", "x"]))
    with pytest.raises(ParseError, match="coordinates"):
        parse_doc(broken("model.num.terms", [{"coeff": ["1", "2"], "exps": [2]}]))


def test_parse_group_order():
    doc = base_doc()
    doc["group_order"] = 2
    assert parse_doc(doc).expected_group_order == 2
    doc["group_order"] = "2"
    with pytest.raises(ParseError, match="group_order"):
        parse_doc(doc)


def test_parse_embedding_accepts_decimals():
    doc = broken("base_field.embedding", {"re": "1.25", "im": "-0.5"})
    doc["base_field"]["min_poly"] = ["0", "1"]
    e = parse_doc(doc)
    assert e.embedding_approx == (mpq(5, 4), mpq(-1, 2))
    with pytest.raises(ParseError, match="embedding.re"):
        parse_doc(broken("base_field.embedding", {"re": "abc", "im": "0"}))


def test_parse_smooth_and_plane_models():
    doc = base_doc()
    doc["degree"] = 3
    doc["triple"] = {"s0": "(1,2,3)", "s1": "(1,2,3)", "sinf": "(1,2,3)"}
    xy = ["x", "y"]
    doc["model"] = {
        "type": "smooth",
        "chart": [
            {
                "vars": xy,
                "terms": [
                    {"coeff": ["1"], "exps": [0, 2]},
                    {"coeff": ["-1"], "exps": [3, 0]},
                    {"coeff": ["-1"], "exps": [0, 0]},
                ],
            }
        ],
        "num": {
            "vars": xy,
            "terms": [
                {"coeff": ["1"], "exps": [0, 1]},
                {"coeff": ["1"], "exps": [0, 0]},
            ],
        },
        "den": {"vars": xy, "terms": [{"coeff": ["2"], "exps": [0, 0]}]},
    }
    e = parse_doc(doc)
    assert isinstance(e.model, SmoothModel)
    assert len(e.model.chart_eqs) == 1 and e.model.num.nvars == 2

    doc = base_doc()
    doc["triple"] = {"s0": "()", "s1": "(1,2)", "sinf": "(1,2)"}
    doc["model"] = {
        "type": "plane",
        "curve": {
            "vars": ["t", "x"],
            "terms": [
                {"coeff": ["1"], "exps": [0, 1]},
                {"coeff": ["-1"], "exps": [0, 2]},
                {"coeff": ["-1"], "exps": [1, 0]},
            ],
        },
        "lambda": ["4"],
    }
    e = parse_doc(doc)
    assert isinstance(e.model, PlaneModel)
    assert e.model.lam == mpq(4)


def test_parse_chart_vars_must_agree():
    doc = base_doc()
    doc["degree"] = 3
    doc["triple"] = {"s0": "(1,2,3)", "s1": "(1,2,3)", "sinf": "(1,2,3)"}
    doc["model"] = {
        "type": "smooth",
        "chart": [
            {"vars": ["a", "b"], "terms": [{"coeff": ["1"], "exps": [0, 2]}]}
        ],
        "num": {"vars": ["x", "y"], "terms": [{"coeff": ["1"], "exps": [0, 1]}]},
        "den": {"vars": ["x", "y"], "terms": [{"coeff": ["2"], "exps": [0, 0]}]},
    }
    with pytest.raises(ParseError, match="chart"):
        parse_doc(doc)


def test_parse_nf_lambda():
    doc = base_doc()
    doc["base_field"] = {
        "min_poly": ["-2", "0", "1"],
        "embedding": {"re": "3/2", "im": "0"},
    }
    doc["triple"] = {"s0": "()", "s1": "(1,2)", "sinf": "(1,2)"}
    doc["model"] = {
        "type": "plane",
        "curve": {
            "vars": ["t", "x"],
            "terms": [
                {"coeff": ["0", "1"], "exps": [0, 2]},
                {"coeff": ["-1"], "exps": [1, 0]},
            ],
        },
        "lambda": ["0", "1"],
    }
    e = parse_doc(doc)
    assert e.model.lam == e.field.gen()


# ------------------------------------------------------------- round trips


def rt_fixtures():
    QQ = NumberField([0, 1])
    F2 = NumberField([-2, 0, 1])
    x3 = P1Model(
        num=MPoly(1, {(3,): mpq(1)}), den=MPoly(1, {(0,): mpq(1)})
    )
    yield BelyiEntry(
        label="pow3",
        degree=3,
        field=QQ,
        embedding_approx=(mpq(0), mpq(0)),
        model=x3,
        expected=PermutationTriple(
            perm("(1,2,3)", 3), perm("()", 3), perm("(1,3,2)", 3)
        ),
        expected_group_order=3,
    )
    yield BelyiEntry(
        label="sqrt2-half",
        degree=2,
        field=F2,
        embedding_approx=(mpq(3, 2), mpq(0)),
        model=P1Model(
            num=MPoly(1, {(2,): F2.gen()}), den=MPoly(1, {(0,): mpq(2)})
        ),
        expected=PermutationTriple(
            perm("(1,2)", 2), perm("()", 2), perm("(1,2)", 2)
        ),
    )
    c3 = perm("(1,2,3)", 3)
    yield BelyiEntry(
        label="ell",
        degree=3,
        field=QQ,
        embedding_approx=(mpq(0), mpq(0)),
        model=SmoothModel(
            chart_eqs=[
                MPoly(2, {(0, 2): mpq(1), (3, 0): mpq(-1), (0, 0): mpq(-1)})
            ],
            num=MPoly(2, {(0, 1): mpq(1), (0, 0): mpq(1)}),
            den=MPoly(2, {(0, 0): mpq(2)}),
        ),
        expected=PermutationTriple(c3, c3, c3),
    )
    yield BelyiEntry(
        label="plane-quad",
        degree=2,
        field=QQ,
        embedding_approx=(mpq(0), mpq(0)),
        model=PlaneModel(
            curve=MPoly(2, {(0, 1): mpq(1), (0, 2): mpq(-1), (1, 0): mpq(-1)}),
            lam=mpq(4),
        ),
        expected=PermutationTriple(
            perm("()", 2), perm("(1,2)", 2), perm("(1,2)", 2)
        ),
    )


@pytest.mark.parametrize("entry", list(rt_fixtures()), ids=lambda e: e.label)
def test_round_trip(entry):
    again = parse_entry(print_entry(entry))
    assert again == entry
    # printing is canonical: a second pass is byte-identical
    assert print_entry(again) == print_entry(entry)


def test_document_for():
    entry = next(iter(rt_fixtures()))
    doc = document_for(entry)
    assert doc.label == "pow3" and doc.entry() == entry


# ------------------------------------------------------------------- cache


def test_cache_store_load(tmp_path):
    cache = CacheStore(tmp_path)
    assert not cache.has("pow2")
    doc = EntryDocument(label="pow2", text=json.dumps(base_doc()))
    cache.store(doc)
    assert cache.has("pow2") and cache.labels() == ["pow2"]
    assert cache.load("pow2").text == doc.text
    index = json.loads((tmp_path / "index.json").read_text())
    assert index["pow2"]["fetched_at"] > 0
    with pytest.raises(KeyError):
        cache.load("absent")


def test_cache_overwrite_and_awkward_labels(tmp_path):
    cache = CacheStore(tmp_path)
    cache.store(EntryDocument(label="a/b:c", text="one"))
    cache.store(EntryDocument(label="a/b:c", text="two"))
    assert cache.load("a/b:c").text == "two"
    assert len(list(tmp_path.glob("*.json"))) == 2  # document + index
    raw = cache.store_raw("a/b:c", "payload")
    assert raw.exists() and raw.suffix == ".raw"


def test_cache_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("CERTITRACK_CACHE", str(tmp_path / "envcache"))
    cache = CacheStore()
    assert cache.root == tmp_path / "envcache"
    assert cache.root.is_dir()


# ------------------------------------------------------------- translation


def golden(name: str) -> dict:
    return json.loads((GOLDEN / name).read_text())


def test_upstream_pow3_translates():
    doc = document_from_upstream(golden("upstream_pow3.json"))
    e = doc.entry()
    assert e.label == "3T1-3_3_1.1.1-a" and e.degree == 3
    assert isinstance(e.model, P1Model)
    assert e.model.num.terms == {(3,): mpq(1)}
    assert e.expected.s0 == perm("(1,2,3)", 3)
    assert e.expected.s1.is_identity()
    assert e.expected_group_order == 3


def test_upstream_plane_translates():
    e = document_from_upstream(golden("upstream_plane.json")).entry()
    assert isinstance(e.model, PlaneModel) and e.model.lam == mpq(4)
    assert e.expected.s1 == perm("(1,2)", 2)


def test_upstream_sqrt2_translates():
    e = document_from_upstream(golden("upstream_sqrt2.json")).entry()
    assert e.field == NumberField([-2, 0, 1])
    assert e.model.num.terms == {(2,): e.field.gen()}
    # float embedding hint becomes an exact rational
    assert abs(float(e.embedding_approx[0]) - 1.4142135623730951) < 1e-15


def test_upstream_drift_rejected():
    with pytest.raises(SchemaMapError):
        document_from_upstream(golden("upstream_drift.json"))


def test_upstream_bad_triple_shape():
    record = golden("upstream_pow3.json")
    record["triples"] = [[[[1, 2, "3"]], [], [[1, 3, 2]]]]
    with pytest.raises(SchemaMapError):
        document_from_upstream(record)


def test_upstream_invalid_after_translation():
    record = golden("upstream_pow3.json")
    record["triples"] = [[[[1, 2, 3]], [], [[1, 2, 3]]]]  # product != id
    with pytest.raises(SchemaMapError, match="validate"):
        document_from_upstream(record)


# ------------------------------------------------------------------- fetch


def pow3_transport(counter=None):
    payload = {"data": [golden("upstream_pow3.json")]}

    def handler(request):
        if counter is not None:
            counter.append(request.url.params["label"])
        return httpx.Response(200, json=payload)

    return httpx.MockTransport(handler)


def test_fetch_translates_and_caches(tmp_path):
    cache = CacheStore(tmp_path)
    calls = []
    doc = fetch_entry(
        "3T1-3_3_1.1.1-a", cache, transport=pow3_transport(calls)
    )
    assert doc.entry().degree == 3
    assert calls == ["3T1-3_3_1.1.1-a"]
    assert cache.has("3T1-3_3_1.1.1-a")


def test_fetch_cache_hit_skips_network(tmp_path):
    cache = CacheStore(tmp_path)
    calls = []
    fetch_entry("3T1-3_3_1.1.1-a", cache, transport=pow3_transport(calls))
    doc = fetch_entry("3T1-3_3_1.1.1-a", cache, transport=None)
    assert doc.entry().label == "3T1-3_3_1.1.1-a"
    assert calls == ["3T1-3_3_1.1.1-a"]
    # refresh forces a round trip
    fetch_entry(
        "3T1-3_3_1.1.1-a", cache, refresh=True, transport=pow3_transport(calls)
    )
    assert len(calls) == 2


def test_fetch_http_errors(tmp_path):
    cache = CacheStore(tmp_path)

    def err(code):
        return httpx.MockTransport(lambda req: httpx.Response(code))

    with pytest.raises(NetworkError) as info:
        fetch_entry("nope", cache, transport=err(404))
    assert info.value.status == 404
    with pytest.raises(NetworkError) as info:
        fetch_entry("nope", cache, transport=err(503))
    assert info.value.status == 503

    def boom(request):
        raise httpx.ConnectError("no route")

    with pytest.raises(NetworkError):
        fetch_entry("nope", cache, transport=httpx.MockTransport(boom))


def test_fetch_unknown_label(tmp_path):
    cache = CacheStore(tmp_path)
    transport = httpx.MockTransport(
        lambda req: httpx.Response(200, json={"data": []})
    )
    with pytest.raises(NetworkError) as info:
        fetch_entry("ghost", cache, transport=transport)
    assert info.value.status == 404


def test_fetch_drift_stores_raw(tmp_path):
    cache = CacheStore(tmp_path)
    payload = {"data": [golden("upstream_drift.json")]}
    transport = httpx.MockTransport(
        lambda req: httpx.Response(200, json=payload)
    )
    with pytest.raises(SchemaMapError):
        fetch_entry("9T1-drifted-a", cache, transport=transport)
    assert list(tmp_path.glob("*.raw"))
    assert not cache.has("9T1-drifted-a")


def test_fetch_non_json_stores_raw(tmp_path):
    cache = CacheStore(tmp_path)
    transport = httpx.MockTransport(
        lambda req: httpx.Response(200, text="<html>maintenance</html>")
    )
    with pytest.raises(SchemaMapError):
        fetch_entry("zzz", cache, transport=transport)
    assert list(tmp_path.glob("*.raw"))


# ------------------------------------------------------------ start fibers


def test_load_start_fiber_shapes(tmp_path):
    path = tmp_path / "fiber.json"
    path.write_text(
        json.dumps(
            [
                ["0.707", "0"],
                [["-707/1000", 0]],
                [[0.5, "0.866"], ["0", "0"]],
            ]
        )
    )
    pts = load_start_fiber(path)
    assert pts[0] == [(mpq(707, 1000), mpq(0))]
    assert pts[1] == [(mpq(-707, 1000), mpq(0))]
    assert len(pts[2]) == 2 and pts[2][0][0] == mpq(1, 2)


def test_load_start_fiber_envelope(tmp_path):
    path = tmp_path / "fiber.json"
    path.write_text(json.dumps({"points": [["1/2", "0"]]}))
    assert load_start_fiber(path) == [[(mpq(1, 2), mpq(0))]]


def test_load_start_fiber_errors(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("[]")
    with pytest.raises(ParseError, match="no points"):
        load_start_fiber(empty)
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ParseError, match="JSON"):
        load_start_fiber(bad)
    with pytest.raises(ParseError, match="read"):
        load_start_fiber(tmp_path / "missing.json")
    odd = tmp_path / "odd.json"
    odd.write_text(json.dumps([["1/2", "0", "3"]]))
    with pytest.raises(ParseError):
        load_start_fiber(odd)
