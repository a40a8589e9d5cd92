"""Entry documents: schema, parsing, cache, and the upstream fetch client.

An entry document is a JSON object with exact rational data throughout;
the only place decimal notation is tolerated is the embedding hint and
start-fiber files, where values are approximations by nature.

    {
      "label": str,
      "degree": int,
      "base_field": {
        "min_poly": [str, ...],              low to high degree
        "embedding": {"re": str, "im": str}
      },
      "model": {"type": "p1" | "smooth" | "plane", ...},
      "triple": {"s0": str, "s1": str, "sinf": str},
      "group_order": int                     optional
    }

Polynomials are sparse term lists

    {"vars": [str, ...],
     "terms": [{"coeff": [str, ...], "exps": [int, ...]}, ...]}

where coeff gives power-basis coordinates of the field generator and
exps matches vars positionally.  Model payloads:

    p1      {"num": poly, "den": poly}                   one variable
    smooth  {"chart": [poly, ...], "num": poly, "den": poly}
    plane   {"curve": poly, "lambda": [str, ...]}        vars (t, x)

For plane models the first variable is the map value t and the second
the coordinate x.  Unknown top-level keys are ignored so documents can
carry annotations.
"""

import hashlib
import json
import os
import re as _re
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import httpx
from gmpy2 import mpq

from .belyi import BelyiEntry, P1Model, PlaneModel, SmoothModel
from .errors import InvalidTriple, NetworkError, ParseError, SchemaMapError
from .group import Permutation, PermutationTriple
from .numberfield import NFElement, NumberField
from .polysys import MPoly

CACHE_ENV = "CERTITRACK_CACHE"
DEFAULT_ENDPOINT = "https://www.lmfdb.org/api/belyi_galmaps"
_VAR_POOL = ("x", "y", "z", "w", "u", "v")


# ----------------------------------------------------------------- parsing


def _fail(where: str, what: str) -> ParseError:
    return ParseError(f'field "{where}": {what}')


def _get(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise _fail(where, "expected an object")
    if key not in obj:
        raise _fail(f"{where}.{key}" if where else key, "missing")
    return obj[key]


def _rat(v, where: str) -> mpq:
    """Exact rational from an 'a/b' or integer string."""
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise _fail(where, f"expected an exact rational string, got {v!r}")
    try:
        return mpq(v)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise _fail(where, f"not a rational: {v!r}") from exc


def _rat_hint(v, where: str) -> mpq:
    """Rational from approximate input: a/b, decimal, or a JSON number."""
    if isinstance(v, bool):
        raise _fail(where, f"expected a number, got {v!r}")
    try:
        if isinstance(v, float):
            return mpq(Fraction(v))
        if isinstance(v, int):
            return mpq(v)
        if isinstance(v, str):
            try:
                return mpq(v)
            except (ValueError, ZeroDivisionError):
                return mpq(Fraction(v))
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise _fail(where, f"not a number: {v!r}") from exc
    raise _fail(where, f"expected a number, got {v!r}")


def _coeff(v, nf: NumberField, where: str):
    """Power-basis coordinate list -> mpq for Q, NFElement otherwise."""
    if not isinstance(v, list) or not v:
        raise _fail(where, "coefficient must be a non-empty coordinate list")
    if len(v) > nf.degree:
        raise _fail(
            where, f"{len(v)} coordinates in a degree {nf.degree} field"
        )
    coords = [_rat(c, f"{where}[{i}]") for i, c in enumerate(v)]
    if nf.degree == 1:
        return coords[0]
    return nf.element(coords)


def _parse_poly(obj, nf: NumberField, where: str, nvars: Optional[int] = None):
    vars_ = _get(obj, "vars", where)
    if (
        not isinstance(vars_, list)
        or not vars_
        or not all(isinstance(s, str) and s for s in vars_)
        or len(set(vars_)) != len(vars_)
    ):
        raise _fail(f"{where}.vars", "expected distinct variable names")
    if nvars is not None and len(vars_) != nvars:
        raise _fail(f"{where}.vars", f"expected {nvars} variables")
    n = len(vars_)
    terms_ = _get(obj, "terms", where)
    if not isinstance(terms_, list):
        raise _fail(f"{where}.terms", "expected a list")
    terms = {}
    for i, t in enumerate(terms_):
        here = f"{where}.terms[{i}]"
        exps = _get(t, "exps", here)
        if (
            not isinstance(exps, list)
            or len(exps) != n
            or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exps)
        ):
            raise _fail(f"{here}.exps", f"expected {n} non-negative integers")
        key = tuple(exps)
        if key in terms:
            raise _fail(f"{here}.exps", f"duplicate exponent tuple {exps}")
        terms[key] = _coeff(_get(t, "coeff", here), nf, f"{here}.coeff")
    return MPoly(n, terms), list(vars_)


def _parse_model(obj, nf: NumberField):
    typ = _get(obj, "type", "model")
    if typ == "p1":
        num, _ = _parse_poly(_get(obj, "num", "model"), nf, "model.num", 1)
        den, _ = _parse_poly(_get(obj, "den", "model"), nf, "model.den", 1)
        return P1Model(num=num, den=den)
    if typ == "smooth":
        charts = _get(obj, "chart", "model")
        if not isinstance(charts, list) or not charts:
            raise _fail("model.chart", "expected a non-empty list")
        num, names = _parse_poly(_get(obj, "num", "model"), nf, "model.num")
        den, dn = _parse_poly(_get(obj, "den", "model"), nf, "model.den")
        eqs = []
        for i, c in enumerate(charts):
            g, gn = _parse_poly(c, nf, f"model.chart[{i}]")
            if gn != names:
                raise _fail(f"model.chart[{i}].vars", f"expected {names}")
            eqs.append(g)
        if dn != names:
            raise _fail("model.den.vars", f"expected {names}")
        return SmoothModel(chart_eqs=eqs, num=num, den=den)
    if typ == "plane":
        curve, _ = _parse_poly(_get(obj, "curve", "model"), nf, "model.curve", 2)
        lam = _coeff(_get(obj, "lambda", "model"), nf, "model.lambda")
        return PlaneModel(curve=curve, lam=lam)
    raise _fail("model.type", f"unknown model type {typ!r}")


def _parse_perm(v, degree: int, where: str) -> Permutation:
    if not isinstance(v, str):
        raise _fail(where, "expected cycle notation text")
    try:
        return Permutation.from_cycles(v, degree)
    except ValueError as exc:
        raise _fail(where, str(exc)) from exc


def parse_entry(text: str) -> BelyiEntry:
    """Parse and validate one entry document.

    Raises ParseError with a field path for structural problems and
    InvalidTriple when the permutations are well-formed but fail the
    product-identity or degree checks.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("entry document must be a JSON object")

    label = _get(doc, "label", "")
    if not isinstance(label, str) or not label:
        raise _fail("label", "expected a non-empty string")
    degree = _get(doc, "degree", "")
    if isinstance(degree, bool) or not isinstance(degree, int) or degree < 1:
        raise _fail("degree", "expected a positive integer")

    bf = _get(doc, "base_field", "")
    mp = _get(bf, "min_poly", "base_field")
    if not isinstance(mp, list) or not mp:
        raise _fail("base_field.min_poly", "expected a coefficient list")
    coeffs = [_rat(c, f"base_field.min_poly[{i}]") for i, c in enumerate(mp)]
    try:
        nf = NumberField(coeffs)
    except ValueError as exc:
        raise _fail("base_field.min_poly", str(exc)) from exc
    emb = _get(bf, "embedding", "base_field")
    re_q = _rat_hint(_get(emb, "re", "base_field.embedding"), "base_field.embedding.re")
    im_q = _rat_hint(_get(emb, "im", "base_field.embedding"), "base_field.embedding.im")

    model = _parse_model(_get(doc, "model", ""), nf)

    trip = _get(doc, "triple", "")
    s0 = _parse_perm(_get(trip, "s0", "triple"), degree, "triple.s0")
    s1 = _parse_perm(_get(trip, "s1", "triple"), degree, "triple.s1")
    sinf = _parse_perm(_get(trip, "sinf", "triple"), degree, "triple.sinf")
    expected = PermutationTriple(s0, s1, sinf)

    order = doc.get("group_order")
    if order is not None and (
        isinstance(order, bool) or not isinstance(order, int) or order < 1
    ):
        raise _fail("group_order", "expected a positive integer")

    return BelyiEntry(
        label=label,
        degree=degree,
        field=nf,
        embedding_approx=(re_q, im_q),
        model=model,
        expected=expected,
        expected_group_order=order,
    )


# ---------------------------------------------------------------- printing


def _names(n: int) -> list:
    if n <= len(_VAR_POOL):
        return list(_VAR_POOL[:n])
    return [f"x{i + 1}" for i in range(n)]


def _coeff_obj(c, nf: NumberField) -> list:
    """Always the full power-basis vector, so printing is canonical."""
    if isinstance(c, NFElement):
        return [str(q) for q in c.coeffs]
    return [str(mpq(c))] + ["0"] * (nf.degree - 1)


def _poly_obj(p: MPoly, names: list, nf: NumberField) -> dict:
    terms = [
        {"coeff": _coeff_obj(p.terms[e], nf), "exps": list(e)}
        for e in sorted(p.terms)
    ]
    return {"vars": names, "terms": terms}


def _model_obj(model, nf: NumberField) -> dict:
    if isinstance(model, P1Model):
        names = _names(1)
        return {
            "type": "p1",
            "num": _poly_obj(model.num, names, nf),
            "den": _poly_obj(model.den, names, nf),
        }
    if isinstance(model, SmoothModel):
        names = _names(model.num.nvars)
        return {
            "type": "smooth",
            "chart": [_poly_obj(g, names, nf) for g in model.chart_eqs],
            "num": _poly_obj(model.num, names, nf),
            "den": _poly_obj(model.den, names, nf),
        }
    if isinstance(model, PlaneModel):
        return {
            "type": "plane",
            "curve": _poly_obj(model.curve, ["t", "x"], nf),
            "lambda": _coeff_obj(model.lam, nf),
        }
    raise TypeError(f"unknown model type {type(model).__name__}")


def print_entry(entry: BelyiEntry) -> str:
    """Serialize an entry so that parse_entry round-trips it exactly."""
    re_q, im_q = entry.embedding_approx
    doc = {
        "label": entry.label,
        "degree": entry.degree,
        "base_field": {
            "min_poly": [str(c) for c in entry.field.min_poly],
            "embedding": {"re": str(re_q), "im": str(im_q)},
        },
        "model": _model_obj(entry.model, entry.field),
        "triple": {
            "s0": entry.expected.s0.to_cycles(),
            "s1": entry.expected.s1.to_cycles(),
            "sinf": entry.expected.sinf.to_cycles(),
        },
    }
    if entry.expected_group_order is not None:
        doc["group_order"] = entry.expected_group_order
    return json.dumps(doc, indent=2) + "\n"


# ------------------------------------------------------------------- cache


@dataclass(frozen=True)
class EntryDocument:
    """Serialized entry exactly as cached on disk."""

    label: str
    text: str

    def entry(self) -> BelyiEntry:
        return parse_entry(self.text)


def document_for(entry: BelyiEntry) -> EntryDocument:
    return EntryDocument(label=entry.label, text=print_entry(entry))


def _safe_name(label: str) -> str:
    safe = _re.sub(r"[^-._A-Za-z0-9]", "_", label)
    if safe != label:
        safe += "-" + hashlib.sha256(label.encode()).hexdigest()[:8]
    return safe


class CacheStore:
    """Directory of fetched entry documents keyed by label.

    index.json maps labels to file names and fetch timestamps; document
    writes go through a temp file and rename, so a reader never sees a
    half-written file.  A missing root defaults to the CERTITRACK_CACHE
    environment variable, then to ~/.cache/certitrack.
    """

    def __init__(self, root=None):
        if root is None:
            root = os.environ.get(CACHE_ENV) or (
                Path.home() / ".cache" / "certitrack"
            )
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "index.json"

    def _index(self) -> dict:
        if not self._index_path.exists():
            return {}
        try:
            return json.loads(self._index_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"corrupt cache index {self._index_path}: {exc}")

    def _write(self, path: Path, text: str):
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def has(self, label: str) -> bool:
        row = self._index().get(label)
        return row is not None and (self.root / row["file"]).exists()

    def load(self, label: str) -> EntryDocument:
        row = self._index().get(label)
        if row is None:
            raise KeyError(label)
        return EntryDocument(
            label=label, text=(self.root / row["file"]).read_text()
        )

    def store(self, doc: EntryDocument, fetched_at: Optional[float] = None):
        index = self._index()
        name = _safe_name(doc.label) + ".json"
        taken = {row["file"] for lab, row in index.items() if lab != doc.label}
        while name in taken:
            name = "x" + name
        self._write(self.root / name, doc.text)
        index[doc.label] = {
            "file": name,
            "fetched_at": fetched_at if fetched_at is not None else time.time(),
        }
        self._write(self._index_path, json.dumps(index, indent=2) + "\n")

    def store_raw(self, label: str, text: str) -> Path:
        """Keep an untranslatable upstream payload for debugging."""
        path = self.root / (_safe_name(label) + ".raw")
        self._write(path, text)
        return path

    def labels(self) -> list:
        index = self._index()
        return sorted(
            lab for lab, row in index.items()
            if (self.root / row["file"]).exists()
        )


def bundled_snapshot() -> CacheStore:
    """The corpus snapshot shipped with the package, as a warm cache."""
    from importlib.resources import files

    return CacheStore(files(__package__) / "data" / "snapshot")


# ------------------------------------------------------------------- fetch


def _perm_text(cycles, where: str) -> str:
    if not isinstance(cycles, list):
        raise SchemaMapError(f"{where}: expected a list of cycles")
    if not cycles:
        return "()"
    out = []
    for cyc in cycles:
        if not isinstance(cyc, list) or not all(
            isinstance(p, int) and not isinstance(p, bool) for p in cyc
        ):
            raise SchemaMapError(f"{where}: expected integer cycles")
        out.append("(" + ",".join(str(p) for p in cyc) + ")")
    return "".join(out)


def _coeff_list(v, where: str) -> list:
    if isinstance(v, (int, str)):
        v = [v]
    if not isinstance(v, list) or not v:
        raise SchemaMapError(f"{where}: expected a coordinate list")
    return [str(c) for c in v]


def _poly_from_coeff_vectors(coeffs, var: str, where: str) -> dict:
    if not isinstance(coeffs, list) or not coeffs:
        raise SchemaMapError(f"{where}: expected a coefficient list")
    terms = [
        {"coeff": _coeff_list(c, f"{where}[{e}]"), "exps": [e]}
        for e, c in enumerate(coeffs)
    ]
    return {"vars": [var], "terms": terms}


def document_from_upstream(record) -> EntryDocument:
    """Translate one upstream database record into the local schema.

    This is the only place upstream field names appear.  The assumed
    shape (pinned by the golden-file tests, revisited on drift):

        label         str
        deg           int
        base_field    [int|str, ...]     min poly, low to high
        embeddings    [[re, im], ...]    one per triple, floats
        triples       [[s0, s1, sinf], ...] with cycles as int lists
        map           {"num": [coeff, ...], "den": [coeff, ...]}
                      coeff = power-basis coordinate list, low to high
        plane models  {"curve": {...}, "lambda": coeff} under "map"
        group_order   int, optional

    Anything that does not fit raises SchemaMapError; fetch_entry then
    stores the raw payload beside the cache for debugging.
    """
    try:
        label = record["label"]
        degree = record["deg"]
        min_poly = [str(c) for c in record["base_field"]]
        emb = record["embeddings"][0]
        trip = record["triples"][0]
        doc = {
            "label": label,
            "degree": degree,
            "base_field": {
                "min_poly": min_poly,
                "embedding": {"re": str(emb[0]), "im": str(emb[1])},
            },
            "model": _upstream_model(record["map"]),
            "triple": {
                "s0": _perm_text(trip[0], "triples.s0"),
                "s1": _perm_text(trip[1], "triples.s1"),
                "sinf": _perm_text(trip[2], "triples.sinf"),
            },
        }
        if record.get("group_order") is not None:
            doc["group_order"] = record["group_order"]
    except (KeyError, IndexError, TypeError) as exc:
        raise SchemaMapError(f"upstream record shape: {exc!r}") from exc
    try:
        entry = parse_entry(json.dumps(doc))
    except (ParseError, InvalidTriple) as exc:
        raise SchemaMapError(f"translated record does not validate: {exc}") from exc
    return document_for(entry)


def _upstream_model(m) -> dict:
    if not isinstance(m, dict):
        raise SchemaMapError("map: expected an object")
    if "curve" in m:
        curve = m["curve"]
        if not isinstance(curve, dict) or "terms" not in curve:
            raise SchemaMapError("map.curve: expected a term-list polynomial")
        return {
            "type": "plane",
            "curve": {"vars": ["t", "x"], "terms": curve["terms"]},
            "lambda": _coeff_list(m.get("lambda", 1), "map.lambda"),
        }
    if "num" in m and "den" in m:
        return {
            "type": "p1",
            "num": _poly_from_coeff_vectors(m["num"], "x", "map.num"),
            "den": _poly_from_coeff_vectors(m["den"], "x", "map.den"),
        }
    raise SchemaMapError("map: neither p1 nor plane shape")


def fetch_entry(
    label: str,
    cache: Optional[CacheStore] = None,
    endpoint: str = DEFAULT_ENDPOINT,
    *,
    refresh: bool = False,
    timeout: float = 30.0,
    transport=None,
) -> EntryDocument:
    """Fetch one entry by label, going to the network only on cache miss.

    transport is handed to the HTTP client; tests inject a mock there.
    """
    if cache is None:
        cache = CacheStore()
    if not refresh and cache.has(label):
        return cache.load(label)
    url = endpoint.rstrip("/") + "/"
    try:
        with httpx.Client(
            timeout=timeout, transport=transport, follow_redirects=True
        ) as client:
            resp = client.get(url, params={"label": label, "_format": "json"})
    except httpx.HTTPError as exc:
        raise NetworkError(f"fetch of {label!r} failed: {exc}") from exc
    if resp.status_code == 404:
        raise NetworkError(f"label {label!r} not found upstream", status=404)
    if resp.status_code != 200:
        raise NetworkError(
            f"upstream returned HTTP {resp.status_code} for {label!r}",
            status=resp.status_code,
        )
    try:
        payload = resp.json()
    except ValueError as exc:
        cache.store_raw(label, resp.text)
        raise SchemaMapError(f"non-JSON response for {label!r}") from exc
    records = payload.get("data") if isinstance(payload, dict) else payload
    if not isinstance(records, list) or not records:
        raise NetworkError(f"label {label!r} unknown upstream", status=404)
    try:
        doc = document_from_upstream(records[0])
    except SchemaMapError:
        cache.store_raw(label, resp.text)
        raise
    cache.store(doc)
    return doc


# ------------------------------------------------------------ start fibers


def load_start_fiber(path) -> list:
    """Read caller-supplied fiber approximations from a JSON file.

    The file holds a list of points; a point is a list of [re, im]
    coordinate pairs, or a bare [re, im] pair for one-variable systems.
    Values may be rational strings, decimals, or JSON numbers; they are
    hints, certification happens downstream.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read start fiber {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"start fiber {path}: invalid JSON: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("points")
    if not isinstance(data, list) or not data:
        raise ParseError(f"start fiber {path}: no points")

    def pair(v, where):
        if not isinstance(v, list) or len(v) != 2:
            raise _fail(where, "expected an [re, im] pair")
        return (_rat_hint(v[0], f"{where}[0]"), _rat_hint(v[1], f"{where}[1]"))

    points = []
    for i, pt in enumerate(data):
        where = f"points[{i}]"
        if not isinstance(pt, list) or not pt:
            raise _fail(where, "expected a list of coordinate pairs")
        if not isinstance(pt[0], list):
            points.append([pair(pt, where)])
        else:
            points.append([pair(v, f"{where}[{j}]") for j, v in enumerate(pt)])
    return points
