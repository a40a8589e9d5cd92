"""Permutations, permutation triples, and the comparisons between them.

Composition is left to right: (p * q)(i) = q(p(i)), matching the way
loop concatenation composes monodromy.  Points are 0-based internally;
the cycle text format is 1-based.

A permutation triple (s0, s1, sinf) multiplies to the identity in that
order.  Triples are compared up to simultaneous conjugation, and
optionally up to the S3 action that relabels the three branch points.
"""

from __future__ import annotations

import re
from math import gcd
from typing import Iterable, Optional, Sequence

from .errors import InvalidTriple


class Permutation:
    __slots__ = ("images",)

    def __init__(self, images: Sequence[int]):
        imgs = tuple(int(i) for i in images)
        n = len(imgs)
        if n == 0:
            raise ValueError("empty permutation")
        seen = [False] * n
        for i in imgs:
            if not 0 <= i < n or seen[i]:
                raise ValueError(f"not a bijection on 0..{n - 1}: {imgs}")
            seen[i] = True
        self.images = imgs

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        if degree < 1:
            raise ValueError("degree must be positive")
        return cls(tuple(range(degree)))

    # ------------------------------------------------------------ group ops

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, o: "Permutation") -> "Permutation":
        if self.degree != o.degree:
            raise ValueError("degrees differ")
        oi = o.images
        return Permutation(tuple(oi[i] for i in self.images))

    def inverse(self) -> "Permutation":
        out = [0] * len(self.images)
        for i, j in enumerate(self.images):
            out[j] = i
        return Permutation(tuple(out))

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def order(self) -> int:
        out = 1
        for c in self.cycle_type():
            out = out * c // gcd(out, c)
        return out

    # ------------------------------------------------------------ structure

    def cycles(self) -> list:
        """Nontrivial cycles, each rotated to start at its least point."""
        seen = [False] * self.degree
        out = []
        for start in range(self.degree):
            if seen[start] or self.images[start] == start:
                seen[start] = True
                continue
            cyc = []
            p = start
            while not seen[p]:
                seen[p] = True
                cyc.append(p)
                p = self.images[p]
            out.append(cyc)
        return out

    def cycle_type(self) -> tuple:
        """Cycle lengths including fixed points, descending."""
        lengths = [len(c) for c in self.cycles()]
        lengths += [1] * (self.degree - sum(lengths))
        return tuple(sorted(lengths, reverse=True))

    # ----------------------------------------------------------- text format

    @classmethod
    def from_cycles(cls, text: str, degree: int) -> "Permutation":
        """Parse 1-based disjoint cycle notation like '(1,2,3)(4,5)'."""
        s = re.sub(r"\s+", "", text)
        if degree < 1:
            raise ValueError("degree must be positive")
        if s == "()":
            return cls.identity(degree)
        if not re.fullmatch(r"(\(\d+(,\d+)*\))+", s):
            raise ValueError(f"bad cycle notation: {text!r}")
        images = list(range(degree))
        touched = set()
        for body in re.findall(r"\(([^()]*)\)", s):
            pts = [int(p) for p in body.split(",")]
            for p in pts:
                if not 1 <= p <= degree:
                    raise ValueError(f"point {p} outside 1..{degree}")
                if p - 1 in touched:
                    raise ValueError(f"point {p} repeated across cycles")
                touched.add(p - 1)
            for i, p in enumerate(pts):
                images[p - 1] = pts[(i + 1) % len(pts)] - 1
        return cls(tuple(images))

    def to_cycles(self) -> str:
        cycs = self.cycles()
        if not cycs:
            return "()"
        return "".join(
            "(" + ",".join(str(p + 1) for p in c) + ")" for c in cycs
        )

    def __eq__(self, o) -> bool:
        if not isinstance(o, Permutation):
            return NotImplemented
        return self.images == o.images

    def __hash__(self):
        return hash(self.images)

    def __repr__(self) -> str:
        return f"Permutation({self.to_cycles()}, d={self.degree})"


def conjugate(g: Permutation, pi: Permutation) -> Permutation:
    """pi^-1 g pi in left-to-right composition."""
    return pi.inverse() * g * pi


class PermutationTriple:
    """Monodromy triple (s0, s1, sinf) with s0 s1 sinf = identity."""

    __slots__ = ("s0", "s1", "sinf")

    def __init__(self, s0: Permutation, s1: Permutation, sinf: Permutation):
        if not (s0.degree == s1.degree == sinf.degree):
            raise InvalidTriple("triple components have different degrees")
        if not (s0 * s1 * sinf).is_identity():
            raise InvalidTriple("triple product is not the identity")
        self.s0 = s0
        self.s1 = s1
        self.sinf = sinf

    @classmethod
    def from_pair(cls, s0: Permutation, s1: Permutation) -> "PermutationTriple":
        return cls(s0, s1, (s0 * s1).inverse())

    @property
    def degree(self) -> int:
        return self.s0.degree

    def components(self) -> tuple:
        return (self.s0, self.s1, self.sinf)

    def cycle_types(self) -> tuple:
        return (self.s0.cycle_type(), self.s1.cycle_type(), self.sinf.cycle_type())

    def inverse_reversed(self) -> "PermutationTriple":
        """(sinf^-1, s1^-1, s0^-1): the triple of the complex conjugate."""
        return PermutationTriple(
            self.sinf.inverse(), self.s1.inverse(), self.s0.inverse()
        )

    def conjugated(self, pi: Permutation) -> "PermutationTriple":
        return PermutationTriple(
            conjugate(self.s0, pi), conjugate(self.s1, pi), conjugate(self.sinf, pi)
        )

    def group_order(self) -> int:
        return group_order([self.s0, self.s1], self.degree)

    def is_transitive(self) -> bool:
        return is_transitive([self.s0, self.s1], self.degree)

    def __eq__(self, o) -> bool:
        if not isinstance(o, PermutationTriple):
            return NotImplemented
        return self.s0 == o.s0 and self.s1 == o.s1 and self.sinf == o.sinf

    def __hash__(self):
        return hash((self.s0, self.s1, self.sinf))

    def __repr__(self) -> str:
        return (
            f"Triple({self.s0.to_cycles()}, {self.s1.to_cycles()}, "
            f"{self.sinf.to_cycles()})"
        )


# ------------------------------------------------------------- group order


def is_transitive(gens: Iterable[Permutation], degree: int) -> bool:
    gens = list(gens)
    if degree == 1:
        return True
    seen = {0}
    queue = [0]
    while queue:
        p = queue.pop()
        for g in gens:
            q = g.images[p]
            if q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == degree


def group_order(gens: Iterable[Permutation], degree: int) -> int:
    """Order of the generated subgroup of S_degree (Schreier-Sims)."""
    gens = [g for g in gens if not g.is_identity()]
    for g in gens:
        if g.degree != degree:
            raise ValueError("generator degree mismatch")
    if not gens:
        return 1
    chain = _StabilizerChain(degree)
    for g in gens:
        chain.add(g)
    return chain.order()


class _StabilizerChain:
    """Deterministic incremental Schreier-Sims."""

    def __init__(self, degree: int):
        self.degree = degree
        self.base: list[int] = []
        self.gens: list[list[Permutation]] = []  # per level
        self.transversal: list[dict] = []
        self.identity = Permutation.identity(degree)

    def _extend_base(self, g: Permutation) -> None:
        beta = next(x for x in range(self.degree) if g.images[x] != x)
        self.base.append(beta)
        self.gens.append([])
        self.transversal.append({beta: self.identity})

    def _rebuild_transversal(self, i: int) -> None:
        beta = self.base[i]
        tr = {beta: self.identity}
        frontier = [beta]
        while frontier:
            nxt = []
            for p in frontier:
                u = tr[p]
                for g in self.gens[i]:
                    q = g.images[p]
                    if q not in tr:
                        tr[q] = u * g
                        nxt.append(q)
            frontier = nxt
        self.transversal[i] = tr

    def _sift(self, g: Permutation, start: int):
        h = g
        for i in range(start, len(self.base)):
            p = h.images[self.base[i]]
            tr = self.transversal[i]
            if p not in tr:
                return h, i
            h = h * tr[p].inverse()
            if h.is_identity():
                return h, len(self.base)
        return h, len(self.base)

    def add(self, g: Permutation) -> None:
        h, level = self._sift(g, 0)
        if h.is_identity():
            return
        while level >= len(self.base):
            self._extend_base(h)
        for l in range(level + 1):
            self.gens[l].append(h)
        for l in range(level, -1, -1):
            self._close_level(l)

    def _close_level(self, i: int) -> None:
        self._rebuild_transversal(i)
        changed = True
        while changed:
            changed = False
            for p in sorted(self.transversal[i]):
                u = self.transversal[i][p]
                for g in list(self.gens[i]):
                    q = g.images[p]
                    schreier = (u * g) * self.transversal[i][q].inverse()
                    if schreier.is_identity():
                        continue
                    h, j = self._sift(schreier, i + 1)
                    if h.is_identity():
                        continue
                    while j >= len(self.base):
                        self._extend_base(h)
                    for l in range(min(j, len(self.base) - 1) + 1):
                        if l > i:
                            self.gens[l].append(h)
                    for l in range(min(j, len(self.base) - 1), i, -1):
                        self._close_level(l)
                    self._rebuild_transversal(i)
                    changed = True

    def order(self) -> int:
        out = 1
        for tr in self.transversal:
            out *= len(tr)
        return out


# ------------------------------------------------- simultaneous conjugation


def simultaneously_conjugate(
    a: PermutationTriple, b: PermutationTriple
) -> Optional[Permutation]:
    """A permutation pi with pi^-1 a_i pi = b_i for all components, or None.

    Transitive triples use Schreier graph propagation: the image of one
    point determines the rest.  Intransitive triples (degree at most 12)
    fall back to backtracking with constraint propagation.
    """
    if a.degree != b.degree:
        return None
    if a.cycle_types() != b.cycle_types():
        return None
    d = a.degree
    agens = (a.s0, a.s1)
    bgens = (b.s0, b.s1)
    if is_transitive(agens, d):
        return _conjugate_transitive(agens, bgens, d)
    if d > 12:
        raise ValueError(
            "conjugacy search for intransitive triples is limited to degree 12"
        )
    return _conjugate_backtrack(agens, bgens, d)


def _conjugate_transitive(agens, bgens, d: int):
    tree = []
    seen = {0}
    queue = [0]
    while queue:
        p = queue.pop(0)
        for gi, g in enumerate(agens):
            q = g.images[p]
            if q not in seen:
                seen.add(q)
                queue.append(q)
                tree.append((p, gi, q))
    if len(seen) != d:
        return None
    for c in range(d):
        pi = [None] * d
        pi[0] = c
        for p, gi, q in tree:
            pi[q] = bgens[gi].images[pi[p]]
        if len(set(pi)) != d:
            continue
        cand = Permutation(pi)
        if _is_conjugator(agens, bgens, cand):
            return cand
    return None


def _is_conjugator(agens, bgens, pi: Permutation) -> bool:
    im = pi.images
    for ga, gb in zip(agens, bgens):
        for y in range(pi.degree):
            if im[ga.images[y]] != gb.images[im[y]]:
                return False
    return True


def _conjugate_backtrack(agens, bgens, d: int):
    apairs = [(g, g.inverse()) for g in agens]
    bpairs = [(g, g.inverse()) for g in bgens]
    pi = [None] * d
    used = [False] * d

    def propagate(start: int, trail: list) -> bool:
        queue = [start]
        while queue:
            y = queue.pop()
            for (ga, gai), (gb, gbi) in zip(apairs, bpairs):
                for src, dst in ((ga, gb), (gai, gbi)):
                    y2 = src.images[y]
                    want = dst.images[pi[y]]
                    if pi[y2] is None:
                        if used[want]:
                            return False
                        pi[y2] = want
                        used[want] = True
                        trail.append(y2)
                        queue.append(y2)
                    elif pi[y2] != want:
                        return False
        return True

    def undo(trail: list) -> None:
        for y in trail:
            used[pi[y]] = False
            pi[y] = None

    def rec() -> bool:
        y0 = next((y for y in range(d) if pi[y] is None), None)
        if y0 is None:
            return True
        for c in range(d):
            if used[c]:
                continue
            pi[y0] = c
            used[c] = True
            trail = [y0]
            if propagate(y0, trail) and rec():
                return True
            undo(trail)
        return False

    if rec():
        cand = Permutation(pi)
        if _is_conjugator(agens, bgens, cand):
            return cand
    return None


# ----------------------------------------------------------- S3 relabeling


def _relabel_rotate(t: PermutationTriple) -> PermutationTriple:
    """(a, b, c) -> (b, c, a)."""
    return PermutationTriple(t.s1, t.sinf, t.s0)


def _relabel_swap(t: PermutationTriple) -> PermutationTriple:
    """(a, b, c) -> (b, a, a^-1 b^-1)."""
    return PermutationTriple(
        t.s1, t.s0, t.s0.inverse() * t.s1.inverse()
    )


def s3_orbit(t: PermutationTriple) -> list:
    """Orbit of the triple under branch point relabeling (at most 6).

    The rotate and swap maps satisfy r^3 = s^2 = identity on the nose,
    but the remaining S3 relation only holds up to simultaneous
    conjugation.  Downstream comparisons are all up to conjugation, so
    one representative per relabeling suffices: the six words
    e, r, r^2, s, sr, sr^2 applied to t, deduplicated by equality.
    """
    r1 = _relabel_rotate(t)
    r2 = _relabel_rotate(r1)
    words = [t, r1, r2, _relabel_swap(t), _relabel_swap(r1), _relabel_swap(r2)]
    out = []
    seen = set()
    for tr in words:
        k = (tr.s0.images, tr.s1.images, tr.sinf.images)
        if k not in seen:
            seen.add(k)
            out.append(tr)
    return out
