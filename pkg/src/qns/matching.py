"""Exact weighted matching on general graphs.

:func:`max_weight_matching` is the primal-dual blossom algorithm in its
O(n^3) form (Edmonds' blossoms with Galil's dual bookkeeping). Weights are
handled as integers internally so that dual updates stay exact; float
weights are scaled by :data:`WEIGHT_SCALE` and rounded first.
"""
from __future__ import annotations

from typing import Iterator, Sequence

WEIGHT_SCALE = 2 ** 32


class NoPerfectMatching(ValueError):
    pass


class _Blossom:
    # Vertices are 0..n-1, non-trivial blossoms n..2n-1. Edge k has endpoints
    # 2k (its first vertex) and 2k+1 (its second); ``p ^ 1`` is the far end.

    def __init__(self, n: int, edges: Sequence[tuple[int, int, int]]):
        self.n = n
        self.edges = edges
        self.endpoint = [edges[p // 2][p % 2] for p in range(2 * len(edges))]
        self.neighbend: list[list[int]] = [[] for _ in range(n)]
        for k, (i, j, _) in enumerate(edges):
            self.neighbend[i].append(2 * k + 1)
            self.neighbend[j].append(2 * k)
        top = max([0] + [w for _, _, w in edges])
        self.mate = [-1] * n
        self.label = [0] * (2 * n)
        self.labelend = [-1] * (2 * n)
        self.inblossom = list(range(n))
        self.parent = [-1] * (2 * n)
        self.childs: list[list[int] | None] = [None] * (2 * n)
        self.base = list(range(n)) + [-1] * n
        self.endps: list[list[int] | None] = [None] * (2 * n)
        self.bestedge = [-1] * (2 * n)
        self.bestlist: list[list[int] | None] = [None] * (2 * n)
        self.unused = list(range(n, 2 * n))
        self.dual = [top] * n + [0] * n
        self.allowed = [False] * len(edges)
        self.queue: list[int] = []

    def slack(self, k: int) -> int:
        i, j, w = self.edges[k]
        return self.dual[i] + self.dual[j] - 2 * w

    def leaves(self, b: int) -> Iterator[int]:
        if b < self.n:
            yield b
            return
        for child in self.childs[b]:
            yield from self.leaves(child)

    def assign_label(self, w: int, t: int, p: int) -> None:
        b = self.inblossom[w]
        self.label[w] = self.label[b] = t
        self.labelend[w] = self.labelend[b] = p
        self.bestedge[w] = self.bestedge[b] = -1
        if t == 1:
            self.queue.extend(self.leaves(b))
        else:
            base = self.base[b]
            m = self.mate[base]
            self.assign_label(self.endpoint[m], 1, m ^ 1)

    def scan_blossom(self, v: int, w: int) -> int:
        """Walk up from ``v`` and ``w``; return a common base or -1 (augmenting path)."""
        path = []
        base = -1
        while v != -1 or w != -1:
            b = self.inblossom[v]
            if self.label[b] & 4:
                base = self.base[b]
                break
            path.append(b)
            self.label[b] = 5
            if self.labelend[b] == -1:
                v = -1
            else:
                v = self.endpoint[self.labelend[b]]
                b = self.inblossom[v]
                v = self.endpoint[self.labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            self.label[b] = 1
        return base

    def add_blossom(self, base: int, k: int) -> None:
        v, w, _ = self.edges[k]
        bb = self.inblossom[base]
        bv = self.inblossom[v]
        bw = self.inblossom[w]
        b = self.unused.pop()
        self.base[b] = base
        self.parent[b] = -1
        self.parent[bb] = b
        path: list[int] = []
        endps: list[int] = []
        while bv != bb:
            self.parent[bv] = b
            path.append(bv)
            endps.append(self.labelend[bv])
            v = self.endpoint[self.labelend[bv]]
            bv = self.inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            self.parent[bw] = b
            path.append(bw)
            endps.append(self.labelend[bw] ^ 1)
            w = self.endpoint[self.labelend[bw]]
            bw = self.inblossom[w]
        self.childs[b] = path
        self.endps[b] = endps
        self.label[b] = 1
        self.labelend[b] = self.labelend[bb]
        self.dual[b] = 0
        for leaf in self.leaves(b):
            if self.label[self.inblossom[leaf]] == 2:
                # former T-vertices become S and must be scanned
                self.queue.append(leaf)
            self.inblossom[leaf] = b

        best_to = [-1] * (2 * self.n)
        for sub in path:
            if self.bestlist[sub] is None:
                lists = [[p // 2 for p in self.neighbend[leaf]] for leaf in self.leaves(sub)]
            else:
                lists = [self.bestlist[sub]]
            for lst in lists:
                for kk in lst:
                    i, j, _ = self.edges[kk]
                    if self.inblossom[j] == b:
                        i, j = j, i
                    bj = self.inblossom[j]
                    if (bj != b and self.label[bj] == 1
                            and (best_to[bj] == -1 or self.slack(kk) < self.slack(best_to[bj]))):
                        best_to[bj] = kk
            self.bestlist[sub] = None
            self.bestedge[sub] = -1
        self.bestlist[b] = [kk for kk in best_to if kk != -1]
        self.bestedge[b] = -1
        for kk in self.bestlist[b]:
            if self.bestedge[b] == -1 or self.slack(kk) < self.slack(self.bestedge[b]):
                self.bestedge[b] = kk

    def expand_blossom(self, b: int, endstage: bool) -> None:
        for s in self.childs[b]:
            self.parent[s] = -1
            if s < self.n:
                self.inblossom[s] = s
            elif endstage and self.dual[s] == 0:
                self.expand_blossom(s, endstage)
            else:
                for leaf in self.leaves(s):
                    self.inblossom[leaf] = s
        if not endstage and self.label[b] == 2:
            # relabel the even-length path from the entry child to the base
            childs, endps = self.childs[b], self.endps[b]
            entry = self.inblossom[self.endpoint[self.labelend[b] ^ 1]]
            j = childs.index(entry)
            if j & 1:
                j -= len(childs)
                jstep, trick = 1, 0
            else:
                jstep, trick = -1, 1
            p = self.labelend[b]
            while j != 0:
                self.label[self.endpoint[p ^ 1]] = 0
                self.label[self.endpoint[endps[j - trick] ^ trick ^ 1]] = 0
                self.assign_label(self.endpoint[p ^ 1], 2, p)
                self.allowed[endps[j - trick] // 2] = True
                j += jstep
                p = endps[j - trick] ^ trick
                self.allowed[p // 2] = True
                j += jstep
            bv = childs[j]
            self.label[self.endpoint[p ^ 1]] = self.label[bv] = 2
            self.labelend[self.endpoint[p ^ 1]] = self.labelend[bv] = p
            self.bestedge[bv] = -1
            j += jstep
            while childs[j] != entry:
                bv = childs[j]
                if self.label[bv] == 1:
                    j += jstep
                    continue
                reached = -1
                for leaf in self.leaves(bv):
                    if self.label[leaf] != 0:
                        reached = leaf
                        break
                if reached != -1:
                    self.label[reached] = 0
                    self.label[self.endpoint[self.mate[self.base[bv]]]] = 0
                    self.assign_label(reached, 2, self.labelend[reached])
                j += jstep
        self.label[b] = self.labelend[b] = -1
        self.childs[b] = self.endps[b] = None
        self.base[b] = -1
        self.bestlist[b] = None
        self.bestedge[b] = -1
        self.unused.append(b)

    def augment_blossom(self, b: int, v: int) -> None:
        """Rotate blossom ``b`` so that vertex ``v`` becomes its base."""
        t = v
        while self.parent[t] != b:
            t = self.parent[t]
        if t >= self.n:
            self.augment_blossom(t, v)
        childs, endps = self.childs[b], self.endps[b]
        i = j = childs.index(t)
        if i & 1:
            j -= len(childs)
            jstep, trick = 1, 0
        else:
            jstep, trick = -1, 1
        while j != 0:
            j += jstep
            t = childs[j]
            p = endps[j - trick] ^ trick
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p])
            j += jstep
            t = childs[j]
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p ^ 1])
            self.mate[self.endpoint[p]] = p ^ 1
            self.mate[self.endpoint[p ^ 1]] = p
        self.childs[b] = childs[i:] + childs[:i]
        self.endps[b] = endps[i:] + endps[:i]
        self.base[b] = self.base[self.childs[b][0]]

    def augment_matching(self, k: int) -> None:
        v, w, _ = self.edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = self.inblossom[s]
                if bs >= self.n:
                    self.augment_blossom(bs, s)
                self.mate[s] = p
                if self.labelend[bs] == -1:
                    break
                t = self.endpoint[self.labelend[bs]]
                bt = self.inblossom[t]
                s = self.endpoint[self.labelend[bt]]
                j = self.endpoint[self.labelend[bt] ^ 1]
                if bt >= self.n:
                    self.augment_blossom(bt, j)
                self.mate[j] = self.labelend[bt]
                p = self.labelend[bt] ^ 1

    def _stage(self, maxcardinality: bool) -> bool:
        n = self.n
        self.label = [0] * (2 * n)
        self.bestedge = [-1] * (2 * n)
        self.bestlist[n:] = [None] * n
        self.allowed = [False] * len(self.edges)
        self.queue = []
        for v in range(n):
            if self.mate[v] == -1 and self.label[self.inblossom[v]] == 0:
                self.assign_label(v, 1, -1)

        while True:
            while self.queue:
                v = self.queue.pop()
                for p in self.neighbend[v]:
                    k = p // 2
                    w = self.endpoint[p]
                    if self.inblossom[v] == self.inblossom[w]:
                        continue
                    kslack = None
                    if not self.allowed[k]:
                        kslack = self.slack(k)
                        if kslack <= 0:
                            self.allowed[k] = True
                    if self.allowed[k]:
                        bw_label = self.label[self.inblossom[w]]
                        if bw_label == 0:
                            self.assign_label(w, 2, p ^ 1)
                        elif bw_label == 1:
                            base = self.scan_blossom(v, w)
                            if base >= 0:
                                self.add_blossom(base, k)
                            else:
                                self.augment_matching(k)
                                return True
                        elif self.label[w] == 0:
                            self.label[w] = 2
                            self.labelend[w] = p ^ 1
                    elif self.label[self.inblossom[w]] == 1:
                        b = self.inblossom[v]
                        if self.bestedge[b] == -1 or kslack < self.slack(self.bestedge[b]):
                            self.bestedge[b] = k
                    elif self.label[w] == 0:
                        if self.bestedge[w] == -1 or kslack < self.slack(self.bestedge[w]):
                            self.bestedge[w] = k

            # no augmenting path with tight edges: adjust duals
            delta = None
            kind = 0
            target = -1
            if not maxcardinality:
                kind, delta = 1, min(self.dual[:n])
            for v in range(n):
                if self.label[self.inblossom[v]] == 0 and self.bestedge[v] != -1:
                    d = self.slack(self.bestedge[v])
                    if kind == 0 or d < delta:
                        kind, delta, target = 2, d, self.bestedge[v]
            for b in range(2 * n):
                if self.parent[b] == -1 and self.label[b] == 1 and self.bestedge[b] != -1:
                    d = self.slack(self.bestedge[b])
                    d //= 2  # S-S slacks are even with integer weights
                    if kind == 0 or d < delta:
                        kind, delta, target = 3, d, self.bestedge[b]
            for b in range(n, 2 * n):
                if (self.base[b] >= 0 and self.parent[b] == -1 and self.label[b] == 2
                        and (kind == 0 or self.dual[b] < delta)):
                    kind, delta, target = 4, self.dual[b], b
            if kind == 0:
                # max cardinality reached; final dual update for optimality
                kind, delta = 1, max(0, min(self.dual[:n]))

            for v in range(n):
                lab = self.label[self.inblossom[v]]
                if lab == 1:
                    self.dual[v] -= delta
                elif lab == 2:
                    self.dual[v] += delta
            for b in range(n, 2 * n):
                if self.base[b] >= 0 and self.parent[b] == -1:
                    if self.label[b] == 1:
                        self.dual[b] += delta
                    elif self.label[b] == 2:
                        self.dual[b] -= delta

            if kind == 1:
                return False
            if kind == 2:
                self.allowed[target] = True
                i, j, _ = self.edges[target]
                if self.label[self.inblossom[i]] == 0:
                    i, j = j, i
                self.queue.append(i)
            elif kind == 3:
                self.allowed[target] = True
                self.queue.append(self.edges[target][0])
            else:
                self.expand_blossom(target, False)

    def solve(self, maxcardinality: bool) -> list[int]:
        n = self.n
        for _ in range(n):
            if not self._stage(maxcardinality):
                break
            for b in range(n, 2 * n):
                if (self.parent[b] == -1 and self.base[b] >= 0
                        and self.label[b] == 1 and self.dual[b] == 0):
                    self.expand_blossom(b, True)
        return [self.endpoint[m] if m >= 0 else -1 for m in self.mate]


def max_weight_matching(n: int, edges: Sequence[tuple[int, int, int]],
                        maxcardinality: bool = False) -> list[int]:
    """Maximum-weight matching of an undirected graph with integer weights.

    Returns ``mate`` with ``mate[v]`` the partner of ``v`` or -1. With
    ``maxcardinality`` the matching is of maximum weight among the matchings
    of maximum cardinality.
    """
    for i, j, w in edges:
        if i == j:
            raise ValueError("self-loops are not allowed")
        if not isinstance(w, int):
            raise TypeError("weights must be integers; use min_weight_perfect_matching for floats")
    if not edges:
        return [-1] * n
    return _Blossom(n, list(edges)).solve(maxcardinality)


def min_weight_perfect_matching(n: int, edges: Sequence[tuple[int, int, float]]) -> list[int]:
    """Perfect matching of minimum total weight; raises :class:`NoPerfectMatching`."""
    if n % 2:
        raise NoPerfectMatching(f"{n} vertices cannot be perfectly matched")
    if n == 0:
        return []
    ints = [(i, j, round(float(w) * WEIGHT_SCALE)) for i, j, w in edges]
    top = max([0] + [w for _, _, w in ints]) + 1
    # even integer weights keep every dual update integral
    flipped = [(i, j, 2 * (top - w)) for i, j, w in ints]
    mate = max_weight_matching(n, flipped, maxcardinality=True)
    if any(m == -1 for m in mate):
        raise NoPerfectMatching("graph has no perfect matching")
    return mate
