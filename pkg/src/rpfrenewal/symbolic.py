"""Finite-state combinatorics: subshifts of finite type, admissible words,
shift-preimage prefixes, and cycle analysis on the cylinder transition graph.

Letters are 1..M.  Words are tuples of letters.  Points of the path space are
represented by finite admissible head words; every function handled by the
package is locally constant of known depth, so a head of length >= that depth
determines all values exactly.
"""

import numpy as np

from .errors import InputError

WIELANDT = lambda m: (m - 1) ** 2 + 1  # noqa: E731  primitivity exponent bound


def is_primitive(A):
    """Return (flag, witness_power): flag iff some A^n is entrywise positive.

    Witness is the smallest such n; by Wielandt's bound n <= (M-1)^2 + 1
    suffices, so the search is finite.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("incidence matrix must be square")
    if not np.isin(A, (0, 1)).all():
        raise InputError("incidence matrix entries must be 0 or 1")
    m = A.shape[0]
    B = A.astype(bool)
    for n in range(1, WIELANDT(m) + 1):
        if B.all():
            return True, n
        B = (B.astype(np.int64) @ A) > 0
    return False, None


class Subshift:
    """Alphabet {1..M} with transitions allowed by a primitive 0/1 matrix A."""

    def __init__(self, M, A):
        A = np.ascontiguousarray(A, dtype=np.int64)
        if M < 2:
            raise InputError(f"alphabet size must be >= 2, got {M}")
        if A.shape != (M, M):
            raise InputError(f"incidence matrix must be {M}x{M}, got {A.shape}")
        flag, witness = is_primitive(A)
        if not flag:
            raise InputError(
                "incidence matrix is not primitive; non-primitive shifts are rejected"
            )
        self.M = int(M)
        self.A = A
        self.witness_power = witness
        self._cyl = {}

    @classmethod
    def full(cls, M):
        return cls(M, np.ones((M, M), dtype=np.int64))

    @property
    def is_full(self):
        return bool((self.A == 1).all())

    def allows(self, i, j):
        return self.A[i - 1, j - 1] == 1

    def __eq__(self, other):
        return (
            isinstance(other, Subshift)
            and self.M == other.M
            and np.array_equal(self.A, other.A)
        )

    def __hash__(self):
        return hash((self.M, self.A.tobytes()))

    def __repr__(self):
        return f"Subshift(M={self.M}, full={self.is_full})"

    def cylinders(self, depth):
        """Cached CylinderIndex at the given depth."""
        if depth not in self._cyl:
            self._cyl[depth] = CylinderIndex(self, depth)
        return self._cyl[depth]


def is_admissible(shift, word):
    if len(word) == 0:
        return True
    if any(not (1 <= c <= shift.M) for c in word):
        return False
    return all(shift.allows(word[k], word[k + 1]) for k in range(len(word) - 1))


def validate_word(shift, word, name="word"):
    word = tuple(int(c) for c in word)
    if len(word) < 1:
        raise InputError(f"{name} must be nonempty")
    if not is_admissible(shift, word):
        raise InputError(f"{name} {word} is not admissible")
    return word


def admissible_words(shift, n):
    """All admissible words of length n, in lexicographic order."""
    if n < 1:
        raise InputError(f"word length must be >= 1, got {n}")
    words = [(i,) for i in range(1, shift.M + 1)]
    for _ in range(n - 1):
        words = [w + (j,) for w in words for j in range(1, shift.M + 1) if shift.allows(w[-1], j)]
    return words


def preimage_prefixes(shift, x_head, n):
    """All admissible u of length n with u + x_head admissible.

    These index the n-fold shift preimages of the point with head x_head;
    n = 0 yields the single empty prefix.
    """
    x_head = validate_word(shift, x_head, "x_head")
    if n < 0:
        raise InputError(f"prefix length must be >= 0, got {n}")
    prefixes = [()]
    # grow from the right: maintain suffixes u with u + x_head admissible
    for _ in range(n):
        prefixes = [
            (j,) + u
            for u in prefixes
            for j in range(1, shift.M + 1)
            if shift.allows(j, u[0] if u else x_head[0])
        ]
    return sorted(prefixes)


class CylinderIndex:
    """Lexicographic indexing of admissible depth-m words."""

    def __init__(self, shift, depth):
        if depth < 1:
            raise InputError(f"cylinder depth must be >= 1, got {depth}")
        self.shift = shift
        self.depth = int(depth)
        self.words = admissible_words(shift, depth)
        self.K = len(self.words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self._prep = None
        self._graph = None

    def idx(self, word):
        w = tuple(word[: self.depth])
        if w not in self.index:
            raise InputError(f"word {w} is not an admissible depth-{self.depth} cylinder")
        return self.index[w]

    def prepend_tables(self):
        """prep[j-1, k] = index of (j,) + words[k][:-1], or -1 if j cannot precede."""
        if self._prep is None:
            M, K = self.shift.M, self.K
            prep = np.full((M, K), -1, dtype=np.int64)
            for k, w in enumerate(self.words):
                for j in range(1, M + 1):
                    if self.shift.allows(j, w[0]):
                        prep[j - 1, k] = self.index[(j,) + w[: self.depth - 1]]
            self._prep = prep
        return self._prep

    def graph(self):
        if self._graph is None:
            self._graph = DepthGraph(self)
        return self._graph


class DepthGraph:
    """Shift-orbit graph on depth-m cylinders: edge w -> w[1:] + (j,).

    A length-L directed path visits the successive depth-m windows of an
    admissible word; cycles correspond to periodic points and summed edge
    weights to their Birkhoff sums.
    """

    def __init__(self, cyl):
        self.cyl = cyl
        shift = cyl.shift
        src, dst, ewords = [], [], []
        for k, w in enumerate(cyl.words):
            for j in range(1, shift.M + 1):
                if shift.allows(w[-1], j):
                    src.append(k)
                    dst.append(cyl.index[w[1:] + (j,)])
                    ewords.append(w + (j,))
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)
        self.edge_words = ewords
        self.n_nodes = cyl.K
        self.out = [[] for _ in range(cyl.K)]
        for e, s in enumerate(self.src):
            self.out[s].append(e)


def _karp_min_mean(graph, wts):
    """Karp's minimum mean cycle value on a strongly connected graph."""
    n = graph.n_nodes
    INF = np.inf
    D = np.full((n + 1, n), INF)
    D[0, 0] = 0.0
    for k in range(1, n + 1):
        for e in range(graph.src.size):
            u, v = graph.src[e], graph.dst[e]
            cand = D[k - 1, u] + wts[e]
            if cand < D[k, v]:
                D[k, v] = cand
    best = INF
    for v in range(n):
        if not np.isfinite(D[n, v]):
            continue
        worst = -INF
        for k in range(n):
            if np.isfinite(D[k, v]):
                worst = max(worst, (D[n, v] - D[k, v]) / (n - k))
        if worst < best:
            best = worst
    return best


def _bellman_potentials(graph, wts, lam):
    """Multi-source shortest-walk potentials for weights w - lam.

    Satisfy w(e) - lam + p(u) - p(v) >= 0 up to rounding, which certifies
    S_m >= m*lam - (max p - min p) along every admissible path.
    """
    n = graph.n_nodes
    p = np.zeros(n)
    scale = max(1.0, float(np.max(np.abs(wts))) if wts.size else 1.0)
    eps = 1e-12 * scale
    for _ in range(n + 1):
        changed = False
        for e in range(graph.src.size):
            u, v = graph.src[e], graph.dst[e]
            cand = p[u] + wts[e] - lam
            if cand < p[v] - eps:
                p[v] = cand
                changed = True
        if not changed:
            break
    return p


def _tight_cycle(graph, wts, lam, p):
    """Walk along minimum-slack edges until a node repeats; extract the cycle."""
    n = graph.n_nodes
    nxt = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        best, arg = np.inf, -1
        for e in graph.out[v]:
            slack = wts[e] - lam + p[v] - p[graph.dst[e]]
            if slack < best:
                best, arg = slack, graph.dst[e]
        nxt[v] = arg
    seen = {}
    v, walk = 0, []
    while v not in seen:
        seen[v] = len(walk)
        walk.append(v)
        v = int(nxt[v])
    return walk[seen[v]:]


def min_mean_cycle(shift, edge_weights, depth=None):
    """Minimum over directed cycles of (cycle weight)/(cycle length).

    ``edge_weights`` maps each (depth+1)-word of the cylinder graph to a real
    weight (dict or callable).  Returns (value, cycle) with the cycle given as
    a list of node words.
    """
    if depth is None:
        if hasattr(edge_weights, "keys"):
            lens = {len(k) for k in edge_weights.keys()}
            if len(lens) != 1:
                raise InputError("edge weight keys must share one length")
            depth = lens.pop() - 1
        else:
            raise InputError("depth is required for callable edge weights")
    graph = shift.cylinders(depth).graph()
    if callable(edge_weights):
        wts = np.array([float(edge_weights(w)) for w in graph.edge_words])
    else:
        try:
            wts = np.array([float(edge_weights[w]) for w in graph.edge_words])
        except KeyError as k:
            raise InputError(f"missing edge weight for word {k.args[0]}") from None
    lam, cycle_nodes, _ = _min_mean_cycle_indexed(graph, wts)
    words = [graph.cyl.words[v] for v in cycle_nodes]
    return lam, words


def _min_mean_cycle_indexed(graph, wts):
    lam = _karp_min_mean(graph, wts)
    if not np.isfinite(lam):
        raise InputError("cylinder graph has no directed cycle")
    p = _bellman_potentials(graph, wts, lam)
    cycle = _tight_cycle(graph, wts, lam, p)
    return lam, cycle, p


def enumerate_cycles(shift, m, max_len, max_count=None):
    """Simple directed cycles of length <= max_len in the depth-m graph.

    Cycles are returned as tuples of node words, rotated to start at their
    lexicographically minimal node.  Composite (non-simple) cycles are never
    produced; integer combinations of simple-cycle sums are handled
    arithmetically downstream.
    """
    if max_len < 1:
        raise InputError(f"max_len must be >= 1, got {max_len}")
    cycles, _ = _enumerate_cycles_indexed(shift.cylinders(m).graph(), max_len, max_count)
    words = shift.cylinders(m).words
    return [tuple(words[v] for v in c) for c in cycles]


def _enumerate_cycles_indexed(graph, max_len, max_count=None):
    """Simple cycles as node-index tuples; flag reports hitting max_count."""
    n = graph.n_nodes
    adj = [sorted({int(graph.dst[e]) for e in graph.out[v]}) for v in range(n)]
    out = []
    truncated = False
    for s in range(n):
        stack = [(s, iter(adj[s]))]
        onpath = {s}
        path = [s]
        while stack:
            node, it = stack[-1]
            advanced = False
            for v in it:
                if v < s:
                    continue
                if v == s:
                    out.append(tuple(path))
                    if max_count is not None and len(out) >= max_count:
                        return out, True
                    continue
                if v not in onpath and len(path) < max_len:
                    stack.append((v, iter(adj[v])))
                    onpath.add(v)
                    path.append(v)
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                onpath.discard(path.pop())
    return out, truncated
