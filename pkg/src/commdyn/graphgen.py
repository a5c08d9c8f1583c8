"""Two-community stochastic block model: sampling, expected structure, checks."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SbmParams:
    """Community sizes and link probabilities of a two-community SBM.

    Agents 0..n1-1 carry label 1, agents n1..n1+n2-1 carry label 2. The
    link probability matrix is [[l11, l12], [l12, l22]].
    """

    n1: int
    n2: int
    l11: float
    l12: float
    l22: float

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("community sizes must be positive")
        if self.n1 + self.n2 < 2:
            raise ValueError("need at least two agents")
        for p in (self.l11, self.l12, self.l22):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"link probability {p} outside [0, 1]")

    @classmethod
    def ssbm(cls, n, l_same, l_diff):
        """Symmetric SBM: two equal communities, intra prob l_same, inter l_diff."""
        if n % 2 != 0:
            raise ValueError("SSBM needs an even number of agents")
        return cls(n // 2, n // 2, l_same, l12=l_diff, l22=l_same)

    @classmethod
    def from_matrix(cls, n1, n2, ell):
        ell = np.asarray(ell, dtype=float)
        if ell.shape != (2, 2):
            raise ValueError("ell must be 2x2")
        if ell[0, 1] != ell[1, 0]:
            raise ValueError("ell must be symmetric")
        return cls(n1, n2, ell[0, 0], ell[0, 1], ell[1, 1])

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def ell(self):
        return np.array([[self.l11, self.l12], [self.l12, self.l22]])

    def is_symmetric(self):
        return self.n1 == self.n2 and self.l11 == self.l22

    def labels(self):
        return np.repeat(np.array([1, 2]), [self.n1, self.n2])


@dataclass
class Graph:
    """Sampled undirected graph with ground-truth community labels."""

    adjacency: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(a != a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0.0):
            raise ValueError("no self-loops allowed")
        if not np.all((a == 0.0) | (a == 1.0)):
            raise ValueError("adjacency must be binary")
        self.adjacency = a
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.shape != (a.shape[0],):
            raise ValueError("labels length must match adjacency size")

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def n1(self):
        return int(np.sum(self.labels == 1))

    @property
    def n2(self):
        return int(np.sum(self.labels == 2))


def sample_sbm(params: SbmParams, seed: int) -> Graph:
    """Sample a graph from the SBM, deterministically for a fixed seed.

    Each unordered pair {i, j} (i < j, iterated in lexicographic order) is
    drawn from one counter-based Philox stream keyed by the seed, so the
    sample is bit-reproducible regardless of scheduling.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    n = params.n
    labels = params.labels()
    probs = params.ell[labels - 1][:, labels - 1]
    iu = np.triu_indices(n, k=1)
    draws = rng.random(iu[0].size)
    adjacency = np.zeros((n, n))
    adjacency[iu] = (draws < probs[iu]).astype(float)
    adjacency += adjacency.T
    return Graph(adjacency=adjacency, labels=labels)


def expected_adjacency(params: SbmParams) -> np.ndarray:
    """Entrywise expectation of the sampled adjacency (zero diagonal kept)."""
    labels = params.labels()
    expected = params.ell[labels - 1][:, labels - 1]
    np.fill_diagonal(expected, 0.0)
    return expected


def max_expected_degree(params: SbmParams) -> float:
    """Largest expected degree over the two communities (the zero diagonal
    makes the own-community term l_cc * (n_c - 1))."""
    d1 = params.l11 * (params.n1 - 1) + params.l12 * params.n2
    d2 = params.l22 * (params.n2 - 1) + params.l12 * params.n1
    return max(d1, d2)


def is_connected(graph: Graph) -> bool:
    """Breadth-first reachability from agent 0."""
    n = graph.n
    adjacency = graph.adjacency
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = seen.copy()
    while frontier.any():
        reached = adjacency[frontier].sum(axis=0) > 0
        frontier = reached & ~seen
        seen |= frontier
    return bool(seen.all())


@dataclass(frozen=True)
class AssumptionReport:
    """Advisory report on the finite-n surrogates of the asymptotic assumptions."""

    connectivity_ok: bool
    ssbm_condition_applies: bool
    ssbm_condition_ok: bool
    connectivity_threshold: float


def check_assumptions(params: SbmParams, c_conn: float = 1.0, c_dis: float = 1.0) -> AssumptionReport:
    """Check the link-probability growth conditions with surrogate constants.

    The conditions are asymptotic; at finite n these checks are heuristic and
    purely advisory. The extra condition only applies to an assortative SSBM.
    """
    if c_conn <= 0 or c_dis <= 0:
        raise ValueError("surrogate constants must be positive")
    n = params.n
    threshold = c_conn * math.log(n) / n
    connectivity_ok = all(p >= threshold for p in (params.l11, params.l12, params.l22))
    applies = params.is_symmetric() and params.l11 > params.l12
    if applies:
        ssbm_ok = params.l12 >= c_dis * math.sqrt(params.l11 * math.log(n))
    else:
        ssbm_ok = True
    return AssumptionReport(connectivity_ok, applies, ssbm_ok, threshold)


def write_edge_list(graph: Graph, path) -> None:
    """Write `# n=<n> n1=<n1>` then one `i j` line per edge, 0-indexed, i < j."""
    iu = np.triu_indices(graph.n, k=1)
    mask = graph.adjacency[iu] > 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={graph.n} n1={graph.n1}\n")
        for i, j in zip(iu[0][mask], iu[1][mask]):
            fh.write(f"{i} {j}\n")


def read_edge_list(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# n="):
            raise ValueError("missing edge-list header")
        fields = dict(part.split("=") for part in header[2:].split())
        n, n1 = int(fields["n"]), int(fields["n1"])
        adjacency = np.zeros((n, n))
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i, j = (int(tok) for tok in line.split())
            if not 0 <= i < j < n:
                raise ValueError(f"bad edge {i} {j}")
            adjacency[i, j] = adjacency[j, i] = 1.0
    labels = np.repeat(np.array([1, 2]), [n1, n - n1])
    return Graph(adjacency=adjacency, labels=labels)
