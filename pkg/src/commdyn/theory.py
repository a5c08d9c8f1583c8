"""Numerical oracles for the spectral theory behind detection: closed-form
expected spectra, eigenvector perturbation and concentration diagnostics, and
equilibrium-eigenvector alignment."""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import NEUTRAL_TOL, Equilibrium, ModelParams
from .errors import NeutralState, ZeroGap
from .graphgen import Graph, SbmParams, expected_adjacency, max_expected_degree
from .spectral import sym_eig


@dataclass(frozen=True)
class ExpectedSpectrum:
    """The two nonzero eigenvalues of the block-corrected expected adjacency
    and the per-block values (w1, w2) of the top eigenvector
    [w1*1_{n1}; w2*1_{n2}], normalized so n1*w1^2 + n2*w2^2 = 1."""

    lambda_max_bar: float
    lambda_minus_bar: float
    w1: float
    w2: float


def corrected_expected_matrix(params: SbmParams) -> np.ndarray:
    """Expected adjacency with the diagonal filled back in (l11 / l22), the
    rank-2 block matrix whose spectrum the closed forms describe."""
    matrix = expected_adjacency(params)
    diag = np.repeat([params.l11, params.l22], [params.n1, params.n2])
    matrix[np.diag_indices(params.n)] = diag
    return matrix


def expected_spectrum(params: SbmParams) -> ExpectedSpectrum:
    """Closed-form extreme eigenpair of the corrected expected adjacency.

    For the symmetric model the forms reduce to (l_s + l_d)n/2 and
    (l_s - l_d)n/2 with a flat eigenvector, computed directly so they are
    exact rather than round-tripped through the radical.
    """
    n1, n2 = params.n1, params.n2
    if params.is_symmetric():
        n = params.n
        lam_max = (params.l11 + params.l12) * n / 2.0
        lam_minus = (params.l11 - params.l12) * n / 2.0
        w = 1.0 / math.sqrt(n)
        return ExpectedSpectrum(lam_max, lam_minus, w, w)
    a = params.l11 * n1
    b = params.l22 * n2
    root = math.sqrt((a - b) ** 2 + 4.0 * n1 * n2 * params.l12 ** 2)
    lam_max = 0.5 * ((a + b) + root)
    lam_minus = 0.5 * ((a + b) - root)
    cross = params.l12 * n2
    if cross == 0.0:
        # decoupled blocks: the top eigenvector lives on the denser block
        if a >= b:
            w1, w2 = 1.0 / math.sqrt(n1), 0.0
        else:
            w1, w2 = 0.0, 1.0 / math.sqrt(n2)
    else:
        ratio = (lam_max - a) / cross  # w2 / w1 from the 2x2 eigenproblem
        norm = math.sqrt(n1 + n2 * ratio * ratio)
        w1, w2 = 1.0 / norm, ratio / norm
    return ExpectedSpectrum(lam_max, lam_minus, w1, w2)


@dataclass(frozen=True)
class DavisKahanReport:
    lhs: float
    rhs: float
    delta: float
    holds: bool
    ratio: float


def davis_kahan_check(graph: Graph, params: SbmParams) -> DavisKahanReport:
    """Empirical check of the eigenvector perturbation bound
    min_theta ||w_max(A) - theta*w_max(E{A})|| <= 2^{3/2} ||A - E{A}|| / delta,
    with delta the spectral gap below lambda_max(E{A})."""
    expected = expected_adjacency(params)
    eig_bar = sym_eig(expected)
    delta = float(eig_bar.values[-1] - eig_bar.values[-2])
    if delta == 0.0:
        raise ZeroGap("expected matrix has a degenerate top eigenvalue")
    w_bar = eig_bar.vectors[:, -1]
    w = sym_eig(graph.adjacency).vectors[:, -1]
    lhs = min(float(np.linalg.norm(w - w_bar)), float(np.linalg.norm(w + w_bar)))
    diff_norm = float(np.abs(np.linalg.eigvalsh(graph.adjacency - expected)).max())
    rhs = 2.0 ** 1.5 * diff_norm / delta
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0.0 else math.inf
    return DavisKahanReport(lhs, rhs, delta, lhs <= rhs, ratio)


def concentration_ratio(graph: Graph, params: SbmParams) -> float:
    """||A - E{A}||_2 / sqrt(Delta * log n), the empirical constant behind the
    spectral-norm concentration bound."""
    if graph.n < 2:
        raise ValueError("need n >= 2")
    diff_norm = float(np.abs(np.linalg.eigvalsh(graph.adjacency - expected_adjacency(params))).max())
    if diff_norm == 0.0:
        return 0.0
    return diff_norm / math.sqrt(max_expected_degree(params) * math.log(graph.n))


def _extreme_eigenvector(graph: Graph, gamma: float) -> np.ndarray:
    pairs = sym_eig(graph.adjacency)
    return pairs.vectors[:, -1] if gamma > 0 else pairs.vectors[:, 0]


def alignment_check(equilibrium: Equilibrium, graph: Graph, params: ModelParams) -> float:
    """|cosine| between the equilibrium and the relevant extreme eigenvector
    of the sampled adjacency (lambda_max side for gamma > 0, lambda_min side
    for gamma < 0)."""
    x = np.asarray(equilibrium.state, dtype=float)
    if float(np.abs(x).max()) < NEUTRAL_TOL:
        raise NeutralState("equilibrium is numerically zero")
    w = _extreme_eigenvector(graph, params.gamma)
    return float(abs(x @ w) / np.linalg.norm(x))


def c_of_u(equilibrium: Equilibrium, graph: Graph) -> float:
    """Signed projection of the equilibrium on the top eigenvector; its
    magnitude shrinks to zero as the attention approaches the threshold."""
    x = np.asarray(equilibrium.state, dtype=float)
    w = sym_eig(graph.adjacency).vectors[:, -1]
    return float(x @ w)
