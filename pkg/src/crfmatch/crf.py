"""Linear-chain CRF over candidate lattices: scoring, decoding, training.

The model has three weights: mu on the observation feature and lambda1,
lambda2 on the spatial and temporal transition features.  Training maximizes
conditional log-likelihood with L-BFGS and an Armijo backtracking line
search; the gradient is observed minus expected feature sums, the latter via
forward-backward.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .features import DEFAULT_SCALE_M, CandidateLattice

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 200
LBFGS_MEMORY = 10
ARMIJO_C = 1e-4


@dataclass
class CrfParams:
    mu: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.lambda1, self.lambda2], dtype=np.float64)

    @classmethod
    def from_array(cls, x) -> "CrfParams":
        return cls(float(x[0]), float(x[1]), float(x[2]))


def node_scores(lattice: CandidateLattice, params: CrfParams) -> np.ndarray:
    return params.mu * lattice.phi


def edge_scores(lattice: CandidateLattice, params: CrfParams) -> np.ndarray:
    return params.lambda1 * lattice.d1 + params.lambda2 * lattice.d2


def sequence_score(lattice: CandidateLattice, assignment, params: CrfParams) -> float:
    """Unnormalized score of one candidate assignment."""
    a = np.asarray(assignment)
    T = len(lattice)
    s = 0.0
    for t in range(T):
        s += params.mu * lattice.phi[t, a[t]]
    for t in range(T - 1):
        s += params.lambda1 * lattice.d1[t, a[t], a[t + 1]]
        s += params.lambda2 * lattice.d2[t, a[t], a[t + 1]]
    return float(s)


def log_partition(lattice: CandidateLattice, params: CrfParams) -> float:
    """Log normalizer over all candidate assignments."""
    return float(
        kernels.forward_log_partition(
            node_scores(lattice, params), edge_scores(lattice, params), lattice.counts
        )
    )


def decode(node: np.ndarray, edge: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Best assignment for explicit score tensors (ties to the smaller index
    at the latest layer where the contenders differ)."""
    return kernels.viterbi_decode(
        np.ascontiguousarray(node, dtype=np.float64),
        np.ascontiguousarray(edge, dtype=np.float64),
        np.ascontiguousarray(counts, dtype=np.int64),
    )


def viterbi_path(lattice: CandidateLattice, params: CrfParams) -> np.ndarray:
    return decode(node_scores(lattice, params), edge_scores(lattice, params), lattice.counts)


@dataclass
class MatchResult:
    vehicle_id: str
    trip_id: str
    matched_segments: np.ndarray  # one segment id per observation
    stitched_path: list  # complete traversed path, consecutive repeats removed
    log_posterior_unnormalized: float
    assignment: np.ndarray  # candidate index per layer
    used_preference: bool = False


def stitch(lattice: CandidateLattice, assignment) -> list:
    """Traversed path implied by an assignment: the recorded connecting
    segment sequences concatenated, deduplicating consecutive repeats."""
    a = np.asarray(assignment)
    out = [int(lattice.seg_ids[0, a[0]])]
    for t in range(len(lattice) - 1):
        link = lattice.link_paths[t].get((int(a[t]), int(a[t + 1])))
        seq = link if link is not None else [int(lattice.seg_ids[t + 1, a[t + 1]])]
        for seg in seq:
            if seg != out[-1]:
                out.append(int(seg))
    return out


def result_from_assignment(
    lattice: CandidateLattice, assignment, score: float, used_preference: bool = False
) -> MatchResult:
    a = np.asarray(assignment)
    segs = lattice.seg_ids[np.arange(len(lattice)), a].copy()
    return MatchResult(
        lattice.vehicle_id,
        lattice.trip_id,
        segs,
        stitch(lattice, a),
        float(score),
        a,
        used_preference,
    )


def viterbi(lattice: CandidateLattice, params: CrfParams) -> MatchResult:
    """Decode the best assignment and assemble the full match result."""
    a = viterbi_path(lattice, params)
    return result_from_assignment(lattice, a, sequence_score(lattice, a, params))


def log_likelihood(lattice: CandidateLattice, assignment, params: CrfParams) -> float:
    return sequence_score(lattice, assignment, params) - log_partition(lattice, params)


def truth_indices(lattice: CandidateLattice, truth_segments) -> np.ndarray | None:
    """Candidate indices of a true segment sequence; None when some point's
    truth is not among its candidates."""
    truth = np.asarray(truth_segments)
    out = np.empty(len(lattice), dtype=np.int64)
    for t in range(len(lattice)):
        hits = np.nonzero(lattice.seg_ids[t, : lattice.counts[t]] == truth[t])[0]
        if len(hits) == 0:
            return None
        out[t] = hits[0]
    return out


def _observed_sums(lattice: CandidateLattice, a) -> tuple:
    o_phi = float(lattice.phi[np.arange(len(lattice)), a].sum())
    o_d1 = 0.0
    o_d2 = 0.0
    for t in range(len(lattice) - 1):
        o_d1 += lattice.d1[t, a[t], a[t + 1]]
        o_d2 += lattice.d2[t, a[t], a[t + 1]]
    return o_phi, float(o_d1), float(o_d2)


def ll_and_gradient(lattices, assignments, params: CrfParams, l2: float = 0.0) -> tuple:
    """Total log-likelihood and its gradient wrt (mu, lambda1, lambda2).

    l2 > 0 subtracts 0.5 * l2 * ||w||^2 and the matching gradient term.
    """
    x = params.as_array()
    ll = 0.0
    grad = np.zeros(3, dtype=np.float64)
    for idx, (lat, a) in enumerate(zip(lattices, assignments)):
        ns = node_scores(lat, params)
        es = edge_scores(lat, params)
        log_z, e_phi, e_d1, e_d2 = kernels.crf_expectations(
            lat.phi, lat.d1, lat.d2, ns, es, lat.counts
        )
        o_phi, o_d1, o_d2 = _observed_sums(lat, a)
        contrib = x[0] * o_phi + x[1] * o_d1 + x[2] * o_d2 - log_z
        if not np.isfinite(contrib):
            raise ValueError(f"non-finite objective at training example {idx}")
        ll += contrib
        grad[0] += o_phi - e_phi
        grad[1] += o_d1 - e_d1
        grad[2] += o_d2 - e_d2
    if l2 > 0.0:
        ll -= 0.5 * l2 * float(x @ x)
        grad -= l2 * x
    return float(ll), grad


@dataclass
class TrainResult:
    params: CrfParams
    log_likelihood: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    skipped: int = 0


def train(
    lattices,
    truth_segments,
    init: CrfParams | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    memory: int = LBFGS_MEMORY,
    l2: float = 0.0,
) -> TrainResult:
    """Fit CRF weights on labeled lattices by maximizing log-likelihood.

    Examples whose true segment is missing from some layer's candidate set
    are skipped and counted.  The likelihood trace is non-decreasing; stops
    when the gradient infinity norm drops below tol.
    """
    usable = []
    assignments = []
    skipped = 0
    for lat, truth in zip(lattices, truth_segments):
        a = truth_indices(lat, truth)
        if a is None:
            skipped += 1
        else:
            usable.append(lat)
            assignments.append(a)
    if skipped:
        warnings.warn(f"train: skipped {skipped} trajectories whose truth left the candidate set")
    if not usable:
        raise ValueError("train: no usable training examples")

    x = (init or CrfParams()).as_array()

    def objective(xv):
        ll, g = ll_and_gradient(usable, assignments, CrfParams.from_array(xv), l2=l2)
        return -ll, -g

    f, g = objective(x)
    trace = [-f]
    s_hist: list = []
    y_hist: list = []
    converged = False
    it = 0
    while it < max_iters:
        if np.max(np.abs(g)) < tol:
            converged = True
            break
        # two-loop recursion for the search direction
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            a = (s @ q) / (y @ s)
            alphas.append(a)
            q -= a * y
        if y_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= (s @ y) / (y @ y)
        for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
            b = (y @ q) / (y @ s)
            q += (a - b) * s
        d = -q
        slope = float(g @ d)
        if slope >= 0.0:
            d = -g
            slope = float(g @ d)
        step = 1.0
        accepted = False
        while step >= 1e-20:
            xn = x + step * d
            fn, gn = objective(xn)
            if fn <= f + ARMIJO_C * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        sv = xn - x
        yv = gn - g
        if float(sv @ yv) > 1e-12:
            s_hist.append(sv)
            y_hist.append(yv)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x, f, g = xn, fn, gn
        trace.append(-f)
        it += 1
    else:
        converged = np.max(np.abs(g)) < tol

    return TrainResult(
        params=CrfParams.from_array(x),
        log_likelihood=-f,
        trace=trace,
        iterations=it,
        converged=bool(converged),
        skipped=skipped,
    )


def save_params(path, params: CrfParams, scale_m: float = DEFAULT_SCALE_M):
    doc = {
        "mu": params.mu,
        "lambda1": params.lambda1,
        "lambda2": params.lambda2,
        "scale_m": scale_m,
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_params(path) -> tuple:
    """Returns (CrfParams, scale_m)."""
    with open(path) as f:
        doc = json.load(f)
    return (
        CrfParams(float(doc["mu"]), float(doc["lambda1"]), float(doc["lambda2"])),
        float(doc.get("scale_m", DEFAULT_SCALE_M)),
    )
