"""Unit-cost uniform-probability solver via cut sampling.

For unit edge costs and a single transmission probability p, one percolation
sample H of the network already carries enough cut information (when the
minimum cut is large enough for concentration): solve a minimum-size
bounded-capacity cut problem on H with budget gamma*B*p, read off the source
side S, and return the boundary of S in the original graph. Repeating a few
times and keeping the Monte Carlo best turns the constant success
probability into a high-probability guarantee.

The bounded-capacity cut subproblem (minimize the source side's size subject
to cutting at most a budget of edges) is solved by a Lagrangian sweep: a
super-sink receives an arc of capacity alpha from every non-source vertex,
so an s-t min cut minimizes cut_size + alpha * component_size. Sweeping
alpha over a geometric grid with bisection refinement traces the trade-off
curve; the sweep is verified against an exhaustive oracle rather than
assumed correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import maximum_flow

from . import rng
from .errors import InstanceTooLargeError, ValidationError
from .network import (
    ContactNetwork,
    Intervention,
    boundary_of,
    component_of,
    edge_removal,
    sparsification_regime,
)
from .percolate import (
    MASK_TABLE_CAP,
    component_sizes,
    infection_table,
    sample_keep_matrix,
)

_SCALE = 1 << 16  # integer capacity unit for the flow solver
_CAP_MAX = 1 << 30

_Z99 = 2.5758293035489004


@dataclass(frozen=True)
class SbccSolution:
    """One point of the cut-size / component-size trade-off curve.

    ``cut_edges`` is exactly the boundary of ``component`` in the solved
    graph; ``lagrange_alpha`` is the multiplier whose min cut produced it.
    ``within_budget`` records whether the relaxed budget cut_size <=
    budget/lambda was met (otherwise the smallest-cut fallback is returned).
    """

    cut_edges: tuple[int, ...]
    component: tuple[int, ...]
    cut_size: int
    component_size: int
    lam: float
    lagrange_alpha: float
    within_budget: bool


def _flow_arrays(graph: ContactNetwork):
    """Static arc lists for the super-sink flow network (sink arcs last)."""
    n, s = graph.n, graph.source
    t = n
    heads: list[int] = []
    tails: list[int] = []
    for e in range(graph.m):
        u, v = int(graph.us[e]), int(graph.vs[e])
        if u == v:
            continue
        tails.extend((u, v))
        heads.extend((v, u))
    sink_tails = [v for v in range(n) if v != s]
    tails.extend(sink_tails)
    heads.extend([t] * len(sink_tails))
    caps = np.full(len(tails), _SCALE, dtype=np.int64)
    return np.asarray(tails), np.asarray(heads), caps, len(sink_tails)


def _source_side(graph: ContactNetwork, alpha: float, arrays) -> tuple[int, ...]:
    """Vertices on the source side of the min s-t cut at multiplier alpha."""
    tails, heads, caps, n_sink = arrays
    n, s, t = graph.n, graph.source, graph.n
    cap = caps.copy()
    sink_cap = min(int(round(alpha * _SCALE)), _CAP_MAX)
    cap[len(cap) - n_sink:] = sink_cap
    mat = sparse.csr_matrix(
        (cap.astype(np.int32), (tails, heads)), shape=(n + 1, n + 1)
    )
    res = maximum_flow(mat, s, t)
    residual = mat - res.flow
    indptr, indices, data = residual.indptr, residual.indices, residual.data
    seen = np.zeros(n + 1, dtype=bool)
    seen[s] = True
    stack = [s]
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if data[k] > 0 and not seen[v]:
                seen[v] = True
                stack.append(v)
    return tuple(int(v) for v in np.flatnonzero(seen[:n]))


def min_sbcc(
    graph: ContactNetwork,
    budget: float,
    lam: float,
    source: int | None = None,
) -> SbccSolution:
    """Bicriteria bounded-capacity cut by Lagrangian sweep.

    Among sweep solutions whose cut size is within budget/lambda, returns
    the one with the smallest source-side component (hard guarantee on the
    cut side; the component side is validated empirically against the
    exhaustive oracle). Falls back to the smallest-cut solution, flagged,
    when nothing qualifies. Unit edge capacities are required.
    """
    if not 0.0 < lam < 1.0:
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    if budget < 0:
        raise ValidationError("budget must be nonnegative")
    if source is not None and source != graph.source:
        graph = ContactNetwork(n=graph.n, us=graph.us, vs=graph.vs, costs=graph.costs,
                               probs=graph.probs, source=source, labels=graph.labels)
    if graph.m and not np.all(graph.costs == 1.0):
        raise ValidationError("bounded-capacity cut requires unit edge capacities")

    arrays = _flow_arrays(graph)
    n = graph.n

    inside = np.zeros(n, dtype=bool)

    def evaluate(alpha: float) -> tuple[int, int, tuple[int, ...]]:
        side = _source_side(graph, alpha, arrays)
        inside[:] = False
        inside[list(side)] = True
        cut = int(np.count_nonzero(inside[graph.us] ^ inside[graph.vs]))
        return cut, len(side), side

    i_max = math.ceil(2 * math.log2(max(n, 2))) + 4
    alphas = [0.0] + [(2.0 ** i) / n for i in range(i_max + 1)]
    while alphas[-1] < 4.0 * max(budget, 1.0):
        alphas.append(alphas[-1] * 2.0)

    cache: dict[float, tuple[int, int, tuple[int, ...]]] = {}

    def probe(alpha: float):
        if alpha not in cache:
            cache[alpha] = evaluate(alpha)
        return cache[alpha]

    for a in alphas:
        probe(a)

    # refine between adjacent grid points whose (cut, comp) pairs differ
    resolution = 1.0 / _SCALE
    work = [(alphas[i], alphas[i + 1]) for i in range(len(alphas) - 1)]
    while work:
        lo, hi = work.pop()
        lo_pair = probe(lo)[:2]
        hi_pair = probe(hi)[:2]
        if lo_pair == hi_pair or hi - lo <= resolution:
            continue
        mid = 0.5 * (lo + hi)
        probe(mid)
        work.append((lo, mid))
        work.append((mid, hi))

    limit = budget / lam
    qualifying = [
        (comp, cut, a) for a, (cut, comp, _) in cache.items() if cut <= limit
    ]
    if qualifying:
        comp, cut, alpha = min(qualifying)
        within = True
    else:
        cut, comp, alpha = min(
            (cut, comp, a) for a, (cut, comp, _) in cache.items()
        )
        within = False
    side = cache[alpha][2]
    if within and cut > limit:
        raise AssertionError("sweep returned a cut above budget/lambda")
    return SbccSolution(
        cut_edges=boundary_of(graph, side),
        component=side,
        cut_size=cut,
        component_size=comp,
        lam=lam,
        lagrange_alpha=alpha,
        within_budget=within,
    )


def min_sbcc_exact(
    graph: ContactNetwork, source: int | None, budget: float
) -> tuple[tuple[int, ...], int]:
    """Exhaustive bounded-capacity cut oracle (m <= 20).

    Minimum source-component size over all edge subsets of size at most
    the budget; ties prefer fewer edges, then the lexicographically
    smallest id tuple.
    """
    if graph.m > 20:
        raise InstanceTooLargeError(f"exact oracle caps at 20 edges, got {graph.m}")
    if source is not None and source != graph.source:
        graph = ContactNetwork(n=graph.n, us=graph.us, vs=graph.vs, costs=graph.costs,
                               probs=graph.probs, source=source, labels=graph.labels)
    limit = min(graph.m, int(budget))
    table = infection_table(graph) if graph.m <= MASK_TABLE_CAP else None
    full = (1 << graph.m) - 1
    best_size = None
    best_set: tuple[int, ...] = ()
    for k in range(limit + 1):
        for combo in combinations(range(graph.m), k):
            if table is not None:
                mask = full
                for e in combo:
                    mask &= ~(1 << e)
                size = int(table[mask])
            else:
                size = component_of(graph, edge_removal(graph, combo)).size
            if best_size is None or size < best_size:
                best_size = size
                best_set = combo
    assert best_size is not None
    return best_set, best_size


def solve_karger(
    network: ContactNetwork,
    budget: float,
    p: float,
    gamma: float = 4.0,
    lam: float = 0.5,
    repetitions: int | None = None,
    eval_samples: int = 500,
    seed: int = 0,
    d: float = 1.0,
) -> tuple[Intervention, dict]:
    """Cut-sampling solver for unit costs and uniform probability p.

    Each repetition percolates the network once, solves the bounded-capacity
    cut on the sample with budget gamma*B*p, takes the realized component S
    of the source, and proposes the boundary of S in the original graph.
    Candidates are compared on a shared fresh Monte Carlo evaluation stream
    and the lowest estimated infection count wins.
    """
    if network.m == 0:
        raise ValidationError("network has no edges")
    if not np.all(np.isfinite(network.costs)) or not np.all(network.costs == 1.0):
        raise ValidationError("cut-sampling solver requires unit edge costs")
    if not np.all(network.probs == p):
        raise ValidationError("network probabilities disagree with the uniform p")
    if gamma <= 2:
        raise ValidationError("gamma must exceed 2 for a positive success probability")
    if budget < 0:
        raise ValidationError("budget must be nonnegative")
    reps = repetitions if repetitions is not None else math.ceil(4 * math.log(network.n))
    reps = max(reps, 1)

    regime = sparsification_regime(network, p, d=d)

    keep_rows = sample_keep_matrix(network, seed, 0, reps)
    candidates: list[dict] = []
    members_per_candidate: list[tuple[int, ...]] = []
    for r in range(reps):
        kept_ids = np.flatnonzero(keep_rows[r])
        sub = ContactNetwork(
            n=network.n,
            us=network.us[kept_ids],
            vs=network.vs[kept_ids],
            costs=np.ones(len(kept_ids)),
            probs=np.ones(len(kept_ids)),
            source=network.source,
        )
        sol = min_sbcc(sub, budget=gamma * budget * p, lam=lam)
        realized = component_of(sub, edge_removal(sub, sol.cut_edges))
        barrier = boundary_of(network, realized.members)
        members_per_candidate.append(barrier)
        candidates.append({
            "cut_cost": float(len(barrier)),
            "component_size": realized.size,
            "component_members": [int(v) for v in realized.members],
            "members": [int(e) for e in barrier],
            "sample_cut_size": sol.cut_size,
            "within_sample_budget": sol.within_budget,
        })

    eval_seed = int(rng.philox_key(seed, "eval")[0] & 0x7FFFFFFF)
    eval_keep = sample_keep_matrix(network, eval_seed, 0, eval_samples)
    for cand, members in zip(candidates, members_per_candidate):
        sizes = component_sizes(network, eval_keep, edge_removal(network, members))
        mean = int(sizes.sum()) / eval_samples
        if eval_samples > 1:
            var = max(
                int((sizes * sizes).sum()) - eval_samples * mean * mean, 0.0
            ) / (eval_samples - 1)
            hw = _Z99 * math.sqrt(var / eval_samples)
        else:
            hw = math.inf
        cand["mc_mean"] = mean
        cand["mc_half_width"] = hw

    chosen_index = min(range(reps), key=lambda i: (candidates[i]["mc_mean"], i))
    chosen = edge_removal(network, members_per_candidate[chosen_index], "karger")
    if regime.epsilon < 1.0:
        budget_bound = gamma / ((1.0 - regime.epsilon) * lam) * budget
    else:
        budget_bound = math.inf
    report = {
        "budget": budget,
        "p": p,
        "gamma": gamma,
        "lambda": lam,
        "repetitions": reps,
        "eval_samples": eval_samples,
        "seed": seed,
        "candidates": candidates,
        "chosen_index": chosen_index,
        "cost": chosen.cost,
        "epsilon_regime": regime.epsilon,
        "in_regime": regime.in_regime,
        "budget_bound": budget_bound,
    }
    if not regime.in_regime:
        report["regime_note"] = "out-of-regime: guarantees void"
    return chosen, report
