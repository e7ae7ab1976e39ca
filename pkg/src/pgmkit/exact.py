"""Exact inference: variable elimination, belief propagation on factor
trees, and the junction tree algorithm.

All engines receive evidence as a partial assignment and apply it by
reducing factors up front. Messages are normalized after every send, with
the pulled-out scale factors accumulated in log space, so partition values
are recovered exactly without underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import factors as fa
from .errors import (
    NotATreeError,
    OrderingError,
    ScopeError,
    ZeroEvidenceError,
)
from .factors import Factor, Semiring, MAX_PRODUCT, SUM_PRODUCT
from .graphs import UndirectedGraph, max_cliques, max_weight_spanning_tree, moralize, triangulate
from .models import (
    BayesianNetwork,
    FactorGraph,
    Model,
    check_evidence,
    model_factors,
)

HEURISTICS = ("min_neighbors", "min_weight", "min_fill")


@dataclass(frozen=True)
class EliminationOrdering:
    order: tuple[str, ...]
    heuristic: str
    induced_width: int


def interaction_graph(model: Model) -> UndirectedGraph:
    """Moral graph of a Bayesian network, skeleton of an MRF."""
    if isinstance(model, BayesianNetwork):
        return moralize(model.dag)
    return model.skeleton()


def _greedy_order(adj: dict[str, set[str]], cards: Mapping[str, int],
                  targets: set[str], heuristic: str) -> tuple[list[str], int]:
    """Simulated greedy elimination; returns ordering and induced width.

    ``targets`` are never eliminated but still participate as neighbors.
    """
    adj = {n: set(nbrs) for n, nbrs in adj.items()}
    remaining = sorted(n for n in adj if n not in targets)
    order: list[str] = []
    width = 0

    def cost(n: str) -> float:
        nbrs = adj[n]
        if heuristic == "min_neighbors":
            return len(nbrs)
        if heuristic == "min_weight":
            out = cards[n]
            for m in nbrs:
                out *= cards[m]
            return out
        if heuristic == "min_fill":
            nbrs = sorted(nbrs)
            return sum(
                1
                for i in range(len(nbrs))
                for j in range(i + 1, len(nbrs))
                if nbrs[j] not in adj[nbrs[i]]
            )
        raise ValueError(f"unknown heuristic {heuristic!r}")

    while remaining:
        best = min(remaining, key=lambda n: (cost(n), n))
        order.append(best)
        remaining.remove(best)
        nbrs = sorted(adj[best])
        width = max(width, len(nbrs) + 1 - 1)
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                adj[nbrs[i]].add(nbrs[j])
                adj[nbrs[j]].add(nbrs[i])
        for m in nbrs:
            adj[m].discard(best)
        del adj[best]
    return order, width


def simulate_width(adj: dict[str, set[str]], order: Sequence[str]) -> int:
    """Induced width of a fixed (partial) elimination ordering."""
    adj = {n: set(nbrs) for n, nbrs in adj.items()}
    width = 0
    for node in order:
        nbrs = sorted(adj[node])
        width = max(width, len(nbrs))
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                adj[nbrs[i]].add(nbrs[j])
                adj[nbrs[j]].add(nbrs[i])
        for m in nbrs:
            adj[m].discard(node)
        del adj[node]
    return width


def choose_ordering(model: Model, heuristic: str = "min_fill",
                    query: Iterable[str] = (),
                    evidence: Iterable[str] = ()) -> EliminationOrdering:
    """Greedy elimination ordering over the interaction graph.

    Query and evidence variables are excluded from the ordering (queries
    stay, evidence is removed by factor reduction before elimination).
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"heuristic must be one of {HEURISTICS}")
    graph = interaction_graph(model)
    evidence = set(evidence)
    adj = {
        n: {m for m in graph.neighbors(n) if m not in evidence}
        for n in graph.nodes
        if n not in evidence
    }
    cards = {n: model.variable(n).cardinality for n in adj}
    targets = set(query)
    order, width = _greedy_order(adj, cards, targets, heuristic)
    return EliminationOrdering(tuple(order), heuristic, width)


@dataclass
class VeResult:
    factor: Factor          # proportional to the (evidence-reduced) answer
    log_normalizer: float   # log of the total mass pulled out while eliminating
    max_intermediate_scope: int

    def normalized(self) -> Factor:
        out, _ = fa.normalize(self.factor)
        return out


def variable_elimination(model: Model, query: Iterable[str],
                         evidence: Mapping[str, str] | None = None,
                         semiring: Semiring = SUM_PRODUCT,
                         ordering: Sequence[str] | None = None,
                         heuristic: str = "min_fill") -> VeResult:
    """Eliminate all non-query variables by combine-then-aggregate steps.

    With the sum-product semiring the returned factor is proportional to
    p(query, evidence) and ``log_normalizer`` equals log p(evidence) for a
    Bayesian network (log of the evidence-reduced partition value for an
    MRF). With max_product the factor holds unnormalized max-marginals and
    no rescaling is performed.
    """
    evidence = check_evidence(model, evidence or {})
    query = list(dict.fromkeys(query))
    for q in query:
        model.variable(q)
        if q in evidence:
            raise ValueError(f"query variable {q!r} is also evidence")
    to_eliminate = sorted(set(model.variables) - set(query) - set(evidence))
    if ordering is None:
        ordering = choose_ordering(model, heuristic, query, evidence).order
    elif sorted(ordering) != to_eliminate:
        raise OrderingError(
            f"ordering must be a permutation of {to_eliminate}"
        )

    rescale = semiring.kind == "sum_product"
    factors = [fa.reduce_factor(f, evidence) for f in model_factors(model)]
    factors = [f for f in factors if f.scope or _scalar_value(f) != 1.0]
    log_norm = 0.0
    max_scope = max((len(f.scope) for f in factors), default=0)

    for var in ordering:
        bucket = [f for f in factors if var in f.names]
        if not bucket:
            continue
        factors = [f for f in factors if var not in f.names]
        combined = bucket[0]
        for f in bucket[1:]:
            combined = fa.product(combined, f)
        max_scope = max(max_scope, len(combined.scope))
        tau = fa.eliminate(combined, [var], semiring)
        if rescale:
            total = float(np.sum(tau.table))
            if total <= 0.0:
                raise ZeroEvidenceError(
                    "all probability mass vanished during elimination; "
                    "the evidence has probability zero"
                )
            tau = Factor(tau.scope, tau.table / total)
            log_norm += math.log(total)
        factors.append(tau)

    if factors:
        result = factors[0]
        for f in factors[1:]:
            result = fa.product(result, f)
    else:
        result = fa.ones_like([model.variable(q) for q in query])
    max_scope = max(max_scope, len(result.scope))
    if query:
        result = fa.align_to(
            fa.product(result, fa.ones_like([model.variable(q) for q in query])),
            sorted(query),
        )
    if rescale:
        total = float(np.sum(result.table))
        if total <= 0.0:
            raise ZeroEvidenceError("the evidence has probability zero")
        log_norm += math.log(total)
        result = Factor(result.scope, result.table / total)
    return VeResult(result, log_norm, max_scope)


def _scalar_value(f: Factor) -> float:
    return float(f.table) if f.scope == () else math.nan


def posterior(model: Model, target: str,
              evidence: Mapping[str, str] | None = None, **kw) -> Factor:
    """Convenience wrapper: normalized p(target | evidence) via elimination."""
    return variable_elimination(model, [target], evidence, **kw).normalized()


# ---------------------------------------------------------------------------
# Belief propagation on factor trees
# ---------------------------------------------------------------------------


@dataclass
class MessageStore:
    """Directed messages keyed by (source, target) node labels.

    Factor nodes are labelled ``("f", index)`` and variable nodes
    ``("v", name)``. Exactly two messages traverse every factor-graph edge
    after a full run.
    """

    messages: dict[tuple, Factor] = field(default_factory=dict)
    sends: int = 0

    def put(self, source, target, message: Factor) -> None:
        self.messages[(source, target)] = message
        self.sends += 1

    def get(self, source, target) -> Factor:
        return self.messages[(source, target)]


@dataclass
class TreeBpResult:
    marginals: dict[str, Factor]          # normalized single-variable beliefs
    factor_beliefs: list[Factor]          # normalized per-factor joint beliefs
    messages: MessageStore
    log_partition: float

    def marginal(self, name: str) -> Factor:
        return self.marginals[name]


def tree_bp(model: Model, evidence: Mapping[str, str] | None = None) -> TreeBpResult:
    """Two-phase sum-product message passing on a tree-shaped factor graph.

    Messages are cached in the result, so any marginal (including every
    per-factor joint belief) is read off without recomputation. Evidence
    may split the tree into a forest; each component is handled in the
    same two phases and the component log-partitions add up.
    """
    evidence = check_evidence(model, evidence or {})
    scalar_log = 0.0
    reduced: list[Factor] = []
    factor_ids: list[int] = []
    for i, f in enumerate(model_factors(model)):
        g = fa.reduce_factor(f, evidence)
        if g.scope:
            reduced.append(g)
            factor_ids.append(i)
        else:
            value = float(g.table)
            if value <= 0.0:
                raise ZeroEvidenceError("the evidence has probability zero")
            scalar_log += math.log(value)
    variables = [v for n, v in sorted(model.variables.items()) if n not in evidence]
    fg = FactorGraph(tuple(variables), tuple(reduced))
    n_nodes = len(variables) + len(reduced)
    components = _factor_graph_components(fg)
    if len(fg.edges) != n_nodes - len(components):
        raise NotATreeError(
            "the model's factor graph contains a cycle; use a junction tree"
        )
    var_of = {v.name: v for v in variables}

    def neighbors(node):
        kind, key = node
        if kind == "v":
            return [("f", i) for i in fg.neighbors_of_variable(key)]
        return [("v", n) for n in fg.neighbors_of_factor(key)]

    order: list[tuple] = []
    parent: dict[tuple, tuple | None] = {}
    for comp in components:
        root = comp[0]
        parent[root] = None
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            for nb in neighbors(node):
                if nb != parent[node]:
                    parent[nb] = node
                    stack.append(nb)

    store = MessageStore()
    log_scale: dict[tuple, float] = {}

    def send(source, target) -> None:
        skind, skey = source
        msg = fa.ones_like([var_of[skey]]) if skind == "v" else reduced[skey]
        scale = 0.0
        for nb in neighbors(source):
            if nb != target:
                msg = fa.product(msg, store.get(nb, source))
                scale += log_scale[(nb, source)]
        if skind == "f":
            msg = fa.eliminate(msg, [n for n in msg.names if n != target[1]])
        total = float(np.sum(msg.table))
        if total <= 0.0:
            raise ZeroEvidenceError("the evidence has probability zero")
        store.put(source, target, Factor(msg.scope, msg.table / total))
        log_scale[(source, target)] = scale + math.log(total)

    for node in reversed(order):      # leaves toward the component roots
        if parent[node] is not None:
            send(node, parent[node])
    for node in order:                # roots back out
        for nb in neighbors(node):
            if nb != parent[node]:
                send(node, nb)

    def belief_at(node, base: Factor) -> tuple[Factor, float]:
        belief, scale = base, 0.0
        for nb in neighbors(node):
            belief = fa.product(belief, store.get(nb, node))
            scale += log_scale[(nb, node)]
        total = float(np.sum(belief.table))
        if total <= 0.0:
            raise ZeroEvidenceError("the evidence has probability zero")
        return Factor(belief.scope, belief.table / total), scale + math.log(total)

    marginals: dict[str, Factor] = {}
    component_log_z: dict[int, float] = {}
    comp_of: dict[tuple, int] = {
        node: ci for ci, comp in enumerate(components) for node in comp
    }
    for v in variables:
        belief, logz = belief_at(("v", v.name), fa.ones_like([v]))
        marginals[v.name] = belief
        component_log_z[comp_of[("v", v.name)]] = logz
    factor_beliefs = []
    for i, f in enumerate(reduced):
        belief, logz = belief_at(("f", i), f)
        factor_beliefs.append(belief)
        component_log_z[comp_of[("f", i)]] = logz
    log_z = scalar_log + sum(component_log_z.values())
    return TreeBpResult(marginals, factor_beliefs, store, float(log_z))


def _factor_graph_components(fg: FactorGraph) -> list[list[tuple]]:
    nodes = [("v", v.name) for v in fg.variables] + [
        ("f", i) for i in range(len(fg.factors))
    ]
    seen: set[tuple] = set()
    components = []
    for start in nodes:
        if start in seen:
            continue
        comp, stack = [], [start]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            comp.append(node)
            kind, key = node
            if kind == "v":
                stack.extend(("f", i) for i in fg.neighbors_of_variable(key))
            else:
                stack.extend(("v", n) for n in fg.neighbors_of_factor(key))
        components.append(comp)
    return components


# ---------------------------------------------------------------------------
# MAP decoding by max-product elimination with back-pointers
# ---------------------------------------------------------------------------


def max_product_decode(model_or_jt, evidence: Mapping[str, str] | None = None):
    """MAP assignment and its log score.

    Runs max-product elimination in reverse name order, keeping a
    back-pointer table per eliminated variable; the traceback then fixes
    variables in name order, breaking every tie toward the lowest state
    index. The result is exactly the lexicographically-first argmax, which
    matches the enumeration oracle's tie-breaking.
    """
    if isinstance(model_or_jt, JunctionTree):
        jt = model_or_jt
        model = jt.model
        evidence = dict(jt.evidence if evidence is None else evidence)
    else:
        model = model_or_jt
        evidence = check_evidence(model, evidence or {})

    from .models import log_joint

    names = sorted(n for n in model.variables if n not in evidence)
    pool = [
        f for f in (fa.reduce_factor(f, evidence) for f in model_factors(model))
        if f.scope
    ]
    assignment = dict(evidence)
    pointers: list[tuple[str, Factor | None, np.ndarray | None]] = []
    for var in reversed(names):
        bucket = [f for f in pool if var in f.names]
        pool = [f for f in pool if var not in f.names]
        if not bucket:
            pointers.append((var, None, None))
            continue
        combined = bucket[0]
        for f in bucket[1:]:
            combined = fa.product(combined, f)
        # put var first so argmax along axis 0 indexes by the remaining scope
        combined = fa.align_to(
            combined, sorted(combined.names, key=lambda n: (n != var, n))
        )
        argmax = np.argmax(combined.table, axis=0)  # lowest state index on ties
        pool.append(fa.eliminate(combined, [var], MAX_PRODUCT))
        pointers.append((var, combined, argmax))

    # traceback in name order (reverse of elimination)
    for var, combined, argmax in reversed(pointers):
        v = model.variable(var)
        if combined is None:
            assignment[var] = v.states[0]
            continue
        rest = combined.names[1:]
        idx = tuple(
            model.variable(n).index_of(assignment[n]) for n in rest
        )
        assignment[var] = v.states[int(argmax[idx] if rest else argmax)]
    score = log_joint(model, assignment)
    return assignment, score


# ---------------------------------------------------------------------------
# Junction tree
# ---------------------------------------------------------------------------


@dataclass
class JunctionTree:
    """A calibrated-on-demand clique tree.

    Cliques are frozensets of variable names; ``tree_edges`` connect clique
    indices and carry sepsets (intersections of endpoint scopes). The
    potentials are products of the model factors assigned to each clique
    (family preservation). After :func:`jt_calibrate`, ``beliefs[c]`` is
    proportional to p(x_c, evidence) and ``log_partition`` holds log Z.
    """

    model: Model
    cliques: list[frozenset[str]]
    tree_edges: list[tuple[int, int]]
    sepsets: dict[tuple[int, int], frozenset[str]]
    potentials: list[Factor]
    assignment_of_factor: list[int]
    evidence: dict[str, str] = field(default_factory=dict)
    messages: dict[tuple[int, int], Factor] = field(default_factory=dict)
    message_log_scale: dict[tuple[int, int], float] = field(default_factory=dict)
    beliefs: list[Factor] | None = None
    belief_log_scale: list[float] | None = None
    calibrated: bool = False
    log_partition: float = math.nan

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.tree_edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def clique_for(self, variable: str) -> int:
        """Index of the smallest clique containing the variable (ties by order)."""
        best = None
        for idx, c in enumerate(self.cliques):
            if variable in c and (best is None or len(c) < len(self.cliques[best])):
                best = idx
        if best is None:
            raise ScopeError(f"variable {variable!r} not covered by any clique")
        return best

    def to_dot(self) -> str:
        lines = ["graph junction_tree {"]
        for i, c in enumerate(self.cliques):
            label = ",".join(sorted(c))
            lines.append(f'  clique{i} [shape=ellipse, label="{label}"];')
        for k, (a, b) in enumerate(sorted(self.tree_edges)):
            label = ",".join(sorted(self.sepsets[(a, b)])) or "(empty)"
            lines.append(f'  sepset{k} [shape=box, label="{label}"];')
            lines.append(f"  clique{a} -- sepset{k};")
            lines.append(f"  sepset{k} -- clique{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def family_preservation_holds(jt: JunctionTree) -> bool:
    return all(
        set(f.names) <= jt.cliques[jt.assignment_of_factor[i]]
        for i, f in enumerate(model_factors(jt.model))
    )


def running_intersection_holds(jt: JunctionTree) -> bool:
    """Direct path check: every clique on the path between two cliques
    contains their intersection."""
    n = len(jt.cliques)
    adj = {i: jt.neighbors(i) for i in range(n)}

    def path(i, j):
        prev = {i: None}
        stack = [i]
        while stack:
            u = stack.pop()
            if u == j:
                out = [j]
                while prev[out[-1]] is not None:
                    out.append(prev[out[-1]])
                return out[::-1]
            for w in adj[u]:
                if w not in prev:
                    prev[w] = u
                    stack.append(w)
        return None

    for i in range(n):
        for j in range(i + 1, n):
            inter = jt.cliques[i] & jt.cliques[j]
            if not inter:
                continue
            p = path(i, j)
            if p is None:
                return False
            for mid in p:
                if not inter <= jt.cliques[mid]:
                    return False
    return True


def build_junction_tree(model: Model, heuristic: str = "min_fill") -> JunctionTree:
    """Moralize/skeletonize, chordalize, and assemble a maximum-weight
    clique tree with sepset-cardinality edge weights.

    Zero-weight edges (empty sepsets) are kept so a spanning tree exists
    even for disconnected models. Each factor is assigned to the
    lexicographically smallest containing clique.
    """
    graph = interaction_graph(model)
    ordering = choose_ordering(model, heuristic).order
    # choose_ordering excludes nothing here, so this is a full permutation
    chordal, elim_cliques = triangulate(graph, ordering)
    cliques = max_cliques(chordal, elim_cliques)
    if not cliques:
        cliques = [frozenset()]

    labels = [f"c{i}" for i in range(len(cliques))]
    pairs = [
        (labels[i], labels[j])
        for i in range(len(cliques))
        for j in range(i + 1, len(cliques))
    ]
    weights = {
        (labels[i], labels[j]): len(cliques[i] & cliques[j])
        for i in range(len(cliques))
        for j in range(i + 1, len(cliques))
    }
    clique_graph = UndirectedGraph(labels, pairs)
    tree = max_weight_spanning_tree(clique_graph, weights).tree
    index = {lab: k for k, lab in enumerate(labels)}
    tree_edges = sorted((index[u], index[v]) for u, v in tree.edges)
    sepsets = {}
    for a, b in tree_edges:
        sepsets[(a, b)] = cliques[a] & cliques[b]
        sepsets[(b, a)] = cliques[a] & cliques[b]

    factors = model_factors(model)
    assignment = []
    ranked = sorted(range(len(cliques)), key=lambda k: tuple(sorted(cliques[k])))
    for f in factors:
        names = set(f.names)
        home = next((k for k in ranked if names <= cliques[k]), None)
        if home is None:
            raise RuntimeError(
                f"factor over {sorted(names)} fits no clique; chordalization is inconsistent"
            )
        assignment.append(home)

    potentials = []
    for k, c in enumerate(cliques):
        scope = [model.variable(n) for n in sorted(c)]
        pot = fa.ones_like(scope)
        for fi, home in enumerate(assignment):
            if home == k:
                pot = fa.product(pot, factors[fi])
        potentials.append(fa.align_to(pot, sorted(c)) if c else pot)

    jt = JunctionTree(model, list(cliques), tree_edges, sepsets, potentials, assignment)
    if not family_preservation_holds(jt) or not running_intersection_holds(jt):
        raise RuntimeError("constructed clique tree violates a junction-tree property")
    return jt


def jt_calibrate(jt: JunctionTree, evidence: Mapping[str, str] | None = None) -> JunctionTree:
    """Shafer-Shenoy calibration: two messages per edge, division-free.

    Beliefs end up proportional to p(x_c, evidence); sums agree across
    cliques once per-message normalizers (tracked in log space) are folded
    back in, and that common value is exp(log_partition).
    """
    evidence = check_evidence(jt.model, evidence or {})
    jt.evidence = dict(evidence)
    worked = [fa.reduce_factor(p, evidence) for p in jt.potentials]
    n = len(jt.cliques)
    neighbors = {i: jt.neighbors(i) for i in range(n)}

    # inward-outward schedule over each connected tree component
    order: list[int] = []
    parent: dict[int, int | None] = {}
    for root in range(n):
        if root in parent:
            continue
        parent[root] = None
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for w in neighbors[u]:
                if w not in parent:
                    parent[w] = u
                    stack.append(w)

    messages: dict[tuple[int, int], Factor] = {}
    scales: dict[tuple[int, int], float] = {}

    def send(i: int, j: int) -> None:
        sep = sorted(
            s for s in jt.sepsets[(i, j)] if s not in evidence
        )
        msg = worked[i]
        scale = 0.0
        for k in neighbors[i]:
            if k != j:
                msg = fa.product(msg, messages[(k, i)])
                scale += scales[(k, i)]
        msg = fa.eliminate(msg, [v for v in msg.names if v not in sep])
        if set(msg.names) != set(sep):  # empty-potential corner: broadcast
            missing = [jt.model.variable(s) for s in sep if s not in msg.names]
            msg = fa.product(msg, fa.ones_like(missing)) if missing else msg
        total = float(np.sum(msg.table))
        if total <= 0.0:
            raise ZeroEvidenceError("the evidence has probability zero")
        messages[(i, j)] = Factor(msg.scope, msg.table / total)
        scales[(i, j)] = scale + math.log(total)

    for u in reversed(order):
        if parent[u] is not None:
            send(u, parent[u])
    for u in order:
        for w in neighbors[u]:
            if w != parent[u]:
                send(u, w)

    beliefs, belief_scales = [], []
    log_z = None
    for i in range(n):
        b = worked[i]
        scale = 0.0
        for k in neighbors[i]:
            b = fa.product(b, messages[(k, i)])
            scale += scales[(k, i)]
        total = float(np.sum(b.table))
        if total <= 0.0:
            raise ZeroEvidenceError("the evidence has probability zero")
        beliefs.append(Factor(b.scope, b.table / total))
        belief_scales.append(scale + math.log(total))
        if log_z is None:
            log_z = scale + math.log(total)

    jt.messages = messages
    jt.message_log_scale = scales
    jt.beliefs = beliefs
    jt.belief_log_scale = belief_scales
    jt.calibrated = True
    jt.log_partition = float(log_z if log_z is not None else 0.0)
    assert len(messages) == 2 * len(jt.tree_edges)
    return jt


def jt_query(jt: JunctionTree, variable: str) -> Factor:
    """Normalized marginal of one variable from a calibrated tree."""
    if not jt.calibrated:
        raise RuntimeError("calibrate the junction tree before querying")
    var = jt.model.variable(variable)
    if variable in jt.evidence:
        table = np.zeros(var.cardinality)
        table[var.index_of(jt.evidence[variable])] = 1.0
        return Factor([var], table)
    idx = jt.clique_for(variable)
    belief = jt.beliefs[idx]
    marg = fa.eliminate(belief, [n for n in belief.names if n != variable])
    out, _ = fa.normalize(marg)
    return out


def jt_clique_log_partitions(jt: JunctionTree) -> list[float]:
    """Per-clique log of the belief total, message scales folded back in.

    Calibration makes these identical; they equal log_partition.
    """
    if not jt.calibrated:
        raise RuntimeError("calibrate the junction tree first")
    return list(jt.belief_log_scale)
