"""
Consensus problems over communication graphs and a lockstep network simulator.

Each node ``i`` keeps a copy ``y_i`` of the decision variable; the lifted
problem couples the copies through the incidence constraints
``y_i - y_j = 0`` for every edge ``(i, j)``, ``i < j``. The simulator runs
prediction-correction as node-local computations that only touch the node's
own objective and the duals of its incident edges, exchanging primal
variables with neighbors once per inner round.
"""

from __future__ import annotations

import contextvars
import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import block_diag
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dual import TrajectoryOracle, newton_minimize
from .errors import DisconnectedGraph, NoConvergence
from .prediction import DUAL_GRADIENT, EXACT
from .problem import (
    PrimalDualState,
    SmoothnessBounds,
    TimeVaryingProblem,
    analyze_constraints,
    project_onto_image,
)
from .tracker import ADUPC, TrackerConfig
from .trajectory import TrajectoryLog

# index of the node whose update is executing; lets tests audit oracle access
current_node: contextvars.ContextVar[Optional[int]] = contextvars.ContextVar(
    "current_node", default=None
)


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph with edges stored as ``(i, j)``, ``i < j``."""

    N: int
    edges: tuple

    def __post_init__(self):
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < j < self.N):
                raise ValueError(f"edge {(i, j)} must satisfy 0 <= i < j < N={self.N}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge {(i, j)}")
            seen.add((i, j))

    @classmethod
    def from_edges(cls, N, edges) -> "CommGraph":
        """Build a graph, orienting each pair as ``(min, max)``; duplicates raise."""
        oriented = [(min(int(i), int(j)), max(int(i), int(j))) for i, j in edges]
        if any(i == j for i, j in oriented):
            raise ValueError("self-loops are not allowed")
        return cls(int(N), tuple(sorted(oriented)))

    @property
    def neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.N)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(v) for v in nbrs]

    @property
    def degrees(self) -> list[int]:
        return [len(v) for v in self.neighbors]

    def is_connected(self) -> bool:
        if self.N == 1:
            return True
        if not self.edges:
            return False
        i, j = np.array(self.edges).T
        adj = coo_matrix((np.ones(len(i)), (i, j)), shape=(self.N, self.N))
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1


def complete_graph(N) -> CommGraph:
    return CommGraph(N, tuple((i, j) for i in range(N) for j in range(i + 1, N)))


def path_graph(N) -> CommGraph:
    return CommGraph(N, tuple((i, i + 1) for i in range(N - 1)))


def random_connected_graph(N, expected_degree, rng: np.random.Generator,
                           max_tries=10_000) -> CommGraph:
    """Erdos-Renyi graph with edge probability ``expected_degree / (N - 1)``,
    resampled until connected."""
    if N < 2:
        return CommGraph(N, ())
    prob = min(1.0, expected_degree / (N - 1))
    iu, ju = np.triu_indices(N, k=1)
    for _ in range(max_tries):
        keep = rng.random(len(iu)) < prob
        graph = CommGraph(N, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))
        if graph.is_connected():
            return graph
    raise DisconnectedGraph(f"no connected sample in {max_tries} tries "
                            f"(N={N}, expected degree {expected_degree})")


def write_edge_list(graph: CommGraph, path=None) -> str:
    """Edge-list text: a ``# nodes N`` comment, then one ``i j`` pair per line."""
    lines = [f"# nodes {graph.N}"] + [f"{i} {j}" for i, j in graph.edges]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def parse_edge_list(text) -> CommGraph:
    """Parse 0-indexed ``i j`` lines; ``#`` starts a comment.

    The node count comes from a ``# nodes N`` comment when present, else
    from the largest index.
    """
    N, edges = None, []
    for raw in text.splitlines():
        line, _, comment = raw.partition("#")
        words = comment.split()
        if len(words) == 2 and words[0] == "nodes":
            N = int(words[1])
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line: {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if N is None:
        N = 1 + max((max(e) for e in edges), default=0)
    return CommGraph.from_edges(N, edges)


def read_edge_list(path) -> CommGraph:
    with open(path) as fh:
        return parse_edge_list(fh.read())


@dataclass(frozen=True, eq=False)
class LocalObjective:
    """Oracles of one node's cost ``f_i(y; t)`` on ``R^n``."""

    grad: Callable
    hessian: Callable
    bounds: SmoothnessBounds
    mixed_grad: Optional[Callable] = None
    value: Optional[Callable] = None


def incidence_matrix(graph: CommGraph, n=1) -> np.ndarray:
    """Block incidence matrix, ``+I`` on the lower endpoint of each edge."""
    A = np.zeros((len(graph.edges) * n, graph.N * n))
    eye = np.eye(n)
    for e, (i, j) in enumerate(graph.edges):
        A[e * n:(e + 1) * n, i * n:(i + 1) * n] = eye
        A[e * n:(e + 1) * n, j * n:(j + 1) * n] = -eye
    return A


def aggregate_bounds(local_bounds) -> SmoothnessBounds:
    """Constants of the separable sum, stacked over nodes.

    Vector-valued derivatives (``C0``, ``C3``) add in quadrature; block-diagonal
    ones (``C1``, ``C2``) take the maximum.
    """
    lb = list(local_bounds)
    return SmoothnessBounds(
        m=min(b.m for b in lb),
        L=max(b.L for b in lb),
        C0=float(np.sqrt(sum(b.C0 ** 2 for b in lb))),
        C1=max(b.C1 for b in lb),
        C2=max(b.C2 for b in lb),
        C3=float(np.sqrt(sum(b.C3 ** 2 for b in lb))),
    )


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    graph: CommGraph
    local: tuple
    n: int
    problem: TimeVaryingProblem

    @property
    def A(self) -> np.ndarray:
        return self.problem.constraints.A

    @property
    def bounds(self) -> SmoothnessBounds:
        return self.problem.bounds


def build_lifted(graph: CommGraph, local_objectives, n=1,
                 bounds: Optional[SmoothnessBounds] = None, name="lifted",
                 stacked: Optional[dict] = None) -> LiftedProblem:
    """Assemble the lifted consensus problem ``min sum_i f_i(y_i; t) s.t. A y = 0``.

    ``bounds`` overrides the aggregated constants (e.g. tighter
    scenario-specific values). ``stacked`` may supply vectorized oracles
    for the whole lifted objective (keys ``grad``, ``hessian``,
    ``mixed_grad``, ``value``); they must agree with the per-node ones,
    which the distributed simulator keeps using.

    Raises
    ------
    DisconnectedGraph
    """
    local = tuple(local_objectives)
    if len(local) != graph.N:
        raise ValueError(f"{len(local)} objectives for {graph.N} nodes")
    if not graph.is_connected():
        raise DisconnectedGraph("communication graph is not connected")
    if not graph.edges:
        raise ValueError("graph needs at least one edge")
    N = graph.N
    A = incidence_matrix(graph, n)
    cs = analyze_constraints(A, np.zeros(A.shape[0]))
    blocks = [slice(i * n, (i + 1) * n) for i in range(N)]

    def grad(y, t):
        return np.concatenate([f.grad(y[s], t) for f, s in zip(local, blocks)])

    def hessian(y, t):
        return block_diag(*[np.atleast_2d(f.hessian(y[s], t)) for f, s in zip(local, blocks)])

    mixed = value = None
    if all(f.mixed_grad is not None for f in local):
        def mixed(y, t):
            return np.concatenate([f.mixed_grad(y[s], t) for f, s in zip(local, blocks)])
    if all(f.value is not None for f in local):
        def value(y, t):
            return float(sum(f.value(y[s], t) for f, s in zip(local, blocks)))

    if stacked:
        grad = stacked.get("grad", grad)
        hessian = stacked.get("hessian", hessian)
        mixed = stacked.get("mixed_grad", mixed)
        value = stacked.get("value", value)
    problem = TimeVaryingProblem(
        grad=grad, hessian=hessian,
        bounds=bounds if bounds is not None else aggregate_bounds(f.bounds for f in local),
        constraints=cs, dimension=N * n, mixed_grad=mixed, value=value, name=name,
    )
    return LiftedProblem(graph, local, n, problem)


@dataclass
class CommBudgetLog:
    """Scalars sent per node per time step."""

    rows: list = field(default_factory=list)

    def append(self, k, node, scalars):
        self.rows.append((int(k), int(node), int(scalars)))

    def sent(self, k) -> dict[int, int]:
        return {node: s for kk, node, s in self.rows if kk == k}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "node", "scalars_sent"])
        w.writerows(self.rows)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class Network:
    """Synchronous message passing restricted to graph edges.

    Messages posted during a round become readable only after
    :meth:`deliver` (the round barrier).
    """

    def __init__(self, graph: CommGraph):
        self._nbrs = [set(v) for v in graph.neighbors]
        self._pending: list[dict] = [dict() for _ in range(graph.N)]
        self._inbox: list[dict] = [dict() for _ in range(graph.N)]
        self.scalars_sent = np.zeros(graph.N, dtype=int)

    def send(self, src, dst, payload):
        if dst not in self._nbrs[src]:
            raise PermissionError(f"node {src} cannot reach non-neighbor {dst}")
        payload = np.array(payload, dtype=float)
        self._pending[dst][src] = payload
        self.scalars_sent[src] += payload.size

    def deliver(self):
        self._inbox, self._pending = self._pending, [dict() for _ in self._pending]

    def receive(self, dst) -> dict:
        return self._inbox[dst]


class Node:
    """Node-local state: primal copy and the duals of incident edges.

    ``duals[j]`` is the multiplier of edge ``{i, j}``; the lower endpoint owns
    it, the upper one keeps a mirror updated from the same exchanged values.
    """

    def __init__(self, index, objective: LocalObjective, neighbors, y, duals):
        self.index = index
        self.objective = objective
        self.neighbors = list(neighbors)
        self.y = y
        self.duals = duals

    def sign(self, j) -> float:
        return 1.0 if self.index < j else -1.0

    def dual_pull(self, duals) -> np.ndarray:
        """``(A^T lambda)_i`` from the incident-edge duals."""
        out = np.zeros_like(self.y)
        for j in self.neighbors:
            out = out + self.sign(j) * duals[j]
        return out

    def broadcast(self, net: Network, value):
        for j in self.neighbors:
            net.send(self.index, j, value)

    def dual_step(self, net: Network, duals, own_value, step):
        received = net.receive(self.index)
        for j in self.neighbors:
            lo, hi = (own_value, received[j]) if self.index < j else (received[j], own_value)
            duals[j] = duals[j] + step * (lo - hi)


def simulate_distributed_adupc(lifted: LiftedProblem, cfg: TrackerConfig,
                               init: Optional[PrimalDualState] = None,
                               oracle_tol=None, oracle: Optional[TrajectoryOracle] = None):
    """Run prediction-correction as synchronized node-local computations.

    Every inner round (``P`` prediction rounds, then ``C`` correction rounds)
    has three barrier-separated phases: all nodes solve their local
    subproblem, send their new local variable to each neighbor, and update
    the duals of incident edges. Prediction rounds run even on the first
    backward-difference sample (with a zero derivative estimate, giving a
    zero prediction) so that the communication schedule is uniform.

    Returns
    -------
    log : TrajectoryLog
        Stacked ``y`` and edge multipliers (ordered as ``graph.edges``).
    comm : CommBudgetLog
        Scalars sent by each node at each time step; checked to equal
        ``(P + C) * degree * n``.
    """
    if cfg.prediction_mode != DUAL_GRADIENT:
        raise ValueError("distributed execution needs prediction_mode='dual_gradient'")
    graph, n = lifted.graph, lifted.n
    N, nbrs = graph.N, graph.neighbors
    edge_index = {e: idx for idx, e in enumerate(graph.edges)}
    if oracle is None and oracle_tol is not None:
        oracle = TrajectoryOracle(lifted.problem, oracle_tol)

    if init is None:
        y0, lam0 = np.zeros(N * n), np.zeros(len(graph.edges) * n)
    else:
        y0 = np.array(init.x, dtype=float)
        lam0 = project_onto_image(init.lam, lifted.problem.constraints)
    nodes = []
    for i in range(N):
        duals = {j: lam0[edge_index[(min(i, j), max(i, j))] * n:][:n].copy() for j in nbrs[i]}
        nodes.append(Node(i, lifted.local[i], nbrs[i], y0[i * n:(i + 1) * n].copy(), duals))

    def stacked():
        y = np.concatenate([nd.y for nd in nodes])
        lam = np.concatenate([nodes[i].duals[j] for i, j in graph.edges]) if graph.edges \
            else np.zeros(0)
        return y, lam

    def record(k, t):
        y, lam = stacked()
        errs = oracle.errors(y, lam, t) if oracle is not None else (None, None)
        log.append(k, t, y, lam, *errs)

    def run_local(i, fn):
        token = current_node.set(i)
        try:
            return fn()
        finally:
            current_node.reset(token)

    times = cfg.times()
    h = cfg.h
    log = TrajectoryLog(meta=replace(cfg, strategy=ADUPC).meta())
    comm = CommBudgetLog()
    net = Network(graph)
    record(0, times[0])

    for k in range(cfg.k_max):
        t_k, t_next = times[k], times[k + 1]
        start = net.scalars_sent.copy()

        # prediction
        pred_duals = [{j: np.zeros(n) for j in nd.neighbors} for nd in nodes]
        dys = [np.zeros(n) for _ in nodes]
        if cfg.P > 0:
            factors, hcs = [], []
            for nd in nodes:
                def setup(nd=nd):
                    f = nd.objective
                    Q = np.atleast_2d(f.hessian(nd.y, t_k))
                    if cfg.derivative_mode == EXACT:
                        c = f.mixed_grad(nd.y, t_k)
                    elif k == 0:
                        c = np.zeros(n)
                    else:
                        c = (f.grad(nd.y, t_k) - f.grad(nd.y, times[k - 1])) / h
                    return np.linalg.cholesky(Q), h * np.asarray(c, dtype=float)
                Lc, hc = run_local(nd.index, setup)
                factors.append(Lc)
                hcs.append(hc)
            for _ in range(cfg.P):
                for nd in nodes:
                    rhs = hcs[nd.index] + nd.dual_pull(pred_duals[nd.index])
                    Lc = factors[nd.index]
                    dys[nd.index] = -np.linalg.solve(Lc.T, np.linalg.solve(Lc, rhs))
                    nd.broadcast(net, dys[nd.index])
                net.deliver()
                for nd in nodes:
                    nd.dual_step(net, pred_duals[nd.index], dys[nd.index], cfg.beta)
        for nd in nodes:
            nd.y = nd.y + dys[nd.index]
            for j in nd.neighbors:
                nd.duals[j] = nd.duals[j] + pred_duals[nd.index][j]

        # correction on f(.; t_{k+1})
        for _ in range(cfg.C):
            for nd in nodes:
                def solve(nd=nd):
                    f = nd.objective
                    value = None if f.value is None else (lambda v: f.value(v, t_next))
                    return newton_minimize(
                        lambda v: f.grad(v, t_next), lambda v: f.hessian(v, t_next), value,
                        nd.dual_pull(nd.duals), nd.y, cfg.inner_tol, cfg.inner_max_iters,
                    )
                try:
                    nd.y = run_local(nd.index, solve)
                except NoConvergence as exc:
                    raise NoConvergence(f"node {nd.index}: {exc}", exc.residual, step=k) from exc
                nd.broadcast(net, nd.y)
            net.deliver()
            for nd in nodes:
                nd.dual_step(net, nd.duals, nd.y, cfg.alpha)

        sent = net.scalars_sent - start
        for i in range(N):
            expected = (cfg.P + cfg.C) * len(nbrs[i]) * n
            if sent[i] != expected:
                raise RuntimeError(f"node {i} sent {sent[i]} scalars at step {k}, "
                                   f"expected {expected}")
            comm.append(k, i, sent[i])
        record(k + 1, t_next)
    return log, comm
