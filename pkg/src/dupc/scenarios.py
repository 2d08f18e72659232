"""
Seeded benchmark scenarios.

``consensus_xiao``
    ``N`` nodes on a random connected graph agree on ``y in R^n`` while each
    node tracks a moving target with a logistic penalty,

        f_i(y; t) = 0.5 ||y - amp cos(omega t + phi_i)||^2
                    + sum_j log(1 + exp(y_j - a_ij)).

``synthetic_quadratic``
    ``f(x; t) = 0.5 x^T Q x - r(t)^T x`` subject to ``A x = b`` with
    ``r(t) = amp cos(omega t + phi)``. The optimizer pair is affine in
    ``r(t)``, so the exact trajectory is available in closed form.

Random draws use PCG64 streams spawned from the scenario seed: stream
``(0,)`` for the graph, ``(1, i)`` for node ``i`` and ``(2,)`` for the
synthetic quadratic data.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from .distributed import (
    CommGraph,
    LiftedProblem,
    LocalObjective,
    build_lifted,
    complete_graph,
    random_connected_graph,
    read_edge_list,
)
from .errors import ConfigError
from .problem import SmoothnessBounds, TimeVaryingProblem, analyze_constraints

CONSENSUS_XIAO = "consensus_xiao"
SYNTHETIC_QUADRATIC = "synthetic_quadratic"
CUSTOM = "custom"
KINDS = (CONSENSUS_XIAO, SYNTHETIC_QUADRATIC, CUSTOM)

# max |sigma''| for the logistic sigmoid, attained at 0.5 +- sqrt(3)/6
LOGISTIC_THIRD_DERIVATIVE = 1 / (6 * math.sqrt(3))


@dataclass(frozen=True)
class Scenario:
    """Everything needed to regenerate a problem instance.

    ``graph`` is ``"random"`` (Erdos-Renyi with ``expected_degree``),
    ``"complete"``, or the path of an edge-list file. ``p`` and
    ``condition`` only affect ``synthetic_quadratic``. Entries of
    ``constants`` override the computed smoothness constants.
    """

    kind: str = CONSENSUS_XIAO
    N: int = 50
    n: int = 1
    amp: float = 2.5
    omega: float = math.pi / 80
    seed: int = 0
    a_low: float = -10.0
    a_high: float = 10.0
    graph: str = "random"
    expected_degree: float = 4.0
    p: int = 3
    condition: float = 4.0
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.N < 1 or self.n < 1:
            raise ConfigError("N and n must be positive")
        if self.amp < 0 or self.omega < 0:
            raise ConfigError("amp and omega must be nonnegative")
        if not self.a_low <= self.a_high:
            raise ConfigError("a_low must not exceed a_high")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.condition < 1:
            raise ConfigError("condition must be >= 1")
        unknown = set(self.constants) - {"m", "L", "C0", "C1", "C2", "C3"}
        if unknown:
            raise ConfigError(f"unknown constants {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown scenario fields {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def stream(seed, *key) -> np.random.Generator:
    """Independent generator for the sub-stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sinusoid_norm_bound(scale, phases) -> float:
    """``max_t ||scale * sin(omega t + phases)||`` over all ``t``.

    ``sum_j sin^2(theta + phi_j) = d/2 - Re(exp(2i theta) sum_j exp(2i phi_j)) / 2``
    peaks at ``d/2 + |sum_j exp(2i phi_j)| / 2``.
    """
    phases = np.ravel(phases)
    peak = phases.size / 2 + abs(np.exp(2j * phases).sum()) / 2
    return float(scale * math.sqrt(max(peak, 0.0)))


def _override(bounds: SmoothnessBounds, constants) -> SmoothnessBounds:
    return dataclasses.replace(bounds, **constants) if constants else bounds


def make_graph(scenario: Scenario) -> CommGraph:
    if scenario.graph == "random":
        return random_connected_graph(scenario.N, scenario.expected_degree, stream(scenario.seed, 0))
    if scenario.graph == "complete":
        return complete_graph(scenario.N)
    graph = read_edge_list(scenario.graph)
    if graph.N != scenario.N:
        raise ConfigError(f"graph file has {graph.N} nodes, scenario expects {scenario.N}")
    return graph


def xiao_objective(a, phi, amp, omega) -> LocalObjective:
    """Local cost of the consensus scenario for one node (arrays of length n)."""
    a = np.asarray(a, dtype=float)
    phi = np.asarray(phi, dtype=float)

    def value(y, t):
        return float(0.5 * np.sum((y - amp * np.cos(omega * t + phi)) ** 2)
                     + np.sum(np.logaddexp(0.0, y - a)))

    def grad(y, t):
        return y - amp * np.cos(omega * t + phi) + expit(y - a)

    def hessian(y, t):
        s = expit(y - a)
        return np.diag(1.0 + s * (1.0 - s))

    def mixed_grad(y, t):
        return amp * omega * np.sin(omega * t + phi)

    bounds = SmoothnessBounds(
        m=1.0, L=1.25,
        C0=sinusoid_norm_bound(amp * omega, phi),
        C1=LOGISTIC_THIRD_DERIVATIVE,
        C2=0.0,
        C3=sinusoid_norm_bound(amp * omega ** 2, phi),
    )
    return LocalObjective(grad, hessian, bounds, mixed_grad, value)


def xiao_consensus(scenario: Scenario) -> LiftedProblem:
    graph = make_graph(scenario)
    a, phi = [], []
    for i in range(scenario.N):
        rng = stream(scenario.seed, 1, i)
        a.append(rng.uniform(scenario.a_low, scenario.a_high, scenario.n))
        phi.append(rng.uniform(0.0, 2 * math.pi, scenario.n))
    local = [xiao_objective(a_i, phi_i, scenario.amp, scenario.omega) for a_i, phi_i in zip(a, phi)]
    # the stacked mixed gradient is one sinusoid over all N n coordinates
    stacked = SmoothnessBounds(
        m=1.0, L=1.25,
        C0=sinusoid_norm_bound(scenario.amp * scenario.omega, phi),
        C1=LOGISTIC_THIRD_DERIVATIVE,
        C2=0.0,
        C3=sinusoid_norm_bound(scenario.amp * scenario.omega ** 2, phi),
    )
    whole = xiao_objective(np.concatenate(a), np.concatenate(phi), scenario.amp, scenario.omega)
    oracles = {"grad": whole.grad, "hessian": whole.hessian,
               "mixed_grad": whole.mixed_grad, "value": whole.value}
    return build_lifted(graph, local, scenario.n, _override(stacked, scenario.constants),
                        name=f"{CONSENSUS_XIAO}(N={scenario.N}, seed={scenario.seed})",
                        stacked=oracles)


@dataclass(frozen=True, eq=False)
class QuadraticData:
    Q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    phi: np.ndarray
    amp: float
    omega: float


def quadratic_data(scenario: Scenario) -> QuadraticData:
    n, p = scenario.N * scenario.n, scenario.p
    if p > n:
        raise ConfigError("synthetic_quadratic needs p <= N * n")
    rng = stream(scenario.seed, 2)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.linspace(1.0, scenario.condition, n)
    Q = (U * eigs) @ U.T
    A = rng.standard_normal((p, n))
    b = A @ rng.standard_normal(n)
    phi = rng.uniform(0.0, 2 * math.pi, n)
    return QuadraticData(0.5 * (Q + Q.T), A, b, phi, scenario.amp, scenario.omega)


def synthetic_quadratic(scenario: Scenario) -> TimeVaryingProblem:
    d = quadratic_data(scenario)
    amp, omega, phi, Q = d.amp, d.omega, d.phi, d.Q
    eigs = np.linalg.eigvalsh(Q)

    def r(t):
        return amp * np.cos(omega * t + phi)

    bounds = SmoothnessBounds(
        m=float(eigs[0]), L=float(eigs[-1]),
        C0=sinusoid_norm_bound(amp * omega, phi),
        C3=sinusoid_norm_bound(amp * omega ** 2, phi),
    )
    return TimeVaryingProblem(
        grad=lambda x, t: Q @ x - r(t),
        hessian=lambda x, t: Q,
        bounds=_override(bounds, scenario.constants),
        constraints=analyze_constraints(d.A, d.b),
        dimension=Q.shape[0],
        mixed_grad=lambda x, t: amp * omega * np.sin(omega * t + phi),
        value=lambda x, t: float(0.5 * x @ Q @ x - r(t) @ x),
        name=f"{SYNTHETIC_QUADRATIC}(n={Q.shape[0]}, p={d.A.shape[0]}, seed={scenario.seed})",
    )


def quadratic_trajectory(scenario: Scenario, order=0):
    """Closed-form optimizer pair of ``synthetic_quadratic`` and its time derivatives.

    Returns a function ``t -> (x, lambda)`` giving the ``order``-th time
    derivative (0, 1 or 2) of the optimizer pair, with the multiplier in
    im(A).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    d = quadratic_data(scenario)
    n, p = d.Q.shape[0], d.A.shape[0]
    K = np.block([[d.Q, d.A.T], [d.A, np.zeros((p, p))]])
    Kpinv = np.linalg.pinv(K, rcond=1e-12)

    def pair(t):
        phase = d.omega * t + d.phi
        r = d.amp * d.omega ** order * [np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z)][order](phase)
        rhs = np.concatenate([r, d.b if order == 0 else np.zeros(p)])
        sol = Kpinv @ rhs
        return sol[:n], sol[n:]

    return pair


def generate_scenario(scenario: Scenario | dict):
    """Build the problem described by ``scenario``.

    Returns
    -------
    LiftedProblem for ``consensus_xiao``; TimeVaryingProblem for
    ``synthetic_quadratic``.

    Raises
    ------
    ConfigError
        Invalid fields, or ``kind="custom"`` (custom problems are built
        directly as :class:`TimeVaryingProblem`).
    """
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    if scenario.kind == CONSENSUS_XIAO:
        return xiao_consensus(scenario)
    if scenario.kind == SYNTHETIC_QUADRATIC:
        return synthetic_quadratic(scenario)
    raise ConfigError("custom scenarios are constructed directly with TimeVaryingProblem")


def as_problem(built) -> TimeVaryingProblem:
    """The centralized problem of a generated scenario."""
    return built.problem if isinstance(built, LiftedProblem) else built


def scenario_graph(built) -> Optional[CommGraph]:
    return built.graph if isinstance(built, LiftedProblem) else None
