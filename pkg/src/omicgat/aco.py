"""Multi-agent joint feature selection over interconnected feature networks.

Each iteration places agents on random unique nodes of every omic's feature
network; agents grow solutions feature-by-feature with a greedy rule (inside
the current omic, biased by relevance, node/edge desirability and redundancy)
or a probabilistic rule (jumping between omics by importance). Solutions are
scored by a fitness mixing validation accuracy of an auxiliary
nearest-centroid classifier with a relevance-minus-redundancy regularizer,
and desirability values are decayed and reinforced after every iteration.

RNG protocol (fixed so parallel agents reproduce the sequential result, and
so tests can replay the exact stream):

* placement for iteration ``t``, omic ``m``:
  ``default_rng(SeedSequence(seed, spawn_key=(1, t, m)))`` drawing
  ``permutation(d_m)[:agents_per_omic]`` as start nodes;
* agent ``a`` of omic ``m`` at iteration ``t``:
  ``default_rng(SeedSequence(seed, spawn_key=(2, t, m, a)))``; per step it
  draws ``q = rng.random()``; if ``q > q0`` it draws one uniform for the
  omic choice (cumulative importance over omics with feasible features) and
  one uniform for the feature choice (cumulative transition probabilities);
  a greedy step consumes no draw unless the current omic is exhausted, in
  which case one uniform re-draws the omic before the greedy argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "AcoConfig",
    "DesirabilityState",
    "AgentSolution",
    "Nets",
    "Agent",
    "FitnessContext",
    "SelectionResult",
    "eta2_avg_redundancy",
    "greedy_step",
    "probabilistic_step",
    "nearest_centroid_accuracy",
    "fitness",
    "update_desirability",
    "update_omic_importance",
    "run_selection",
]


@dataclass
class AcoConfig:
    iterations: int = 50
    agents_per_omic: int = 10
    node_init: float = 0.2
    edge_init: float = 0.2
    node_decay: float = 0.1
    edge_decay: float = 0.1
    omic_decay: float = 0.1
    q0: float = 0.8
    budget_per_agent: int = 30
    select_per_omic: int = 100
    seed: int = 0
    record_trace: bool = False  # keep every iteration's solutions for auditing

    def validate(self):
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.agents_per_omic < 1:
            raise DataError("agents_per_omic must be >= 1")
        for name in ("node_decay", "edge_decay", "omic_decay"):
            rho = getattr(self, name)
            if not 0.0 < rho <= 1.0:
                raise DataError(f"{name} must be in (0, 1], got {rho}")
        if not 0.0 <= self.q0 <= 1.0:
            raise DataError(f"q0 must be in [0, 1], got {self.q0}")
        if self.node_init <= 0 or self.edge_init <= 0:
            raise DataError("initial desirabilities must be positive")
        if self.budget_per_agent < 1:
            raise DataError("budget_per_agent must be >= 1")


@dataclass
class DesirabilityState:
    """Node/edge desirability per omic plus the omic importance vector."""

    node_tau: list[np.ndarray]
    edge_tau: list[np.ndarray]
    omic_importance: np.ndarray

    @classmethod
    def initial(cls, nets, node_init, edge_init):
        m = len(nets)
        return cls(
            node_tau=[np.full(net.node_count, node_init, dtype=np.float64) for net in nets],
            edge_tau=[np.full(net.edge_count, edge_init, dtype=np.float64) for net in nets],
            omic_importance=np.full(m, 1.0 / m, dtype=np.float64),
        )

    def validate(self):
        for tau in self.node_tau + self.edge_tau:
            if tau.size and (not np.all(np.isfinite(tau)) or tau.min() <= 0):
                raise ValueError("desirability values must stay positive and finite")
        p = self.omic_importance
        if abs(p.sum() - 1.0) > 1e-12 or p.min() <= 0:
            raise ValueError("omic importance must be a strictly positive simplex point")


@dataclass
class AgentSolution:
    """Ordered selections and the intra-omic edges walked to reach them."""

    selected: list[tuple[int, int]] = field(default_factory=list)
    traversed: list[tuple[int, int]] = field(default_factory=list)  # (omic, edge index)
    fitness: float = float("nan")


class Nets:
    """Preprocessed adjacency for fast scoring rows and edge lookup."""

    def __init__(self, nets):
        self.nets = nets
        self.nbrs = []
        self.eidx = []
        self.edge_of_pair = []
        for net in nets:
            nb, ei = net.adjacency_rows()
            self.nbrs.append(nb)
            self.eidx.append(ei)
            self.edge_of_pair.append(
                {
                    (int(min(u, v)), int(max(u, v))): e
                    for e, (u, v) in enumerate(zip(net.edges_u, net.edges_v))
                }
            )

    def weight_row(self, m, u, out):
        """Write |corr| of u's stored neighbors into ``out`` (zeros elsewhere)."""
        out[self.nbrs[m][u]] += self.nets[m].weights[self.eidx[m][u]]

    def tau_edge_row(self, m, u, edge_tau):
        row = np.zeros(self.nets[m].node_count)
        row[self.nbrs[m][u]] = edge_tau[self.eidx[m][u]]
        return row

    def edge_between(self, m, u, v):
        return self.edge_of_pair[m].get((int(min(u, v)), int(max(u, v))))


class Agent:
    """Tracks one agent's selections and incremental redundancy sums."""

    def __init__(self, nets: Nets):
        self.nets = nets
        self.solution = AgentSolution()
        self.selected_mask = [np.zeros(net.node_count, dtype=bool) for net in nets.nets]
        self.corr_sum = [np.zeros(net.node_count) for net in nets.nets]
        self.count = [0] * len(nets.nets)
        self.current: tuple[int, int] | None = None

    def add(self, m, f, edge=None):
        self.solution.selected.append((m, f))
        if edge is not None:
            self.solution.traversed.append((m, edge))
        self.selected_mask[m][f] = True
        self.nets.weight_row(m, f, self.corr_sum[m])
        self.count[m] += 1
        self.current = (m, f)

    def eta2(self, m):
        """Average correlation with already-selected same-omic features."""
        if self.count[m] == 0:
            return np.zeros(self.nets.nets[m].node_count)
        return self.corr_sum[m] / self.count[m]

    def feasible(self, m):
        return ~self.selected_mask[m]


def eta2_avg_redundancy(candidate, solution_pairs, nets):
    """Mean |corr| between a candidate and already-selected same-omic features.

    Pairs without a stored edge contribute 0; an empty same-omic selection
    yields 0. Reference implementation used by tests; the search loop keeps
    incremental sums instead.
    """
    m, f = candidate
    helper = nets if isinstance(nets, Nets) else Nets(nets)
    same = [u for (mm, u) in solution_pairs if mm == m]
    if not same:
        return 0.0
    acc = 0.0
    for u in same:
        e = helper.edge_between(m, f, u)
        if e is not None:
            acc += float(helper.nets[m].weights[e])
    return acc / len(same)


def _pick_cumulative(weights, r):
    """Index drawn from unnormalized nonnegative weights via one uniform."""
    cum = np.cumsum(weights)
    if cum[-1] <= 0:
        raise ValueError("all weights zero")
    return int(min(np.searchsorted(cum, r * cum[-1], side="right"), len(weights) - 1))


def greedy_step(agent, m, relevance, state, nets):
    """Argmax of relevance + node tau + edge tau - redundancy over feasible
    features of omic ``m``; ties resolve to the lowest feature index.

    Returns ``None`` when the omic is exhausted so the caller re-draws.
    """
    feasible = agent.feasible(m)
    if not feasible.any():
        return None
    scores = relevance[m] + state.node_tau[m] - agent.eta2(m)
    if agent.current is not None and agent.current[0] == m:
        scores = scores + nets.tau_edge_row(m, agent.current[1], state.edge_tau[m])
    scores = np.where(feasible, scores, -np.inf)
    return int(np.argmax(scores))


def probabilistic_step(agent, relevance, state, nets, rng):
    """Sample an omic by importance, then a feature by clamped transition
    weights (relevance + node tau - redundancy; edge desirability excluded).

    Omics without feasible features are excluded before the draw; an
    all-zero weight vector falls back to the uniform distribution.
    """
    m_count = len(nets.nets)
    feasible_omics = [m for m in range(m_count) if agent.feasible(m).any()]
    if not feasible_omics:
        raise DataError("no feasible features remain in any omic")
    p = state.omic_importance[feasible_omics]
    m = feasible_omics[_pick_cumulative(p, rng.random())]

    feasible = agent.feasible(m)
    weights = np.maximum(relevance[m] + state.node_tau[m] - agent.eta2(m), 0.0)
    weights = np.where(feasible, weights, 0.0)
    if weights.sum() <= 0:
        weights = feasible.astype(np.float64)
    j = _pick_cumulative(weights, rng.random())
    return m, j


def _redraw_omic(agent, state, rng, exclude):
    feasible_omics = [
        m for m in range(len(agent.selected_mask)) if m != exclude and agent.feasible(m).any()
    ]
    if not feasible_omics:
        raise DataError("no feasible features remain in any omic")
    p = state.omic_importance[feasible_omics]
    return feasible_omics[_pick_cumulative(p, rng.random())]


def nearest_centroid_accuracy(train_x, train_y, valid_x, valid_y, class_count):
    """Accuracy of the nearest class centroid rule; ties pick the lowest class.

    With a single class in the training rows the rule degenerates to
    predicting that class everywhere.
    """
    present = np.unique(train_y)
    if len(present) == 1:
        return float(np.mean(valid_y == present[0]))
    dists = np.full((valid_x.shape[0], class_count), np.inf)
    for c in present:
        centroid = train_x[train_y == c].mean(axis=0)
        diff = valid_x - centroid
        dists[:, c] = (diff * diff).sum(axis=1)
    pred = dists.argmin(axis=1)
    return float(np.mean(pred == valid_y))


@dataclass
class FitnessContext:
    """Fold-internal data the fitness function evaluates solutions on."""

    train_mats: list[np.ndarray]
    train_labels: np.ndarray
    valid_mats: list[np.ndarray]
    valid_labels: np.ndarray
    class_count: int
    relevance: list[np.ndarray]
    nets: object  # Nets or list[SimilarityGraph]

    def __post_init__(self):
        if not isinstance(self.nets, Nets):
            self.nets = Nets(self.nets)

    def columns(self, pairs):
        train = np.column_stack([self.train_mats[m][:, f] for m, f in pairs])
        valid = np.column_stack([self.valid_mats[m][:, f] for m, f in pairs])
        return train, valid


def fitness(solution, ctx):
    """(1/3) * [validation accuracy + (mean relevance - mean edge correlation)].

    The leading factor is kept exactly as defined even though only two terms
    are summed; it rescales every solution identically.
    """
    if not solution.selected:
        raise DataError("cannot score an empty solution")
    train_x, valid_x = ctx.columns(solution.selected)
    q = nearest_centroid_accuracy(
        train_x, ctx.train_labels, valid_x, ctx.valid_labels, ctx.class_count
    )
    mean_rel = float(np.mean([ctx.relevance[m][f] for m, f in solution.selected]))
    if solution.traversed:
        mean_corr = float(
            np.mean([ctx.nets.nets[m].weights[e] for m, e in solution.traversed])
        )
    else:
        mean_corr = 0.0
    r = mean_rel - mean_corr
    return (q + r) / 3.0


def update_desirability(state, solutions, best, best_fitness, cfg):
    """Decay every node/edge desirability and deposit on selected ones.

    Deposits are the selection share of this iteration plus the best
    solution's fitness for nodes/edges it contains; non-selected elements
    decay only.
    """
    m_count = len(state.node_tau)
    node_counts = [np.zeros_like(t) for t in state.node_tau]
    edge_counts = [np.zeros_like(t) for t in state.edge_tau]
    total_nodes = 0
    total_edges = 0
    for sol in solutions:
        total_nodes += len(sol.selected)
        total_edges += len(sol.traversed)
        for m, f in sol.selected:
            node_counts[m][f] += 1.0
        for m, e in sol.traversed:
            edge_counts[m][e] += 1.0

    best_nodes = [np.zeros_like(t) for t in state.node_tau]
    best_edges = [np.zeros_like(t) for t in state.edge_tau]
    for m, f in best.selected:
        best_nodes[m][f] = best_fitness
    for m, e in best.traversed:
        best_edges[m][e] = best_fitness

    rho_v, rho_e = cfg.node_decay, cfg.edge_decay
    for m in range(m_count):
        node_share = node_counts[m] / total_nodes if total_nodes else node_counts[m]
        state.node_tau[m] = (1.0 - rho_v) * state.node_tau[m] + rho_v * (
            node_share + best_nodes[m]
        )
        edge_share = edge_counts[m] / total_edges if total_edges else edge_counts[m]
        state.edge_tau[m] = (1.0 - rho_e) * state.edge_tau[m] + rho_e * (
            edge_share + best_edges[m]
        )
    return state


def update_omic_importance(state, solutions, cfg):
    """Shift importance toward omics contributing more selections, renormalized."""
    m_count = len(state.node_tau)
    counts = np.zeros(m_count)
    for sol in solutions:
        for m, _ in sol.selected:
            counts[m] += 1.0
    shares = counts / counts.sum() if counts.sum() else np.full(m_count, 1.0 / m_count)
    p = (1.0 - cfg.omic_decay) * state.omic_importance + cfg.omic_decay * shares
    state.omic_importance = p / p.sum()
    return state


def _construct_solution(agent, start, relevance, state, nets, cfg, rng):
    agent.add(*start)
    while len(agent.solution.selected) < cfg.budget_per_agent:
        prev = agent.current
        q = rng.random()
        if q <= cfg.q0:
            m = prev[0]
            j = greedy_step(agent, m, relevance, state, nets)
            if j is None:
                m = _redraw_omic(agent, state, rng, exclude=prev[0])
                j = greedy_step(agent, m, relevance, state, nets)
        else:
            m, j = probabilistic_step(agent, relevance, state, nets, rng)
        edge = None
        if m == prev[0]:
            edge = nets.edge_between(m, prev[1], j)
        agent.add(m, j, edge)
    return agent.solution


def minmax_normalize(values):
    """Min-max to [0, 1]; constant vectors map to zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


@dataclass
class SelectionResult:
    """Per-omic chosen features plus the final search state."""

    selected: list[np.ndarray]  # per omic, ascending feature indices
    ranking: list[list[tuple[int, float]]]  # per omic, (feature, score) by rank
    state: DesirabilityState
    best_fitness_per_iter: list[float]
    trace: list[list[AgentSolution]] | None = None


def run_selection(ctx, cfg):
    """Run the full multi-agent search and pick the top features per omic.

    The final per-omic ranking score is ``0.5 * minmax(node tau) +
    0.5 * relevance``; each omic contributes ``cfg.select_per_omic``
    features. Deterministic for a fixed ``cfg.seed``.
    """
    cfg.validate()
    nets = ctx.nets
    m_count = len(nets.nets)
    dims = [net.node_count for net in nets.nets]
    for m, d in enumerate(dims):
        if cfg.budget_per_agent > d:
            raise DataError(
                f"budget {cfg.budget_per_agent} exceeds the {d} features of omic {m}"
            )
        if cfg.select_per_omic > d:
            raise DataError(
                f"cannot select {cfg.select_per_omic} features from omic {m} with {d}"
            )

    state = DesirabilityState.initial(nets.nets, cfg.node_init, cfg.edge_init)
    best_per_iter = []
    trace = [] if cfg.record_trace else None
    for t in range(cfg.iterations):
        starts = []
        for m in range(m_count):
            place_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, t, m))
            )
            starts.append(place_rng.permutation(dims[m])[: cfg.agents_per_omic])

        solutions = []
        best = None
        for m in range(m_count):
            for a in range(cfg.agents_per_omic):
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2, t, m, a))
                )
                agent = Agent(nets)
                sol = _construct_solution(
                    agent, (m, int(starts[m][a])), ctx.relevance, state, nets, cfg, rng
                )
                sol.fitness = fitness(sol, ctx)
                solutions.append(sol)
                if best is None or sol.fitness > best.fitness:
                    best = sol
        best_per_iter.append(best.fitness)
        if trace is not None:
            trace.append(solutions)
        state = update_desirability(state, solutions, best, best.fitness, cfg)
        state = update_omic_importance(state, solutions, cfg)
        state.validate()

    selected, ranking = [], []
    for m in range(m_count):
        score = 0.5 * minmax_normalize(state.node_tau[m]) + 0.5 * ctx.relevance[m]
        # Descending score, ties broken by ascending feature index.
        order = np.lexsort((np.arange(dims[m]), -score))
        top = order[: cfg.select_per_omic]
        selected.append(np.sort(top).astype(np.intp))
        ranking.append([(int(f), float(score[f])) for f in top])
    return SelectionResult(
        selected=selected,
        ranking=ranking,
        state=state,
        best_fitness_per_iter=best_per_iter,
        trace=trace,
    )
