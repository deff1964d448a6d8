"""Best-first tree search: classic A* and Iterative Diving Search.

Both searches work on an abstract node type through three callbacks:
expand(node) -> sequence of children, is_goal(node) -> bool, and
f(node) -> float. The search space is a tree, so no visited set is
kept.

The diving search expands the minimum-f child of every non-leaf
immediately and only offers the remaining children to a bounded
min-priority queue. On reaching a goal or a childless node it restarts
from the best queued node. The queue holds at most queue_capacity
entries; when full, the worst entry of the old contents plus the new
candidate is discarded, so memory stays bounded at the price of a
non-exhaustive search.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, Iterable, Sequence, TypeVar

Node = TypeVar("Node")

#: Rough per-node memory footprint used for the node-storage estimate.
NODE_SIZE_BYTES = 200


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by both strategies.

    queue_capacity and trials may be None for "unbounded". node_budget
    caps expansions, max_nodes caps node creations (the memory proxy).
    """

    strategy: str = "ids"
    queue_capacity: int | None = 10_000
    trials: int | None = 10
    node_budget: int = 10_000_000
    max_nodes: int = 100_000_000

    def __post_init__(self) -> None:
        if self.strategy not in ("astar", "ids"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ValueError("queue_capacity must be at least 1")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.node_budget < 1 or self.max_nodes < 1:
            raise ValueError("budgets must be at least 1")


@dataclass
class SearchOutcome(Generic[Node]):
    best_goal: Node | None = None
    best_f: float = float("inf")
    goals_found: int = 0
    nodes_expanded: int = 0
    nodes_created: int = 1  # includes the root
    peak_queue_size: int = 0
    budget_exhausted: bool = False

    @property
    def node_storage_bytes(self) -> int:
        return self.nodes_created * NODE_SIZE_BYTES


class BoundedQueue(Generic[Node]):
    """Min-priority queue with optional capacity and worst-entry eviction.

    Ordering is (f, shallower-last, insertion order): lower f first,
    deeper nodes preferred on ties. Uses paired heaps with lazy
    invalidation so both pop-min and evict-max stay logarithmic.
    """

    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self._min: list[tuple[float, int, int, Node]] = []
        self._max: list[tuple[float, int, int, Node]] = []
        self._alive: set[int] = set()
        self._counter = itertools.count()
        self.peak = 0

    def __len__(self) -> int:
        return len(self._alive)

    def offer(self, f: float, depth: int, node: Node) -> None:
        """Insert unless the queue is full and this entry is the worst."""
        seq = next(self._counter)
        entry = (f, -depth, seq, node)
        if self.capacity is not None and len(self._alive) >= self.capacity:
            worst = self._peek_max()
            if worst is None or entry[:3] >= worst[:3]:
                return  # the newcomer is the worst; discard it
            self._alive.discard(worst[2])
        self._alive.add(seq)
        heapq.heappush(self._min, entry)
        heapq.heappush(self._max, (-f, depth, -seq, node))
        self.peak = max(self.peak, len(self._alive))

    def pop_min(self) -> Node | None:
        while self._min:
            f, negdepth, seq, node = heapq.heappop(self._min)
            if seq in self._alive:
                self._alive.discard(seq)
                return node
        return None

    def _peek_max(self) -> tuple[float, int, int, Node] | None:
        while self._max:
            negf, depth, negseq, node = self._max[0]
            if -negseq in self._alive:
                return (-negf, -depth, -negseq, node)
            heapq.heappop(self._max)
        return None


def astar(
    root: Node,
    expand: Callable[[Node], Sequence[Node]],
    f: Callable[[Node], float],
    is_goal: Callable[[Node], bool],
    config: SearchConfig | None = None,
) -> SearchOutcome[Node]:
    """Classic A*: returns the first goal popped from the open queue.

    Exhausting node_budget or max_nodes yields a best-effort outcome
    with best_goal absent and budget_exhausted set.
    """
    config = config or SearchConfig(strategy="astar")
    outcome: SearchOutcome[Node] = SearchOutcome()
    counter = itertools.count()
    heap: list[tuple[float, int, Node]] = [(f(root), next(counter), root)]
    while heap:
        outcome.peak_queue_size = max(outcome.peak_queue_size, len(heap))
        fval, _, node = heapq.heappop(heap)
        if is_goal(node):
            outcome.best_goal = node
            outcome.best_f = fval
            outcome.goals_found = 1
            return outcome
        if outcome.nodes_expanded >= config.node_budget:
            outcome.budget_exhausted = True
            return outcome
        children = expand(node)
        outcome.nodes_expanded += 1
        outcome.nodes_created += len(children)
        if outcome.nodes_created > config.max_nodes:
            outcome.budget_exhausted = True
            return outcome
        for child in children:
            heapq.heappush(heap, (f(child), next(counter), child))
    return outcome


def ids(
    root: Node,
    expand: Callable[[Node], Sequence[Node]],
    f: Callable[[Node], float],
    is_goal: Callable[[Node], bool],
    config: SearchConfig | None = None,
) -> SearchOutcome[Node]:
    """Iterative diving search.

    Dives along minimum-f children, parking the other children in the
    bounded queue, and restarts from the best parked node after every
    goal or leaf until the trial budget or the queue runs out. Children
    are offered to the queue before budget checks apply to the next
    expansion.
    """
    config = config or SearchConfig(strategy="ids")
    outcome: SearchOutcome[Node] = SearchOutcome()
    queue: BoundedQueue[Node] = BoundedQueue(config.queue_capacity)
    trials = config.trials
    depth_of: Callable[[Node], int] = lambda n: getattr(n, "depth", 0)

    current: Node | None = root
    while current is not None:
        if is_goal(current):
            fval = f(current)
            outcome.goals_found += 1
            if outcome.best_goal is None or fval < outcome.best_f:
                outcome.best_goal = current
                outcome.best_f = fval
            if trials is not None:
                trials -= 1
                if trials <= 0:
                    break
            current = queue.pop_min()
            continue
        if outcome.nodes_expanded >= config.node_budget or outcome.nodes_created > config.max_nodes:
            outcome.budget_exhausted = True
            break
        children = expand(current)
        outcome.nodes_expanded += 1
        outcome.nodes_created += len(children)
        if not children:
            current = queue.pop_min()
            continue
        ranked = sorted(
            ((f(child), i, child) for i, child in enumerate(children)),
            key=lambda t: t[:2],
        )
        current = ranked[0][2]
        for fval, _, child in ranked[1:]:
            queue.offer(fval, depth_of(child), child)

    outcome.peak_queue_size = queue.peak
    return outcome


def run_search(
    root: Node,
    expand: Callable[[Node], Sequence[Node]],
    f: Callable[[Node], float],
    is_goal: Callable[[Node], bool],
    config: SearchConfig,
) -> SearchOutcome[Node]:
    """Dispatch on config.strategy."""
    fn = astar if config.strategy == "astar" else ids
    return fn(root, expand, f, is_goal, config)
