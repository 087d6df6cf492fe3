"""m-ary tournament sort over a listwise ranking unit, with output caching.

The tree is laid out once from ``n``: leaves hold the candidates in first-stage
order in contiguous windows of ``m``; each evaluated node forwards its ``r``
best live passages into the next level's slot sequence, and that sequence is
cut into windows of ``m`` again until a single root remains.

Windows are always filled up to ``m``. Padding passages and the passages
dropped into a leaf after an extraction are *fillers*: they are shown to the
unit but can never advance, so every live candidate sits in exactly one leaf
slot and nothing already emitted can resurface.

With caching, extracting the root only invalidates nodes whose inputs changed.
Surviving winners keep their output slot, so under a consistent unit exactly
one node per level is recomputed per extraction.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

from listrank.core import CandidateList, Passage, Ranking
from listrank.unit import CallLedger, UnitBackend, UnitRequest, rank_unit

logger = logging.getLogger(__name__)

Leftover = Literal["pad", "carry"]

# ledger level used for the single-call small-list ordering
EDGE_LEVEL = -1


class Exhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class ReplacementPolicy:
    base_offset: int = 21
    wrap: bool = True

    def __post_init__(self) -> None:
        if self.base_offset < 1:
            raise ValueError("base_offset must be >= 1")


@dataclass(frozen=True)
class TournamentConfig:
    """Tree shape and extraction mode.

    ``leftover="pad"`` pads every partial window up to ``m``; ``"carry"`` lets a
    trailing window with at most ``r`` entries advance without a unit call.
    ``batch=True`` keeps ``r`` winners at the root and emits all of them per
    round instead of one.
    """

    m: int = 5
    r: int = 1
    leftover: Leftover = "pad"
    caching: bool = True
    batch: bool = False
    policy: ReplacementPolicy = field(default_factory=ReplacementPolicy)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if not 1 <= self.r < self.m:
            raise ValueError("r must satisfy 1 <= r < m")
        if self.leftover not in ("pad", "carry"):
            raise ValueError(f"unknown leftover rule {self.leftover!r}")

    @property
    def root_keep(self) -> int:
        return self.r if self.batch else 1


# -- layout ------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSpec:
    level: int
    start: int  # input slot range within the level
    stop: int
    keep: int  # output slots
    evaluated: bool = True  # False: entries pass through untouched


def plan_levels(n: int, m: int, r: int, leftover: Leftover = "pad", root_keep: int = 1) -> list[list[NodeSpec]]:
    """Lay out the tree for ``n > m`` leaves; the last level is the root."""
    if n <= m:
        return [[NodeSpec(0, 0, n, min(root_keep, n))]]
    levels: list[list[NodeSpec]] = []
    x = n
    while x > m:
        lvl = len(levels)
        full, rem = divmod(x, m)
        carry = leftover == "carry" and 0 < rem <= r
        keep = r
        if not carry and -(-x // m) * r >= x:
            # padding cannot shrink this level (e.g. m=3, r=2, x=4); then 0 < rem <= r
            if root_keep > 1:
                carry = True  # every level must keep r for a multi-winner root
            else:
                keep = max(1, (x - 1) // -(-x // m))
        n_eval = full + (1 if rem and not carry else 0)
        nodes = [NodeSpec(lvl, i * m, min((i + 1) * m, x), keep) for i in range(n_eval)]
        if carry:
            nodes.append(NodeSpec(lvl, full * m, x, rem, evaluated=False))
        levels.append(nodes)
        x = sum(nd.keep for nd in nodes)
    levels.append([NodeSpec(len(levels), 0, x, root_keep)])
    return levels


def _level_width(nodes: Sequence[NodeSpec]) -> int:
    return sum(nd.keep for nd in nodes)


def path_cost_range(levels: list[list[NodeSpec]]) -> tuple[int, int]:
    """Fewest and most unit calls on any leaf-to-root path."""
    below: list[tuple[int, int]] = [(0, 0)] * _level_width(levels[-1])
    for nodes in reversed(levels):
        width = nodes[-1].stop
        here: list[tuple[int, int]] = [(0, 0)] * width
        offset = 0
        for nd in nodes:
            outs = below[offset : offset + nd.keep]
            lo = min(o[0] for o in outs) + nd.evaluated
            hi = max(o[1] for o in outs) + nd.evaluated
            if not nd.evaluated:
                # pass-through: entry j keeps output slot j
                for j, s in enumerate(range(nd.start, nd.stop)):
                    here[s] = outs[j]
            else:
                for s in range(nd.start, nd.stop):
                    here[s] = (lo, hi)
            offset += nd.keep
        below = here
    return min(c[0] for c in below), max(c[1] for c in below)


# -- tree --------------------------------------------------------------------


@dataclass
class _NodeState:
    spec: NodeSpec
    window: tuple[int, ...] = ()  # candidate indices shown to the unit
    winners: list[int] = field(default_factory=list)  # live, most relevant first
    out: list[int | None] = field(default_factory=list)


class TournamentTree:
    """Cached tournament over one candidate list.

    ``exclude_pool`` holds passage ids already emitted; ``levels`` the node
    layout (leaves first, root last).
    """

    def __init__(self, cl: CandidateList, config: TournamentConfig, unit: UnitBackend, ledger: CallLedger | None = None):
        if cl.n <= config.m:
            raise ValueError("lists with n <= m are ordered by a single unit call, not a tree")
        self.cl = cl
        self.config = config
        self.unit = unit
        self.ledger = ledger if ledger is not None else CallLedger()
        self.initial_order: list[str] = cl.ids
        self.levels = plan_levels(cl.n, config.m, config.r, config.leftover, config.root_keep)
        self.exclude_pool: set[str] = set()
        self.excluded_idx: set[int] = set()
        # leaf slot contents: candidate index, and whether it is still live there
        self.leaf_cand: list[int] = list(range(cl.n))
        self.leaf_live: list[bool] = [True] * cl.n
        self.leaf_of: dict[int, int] = {i: i for i in range(cl.n)}
        self.nodes = [[_NodeState(nd, out=[None] * nd.keep) for nd in lvl] for lvl in self.levels]
        self._parent_of = [self._slot_owner(self.levels[i + 1]) for i in range(len(self.levels) - 1)]
        self._leaf_owner = self._slot_owner(self.levels[0])
        self._dirty: list[set[int]] = [set(range(len(lvl))) for lvl in self.levels]
        self.pass_index = 0

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def r(self) -> int:
        return self.config.r

    @property
    def root(self) -> _NodeState:
        return self.nodes[-1][0]

    @staticmethod
    def _slot_owner(nodes: Sequence[NodeSpec]) -> list[int]:
        owner = [0] * nodes[-1].stop
        for i, nd in enumerate(nodes):
            for s in range(nd.start, nd.stop):
                owner[s] = i
        return owner

    def live_remaining(self) -> int:
        return self.cl.n - len(self.excluded_idx)

    # windows

    def pad_group(self, window: Sequence[int]) -> list[int]:
        """Fill ``window`` (candidate indices) up to ``m`` entries.

        Scans the first-stage order from the top, skipping emitted passages and
        ones already in the window. If that runs dry, duplicates are allowed.
        """
        out = list(window)
        present = set(out)
        for i in range(self.cl.n):
            if len(out) >= self.m:
                return out
            if i in self.excluded_idx or i in present:
                continue
            out.append(i)
            present.add(i)
        pool = [i for i in range(self.cl.n) if i not in self.excluded_idx] or list(window) or [0]
        j = 0
        while len(out) < self.m:
            out.append(pool[j % len(pool)])
            j += 1
        return out

    def _inputs(self, level: int) -> list[int | None]:
        if level == 0:
            return [c if live else None for c, live in zip(self.leaf_cand, self.leaf_live)]
        return [c for st in self.nodes[level - 1] for c in st.out]

    def _evaluate(self, level: int, idx: int, inputs: Sequence[int | None]) -> tuple[list[int], list[int]]:
        st = self.nodes[level][idx]
        spec = st.spec
        if level == 0:
            shown = self.leaf_cand[spec.start : spec.stop]
            live = [c if self.leaf_live[s] else None for s, c in zip(range(spec.start, spec.stop), shown)]
        else:
            live = [c for c in inputs[spec.start : spec.stop] if c is not None]
            shown = live
        window = self.pad_group(shown)
        live = list(live) + [None] * (len(window) - len(live))
        passages = tuple(self.cl.candidates[c] for c in window)
        request = UnitRequest(
            self.cl.query,
            passages,
            r=min(spec.keep, len(window)),
            allow_duplicates=len(set(window)) != len(window),
        )
        result = rank_unit(request, self.unit, self.ledger, level=level, pass_index=self.pass_index)
        winners: list[int] = []
        for ident in result.ranked():
            c = live[ident - 1]
            if c is not None and c not in winners:
                winners.append(c)
                if len(winners) == spec.keep:
                    break
        return window, winners

    def _assign(self, st: _NodeState, winners: Sequence[int]) -> set[int]:
        """Place winners into output slots, keeping survivors where they were."""
        new = set(winners)
        out: list[int | None] = [c if c in new else None for c in st.out]
        placed = {c for c in out if c is not None}
        fresh = iter(c for c in winners if c not in placed)
        # slots just vacated first, so one departure changes one slot
        vacated = [i for i, c in enumerate(out) if c is None and st.out[i] is not None]
        empty = [i for i, c in enumerate(out) if c is None and st.out[i] is None]
        for i in vacated + empty:
            out[i] = next(fresh, None)
        changed = {i for i, (a, b) in enumerate(zip(st.out, out)) if a != b}
        st.out = out
        return changed

    def recompute(self, executor: Executor | None = None) -> int:
        """Re-evaluate every dirty node bottom-up; returns the unit calls made."""
        calls = 0
        for level, nodes in enumerate(self.nodes):
            dirty = sorted(self._dirty[level])
            self._dirty[level] = set()
            if not dirty:
                continue
            inputs = self._inputs(level)
            todo = [i for i in dirty if nodes[i].spec.evaluated]
            if executor is not None and len(todo) > 1:
                results = list(executor.map(lambda i: self._evaluate(level, i, inputs), todo))
            else:
                results = [self._evaluate(level, i, inputs) for i in todo]
            calls += len(todo)
            evaluated = dict(zip(todo, results))
            offset = [0]
            for st in nodes:
                offset.append(offset[-1] + st.spec.keep)
            for i in dirty:
                st = nodes[i]
                if st.spec.evaluated:
                    st.window, st.winners = evaluated[i]
                    changed = self._assign(st, st.winners)
                else:
                    new = list(inputs[st.spec.start : st.spec.stop])
                    changed = {j for j in range(st.spec.keep) if st.out[j] != new[j]}
                    st.out = new
                    st.winners = [c for c in new if c is not None]
                    st.window = tuple(st.winners)
                self._mark_parents(level, offset[i], changed)
        return calls

    def _mark_parents(self, level: int, base: int, changed: set[int]) -> None:
        if level + 1 >= len(self.nodes):
            return
        owner = self._parent_of[level]
        for j in changed:
            self._dirty[level + 1].add(owner[base + j])

    def invalidate_all(self) -> None:
        self._dirty = [set(range(len(lvl))) for lvl in self.levels]

    # extraction

    def pop_top(self) -> str:
        """Emit the root winner and add it to the exclude pool."""
        root = self.root
        if not root.winners:
            raise Exhausted("exhausted")
        c = root.winners[0]
        self._exclude(c)
        return self.initial_order[c]

    def pop_batch(self, limit: int) -> list[str]:
        taken = self.root.winners[:limit]
        if not taken:
            raise Exhausted("exhausted")
        for c in taken:
            self._exclude(c)
        return [self.initial_order[c] for c in taken]

    def _exclude(self, c: int) -> None:
        self.exclude_pool.add(self.initial_order[c])
        self.excluded_idx.add(c)

    def replace(self, extracted: str) -> int:
        """Refill the extracted passage's leaf slot; returns the filler's candidate index."""
        c = self.initial_order.index(extracted)
        if c not in self.excluded_idx:
            raise ValueError(f"{extracted} has not been extracted")
        slot = self.leaf_of.pop(c)
        spec = self.levels[0][self._leaf_owner[slot]]
        window = {self.leaf_cand[s] for s in range(spec.start, spec.stop) if s != slot}
        n = self.cl.n
        policy = self.config.policy
        j = c + policy.base_offset
        filler = None
        for step in range(n):
            cand = j + step
            if cand >= n:
                if not policy.wrap:
                    break
                cand %= n
            if cand not in self.excluded_idx and cand not in window:
                filler = cand
                break
        if filler is None:
            # nothing legal left: reuse a passage, duplicates allowed
            pool = [i for i in range(n) if i not in self.excluded_idx]
            filler = pool[0] if pool else c
        self.leaf_cand[slot] = filler
        self.leaf_live[slot] = False
        self._dirty[0].add(self._leaf_owner[slot])
        return filler

    def replace_and_recompute(self, extracted: str, executor: Executor | None = None) -> int:
        self.replace(extracted)
        if not self.config.caching:
            self.invalidate_all()
        return self.recompute(executor)

    def remaining_in_order(self) -> list[int]:
        return [i for i in range(self.cl.n) if i not in self.excluded_idx]



def build_tree(
    cl: CandidateList,
    m: int,
    r: int,
    unit: UnitBackend,
    ledger: CallLedger | None = None,
    config: TournamentConfig | None = None,
    executor: Executor | None = None,
) -> TournamentTree:
    """Construct and fully evaluate the tournament tree for ``cl``."""
    config = config or TournamentConfig(m=m, r=r)
    tree = TournamentTree(cl, config, unit, ledger)
    tree.recompute(executor)
    return tree


def pop_top(tree: TournamentTree) -> str:
    return tree.pop_top()


def replace_and_recompute(tree: TournamentTree, extracted: str, unit: UnitBackend | None = None) -> int:
    if unit is not None:
        tree.unit = unit
    return tree.replace_and_recompute(extracted)


def order_small(
    cl: CandidateList,
    indices: Sequence[int],
    m: int,
    unit: UnitBackend,
    ledger: CallLedger | None,
    pass_index: int = 0,
) -> list[int]:
    """Order fewer than ``m`` passages with one unit call, duplicating to fill the window."""
    indices = list(indices)
    window = [indices[i % len(indices)] for i in range(max(m, len(indices)))]
    request = UnitRequest(
        cl.query,
        tuple(cl.candidates[c] for c in window),
        r=min(len(indices), len(window)),
        allow_duplicates=len(window) != len(set(window)),
    )
    result = rank_unit(request, unit, ledger, level=EDGE_LEVEL, pass_index=pass_index)
    seen: list[int] = []
    for ident in result.ranked():
        c = window[ident - 1]
        if c not in seen:
            seen.append(c)
    return seen


def rerank_topk(
    cl: CandidateList,
    k: int,
    unit: UnitBackend,
    config: TournamentConfig | None = None,
    ledger: CallLedger | None = None,
    **kwargs,
) -> Ranking:
    """Rank the top ``k`` of ``cl``; the rest keep their first-stage order."""
    config = config or TournamentConfig(**kwargs)
    ledger = ledger if ledger is not None else CallLedger()
    n = cl.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for n={n}")
    if n <= config.m:
        order = order_small(cl, range(n), config.m, unit, ledger)
        return Ranking.from_ids(cl.query, [cl.candidates[c].id for c in order])

    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        tree = TournamentTree(cl, config, unit, ledger)
        tree.recompute(executor)
        emitted: list[str] = []
        while len(emitted) < k:
            remaining = n - len(emitted)
            if remaining < config.m:
                tree.pass_index = len(emitted)
                tail = order_small(cl, tree.remaining_in_order(), config.m, unit, ledger, tree.pass_index)
                emitted.extend(cl.candidates[c].id for c in tail)
                break
            if emitted:
                tree.pass_index += 1
                for docid in last:
                    tree.replace(docid)
                if not config.caching:
                    tree.invalidate_all()
                tree.recompute(executor)
            if config.batch:
                last = tree.pop_batch(k - len(emitted))
            else:
                last = [tree.pop_top()]
            emitted.extend(last)
    finally:
        if executor is not None:
            executor.shutdown()
    done = set(emitted)
    rest = [p.id for p in cl.candidates if p.id not in done]
    return Ranking.from_ids(cl.query, emitted + rest)


def predict_tournament_calls(
    n: int,
    m: int,
    r: int,
    k: int,
    leftover: Leftover = "pad",
    caching: bool = True,
    batch: bool = False,
) -> int:
    """Unit calls :func:`rerank_topk` makes under a consistent unit."""
    if not 1 <= k <= n:
        raise ValueError("k out of range")
    if n <= m:
        return 1
    root_keep = r if batch else 1
    levels = plan_levels(n, m, r, leftover, root_keep)
    build = sum(nd.evaluated for lvl in levels for nd in lvl)
    # the tree serves rounds while at least m passages are left; then one call orders the rest
    rounds, emitted = 0, 0
    while emitted < k and n - emitted >= m:
        rounds += 1
        emitted += min(root_keep, k - emitted)
    tail = 1 if emitted < k else 0
    if rounds <= 1 or not caching:
        return build * rounds + tail
    if batch:
        raise ValueError("cached batch extraction cost depends on which leaves are hit")
    lo, hi = path_cost_range(levels)
    if lo != hi:
        raise ValueError("leaf-to-root path lengths differ; cost depends on extraction order")
    return build + (rounds - 1) * lo + tail


def tree_depth(n: int, m: int, r: int, leftover: Leftover = "pad") -> int:
    return len(plan_levels(n, m, r, leftover))


def level_call_counts(n: int, m: int, r: int, leftover: Leftover = "pad", batch: bool = False) -> list[int]:
    levels = plan_levels(n, m, r, leftover, r if batch else 1)
    return [sum(nd.evaluated for nd in lvl) for lvl in levels]


def complexity_bound(n: int, k: int, m: int) -> float:
    """``n + k * log_m(n)``, the asymptotic cost scale."""
    return n + k * math.log(n, m)
