"""The m -> r ranking unit: request/result types, backends, and call accounting.

A backend receives ``m`` passages, each tagged with an identifier ``1..m``, and
returns the identifiers ordered from least to most relevant. Winners are read
off the tail of that order.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from listrank.core import Passage, Query

logger = logging.getLogger(__name__)


class UnitError(RuntimeError):
    """A backend failed to produce a result for ``request``."""

    def __init__(self, message: str, request: UnitRequest | None = None, status: int | None = None):
        super().__init__(message)
        self.request = request
        self.status = status


@dataclass(frozen=True)
class UnitRequest:
    query: Query
    passages: tuple[Passage, ...]
    r: int = 1
    allow_duplicates: bool = False

    def __post_init__(self) -> None:
        m = len(self.passages)
        if m < 1:
            raise ValueError("a unit request needs at least one passage")
        if not 1 <= self.r <= m:
            raise ValueError(f"r={self.r} out of range for m={m}")
        if not self.allow_duplicates and len({p.id for p in self.passages}) != m:
            raise ValueError("duplicate passages in window without allow_duplicates")

    @property
    def m(self) -> int:
        return len(self.passages)

    @property
    def slots(self) -> list[tuple[int, Passage]]:
        return [(i, p) for i, p in enumerate(self.passages, start=1)]


@dataclass(frozen=True)
class UnitResult:
    order: tuple[int, ...]
    raw: str = ""
    fallback: bool = False

    def ranked(self) -> list[int]:
        """Identifiers most relevant first."""
        return list(reversed(self.order))

    def winners(self, r: int) -> list[int]:
        return self.ranked()[:r]


class UnitBackend(Protocol):
    def rank(self, request: UnitRequest) -> UnitResult: ...


def identity_order(m: int) -> tuple[int, ...]:
    return tuple(range(1, m + 1))


def is_permutation(order: Sequence[int], m: int) -> bool:
    return len(order) == m and sorted(order) == list(range(1, m + 1))


def parse_unit_output(text: str, m: int) -> list[int] | None:
    """Parse ``"1 2 5 4 3"``-style output; ``None`` unless it is a permutation of 1..m."""
    try:
        tokens = [int(t) for t in text.split()]
    except (ValueError, AttributeError):
        return None
    return tokens if is_permutation(tokens, m) else None


@dataclass
class CallLedger:
    """Exact count of unit invocations, split by tree level and by pass."""

    total: int = 0
    by_level: Counter = field(default_factory=Counter)
    by_pass: Counter = field(default_factory=Counter)
    fallbacks: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, level: int = 0, pass_index: int = 0, fallback: bool = False) -> None:
        with self._lock:
            self.total += 1
            self.by_level[level] += 1
            self.by_pass[pass_index] += 1
            if fallback:
                self.fallbacks += 1

    def merge(self, other: CallLedger) -> None:
        with self._lock:
            self.total += other.total
            self.by_level.update(other.by_level)
            self.by_pass.update(other.by_pass)
            self.fallbacks += other.fallbacks

    def summary(self) -> dict:
        return {
            "total": self.total,
            "by_level": {str(k): v for k, v in sorted(self.by_level.items())},
            "by_pass": {str(k): v for k, v in sorted(self.by_pass.items())},
            "fallbacks": self.fallbacks,
        }


def rank_unit(
    request: UnitRequest,
    backend: UnitBackend,
    ledger: CallLedger | None = None,
    level: int = 0,
    pass_index: int = 0,
) -> UnitResult:
    """Run one unit invocation and account for it.

    A result that is not a permutation of ``1..m`` is replaced by the identity
    order and flagged as a fallback.
    """
    try:
        result = backend.rank(request)
    except UnitError as exc:
        if exc.request is None:
            exc.request = request
        raise
    except Exception as exc:
        raise UnitError(f"unit backend failed: {exc}", request) from exc
    if not is_permutation(result.order, request.m):
        result = UnitResult(identity_order(request.m), result.raw, fallback=True)
    if ledger is not None:
        ledger.record(level, pass_index, result.fallback)
    return result


@dataclass(frozen=True)
class SyntheticOracleConfig:
    base_scores: Mapping[str, float] = field(default_factory=dict)
    noise_sigma: float = 0.0
    position_bonus: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _window_seed(seed: int, qid: str, ids: Sequence[str]) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", seed & 0x7FFFFFFFFFFFFFFF))
    h.update(qid.encode())
    for d in ids:
        h.update(b"\x00")
        h.update(d.encode())
    return int.from_bytes(h.digest(), "little")


class SyntheticOracle:
    """Deterministic stand-in for a trained listwise unit.

    Slot ``j`` scores ``base[p_j] + position_bonus[j] + noise``. The noise is a
    pure function of (seed, qid, window contents), so an unchanged window always
    gets the same answer. Among tied slots the higher identifier counts as more
    relevant.
    """

    def __init__(self, config: SyntheticOracleConfig | None = None, **kwargs):
        self.config = config or SyntheticOracleConfig(**kwargs)

    def slot_scores(self, request: UnitRequest) -> np.ndarray:
        cfg = self.config
        m = request.m
        scores = np.array([float(cfg.base_scores.get(p.id, 0.0)) for p in request.passages])
        if cfg.position_bonus is not None:
            if len(cfg.position_bonus) != m:
                raise ValueError(f"position_bonus has {len(cfg.position_bonus)} entries, window has {m}")
            scores = scores + np.asarray(cfg.position_bonus, dtype=float)
        if cfg.noise_sigma > 0:
            ids = [p.id for p in request.passages]
            rng = np.random.default_rng(_window_seed(cfg.seed, request.query.qid, ids))
            scores = scores + rng.normal(0.0, cfg.noise_sigma, size=m)
        return scores

    def rank(self, request: UnitRequest) -> UnitResult:
        scores = self.slot_scores(request)
        order = tuple(sorted(range(1, request.m + 1), key=lambda i: (scores[i - 1], i)))
        return UnitResult(order, " ".join(map(str, order)))


class CountingStub:
    """Always answers with the identity order; only useful for counting calls."""

    def rank(self, request: UnitRequest) -> UnitResult:
        order = identity_order(request.m)
        return UnitResult(order, " ".join(map(str, order)))


def request_payload(request: UnitRequest, max_chars: int | None = None) -> dict:
    def clip(text: str) -> str:
        return text if max_chars is None else text[:max_chars]

    return {
        "qid": request.query.qid,
        "query": request.query.text,
        "m": request.m,
        "r": request.r,
        "slots": [
            {"identifier": i, "docid": p.id, "text": clip(p.text)} for i, p in request.slots
        ],
    }


def request_from_payload(payload: Mapping) -> UnitRequest:
    slots = sorted(payload["slots"], key=lambda s: int(s["identifier"]))
    passages = tuple(Passage(str(s["docid"]), str(s.get("text", ""))) for s in slots)
    if [int(s["identifier"]) for s in slots] != list(range(1, len(slots) + 1)):
        raise ValueError("slot identifiers must be 1..m")
    if int(payload["m"]) != len(passages):
        raise ValueError("m does not match slot count")
    return UnitRequest(
        Query(str(payload["qid"]), str(payload.get("query", ""))),
        passages,
        r=int(payload.get("r", 1)),
        allow_duplicates=len({p.id for p in passages}) != len(passages),
    )


_RETRY_STATUS = {429, 502, 503, 504}


class RemoteUnit:
    """Client for a unit served over HTTP (see ``listrank.server``)."""

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retries: int = 3,
        max_in_flight: int = 8,
        backoff: float = 0.2,
        max_chars: int | None = None,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.max_chars = max_chars
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._local = threading.local()

    def _session(self) -> requests.Session:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def rank(self, request: UnitRequest) -> UnitResult:
        payload = request_payload(request, self.max_chars)
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._session().post(self.endpoint, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = exc
                logger.debug("unit request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in _RETRY_STATUS and attempt < self.retries:
                continue
            if resp.status_code != 200:
                raise UnitError(f"unit endpoint returned HTTP {resp.status_code}", request, resp.status_code)
            return self._parse(resp, request.m)
        raise UnitError(f"unit endpoint unreachable after {self.retries + 1} attempts: {last_exc}", request)

    @staticmethod
    def _parse(resp: requests.Response, m: int) -> UnitResult:
        raw = resp.text
        try:
            text = resp.json()["order"]
        except (ValueError, KeyError, TypeError):
            logger.warning("malformed unit response %r; using identity order", raw[:80])
            return UnitResult(identity_order(m), raw, fallback=True)
        order = parse_unit_output(text if isinstance(text, str) else "", m)
        if order is None:
            logger.warning("unparseable unit order %r; using identity order", text)
            return UnitResult(identity_order(m), raw, fallback=True)
        return UnitResult(tuple(order), raw)


def remote_rank(
    request: UnitRequest, endpoint: str, timeout: float = 30.0, retries: int = 3
) -> UnitResult:
    return RemoteUnit(endpoint, timeout=timeout, retries=retries).rank(request)


def synthetic_rank(request: UnitRequest, cfg: SyntheticOracleConfig) -> UnitResult:
    return SyntheticOracle(cfg).rank(request)
