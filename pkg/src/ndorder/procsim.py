"""Deterministic runtime for groups of message-passing logical processes.

A program is an ordinary callable executed once per rank. Ranks never share
mutable state; all interaction goes through collective ``exchange`` calls
that act as superstep barriers. Because each rank is a pure function of its
inputs, its random stream and the (canonically ordered) messages it
receives, a fixed (seed, process count, program) triple produces identical
results under any scheduling of the ranks. Two schedulers are provided:
``"threads"`` lets all rank threads run freely, ``"sequential"`` steps them
round-robin within each superstep.
"""

from __future__ import annotations

import hashlib
import random
import threading
from dataclasses import dataclass
from typing import Any, Callable, Sequence

__all__ = [
    "Message",
    "Comm",
    "ProcSimError",
    "CollectiveError",
    "run_group",
    "SCHEDULERS",
]

SCHEDULERS = ("threads", "sequential")


class ProcSimError(RuntimeError):
    """Runtime-level failure: deadlock or misuse of the messaging engine."""


class CollectiveError(ProcSimError):
    """A collective call can never complete (mismatched participants)."""


class _Abort(BaseException):
    # internal: unwinds rank threads after another rank failed
    pass


@dataclass(frozen=True)
class Message:
    """One point-to-point message within a group superstep.

    ``src`` and ``dst`` are group-relative ranks, ``tag`` identifies the
    algorithm phase and ``payload`` is treated as opaque by the engine.
    """

    src: int
    dst: int
    tag: Any
    payload: Any


def _stream_seed(seed: int, path: str, rank: int) -> int:
    digest = hashlib.sha256(f"{seed}|{path}|{rank}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class _Group:
    """Engine-side barrier and mailbox state shared by one group's ranks."""

    __slots__ = ("path", "members", "arrived", "delivery", "generation", "waiting")

    def __init__(self, path: str, members: tuple[int, ...]):
        self.path = path
        self.members = members          # engine-global thread ids
        self.arrived: dict[int, list[Message]] = {}   # group rank -> outgoing
        self.delivery: dict[int, list[Message]] = {}  # group rank -> incoming
        self.generation = 0
        self.waiting: set[int] = set()  # group ranks blocked on the barrier


class _Engine:
    def __init__(self, size: int, seed: int, scheduler: str):
        self.size = size
        self.seed = seed
        self.sequential = scheduler == "sequential"
        self.cv = threading.Condition()
        self.groups: dict[str, _Group] = {}
        self.finished: set[int] = set()
        self.blocked: dict[int, str] = {}   # global rank -> group path
        self.failure: BaseException | None = None
        self.turn = 0

    # -- scheduling ------------------------------------------------------

    def _reschedule(self) -> None:
        # lowest-rank thread that is neither blocked nor finished runs next
        for r in range(self.size):
            if r not in self.finished and r not in self.blocked:
                self.turn = r
                break
        self.cv.notify_all()

    def _wait_turn(self, grank: int) -> None:
        # caller holds self.cv
        if self.failure is not None:
            raise _Abort()
        if not self.sequential:
            return
        while self.failure is None and self.turn != grank:
            self.cv.wait()
        if self.failure is not None:
            raise _Abort()

    # -- failure and termination bookkeeping ------------------------------

    def record_failure(self, exc: BaseException) -> None:
        with self.cv:
            if self.failure is None:
                self.failure = exc
            self.cv.notify_all()

    def mark_finished(self, grank: int) -> None:
        with self.cv:
            self.finished.add(grank)
            if self.failure is None:
                for g in self.groups.values():
                    if grank in g.members and g.waiting:
                        rel = g.members.index(grank)
                        if rel not in g.arrived:
                            self.failure = CollectiveError(
                                f"rank {grank} finished while group {g.path!r} "
                                f"ranks {sorted(g.waiting)} wait at its barrier"
                            )
                            break
            if self.failure is None:
                self._check_stall()
            self._reschedule()

    def _check_stall(self) -> None:
        alive = [r for r in range(self.size) if r not in self.finished]
        if not alive or not all(r in self.blocked for r in alive):
            return
        where = ", ".join(f"rank {r} on {self.blocked[r]!r}" for r in alive)
        for path in {self.blocked[r] for r in alive}:
            group = self.groups.get(path)
            if group is not None and any(m in self.finished for m in group.members):
                self.failure = CollectiveError(
                    f"group {path!r} can never complete: a member already finished ({where})"
                )
                return
        self.failure = ProcSimError(
            f"deadlock: every live rank blocks on an incomplete exchange ({where})"
        )

    # -- groups -----------------------------------------------------------

    def group(self, path: str, members: tuple[int, ...]) -> _Group:
        with self.cv:
            g = self.groups.get(path)
            if g is None:
                g = _Group(path, members)
                self.groups[path] = g
            elif g.members != members:
                raise CollectiveError(
                    f"group {path!r} recreated with different members"
                )
            return g

    # -- the superstep ----------------------------------------------------

    def exchange(self, group: _Group, rel_rank: int, outgoing: list[Message]) -> list[Message]:
        grank = group.members[rel_rank]
        with self.cv:
            if self.failure is not None:
                raise _Abort()
            gen = group.generation
            group.arrived[rel_rank] = outgoing
            if len(group.arrived) == len(group.members):
                self._route(group)
                group.generation += 1
                group.waiting.clear()
                for m in group.members:
                    self.blocked.pop(m, None)
                self._reschedule()
            else:
                group.waiting.add(rel_rank)
                self.blocked[grank] = group.path
                self._check_stall()
                self._reschedule()
                while self.failure is None and group.generation == gen:
                    self.cv.wait()
                if self.failure is not None:
                    raise _Abort()
            self._wait_turn(grank)
            return group.delivery.pop(rel_rank)

    @staticmethod
    def _route(group: _Group) -> None:
        delivery: dict[int, list[Message]] = {r: [] for r in range(len(group.members))}
        for src in sorted(group.arrived):
            for msg in group.arrived[src]:
                delivery[msg.dst].append(msg)
        group.arrived.clear()
        group.delivery = delivery


class Comm:
    """Per-rank handle on a process group.

    Exposes the group-relative rank, the group size, a deterministic
    per-rank random stream, and the exchange/split primitives. Groups form
    a tree: ``split`` produces the two halves of this group, ``parent``
    links back up.
    """

    def __init__(self, engine: _Engine, path: str, members: tuple[int, ...],
                 rank: int, parent: "Comm | None" = None, side: int | None = None):
        self._engine = engine
        self.path = path
        self._members = members
        self.rank = rank
        self.parent = parent
        self.side = side
        self.seed = engine.seed
        self.rng = random.Random(_stream_seed(engine.seed, path, rank))
        self._split_count = 0
        self._solo_count = 0

    @property
    def size(self) -> int:
        return len(self._members)

    # -- messaging ---------------------------------------------------------

    def exchange(self, messages: Sequence[Message]) -> list[Message]:
        """Collective superstep: deliver every message to its destination.

        Returns this rank's incoming messages sorted by (source, send
        order). Must be called by every rank of the group.
        """
        out = []
        for m in messages:
            if not 0 <= m.dst < self.size:
                raise ProcSimError(
                    f"destination rank {m.dst} outside group of size {self.size}"
                )
            if m.src != self.rank:
                m = Message(self.rank, m.dst, m.tag, m.payload)
            out.append(m)
        group = self._engine.group(self.path, self._members)
        return self._engine.exchange(group, self.rank, out)

    def send_all(self, items: Sequence[tuple[int, Any, Any]]) -> list[Message]:
        """Exchange built from (dst, tag, payload) tuples."""
        return self.exchange([Message(self.rank, d, t, p) for d, t, p in items])

    # -- group tree --------------------------------------------------------

    def split(self) -> "Comm":
        """Split into first-half / second-half subgroups; returns own half.

        The first subgroup takes ceil(size/2) ranks, the second the rest.
        Collective: every rank must call it, each receives the communicator
        of the half it belongs to, with a seed stream derived from the
        parent's path.
        """
        if self.size < 2:
            raise ProcSimError("cannot split a group of size 1")
        self._split_count += 1
        half = (self.size + 1) // 2
        side = 0 if self.rank < half else 1
        members = self._members[:half] if side == 0 else self._members[half:]
        path = f"{self.path}/{self._split_count}.{side}"
        rank = self.rank if side == 0 else self.rank - half
        return Comm(self._engine, path, members, rank, parent=self, side=side)

    def solo(self) -> "Comm":
        """A singleton group containing only this rank."""
        self._solo_count += 1
        path = f"{self.path}/s{self._solo_count}.{self.rank}"
        return Comm(self._engine, path, (self._members[self.rank],), 0,
                    parent=self, side=None)

    # -- collective sugar (all built on exchange) ---------------------------

    def allgather(self, value: Any, tag: Any = "gather") -> list[Any]:
        inc = self.exchange([Message(self.rank, d, tag, value) for d in range(self.size)])
        return [m.payload for m in inc]

    def gather(self, value: Any, root: int = 0, tag: Any = "gather") -> list[Any] | None:
        inc = self.exchange([Message(self.rank, root, tag, value)])
        if self.rank == root:
            return [m.payload for m in inc]
        return None

    def bcast(self, value: Any, root: int = 0, tag: Any = "bcast") -> Any:
        out = []
        if self.rank == root:
            out = [Message(self.rank, d, tag, value) for d in range(self.size)]
        inc = self.exchange(out)
        return inc[0].payload

    def allreduce_sum(self, value):
        return sum(self.allgather(value, tag="sum"))

    def barrier(self) -> None:
        self.exchange([])


def run_group(size: int, program: Callable[[Comm], Any], *, seed: int = 0,
              scheduler: str = "threads") -> list[Any]:
    """Run ``program`` once per rank and return the per-rank results.

    The result list is identical for both schedulers and across repeated
    runs with the same seed. A rank that raises aborts the whole group and
    the exception is re-raised here.
    """
    if size < 1:
        raise ValueError("process count must be >= 1")
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    engine = _Engine(size, seed, scheduler)
    members = tuple(range(size))
    results: list[Any] = [None] * size

    def worker(rank: int) -> None:
        comm = Comm(engine, "g", members, rank)
        try:
            with engine.cv:
                engine._wait_turn(rank)
            results[rank] = program(comm)
        except _Abort:
            pass
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            engine.record_failure(exc)
        finally:
            engine.mark_finished(rank)

    threads = [threading.Thread(target=worker, args=(r,), name=f"rank-{r}")
               for r in range(size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if engine.failure is not None:
        raise engine.failure
    return results
