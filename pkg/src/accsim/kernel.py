"""Discrete-event kernel.

Events are dispatched in (cycle, priority, insertion sequence) order, which
is a total order, so a simulation is a deterministic function of its inputs.
Idle cycles are skipped entirely.
"""

from __future__ import annotations

from heapq import heappop, heappush

# module dispatch priority within one cycle: memory responses become visible
# to the bus, then DMACs, then the pass controller
PRIO_DRAM = 0
PRIO_BUS = 1
PRIO_DMAC = 2
PRIO_CTRL = 3


class CausalityError(RuntimeError):
    pass


class Engine:
    __slots__ = ("now", "_heap", "_seq", "dispatched")

    def __init__(self):
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.dispatched = 0

    def at(self, cycle: int, priority: int, fn, *args) -> None:
        if cycle < self.now:
            raise CausalityError(f"event at {cycle} scheduled from cycle {self.now}")
        self._seq += 1
        heappush(self._heap, (cycle, priority, self._seq, fn, args))

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: int | None = None) -> int:
        heap = self._heap
        n = 0
        while heap:
            if until is not None and heap[0][0] > until:
                break
            cycle, _, _, fn, args = heappop(heap)
            self.now = cycle
            fn(*args)
            n += 1
        self.dispatched += n
        return self.now
