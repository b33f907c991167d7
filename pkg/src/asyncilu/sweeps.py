"""Sweep executor for asynchronous fixed-point iterations.

Two execution modes over an indexed work set:

* :func:`run_parallel` runs real shared-memory sweeps.  Work items are
  grouped into chunks of consecutive indices, idle workers claim the next
  chunk from a shared counter, and there is no synchronization between
  sweeps: each worker advances its own sweep counter, so different workers
  may be in different sweeps at the same time.

* :func:`run_replay` is a deterministic single-threaded interpreter of the
  formal asynchronous iteration: an explicit schedule says which item is
  updated at each step and how stale every read is.  It exists so the
  convergence theory can be tested exactly.
"""

import itertools
import threading
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSchedule


@dataclass(frozen=True)
class SweepConfig:
    """Sweep count, worker count and chunk size (work items per chunk)."""

    n_sweeps: int
    n_workers: int = 1
    chunk_size: int = 384

    def __post_init__(self):
        if self.n_sweeps < 1 or self.n_workers < 1 or self.chunk_size < 1:
            raise ValueError("n_sweeps, n_workers and chunk_size must be >= 1")


class WorkSet:
    """An indexed set of fixed-point update items over shared state.

    Parallel mode calls :meth:`run_range`, which must process items
    ``[start, stop)`` in ascending order against the live shared state.
    Each item may write only its own slots, and every written value must be
    fully computed in a local accumulator before the single write; partial
    sums must never be visible to other items.

    Replay mode views the state as ``n_slots`` scalar slots and calls
    :meth:`apply_item` with a ``read`` function that serves historical
    values according to the schedule.
    """

    n_items = 0
    n_slots = 0

    def run_range(self, state, start, stop):
        # Default: drive items through the slot-level facet with live reads.
        for item in range(start, stop):
            slots, values = self.apply_item(item, lambda a: self.read_slot(state, a))
            for s, v in zip(slots, values):
                self.write_slot(state, s, v)

    def apply_item(self, item, read):
        raise NotImplementedError

    def read_slot(self, state, slot):
        raise NotImplementedError

    def write_slot(self, state, slot, value):
        raise NotImplementedError

    def slots_vector(self, state):
        return np.array([self.read_slot(state, a) for a in range(self.n_slots)])

    def write_vector(self, state, x):
        for a in range(self.n_slots):
            self.write_slot(state, a, x[a])


class ArrayWorkSet(WorkSet):
    """Work set over a flat float array where item i owns slot i.

    ``update(item, read) -> value`` computes the new value of slot ``item``
    from reads of other slots.
    """

    def __init__(self, n_items, update):
        self.n_items = n_items
        self.n_slots = n_items
        self._update = update

    def apply_item(self, item, read):
        return [item], [self._update(item, read)]

    def read_slot(self, state, slot):
        return state[slot]

    def write_slot(self, state, slot, value):
        state[slot] = value

    def slots_vector(self, state):
        return np.asarray(state, dtype=np.float64).copy()

    def write_vector(self, state, x):
        state[:] = x


def run_parallel(work, cfg, state):
    """Run ``cfg.n_sweeps`` asynchronous sweeps of ``work`` over ``state``.

    Each item is updated exactly ``n_sweeps`` times.  Chunks of
    ``cfg.chunk_size`` consecutive items are claimed in ascending order
    from one shared counter per sweep; there is no barrier between sweeps.
    With one worker this is exactly sequential in-order execution and is
    bitwise deterministic.  Item-level failures are collected and the first
    one is re-raised after the parallel region completes.
    """
    if work.n_items == 0:
        raise ValueError("work set is empty")
    n_chunks = -(-work.n_items // cfg.chunk_size)
    counters = [itertools.count() for _ in range(cfg.n_sweeps)]
    failures = []

    def drive():
        for counter in counters:
            while True:
                c = next(counter)
                if c >= n_chunks:
                    break
                start = c * cfg.chunk_size
                stop = min(start + cfg.chunk_size, work.n_items)
                try:
                    work.run_range(state, start, stop)
                except Exception as exc:  # propagate after the region ends
                    failures.append(exc)

    if cfg.n_workers == 1:
        drive()
    else:
        threads = [threading.Thread(target=drive) for _ in range(cfg.n_workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if failures:
        raise failures[0]
    return state


@dataclass(frozen=True)
class ScheduleStep:
    """One replay step: update ``item`` reading each slot ``shifts`` steps back.

    ``shifts`` is either a single int applied to every slot or an array of
    per-slot shifts.
    """

    item: int
    shifts: "int | np.ndarray" = 0


@dataclass
class Schedule:
    """Explicit shift/update functions for deterministic replay.

    ``max_shift`` declares the history depth bound: at step t, every shift
    must satisfy 0 <= s <= min(t, max_shift).  When ``round_length`` is
    set, every item must appear at least once in each full round; this is
    the finite-replay form of the requirement that no item ever stops
    being updated.
    """

    steps: list
    max_shift: int = 8
    round_length: int = None

    def check_coverage(self, n_items):
        if self.round_length is None:
            return
        k = self.round_length
        for r in range(len(self.steps) // k):
            seen = {s.item for s in self.steps[r * k:(r + 1) * k]}
            if len(seen) < n_items:
                raise InvalidSchedule(
                    f"round {r} does not update every item at least once")


def run_replay(work, schedule, state):
    """Interpret ``schedule`` step by step over the slots of ``work``.

    Step t updates item u(t) using, for each slot a, the value of a as of
    step t - s_a(t); all other slots keep their values.  Raises
    :class:`InvalidSchedule` when a shift violates its bound.
    """
    n_slots = work.n_slots
    s_hat = schedule.max_shift
    if s_hat < 0:
        raise InvalidSchedule("max_shift must be >= 0")
    schedule.check_coverage(work.n_items)
    depth = s_hat + 1
    x = np.asarray(work.slots_vector(state), dtype=np.float64)
    ring = np.tile(x, (depth, 1))  # ring[k % depth] holds the state after step k-1
    for t, step in enumerate(schedule.steps):
        if not 0 <= step.item < work.n_items:
            raise InvalidSchedule(f"step {t} updates unknown item {step.item}")
        bound = min(t, s_hat)
        shifts = step.shifts
        if np.isscalar(shifts):
            if not 0 <= shifts <= bound:
                raise InvalidSchedule(
                    f"step {t}: shift {shifts} outside [0, {bound}]")
            src = ring[(t - shifts) % depth]
            read = lambda a: src[a]
        else:
            shifts = np.asarray(shifts)
            if shifts.shape != (n_slots,):
                raise InvalidSchedule(f"step {t}: shifts must have length {n_slots}")
            if shifts.min() < 0 or shifts.max() > bound:
                raise InvalidSchedule(
                    f"step {t}: shifts outside [0, {bound}]")
            read = lambda a: ring[(t - shifts[a]) % depth][a]
        slots, values = work.apply_item(step.item, read)
        new = ring[t % depth].copy()
        new[list(slots)] = values
        ring[(t + 1) % depth] = new
    final = ring[len(schedule.steps) % depth]
    work.write_vector(state, final)
    return state


# -- schedule builders -------------------------------------------------------

def in_order_rounds(n_items, n_rounds, shift=0, max_shift=None):
    """Rounds updating items 0..n-1 in order with one constant shift.

    ``shift=0`` gives Gauss-Seidel (always read the newest values).
    Shifts are clipped to the step index at the start of the replay.
    """
    if max_shift is None:
        max_shift = max(shift, 8)
    steps = []
    t = 0
    for _ in range(n_rounds):
        for i in range(n_items):
            steps.append(ScheduleStep(i, min(shift, t)))
            t += 1
    return Schedule(steps, max_shift=max_shift, round_length=n_items)


def jacobi_rounds(n_items, n_rounds, orders=None):
    """Rounds where every read is held at the state of the round start.

    This is the synchronized Jacobi iteration.  ``orders`` optionally gives
    the update order of each round; coverage is validated by the replay.
    """
    steps = []
    for r in range(n_rounds):
        order = range(n_items) if orders is None else orders[r]
        for p, i in enumerate(order):
            steps.append(ScheduleStep(int(i), p))
    return Schedule(steps, max_shift=n_items, round_length=n_items)


def random_schedule(n_items, n_slots, n_rounds, max_shift, rng):
    """Random valid schedule: random per-round orders and random per-slot shifts."""
    steps = []
    t = 0
    for _ in range(n_rounds):
        for i in rng.permutation(n_items):
            bound = min(t, max_shift)
            shifts = rng.integers(0, bound + 1, size=n_slots)
            steps.append(ScheduleStep(int(i), shifts))
            t += 1
    return Schedule(steps, max_shift=max_shift, round_length=n_items)
