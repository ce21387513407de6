"""Independent brute-force reference for the threshold controller.

Re-derives every step from the rule text using explicit per-RB role labels
('T' / 'G' / 'N') instead of range arithmetic: the boundary is moved one
RB at a time while the minimums allow it, the changed set is found by
diffing label maps, and guard timing is tracked per absolute RB index.
Deliberately naive so it cannot share bugs with the production path.
"""

from typing import Dict, List, Optional, Sequence, Tuple


class ReferenceGroup:
    def __init__(self, index: int, start: int, size: int, guard: int, tn_min: int, ntn_min: int):
        self.index = index
        self.start = start
        usable = size - guard
        tn0 = usable // 2
        # initialization verifies the minimum reservations
        while tn0 < tn_min:
            tn0 += 1
        while usable - tn0 < ntn_min:
            tn0 -= 1
        self.labels: List[str] = ["T"] * tn0 + ["G"] * guard + ["N"] * (usable - tn0)

    def counts(self) -> Tuple[int, int, int]:
        return (
            self.labels.count("T"),
            self.labels.count("G"),
            self.labels.count("N"),
        )


class ReferenceController:
    """Label-map twin of SpectrumManager + AllocationState."""

    def __init__(
        self,
        group_layout: Sequence[Tuple[int, int, int, bool]],  # (index, start, size, coordinated)
        lower: float,
        upper: float,
        step: int,
        tn_min: int,
        ntn_min: int,
        guard: int,
        guard_time_epochs: int,
    ):
        self.lower, self.upper, self.step = lower, upper, step
        self.tn_min, self.ntn_min = tn_min, ntn_min
        self.guard_time_epochs = guard_time_epochs
        self.groups: Dict[int, ReferenceGroup] = {}
        self.coordinated: List[int] = []
        for index, start, size, coordinated in group_layout:
            if coordinated:
                self.groups[index] = ReferenceGroup(index, start, size, guard, tn_min, ntn_min)
                self.coordinated.append(index)
        self.coordinated.sort()
        self.version = 0
        self.guard_timed: Dict[int, int] = {}
        self.cursor = 0

    def allocations(self) -> Dict[int, Tuple[int, int, int]]:
        return {gi: grp.counts() for gi, grp in self.groups.items()}

    def step_once(self, load: Optional[float], now: int) -> None:
        if not self.coordinated:
            return
        gi = self.coordinated[self.cursor % len(self.coordinated)]
        self.cursor += 1
        if load is None:
            return
        grp = self.groups[gi]
        tn, guard, ntn = grp.counts()
        if load > self.upper:
            direction, todo = +1, self.step
        elif load < self.lower:
            direction, todo = -1, self.step
        else:
            direction, todo = 0, 0
        moved = 0
        while todo > 0 and direction != 0:
            if direction > 0 and ntn - (moved + 1) < self.ntn_min:
                break
            if direction < 0 and tn - (moved + 1) < self.tn_min:
                break
            moved += 1
            todo -= 1
        delta = moved * direction
        if delta == 0:
            return
        old_labels = list(grp.labels)
        new_tn = tn + delta
        grp.labels = ["T"] * new_tn + ["G"] * guard + ["N"] * (len(grp.labels) - new_tn - guard)
        expiry = now + self.guard_time_epochs
        self.guard_timed = {rb: e for rb, e in self.guard_timed.items() if e > now}
        for offset, (a, b) in enumerate(zip(old_labels, grp.labels)):
            if a != b:
                rb = grp.start + offset
                self.guard_timed[rb] = max(expiry, self.guard_timed.get(rb, expiry))
        self.version += 1
