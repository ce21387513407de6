"""CBR traffic, per-epoch round-robin RB scheduling, and load reporting."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

from .controller import LoadReport
from .errors import MissingDataError


@dataclass
class TrafficFlow:
    """Downlink constant-bitrate flow toward one UE."""

    ue_id: int
    demand_bps: float
    backlog_bytes: float = 0.0
    received_bytes: float = 0.0


def generate_arrivals(flow: TrafficFlow, epoch_duration_s: float) -> float:
    """Accumulate one epoch of CBR demand; returns the new backlog."""
    flow.backlog_bytes += flow.demand_bps * epoch_duration_s / 8.0
    return flow.backlog_bytes


@dataclass
class RoundRobinState:
    """Persistent rotation pointer for one cell; advances one UE per epoch."""

    offset: int = 0


@dataclass
class CellSchedule:
    """Outcome of one epoch of scheduling in one cell or beam."""

    node_id: str
    epoch: int
    granted: Tuple[int, ...]
    assignments: Dict[int, List[int]]    # ue_id -> RB indices
    served_bytes: Dict[int, float]
    used_rb: int


def schedule_epoch(
    node_id: str,
    epoch: int,
    ue_order: Sequence[int],
    flows: Mapping[int, TrafficFlow],
    granted: Sequence[int],
    bytes_per_rb: Callable[[int, int], float],
    rotation: RoundRobinState,
) -> CellSchedule:
    """Deal granted RBs one at a time to backlogged UEs in rotating order.

    The rotation starts at the persistent pointer into `ue_order` and the
    pointer advances by one position per epoch, so saturated UEs receive
    RB counts that differ by at most one over a full rotation cycle.  A UE
    leaves the rotation once its backlog for the epoch is drained; a UE
    whose rate on the offered RB is zero is skipped for that RB.  Bytes
    carried per RB come from `bytes_per_rb(ue_id, rb)`, which folds in the
    UE's spectral efficiency and the RB bandwidth-time product.
    """
    schedule = CellSchedule(node_id, epoch, tuple(granted), {}, {}, 0)
    n = len(ue_order)
    if n == 0 or not granted:
        return schedule
    start = rotation.offset % n
    queue = deque(
        uid
        for uid in list(ue_order[start:]) + list(ue_order[:start])
        if flows[uid].backlog_bytes > 0.0
    )
    for rb in granted:
        served = False
        for _ in range(len(queue)):
            uid = queue[0]
            capacity = bytes_per_rb(uid, rb)
            if capacity <= 0.0:
                queue.rotate(-1)  # cannot use this RB; try the next UE
                continue
            flow = flows[uid]
            take = min(flow.backlog_bytes, capacity)
            flow.backlog_bytes -= take
            flow.received_bytes += take
            schedule.assignments.setdefault(uid, []).append(rb)
            schedule.served_bytes[uid] = schedule.served_bytes.get(uid, 0.0) + take
            schedule.used_rb += 1
            if flow.backlog_bytes <= 0.0:
                queue.popleft()
            else:
                queue.rotate(-1)
            served = True
            break
        if not served and not queue:
            break
    rotation.offset = (rotation.offset + 1) % n
    return schedule


def cell_load(
    schedules: Sequence[CellSchedule],
    cell_id: int,
    group_index: int,
    group_rbs: range,
    period_end_epoch: int,
) -> LoadReport:
    """Fold one period of schedules into a LoadReport for one group.

    used_rb_epochs counts assigned RBs falling inside the group's range,
    available_rb_epochs the granted ones.  An empty period or a period
    with no granted RBs in the group raises MissingDataError.
    """
    if not schedules:
        raise MissingDataError(f"no schedules for cell {cell_id} this period")
    lo, hi = group_rbs.start, group_rbs.stop
    used = 0
    available = 0
    for sched in schedules:
        available += sum(1 for rb in sched.granted if lo <= rb < hi)
        for rbs in sched.assignments.values():
            used += sum(1 for rb in rbs if lo <= rb < hi)
    if available == 0:
        raise MissingDataError(
            f"cell {cell_id} had no granted RBs in group {group_index} this period"
        )
    return LoadReport(cell_id, group_index, used, available, period_end_epoch)
