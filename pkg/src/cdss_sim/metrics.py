"""Run metrics: allocation timelines, byte accounting, CDFs, report files.

One MetricsStore accumulates a single run and is finalized into a set of
delimited text tables plus one structured JSON summary.  File names follow
<case>_<seed>_<artifact>.csv / <case>_<seed>_summary.json so campaign
output directories stay flat and greppable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .errors import InvariantError


@dataclass(frozen=True)
class CdfSeries:
    """Empirical CDF: sorted sample values with cumulative probabilities."""

    values: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    def fraction_at_or_below(self, x: float) -> float:
        frac = 0.0
        for v, p in zip(self.values, self.probabilities):
            if v <= x:
                frac = p
            else:
                break
        return frac


def compute_cdf(samples: Sequence[float]) -> CdfSeries:
    """Empirical CDF with P(i) = (i+1)/n over ascending samples.

    Zero-valued samples are kept so unserved UEs show up as mass at x=0.
    """
    if not samples:
        raise ValueError("CDF needs at least one sample")
    ordered = sorted(samples)
    n = len(ordered)
    return CdfSeries(tuple(ordered), tuple((i + 1) / n for i in range(n)))


@dataclass(frozen=True)
class TimelineRow:
    """Snapshot of one group's allocation after one controller step."""

    step: int
    epoch: int
    time_s: float
    group_index: int
    group_size: int
    coordinated: bool
    tn_rbs: int
    guard_rbs: int
    ntn_rbs: int
    version: int


@dataclass(frozen=True)
class UtilizationSample:
    cell_id: int
    period_index: int
    time_s: float
    used_rb_epochs: int
    available_rb_epochs: int

    @property
    def utilization(self) -> float:
        if self.available_rb_epochs == 0:
            return 0.0
        return self.used_rb_epochs / self.available_rb_epochs


@dataclass
class MetricsStore:
    """Everything one run reports; filled by the engine, written here."""

    case_id: int
    seed: int
    total_s: float
    warmup_s: float
    timeline: List[TimelineRow] = field(default_factory=list)
    ue_bytes: Dict[int, float] = field(default_factory=dict)
    node_bytes: Dict[str, float] = field(default_factory=dict)
    utilization: List[UtilizationSample] = field(default_factory=list)
    unserved_ues: List[int] = field(default_factory=list)
    ue_system: Dict[int, str] = field(default_factory=dict)   # TN / NTN / none
    node_rb_counts: Dict[str, int] = field(default_factory=dict)
    final_allocation: List[TimelineRow] = field(default_factory=list)
    tn_share: float = 0.0
    ntn_share: float = 0.0
    sms_steps: int = 0

    def add_ue_bytes(self, ue_id: int, amount: float) -> None:
        self.ue_bytes[ue_id] = self.ue_bytes.get(ue_id, 0.0) + amount

    def add_node_bytes(self, node_id: str, amount: float) -> None:
        self.node_bytes[node_id] = self.node_bytes.get(node_id, 0.0) + amount

    def throughputs_bps(self) -> Dict[int, float]:
        """Post-warmup application throughput per UE (zero for unserved)."""
        horizon = self.total_s - self.warmup_s
        return {uid: b * 8.0 / horizon for uid, b in sorted(self.ue_bytes.items())}

    def total_rx_bytes(self) -> float:
        return sum(self.ue_bytes.values())


def _check_store(store: MetricsStore) -> None:
    ue_total = sum(store.ue_bytes.values())
    node_total = sum(store.node_bytes.values())
    if not math.isclose(ue_total, node_total, rel_tol=1e-9, abs_tol=1e-6):
        raise InvariantError(
            f"byte accounting mismatch: UEs {ue_total} vs nodes {node_total}"
        )
    for row in store.timeline:
        if row.coordinated and row.tn_rbs + row.guard_rbs + row.ntn_rbs != row.group_size:
            raise InvariantError(
                f"timeline step {row.step} group {row.group_index}: "
                f"allocation does not conserve the group size"
            )
    for sample in store.utilization:
        if not (0.0 <= sample.utilization <= 1.0):
            raise InvariantError(f"utilization out of range: {sample}")


def _write(path: Path, header: str, rows: Sequence[str]) -> Path:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(row + "\n")
    except OSError as exc:
        raise InvariantError(f"failed to write report {path}: {exc}") from exc
    return path


def finalize(store: MetricsStore, out_dir: Path) -> Dict[str, Path]:
    """Write all report files for one run and return their paths."""
    _check_store(store)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{store.case_id}_{store.seed}"
    files: Dict[str, Path] = {}

    files["allocation_timeline"] = _write(
        out_dir / f"{prefix}_allocation_timeline.csv",
        "step,epoch,time_s,group,group_size,coordinated,tn_rbs,guard_rbs,ntn_rbs,version",
        [
            f"{r.step},{r.epoch},{r.time_s!r},{r.group_index},{r.group_size},"
            f"{int(r.coordinated)},{r.tn_rbs},{r.guard_rbs},{r.ntn_rbs},{r.version}"
            for r in store.timeline
        ],
    )

    files["final_allocation"] = _write(
        out_dir / f"{prefix}_final_allocation.csv",
        "group,group_size,coordinated,tn_rbs,guard_rbs,ntn_rbs",
        [
            f"{r.group_index},{r.group_size},{int(r.coordinated)},"
            f"{r.tn_rbs},{r.guard_rbs},{r.ntn_rbs}"
            for r in store.final_allocation
        ],
    )

    files["rb_counts"] = _write(
        out_dir / f"{prefix}_rb_counts.csv",
        "node_id,rb_count",
        [f"{node},{count}" for node, count in sorted(store.node_rb_counts.items())],
    )

    throughputs = store.throughputs_bps()
    files["throughput"] = _write(
        out_dir / f"{prefix}_throughput.csv",
        "ue_id,system,rx_bytes,throughput_bps",
        [
            f"{uid},{store.ue_system.get(uid, 'none')},"
            f"{store.ue_bytes[uid]!r},{tput!r}"
            for uid, tput in throughputs.items()
        ],
    )

    files["utilization"] = _write(
        out_dir / f"{prefix}_utilization.csv",
        "cell_id,period,time_s,used_rb_epochs,available_rb_epochs,utilization",
        [
            f"{s.cell_id},{s.period_index},{s.time_s!r},"
            f"{s.used_rb_epochs},{s.available_rb_epochs},{s.utilization!r}"
            for s in store.utilization
        ],
    )

    zero_tput = sum(1 for t in throughputs.values() if t == 0.0)
    summary = {
        "case": store.case_id,
        "seed": store.seed,
        "total_s": store.total_s,
        "warmup_s": store.warmup_s,
        "ue_count": len(store.ue_bytes),
        "total_rx_bytes": store.total_rx_bytes(),
        "tn_share": store.tn_share,
        "ntn_share": store.ntn_share,
        "sms_steps": store.sms_steps,
        "unserved_ues": sorted(store.unserved_ues),
        "zero_throughput_ues": zero_tput,
        "zero_throughput_fraction": zero_tput / max(1, len(throughputs)),
        "mean_tn_utilization": (
            sum(s.utilization for s in store.utilization) / len(store.utilization)
            if store.utilization
            else 0.0
        ),
        "final_allocation": {
            str(r.group_index): {
                "size": r.group_size,
                "coordinated": r.coordinated,
                "tn_rbs": r.tn_rbs,
                "guard_rbs": r.guard_rbs,
                "ntn_rbs": r.ntn_rbs,
            }
            for r in store.final_allocation
        },
        "node_rb_counts": dict(sorted(store.node_rb_counts.items())),
    }
    path = out_dir / f"{prefix}_summary.json"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise InvariantError(f"failed to write report {path}: {exc}") from exc
    files["summary"] = path
    return files
