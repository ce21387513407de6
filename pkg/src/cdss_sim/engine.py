"""Deterministic fixed-step simulation engine and campaign orchestration.

One run is single-threaded and fully determined by its RunSpec: topology
placement, LOS draws, and scheduler rotation offsets all come from child
seeds derived by labelled hashing of the master seed, so adding a stream
never perturbs the others.  The controller is invoked in-process once per
optimization period; the epoch pipeline is fixed as arrivals, scheduling,
metrics, then the optional controller step.

Interference coupling: a transmitter's activity fraction for SINR purposes
is its RB utilization in the previous epoch (1.0 at epoch 0), which keeps
every epoch's outputs independent of the order cells are processed in.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .band import active_guard_rbs, build_band_plan, initial_allocation
from .controller import LoadReport, SpectrumManager
from .errors import ConfigurationError
from .metrics import MetricsStore, TimelineRow, UtilizationSample, compute_cdf, finalize
from .radio import (
    LinkState,
    distance_m,
    los_state,
    ntn_rx_power,
    select_serving,
    spectral_efficiency_array,
    thermal_noise_dbm,
    tn_pathloss,
    tn_rx_power,
)
from .scenario import (
    CASES,
    ScenarioConfig,
    build_topology,
    demand_bps,
    derive_seed,
    parse_scenario,
    serialize_scenario,
    validate_scenario,
)
from .traffic import RoundRobinState, TrafficFlow, generate_arrivals, schedule_epoch


@dataclass(frozen=True)
class SimClock:
    """Epoch bookkeeping: integer epoch counts avoid float-drift boundaries."""

    epoch_s: float
    warmup_epochs: int
    total_epochs: int
    period_epochs: int

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "SimClock":
        epoch_s = cfg.sim.epoch_ms / 1e3
        total = _whole_epochs(cfg.sim.total_s, epoch_s, "total_s")
        warmup = _whole_epochs(cfg.sim.warmup_s, epoch_s, "warmup_s")
        period = _whole_epochs(cfg.cdss.period_s, epoch_s, "period_s")
        if warmup >= total:
            raise ConfigurationError("warmup must be shorter than the simulation")
        if period < 1:
            raise ConfigurationError("optimization period shorter than one epoch")
        return cls(epoch_s, warmup, total, period)


def _whole_epochs(seconds: float, epoch_s: float, name: str) -> int:
    n = round(seconds / epoch_s)
    if not math.isclose(n * epoch_s, seconds, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigurationError(f"{name} = {seconds} is not a whole number of epochs")
    return n


@dataclass(frozen=True)
class RunSpec:
    """Everything that determines one run; equal specs give equal outputs."""

    scenario: ScenarioConfig
    case_id: int
    seed: int


@dataclass
class _Node:
    """One scheduling entity: a TN cell or an enabled NTN beam."""

    node_id: str
    kind: str                   # "tn" | "ntn"
    tx_index: int
    entity_id: int
    ue_ids: List[int] = field(default_factory=list)
    granted: List[int] = field(default_factory=list)
    group_avail: List[int] = field(default_factory=list)
    bytes_per_rb: Optional[Callable[[int, int], float]] = None


def tn_granted_rbs(plan, state, blocked: frozenset) -> Tuple[List[int], List[int]]:
    """TN-usable RBs minus guard-timed ones, in a dealing order that
    interleaves groups proportionally to their granted sizes.

    Proportional interleaving keeps per-group utilization representative of
    the cell's overall load instead of piling usage into low RB indices.
    Returns (ordered RB list, per-group granted counts).
    """
    parts: List[List[int]] = []
    for g in plan.groups:
        if g.coordinated:
            rbs = list(state.allocations[g.index].tn_range(g))
        else:
            rbs = list(g.rb_range)
        parts.append([rb for rb in rbs if rb not in blocked])
    keyed: List[Tuple[float, int]] = []
    for part in parts:
        size = len(part)
        keyed.extend(((i + 0.5) / size, rb) for i, rb in enumerate(part))
    keyed.sort()
    return [rb for _, rb in keyed], [len(part) for part in parts]


def ntn_granted_rbs(plan, state, group_index: int, blocked: frozenset) -> List[int]:
    """NTN-usable RBs of one beam's group, minus guard-timed ones."""
    g = plan.group(group_index)
    if g.coordinated:
        rbs = state.allocations[g.index].ntn_range(g)
    else:
        rbs = g.rb_range
    return [rb for rb in rbs if rb not in blocked]


def run_simulation(spec: RunSpec) -> MetricsStore:
    """Execute one deterministic run and return its metrics store."""
    if spec.case_id not in CASES:
        raise ConfigurationError(
            f"case {spec.case_id} unknown, valid cases are {sorted(CASES)}"
        )
    case = CASES[spec.case_id]
    scenario = spec.scenario
    validate_scenario(scenario)
    clock = SimClock.from_config(scenario)
    band = scenario.band
    radio_p = scenario.radio
    cdss = scenario.cdss

    # TN-only cases disable every beam and free the whole band for the TN,
    # which is expressed by marking all groups uncoordinated.
    flags = (
        band.coordinated
        if case.ntn_enabled
        else tuple(False for _ in range(band.num_groups))
    )
    plan = build_band_plan(band.total_rbs, band.num_groups, flags, band.rb_bandwidth_hz)
    state = initial_allocation(plan, cdss)
    manager = SpectrumManager(plan, cdss)

    topo = build_topology(scenario, case, spec.seed)
    cells = sorted(topo.cells, key=lambda c: c.cell_id)
    beams = sorted(topo.beams, key=lambda b: b.beam_id)
    ues = sorted(topo.ues, key=lambda u: u.ue_id)
    n_ue = len(ues)
    n_tx = len(cells) + len(beams)

    # Static link state: one LOS draw per (UE, cell), then fixed rx powers.
    link = LinkState()
    rng_los = np.random.default_rng(derive_seed(spec.seed, "los"))
    for ue in ues:
        for cell in cells:
            draw = float(rng_los.uniform(0.0, 1.0))
            is_los = los_state(ue, cell, draw, radio_p.los_d0_m, radio_p.los_scale_m)
            link.los[(cell.cell_id, ue.ue_id)] = is_los
            link.pathloss_db[(cell.cell_id, ue.ue_id)] = tn_pathloss(
                distance_m(ue.xy, cell.site_xy), is_los, cell.freq_ghz,
                radio_p.nlos_offset_db,
            )

    rx_dbm = np.full((n_tx, n_ue), -np.inf)
    for ti, cell in enumerate(cells):
        for ui, ue in enumerate(ues):
            rx_dbm[ti, ui] = tn_rx_power(ue, cell, link.los[(cell.cell_id, ue.ue_id)], radio_p)
    for bi, beam in enumerate(beams):
        ti = len(cells) + bi
        for ui, ue in enumerate(ues):
            rx_dbm[ti, ui] = ntn_rx_power(ue, beam)
    rx_lin = np.power(10.0, rx_dbm / 10.0)

    noise_dbm = thermal_noise_dbm(band.rb_bandwidth_hz, radio_p.noise_figure_db)
    noise_lin = 10.0 ** (noise_dbm / 10.0)

    # Serving attachment, once (stationary UEs, quasi-Earth-fixed beams).
    tx_of_cell = {cell.cell_id: i for i, cell in enumerate(cells)}
    tx_of_beam = {beam.beam_id: len(cells) + i for i, beam in enumerate(beams)}
    serving_tx = np.full(n_ue, -1, dtype=int)
    unserved: List[int] = []
    ue_system: Dict[int, str] = {}
    for ui, ue in enumerate(ues):
        ue.serving = select_serving(ue, cells, beams, link, radio_p)
        if ue.serving is None:
            unserved.append(ue.ue_id)
            ue_system[ue.ue_id] = "none"
        elif ue.serving[0] == "cell":
            serving_tx[ui] = tx_of_cell[ue.serving[1]]
            ue_system[ue.ue_id] = "TN"
        else:
            serving_tx[ui] = tx_of_beam[ue.serving[1]]
            ue_system[ue.ue_id] = "NTN"

    flows = {
        ue.ue_id: TrafficFlow(ue.ue_id, demand_bps(scenario, case, ue)) for ue in ues
    }

    nodes: List[_Node] = [
        _Node(f"tn-{c.cell_id}", "tn", tx_of_cell[c.cell_id], c.cell_id) for c in cells
    ] + [
        _Node(f"ntn-{b.beam_id}", "ntn", tx_of_beam[b.beam_id], b.beam_id) for b in beams
    ]
    node_by_tx = {node.tx_index: node for node in nodes}
    for ui, ue in enumerate(ues):
        if serving_tx[ui] >= 0:
            node_by_tx[serving_tx[ui]].ue_ids.append(ue.ue_id)

    rotations = {
        node.node_id: RoundRobinState(
            derive_seed(spec.seed, f"rotation:{node.node_id}")
            % max(1, len(node.ue_ids))
        )
        for node in nodes
    }

    group_of_rb = [0] * band.total_rbs
    for g in plan.groups:
        for rb in g.rb_range:
            group_of_rb[rb] = g.index
    num_groups = band.num_groups
    beam_tx_by_group: Dict[int, List[int]] = {g.index: [] for g in plan.groups}
    for beam in beams:
        beam_tx_by_group[beam.group_index].append(tx_of_beam[beam.beam_id])

    # Per-epoch byte capacities, refreshed in place: bf_tn[group][ue_id] for
    # TN-attached UEs, bf_ntn[ue_id] for NTN-attached ones.
    byte_scale = band.rb_bandwidth_hz * clock.epoch_s / 8.0
    bf_holder = {
        "tn": [[0.0] * n_ue for _ in range(num_groups)],
        "ntn": [0.0] * n_ue,
    }
    tn_idx = np.arange(len(cells))
    serving_clipped = np.clip(serving_tx, 0, None)
    signal_lin = rx_lin[serving_clipped, np.arange(n_ue)]
    ue_is_tn = (serving_tx >= 0) & (serving_tx < len(cells))
    cap, floor = radio_p.se_cap_bps_hz, radio_p.se_min_bps_hz

    def _se(sinr_arr: np.ndarray) -> np.ndarray:
        return spectral_efficiency_array(sinr_arr, cap, floor)

    def refresh_byte_factors(activity: np.ndarray) -> None:
        # TN-attached UEs: co-channel TN interference everywhere, plus any
        # same-group beams inside uncoordinated groups.  Coordinated groups
        # carry no cross-system interference by allocation disjointness.
        act_srv = activity[serving_clipped] * signal_lin
        tn_sum = activity[tn_idx] @ rx_lin[tn_idx, :]
        base_i = np.where(ue_is_tn, tn_sum - act_srv, 0.0)
        for g in plan.groups:
            interf = base_i.copy()
            if not g.coordinated:
                for btx in beam_tx_by_group[g.index]:
                    interf = interf + activity[btx] * rx_lin[btx, :]
            se = _se(signal_lin / (noise_lin + interf))
            row = bf_holder["tn"][g.index]
            vals = (se * byte_scale).tolist()
            for ui in range(n_ue):
                row[ui] = vals[ui] if ue_is_tn[ui] else 0.0
        # NTN-attached UEs: other same-group beams always interfere; the TN
        # joins in only inside uncoordinated groups.
        ntn_vals = [0.0] * n_ue
        for beam in beams:
            btx = tx_of_beam[beam.beam_id]
            group = plan.group(beam.group_index)
            mask = serving_tx == btx
            if not mask.any():
                continue
            interf = np.zeros(n_ue)
            for other in beam_tx_by_group[beam.group_index]:
                if other != btx:
                    interf += activity[other] * rx_lin[other, :]
            if not group.coordinated:
                interf += activity[tn_idx] @ rx_lin[tn_idx, :]
            se = _se(signal_lin / (noise_lin + interf))
            vals = (se * byte_scale).tolist()
            for ui in np.nonzero(mask)[0]:
                ntn_vals[ui] = vals[ui]
        bf_holder["ntn"] = ntn_vals

    def make_tn_bytes_fn() -> Callable[[int, int], float]:
        tn_rows = bf_holder["tn"]
        def fn(uid: int, rb: int) -> float:
            return tn_rows[group_of_rb[rb]][uid]
        return fn

    def make_ntn_bytes_fn() -> Callable[[int, int], float]:
        def fn(uid: int, rb: int) -> float:
            return bf_holder["ntn"][uid]
        return fn

    for node in nodes:
        node.bytes_per_rb = make_tn_bytes_fn() if node.kind == "tn" else make_ntn_bytes_fn()

    def rebuild_granted(epoch: int) -> None:
        """Refresh usable RB lists after an allocation or guard change."""
        blocked = frozenset(active_guard_rbs(state, epoch))
        tn_order, tn_avail = tn_granted_rbs(plan, state, blocked)
        for node in nodes:
            if node.kind == "tn":
                node.granted = tn_order
                node.group_avail = tn_avail
            else:
                beam = beams[node.entity_id]
                node.granted = ntn_granted_rbs(plan, state, beam.group_index, blocked)
                node.group_avail = [0] * num_groups
                node.group_avail[beam.group_index] = len(node.granted)

    store = MetricsStore(
        case_id=spec.case_id,
        seed=spec.seed,
        total_s=scenario.sim.total_s,
        warmup_s=scenario.sim.warmup_s,
    )
    for ue in ues:
        store.ue_bytes[ue.ue_id] = 0.0
    for node in nodes:
        store.node_bytes[node.node_id] = 0.0
    store.unserved_ues = unserved
    store.ue_system = ue_system

    def timeline_rows(step: int, epoch: int) -> List[TimelineRow]:
        rows = []
        for g in plan.groups:
            if g.coordinated:
                alloc = state.allocations[g.index]
                tn, guard, ntn = alloc.tn_rbs, alloc.guard_rbs, alloc.ntn_rbs
            else:
                tn, guard = g.size, 0
                ntn = g.size if case.ntn_enabled else 0
            rows.append(
                TimelineRow(
                    step, epoch, epoch * clock.epoch_s, g.index, g.size,
                    g.coordinated, tn, guard, ntn, state.version,
                )
            )
        return rows

    store.timeline.extend(timeline_rows(0, 0))

    activity = np.ones(n_tx)
    granted_key: Optional[Tuple[int, Tuple[int, ...]]] = None
    period_index = 0
    # Per-period accumulators, reset at each controller invocation.
    used_per_group = [[0] * num_groups for _ in nodes]
    avail_per_group = [[0] * num_groups for _ in nodes]
    used_total = [0] * len(nodes)
    avail_total = [0] * len(nodes)

    for epoch in range(clock.total_epochs):
        blocked = active_guard_rbs(state, epoch)
        key = (state.version, tuple(sorted(blocked)))
        if key != granted_key:
            rebuild_granted(epoch)
            granted_key = key

        for flow in flows.values():
            generate_arrivals(flow, clock.epoch_s)

        refresh_byte_factors(activity)
        post_warmup = epoch >= clock.warmup_epochs
        next_activity = np.zeros(n_tx)

        for ni, node in enumerate(nodes):
            sched = schedule_epoch(
                node.node_id, epoch, node.ue_ids, flows, node.granted,
                node.bytes_per_rb, rotations[node.node_id],
            )
            if node.kind == "tn":
                upg = used_per_group[ni]
                for rbs in sched.assignments.values():
                    for rb in rbs:
                        upg[group_of_rb[rb]] += 1
                apg = avail_per_group[ni]
                for gi, count in enumerate(node.group_avail):
                    apg[gi] += count
            used_total[ni] += sched.used_rb
            avail_total[ni] += len(node.granted)
            if node.granted:
                next_activity[node.tx_index] = sched.used_rb / len(node.granted)
            if post_warmup and sched.served_bytes:
                node_sum = 0.0
                for uid, amount in sched.served_bytes.items():
                    store.add_ue_bytes(uid, amount)
                    node_sum += amount
                store.add_node_bytes(node.node_id, node_sum)

        activity = next_activity

        if (epoch + 1) % clock.period_epochs == 0:
            now = epoch + 1
            period_index += 1
            reports: List[LoadReport] = []
            for ni, node in enumerate(nodes):
                if node.kind != "tn":
                    continue
                for gi in plan.coordinated_indices():
                    avail = avail_per_group[ni][gi]
                    if avail > 0:
                        reports.append(
                            LoadReport(
                                node.entity_id, gi,
                                used_per_group[ni][gi], avail, now,
                            )
                        )
            period_start = now - clock.period_epochs
            if period_start >= clock.warmup_epochs:
                for ni, node in enumerate(nodes):
                    if node.kind == "tn":
                        store.utilization.append(
                            UtilizationSample(
                                node.entity_id, period_index, now * clock.epoch_s,
                                used_total[ni], avail_total[ni],
                            )
                        )
            state, _grants = manager.sms_step(state, reports, now)
            store.sms_steps += 1
            store.timeline.extend(timeline_rows(period_index, now))
            used_per_group = [[0] * num_groups for _ in nodes]
            avail_per_group = [[0] * num_groups for _ in nodes]
            used_total = [0] * len(nodes)
            avail_total = [0] * len(nodes)

    store.final_allocation = timeline_rows(period_index, clock.total_epochs)
    coord = plan.coordinated_indices()
    uncoord_size = sum(g.size for g in plan.groups if not g.coordinated)
    tn_usable = sum(state.allocations[gi].tn_rbs for gi in coord) + uncoord_size
    store.tn_share = tn_usable / band.total_rbs
    if coord:
        store.ntn_share = sum(state.allocations[gi].ntn_rbs for gi in coord) / sum(
            plan.group(gi).size for gi in coord
        )
    else:
        store.ntn_share = 0.0
    for node in nodes:
        if node.kind == "tn":
            store.node_rb_counts[node.node_id] = tn_usable
        else:
            beam = beams[node.entity_id]
            g = plan.group(beam.group_index)
            store.node_rb_counts[node.node_id] = (
                state.allocations[g.index].ntn_rbs if g.coordinated else g.size
            )
    return store


# ---------------------------------------------------------------------------
# campaign layer

@dataclass
class RunRecord:
    """Outcome of one (case, seed) run inside a campaign."""

    case_id: int
    seed: int
    ok: bool
    error: Optional[str] = None
    total_rx_bytes: float = 0.0
    tn_share: float = 0.0
    ntn_share: float = 0.0
    zero_throughput_fraction: float = 0.0
    throughputs_bps: List[float] = field(default_factory=list)
    files: Dict[str, str] = field(default_factory=dict)


@dataclass
class CampaignResult:
    records: List[RunRecord]
    aggregates: Dict[int, Dict[str, float]]
    files: Dict[str, Path]


def run_and_write(spec: RunSpec, out_dir: Path) -> Tuple[MetricsStore, Dict[str, Path]]:
    """Run one spec and write its report files."""
    store = run_simulation(spec)
    files = finalize(store, Path(out_dir))
    return store, files


def _campaign_worker(args: Tuple[str, int, int, str]) -> RunRecord:
    scenario_text, case_id, seed, out_dir = args
    try:
        scenario = parse_scenario(scenario_text)
        store, files = run_and_write(RunSpec(scenario, case_id, seed), Path(out_dir))
    except Exception as exc:  # noqa: BLE001 - a failed run must not kill the campaign
        return RunRecord(case_id, seed, ok=False, error=f"{type(exc).__name__}: {exc}")
    tputs = list(store.throughputs_bps().values())
    zero = sum(1 for t in tputs if t == 0.0)
    return RunRecord(
        case_id,
        seed,
        ok=True,
        total_rx_bytes=store.total_rx_bytes(),
        tn_share=store.tn_share,
        ntn_share=store.ntn_share,
        zero_throughput_fraction=zero / max(1, len(tputs)),
        throughputs_bps=tputs,
        files={k: str(p) for k, p in files.items()},
    )


def run_campaign(
    scenario: ScenarioConfig,
    case_ids: Sequence[int],
    seeds: Sequence[int],
    out_dir: Path,
    jobs: int = 1,
) -> CampaignResult:
    """Run every (case, seed) pair independently and aggregate per case.

    Runs share nothing; with jobs > 1 they execute in separate processes
    and the aggregation below is order-fixed, so results are identical for
    any parallelism degree.  Individual run failures are recorded, not
    fatal.
    """
    if not case_ids:
        raise ConfigurationError("campaign needs at least one case")
    if not seeds:
        raise ConfigurationError("campaign needs at least one seed")
    for cid in case_ids:
        if cid not in CASES:
            raise ConfigurationError(f"case {cid} unknown, valid cases are {sorted(CASES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario_text = serialize_scenario(scenario)
    work = [
        (scenario_text, cid, seed, str(out_dir))
        for cid in sorted(set(case_ids))
        for seed in sorted(set(seeds))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_campaign_worker, work))
    else:
        records = [_campaign_worker(item) for item in work]

    aggregates: Dict[int, Dict[str, float]] = {}
    files: Dict[str, Path] = {}
    for cid in sorted(set(case_ids)):
        good = [r for r in records if r.case_id == cid and r.ok]
        if not good:
            aggregates[cid] = {"runs": 0.0}
            continue
        totals = [r.total_rx_bytes for r in good]
        n = len(totals)
        mean = sum(totals) / n
        var = sum((t - mean) ** 2 for t in totals) / (n - 1) if n > 1 else 0.0
        std = math.sqrt(var)
        stderr = std / math.sqrt(n) if n else 0.0
        pooled = sorted(t for r in good for t in r.throughputs_bps)
        aggregates[cid] = {
            "runs": float(n),
            "mean_total_rx_bytes": mean,
            "std_total_rx_bytes": std,
            "stderr_total_rx_bytes": stderr,
            "ci95_lo_total_rx_bytes": mean - 1.96 * stderr,
            "ci95_hi_total_rx_bytes": mean + 1.96 * stderr,
            "mean_tn_share": sum(r.tn_share for r in good) / n,
            "mean_ntn_share": sum(r.ntn_share for r in good) / n,
            "zero_throughput_fraction": (
                sum(1 for t in pooled if t == 0.0) / len(pooled) if pooled else 0.0
            ),
        }
        cdf = compute_cdf(pooled)
        path = out_dir / f"{cid}_pooled_throughput_cdf.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("throughput_bps,probability\n")
            for v, p in zip(cdf.values, cdf.probabilities):
                fh.write(f"{v!r},{p!r}\n")
        files[f"cdf_case_{cid}"] = path

    totals_path = out_dir / "campaign_totals.csv"
    with open(totals_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "case,runs,mean_total_rx_bytes,std_total_rx_bytes,stderr_total_rx_bytes,"
            "ci95_lo,ci95_hi,mean_tn_share,mean_ntn_share,zero_throughput_fraction\n"
        )
        for cid in sorted(aggregates):
            a = aggregates[cid]
            if a.get("runs", 0) == 0:
                fh.write(f"{cid},0,,,,,,,,\n")
                continue
            fh.write(
                f"{cid},{int(a['runs'])},{a['mean_total_rx_bytes']!r},"
                f"{a['std_total_rx_bytes']!r},{a['stderr_total_rx_bytes']!r},"
                f"{a['ci95_lo_total_rx_bytes']!r},{a['ci95_hi_total_rx_bytes']!r},"
                f"{a['mean_tn_share']!r},{a['mean_ntn_share']!r},"
                f"{a['zero_throughput_fraction']!r}\n"
            )
    files["campaign_totals"] = totals_path
    return CampaignResult(records, aggregates, files)
