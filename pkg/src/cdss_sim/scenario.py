"""Scenario configuration: defaults, file parsing, validation, topology.

Scenario files use a sectioned key=value format (INI syntax).  Every key
is optional and falls back to the built-in defaults, which reproduce the
reference layout: a 160-RB shared band in three groups (two coordinated),
three tri-sector sites at 7.5 km ISD, three satellite beams with the third
one far outside the terrestrial region, and 10/5 UEs per cell/beam area.
Unknown sections or keys are rejected with the offending key path.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, fields as dataclass_fields, replace
from typing import Dict, List, Tuple

import numpy as np

from .band import build_band_plan, initial_allocation
from .controller import CdssConfig
from .errors import ConfigurationError
from .radio import NtnBeam, RadioParams, TnCell, Ue


@dataclass(frozen=True)
class BandParams:
    total_rbs: int = 160
    num_groups: int = 3
    coordinated: Tuple[bool, ...] = (True, True, False)
    rb_bandwidth_hz: float = 180_000.0


@dataclass(frozen=True)
class TopologyParams:
    isd_m: float = 7500.0
    num_sites: int = 3
    sectors_per_site: int = 3
    ues_per_tn_cell: int = 10
    ues_per_beam: int = 5
    # Beams 1 and 2 overlap the terrestrial region; beam 3 is remote, which
    # is why its frequency group defaults to uncoordinated.
    beam_centers_m: Tuple[Tuple[float, float], ...] = (
        (2000.0, 1500.0),
        (6000.0, 4000.0),
        (70000.0, 0.0),
    )
    beam_groups: Tuple[int, ...] = (0, 1, 2)


@dataclass(frozen=True)
class TrafficParams:
    ld_tn_kbps: float = 400.0
    ld_ntn_kbps: float = 400.0
    hd_tn_kbps: float = 4000.0
    hd_ntn_kbps: float = 1200.0


@dataclass(frozen=True)
class SimParams:
    total_s: float = 10.0
    warmup_s: float = 5.0
    epoch_ms: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    band: BandParams = BandParams()
    cdss: CdssConfig = CdssConfig()
    radio: RadioParams = RadioParams()
    topology: TopologyParams = TopologyParams()
    traffic: TrafficParams = TrafficParams()
    sim: SimParams = SimParams()


@dataclass(frozen=True)
class SimCase:
    """One row of the four-case study matrix."""

    case_id: int
    name: str
    ntn_enabled: bool
    high_demand: bool


CASES: Dict[int, SimCase] = {
    1: SimCase(1, "tn_only_ld", ntn_enabled=False, high_demand=False),
    2: SimCase(2, "cdss_ld", ntn_enabled=True, high_demand=False),
    3: SimCase(3, "tn_only_hd", ntn_enabled=False, high_demand=True),
    4: SimCase(4, "cdss_hd", ntn_enabled=True, high_demand=True),
}


def default_scenario() -> ScenarioConfig:
    return ScenarioConfig()


# ---------------------------------------------------------------------------
# parsing / serialization

_SECTION_TYPES = {
    "band": BandParams,
    "cdss": CdssConfig,
    "radio": RadioParams,
    "topology": TopologyParams,
    "traffic": TrafficParams,
    "sim": SimParams,
}


def _parse_bool(text: str, path: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigurationError(f"{path}: expected a boolean, got {text!r}")


def _parse_value(field_type: str, text: str, path: str):
    try:
        if field_type == "int":
            return int(text.strip())
        if field_type == "float":
            return float(text.strip())
        if field_type == "bool":
            return _parse_bool(text, path)
        if field_type == "Tuple[bool, ...]":
            return tuple(_parse_bool(tok, path) for tok in text.split(","))
        if field_type == "Tuple[int, ...]":
            return tuple(int(tok.strip()) for tok in text.split(","))
        if field_type == "Tuple[Tuple[float, float], ...]":
            pairs = []
            for chunk in text.split(";"):
                x, y = chunk.split(",")
                pairs.append((float(x.strip()), float(y.strip())))
            return tuple(pairs)
    except ConfigurationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"{path}: cannot parse {text!r} ({exc})") from exc
    raise ConfigurationError(f"{path}: unsupported field type {field_type}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(f"{x!r}, {y!r}" for x, y in value)
        if value and isinstance(value[0], bool):
            return ", ".join("true" if v else "false" for v in value)
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse a sectioned key=value scenario document.

    Unspecified keys take the defaults; unknown sections or keys and any
    validation failure raise ConfigurationError with the key path.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed scenario file: {exc}") from exc

    sections: Dict[str, object] = {}
    for section in parser.sections():
        if section not in _SECTION_TYPES:
            raise ConfigurationError(f"[{section}]: unknown section")
        cls = _SECTION_TYPES[section]
        known = {f.name: f for f in dataclass_fields(cls)}
        overrides = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigurationError(f"[{section}] {key}: unknown key")
            ftype = known[key].type
            overrides[key] = _parse_value(ftype, raw, f"[{section}] {key}")
        try:
            sections[section] = replace(cls(), **overrides)
        except ConfigurationError as exc:
            raise ConfigurationError(f"[{section}]: {exc}") from exc

    cfg = ScenarioConfig(
        band=sections.get("band", BandParams()),
        cdss=sections.get("cdss", CdssConfig()),
        radio=sections.get("radio", RadioParams()),
        topology=sections.get("topology", TopologyParams()),
        traffic=sections.get("traffic", TrafficParams()),
        sim=sections.get("sim", SimParams()),
    )
    validate_scenario(cfg)
    return cfg


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Render a config back to scenario-file text (parse round-trips)."""
    lines: List[str] = []
    for section, value in (
        ("band", cfg.band),
        ("cdss", cfg.cdss),
        ("radio", cfg.radio),
        ("topology", cfg.topology),
        ("traffic", cfg.traffic),
        ("sim", cfg.sim),
    ):
        lines.append(f"[{section}]")
        for f in dataclass_fields(value):
            lines.append(f"{f.name} = {_format_value(getattr(value, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def validate_scenario(cfg: ScenarioConfig) -> None:
    """Cross-field validation beyond what the dataclasses enforce."""
    band, topo, sim = cfg.band, cfg.topology, cfg.sim
    if band.total_rbs < 1:
        raise ConfigurationError("[band] total_rbs: must be positive")
    if len(band.coordinated) != band.num_groups:
        raise ConfigurationError(
            f"[band] coordinated: {len(band.coordinated)} flags for "
            f"{band.num_groups} groups"
        )
    if band.rb_bandwidth_hz <= 0:
        raise ConfigurationError("[band] rb_bandwidth_hz: must be positive")

    # The coordinated split must be feasible; reuse the real constructors.
    plan = build_band_plan(
        band.total_rbs, band.num_groups, band.coordinated, band.rb_bandwidth_hz
    )
    initial_allocation(plan, cfg.cdss)

    if not (1 <= topo.num_sites <= 3):
        raise ConfigurationError("[topology] num_sites: supported range is 1..3")
    if topo.sectors_per_site < 1:
        raise ConfigurationError("[topology] sectors_per_site: must be positive")
    if topo.isd_m <= 0:
        raise ConfigurationError("[topology] isd_m: must be positive")
    if min(topo.ues_per_tn_cell, topo.ues_per_beam) < 0:
        raise ConfigurationError("[topology] UE counts must be non-negative")
    if len(topo.beam_centers_m) != len(topo.beam_groups):
        raise ConfigurationError(
            "[topology] beam_groups: one group index per beam center required"
        )
    for i, gi in enumerate(topo.beam_groups):
        if not (0 <= gi < band.num_groups):
            raise ConfigurationError(
                f"[topology] beam_groups: beam {i} references group {gi}, "
                f"valid range is 0..{band.num_groups - 1}"
            )
    for name in ("ld_tn_kbps", "ld_ntn_kbps", "hd_tn_kbps", "hd_ntn_kbps"):
        if getattr(cfg.traffic, name) < 0:
            raise ConfigurationError(f"[traffic] {name}: must be non-negative")

    if sim.epoch_ms <= 0:
        raise ConfigurationError("[sim] epoch_ms: must be positive")
    if not (0 <= sim.warmup_s < sim.total_s):
        raise ConfigurationError(
            f"[sim] warmup_s {sim.warmup_s} must be in [0, total_s {sim.total_s})"
        )
    epoch_s = sim.epoch_ms / 1e3
    if not _is_multiple(cfg.cdss.period_s, epoch_s):
        raise ConfigurationError(
            f"[cdss] period_s {cfg.cdss.period_s} is not a whole number of "
            f"{sim.epoch_ms} ms epochs"
        )
    if not _is_multiple(sim.total_s, epoch_s) or not _is_multiple(sim.warmup_s, epoch_s):
        raise ConfigurationError(
            "[sim] total_s and warmup_s must be whole numbers of epochs"
        )


def _is_multiple(value: float, unit: float) -> bool:
    n = round(value / unit)
    return n >= 0 and math.isclose(n * unit, value, rel_tol=1e-9, abs_tol=1e-12)


# ---------------------------------------------------------------------------
# topology construction

@dataclass
class Topology:
    """Concrete transmitters and UEs for one run."""

    cells: List[TnCell]
    beams: List[NtnBeam]   # empty when the case disables the NTN
    ues: List[Ue]


def derive_seed(master_seed: int, label: str) -> int:
    """Stable per-stream child seed; adding streams never shifts others."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def site_positions(topo: TopologyParams) -> List[Tuple[float, float]]:
    s = topo.isd_m
    candidates = [(0.0, 0.0), (s, 0.0), (s / 2.0, s * math.sqrt(3.0) / 2.0)]
    return candidates[: topo.num_sites]


def _in_hexagon(dx: float, dy: float, circumradius: float) -> bool:
    # Flat-top hexagon with a vertex on the +x axis; edge normals at
    # 30/90/150 degrees, apothem sqrt(3)/2 * R.
    apothem = math.sqrt(3.0) / 2.0 * circumradius
    for ang in (30.0, 90.0, 150.0):
        r = math.radians(ang)
        if abs(dx * math.cos(r) + dy * math.sin(r)) > apothem:
            return False
    return True


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def _sample_in_sector(
    rng: np.random.Generator,
    site: Tuple[float, float],
    azimuth_deg: float,
    hex_radius_m: float,
    wedge_deg: float,
) -> Tuple[float, float]:
    while True:
        dx = rng.uniform(-hex_radius_m, hex_radius_m)
        dy = rng.uniform(-hex_radius_m, hex_radius_m)
        if not _in_hexagon(dx, dy, hex_radius_m):
            continue
        if math.hypot(dx, dy) < 1.0:  # avoid the singular point at the mast
            continue
        bearing = math.degrees(math.atan2(dy, dx))
        if abs(_wrap_deg(bearing - azimuth_deg)) <= wedge_deg / 2.0:
            return (site[0] + dx, site[1] + dy)


def _sample_in_disc(
    rng: np.random.Generator, center: Tuple[float, float], radius_m: float
) -> Tuple[float, float]:
    r = radius_m * math.sqrt(rng.uniform(0.0, 1.0))
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return (center[0] + r * math.cos(theta), center[1] + r * math.sin(theta))


def build_topology(cfg: ScenarioConfig, case: SimCase, seed: int) -> Topology:
    """Instantiate cells, beams, and seeded UE placement for one run.

    UE placement is identical across cases for a given seed: beam areas
    are populated even in TN-only cases, where those UEs must try their
    luck with the terrestrial sites.
    """
    topo = cfg.topology
    radio = cfg.radio
    cells: List[TnCell] = []
    sector_step = 360.0 / topo.sectors_per_site
    for si, site in enumerate(site_positions(topo)):
        for k in range(topo.sectors_per_site):
            cells.append(
                TnCell(
                    cell_id=si * topo.sectors_per_site + k,
                    site_xy=site,
                    azimuth_deg=k * sector_step,
                    tx_power_dbm=radio.tn_tx_power_dbm,
                    antenna_gain_dbi=radio.tn_antenna_gain_dbi,
                    freq_ghz=radio.freq_ghz,
                )
            )

    beams: List[NtnBeam] = []
    if case.ntn_enabled:
        nominal_rbs = cfg.band.total_rbs / cfg.band.num_groups
        for bi, center in enumerate(topo.beam_centers_m):
            beams.append(
                NtnBeam(
                    beam_id=bi,
                    center_xy=center,
                    group_index=topo.beam_groups[bi],
                    altitude_km=radio.sat_altitude_km,
                    elevation_deg=radio.elevation_deg,
                    eirp_dbm=radio.ntn_eirp_dbm,
                    beam_3db_radius_km=radio.beam_3db_radius_km,
                    freq_ghz=radio.freq_ghz,
                    nominal_rbs=nominal_rbs,
                )
            )

    rng = np.random.default_rng(derive_seed(seed, "ue-placement"))
    hex_radius = topo.isd_m / math.sqrt(3.0)
    wedge = 360.0 / topo.sectors_per_site
    ues: List[Ue] = []
    ue_id = 0
    for cell in cells:
        for _ in range(topo.ues_per_tn_cell):
            xy = _sample_in_sector(rng, cell.site_xy, cell.azimuth_deg, hex_radius, wedge)
            ues.append(Ue(ue_id, xy, "tn", radio.noise_figure_db))
            ue_id += 1
    for bi, center in enumerate(topo.beam_centers_m):
        for _ in range(topo.ues_per_beam):
            xy = _sample_in_disc(rng, center, radio.beam_3db_radius_km * 1e3)
            ues.append(Ue(ue_id, xy, "ntn", radio.noise_figure_db))
            ue_id += 1
    return Topology(cells, beams, ues)


def demand_bps(cfg: ScenarioConfig, case: SimCase, ue: Ue) -> float:
    """Per-UE CBR demand by placement area and case demand level."""
    t = cfg.traffic
    if case.high_demand:
        kbps = t.hd_tn_kbps if ue.kind == "tn" else t.hd_ntn_kbps
    else:
        kbps = t.ld_tn_kbps if ue.kind == "tn" else t.ld_ntn_kbps
    return kbps * 1e3
