"""Campaign configuration, loaded from an INI-style key/value file.

Every key is optional; defaults reproduce the 625-seed desk-scale campaign::

    [campaign]
    rng_seed = 0
    workers = 1
    out_dir = campaign

    [sut]
    endpoint = builtin          ; or tcp://host:port, exec:<command>
    ambiguity_margin = 1.0
    max_tilt_deg = 20

    [geometry]
    side_distance = 8000
    top_offset = 3000
    top_skew = 0
    tolerance = 150

    [seed]
    log =                       ; existing JSON Lines log; synthesised when empty
    entries = 625
    synth_step = 500
    max_step = 2000

    [exploration]
    noise_lengths = 1-23
    repetitions = 10

    [exploitation]
    enabled = true
    angles = 0, 45, 90, 135
    grid = 25x25
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .geometry import TripletGeometry
from .logs import DEFAULT_MAX_STEP, DEFAULT_SYNTH_STEP
from .morph import NoiseSpec, Phase, ReplicaKind
from .sut import SutConfig


def parse_range(text: str) -> tuple[int, ...]:
    """``"1-23"`` or ``"1,2,5"`` (or a mix) to a sorted tuple of ints."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1))
        else:
            out.add(int(part))
    if not out:
        raise ValueError(f"empty range {text!r}")
    return tuple(sorted(out))


def parse_grid(text: str) -> tuple[int, int]:
    rows, cols = text.lower().split("x")
    return int(rows), int(cols)


def parse_angles(text: str) -> tuple[float, ...]:
    return tuple(float(a) for a in text.split(",") if a.strip())


@dataclass(frozen=True)
class CampaignConfig:
    geometry: TripletGeometry = field(default_factory=TripletGeometry)
    sut_endpoint: str = "builtin"
    ambiguity_margin: float = 1.0
    max_tilt_deg: float = 20.0
    log_path: Optional[str] = None
    n_entries: int = 625
    synth_step: float = DEFAULT_SYNTH_STEP
    max_step: float = DEFAULT_MAX_STEP
    noise_lengths: tuple[int, ...] = tuple(range(1, 24))
    repetitions: int = 10
    exploit: bool = True
    angles: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0)
    grid: tuple[int, int] = (25, 25)
    rng_seed: int = 0
    workers: int = 1
    out_dir: str = "campaign"

    @property
    def sut_config(self) -> SutConfig:
        return SutConfig(self.geometry, self.ambiguity_margin, self.max_tilt_deg)

    def exploration_spec(self) -> NoiseSpec:
        return NoiseSpec(Phase.EXPLORATION, self.repetitions, self.noise_lengths, rng_seed=self.rng_seed)

    def exploitation_spec(self, kind: ReplicaKind) -> NoiseSpec:
        return NoiseSpec(Phase.EXPLOITATION, replica_kind=kind, rotation_angles=self.angles,
                         grid=self.grid, rng_seed=self.rng_seed)

    def with_overrides(self, **kw) -> "CampaignConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_json(self) -> dict:
        return {
            "geometry": vars(self.geometry),
            "sut": self.sut_endpoint,
            "ambiguity_margin": self.ambiguity_margin,
            "max_tilt_deg": self.max_tilt_deg,
            "log": self.log_path,
            "entries": self.n_entries,
            "synth_step": self.synth_step,
            "max_step": self.max_step,
            "noise_lengths": list(self.noise_lengths),
            "repetitions": self.repetitions,
            "exploit": self.exploit,
            "angles": list(self.angles),
            "grid": list(self.grid),
            "rng_seed": self.rng_seed,
            "workers": self.workers,
        }


def load_config(path=None) -> CampaignConfig:
    if path is None:
        return CampaignConfig()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    d = CampaignConfig()
    g = d.geometry
    geometry = TripletGeometry(
        cp.getfloat("geometry", "side_distance", fallback=g.side_distance),
        cp.getfloat("geometry", "top_offset", fallback=g.top_offset),
        cp.getfloat("geometry", "top_skew", fallback=g.top_skew),
        cp.getfloat("geometry", "tolerance", fallback=g.tolerance),
    )
    log_path = cp.get("seed", "log", fallback="").strip() or None
    if log_path and not Path(log_path).is_absolute():
        log_path = str(Path(path).parent / log_path)
    return CampaignConfig(
        geometry=geometry,
        sut_endpoint=cp.get("sut", "endpoint", fallback=d.sut_endpoint).strip(),
        ambiguity_margin=cp.getfloat("sut", "ambiguity_margin", fallback=d.ambiguity_margin),
        max_tilt_deg=cp.getfloat("sut", "max_tilt_deg", fallback=d.max_tilt_deg),
        log_path=log_path,
        n_entries=cp.getint("seed", "entries", fallback=d.n_entries),
        synth_step=cp.getfloat("seed", "synth_step", fallback=d.synth_step),
        max_step=cp.getfloat("seed", "max_step", fallback=d.max_step),
        noise_lengths=parse_range(cp.get("exploration", "noise_lengths", fallback="1-23")),
        repetitions=cp.getint("exploration", "repetitions", fallback=d.repetitions),
        exploit=cp.getboolean("exploitation", "enabled", fallback=d.exploit),
        angles=parse_angles(cp.get("exploitation", "angles", fallback="0,45,90,135")),
        grid=parse_grid(cp.get("exploitation", "grid", fallback="25x25")),
        rng_seed=cp.getint("campaign", "rng_seed", fallback=d.rng_seed),
        workers=cp.getint("campaign", "workers", fallback=d.workers),
        out_dir=cp.get("campaign", "out_dir", fallback=d.out_dir),
    )
