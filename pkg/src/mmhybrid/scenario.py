"""Experiment parameters: operators, carriers, access modes and antenna presets.

A :class:`ScenarioConfig` is built from a plain nested mapping (usually parsed
from a YAML file) by :func:`build_scenario`, and written back with
:func:`scenario_to_dict`.  The two are inverses of each other.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

import yaml


class ConfigError(ValueError):
    """Base class for configuration problems."""


class MissingField(ConfigError):
    pass


class InvalidValue(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class InconsistentPreset(ConfigError):
    pass


class AccessMode(str, enum.Enum):
    EXCLUSIVE = "exclusive"
    POOLED = "pooled"


class Preset(str, enum.Enum):
    I = "i"
    II = "ii"
    III = "iii"


class Policy(str, enum.Enum):
    JOINT = "joint"
    CARRIER_ONLY = "carrier-only"


SCHEMES = ("hybrid", "licensed", "pooled")

LOW, HIGH = 0, 1

# (alpha dB, beta, sigma dB) keyed by (frequency GHz, state)
PATHLOSS_TABLE = {
    (28.0, "los"): (61.4, 2.0, 5.8),
    (28.0, "nlos"): (72.0, 2.9, 8.7),
    (73.0, "los"): (69.8, 2.0, 5.8),
    (73.0, "nlos"): (86.6, 2.45, 8.0),
}

# preset -> ((n_tx, n_rx, p_tx dBm) at low carrier, same at high carrier)
PRESETS = {
    Preset.I: ((64, 16, 30.0), (64, 16, 30.0)),
    Preset.II: ((64, 16, 30.0), (256, 64, 24.0)),
    Preset.III: ((64, 16, 30.0), (256, 64, 30.0)),
}


@dataclass(frozen=True)
class PathLossParams:
    alpha: float
    beta: float
    sigma: float


@dataclass(frozen=True)
class CarrierSpec:
    name: str
    frequency_ghz: float
    total_bandwidth_hz: float
    mode: AccessMode
    bs_tx_power_dbm: float
    bs_elements: int
    ue_elements: int
    los: PathLossParams
    nlos: PathLossParams

    def pathloss_params(self, state: str) -> PathLossParams:
        return self.los if state == "los" else self.nlos

    @property
    def bs_side(self) -> int:
        return math.isqrt(self.bs_elements)

    @property
    def ue_side(self) -> int:
        return math.isqrt(self.ue_elements)

    @property
    def eirp_dbm(self) -> float:
        return self.bs_tx_power_dbm + 10 * math.log10(self.bs_elements)


@dataclass(frozen=True)
class ClusterModel:
    """Small-scale cluster statistics.

    Cluster centres are uniform in azimuth and in
    ``[-elevation_spread_rad, elevation_spread_rad]`` in elevation.  Each
    cluster carries ``subpaths`` rays scattered around its centre with the
    given rms spreads (degrees); ``subpaths=1`` with zero spread is a single
    ray per cluster.
    """

    mean_count: float = 1.9
    power_decay: float = 1.0
    elevation_spread_rad: float = math.pi / 8
    subpaths: int = 20
    tx_azimuth_spread_deg: float = 10.0
    tx_elevation_spread_deg: float = 2.0
    rx_azimuth_spread_deg: float = 15.0
    rx_elevation_spread_deg: float = 5.0


@dataclass(frozen=True)
class ScenarioConfig:
    operators: int = 4
    area_km2: float = 0.3
    bs_density: float = 30.0
    ue_density: float = 300.0
    carriers: tuple[CarrierSpec, CarrierSpec] = None  # type: ignore[assignment]
    preset: Preset | None = Preset.II
    noise_figure_db: float = 7.0
    noise_density_dbm_hz: float = -174.0
    initial_low_prob: float = 0.5
    policy: Policy = Policy.JOINT
    initial_bs: str = "low"
    max_iterations: int | None = None
    min_iterations: int | None = None
    window: int = 200
    tolerance: float = 0.01
    clusters: ClusterModel = field(default_factory=ClusterModel)
    seed: int = 1
    repetitions: int = 20

    def __post_init__(self):
        if self.carriers is None:
            carriers = hybrid_preset(self.operators, 1e9, 1e9, self.preset or Preset.II)
            object.__setattr__(self, "carriers", carriers)

    @property
    def side_m(self) -> float:
        return math.sqrt(self.area_km2) * 1000.0

    def noise_power_dbm(self, carrier: int) -> float:
        w = per_operator_bandwidth(self.carriers[carrier], self.operators)
        return self.noise_density_dbm_hz + self.noise_figure_db + 10 * math.log10(w)

    def bandwidth(self, carrier: int) -> float:
        return per_operator_bandwidth(self.carriers[carrier], self.operators)


def per_operator_bandwidth(spec: CarrierSpec, operators: int) -> float:
    if spec.mode is AccessMode.EXCLUSIVE:
        return spec.total_bandwidth_hz / operators
    return spec.total_bandwidth_hz


def default_carrier(name: str, frequency_ghz: float, mode: AccessMode,
                    preset: Preset = Preset.II,
                    total_bandwidth_hz: float = 1e9) -> CarrierSpec:
    idx = LOW if name == "low" else HIGH
    n_tx, n_rx, p_tx = PRESETS[preset][idx]
    los = PathLossParams(*PATHLOSS_TABLE[(float(frequency_ghz), "los")])
    nlos = PathLossParams(*PATHLOSS_TABLE[(float(frequency_ghz), "nlos")])
    return CarrierSpec(name, float(frequency_ghz), float(total_bandwidth_hz), mode,
                       p_tx, n_tx, n_rx, los, nlos)


def scheme_modes(scheme: str) -> tuple[AccessMode, AccessMode]:
    if scheme == "hybrid":
        return AccessMode.EXCLUSIVE, AccessMode.POOLED
    if scheme == "licensed":
        return AccessMode.EXCLUSIVE, AccessMode.EXCLUSIVE
    if scheme == "pooled":
        return AccessMode.POOLED, AccessMode.POOLED
    raise ValueError(f"unknown scheme {scheme!r}")


def hybrid_preset(operators: int, w_low: float, w_high: float,
                  preset: Preset = Preset.II,
                  scheme: str = "hybrid") -> tuple[CarrierSpec, CarrierSpec]:
    """Carrier pair for one of the three access schemes.

    The default ``scheme="hybrid"`` makes the 28 GHz carrier exclusive and the
    73 GHz carrier pooled; ``"licensed"`` and ``"pooled"`` give the baselines.
    """
    if operators < 1:
        raise InvalidValue("operators", "must be >= 1")
    m_low, m_high = scheme_modes(scheme)
    return (default_carrier("low", 28.0, m_low, preset, w_low),
            default_carrier("high", 73.0, m_high, preset, w_high))


def with_scheme(cfg: ScenarioConfig, scheme: str) -> ScenarioConfig:
    m_low, m_high = scheme_modes(scheme)
    low, high = cfg.carriers
    return replace(cfg, carriers=(replace(low, mode=m_low), replace(high, mode=m_high)))


# ---------------------------------------------------------------------------
# document <-> config

def _num(doc: Mapping, key: str, path: str, default=None, kind=float):
    if key not in doc or doc[key] is None:
        if default is None:
            raise MissingField(f"{path}{key}")
        return default
    raw = doc[key]
    if isinstance(raw, bool):
        raise InvalidValue(path + key, f"expected a number, got {raw!r}")
    if kind is int and isinstance(raw, int):
        return raw
    try:
        val = kind(float(raw)) if kind is int else kind(raw)
    except (TypeError, ValueError, OverflowError):
        raise InvalidValue(path + key, f"expected a number, got {raw!r}") from None
    if kind is int and float(raw) != val:
        raise InvalidValue(path + key, f"expected an integer, got {raw!r}")
    if kind is float and not math.isfinite(val):
        raise InvalidValue(path + key, f"expected a finite number, got {raw!r}")
    return val


def _enum(cls, raw, path):
    try:
        return cls(str(raw).lower())
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise InvalidValue(path, f"{raw!r} not one of {choices}") from None


def _parse_preset(raw) -> Preset | None:
    if raw is None or str(raw).lower() in ("none", "custom"):
        return None
    text = str(raw).lower().replace("config", "").strip()
    return _enum(Preset, text, "preset")


def _parse_pathloss(doc, state, freq, path):
    table = doc.get("pathloss", {}) or {}
    if state in table:
        vals = table[state]
        if not isinstance(vals, (list, tuple)) or len(vals) != 3:
            raise InvalidValue(f"{path}pathloss.{state}", "expected [alpha, beta, sigma]")
        try:
            return PathLossParams(*(float(v) for v in vals))
        except (TypeError, ValueError):
            raise InvalidValue(f"{path}pathloss.{state}", f"non-numeric entry in {vals!r}") from None
    key = (float(freq), state)
    if key not in PATHLOSS_TABLE:
        raise MissingField(f"{path}pathloss.{state}")
    return PathLossParams(*PATHLOSS_TABLE[key])


def _parse_carrier(doc, name, idx, preset, mode_default, path):
    doc = doc or {}
    freq = _num(doc, "frequency_ghz", path, 28.0 if idx == LOW else 73.0)
    if freq <= 0:
        raise InvalidValue(path + "frequency_ghz", "must be > 0")
    width = _num(doc, "total_bandwidth_hz", path, 1e9)
    if width <= 0:
        raise InvalidValue(path + "total_bandwidth_hz", "must be > 0")
    mode = _enum(AccessMode, doc.get("mode", mode_default.value), path + "mode")

    vals = {}
    for key, pos, kind in (("bs_elements", 0, int), ("ue_elements", 1, int),
                           ("bs_tx_power_dbm", 2, float)):
        explicit = doc.get(key)
        from_preset = PRESETS[preset][idx][pos] if preset is not None else None
        if explicit is None:
            if from_preset is None:
                raise MissingField(path + key)
            vals[key] = from_preset
            continue
        value = _num(doc, key, path, kind=kind)
        if from_preset is not None and value != from_preset:
            raise InconsistentPreset(
                f"{path}{key}={value} conflicts with preset {preset.value} ({from_preset})")
        vals[key] = value
    for key in ("bs_elements", "ue_elements"):
        n = vals[key]
        if n < 1 or math.isqrt(n) ** 2 != n:
            raise InvalidValue(path + key, f"{n} is not a perfect square >= 1")

    return CarrierSpec(
        name=name, frequency_ghz=freq, total_bandwidth_hz=width, mode=mode,
        bs_tx_power_dbm=vals["bs_tx_power_dbm"], bs_elements=vals["bs_elements"],
        ue_elements=vals["ue_elements"],
        los=_parse_pathloss(doc, "los", freq, path),
        nlos=_parse_pathloss(doc, "nlos", freq, path))


def build_scenario(raw: Mapping[str, Any] | None) -> ScenarioConfig:
    """Validate a nested mapping and expand it into a :class:`ScenarioConfig`.

    Missing keys take their defaults (four operators, 0.3 km2, 30 BS/km2,
    300 UE/km2, preset ii, hybrid access).  Explicit antenna counts or powers
    that disagree with the preset raise :class:`InconsistentPreset`.
    """
    doc = dict(raw or {})
    preset = _parse_preset(doc.get("preset", "ii"))

    operators = _num(doc, "operators", "", 4, kind=int)
    if operators < 1:
        raise InvalidValue("operators", "must be >= 1")
    area = _num(doc, "area_km2", "", 0.3)
    bs_density = _num(doc, "bs_density", "", 30.0)
    ue_density = _num(doc, "ue_density", "", 300.0)
    for key, val in (("area_km2", area), ("bs_density", bs_density), ("ue_density", ue_density)):
        if not val > 0 or not math.isfinite(val):
            raise InvalidValue(key, "must be > 0")

    carriers_doc = doc.get("carriers") or {}
    low = _parse_carrier(carriers_doc.get("low"), "low", LOW, preset,
                         AccessMode.EXCLUSIVE, "carriers.low.")
    high = _parse_carrier(carriers_doc.get("high"), "high", HIGH, preset,
                          AccessMode.POOLED, "carriers.high.")

    assoc = doc.get("association") or {}
    p_low = _num(assoc, "initial_low_prob", "association.", 0.5)
    if not 0.0 <= p_low <= 1.0:
        raise InvalidValue("association.initial_low_prob", "must lie in [0, 1]")
    policy = _enum(Policy, assoc.get("policy", "joint"), "association.policy")
    initial_bs = str(assoc.get("initial_bs", "low"))
    if initial_bs not in ("low", "min"):
        raise InvalidValue("association.initial_bs", "must be 'low' or 'min'")
    max_it = assoc.get("max_iterations")
    if max_it is not None:
        max_it = _num(assoc, "max_iterations", "association.", kind=int)
        if max_it < 0:
            raise InvalidValue("association.max_iterations", "must be >= 0")
    min_it = assoc.get("min_iterations")
    if min_it is not None:
        min_it = _num(assoc, "min_iterations", "association.", kind=int)
        if min_it < 0:
            raise InvalidValue("association.min_iterations", "must be >= 0")
    window = _num(assoc, "window", "association.", 200, kind=int)
    if window < 1:
        raise InvalidValue("association.window", "must be >= 1")
    tol = _num(assoc, "tolerance", "association.", 0.01)
    if tol < 0:
        raise InvalidValue("association.tolerance", "must be >= 0")

    cl = doc.get("clusters") or {}
    dflt = ClusterModel()
    clusters = ClusterModel(**{
        f.name: _num(cl, f.name, "clusters.", getattr(dflt, f.name),
                     kind=int if f.name == "subpaths" else float)
        for f in fields(ClusterModel)})
    for f in fields(ClusterModel):
        if getattr(clusters, f.name) < 0:
            raise InvalidValue(f"clusters.{f.name}", "must be >= 0")
    if clusters.subpaths < 1:
        raise InvalidValue("clusters.subpaths", "must be >= 1")

    noise = doc.get("noise") or {}
    run = doc.get("run") or {}
    seed = _num(run, "seed", "run.", 1, kind=int)
    if not 0 <= seed < 2 ** 64:
        raise InvalidValue("run.seed", "must be an unsigned 64-bit integer")
    reps = _num(run, "repetitions", "run.", 20, kind=int)
    if reps < 1:
        raise InvalidValue("run.repetitions", "must be >= 1")

    return ScenarioConfig(
        operators=operators, area_km2=area, bs_density=bs_density, ue_density=ue_density,
        carriers=(low, high), preset=preset,
        noise_figure_db=_num(noise, "figure_db", "noise.", 7.0),
        noise_density_dbm_hz=_num(noise, "density_dbm_hz", "noise.", -174.0),
        initial_low_prob=p_low, policy=policy, initial_bs=initial_bs,
        max_iterations=max_it, min_iterations=min_it, window=window, tolerance=tol,
        clusters=clusters, seed=seed, repetitions=reps)


def _carrier_to_dict(c: CarrierSpec) -> dict:
    return {
        "frequency_ghz": c.frequency_ghz,
        "total_bandwidth_hz": c.total_bandwidth_hz,
        "mode": c.mode.value,
        "bs_tx_power_dbm": c.bs_tx_power_dbm,
        "bs_elements": c.bs_elements,
        "ue_elements": c.ue_elements,
        "pathloss": {"los": [c.los.alpha, c.los.beta, c.los.sigma],
                     "nlos": [c.nlos.alpha, c.nlos.beta, c.nlos.sigma]},
    }


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "operators": cfg.operators,
        "area_km2": cfg.area_km2,
        "bs_density": cfg.bs_density,
        "ue_density": cfg.ue_density,
        "preset": cfg.preset.value if cfg.preset is not None else "custom",
        "carriers": {"low": _carrier_to_dict(cfg.carriers[LOW]),
                     "high": _carrier_to_dict(cfg.carriers[HIGH])},
        "noise": {"figure_db": cfg.noise_figure_db,
                  "density_dbm_hz": cfg.noise_density_dbm_hz},
        "association": {
            "policy": cfg.policy.value,
            "initial_low_prob": cfg.initial_low_prob,
            "initial_bs": cfg.initial_bs,
            "max_iterations": cfg.max_iterations,
            "min_iterations": cfg.min_iterations,
            "window": cfg.window,
            "tolerance": cfg.tolerance,
        },
        "clusters": asdict(cfg.clusters),
        "run": {"seed": cfg.seed, "repetitions": cfg.repetitions},
    }


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if doc is not None and not isinstance(doc, dict):
        raise InvalidValue("<root>", "configuration must be a mapping")
    return build_scenario(doc)


def dump_scenario(cfg: ScenarioConfig, path=None) -> str:
    text = yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
