"""Experiment configuration: INI-style text, validation and regime presets.

Keys are grouped in ``[section]`` blocks with one ``key = value`` per line.
Unknown sections or keys are errors. See the README for the full key table.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

from .backend.noise import DEFAULT_DURATIONS, DEFAULT_READOUT, DEVICE_T1, DEVICE_T2, NoiseModel
from .model import BathSpec, DissipatorSpec, DriveSpec, fermi_factor
from .oracle import TimeGrid
from .relaxation import RelaxationSpec, TauDomainError, classify_regime, tau_q
from .vqs import MODES, AnsatzSpec, SolverConfig

ENGINES = ("oracle", "qsd", "vqs")
REGIMES = ("i", "ii", "iii", "none")
# omega * tau for each preset; (iii) is the resonance omega = 1 / tau_q(beta_E)
REGIME_PRODUCT = {"i": 100.0, "ii": 0.01, "iii": 1.0}
REGIME_LABEL = {"i": "dc_limit", "ii": "fast_field", "iii": "intermediate"}
DEFAULT_Q_LIST = (0.5, 0.75, 1.0, 1.25, 1.5)
# desk-scale trajectory count for the shot-based noisy backend
NOISY_N_TRAJ = 20


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _float(s):
    return float(s)


def _int(s):
    return int(s, 0) if isinstance(s, str) else int(s)


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional_float(s):
    return None if str(s).strip().lower() in ("", "auto", "none") else float(s)


def _float_list(s):
    return tuple(float(x) for x in str(s).replace(",", " ").split())


def _str(s):
    return str(s).strip()


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "drive": {
        "protocol": (_str, "oscillatory"),
        "B_DC": (_float, 2.0),
        "B_AC": (_float, 0.5),
        "h1": (_float, 1.0),
        "h2": (_float, 3.0),
        "omega": (_optional_float, None),
        "regime": (_str, "iii"),
        "triangular": (_bool, False),
    },
    "bath": {
        "T_env": (_float, 10.0),
        "delta_eps": (_optional_float, None),
        "E_offset": (_optional_float, None),
    },
    "dissipator": {
        "J": (_optional_float, 1.0),
        "J1": (_optional_float, None),
        "J2": (_optional_float, None),
        "f": (_optional_float, None),
        "literal_noise_coupling": (_bool, False),
    },
    "relaxation": {
        "tau0": (_float, 1.0),
        "E_A": (_float, 1.0),
        "q": (_float, 1.0),
        "q_list": (_float_list, DEFAULT_Q_LIST),
    },
    "grid": {
        "t0": (_float, 0.0),
        "t1": (_float, 15.0),
        "dt": (_float, 0.15),
    },
    "run": {
        "engine": (_str, "vqs"),
        "backend_mode": (_str, "analytic"),
        "n_traj": (_int, 1000),
        "shots": (_int, 8192),
        "gamma": (_optional_float, None),
        "master_seed": (_int, 1234),
        "workers": (_int, 1),
        "chunk_size": (_int, 500),
        "oracle_refine": (_int, 100),
        "parameter_trace": (_bool, False),
    },
    "ansatz": {
        "layers": (_int, 3),
        "generators": (_str, "Z X Z"),
        "regularization": (_float, 1e-6),
        "substeps": (_int, 4),
    },
    "noise": {
        "T1": (_float, DEVICE_T1),
        "T2": (_float, DEVICE_T2),
        "readout_p10": (_float, DEFAULT_READOUT),
        "readout_p01": (_float, DEFAULT_READOUT),
        **{f"duration_{k}": (_float, v) for k, v in DEFAULT_DURATIONS.items()},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    drive: DriveSpec
    diss: DissipatorSpec
    bath: BathSpec
    relaxation: RelaxationSpec
    grid: TimeGrid
    n_traj: int = 1000
    gamma: float = 1.0 / 0.15
    engine: str = "vqs"
    backend_mode: str = "analytic"
    shots: int = 8192
    master_seed: int = 1234
    noise_model: NoiseModel | None = None
    q_list: tuple[float, ...] = DEFAULT_Q_LIST
    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    regime: str = "iii"
    workers: int = 1
    chunk_size: int = 500
    oracle_refine: int = 100
    parameter_trace: bool = False
    raw: tuple = field(default=(), compare=False, repr=False)

    @property
    def shots_or_none(self) -> int | None:
        # the ideal Hadamard mode evaluates exact expectations
        return None if self.backend_mode == "hadamard-ideal" else self.shots

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("raw")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def with_q(self, q: float) -> "ExperimentConfig":
        """Same experiment with nonadditivity ``q``; a regime preset re-derives omega."""
        raw = _raw_dict(self.raw)
        raw.setdefault("relaxation", {})["q"] = repr(float(q))
        return build_config(raw)


def _raw_dict(raw) -> dict[str, dict[str, str]]:
    return {sec: dict(items) for sec, items in raw}


def _freeze(raw: Mapping[str, Mapping[str, str]]) -> tuple:
    return tuple((sec, tuple(sorted(items.items()))) for sec, items in sorted(raw.items()))


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive
    cp.read_string(text)
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def read_config(path) -> dict[str, dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def apply_overrides(raw: Mapping[str, Mapping[str, str]], overrides: Iterable[str]):
    """``section.key=value`` assignments layered over a parsed config."""
    out = {sec: dict(items) for sec, items in raw.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError([f"override {item!r} is not of the form section.key=value"])
        out.setdefault(sec, {})[name] = value.strip()
    return out


def _typed(raw, errors) -> dict[str, dict]:
    typed = {}
    for sec in raw:
        if sec not in SCHEMA:
            errors.append(f"unknown section [{sec}]")
    for sec, keys in SCHEMA.items():
        given = raw.get(sec, {})
        for k in given:
            if k not in keys:
                errors.append(f"[{sec}] unknown key {k!r}")
        vals = {}
        for k, (parse, default) in keys.items():
            if k in given:
                try:
                    vals[k] = parse(given[k])
                except ValueError as exc:
                    errors.append(f"[{sec}] {k}: cannot parse {given[k]!r} ({exc})")
                    vals[k] = default
            else:
                vals[k] = default
        typed[sec] = vals
    return typed


def regime_omega(regime: str, tau: float) -> float:
    return REGIME_PRODUCT[regime] / tau


def _build(raw: Mapping[str, Mapping[str, str]]) -> tuple[ExperimentConfig | None, list[str]]:
    errors: list[str] = []
    v = _typed(raw, errors)
    d, b, s, rl, g, r, a, nz = (v[k] for k in ("drive", "bath", "dissipator", "relaxation",
                                               "grid", "run", "ansatz", "noise"))

    def attempt(label, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            errors.append(f"[{label}] {exc}")
            return None

    relax = attempt("relaxation", lambda: RelaxationSpec(rl["tau0"], rl["E_A"], rl["q"]))
    bath = None
    if not b["T_env"] > 0:
        errors.append("[bath] T_env > 0 violated")
    regime = d["regime"]
    if regime not in REGIMES:
        errors.append(f"[drive] regime must be one of {REGIMES}, got {regime!r}")
    omega = d["omega"]
    if regime in REGIME_PRODUCT:
        if omega is not None:
            errors.append("[drive] omega is derived from the regime preset; set regime = none "
                          "to give omega explicitly")
        if relax is not None and b["T_env"] > 0:
            try:
                omega = regime_omega(regime, tau_q(relax, 1.0 / b["T_env"]))
            except TauDomainError as exc:
                errors.append(f"[relaxation] {exc}")
    elif regime == "none" and omega is None:
        errors.append("[drive] omega is required when regime = none")
    drive = None
    if omega is not None:
        drive = attempt("drive", lambda: DriveSpec(d["protocol"], d["B_DC"], d["B_AC"], d["h1"],
                                                   d["h2"], omega, d["triangular"]))
    if drive is not None and b["T_env"] > 0:
        gap = b["delta_eps"] if b["delta_eps"] is not None else 2.0 * drive.B_DC
        e_off = b["E_offset"] if b["E_offset"] is not None else gap
        bath = attempt("bath", lambda: BathSpec(b["T_env"], gap, e_off))
    diss = None
    f = s["f"]
    if f is None and bath is not None:
        f = fermi_factor(bath)
        if f > 0.5:
            errors.append(f"[bath] E_offset gives f = {f:.6g} outside f in [0, 0.5]")
    if f is not None and not 0.0 <= f <= 0.5:
        errors.append(f"[dissipator] f in [0, 0.5] violated (f = {f})")
    elif f is not None:
        J1 = s["J1"] if s["J1"] is not None else s["J"]
        J2 = s["J2"] if s["J2"] is not None else s["J"]
        if J1 is None or J2 is None:
            errors.append("[dissipator] give J or both J1 and J2")
        else:
            diss = attempt("dissipator", lambda: DissipatorSpec(J1, J2, f, s["literal_noise_coupling"]))
    grid = attempt("grid", lambda: TimeGrid(g["t0"], g["t1"], g["dt"]))
    if r["engine"] not in ENGINES:
        errors.append(f"[run] engine must be one of {ENGINES}, got {r['engine']!r}")
    if r["backend_mode"] not in MODES:
        errors.append(f"[run] backend_mode must be one of {MODES}, got {r['backend_mode']!r}")
    if "n_traj" not in raw.get("run", {}) and r["backend_mode"] == "hadamard-noisy":
        r["n_traj"] = NOISY_N_TRAJ
    if r["n_traj"] < 1:
        errors.append("[run] n_traj >= 1 violated")
    if r["shots"] < 1:
        errors.append("[run] shots >= 1 violated")
    if r["workers"] < 1:
        errors.append("[run] workers >= 1 violated")
    if r["chunk_size"] < 1:
        errors.append("[run] chunk_size >= 1 violated")
    if r["oracle_refine"] < 1:
        errors.append("[run] oracle_refine >= 1 violated")
    if not 0 <= r["master_seed"] < 2 ** 64:
        errors.append("[run] master_seed must be a 64-bit unsigned integer")
    gamma = r["gamma"]
    if gamma is None and grid is not None:
        gamma = 1.0 / grid.dt
    if gamma is not None and not gamma > 0:
        errors.append("[run] gamma > 0 violated")
    if not rl["q_list"]:
        errors.append("[relaxation] q_list must be nonempty")
    ansatz = attempt("ansatz", lambda: AnsatzSpec(a["layers"], tuple(a["generators"].split())))
    solver = attempt("ansatz", lambda: SolverConfig(a["regularization"], a["substeps"]))
    noise = None
    if r["backend_mode"] == "hadamard-noisy":
        durations = {k[len("duration_"):]: nz[k] for k in nz if k.startswith("duration_")}
        if any(x < 0 for x in durations.values()):
            errors.append("[noise] gate durations must be >= 0")
        pair = (nz["readout_p10"], nz["readout_p01"])
        noise = attempt("noise", lambda: NoiseModel(nz["T1"], nz["T2"], gate_durations=durations,
                                                   readout=(pair, pair)))
    if errors:
        return None, errors
    cfg = ExperimentConfig(
        drive=drive, diss=diss, bath=bath, relaxation=relax, grid=grid, n_traj=r["n_traj"],
        gamma=gamma, engine=r["engine"], backend_mode=r["backend_mode"], shots=r["shots"],
        master_seed=r["master_seed"], noise_model=noise, q_list=rl["q_list"], ansatz=ansatz,
        solver=solver, regime=regime, workers=r["workers"], chunk_size=r["chunk_size"],
        oracle_refine=r["oracle_refine"], parameter_trace=r["parameter_trace"], raw=_freeze(raw))
    if regime in REGIME_LABEL:
        tau = tau_q(relax, bath.beta)
        label = classify_regime(tau, drive.omega)
        if label != REGIME_LABEL[regime]:
            return None, [f"[drive] preset ({regime}) classifies as {label}"]
    return cfg, []


def validate_config(raw: Mapping[str, Mapping[str, str]]) -> list[str]:
    """All violated constraints of a parsed config; empty when it is valid."""
    return _build(raw)[1]


def build_config(raw: Mapping[str, Mapping[str, str]]) -> ExperimentConfig:
    cfg, errors = _build(raw)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    return build_config(apply_overrides(read_config(path), overrides))


def default_config(**sections) -> ExperimentConfig:
    """Defaults with optional ``section={key: value}`` overrides (values as text or numbers)."""
    raw = {sec: {k: str(v) for k, v in kv.items()} for sec, kv in sections.items()}
    return build_config(raw)


def with_updates(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    raw = _raw_dict(cfg.raw)
    for sec, kv in sections.items():
        raw.setdefault(sec, {}).update({k: str(v) for k, v in kv.items()})
    return build_config(raw)


def render_config(raw: Mapping[str, Mapping[str, str]]) -> str:
    lines = []
    for sec, items in raw.items():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)


__all__ = [
    "ConfigError", "ExperimentConfig", "SCHEMA", "apply_overrides", "build_config",
    "default_config", "load_config", "parse_config_text", "read_config", "regime_omega",
    "render_config", "validate_config", "with_updates",
]
