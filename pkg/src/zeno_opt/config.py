"""Flat ``key = value`` experiment configs and the frozen figure presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .bath import BathParams, SpectralDensity
from .dynamics import ModelKind, ModelSpec, check_step
from .measurement import InitialState, ProjectorChoice

METHODS = ("auto", "exact", "redfield")

# key -> converter; order is the echo order in manifests
_KEYS = {
    "model": str,
    "epsilon": float,
    "delta": float,
    "J": float,
    "G": float,
    "s_ohmic": float,
    "omega_c": float,
    "beta": float,
    "theta": float,
    "phi": float,
    "bloch": str,
    "tau_min": float,
    "tau_max": float,
    "tau_steps": int,
    "dt": float,
    "grid": int,
    "method": str,
    "output": str,
}
REQUIRED = ("model", "epsilon", "G", "omega_c", "tau_min", "tau_max")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""

    def __init__(self, key: str, rule: str):
        super().__init__(f"{key}: {rule}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelKind
    epsilon: float
    G: float
    omega_c: float
    tau_min: float
    tau_max: float
    tau_steps: int = 100
    delta: float = 0.0
    J: float = 0.5
    s_ohmic: float = 1.0
    beta: float = math.nan
    theta: float = 0.0
    phi: float = 0.0
    dt: float = math.nan
    grid: int = 64
    method: str = "auto"
    output: str = ""

    def model_spec(self) -> ModelSpec:
        bath = BathParams(SpectralDensity(self.G, self.s_ohmic, self.omega_c), self.beta)
        return ModelSpec(self.model, self.epsilon, bath, self.delta, self.J)

    @property
    def initial(self) -> InitialState:
        return InitialState(self.theta, self.phi)

    @property
    def taus(self) -> np.ndarray:
        return np.linspace(self.tau_min, self.tau_max, self.tau_steps)

    def choice(self) -> ProjectorChoice:
        return ProjectorChoice.default_for(self.model_spec(), self.grid)

    def echo(self) -> list[tuple[str, str]]:
        """Stable ``(key, value)`` pairs for manifests; floats use ``repr``."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ModelKind):
                v = v.value
            out.append((f.name, repr(v) if isinstance(v, float) else str(v)))
        return out


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        yield lineno, key, value


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, object] = {}
    for lineno, key, value in _lines(text):
        if key not in _KEYS:
            raise ConfigError(key, f"unknown key (line {lineno})")
        if key in raw:
            raise ConfigError(key, f"given twice (line {lineno})")
        try:
            raw[key] = _KEYS[key](value)
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r} as {_KEYS[key].__name__}") from None
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    return build_config(**raw)


def build_config(**kw) -> ExperimentConfig:
    """Validate and default a config given as keyword arguments."""
    try:
        kw["model"] = ModelKind(kw["model"])
    except ValueError:
        kinds = ", ".join(k.value for k in ModelKind)
        raise ConfigError("model", f"must be one of {kinds}") from None

    bloch = kw.pop("bloch", None)
    has_angles = "theta" in kw or "phi" in kw
    if bloch is not None:
        if has_angles:
            raise ConfigError("bloch", "ambiguous initial state: give either theta/phi or bloch")
        if kw["model"].is_qubit is False:
            raise ConfigError("bloch", "Bloch vectors describe qubit models only")
        try:
            n = np.array([float(x) for x in str(bloch).replace(",", " ").split()])
        except ValueError:
            raise ConfigError("bloch", f"cannot parse {bloch!r}") from None
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1) > 1e-9:
            raise ConfigError("bloch", "must be three numbers forming a unit vector")
        init = InitialState.from_bloch(n)
        kw["theta"], kw["phi"] = init.theta, init.phi
    if not 0 <= kw.get("theta", 0.0) <= math.pi:
        raise ConfigError("theta", "must lie in [0, pi]")
    kw["phi"] = kw.get("phi", 0.0) % (2 * math.pi)

    if not kw["tau_min"] > 0:
        raise ConfigError("tau_min", "must be > 0")
    if not kw["tau_max"] > kw["tau_min"]:
        raise ConfigError("tau_max", "must exceed tau_min")
    if kw.get("tau_steps", 2) < 2:
        raise ConfigError("tau_steps", "must be >= 2")
    if kw.get("grid", 64) < 2:
        raise ConfigError("grid", "must be >= 2")
    if kw.get("method", "auto") not in METHODS:
        raise ConfigError("method", f"must be one of {', '.join(METHODS)}")

    for key, lower in (("G", 0.0), ("s_ohmic", None), ("omega_c", None), ("beta", None)):
        v = kw.get(key, 1.0)
        if lower is None and not v > 0:
            raise ConfigError(key, "must be > 0")
        if lower is not None and not v >= lower:
            raise ConfigError(key, "must be >= 0")

    eps, delta = abs(kw["epsilon"]), abs(kw.get("delta", 0.0))
    if "beta" not in kw:
        # low-temperature convention when the temperature is not given
        if max(eps, delta) == 0:
            raise ConfigError("beta", "required when epsilon and delta are both 0")
        kw["beta"] = 100.0 / (eps if eps > 0 else delta)
    if "dt" not in kw:
        kw["dt"] = 0.1 / max(eps, delta, kw["omega_c"])

    cfg = ExperimentConfig(**kw)
    try:
        model = cfg.model_spec()
    except ValueError as exc:
        raise ConfigError(_guess_key(str(exc)), str(exc)) from None
    try:
        check_step(model, cfg.dt)
    except ValueError as exc:
        raise ConfigError("dt", str(exc)) from None
    return cfg


def _guess_key(msg: str) -> str:
    for key in ("delta", "J"):
        if f" {key} " in f" {msg} ":
            return key
    return "model"


# ---------------------------------------------------------------------------
# Presets. Bath and model parameters are fixed per figure; tau ranges are
# chosen conventions.

_DEPHASING = dict(model="pure_dephasing", epsilon=1.0, G=0.1, omega_c=10.0, beta=0.5,
                  tau_min=0.05, tau_max=3.0, tau_steps=120)
_SPIN_BOSON = dict(model="spin_boson", epsilon=2.0, delta=2.0, G=0.01, omega_c=10.0,
                   theta=math.pi / 2, phi=0.0, tau_min=0.05, tau_max=5.0, tau_steps=100)
_LARGE_SPIN = dict(J=1.0, epsilon=2.0, G=0.01, omega_c=50.0, beta=1.0,
                   theta=math.pi / 2, phi=0.0, tau_min=0.02, tau_max=3.0, tau_steps=150)

PRESETS: dict[str, dict] = {
    "fig1": dict(model="population_decay", epsilon=1.0, G=0.01, omega_c=50.0,
                 theta=0.0, phi=0.0, tau_min=0.05, tau_max=25.0, tau_steps=250),
    "fig2a": dict(_DEPHASING, bloch="1 0 0"),
    "fig2b": dict(_DEPHASING, bloch=" ".join([repr(1 / math.sqrt(3))] * 3)),
    "fig3a": dict(_DEPHASING, bloch=f"{1 / math.sqrt(10)!r} 0 {math.sqrt(0.9)!r}"),
    "fig3b": dict(_DEPHASING, bloch=f"{1 / math.sqrt(10)!r} 0 {math.sqrt(0.9)!r}"),
    "fig4a": dict(_SPIN_BOSON),
    "fig4b": dict(_SPIN_BOSON, tau_min=0.05, tau_max=20.0, tau_steps=200),
    "fig5a": dict(_SPIN_BOSON, s_ohmic=0.8),
    "fig5b": dict(_SPIN_BOSON, s_ohmic=2.0),
    "fig5c": dict(_SPIN_BOSON, G=0.025, epsilon=6.0, delta=2.0),
    "fig5d": dict(_SPIN_BOSON, G=0.025, epsilon=2.0, delta=6.0),
    "fig6a": dict(_LARGE_SPIN, model="large_spin_dephasing"),
    "fig6b": dict(_LARGE_SPIN, model="large_spin", delta=2.0),
}


def preset_config(name: str, output: str = "") -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg = build_config(**PRESETS[name])
    return replace(cfg, output=output) if output else cfg
