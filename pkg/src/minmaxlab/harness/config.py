"""Run configuration: a YAML key-value tree mirroring RunConfig fields.

A config fully determines a run: problem (with its data seed), method and all
hyperparameters, lookahead wrapper, batch size, pass budget, eval stride, run
seed, normalization, tracked averages, and the execution engine. Serialization
round-trips exactly (floats are written in shortest round-trip form by the
YAML emitter).

``gradient_scale`` picks the convention for stochastic/finite-sum gradients:
"mean" steps with batch-mean gradients, "sum" with batch sums (per-sample
gradients left unnormalized, full batch = dataset sum). The shipped presets
use "sum", which is the convention the benchmark step sizes and lookahead
periods are calibrated against; SVRE always uses mean gradients, as its
snapshot correction is defined for the mean field.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

import yaml

METHODS = (
    "gda-sim",
    "gda-alt",
    "eg",
    "ogda",
    "adam",
    "extra-adam",
    "svre",
    "unroll-y",
    "unroll-xy",
)
PROBLEM_KINDS = ("bilinear2d", "quadratic2d", "stochastic-bilinear")
LA_STYLES = ("none", "joint", "nested", "alternating")


@dataclass
class ProblemConfig:
    kind: str
    n: int | None = None
    d: int | None = None
    data_seed: int = 0
    a: float | None = None
    b: float | None = None
    c: float | None = None

    def validate(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kind == "stochastic-bilinear" and (self.n is None or self.d is None):
            raise ValueError("stochastic-bilinear needs n and d")
        if self.kind == "quadratic2d" and None in (self.a, self.b, self.c):
            raise ValueError("quadratic2d needs coefficients a, b, c")


@dataclass
class MethodConfig:
    name: str
    eta: float | None = None
    eta_theta: float | None = None
    eta_phi: float | None = None
    ratio: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    unroll_steps: int = 0
    unroll_exact: bool = False
    restart_prob: float = 0.0
    gradient_scale: str = "sum"

    def validate(self):
        if self.name not in METHODS:
            raise ValueError(f"unknown method {self.name!r}")
        if self.gradient_scale not in ("sum", "mean"):
            raise ValueError("gradient_scale must be 'sum' or 'mean'")
        if self.eta is None and (self.eta_theta is None or self.eta_phi is None):
            raise ValueError("method needs eta (or eta_theta and eta_phi)")
        if self.ratio < 1:
            raise ValueError("ratio must be >= 1")

    @property
    def eta_theta_value(self) -> float:
        return self.eta if self.eta_theta is None else self.eta_theta

    @property
    def eta_phi_value(self) -> float:
        return self.eta if self.eta_phi is None else self.eta_phi


@dataclass
class LookaheadConfig:
    style: str = "none"
    k: int | None = None
    alpha: float | None = None
    alpha_phi: float | None = None
    k_ss: int | None = None
    alpha_ss: float | None = None
    k_theta: int | None = None  # alternating style only
    k_phi: int | None = None

    def validate(self):
        if self.style not in LA_STYLES:
            raise ValueError(f"unknown lookahead style {self.style!r}")
        if self.style in ("joint", "nested"):
            if self.k is None or self.k < 1:
                raise ValueError("lookahead needs k >= 1")
            if self.alpha is None or not (0.0 <= self.alpha <= 1.0):
                raise ValueError("lookahead needs alpha in [0, 1]")
        if self.style == "nested" and (self.k_ss is None or self.k_ss < self.k):
            raise ValueError("nested lookahead needs k_ss >= k")
        if self.style == "alternating":
            if self.k_theta is None or self.k_phi is None or self.alpha is None:
                raise ValueError("alternating lookahead needs k_theta, k_phi, alpha")

    @property
    def enabled(self) -> bool:
        return self.style != "none"

    @property
    def alpha_phi_value(self):
        return self.alpha if self.alpha_phi is None else self.alpha_phi

    @property
    def alpha_ss_value(self):
        return self.alpha if self.alpha_ss is None else self.alpha_ss


@dataclass
class TrackConfig:
    ema_beta: float | None = None
    ema_source: str = "fast"
    uma: bool = False

    def validate(self):
        if self.ema_source not in ("fast", "slow"):
            raise ValueError("ema_source must be 'fast' or 'slow'")
        if self.ema_beta is not None and not (0.0 < self.ema_beta < 1.0):
            raise ValueError("ema_beta must be in (0, 1)")


@dataclass
class RunConfig:
    problem: ProblemConfig
    method: MethodConfig
    lookahead: LookaheadConfig = field(default_factory=LookaheadConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    batch_size: int | str = "full"
    budget_passes: float = 1000.0
    eval_stride_passes: float = 10.0
    run_seed: int = 0
    normalize: bool = True
    divergence_cutoff: float = 1e30
    engine: str = "auto"
    preset_name: str | None = None

    def validate(self):
        self.problem.validate()
        self.method.validate()
        self.lookahead.validate()
        self.track.validate()
        if self.batch_size != "full":
            if not isinstance(self.batch_size, int) or self.batch_size < 1:
                raise ValueError("batch_size must be a positive int or 'full'")
            if self.problem.kind != "stochastic-bilinear":
                raise ValueError(
                    f"{self.problem.kind} has no samples to draw minibatches from"
                )
        if self.method.name == "svre":
            if self.problem.kind != "stochastic-bilinear":
                raise ValueError("SVRE requires a finite-sum problem")
        if self.method.name in ("unroll-y", "unroll-xy") and self.batch_size != "full":
            raise ValueError("unrolled steps are defined here for full batches only")
        if self.budget_passes < 0:
            raise ValueError("budget_passes must be >= 0")
        if self.eval_stride_passes <= 0:
            raise ValueError("eval_stride_passes must be > 0")
        if self.engine not in ("auto", "kernel", "python"):
            raise ValueError("engine must be auto, kernel or python")
        return self

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = copy.deepcopy(data)
        cfg = cls(
            problem=ProblemConfig(**data.pop("problem")),
            method=MethodConfig(**data.pop("method")),
            lookahead=LookaheadConfig(**data.pop("lookahead", {})),
            track=TrackConfig(**data.pop("track", {})),
            **data,
        )
        return cfg.validate()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        return cls.from_dict(yaml.safe_load(text))

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def with_seed_offset(self, i: int) -> "RunConfig":
        """Seed variant i: fresh data and fresh initialization."""
        out = RunConfig.from_dict(self.to_dict())
        out.problem.data_seed = self.problem.data_seed + i
        out.run_seed = self.run_seed + i
        return out


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.from_yaml(fh.read())


def save_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_yaml())


# ---------------------------------------------------------------------------
# Presets: the benchmark settings shipped with the package.
# ---------------------------------------------------------------------------

_SBG = {"kind": "stochastic-bilinear", "n": 100, "d": 100, "data_seed": 1234}


def _sbg(method: dict, batch, lookahead=None, track=None, budget=20000.0) -> dict:
    out = {
        "problem": dict(_SBG),
        "method": method,
        "batch_size": batch,
        "budget_passes": budget,
        "run_seed": 7,
    }
    if lookahead:
        out["lookahead"] = lookahead
    if track:
        out["track"] = track
    return out


_PRESETS: dict[str, dict] = {
    # 2D sanity problems
    "bilinear2d-gda-sim": {
        "problem": {"kind": "bilinear2d"},
        "method": {"name": "gda-sim", "eta": 0.3},
        "budget_passes": 100.0,
        "eval_stride_passes": 1.0,
        "run_seed": 7,
    },
    # full-batch comparison at a shared step size
    "fb-gda": _sbg({"name": "gda-sim", "eta": 0.3}, "full"),
    "fb-unroll-y": _sbg({"name": "unroll-y", "eta": 0.3, "unroll_steps": 6}, "full"),
    "fb-unroll-xy": _sbg({"name": "unroll-xy", "eta": 0.3, "unroll_steps": 6}, "full"),
    "fb-lagda-a05": _sbg(
        {"name": "gda-sim", "eta": 0.3}, "full",
        {"style": "joint", "k": 6, "alpha": 0.5},
    ),
    "fb-lagda-a04": _sbg(
        {"name": "gda-sim", "eta": 0.3}, "full",
        {"style": "joint", "k": 6, "alpha": 0.4},
    ),
    "fb-eg": _sbg({"name": "eg", "eta": 0.3}, "full"),
    "fb-laeg": _sbg(
        {"name": "eg", "eta": 0.3}, "full", {"style": "joint", "k": 6, "alpha": 0.5}
    ),
    "fb-ogda": _sbg({"name": "ogda", "eta": 0.3}, "full"),
    "fb-laogda": _sbg(
        {"name": "ogda", "eta": 0.3}, "full", {"style": "joint", "k": 6, "alpha": 0.5}
    ),
    # full-batch rows of the per-batch-size hyperparameter table
    "sbg-full-gda": _sbg({"name": "gda-sim", "eta": 0.3}, "full"),
    "sbg-full-lagda": _sbg(
        {"name": "gda-sim", "eta": 0.2}, "full",
        {"style": "joint", "k": 15, "alpha": 0.3},
    ),
    "sbg-full-eg": _sbg({"name": "eg", "eta": 0.8}, "full"),
    # the table has no lookahead-extragradient row; k here minimizes the
    # operator spectral radius over small k at the table's extragradient eta
    "sbg-full-laeg": _sbg(
        {"name": "eg", "eta": 0.8}, "full", {"style": "joint", "k": 3, "alpha": 0.5}
    ),
    "sbg-full-adam": _sbg({"name": "adam", "eta": 0.005, "beta1": -0.9}, "full"),
    "sbg-full-extraadam": _sbg(
        {"name": "extra-adam", "eta": 0.02, "beta1": -0.6}, "full"
    ),
    # batch size 64
    "sbg-b64-adam": _sbg({"name": "adam", "eta": 0.005, "beta1": -0.6}, 64),
    "sbg-b64-extraadam": _sbg({"name": "extra-adam", "eta": 0.01, "beta1": -0.2}, 64),
    "sbg-b64-eg": _sbg({"name": "eg", "eta": 0.005}, 64),
    "sbg-b64-lagda": _sbg(
        {"name": "gda-alt", "eta": 0.005}, 64,
        {"style": "joint", "k": 450, "alpha": 0.3},
    ),
    # batch size 16
    "sbg-b16-adam": _sbg({"name": "adam", "eta": 0.005, "beta1": -0.3}, 16),
    "sbg-b16-extraadam": _sbg({"name": "extra-adam", "eta": 0.005, "beta1": 0.0}, 16),
    "sbg-b16-eg": _sbg({"name": "eg", "eta": 0.005}, 16),
    "sbg-b16-lagda": _sbg(
        {"name": "gda-alt", "eta": 0.01}, 16,
        {"style": "joint", "k": 1500, "alpha": 0.3},
    ),
    "sbg-b16-gda": _sbg({"name": "gda-alt", "eta": 0.01}, 16),
    # batch size 1
    "sbg-b1-adam": _sbg({"name": "adam", "eta": 0.005, "beta1": 0.0}, 1),
    "sbg-b1-extraadam": _sbg({"name": "extra-adam", "eta": 0.005, "beta1": 0.0}, 1),
    "sbg-b1-eg": _sbg({"name": "eg", "eta": 0.005}, 1),
    "sbg-b1-lagda": _sbg(
        {"name": "gda-alt", "eta": 0.05}, 1,
        {"style": "joint", "k": 2450, "alpha": 0.3},
    ),
    "sbg-b1-gda": _sbg({"name": "gda-alt", "eta": 0.05}, 1),
    "sbg-b1-svre": _sbg({"name": "svre", "eta": 0.1, "restart_prob": 0.1}, 1),
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str) -> RunConfig:
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    cfg = RunConfig.from_dict(copy.deepcopy(_PRESETS[name]))
    cfg.preset_name = name
    return cfg
