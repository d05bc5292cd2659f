"""Named experiment configurations, each runnable with only a seed."""
from __future__ import annotations

from dataclasses import dataclass, field

from .trainer import TrainConfig


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    problem: dict
    train: TrainConfig
    tol: float = 1e-6
    notes: str = ""
    sweep: dict = field(default_factory=dict)  # parameter name -> grid
    in_ci: bool = True

    def to_json(self) -> dict:
        return {"name": self.name, "problem": self.problem, "train": self.train.to_json(), "tol": self.tol,
                "notes": self.notes, "sweep": self.sweep, "in_ci": self.in_ci}


def _two_layer(d: int, k: int | None = None, teacher="identity", dist=None, activation="relu") -> dict:
    return {"student": {"dims": [d, k or d], "activation": activation, "second_layer_fixed": True},
            "teacher": teacher, "distribution": dist or {"kind": "gaussian"}}


_DESK = TrainConfig(runs=20, refine=True)
_FULL = TrainConfig(runs=100, refine=True, max_steps=100000)

PRESETS: dict[str, ExperimentPreset] = {}


def _add(p: ExperimentPreset):
    PRESETS[p.name] = p


_add(ExperimentPreset("identity-d6", _two_layer(6), _DESK,
                      notes="V = I_6, N(0, I_6); non-global endpoints expected near Delta S_5 x Delta S_1"))
_add(ExperimentPreset("identity-d20", _two_layer(20), _FULL, in_ci=False,
                      notes="V = I_20, N(0, I_20), 100 runs; full-scale configuration"))
for d in (6, 20):
    _add(ExperimentPreset(f"block2-d{d}", _two_layer(d, teacher={"block_scaled": [1, 2]}),
                          _DESK if d == 6 else _FULL, in_ci=d == 6,
                          notes="V = I_{d/2} + 2 I_{d/2} (direct sum), N(0, I)"))
    _add(ExperimentPreset(f"cov2-d{d}", _two_layer(d, dist={"kind": "gaussian", "cov": {"block_scaled": [1, 2]}}),
                          TrainConfig(runs=20) if d == 6 else TrainConfig(runs=100, max_steps=100000),
                          in_ci=d == 6, notes="V = I, covariance I_{d/2} + 2 I_{d/2}; MC loss only, no refinement"))
for d in (8, 20):
    _add(ExperimentPreset(f"block4-d{d}", _two_layer(d, teacher={"block_scaled": [1, 2, 3, 4]}),
                          _DESK if d == 8 else _FULL, in_ci=d == 8,
                          notes="V = I_{d/4} + 2 I_{d/4} + 3 I_{d/4} + 4 I_{d/4}, N(0, I)"))
    _add(ExperimentPreset(f"cov4-d{d}",
                          _two_layer(d, dist={"kind": "gaussian", "cov": {"block_scaled": [1, 2, 3, 4]}}),
                          TrainConfig(runs=20) if d == 8 else TrainConfig(runs=100, max_steps=100000),
                          in_ci=d == 8, notes="V = I, covariance with four scaled blocks; MC loss only"))
_add(ExperimentPreset("uniform-shift", _two_layer(6, dist={"kind": "uniform_box", "lo": -1.0, "hi": 1.0}),
                      _DESK, sweep={"C": [0.0, 0.25, 0.5, 0.75, 1.0]},
                      notes="inputs uniform on [-1+C, 1+C]^6; isotropy of endpoints shrinks as C grows"))
_add(ExperimentPreset("deep-4", {"student": {"dims": [6, 6, 6, 6, 1], "activation": "relu",
                                             "second_layer_fixed": False},
                                 "teacher": "identity", "distribution": {"kind": "gaussian"}},
                      TrainConfig(runs=5, max_steps=20000),
                      notes="three hidden ReLU layers of width 6, teacher (I, I, I, 1^T); bottom layer classified"))
_add(ExperimentPreset("leaky-d6", _two_layer(6, activation={"kind": "leaky_relu", "slope": 0.01}),
                      TrainConfig(runs=20), notes="Leaky-ReLU, slope 0.01"))
_add(ExperimentPreset("softplus-d6", _two_layer(6, activation={"kind": "softplus", "beta": 1.0}),
                      TrainConfig(runs=20), notes="Softplus, beta = 1"))
_add(ExperimentPreset("overspec-d6", _two_layer(6, k=7), _DESK,
                      notes="k = 7 hidden units for a d = 6 identity teacher"))
_add(ExperimentPreset("identity-d20-k22", _two_layer(20, k=22), _FULL, in_ci=False,
                      notes="over-parametrized full-scale run"))


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}") from None


def problem_with_shift(problem: dict, C: float) -> dict:
    """Copy of a uniform-box problem with the box moved to [-1 + C, 1 + C]."""
    out = {**problem, "distribution": {**problem["distribution"], "lo": -1.0 + C, "hi": 1.0 + C}}
    return out
