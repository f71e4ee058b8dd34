"""Experiment harness: networks, data, transforms, coding and cost over trials."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import dequantize, packet_payloads, quantize
from .datagen import (
    CORRELATIONS,
    ArFieldSpec,
    ar2_field,
    ar2_variance,
    epoch_seeds,
    field_covariance,
    sample_field,
    to_fixed_point,
)
from .energy import BROADCAST_POLICIES, E_ELEC, EPS_AMP, RadioCostParams, simulate_epoch_cost, snr
from .errors import ConfigError
from .scheduling import assign_schedule, causal_sets_for
from .topology import RadioModel, random_network
from .transform import Trace, decode_epochs, encode_epochs, final_classes
from .zoo import SCHEMES, build_scheme

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "CSV_COLUMNS",
    "parse_config",
    "load_config",
    "dump_config",
    "trial_data",
    "evaluate",
    "run_lossless",
    "run_lossy",
    "aggregate",
    "emit_csv",
    "format_csv",
]

FILTERS = ("ortho", "smoothing")


@dataclass(frozen=True)
class ExperimentConfig:
    node_count: int = 50
    extent: float = 600.0
    radio: str = "variable"
    radius: float = 150.0
    schemes: tuple[str, ...] = ("haar",)
    filter: str = "ortho"
    levels: int = 1
    correlation: str = "high"
    steps: tuple[float, ...] = (1.0,)
    epochs: int = 50
    raw_bits: int = 12
    e_elec: float = E_ELEC
    eps_amp: float = EPS_AMP
    trials: int = 20
    seed: int = 0
    broadcast_charge: str = "consumers"
    broadcast_use: str = "all"
    grid_size: int = 600
    span: float = 4.0

    def __post_init__(self):
        checks = [
            (self.node_count >= 1, "node_count must be at least 1"),
            (self.extent > 0, "extent must be positive"),
            (self.radio in ("variable", "fixed"), "radio must be 'variable' or 'fixed'"),
            (self.radius > 0, "radius must be positive"),
            (len(self.schemes) > 0, "at least one scheme is required"),
            (self.filter in FILTERS, f"filter must be one of {FILTERS}"),
            (self.levels >= 0, "levels must be non-negative"),
            (self.correlation in CORRELATIONS, f"correlation must be one of {tuple(CORRELATIONS)}"),
            (len(self.steps) > 0 and all(s > 0 for s in self.steps), "steps must be a nonempty list of positive values"),
            (self.epochs >= 1, "epochs must be at least 1"),
            (self.raw_bits >= 1, "raw_bits must be at least 1"),
            (self.e_elec > 0 and self.eps_amp > 0, "energy constants must be positive"),
            (self.trials >= 1, "trials must be at least 1"),
            (self.broadcast_charge in BROADCAST_POLICIES, f"broadcast_charge must be one of {BROADCAST_POLICIES}"),
            (self.broadcast_use in ("all", "childless"), "broadcast_use must be 'all' or 'childless'"),
            (self.grid_size >= 1, "grid_size must be at least 1"),
            (self.span > 0, "span must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}")

    def radio_model(self) -> RadioModel:
        return RadioModel.fixed(self.radius) if self.radio == "fixed" else RadioModel.variable()


_TUPLES = {"schemes": str, "steps": float}


def _coerce(name: str, text: str, line: int):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    try:
        if name in _TUPLES:
            items = [t.strip() for t in text.split(",") if t.strip()]
            return tuple(_TUPLES[name](t) for t in items)
        kind = kinds[name]
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {name}", line) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        values[key] = _coerce(key, val, lineno)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(config: ExperimentConfig) -> str:
    out = []
    for k, v in asdict(config).items():
        if isinstance(v, (tuple, list)):
            v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


CSV_COLUMNS = ("scheme", "trial", "seed", "N", "radio", "correlation", "step", "C_t", "C_r", "ratio", "snr_db")


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    trial: int
    seed: int
    N: int
    radio: str
    correlation: str
    step: float
    C_t: float
    C_r: float
    ratio: float
    snr_db: float

    def as_strings(self) -> list[str]:
        return [self.scheme, str(self.trial), str(self.seed), str(self.N), self.radio, self.correlation,
                repr(self.step), repr(self.C_t), repr(self.C_r), repr(self.ratio), repr(self.snr_db)]


@dataclass
class TrialSetup:
    network: object
    schedule: object
    causal: object
    data: np.ndarray  # (epochs, N) fixed-point measurements
    covariance: np.ndarray
    seed: int


def _trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(master), int(trial)]).generate_state(1)[0])


def trial_data(config: ExperimentConfig, trial: int, correlation: str | None = None) -> TrialSetup:
    """Network, schedule, causal sets and the fixed-point epochs of one trial."""
    corr = correlation or config.correlation
    rho, omega = CORRELATIONS[corr]
    seed = _trial_seed(config.seed, trial)
    net = random_network(config.node_count, config.extent, config.radio_model(), seed=seed)
    sched = assign_schedule(net)
    causal = causal_sets_for(net, sched)
    pos = net.positions[: net.n]
    sigma = ar2_variance(rho, omega)  # std of the 2D field: product of two 1D variances
    corr_key = list(CORRELATIONS).index(corr)
    xs = []
    for s in epoch_seeds(config.seed, config.epochs, trial, corr_key):
        grid = ar2_field(ArFieldSpec(rho, omega, config.grid_size, s))
        xs.append(sample_field(grid, pos, config.extent))
    data = to_fixed_point(np.array(xs), sigma, config.raw_bits, config.span)
    cov = field_covariance(pos, rho, omega, config.grid_size, config.extent)
    return TrialSetup(net, sched, causal, data, cov, seed)


def evaluate(config: ExperimentConfig, setup: TrialSetup, scheme: str, step: float, cache: dict | None = None):
    """Cost report (with SNR filled in) for one scheme and quantizer step."""
    t = build_scheme(scheme, setup.network, setup.schedule, setup.causal,
                     covariance=setup.covariance, levels=config.levels, update=config.filter,
                     broadcast_use=config.broadcast_use)
    trace = Trace()
    y = encode_epochs(t, setup.data, trace)
    payloads = packet_payloads(trace, step, config.epochs, config.raw_bits, cache)
    params = RadioCostParams(config.e_elec, config.eps_amp)
    report = simulate_epoch_cost(setup.network, setup.schedule, t,
                                 {n: [p.bits for p in row] for n, row in payloads.items()},
                                 params, config.broadcast_charge, config.epochs, config.raw_bits)
    yq = y.copy()
    for k, cls in enumerate(final_classes(t)):
        if cls.is_detail:
            yq[:, k] = dequantize(quantize(y[:, k], step), step)
    report.snr_db = snr(setup.data, decode_epochs(t, yq))
    return report


def _run(config: ExperimentConfig, steps: Sequence[float]) -> list[ResultRow]:
    rows = []
    cache: dict = {}
    for trial in range(config.trials):
        setup = trial_data(config, trial)
        for scheme in config.schemes:
            for step in steps:
                rep = evaluate(config, setup, scheme, step, cache)
                rows.append(ResultRow(scheme, trial, setup.seed, config.node_count, config.radio,
                                      config.correlation, float(step), rep.c_t, rep.c_r, rep.ratio, rep.snr_db))
    return rows


def run_lossless(config: ExperimentConfig) -> list[ResultRow]:
    """Cost reduction per trial and scheme with unit-step detail coding."""
    return _run(config, (1.0,))


def run_lossy(config: ExperimentConfig) -> list[ResultRow]:
    """Cost and SNR for every quantizer step in the configuration."""
    return _run(config, tuple(sorted(config.steps)))


def aggregate(rows: Iterable[ResultRow]) -> dict:
    """Mean and sample std of ratio, cost and SNR per (scheme, radio, correlation, step)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.scheme, r.radio, r.correlation, r.step), []).append(r)
    out = {}
    for key, rs in groups.items():
        ratio = np.array([r.ratio for r in rs])
        cost = np.array([r.C_t for r in rs])
        s = np.array([r.snr_db for r in rs])
        out[key] = {
            "trials": len(rs),
            "ratio_mean": float(ratio.mean()),
            "ratio_std": float(ratio.std(ddof=1)) if len(rs) > 1 else 0.0,
            "cost_mean": float(cost.mean()),
            "snr_mean": float(s.mean()),
        }
    return out


def format_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.as_strings())
    return buf.getvalue()


def emit_csv(rows: Iterable[ResultRow], path) -> None:
    Path(path).write_text(format_csv(rows))
