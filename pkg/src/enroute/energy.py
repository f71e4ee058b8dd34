"""First-order radio energy model and gathering-cost accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AccountingError, InvalidArgument, UndefinedSignal

E_ELEC = 50e-9  # J/bit, electronics
EPS_AMP = 100e-12  # J/bit/m^2, amplifier

__all__ = [
    "E_ELEC",
    "EPS_AMP",
    "RadioCostParams",
    "LinkEvent",
    "CostReport",
    "tx_cost",
    "rx_cost",
    "raw_baseline_cost",
    "simulate_epoch_cost",
    "snr",
    "BROADCAST_POLICIES",
]

BROADCAST_POLICIES = ("consumers", "all", "none")


@dataclass(frozen=True)
class RadioCostParams:
    e_elec: float = E_ELEC
    eps_amp: float = EPS_AMP

    def __post_init__(self):
        if not (self.e_elec > 0 and self.eps_amp > 0):
            raise InvalidArgument("radio energy constants must be positive")


def tx_cost(k: float, d: float, params: RadioCostParams = RadioCostParams()) -> float:
    """Energy to send ``k`` bits over ``d`` metres."""
    if k < 0 or d < 0:
        raise InvalidArgument("bit count and distance must be non-negative")
    return params.e_elec * k + params.eps_amp * k * d * d


def rx_cost(k: float, params: RadioCostParams = RadioCostParams()) -> float:
    if k < 0:
        raise InvalidArgument("bit count must be non-negative")
    return params.e_elec * k


@dataclass(frozen=True)
class LinkEvent:
    sender: int
    receivers: tuple[int, ...]
    bits: int
    distance: float
    energy: float


@dataclass
class CostReport:
    events: list[LinkEvent]
    c_t: float
    c_r: float
    node_bits: dict[int, int] = field(default_factory=dict)
    snr_db: float | None = None

    @property
    def ratio(self) -> float:
        return (self.c_r - self.c_t) / self.c_r


def _hop_distance(network, v: int) -> float:
    return network.link_distance(v)


def raw_baseline_cost(network, params: RadioCostParams = RadioCostParams(), epochs: int = 50, raw_bits: int = 12) -> float:
    """Every node's ``epochs * raw_bits`` bits relayed hop by hop to the sink."""
    bits = epochs * raw_bits
    total = 0.0
    for k in range(network.n):
        v = k
        while v != network.sink:
            p = int(network.parent[v])
            total += tx_cost(bits, _hop_distance(network, v), params)
            if p != network.sink:
                total += rx_cost(bits, params)
            v = p
    return total


def _listeners(transform, policy: str) -> dict[int, tuple[int, ...]]:
    net = transform.network
    out: dict[int, list[int]] = {m: [] for m in range(net.n)}
    if policy == "consumers":
        for loc in transform.locals:
            for m in loc.used_sources():
                out[m].append(loc.node)
    elif policy == "all":
        for m, l in net.broadcast:
            out[m].append(l)
    elif policy != "none":
        raise InvalidArgument(f"unknown broadcast charge policy {policy!r}")
    return {m: tuple(sorted(set(v))) for m, v in out.items()}


def simulate_epoch_cost(
    network,
    schedule,
    transform,
    payloads: Mapping[int, Sequence[int] | int],
    params: RadioCostParams = RadioCostParams(),
    policy: str = "consumers",
    epochs: int = 50,
    raw_bits: int = 12,
) -> CostReport:
    """Total energy of one gathering round given the bits in every packet.

    ``payloads[n]`` is the bit count of the packet node ``n`` sends to its
    parent (its own coefficient stream plus everything it relays), either
    as a total or as per-entry counts.  The parent and, depending on
    ``policy``, broadcast listeners pay reception; the sink receives for free.
    """
    listen = _listeners(transform, policy)
    events = []
    node_bits = {}
    for n in schedule.order:
        if n not in payloads:
            raise AccountingError(f"no payload for node {n}")
        entry = payloads[n]
        bits = int(entry) if np.isscalar(entry) else int(np.sum(entry))
        if bits < 0:
            raise AccountingError(f"negative payload at node {n}")
        node_bits[n] = bits
        p = int(network.parent[n])
        d = _hop_distance(network, n)
        receivers = tuple(([p] if p != network.sink else []) + [l for l in listen[n] if l != p])
        energy = tx_cost(bits, d, params) + len(receivers) * rx_cost(bits, params)
        events.append(LinkEvent(n, receivers, bits, d, energy))
    c_t = math.fsum(e.energy for e in events)
    c_r = raw_baseline_cost(network, params, epochs, raw_bits)
    return CostReport(events, c_t, c_r, node_bits)


def snr(original, reconstructed) -> float:
    """Signal to reconstruction-noise ratio in dB (``inf`` when exact)."""
    x = np.asarray(original, dtype=float).ravel()
    xh = np.asarray(reconstructed, dtype=float).ravel()
    if x.shape != xh.shape:
        raise InvalidArgument("signals must have equal length")
    sig = float(x @ x)
    if sig == 0.0:
        raise UndefinedSignal("SNR is undefined for an all-zero signal")
    err = float((x - xh) @ (x - xh))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(sig / err)
