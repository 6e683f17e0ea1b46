"""Air interface abstraction: SNR to rate and block error probability,
burst transmission timing, and the non-contention random access used on
handover.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

OUTAGE_THRESHOLD_DB = -5.0
ETA = 0.65
SCHED_DELAY_US = 1000


class LinkOutage(RuntimeError):
    """Transmission or random access attempted on a link in outage."""


@dataclass(frozen=True)
class PhyParams:
    outage_threshold: float = OUTAGE_THRESHOLD_DB
    eta: float = ETA
    sched_delay_us: int = SCHED_DELAY_US
    rach_window_ms: float = 5.0
    rach_proc_ms: float = 3.0
    bler_enabled: bool = True


def rate_from_snr(snr: float, bandwidth: float, eta: float = ETA,
                  outage_threshold: float = OUTAGE_THRESHOLD_DB) -> float:
    if snr < outage_threshold:
        return 0.0
    return eta * bandwidth * math.log2(1.0 + 10.0 ** (snr / 10.0))


def bler_from_snr(snr: float, outage_threshold: float = OUTAGE_THRESHOLD_DB) -> float:
    if snr < outage_threshold:
        return 1.0
    x = 1.5 * (snr + 2.0)
    if x > 700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(x))


@dataclass
class LinkState:
    enb_id: int
    snr: float
    rate: float
    bler: float

    @classmethod
    def from_snr(cls, enb_id: int, snr: float, bandwidth: float, params: PhyParams = PhyParams()) -> "LinkState":
        rate = rate_from_snr(snr, bandwidth, params.eta, params.outage_threshold)
        bler = bler_from_snr(snr, params.outage_threshold) if params.bler_enabled else (0.0 if rate > 0 else 1.0)
        return cls(enb_id, snr, rate, bler)

    @property
    def in_outage(self) -> bool:
        return self.rate <= 0.0


@dataclass(frozen=True)
class AirTransmission:
    payload_bytes: int
    start: int
    link: LinkState
    completion: int
    success: bool


def serialization_us(payload_bytes: int, rate_bps: float) -> int:
    return int(math.ceil(payload_bytes * 8.0 * 1e6 / rate_bps))


def transmit(payload_bytes: int, link: LinkState, stream, start: int = 0,
             sched_delay_us: int = SCHED_DELAY_US) -> AirTransmission:
    """Send one burst; success is drawn from ``stream`` with probability 1 - bler."""
    if link.rate <= 0.0:
        raise LinkOutage(f"link to eNB {link.enb_id} is in outage (snr {link.snr:.2f} dB)")
    completion = start + serialization_us(payload_bytes, link.rate) + sched_delay_us
    success = stream.uniform() >= link.bler
    return AirTransmission(payload_bytes, start, link, completion, success)


def random_access(stream, target: LinkState | None = None, params: PhyParams = PhyParams()) -> int:
    """Delay in us until the UE is attached to ``target``.

    Waits for the next RACH opportunity (uniform over the window) plus a fixed
    processing time; the UE cannot exchange data meanwhile.
    """
    if target is not None and target.in_outage:
        raise LinkOutage(f"random access to eNB {target.enb_id} failed: target in outage")
    wait = stream.uniform() * params.rach_window_ms * 1000.0
    return int(wait) + int(round(params.rach_proc_ms * 1000.0))
