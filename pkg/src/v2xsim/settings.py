"""Technology parameter vectors and the timing/throughput math built on them.

Two families are modeled: IEEE 802.11p (CSMA-based, full-channel frames) and
C-V2X sidelink (TTI/subchannel grid). All durations are SI seconds and all
rates bit/s; converters in the CLI accept the familiar µs/ms config units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

# Data bits carried by one OFDM symbol for the eight 10 MHz MCS indices
# (BPSK 1/2 up to 64-QAM 3/4).
NBPS_TABLE = (24, 36, 48, 72, 96, 144, 192, 216)

# Net payload bits per PRB for the sidelink MCS ladder. These are documented
# approximations of the transport-block capacity after control/DMRS overhead
# (the exact 3GPP tables are out of scope); override via PrbTable if the
# deployment needs different sizing. Anchored so MCS 7 (QPSK, CR~0.5)
# carries a 350-byte packet in 37 PRBs.
DEFAULT_BITS_PER_PRB = {
    0: 18, 1: 23, 2: 28, 3: 36, 4: 44, 5: 54, 6: 64, 7: 76,
    8: 88, 9: 100, 10: 112, 11: 128, 12: 144, 13: 164, 14: 184,
    15: 204, 16: 224, 17: 244, 18: 272, 19: 300, 20: 328,
}


@dataclass(frozen=True)
class PrbTable:
    """Sidelink PRB sizing: net bits per PRB by MCS index.

    control_overhead_prbs is the per-packet control-channel footprint
    (adjacent PSCCH); it widens the on-grid resource footprint but is not
    part of the transport-block capacity scan.
    """

    bits_per_prb: dict = field(default_factory=lambda: dict(DEFAULT_BITS_PER_PRB))
    control_overhead_prbs: int = 2

    def capacity_bits(self, mcs_index: int, n_prb: int) -> int:
        return self.bits_per_prb[mcs_index] * n_prb


DEFAULT_PRB_TABLE = PrbTable()


@dataclass(frozen=True)
class Ieee80211pSettings:
    """802.11p parameter vector: payload plus frame timing constants."""

    payload_bytes: int
    t_aifs_s: float = 110e-6
    t_preamble_s: float = 40e-6
    t_symbol_s: float = 8e-6
    n_bps: int = 48
    mcs_index: int = 2
    cw_max: int = 15
    slot_time_s: float = 13e-6

    def __post_init__(self):
        if self.payload_bytes < 1:
            raise ConfigError(f"payload_bytes must be >= 1, got {self.payload_bytes}")
        if self.n_bps not in NBPS_TABLE:
            raise ConfigError(f"n_bps {self.n_bps} is not a 10 MHz MCS value {NBPS_TABLE}")
        for name in ("t_aifs_s", "t_preamble_s", "t_symbol_s", "slot_time_s"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")


@dataclass(frozen=True)
class CV2xSettings:
    """C-V2X sidelink parameter vector: payload plus grid geometry."""

    payload_bytes: int
    n_subch: int = 5
    n_prb_subch: int = 10
    t_tti_s: float = 1e-3
    n_prb_pkt: int = 37
    mcs_index: int = 7

    def __post_init__(self):
        if self.payload_bytes < 1:
            raise ConfigError(f"payload_bytes must be >= 1, got {self.payload_bytes}")
        if self.n_prb_pkt < 1:
            raise ConfigError("n_prb_pkt must be >= 1")
        if self.n_subch * self.n_prb_subch < 1:
            raise ConfigError("subchannel grid must hold at least one PRB")
        if not any(math.isclose(self.t_tti_s, t) for t in (0.25e-3, 0.5e-3, 1e-3)):
            raise ConfigError(f"t_tti_s must be 0.25, 0.5 or 1 ms, got {self.t_tti_s}")

    @property
    def n_prb_tti(self) -> int:
        return self.n_subch * self.n_prb_subch

    @property
    def n_tti(self) -> int:
        return math.ceil(self.n_prb_pkt / self.n_prb_tti)


TechnologySettings = Ieee80211pSettings | CV2xSettings


def resolve_nbps(mcs_index: int) -> int:
    """Data bits per OFDM symbol for an 802.11p MCS index (10 MHz)."""
    if not 0 <= mcs_index <= 7:
        raise ConfigError(f"802.11p mcs_index must be in 0..7, got {mcs_index}")
    return NBPS_TABLE[mcs_index]


def resolve_nprb(mcs_index: int, payload_bytes: int, table: PrbTable = DEFAULT_PRB_TABLE,
                 overhead_bits: int = 0) -> int:
    """Smallest PRB count whose capacity carries the payload (plus overhead bits).

    Returns data PRBs only; the PSCCH footprint constant of the table is
    applied where the on-grid footprint is built, not here.
    """
    if payload_bytes < 1:
        raise ConfigError(f"payload_bytes must be >= 1, got {payload_bytes}")
    if mcs_index not in table.bits_per_prb:
        raise ConfigError(f"mcs_index {mcs_index} not present in the PRB table")
    need = 8 * payload_bytes + overhead_bits
    per_prb = table.bits_per_prb[mcs_index]
    return (need + per_prb - 1) // per_prb


def tx_time_11p(s: Ieee80211pSettings) -> float:
    """Airtime of one 802.11p frame: AIFS + preamble + payload symbols."""
    n_sym = math.ceil(8 * s.payload_bytes / s.n_bps)
    return s.t_aifs_s + s.t_preamble_s + s.t_symbol_s * n_sym


def tx_time_cv2x(s: CV2xSettings) -> float:
    """Airtime of one sidelink packet: whole TTIs needed by its PRBs."""
    return s.t_tti_s * s.n_tti


def tx_time(s: TechnologySettings) -> float:
    if isinstance(s, Ieee80211pSettings):
        return tx_time_11p(s)
    return tx_time_cv2x(s)


def effective_throughput(s: TechnologySettings) -> float:
    """Maximum net throughput of the configuration in bit/s.

    For 802.11p this is payload bits over airtime. For C-V2X the ratio is
    scaled by the share of the TTI grid the packet leaves free, so a packet
    using few PRBs is credited with the parallel capacity of the rest.
    """
    bits = 8 * s.payload_bytes
    t = tx_time(s)
    if isinstance(s, Ieee80211pSettings):
        return bits / t
    return (bits / t) * (s.n_subch * s.n_prb_subch * s.n_tti / s.n_prb_pkt)
