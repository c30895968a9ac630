"""Reception statistics: PRR vs distance, inter-packet gaps, and MAE.

PRR bins are half-open [edge_i, edge_i+1); receptions beyond the last edge
are dropped from PRR on purpose. IPG tracks, per directed pair inside the
range limit, the time between consecutive correct receptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_BIN_WIDTH_M = 25.0
DEFAULT_MAX_DISTANCE_M = 600.0
DEFAULT_IPG_RANGE_M = 150.0


def default_bin_edges(max_distance_m: float = DEFAULT_MAX_DISTANCE_M,
                      width_m: float = DEFAULT_BIN_WIDTH_M) -> np.ndarray:
    n = int(round(max_distance_m / width_m))
    return np.linspace(0.0, width_m * n, n + 1)


@dataclass
class PrrSeries:
    """Per-distance-bin tallies of reception opportunities and successes."""

    bin_edges: np.ndarray = field(default_factory=default_bin_edges)
    received: np.ndarray = None
    opportunities: np.ndarray = None

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        if self.bin_edges.size < 2 or not np.all(np.diff(self.bin_edges) > 0):
            raise ConfigError("bin_edges must be strictly increasing with >= 2 entries")
        n = self.bin_edges.size - 1
        if self.received is None:
            self.received = np.zeros(n, dtype=np.int64)
        if self.opportunities is None:
            self.opportunities = np.zeros(n, dtype=np.int64)
        self.received = np.asarray(self.received, dtype=np.int64)
        self.opportunities = np.asarray(self.opportunities, dtype=np.int64)
        if np.any(self.received > self.opportunities):
            raise DataError("received counts exceed opportunities")

    def add(self, distance_m: float, received: bool):
        idx = np.searchsorted(self.bin_edges, distance_m, side="right") - 1
        if idx < 0 or idx >= self.opportunities.size:
            return
        self.opportunities[idx] += 1
        if received:
            self.received[idx] += 1

    def add_many(self, distances_m: np.ndarray, received: np.ndarray):
        idx = np.searchsorted(self.bin_edges, distances_m, side="right") - 1
        ok = (idx >= 0) & (idx < self.opportunities.size)
        idx = idx[ok]
        np.add.at(self.opportunities, idx, 1)
        np.add.at(self.received, idx, np.asarray(received)[ok].astype(np.int64))

    def ratios(self) -> np.ndarray:
        """PRR per bin; NaN where no opportunity was recorded."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.opportunities > 0,
                            self.received / np.maximum(self.opportunities, 1), np.nan)

    def merge(self, other: "PrrSeries") -> "PrrSeries":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise DataError("cannot merge PRR series with different bins")
        return PrrSeries(self.bin_edges, self.received + other.received,
                         self.opportunities + other.opportunities)


@dataclass
class IpgStore:
    """Gaps between consecutive receptions per directed (tx, rx) pair."""

    range_limit_m: float = DEFAULT_IPG_RANGE_M
    last_time: dict = field(default_factory=dict)
    gaps: list = field(default_factory=list)

    def add(self, pair, distance_m: float, time_s: float):
        if distance_m > self.range_limit_m:
            return
        prev = self.last_time.get(pair)
        if prev is not None:
            gap = time_s - prev
            if gap <= 0:
                raise DataError(f"non-positive gap {gap} for pair {pair}")
            self.gaps.append(gap)
        self.last_time[pair] = time_s

    def merge(self, other: "IpgStore") -> "IpgStore":
        out = IpgStore(self.range_limit_m)
        out.gaps = self.gaps + other.gaps
        return out


def record_reception(prr: PrrSeries, ipg: IpgStore, pair, tx_rx_distance: float,
                     received: bool, time_s: float):
    """Tally one reception opportunity into both accumulators."""
    if tx_rx_distance < 0:
        raise DataError("distance must be >= 0")
    prr.add(tx_rx_distance, received)
    if received:
        ipg.add(pair, tx_rx_distance, time_s)


def prr_curve(prr: PrrSeries):
    """(bin_center, ratio) pairs; bins with zero opportunities are omitted."""
    centers = 0.5 * (prr.bin_edges[:-1] + prr.bin_edges[1:])
    out = []
    for c, r, n in zip(centers, prr.received, prr.opportunities):
        if n > 0:
            out.append((float(c), r / n))
    return out


def ipg_ccdf(ipg: IpgStore, grid):
    """Empirical P(IPG > t) on the given grid of durations."""
    if not ipg.gaps:
        raise DataError("no inter-packet gaps recorded")
    gaps = np.sort(np.asarray(ipg.gaps, dtype=float))
    t = np.asarray(grid, dtype=float)
    exceed = gaps.size - np.searchsorted(gaps, t, side="right")
    return [(float(ti), float(e / gaps.size)) for ti, e in zip(t, exceed)]


def mae(a: PrrSeries, b: PrrSeries) -> float:
    """Mean absolute PRR error over bins populated in both series."""
    if not np.array_equal(a.bin_edges, b.bin_edges):
        raise DataError("PRR series have different bin edges")
    both = (a.opportunities > 0) & (b.opportunities > 0)
    if not np.any(both):
        raise DataError("no common populated bins")
    ra = a.received[both] / a.opportunities[both]
    rb = b.received[both] / b.opportunities[both]
    return float(np.mean(np.abs(ra - rb)))


@dataclass
class MetricStore:
    """Everything one run produces: PRR tallies, IPG gaps, bookkeeping counters."""

    prr: PrrSeries = field(default_factory=PrrSeries)
    ipg: IpgStore = field(default_factory=IpgStore)
    generated: int = 0
    transmitted: int = 0
    opportunities: int = 0
    lost_half_duplex: int = 0
    lost_sinr: int = 0
    received_total: int = 0

    def merge(self, other: "MetricStore") -> "MetricStore":
        return MetricStore(
            prr=self.prr.merge(other.prr),
            ipg=self.ipg.merge(other.ipg),
            generated=self.generated + other.generated,
            transmitted=self.transmitted + other.transmitted,
            opportunities=self.opportunities + other.opportunities,
            lost_half_duplex=self.lost_half_duplex + other.lost_half_duplex,
            lost_sinr=self.lost_sinr + other.lost_sinr,
            received_total=self.received_total + other.received_total,
        )
