"""Discrete-event simulation core.

802.11p runs on a continuous-time event heap (generation, MAC timers, frame
boundaries); C-V2X runs on a TTI-slotted timeline. Both share the same
vectorized link-budget cache: per mobility epoch the engine refreshes an
NxN received-power matrix (path loss + correlated shadowing), and every
frame is evaluated against all in-range receivers at once.

Reception is decided either by a hard SINR threshold or by a Bernoulli draw
against the interpolated PER curve; each generated packet resolves, per
in-range receiver, to exactly one of received / lost-by-SINR /
lost-by-half-duplex.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import scenario as scen
from .abstraction import PerCurve, StepFunction
from .access import (CsmaNode, CsmaParams, SensingWindow, SpsParams, SpsState,
                     sps_after_transmission, sps_select)
from .channel import LinkShadowing, PropagationConfig, noise_power_dbm, path_loss_db
from .errors import ConfigError
from .metrics import IpgStore, MetricStore, PrrSeries, default_bin_edges
from .scenario import Geometry, RoadConfig, TrafficConfig, generation_phase
from .settings import (CV2xSettings, Ieee80211pSettings, TechnologySettings,
                       DEFAULT_PRB_TABLE, PrbTable, tx_time)
from .util import stream

POWER_FLOOR_DBM = -999.0


@dataclass(frozen=True)
class ReceptionModel:
    mode: str  # per_curve | step_threshold
    curve: PerCurve | None = None
    step: StepFunction | None = None

    def __post_init__(self):
        if self.mode == "per_curve":
            if self.curve is None or self.step is not None:
                raise ConfigError("per_curve mode needs exactly a curve")
        elif self.mode == "step_threshold":
            if self.step is None or self.curve is not None:
                raise ConfigError("step_threshold mode needs exactly a step function")
        else:
            raise ConfigError(f"unknown reception mode {self.mode!r}")


@dataclass(frozen=True)
class TransmissionEvent:
    tx_id: int
    start: float
    duration: float
    payload_bytes: int
    sequence: int
    # C-V2X resource footprint; None means the frame takes the whole channel
    tti: int | None = None
    prb_start: int = 0
    prb_count: int = 0

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class RunConfig:
    seed: int
    sim_duration_s: float
    technology: str  # 11p | cv2x
    theta: TechnologySettings
    reception: ReceptionModel
    warmup_s: float = 0.0
    max_range_m: float = 1000.0
    mobility_step_s: float = 0.1
    prr_bin_width_m: float = 25.0
    prr_max_distance_m: float = 600.0
    ipg_range_m: float = 150.0

    def __post_init__(self):
        if not self.warmup_s < self.sim_duration_s:
            raise ConfigError("warmup_s must be smaller than sim_duration_s")
        if self.technology not in ("11p", "cv2x"):
            raise ConfigError(f"unknown technology {self.technology!r}")
        wants_11p = self.technology == "11p"
        if wants_11p != isinstance(self.theta, Ieee80211pSettings):
            raise ConfigError("theta does not match the configured technology")


@dataclass
class TraceLog:
    """Optional full-trace hooks used by the MAC invariant checks."""

    tx_starts: list = field(default_factory=list)  # (time, vid, sensed_busy)
    sps_selections: list = field(default_factory=list)  # (trigger_tti, Selection)
    sps_keeps: list = field(default_factory=list)  # bool per keep draw
    sps_counters: list = field(default_factory=list)  # (vid, before, after) per tx


def decide_reception(sinr_linear: float, model: ReceptionModel,
                     rng: np.random.Generator) -> bool:
    """Scalar reception decision; the engine uses the vector twin below."""
    return bool(decide_reception_vector(np.array([sinr_linear]), model, rng)[0])


def decide_reception_vector(sinr_linear: np.ndarray, model: ReceptionModel,
                            rng: np.random.Generator) -> np.ndarray:
    if np.any(sinr_linear < 0):
        raise ConfigError("SINR must be >= 0")
    if model.mode == "step_threshold":
        return sinr_linear > model.step.gamma_th
    per = model.curve.per_at_linear(sinr_linear)
    return rng.random(sinr_linear.shape) >= per


def overlap_fraction(a: TransmissionEvent, b: TransmissionEvent) -> float:
    """Share of event `a` hit by event `b` on a's resource granularity."""
    if a.tti is None:
        shared = min(a.end, b.end) - max(a.start, b.start)
        if shared <= 0:
            return 0.0
        return shared / a.duration
    if b.tti != a.tti:
        return 0.0
    lo = max(a.prb_start, b.prb_start)
    hi = min(a.prb_start + a.prb_count, b.prb_start + b.prb_count)
    if hi <= lo:
        return 0.0
    return (hi - lo) / a.prb_count


def interference_set(event: TransmissionEvent, all_events):
    """Interferers of `event` with their overlap fractions (zero-overlap dropped)."""
    out = []
    for other in all_events:
        if other is event or other.sequence == event.sequence:
            continue
        frac = overlap_fraction(event, other)
        if frac > 0.0:
            out.append((other, frac))
    return out


# ---------------------------------------------------------------------------


class _PhyCache:
    """Per-epoch link state: received power, distances, LOS, shadowing."""

    def __init__(self, geom: Geometry, prop: PropagationConfig, seed: int):
        self.geom = geom
        self.prop = prop
        self.rng = stream(seed, "shadowing")
        n = geom.n
        self.shadow_db = prop.shadowing_sigma_db * self.rng.standard_normal((n, n))
        self._last_traveled = geom.traveled.copy()
        self.power_dbm = None
        self.power_mw = None
        self.dist = None
        self.refresh(first=True)

    def refresh(self, first: bool = False):
        geom, prop = self.geom, self.prop
        if not first:
            delta = geom.traveled - self._last_traveled
            self.shadow_db = LinkShadowing.evolve_matrix(
                self.shadow_db, delta, prop.shadowing_sigma_db,
                prop.decorrelation_m, self.rng,
            )
            self._last_traveled = geom.traveled.copy()
        los = geom.los_matrix()
        self.dist = geom.distance_matrix()
        pd = geom.propagation_distance_matrix(los)
        loss = path_loss_db(pd, prop, los=los)
        self.power_dbm = (prop.tx_power_dbm + 2.0 * prop.antenna_gain_dbi
                          - loss - self.shadow_db)
        np.fill_diagonal(self.power_dbm, POWER_FLOOR_DBM)
        self.power_mw = 10.0 ** (self.power_dbm / 10.0)


class _RunBase:
    def __init__(self, cfg: RunConfig, road: RoadConfig, traffic: TrafficConfig,
                 prop: PropagationConfig, trace: TraceLog | None,
                 vehicles: list | None = None):
        self.cfg = cfg
        self.road = road
        self.traffic = traffic
        self.prop = prop
        self.trace = trace
        self.vehicles = scen.spawn(road, cfg.seed) if vehicles is None else vehicles
        self.geom = Geometry(road, self.vehicles)
        self.n = self.geom.n
        self.phy = _PhyCache(self.geom, prop, cfg.seed)
        self.noise_mw = 10.0 ** (noise_power_dbm(prop) / 10.0)
        self.rng_reception = stream(cfg.seed, "reception")
        edges = default_bin_edges(cfg.prr_max_distance_m, cfg.prr_bin_width_m)
        self.metrics = MetricStore(prr=PrrSeries(edges),
                                   ipg=IpgStore(cfg.ipg_range_m))
        self.phases = np.array([
            generation_phase(v.id, cfg.seed, traffic.period_s) for v in self.vehicles
        ]) if self.n else np.zeros(0)

    def evaluate_frame(self, frame: TransmissionEvent, mw_row, dist_row,
                       interferers, blocked_ids, time_of_reception: float):
        """Vectorized reception decision for one frame against all receivers.

        interferers: list of (mw_row_of_interferer, overlap_fraction).
        blocked_ids: receivers deaf due to their own overlapping transmission.
        """
        rx = np.flatnonzero((dist_row <= self.cfg.max_range_m))
        rx = rx[rx != frame.tx_id]
        if rx.size == 0:
            return
        denom = np.full(rx.size, self.noise_mw)
        for mw, frac in interferers:
            denom = denom + frac * mw[rx]
        sinr = mw_row[rx] / denom
        decisions = decide_reception_vector(sinr, self.cfg.reception,
                                            self.rng_reception)
        blocked = np.isin(rx, blocked_ids) if blocked_ids else np.zeros(rx.size, bool)
        received = decisions & ~blocked
        if frame.start < self.cfg.warmup_s:
            return
        self.metrics.opportunities += rx.size
        self.metrics.prr.add_many(dist_row[rx], received)
        self.metrics.received_total += int(received.sum())
        self.metrics.lost_half_duplex += int(blocked.sum())
        self.metrics.lost_sinr += int((~received & ~blocked).sum())
        near = received & (dist_row[rx] <= self.cfg.ipg_range_m)
        for r in rx[np.flatnonzero(near)]:
            self.metrics.ipg.add((frame.tx_id, int(r)), dist_row[r], time_of_reception)


# ---------------------------------------------------------------------------
# IEEE 802.11p: continuous-time CSMA engine


class _Frame:
    __slots__ = ("event", "mw_row", "dist_row", "sense_mask", "overlappers")

    def __init__(self, event, mw_row, dist_row, sense_mask):
        self.event = event
        self.mw_row = mw_row
        self.dist_row = dist_row
        self.sense_mask = sense_mask
        self.overlappers = []


class _Run11p(_RunBase):
    def __init__(self, cfg, road, traffic, prop, csma: CsmaParams, trace,
                 vehicles=None):
        super().__init__(cfg, road, traffic, prop, trace, vehicles)
        self.csma = csma
        self.nodes = [CsmaNode(csma, stream(cfg.seed, "backoff", v.id))
                      for v in self.vehicles]
        self.busy_decod = np.zeros(self.n, dtype=np.int64)
        self.energy_mw = np.zeros(self.n)
        self.busy = np.zeros(self.n, dtype=bool)
        self.e65_mw = 10.0 ** (csma.sense_energy_dbm / 10.0)
        self.waiting: set[int] = set()
        self.active: list[_Frame] = []
        self.heap: list = []
        self.counter = itertools.count()
        self.seq = itertools.count()
        self.duration_s = tx_time(cfg.theta)
        self.m85 = None
        self._refresh_masks()

    def _refresh_masks(self):
        self.m85 = self.phy.power_dbm >= self.csma.sense_decodable_dbm

    def _push(self, at: float, kind: str, data):
        heapq.heappush(self.heap, (at, next(self.counter), kind, data))

    def _apply(self, now: float, vid: int, action):
        from .access import ScheduleTimer, StartTx

        if isinstance(action, ScheduleTimer):
            self._push(action.at, "timer", (vid, action.token))
        elif isinstance(action, StartTx):
            self._begin_frame(vid, now)
            return
        self._sync_waiting(vid)

    def _sync_waiting(self, vid: int):
        """Track which nodes must hear medium busy/idle transitions."""
        if self.nodes[vid].state.phase in ("aifs_wait", "backoff_frozen",
                                           "backoff_counting"):
            self.waiting.add(vid)
        else:
            self.waiting.discard(vid)

    def _recompute_busy(self, now: float):
        new_busy = (self.busy_decod > 0) | (self.energy_mw >= self.e65_mw)
        flipped = np.flatnonzero(new_busy != self.busy)
        self.busy = new_busy
        for vid in flipped:
            vid = int(vid)
            if vid not in self.waiting:
                continue
            node = self.nodes[vid]
            if new_busy[vid]:
                node.on_busy(now)
            else:
                self._apply(now, vid, node.on_idle(now))

    def _begin_frame(self, vid: int, now: float):
        self.waiting.discard(vid)
        node = self.nodes[vid]
        node.take_packet()
        if self.trace is not None:
            self.trace.tx_starts.append((now, vid, bool(self.busy[vid])))
        event = TransmissionEvent(tx_id=vid, start=now, duration=self.duration_s,
                                  payload_bytes=self.cfg.theta.payload_bytes,
                                  sequence=next(self.seq))
        sense_mask = self.m85[vid].copy()
        sense_mask[vid] = False
        mw_row = self.phy.power_mw[vid].copy()
        mw_row[vid] = 0.0
        frame = _Frame(event, mw_row, self.phy.dist[vid].copy(), sense_mask)
        frame.overlappers = list(self.active)
        for other in self.active:
            other.overlappers.append(frame)
        self.active.append(frame)
        if now >= self.cfg.warmup_s:
            self.metrics.transmitted += 1
        self.busy_decod += sense_mask
        self.energy_mw += mw_row
        self._recompute_busy(now)
        self._push(event.end, "tx_end", frame)

    def _end_frame(self, frame: _Frame, now: float):
        self.active.remove(frame)
        self.busy_decod -= frame.sense_mask
        self.energy_mw -= frame.mw_row
        self._recompute_busy(now)
        interferers = []
        blocked = []
        for other in frame.overlappers:
            frac = overlap_fraction(frame.event, other.event)
            if frac > 0.0:
                interferers.append((other.mw_row, frac))
            blocked.append(other.event.tx_id)
        self.evaluate_frame(frame.event, frame.mw_row, frame.dist_row,
                            interferers, blocked, now)
        vid = frame.event.tx_id
        self._apply(now, vid, self.nodes[vid].on_tx_end(now, bool(self.busy[vid])))

    def run(self) -> MetricStore:
        cfg = self.cfg
        for i in range(self.n):
            self._push(float(self.phases[i]), "gen", i)
        step = cfg.mobility_step_s
        if step < cfg.sim_duration_s:
            self._push(step, "epoch", None)
        while self.heap:
            now, _, kind, data = heapq.heappop(self.heap)
            if kind == "epoch":
                self.geom.step(step)
                self.phy.refresh()
                self._refresh_masks()
                nxt = now + step
                if nxt < cfg.sim_duration_s:
                    self._push(nxt, "epoch", None)
            elif kind == "gen":
                vid = data
                if now >= cfg.warmup_s:
                    self.metrics.generated += 1
                node = self.nodes[vid]
                self._apply(now, vid, node.on_packet(now, bool(self.busy[vid]),
                                                     packet=now))
                nxt = now + self.traffic.period_s
                if nxt < cfg.sim_duration_s:
                    self._push(nxt, "gen", vid)
            elif kind == "timer":
                vid, token = data
                action = self.nodes[vid].on_timer(now, token)
                self._apply(now, vid, action)
            elif kind == "tx_end":
                self._end_frame(data, now)
        return self.metrics


# ---------------------------------------------------------------------------
# C-V2X sidelink: TTI-slotted engine


class _RunCv2x(_RunBase):
    def __init__(self, cfg, road, traffic, prop, sps: SpsParams,
                 prb_table: PrbTable, trace, vehicles=None):
        super().__init__(cfg, road, traffic, prop, trace, vehicles)
        theta: CV2xSettings = cfg.theta
        self.sps_params = sps
        self.t_tti = theta.t_tti_s
        if theta.n_tti != 1:
            raise ConfigError("the slotted engine supports single-TTI packets only")
        period = traffic.period_s
        self.period_ttis = int(round(period / self.t_tti))
        if not math.isclose(self.period_ttis * self.t_tti, period):
            raise ConfigError("generation period must be a whole number of TTIs")
        footprint = theta.n_prb_pkt + prb_table.control_overhead_prbs
        self.n_subch_needed = math.ceil(footprint / theta.n_prb_subch)
        if self.n_subch_needed > theta.n_subch:
            raise ConfigError("packet footprint exceeds the subchannel grid")
        self.footprint_prbs = footprint
        self.window_ttis = max(int(round(sps.sensing_window_s / self.t_tti)), 1)
        self.ring = np.zeros((self.n, self.window_ttis, theta.n_subch))
        self.sps_states = [SpsState(keep_probability=sps.keep_probability)
                           for _ in range(self.n)]
        self.sps_rngs = [stream(cfg.seed, "sps", v.id) for v in self.vehicles]
        self.pending = [None] * self.n  # generation timestamp awaiting its slot
        self.seq = itertools.count()

    def _sensing_view(self, vid: int, now_tti: int) -> SensingWindow:
        sw = SensingWindow.__new__(SensingWindow)
        sw.window_ttis = self.window_ttis
        sw.n_subch = self.cfg.theta.n_subch
        sw.power_mw = self.ring[vid]
        sw.filled_until = now_tti
        return sw

    def _select(self, vid: int, now_tti: int):
        st = self.sps_states[vid]
        sel = sps_select(st, self._sensing_view(vid, now_tti), now_tti,
                         self.sps_params, self.t_tti, self.sps_rngs[vid],
                         n_subch_needed=self.n_subch_needed)
        st.selected_subchannel = sel.subchannel
        st.selected_tti = sel.tti
        st.reselection_counter = sel.reselection_counter
        st.needs_reselection = False
        if self.trace is not None:
            self.trace.sps_selections.append((now_tti, sel))

    def run(self) -> MetricStore:
        cfg = self.cfg
        theta: CV2xSettings = cfg.theta
        n_ttis = int(math.ceil(cfg.sim_duration_s / self.t_tti))
        next_gen = self.phases.copy()
        epoch_every = max(int(round(cfg.mobility_step_s / self.t_tti)), 1)
        for k in range(n_ttis):
            t_k = k * self.t_tti
            if k > 0 and k % epoch_every == 0:
                self.geom.step(epoch_every * self.t_tti)
                self.phy.refresh()
            # generations due before the next TTI boundary
            for vid in range(self.n):
                if next_gen[vid] < t_k + self.t_tti and next_gen[vid] < cfg.sim_duration_s:
                    if next_gen[vid] >= cfg.warmup_s:
                        self.metrics.generated += 1
                    self.pending[vid] = float(next_gen[vid])
                    next_gen[vid] += self.traffic.period_s
                    st = self.sps_states[vid]
                    if st.needs_reselection:
                        self._select(vid, k)
            # transmissions whose reserved slot is this TTI
            frames = []
            for vid in range(self.n):
                st = self.sps_states[vid]
                if self.pending[vid] is None or st.selected_tti != k:
                    continue
                if self.pending[vid] > t_k:
                    # packet arrived mid-slot; it rides the next occurrence
                    st.selected_tti += self.period_ttis
                    continue
                self.pending[vid] = None
                event = TransmissionEvent(
                    tx_id=vid, start=t_k, duration=self.t_tti,
                    payload_bytes=theta.payload_bytes, sequence=next(self.seq),
                    tti=k, prb_start=st.selected_subchannel * theta.n_prb_subch,
                    prb_count=self.footprint_prbs,
                )
                frames.append(event)
                if t_k >= cfg.warmup_s:
                    self.metrics.transmitted += 1
            self._deliver(frames, t_k + self.t_tti)
            self._sense(frames, k)
            for event in frames:
                vid = event.tx_id
                st = self.sps_states[vid]
                before = st.reselection_counter
                keep = sps_after_transmission(st, self.sps_params, self.sps_rngs[vid])
                if self.trace is not None:
                    self.trace.sps_counters.append((vid, before, st.reselection_counter))
                    if keep is not None:
                        self.trace.sps_keeps.append(keep)
                if not st.needs_reselection:
                    st.selected_tti += self.period_ttis
        return self.metrics

    def _deliver(self, frames, time_of_reception: float):
        tx_ids = [f.tx_id for f in frames]
        for event in frames:
            interferers = []
            for other in frames:
                if other is event:
                    continue
                frac = overlap_fraction(event, other)
                if frac > 0.0:
                    interferers.append((self.phy.power_mw[other.tx_id], frac))
            blocked = [t for t in tx_ids if t != event.tx_id]
            self.evaluate_frame(event, self.phy.power_mw[event.tx_id],
                                self.phy.dist[event.tx_id], interferers, blocked,
                                time_of_reception)

    def _sense(self, frames, k: int):
        theta: CV2xSettings = self.cfg.theta
        measured = np.zeros((self.n, theta.n_subch))
        for event in frames:
            s0 = event.prb_start // theta.n_prb_subch
            s1 = min(math.ceil((event.prb_start + event.prb_count)
                               / theta.n_prb_subch), theta.n_subch)
            measured[:, s0:s1] += self.phy.power_mw[event.tx_id][:, None]
        for event in frames:
            measured[event.tx_id, :] = np.nan  # half duplex: own TTI unsensed
        self.ring[:, k % self.window_ttis, :] = measured


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationSetup:
    """Everything one run needs, grouped by subsystem."""

    run: RunConfig
    road: RoadConfig = field(default_factory=RoadConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    csma: CsmaParams = field(default_factory=CsmaParams)
    sps: SpsParams = field(default_factory=SpsParams)
    prb_table: PrbTable = field(default_factory=lambda: DEFAULT_PRB_TABLE)
    # explicit placement for controlled experiments; None means spawn from seed
    vehicles: list | None = None


def run(setup: SimulationSetup, trace: TraceLog | None = None) -> MetricStore:
    """Execute one seeded run and return its metric store."""
    cfg = setup.run
    if cfg.technology == "11p":
        sim = _Run11p(cfg, setup.road, setup.traffic, setup.propagation,
                      setup.csma, trace, setup.vehicles)
    else:
        sim = _RunCv2x(cfg, setup.road, setup.traffic, setup.propagation,
                       setup.sps, setup.prb_table, trace, setup.vehicles)
    return sim.run()
