"""Deterministic time-stepped world for store-carry-forward routing.

One run is a pure function of (scenario, seed): random-walk mobility with
boundary reflection, disc-range link detection, bandwidth-limited serialized
transfers that abort on range exit, finite drop-oldest buffers, periodic
traffic, TTL expiry, and a per-tick protocol driver. Per-node, per-purpose
RNG streams are derived from (seed, purpose, eid), so relabeling EIDs
relabels trajectories without changing aggregate behavior (regression
property, not enforced).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .baselines import (
    DirectDeliveryProtocol,
    EpidemicProtocol,
    FirstContactProtocol,
    SprayWaitProtocol,
)
from .geometry import Position
from .grone import BundleCopy, GroneProtocol, HelloMessage
from .metrics import EventLog

_TAG_MOBILITY = 1
_TAG_HELLO = 2
_TAG_TRAFFIC = 3

_TIME_EPS = 1e-9
_BYTE_EPS = 1e-6

PROTOCOLS = {
    "grone": GroneProtocol,
    "epidemic": EpidemicProtocol,
    "snw": SprayWaitProtocol,
    "fc": FirstContactProtocol,
    "dd": DirectDeliveryProtocol,
}


@dataclass
class Scenario:
    """Full run configuration; defaults follow the standard settings
    (120 nodes, 1000 m square, 100 m range, 0.5 m/s, 6 MB buffers, 500 KB
    messages every 40 s at 250 KBps, 20 min TTL, 5 h at 0.1 s steps)."""

    world_width: float = 1000.0
    world_height: float = 1000.0
    node_count: int = 120
    radius_R: float = 100.0
    node_speed: float = 0.5
    buffer_size: int = 6_000_000
    bandwidth: float = 250_000.0
    message_size: int = 500_000
    message_interval: float = 40.0
    ttl: float = 1200.0
    sim_duration: float = 18000.0
    clock_step: float = 0.1
    hello_interval: float = 1.0
    protocol: str = "grone"
    seed: int = 1
    walk_leg_range: tuple[float, float] = (50.0, 200.0)
    snw_tickets: int = 18

    def validate(self) -> None:
        pos = {
            "world_width": self.world_width,
            "world_height": self.world_height,
            "radius_R": self.radius_R,
            "node_speed": self.node_speed,
            "buffer_size": self.buffer_size,
            "bandwidth": self.bandwidth,
            "message_size": self.message_size,
            "message_interval": self.message_interval,
            "ttl": self.ttl,
            "clock_step": self.clock_step,
            "hello_interval": self.hello_interval,
        }
        for name, value in pos.items():
            if value <= 0:
                raise ScenarioError(f"{name} must be positive, got {value}")
        if self.node_count < 2:
            raise ScenarioError("node_count must be at least 2")
        if self.message_size > self.buffer_size:
            raise ScenarioError("message_size cannot exceed buffer_size")
        if self.sim_duration < 0:
            raise ScenarioError("sim_duration must be >= 0")
        lo, hi = self.walk_leg_range
        if not (0 < lo <= hi):
            raise ScenarioError(f"walk_leg_range must satisfy 0 < min <= max, got {self.walk_leg_range}")
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"unknown protocol {self.protocol!r}; choose from {sorted(PROTOCOLS)}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioError("seed must be a non-negative integer")
        if self.snw_tickets < 1:
            raise ScenarioError("snw_tickets must be >= 1")
        if self.hello_interval < self.clock_step:
            raise ScenarioError("hello_interval must be at least one clock_step")
        n = round(self.sim_duration / self.clock_step)
        if abs(n * self.clock_step - self.sim_duration) > 1e-6 * max(1.0, self.sim_duration):
            raise ScenarioError("sim_duration must be a multiple of clock_step")

    @property
    def n_ticks(self) -> int:
        return round(self.sim_duration / self.clock_step)


class ScenarioError(ValueError):
    pass


@dataclass(slots=True)
class NodeState:
    eid: int
    x: float
    y: float
    hx: float  # unit heading
    hy: float
    leg_remaining: float
    mobility_rng: np.random.Generator
    beacon_phase: float
    beacon_k: int = 0
    buffer: dict[str, BundleCopy] = field(default_factory=dict)
    buffer_used: int = 0
    buffer_version: int = 0  # bumped on every install or removal
    protocol_state: object = None

    @property
    def position(self) -> Position:
        return Position(self.x, self.y)


@dataclass(eq=False, slots=True)
class Transfer:
    """One bundle in flight on an ordered link; at most one drains per link
    at a time, bytes_remaining falls by bandwidth*dt per tick."""

    from_eid: int
    to_eid: int
    bundle_id: str
    size: int
    bytes_remaining: float
    queued_at: float
    started_at: float | None
    sender_pos: Position  # captured at enqueue; becomes the receiver's anchor
    target_pos: Position
    marked: bool  # this enqueue added to_eid to the copy's replicated_to


def _reflect(p: float, v: float, hi: float) -> tuple[float, float]:
    # Fold a coordinate back into [0, hi], flipping the heading component
    # once per wall crossing.
    while p < 0.0 or p > hi:
        if p < 0.0:
            p, v = -p, -v
        else:
            p, v = 2.0 * hi - p, -v
    return p, v


def random_walk_step(
    node: NodeState,
    dt: float,
    speed: float,
    width: float,
    height: float,
    leg_range: tuple[float, float],
    rng: np.random.Generator,
) -> NodeState:
    """Advance one tick of Random Walk mobility.

    The node travels exactly speed*dt of path, reflecting off world borders
    (angle of incidence = angle of reflection, leg continues); when the
    current leg runs out mid-step a fresh uniform heading in [0, 2pi) and a
    fresh uniform leg length are drawn and the remainder continues there.
    """
    step = speed * dt
    if node.leg_remaining > step:
        nx = node.x + node.hx * step
        ny = node.y + node.hy * step
        node.leg_remaining -= step
        if 0.0 <= nx <= width and 0.0 <= ny <= height:
            node.x = nx
            node.y = ny
        else:
            node.x, node.hx = _reflect(nx, node.hx, width)
            node.y, node.hy = _reflect(ny, node.hy, height)
        return node
    remaining = step
    while remaining > 1e-12:
        step = min(remaining, node.leg_remaining)
        node.x, node.hx = _reflect(node.x + node.hx * step, node.hx, width)
        node.y, node.hy = _reflect(node.y + node.hy * step, node.hy, height)
        node.leg_remaining -= step
        remaining -= step
        if node.leg_remaining <= 1e-12:
            theta = rng.uniform(0.0, 2.0 * math.pi)
            node.hx, node.hy = math.cos(theta), math.sin(theta)
            node.leg_remaining = rng.uniform(*leg_range)
    return node


class World:
    """Mutable run state; owned by a single run's tick loop."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.log = EventLog()
        self.now = 0.0
        self.protocol = PROTOCOLS[scenario.protocol](scenario)
        self.nodes: list[NodeState] = []
        for eid in range(scenario.node_count):
            rng = np.random.default_rng((scenario.seed, _TAG_MOBILITY, eid))
            x = rng.uniform(0.0, scenario.world_width)
            y = rng.uniform(0.0, scenario.world_height)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            leg = rng.uniform(*scenario.walk_leg_range)
            hello_rng = np.random.default_rng((scenario.seed, _TAG_HELLO, eid))
            node = NodeState(
                eid=eid,
                x=x,
                y=y,
                hx=math.cos(theta),
                hy=math.sin(theta),
                leg_remaining=leg,
                mobility_rng=rng,
                beacon_phase=hello_rng.uniform(0.0, scenario.hello_interval),
            )
            node.protocol_state = self.protocol.node_state(eid)
            self.nodes.append(node)
        self._traffic_rng = np.random.default_rng((scenario.seed, _TAG_TRAFFIC, 0))
        self._gen_k = 0
        n = scenario.node_count
        self._iu = np.triu_indices(n, 1)
        self._pairs = list(zip(self._iu[0].tolist(), self._iu[1].tolist()))
        self.links: set[tuple[int, int]] = set()
        self._adj: dict[int, list[int]] = {}
        self._link_epochs: dict[tuple[int, int], int] = {}
        self.queues: dict[tuple[int, int], deque[Transfer]] = {}
        self._pending_triples: set[tuple[int, int, str]] = set()
        self._pending_fb: dict[tuple[int, str], list[Transfer]] = {}
        self.holders: dict[str, set[int]] = {}
        self.bundles: dict[str, tuple[int, int, int, float]] = {}
        self._expiry_heap: list[tuple[float, str]] = []
        self.dirty: set[int] = set()

    # -- bookkeeping ------------------------------------------------------

    def mark_dirty(self, eid: int) -> None:
        self.dirty.add(eid)

    def linked_peers(self, eid: int) -> list[int]:
        return self._adj.get(eid, [])

    def is_linked(self, a: int, b: int) -> bool:
        return ((a, b) if a < b else (b, a)) in self.links

    def link_epoch_of(self, a: int, b: int) -> int:
        return self._link_epochs.get((a, b) if a < b else (b, a), 0)

    def bundle_dest(self, bundle_id: str) -> int:
        return self.bundles[bundle_id][1]

    def has_pending_outbound(self, from_eid: int, bundle_id: str) -> bool:
        return (from_eid, bundle_id) in self._pending_fb

    # -- per-tick phases ---------------------------------------------------

    def move_nodes(self, dt: float) -> None:
        s = self.scenario
        for node in self.nodes:
            random_walk_step(
                node, dt, s.node_speed, s.world_width, s.world_height,
                s.walk_leg_range, node.mobility_rng,
            )

    def detect_links(self) -> set[tuple[int, int]]:
        """All unordered pairs within radio range (boundary inclusive)."""
        xs = np.fromiter((n.x for n in self.nodes), float, len(self.nodes))
        ys = np.fromiter((n.y for n in self.nodes), float, len(self.nodes))
        ia, ib = self._iu
        d2 = (xs[ia] - xs[ib]) ** 2 + (ys[ia] - ys[ib]) ** 2
        hit = np.nonzero(d2 <= self.scenario.radius_R**2)[0]
        links = {self._pairs[i] for i in hit.tolist()}
        if links == self.links:
            return links
        for pair in links - self.links:
            self.mark_dirty(pair[0])
            self.mark_dirty(pair[1])
            self._link_epochs[pair] = self._link_epochs.get(pair, 0) + 1
        adj: dict[int, list[int]] = {}
        for a, b in links:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        for peers in adj.values():
            peers.sort()
        self.links = links
        self._adj = adj
        return links

    def hello_phase(self, now: float) -> None:
        if not self.protocol.uses_neighbor_tables:
            return
        interval = self.scenario.hello_interval
        emitters = []
        for node in self.nodes:
            if node.beacon_phase + node.beacon_k * interval <= now + _TIME_EPS:
                emitters.append(node)
                node.beacon_k += 1
        # Snapshot all beacons before processing: summaries reflect
        # emission-time buffers even if a purge lands in the same tick.
        hellos = [
            HelloMessage(node.eid, node.position, frozenset(node.buffer))
            for node in emitters
        ]
        for node, hello in zip(emitters, hellos):
            for peer_eid in self.linked_peers(node.eid):
                self.protocol.on_hello(self, self.nodes[peer_eid], hello, now)
        for node in emitters:
            self.protocol.on_beacon(self, node, now)

    def protocol_phase(self, now: float) -> None:
        ready = sorted(self.dirty)
        self.dirty = set()
        for eid in ready:
            if self.protocol.tick(self, self.nodes[eid], now):
                self.dirty.add(eid)

    def step_transfers(self, dt: float, now: float) -> None:
        """Drain each ordered link's queue head by bandwidth*dt, spilling
        leftover budget into the next queued transfer on completion."""
        done_keys = []
        links = self.links
        nodes = self.nodes
        full_budget = self.scenario.bandwidth * dt
        threshold = now - _TIME_EPS
        # dict order is insertion order, itself a deterministic function of
        # the run; no canonical sort needed.
        for key in list(self.queues):
            q = self.queues[key]
            a, b = key
            if q and ((a, b) if a < b else (b, a)) not in links:
                while q:
                    self._abort(q.popleft(), now)
            budget = full_budget
            while q and budget > _BYTE_EPS:
                t = q[0]
                if t.queued_at >= threshold:
                    break  # enqueued this tick; transmission starts next tick
                if t.bundle_id not in nodes[t.from_eid].buffer:
                    self._abort(q.popleft(), now)
                    continue
                if t.started_at is None:
                    t.started_at = now
                take = t.bytes_remaining
                if take > budget:
                    take = budget
                t.bytes_remaining -= take
                budget -= take
                if t.bytes_remaining <= _BYTE_EPS:
                    q.popleft()
                    self._complete(t, now)
                else:
                    break
            if not q:
                done_keys.append(key)
        for key in done_keys:
            del self.queues[key]

    def expire_ttl(self, now: float) -> None:
        while self._expiry_heap and self._expiry_heap[0][0] < now - _TIME_EPS:
            _, bid = heapq.heappop(self._expiry_heap)
            self.log.record(now, EventLog.EXPIRED, bid)
            for eid in sorted(self.holders.get(bid, set())):
                node = self.nodes[eid]
                copy = node.buffer.pop(bid, None)
                if copy is not None:
                    self.after_copy_removed(node, copy, EventLog.EXPIRED, now)
            self.holders.pop(bid, None)

    def generate_traffic(self, now: float) -> None:
        s = self.scenario
        while True:
            due = (self._gen_k + 1) * s.message_interval
            if due > now + _TIME_EPS or due > s.sim_duration + _TIME_EPS:
                return
            self._gen_k += 1
            n = s.node_count
            src = int(self._traffic_rng.integers(n))
            dst = int(self._traffic_rng.integers(n - 1))
            if dst >= src:
                dst += 1
            bid = f"m{self._gen_k}"
            node = self.nodes[src]
            copy = BundleCopy(
                bundle_id=bid,
                source_eid=src,
                dest_eid=dst,
                size=s.message_size,
                created_at=now,
                ttl=s.ttl,
                hop_count=0,
                source_position=node.position,
            )
            self.bundles[bid] = (src, dst, s.message_size, now)
            heapq.heappush(self._expiry_heap, (now + s.ttl, bid))
            self.log.record(now, EventLog.CREATED, bid, src, dst, hop=0)
            self.buffer_insert(node, copy, now)
            self.protocol.on_bundle_created(self, node, copy)
            self.mark_dirty(src)

    # -- buffers and transfers ----------------------------------------------

    def buffer_insert(
        self, node: NodeState, copy: BundleCopy, now: float
    ) -> tuple[bool, list[str]]:
        """Install a copy, evicting oldest-received non-source copies (then,
        as a last resort, source-originated ones) until it fits. Duplicates
        are refused without eviction."""
        if copy.size > self.scenario.buffer_size:
            raise ValueError(
                f"copy of {copy.size} B exceeds buffer of {self.scenario.buffer_size} B"
            )
        if copy.bundle_id in node.buffer:
            return False, []
        dropped: list[str] = []
        if node.buffer_used + copy.size > self.scenario.buffer_size:
            victims = [
                b for b, c in node.buffer.items() if c.source_eid != node.eid
            ] + [b for b, c in node.buffer.items() if c.source_eid == node.eid]
            for victim in victims:
                if node.buffer_used + copy.size <= self.scenario.buffer_size:
                    break
                vcopy = node.buffer.pop(victim)
                self.after_copy_removed(node, vcopy, EventLog.DROPPED, now)
                dropped.append(victim)
        node.buffer[copy.bundle_id] = copy
        node.buffer_used += copy.size
        node.buffer_version += 1
        self.holders.setdefault(copy.bundle_id, set()).add(node.eid)
        self.mark_dirty(node.eid)
        return True, dropped

    def remove_copy(
        self, node: NodeState, bundle_id: str, reason: str, now: float
    ) -> None:
        copy = node.buffer.pop(bundle_id, None)
        if copy is not None:
            self.after_copy_removed(node, copy, reason, now)

    def after_copy_removed(
        self, node: NodeState, copy: BundleCopy, reason: str, now: float
    ) -> None:
        """Bookkeeping for a copy already popped from a node's buffer.

        DROPPED and PURGED removals log one event per copy; EXPIRED is
        logged once per bundle at the TTL sweep, FORWARDED not at all (the
        preceding RELAYED event already recorded the move).
        """
        node.buffer_used -= copy.size
        node.buffer_version += 1
        held = self.holders.get(copy.bundle_id)
        if held is not None:
            held.discard(node.eid)
            if not held:
                del self.holders[copy.bundle_id]
        for t in list(self._pending_fb.get((node.eid, copy.bundle_id), ())):
            self.queues[(t.from_eid, t.to_eid)].remove(t)
            self._abort(t, now)
        if reason in (EventLog.DROPPED, EventLog.PURGED):
            self.log.record(now, reason, copy.bundle_id, node.eid, hop=copy.hop_count)
        self.protocol.on_copy_removed(self, node, copy, reason)
        self.mark_dirty(node.eid)

    def schedule_transfer(
        self, from_eid: int, to_eid: int, bundle_id: str, now: float
    ) -> bool:
        """Enqueue a bundle on the (from, to) link; refuses unlinked pairs,
        duplicates of a pending transfer, and bundles the sender lacks.
        Marks the target in the copy's replicated_to (rolled back on abort)."""
        if from_eid == to_eid or not self.is_linked(from_eid, to_eid):
            return False
        if (from_eid, to_eid, bundle_id) in self._pending_triples:
            return False
        sender = self.nodes[from_eid]
        copy = sender.buffer.get(bundle_id)
        if copy is None:
            return False
        receiver = self.nodes[to_eid]
        marked = to_eid not in copy.replicated_to
        if marked:
            copy.replicated_to.add(to_eid)
        t = Transfer(
            from_eid=from_eid,
            to_eid=to_eid,
            bundle_id=bundle_id,
            size=copy.size,
            bytes_remaining=float(copy.size),
            queued_at=now,
            started_at=None,
            sender_pos=sender.position,
            target_pos=receiver.position,
            marked=marked,
        )
        self.queues.setdefault((from_eid, to_eid), deque()).append(t)
        self._pending_triples.add((from_eid, to_eid, bundle_id))
        self._pending_fb.setdefault((from_eid, bundle_id), []).append(t)
        self.mark_dirty(from_eid)
        return True

    def _unregister(self, t: Transfer) -> None:
        self._pending_triples.discard((t.from_eid, t.to_eid, t.bundle_id))
        lst = self._pending_fb.get((t.from_eid, t.bundle_id))
        if lst is not None:
            lst.remove(t)
            if not lst:
                del self._pending_fb[(t.from_eid, t.bundle_id)]

    def _abort(self, t: Transfer, now: float) -> None:
        self._unregister(t)
        if t.marked:
            copy = self.nodes[t.from_eid].buffer.get(t.bundle_id)
            if copy is not None:
                copy.replicated_to.discard(t.to_eid)
        self.log.record(now, EventLog.ABORTED, t.bundle_id, t.from_eid, t.to_eid)
        self.mark_dirty(t.from_eid)
        self.mark_dirty(t.to_eid)

    def _complete(self, t: Transfer, now: float) -> None:
        sender = self.nodes[t.from_eid]
        receiver = self.nodes[t.to_eid]
        copy = sender.buffer[t.bundle_id]
        self._unregister(t)
        hop = copy.hop_count + 1
        self.log.record(now, EventLog.RELAYED, t.bundle_id, t.from_eid, t.to_eid, hop)
        installed = None
        if t.bundle_id not in receiver.buffer:
            clone = BundleCopy(
                bundle_id=copy.bundle_id,
                source_eid=copy.source_eid,
                dest_eid=copy.dest_eid,
                size=copy.size,
                created_at=copy.created_at,
                ttl=copy.ttl,
                hop_count=hop,
                source_position=copy.source_position,
                anchor_position=t.sender_pos,
            )
            ok, _ = self.buffer_insert(receiver, clone, now)
            if ok:
                installed = clone
        if (
            installed is not None
            and receiver.eid == copy.dest_eid
            and t.bundle_id not in self.log.delivered_bundles
        ):
            self.log.record(
                now, EventLog.DELIVERED, t.bundle_id, t.from_eid, t.to_eid, hop
            )
        self.protocol.on_transfer_complete(self, t, sender, receiver, installed)
        self.mark_dirty(t.from_eid)
        self.mark_dirty(t.to_eid)


def run(
    scenario: Scenario,
    tick_callback: Callable[[World, float], None] | None = None,
) -> EventLog:
    """Execute one simulation; identical (scenario, seed) gives a bit-identical
    event log. Per tick, in fixed order: mobility, link detection, Hello
    emission/processing and neighbor expiry, protocol decisions (direct
    deliveries before replication), transfer stepping, TTL expiry, traffic.
    """
    scenario.validate()
    world = World(scenario)
    dt = scenario.clock_step
    for step in range(scenario.n_ticks):
        now = (step + 1) * dt
        world.now = now
        world.move_nodes(dt)
        world.detect_links()
        world.hello_phase(now)
        world.protocol_phase(now)
        world.step_transfers(dt, now)
        world.expire_ttl(now)
        world.generate_traffic(now)
        if tick_callback is not None:
            tick_callback(world, now)
    return world.log
