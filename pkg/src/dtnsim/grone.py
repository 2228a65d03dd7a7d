"""Position-based replication protocol state and decisions.

Hello beaconing feeds a per-node neighbor table (the protocol's only
routing state); copies spread away from their anchor by replicating to the
best-utility neighbor in each forward sector, fall back to naive
replication with a single neighbor, and redundant copies are purged when
two holders advertise the same bundle from closer than the purge distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import (
    Position,
    SectorFrame,
    SectorLabel,
    ZERO_VECTOR_COSINE,
    direction_cosine,
    distance,
    forward_sector_of,
    lens_area,
    vec_between,
)

# Weight of the direction term; scales cos - sqrt(2)/2 into [0, 1/2].
_DIRECTION_GAIN = 1.0 + ZERO_VECTOR_COSINE


@dataclass(frozen=True)
class HelloMessage:
    """Periodic beacon: sender identity, position and held-bundle summary."""

    sender_eid: int
    sender_position: Position
    summary_vector: frozenset[str]


@dataclass
class NeighborEntry:
    eid: int
    position: Position
    last_hello_time: float
    missed_count: int = 0


@dataclass
class BundleCopy:
    """One node's copy of a message.

    anchor_position is the point the copy spreads away from: the sender's
    position at hand-off, or for a fresh copy at its source, unset until the
    nearest-neighbor bootstrap (or single-neighbor fallback) assigns it.
    replicated_to records relays this copy was already sent toward and never
    contains the holder itself.
    """

    bundle_id: str
    source_eid: int
    dest_eid: int
    size: int
    created_at: float
    ttl: float
    hop_count: int
    source_position: Position
    anchor_position: Position | None = None
    replicated_to: set[int] = field(default_factory=set)


@dataclass
class GroneConfig:
    radius_R: float
    hello_interval: float = 1.0
    purge_distance: float | None = None  # defaults to R/2

    def __post_init__(self) -> None:
        if self.purge_distance is None:
            self.purge_distance = self.radius_R / 2.0
        if not (0.0 < self.purge_distance < self.radius_R):
            raise ValueError(
                f"purge_distance must lie in (0, R); got {self.purge_distance}"
            )

    @property
    def margin_fraction(self) -> float:
        """Disc fraction two holders share at the purge distance (~0.685)."""
        return lens_area(self.purge_distance, self.radius_R) / (
            math.pi * self.radius_R * self.radius_R
        )


@dataclass
class GroneState:
    """Per-node protocol state: configuration plus the live neighbor table."""

    config: GroneConfig
    neighbors: dict[int, NeighborEntry] = field(default_factory=dict)


def utility(frame: SectorFrame, x: Position, candidate: Position) -> float:
    """Relay quality of a candidate inside the frame, in [0, 1] in-sector.

    Sum of a distance term d/(2R) and a direction term
    (1 + sqrt(2)/2) * (cos<x->candidate, bisector> - sqrt(2)/2) against the
    bisector of the candidate's own sector. A co-located candidate scores
    exactly 0 through the zero-vector cosine convention; the maximum 1.0 is
    reached at distance R on a bisector.
    """
    d = distance(x, candidate)
    if d > frame.radius:
        raise ValueError(f"candidate at {d:.3f} m exceeds radius {frame.radius}")
    sector = forward_sector_of(frame, candidate)
    w = vec_between(x, candidate)
    if sector is SectorLabel.SECTOR_B:
        bisector = frame.bisector_b
    elif sector is SectorLabel.SECTOR_A:
        bisector = frame.bisector_a
    else:
        # Backward candidates are never selected; score against the nearer
        # bisector so the function stays total (value then falls below 0).
        ca = direction_cosine(w, frame.bisector_a)
        cb = direction_cosine(w, frame.bisector_b)
        bisector = frame.bisector_a if ca >= cb else frame.bisector_b
    cos_term = direction_cosine(w, bisector)
    return d / (2.0 * frame.radius) + _DIRECTION_GAIN * (cos_term - ZERO_VECTOR_COSINE)


def bootstrap_source(
    state: GroneState, node_eid: int, node_position: Position, copy: BundleCopy
) -> int | None:
    """Pick the nearest neighbor as a fresh source copy's first relay.

    Only applies at the bundle's source while the anchor is unset and at
    least two neighbors are live; ties on distance break toward the smaller
    EID. Returns None when the preconditions fail (callers fall back to
    naive replication or wait).
    """
    if node_eid != copy.source_eid or copy.anchor_position is not None:
        return None
    if len(state.neighbors) < 2:
        return None
    best: tuple[float, int] | None = None
    for eid, entry in state.neighbors.items():
        if eid in copy.replicated_to or eid == node_eid:
            continue
        d = distance(node_position, entry.position)
        if d > state.config.radius_R:
            continue
        if best is None or (d, eid) < best:
            best = (d, eid)
    return best[1] if best is not None else None


_COS_45 = ZERO_VECTOR_COSINE


def select_relays(
    state: GroneState, node_eid: int, node_position: Position, copy: BundleCopy
) -> list[tuple[int, SectorLabel]]:
    """Best-utility neighbor of each forward sector, at most two relays.

    Builds the sector frame from the copy's anchor through the node,
    classifies every in-range neighbor that is neither the bundle's source
    nor already in replicated_to, and keeps the argmax-utility candidate per
    non-empty sector (ties to the smaller EID). Neighbors behind the
    perpendicular are never selected.

    The geometry of forward_sector_of and utility is inlined here with
    scalar arithmetic; this is the innermost loop of a run.
    """
    assert copy.anchor_position is not None
    radius = state.config.radius_R
    r2 = radius * radius
    px, py = node_position.x, node_position.y
    ux = px - copy.anchor_position.x
    uy = py - copy.anchor_position.y
    norm = math.hypot(ux, uy)
    if norm == 0.0:
        ux, uy = 1.0, 0.0  # degenerate anchor: +x axis, as in from_anchor
    else:
        ux /= norm
        uy /= norm
    bax = (ux - uy) * _COS_45  # axis rotated +pi/4
    bay = (ux + uy) * _COS_45
    bbx = (ux + uy) * _COS_45  # axis rotated -pi/4
    bby = (uy - ux) * _COS_45
    skip = copy.replicated_to
    source = copy.source_eid
    best_a: tuple[float, int] | None = None
    best_b: tuple[float, int] | None = None
    for eid, entry in state.neighbors.items():
        if eid in skip or eid == source:
            continue
        pos = entry.position
        wx = pos.x - px
        wy = pos.y - py
        d2 = wx * wx + wy * wy
        if d2 > r2:
            continue
        if d2 == 0.0:
            in_a, score = True, 0.0  # co-located: sector A by convention
        else:
            if wx * ux + wy * uy < 0.0:
                continue  # backward half-plane
            in_a = ux * wy - uy * wx >= 0.0
            d = math.sqrt(d2)
            cos_t = (wx * bax + wy * bay) / d if in_a else (wx * bbx + wy * bby) / d
            if cos_t > 1.0:
                cos_t = 1.0
            score = d / (2.0 * radius) + _DIRECTION_GAIN * (cos_t - ZERO_VECTOR_COSINE)
        key = (-score, eid)  # higher score wins, then lower eid
        if in_a:
            if best_a is None or key < best_a:
                best_a = key
        elif best_b is None or key < best_b:
            best_b = key
    out: list[tuple[int, SectorLabel]] = []
    if best_a is not None:
        out.append((best_a[1], SectorLabel.SECTOR_A))
    if best_b is not None:
        out.append((best_b[1], SectorLabel.SECTOR_B))
    return out


def naive_replicate(state: GroneState, node_eid: int, copy: BundleCopy) -> int | None:
    """Replicate to the sole live neighbor, geometry ignored.

    Applies only with exactly one live neighbor that has not already been
    sent this copy and is not the bundle's source. Close neighbors still
    receive the copy (redundancy is the purge mechanism's job, and a now-bad
    relay may carry the bundle somewhere useful later).
    """
    if len(state.neighbors) != 1:
        return None
    (eid,) = state.neighbors.keys()
    if eid in copy.replicated_to or eid == copy.source_eid:
        return None
    return eid


def on_hello(
    state: GroneState,
    node_eid: int,
    node_position: Position,
    buffer: dict[str, BundleCopy],
    hello: HelloMessage,
    now: float,
) -> tuple[NeighborEntry, list[BundleCopy]]:
    """Process a received beacon: refresh the table, then maybe purge.

    The sender's entry is upserted with a zeroed missed count. If the sender
    is closer than the purge distance, every bundle both sides hold is
    deleted from the local buffer when this node has the larger EID and is
    neither the bundle's source nor its destination -- exactly one side of a
    close pair drops each shared copy, with no coordination. Returns the
    updated entry and the copies removed from `buffer`.
    """
    entry = NeighborEntry(
        eid=hello.sender_eid,
        position=hello.sender_position,
        last_hello_time=now,
        missed_count=0,
    )
    state.neighbors[hello.sender_eid] = entry
    purged: list[BundleCopy] = []
    if (
        node_eid > hello.sender_eid
        and distance(node_position, hello.sender_position) < state.config.purge_distance
    ):
        for bid in [b for b in buffer if b in hello.summary_vector]:
            copy = buffer[bid]
            if node_eid in (copy.source_eid, copy.dest_eid):
                continue
            purged.append(buffer.pop(bid))
    return entry, purged


def expire_neighbors(state: GroneState, now: float) -> list[int]:
    """Audit the table once per beacon interval; drop thrice-missed entries.

    An entry whose last Hello is older than one interval gains a missed
    count; it survives two misses (one loss may be MAC conflict or delay)
    and is removed on the third. A later Hello may revive a removed entry.
    """
    interval = state.config.hello_interval
    removed: list[int] = []
    for eid in list(state.neighbors):
        entry = state.neighbors[eid]
        if now - entry.last_hello_time > interval:
            entry.missed_count += 1
            if entry.missed_count > 2:
                removed.append(eid)
                del state.neighbors[eid]
    return removed


def deliver_pass(
    state: GroneState, node_eid: int, buffer: dict[str, BundleCopy]
) -> list[tuple[str, int]]:
    """Bundles whose destination is a live neighbor, ready for direct transfer.

    Runs before any replication decision each protocol tick; a copy is
    offered to its destination once (the enqueue marks replicated_to).
    """
    out: list[tuple[str, int]] = []
    for bid, copy in buffer.items():
        if copy.dest_eid == node_eid:
            continue
        if copy.dest_eid in state.neighbors and copy.dest_eid not in copy.replicated_to:
            out.append((bid, copy.dest_eid))
    return out


class GroneProtocol:
    """Engine adapter: wires the decision functions into the tick loop."""

    name = "grone"
    uses_neighbor_tables = True

    def __init__(self, scenario) -> None:
        self.config = GroneConfig(
            radius_R=scenario.radius_R, hello_interval=scenario.hello_interval
        )

    def node_state(self, eid: int) -> GroneState:
        return GroneState(config=self.config)

    def on_bundle_created(self, world, node, copy) -> None:
        pass

    def on_hello(self, world, node, hello: HelloMessage, now: float) -> None:
        _, purged = on_hello(
            node.protocol_state, node.eid, node.position, node.buffer, hello, now
        )
        for copy in purged:
            world.after_copy_removed(node, copy, world.log.PURGED, now)
        world.mark_dirty(node.eid)

    def on_beacon(self, world, node, now: float) -> None:
        if expire_neighbors(node.protocol_state, now):
            world.mark_dirty(node.eid)

    def tick(self, world, node, now: float) -> int:
        state: GroneState = node.protocol_state
        scheduled = 0
        for bid, dest in deliver_pass(state, node.eid, node.buffer):
            if world.schedule_transfer(node.eid, dest, bid, now):
                scheduled += 1
        if not state.neighbors:
            return scheduled
        neighbor_keys = state.neighbors.keys()
        for bid, copy in node.buffer.items():
            if copy.dest_eid == node.eid:
                continue
            if copy.dest_eid in state.neighbors:
                continue  # deliverable this tick; not replicated
            if copy.anchor_position is not None and copy.replicated_to.issuperset(
                neighbor_keys
            ):
                continue  # every live neighbor already has this copy underway
            if copy.anchor_position is None:
                # Source copy awaiting its anchor: one pending hand-off at a
                # time, so a completed bootstrap pins exactly one anchor.
                if world.has_pending_outbound(node.eid, bid):
                    continue
                if len(state.neighbors) >= 2:
                    target = bootstrap_source(state, node.eid, node.position, copy)
                else:
                    target = naive_replicate(state, node.eid, copy)
                if target is not None and world.schedule_transfer(
                    node.eid, target, bid, now
                ):
                    scheduled += 1
            elif len(state.neighbors) >= 2:
                for target, _sector in select_relays(
                    state, node.eid, node.position, copy
                ):
                    if world.schedule_transfer(node.eid, target, bid, now):
                        scheduled += 1
            else:
                target = naive_replicate(state, node.eid, copy)
                if target is not None and world.schedule_transfer(
                    node.eid, target, bid, now
                ):
                    scheduled += 1
        return scheduled

    def on_transfer_complete(self, world, transfer, sender, receiver, installed) -> None:
        # First completed hand-off of an anchorless source copy fixes its
        # anchor at the relay's send-time position, so source and relay
        # spread the bundle in opposite half-planes from then on.
        copy = sender.buffer.get(transfer.bundle_id)
        if copy is not None and copy.anchor_position is None:
            copy.anchor_position = transfer.target_pos

    def on_copy_removed(self, world, node, copy, reason) -> None:
        pass
