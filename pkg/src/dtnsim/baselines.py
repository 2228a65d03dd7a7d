"""Reference routing protocols driven by the engine's contact events.

Epidemic (summary-vector anti-entropy), Binary Spray & Wait (halving ticket
pools), FirstContact (single copy, blind forward, record vector against
loops) and Direct Delivery (source holds until it meets the destination).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Removal reason the engine passes to protocol hooks when a copy leaves a
# buffer by protocol decision (FirstContact's drop-after-forward) rather
# than by buffer pressure, TTL or purging.
FORWARDED = "FORWARDED"


@dataclass
class SprayState:
    """Ticket pool of one bundle copy; tickets == 1 means wait phase."""

    bundle_id: str
    tickets: int


@dataclass
class FcRecordVector:
    """Nodes that ever held a FirstContact bundle's single copy."""

    bundle_id: str
    visited: set[int] = field(default_factory=set)


def epidemic_exchange(
    a_eid: int,
    a_bundles: list[str],
    b_eid: int,
    b_bundles: list[str],
) -> list[tuple[int, int, str]]:
    """Anti-entropy transfer list for a contact: each side gets what it lacks.

    Bundle lists are the holders' buffers in insertion order; transfers keep
    that order per direction, a's sends first.
    """
    have_a = set(a_bundles)
    have_b = set(b_bundles)
    out = [(a_eid, b_eid, m) for m in a_bundles if m not in have_b]
    out += [(b_eid, a_eid, m) for m in b_bundles if m not in have_a]
    return out


def snw_forward(
    state: SprayState, peer_eid: int, dest_eid: int, peer_has_bundle: bool
) -> tuple[bool, int, int]:
    """Spray-or-wait decision for one contact: (transfer?, keep, give).

    Spray phase (tickets > 1) hands floor(t/2) tickets to the peer and keeps
    ceil(t/2); the wait phase forwards only to the destination itself, which
    receives the copy but no tickets.
    """
    t = state.tickets
    if peer_has_bundle:
        return False, t, 0
    if peer_eid == dest_eid:
        return True, t, 0
    if t > 1:
        give = t // 2
        return True, t - give, give  # keep = ceil(t/2)
    return False, t, 0


def fc_forward(record: FcRecordVector, contact_eids: list[int]) -> int | None:
    """First contact not yet in the record vector; ties to the lowest EID."""
    for eid in sorted(contact_eids):
        if eid not in record.visited:
            return eid
    return None


def dd_forward(dest_eid: int, contact_eids: list[int]) -> int | None:
    """Hand over only when the destination itself is a contact."""
    return dest_eid if dest_eid in contact_eids else None


class _ContactProtocol:
    """Shared no-op hooks for the contact-driven baselines."""

    uses_neighbor_tables = False

    def __init__(self, scenario) -> None:
        self.scenario = scenario

    def node_state(self, eid: int):
        return None

    def on_bundle_created(self, world, node, copy) -> None:
        pass

    def on_hello(self, world, node, hello, now) -> None:
        pass

    def on_beacon(self, world, node, now) -> None:
        pass

    def on_transfer_complete(self, world, transfer, sender, receiver, installed) -> None:
        pass

    def on_copy_removed(self, world, node, copy, reason) -> None:
        pass


class EpidemicProtocol(_ContactProtocol):
    name = "epidemic"

    def node_state(self, eid: int) -> dict:
        return {}  # peer -> (own version, peer version, link epoch) last diffed

    def tick(self, world, node, now: float) -> int:
        # Each endpoint schedules its own half of the exchange; the peer's
        # tick covers the other half. A contact is re-diffed only when a
        # buffer changed or the link re-formed (completions and drops bump
        # the buffer versions, so no exchange is missed).
        cache: dict = node.protocol_state
        scheduled = 0
        for peer_eid in world.linked_peers(node.eid):
            peer = world.nodes[peer_eid]
            stamp = (
                node.buffer_version,
                peer.buffer_version,
                world.link_epoch_of(node.eid, peer_eid),
            )
            if cache.get(peer_eid) == stamp:
                continue
            # this node's half of epidemic_exchange, inlined
            peer_buffer = peer.buffer
            for bid in node.buffer:
                if bid not in peer_buffer and world.schedule_transfer(
                    node.eid, peer_eid, bid, now
                ):
                    scheduled += 1
            cache[peer_eid] = stamp
        return scheduled


class SprayWaitProtocol(_ContactProtocol):
    name = "snw"

    def __init__(self, scenario) -> None:
        super().__init__(scenario)
        self.initial_tickets = scenario.snw_tickets

    def node_state(self, eid: int) -> dict[str, int]:
        return {}  # bundle id -> tickets held by this node's copy

    def on_bundle_created(self, world, node, copy) -> None:
        node.protocol_state[copy.bundle_id] = self.initial_tickets

    def tick(self, world, node, now: float) -> int:
        tickets: dict[str, int] = node.protocol_state
        scheduled = 0
        for bid, copy in list(node.buffer.items()):
            if copy.dest_eid == node.eid or bid not in tickets:
                continue
            if world.has_pending_outbound(node.eid, bid):
                continue  # one spray in flight keeps the ticket split exact
            state = SprayState(bid, tickets[bid])
            for peer_eid in world.linked_peers(node.eid):
                transfer, _, _ = snw_forward(
                    state, peer_eid, copy.dest_eid, bid in world.nodes[peer_eid].buffer
                )
                if transfer and world.schedule_transfer(node.eid, peer_eid, bid, now):
                    scheduled += 1
                    break
        return scheduled

    def on_transfer_complete(self, world, transfer, sender, receiver, installed) -> None:
        bid = transfer.bundle_id
        tickets: dict[str, int] = sender.protocol_state
        if bid not in tickets:
            return
        if receiver.eid == world.bundle_dest(bid):
            return  # delivery: destination copies carry no tickets
        if installed:
            t = tickets[bid]
            give = t // 2
            tickets[bid] = t - give
            receiver.protocol_state[bid] = give

    def on_copy_removed(self, world, node, copy, reason) -> None:
        node.protocol_state.pop(copy.bundle_id, None)


class FirstContactProtocol(_ContactProtocol):
    name = "fc"

    def node_state(self, eid: int) -> dict[str, FcRecordVector]:
        return {}

    def on_bundle_created(self, world, node, copy) -> None:
        node.protocol_state[copy.bundle_id] = FcRecordVector(
            copy.bundle_id, {node.eid}
        )

    def tick(self, world, node, now: float) -> int:
        records: dict[str, FcRecordVector] = node.protocol_state
        scheduled = 0
        for bid, copy in list(node.buffer.items()):
            if copy.dest_eid == node.eid or bid not in records:
                continue
            if world.has_pending_outbound(node.eid, bid):
                continue
            target = fc_forward(records[bid], world.linked_peers(node.eid))
            if target is not None and world.schedule_transfer(
                node.eid, target, bid, now
            ):
                scheduled += 1
        return scheduled

    def on_transfer_complete(self, world, transfer, sender, receiver, installed) -> None:
        bid = transfer.bundle_id
        records: dict[str, FcRecordVector] = sender.protocol_state
        record = records.get(bid)
        if record is None:
            return
        if installed:
            record.visited.add(receiver.eid)
            receiver.protocol_state[bid] = record
        elif receiver.eid != world.bundle_dest(bid):
            return  # duplicate refusal elsewhere: keep the sole copy
        # Drop only after the transfer completed, never on abort.
        del records[bid]
        world.remove_copy(sender, bid, FORWARDED, world.now)

    def on_copy_removed(self, world, node, copy, reason) -> None:
        if reason != FORWARDED:  # buffer drop or TTL took the sole copy
            node.protocol_state.pop(copy.bundle_id, None)


class DirectDeliveryProtocol(_ContactProtocol):
    name = "dd"

    def tick(self, world, node, now: float) -> int:
        scheduled = 0
        for bid, copy in node.buffer.items():
            if copy.dest_eid == node.eid or copy.dest_eid in copy.replicated_to:
                continue
            target = dd_forward(copy.dest_eid, world.linked_peers(node.eid))
            if target is not None and world.schedule_transfer(
                node.eid, target, bid, now
            ):
                scheduled += 1
        return scheduled
