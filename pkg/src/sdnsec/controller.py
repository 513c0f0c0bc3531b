"""Per-domain controller pipeline: admission, rule synthesis, credentials.

A packet-in runs through a fixed pipeline: flood accounting, handle
validation, token verification, context extraction, repository selection,
constraint merging, route resolution and finally rule synthesis.  The result
is either a batch of flow rules (plus, for flows leaving the domain, an
extended handle and re-tagged transfer token) or a drop with a reason.

Deterministic service cost in ticks is charged per stage so latency and
throughput experiments are reproducible: scanning the repository costs per
expression, path search costs per switch in the fabric, synthesis per rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from ipaddress import IPv4Address

from .dataplane import (
    ARP_RULE_PRIORITY,
    BLOCK_RULE_PRIORITY,
    FLOW_RULE_PRIORITY,
    ActionKind,
    FlowMatch,
    FlowRule,
    Packet,
)
from .defense import FloodMonitor, Verdict
from .interdomain import (
    Handle,
    IntegrityError,
    PolicyTransferToken,
    UNSATISFIABLE,
    extend_handle_record,
    merge_constraints,
    mint_handle,
    mint_ptt,
    retag_ptt,
    validate_handle,
    verify_ptt,
)
from .labels import LabelWindow
from .policy import (
    Action,
    Constraint,
    ConstraintKind,
    Decision,
    DomainInfo,
    FlowContext,
    PolicyExpression,
    select_policy,
)
from .topology import (
    ASDescriptor,
    NoPathError,
    TopologyRepository,
    find_as_paths,
    find_switch_path,
    gateway_name,
)

__all__ = [
    "Controller",
    "ControllerEvent",
    "CostModel",
    "DropReason",
    "FlowModBatch",
    "PipelineResult",
    "arp_discovery_rule",
    "synthesize_rules",
]


class DropReason:
    POLICY = "POLICY"
    NO_SATISFYING_PATH = "NO_SATISFYING_PATH"
    NO_ROUTE = "NO_ROUTE"
    HANDLE_INVALID = "HANDLE_INVALID"
    UNSATISFIABLE = "UNSATISFIABLE_CONSTRAINTS"
    DEFENSE_THROTTLED = "DEFENSE_THROTTLED"
    DEFENSE_BLOCKED = "DEFENSE_BLOCKED"
    RATE_LIMIT = "RATE_LIMIT"


@dataclass(frozen=True)
class CostModel:
    """Deterministic tick charges per pipeline stage."""

    base: int = 5
    defense: int = 5
    per_pe: int = 2
    per_switch: int = 2
    per_rule: int = 1


@dataclass(frozen=True)
class FlowModBatch:
    """Rules to install, attributed to the decision that produced them."""

    installs: tuple[tuple[str, FlowRule], ...]
    provenance: str

    def __len__(self) -> int:
        return len(self.installs)


@dataclass(frozen=True)
class PipelineResult:
    verdict: str  # install | drop
    reason: str = ""
    batch: FlowModBatch | None = None
    block_batch: FlowModBatch | None = None
    disposition: str | None = None  # deliver | egress
    next_as: str | None = None
    egress_switch: str | None = None
    handle_out: Handle | None = None
    ptt_out: PolicyTransferToken | None = None
    matched_pe: str | None = None
    service_ticks: int = 0

    @property
    def installed(self) -> bool:
        return self.verdict == "install"


@dataclass
class ControllerEvent:
    tick: int
    flow_id: str
    summary: str
    verdict: str
    reason: str
    matched_pe: str | None
    rules_installed: int
    service_ticks: int


def arp_discovery_rule() -> FlowRule:
    """Default controller-installed entry for network discovery traffic."""
    return FlowRule(FlowMatch(packet_type="ARP"), ActionKind.TO_CONTROLLER, ARP_RULE_PRIORITY)


def synthesize_rules(
    path: tuple[str, ...],
    packet: Packet,
    pe_id: str,
    *,
    final_peer: str,
    entry_peer: str,
    port_of,
    sec_profile: frozenset[str] = frozenset(),
) -> FlowModBatch:
    """One forward rule per path switch plus the symmetric return set.

    Rules match the flow's (addresses, protocol, port, type) tuple.
    ``final_peer`` is what the last switch forwards to (a host or the peer
    domain's gateway); ``entry_peer`` is what the first switch's return rule
    forwards to.  ``port_of(switch, peer)`` resolves port numbers.
    """
    if not path:
        raise ValueError("cannot synthesize rules for an empty path")
    forward_match = FlowMatch(
        src_ip=packet.src_ip,
        dst_ip=packet.dst_ip,
        ip_proto=packet.ip_proto,
        service_port=packet.service_port,
        packet_type=packet.packet_type,
    )
    reverse_match = FlowMatch(
        src_ip=packet.dst_ip,
        dst_ip=packet.src_ip,
        ip_proto=packet.ip_proto,
        service_port=packet.service_port,
        packet_type=packet.packet_type,
    )
    installs: list[tuple[str, FlowRule]] = []
    hops = list(path)
    for index, switch in enumerate(hops):
        peer = hops[index + 1] if index + 1 < len(hops) else final_peer
        installs.append(
            (
                switch,
                FlowRule(
                    forward_match,
                    ActionKind.FORWARD,
                    FLOW_RULE_PRIORITY,
                    out_port=port_of(switch, peer),
                    sec_profile_tags=sec_profile,
                ),
            )
        )
    for index, switch in enumerate(hops):
        peer = hops[index - 1] if index > 0 else entry_peer
        installs.append(
            (
                switch,
                FlowRule(
                    reverse_match,
                    ActionKind.FORWARD,
                    FLOW_RULE_PRIORITY,
                    out_port=port_of(switch, peer),
                    sec_profile_tags=sec_profile,
                ),
            )
        )
    return FlowModBatch(tuple(installs), provenance=pe_id)


class Controller:
    """One domain's decision point; state is touched only by the event loop."""

    def __init__(
        self,
        descriptor: ASDescriptor,
        policy_repo: list[PolicyExpression],
        topo: TopologyRepository,
        handle_key: bytes,
        *,
        monitor: FloodMonitor | None = None,
        key_ring: dict[str, bytes] | None = None,
        user_bindings: dict[str, str] | None = None,
        host_switch: dict[IPv4Address, str] | None = None,
        host_names: dict[IPv4Address, str] | None = None,
        world_repos: list[TopologyRepository] | None = None,
        enforcement_enabled: bool = True,
        costs: CostModel = CostModel(),
        port_of=None,
        window_ticks: int = 1_000_000,
    ):
        if not handle_key:
            raise ValueError("controller needs a nonempty handle key")
        ids = [pe.id for pe in policy_repo]
        if len(set(ids)) != len(ids):
            raise ValueError(f"policy repository ids must be unique: {ids}")
        self.descriptor = descriptor
        self.as_id = descriptor.as_id
        self.policy_repo = list(policy_repo)
        self.topo = topo
        self.handle_key = handle_key
        self.monitor = monitor
        self.key_ring = dict(key_ring or {})
        self.user_bindings = {mac.lower(): user for mac, user in (user_bindings or {}).items()}
        self.host_switch = dict(host_switch or {})
        self.host_names = dict(host_names or {})
        self.world_repos = world_repos if world_repos is not None else [topo]
        self.enforcement_enabled = enforcement_enabled
        self.costs = costs
        self._port_of = port_of
        self.window_ticks = window_ticks
        self.events: list[ControllerEvent] = []
        self.flow_state: dict[str, PipelineResult] = {}
        self.blocked_hosts: set[str] = set()
        self.next_free_tick = 0
        self.flow_mods = 0
        # admitted flows per (source, window) for PE rate constraints
        self._rate_admitted: dict[str, tuple[int, int]] = {}

    # --- credentials ---------------------------------------------------------

    def create_handle(self, flow_id: str) -> Handle:
        return mint_handle(flow_id, self.as_id, self.handle_key)

    def extend_handle(self, handle: Handle) -> Handle:
        if not validate_handle(self, handle):
            raise IntegrityError(f"refusing to extend unverifiable handle for {handle.flow_id}")
        return extend_handle_record(handle, self.as_id, self.handle_key)

    def create_ptt(self, decision: Decision, flow_id: str) -> PolicyTransferToken | None:
        if decision.verdict is not Action.ALLOW:
            raise ValueError("transfer tokens are only minted for allowed flows")
        return mint_ptt(flow_id, self.as_id, decision.ptt_constraints, self.handle_key)

    # --- context -------------------------------------------------------------

    def _domain_info(self, as_id: str) -> DomainInfo:
        if as_id == self.as_id:
            d = self.descriptor
            return DomainInfo(d.as_id, d.subnet, d.as_type, d.sec_label)
        entry = self.topo.entries.get(as_id)
        if entry is None:
            return DomainInfo(as_id)
        return DomainInfo(as_id, entry.subnet, entry.as_type, entry.sec_label)

    def domain_for_ip(self, ip: IPv4Address) -> str | None:
        if ip in self.descriptor.subnet:
            return self.as_id
        return self.topo.domain_for_ip(ip)

    def build_context(
        self, packet: Packet, ingress: str, handle: Handle | None, tick: int
    ) -> FlowContext:
        if handle is not None:
            src_domain = handle.origin_as
            traversed = handle.visited
        else:
            src_domain = self.domain_for_ip(packet.src_ip) or self.as_id
            traversed = ()
        dst_domain = self.domain_for_ip(packet.dst_ip)
        return FlowContext(
            flow_id=packet.flow_id,
            src_as=self._domain_info(src_domain),
            dst_as=self._domain_info(dst_domain) if dst_domain else DomainInfo(""),
            src_ip=packet.src_ip,
            dst_ip=packet.dst_ip,
            src_mac=packet.src_mac,
            dst_mac=packet.dst_mac,
            service_port=packet.service_port,
            packet_type=packet.packet_type,
            timestamp=tick,
            user=self.user_bindings.get(packet.src_mac.lower()),
            traversed_path=traversed,
            ingress_switch=ingress,
        )

    # --- pipeline --------------------------------------------------------------

    def _drop(
        self, reason: str, ctx_summary: str, flow_id: str, tick: int, ticks: int, **extra
    ) -> PipelineResult:
        result = PipelineResult(verdict="drop", reason=reason, service_ticks=ticks, **extra)
        self.events.append(
            ControllerEvent(tick, flow_id, ctx_summary, "drop", reason, extra.get("matched_pe"), 0, ticks)
        )
        return result

    def _block_rule_batch(self, packet: Packet, ingress: str) -> FlowModBatch:
        rule = FlowRule(
            FlowMatch(src_ip=packet.src_ip),
            ActionKind.DROP,
            BLOCK_RULE_PRIORITY,
        )
        return FlowModBatch(((ingress, rule),), provenance=f"defense:{packet.src_ip}")

    def _peer_for_gateway(self, gateway: str) -> str | None:
        for neighbor in self.topo.neighbors():
            if gateway_name(self.as_id, neighbor) == gateway:
                return neighbor
        return None

    def _rate_admits(self, src: str, constraints, tick: int) -> bool:
        """Per-source admission against the tightest rate constraint in play
        (requests per window)."""
        rates = [c.rate for c in constraints if c.kind is ConstraintKind.RATE_THRESHOLD]
        if not rates:
            return True
        budget = math.floor(min(rates))
        window = tick // self.window_ticks
        seen_window, count = self._rate_admitted.get(src, (window, 0))
        if seen_window != window:
            count = 0
        if count + 1 > budget:
            return False
        self._rate_admitted[src] = (window, count + 1)
        return True

    def handle_packet_in(
        self,
        packet: Packet,
        ingress: str,
        tick: int,
        handle: Handle | None = None,
        ptt: PolicyTransferToken | None = None,
        *,
        entry_peer: str | None = None,
        defense: bool = True,
    ) -> PipelineResult:
        """Admit or drop one table-miss packet; see the module docstring."""
        ticks = self.costs.base
        flow_id = packet.flow_id
        summary = f"{packet.src_ip}->{packet.dst_ip}:{packet.service_port}/{packet.packet_type} via {ingress}"

        if self.enforcement_enabled and defense and self.monitor is not None:
            ticks += self.costs.defense
            offender = str(packet.src_ip)
            verdict = self.monitor.record_and_check(offender, ingress, tick)
            if verdict is not Verdict.OK:
                detail = (
                    f"{summary} [defense offender={offender}"
                    f" window_count={self.monitor.weighted_count(offender)}"
                    f" thost={self.monitor.thost} tsw={self.monitor.tsw}]"
                )
                if verdict is Verdict.THROTTLE:
                    return self._drop(DropReason.DEFENSE_THROTTLED, detail, flow_id, tick, ticks)
                block = None
                if offender not in self.blocked_hosts:
                    self.blocked_hosts.add(offender)
                    block = self._block_rule_batch(packet, ingress)
                return self._drop(
                    DropReason.DEFENSE_BLOCKED, detail, flow_id, tick, ticks, block_batch=block
                )

        if handle is not None and self.enforcement_enabled:
            if not validate_handle(self, handle):
                return self._drop(DropReason.HANDLE_INVALID, summary, flow_id, tick, ticks)

        verified_ptt: PolicyTransferToken | None = None
        if ptt is not None and self.enforcement_enabled:
            sender = handle.visited[-1] if handle is not None else ptt.origin_as
            key = self.key_ring.get(sender)
            if key is not None and verify_ptt(ptt, key):
                verified_ptt = ptt
            else:
                self.events.append(
                    ControllerEvent(
                        tick, flow_id, summary, "security", "PTT_TAG_INVALID", None, 0, 0
                    )
                )

        ctx = self.build_context(packet, ingress, handle, tick)

        if self.enforcement_enabled:
            ticks += self.costs.per_pe * len(self.policy_repo)
            decision = select_policy(self.policy_repo, ctx)
            if decision.verdict is Action.DENY:
                return self._drop(
                    DropReason.POLICY, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
                )
        else:
            decision = Decision(Action.ALLOW, matched_pe="baseline")

        local_constraints: list[Constraint] = []
        if decision.label_obligation is not None:
            local_constraints.append(
                Constraint(ConstraintKind.LABEL_PATH, label=decision.label_obligation)
            )
        merged = merge_constraints(tuple(local_constraints), verified_ptt)
        if merged is UNSATISFIABLE:
            return self._drop(
                DropReason.UNSATISFIABLE, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
            )
        for constraint in merged:
            if constraint.kind is ConstraintKind.PACKET_ATTR:
                actual = {"type": ctx.packet_type, "port": str(ctx.service_port)}.get(
                    constraint.attr or ""
                )
                if actual != constraint.value:
                    return self._drop(
                        DropReason.POLICY, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
                    )
        winner = next((pe for pe in self.policy_repo if pe.id == decision.matched_pe), None)
        own_constraints = (winner.flow_cons + winner.dom_cons) if winner else ()
        if not self._rate_admits(str(packet.src_ip), tuple(merged) + own_constraints, tick):
            return self._drop(
                DropReason.RATE_LIMIT, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
            )
        window = LabelWindow.conjoin(
            [c.label for c in merged if c.kind is ConstraintKind.LABEL_PATH]
        )

        dst_domain = self.domain_for_ip(packet.dst_ip)
        if dst_domain is None:
            return self._drop(
                DropReason.NO_ROUTE, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
            )

        next_as: str | None = None
        if dst_domain == self.as_id:
            disposition = "deliver"
            final_switch = self.host_switch.get(packet.dst_ip)
            if final_switch is None:
                return self._drop(
                    DropReason.NO_ROUTE, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
                )
            final_peer = self.host_names.get(packet.dst_ip, str(packet.dst_ip))
        else:
            disposition = "egress"
            if decision.exit_obligation is not None:
                # hard egress pin: the action's exit switch decides the next
                # domain; a pinned transit domain must still satisfy the
                # merged label window
                next_as = self._peer_for_gateway(decision.exit_obligation)
                entry = self.topo.entries.get(next_as) if next_as else None
                if next_as is None or entry is None or (
                    next_as != dst_domain and not window.satisfies(entry.sec_label)
                ):
                    return self._drop(
                        DropReason.NO_SATISFYING_PATH,
                        summary,
                        flow_id,
                        tick,
                        ticks,
                        matched_pe=decision.matched_pe,
                    )
            else:
                paths = find_as_paths(self.world_repos, self.as_id, dst_domain, window)
                if not paths:
                    return self._drop(
                        DropReason.NO_SATISFYING_PATH,
                        summary,
                        flow_id,
                        tick,
                        ticks,
                        matched_pe=decision.matched_pe,
                    )
                next_as = paths[0][1]
            final_switch = gateway_name(self.as_id, next_as)
            final_peer = gateway_name(next_as, self.as_id)

        intra = self.topo.intra_graph
        ticks += self.costs.per_switch * len(intra.switches())
        try:
            path = find_switch_path(
                intra,
                ingress,
                final_switch,
                required=decision.path_obligation,
                constraint=window,
            )
        except NoPathError:
            return self._drop(
                DropReason.NO_SATISFYING_PATH, summary, flow_id, tick, ticks, matched_pe=decision.matched_pe
            )

        if entry_peer is None:
            if handle is not None:
                entry_peer = gateway_name(handle.visited[-1], self.as_id)
            else:
                entry_peer = self.host_names.get(packet.src_ip, str(packet.src_ip))

        batch = synthesize_rules(
            path,
            packet,
            decision.matched_pe or "baseline",
            final_peer=final_peer,
            entry_peer=entry_peer,
            port_of=self._port_of or (lambda s, p: 0),
            sec_profile=decision.sec_profile,
        )
        ticks += self.costs.per_rule * len(batch)

        handle_out: Handle | None = None
        ptt_out: PolicyTransferToken | None = None
        if handle is not None:
            handle_out = extend_handle_record(handle, self.as_id, self.handle_key)
            if disposition == "egress":
                own_delegable = decision.ptt_constraints
                if verified_ptt is not None:
                    ptt_out = retag_ptt(verified_ptt, own_delegable, self.handle_key)
                else:
                    ptt_out = mint_ptt(flow_id, self.as_id, own_delegable, self.handle_key)
        elif disposition == "egress":
            handle_out = self.create_handle(flow_id)
            ptt_out = mint_ptt(flow_id, self.as_id, decision.ptt_constraints, self.handle_key)

        result = PipelineResult(
            verdict="install",
            batch=batch,
            disposition=disposition,
            next_as=next_as,
            egress_switch=final_switch if disposition == "egress" else None,
            handle_out=handle_out,
            ptt_out=ptt_out,
            matched_pe=decision.matched_pe,
            service_ticks=ticks,
        )
        self.flow_state[flow_id] = result
        self.events.append(
            ControllerEvent(
                tick,
                flow_id,
                summary,
                "install",
                decision.reason,
                decision.matched_pe,
                len(batch),
                ticks,
            )
        )
        return result
