"""Deterministic event-driven execution of one scenario.

The world is rebuilt from the scenario for every run: switches wired port by
port in declaration order, one controller per domain with a freshly probed
topology repository, and per-domain policy repositories.  The event loop is
a single tick-ordered heap; ties resolve in insertion order, so equal
(scenario, seed) pairs produce byte-identical reports.

Controllers are modeled as sequential servers: a packet-in waits until the
controller is free, is charged the pipeline's deterministic service ticks,
and its flow-mod batch applies at the emission tick.  Packets crossing a
domain boundary pick up the sending controller's minted handle and transfer
token at the gateway, which is where augmentation happens on a real edge.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from ipaddress import IPv4Address

from .controller import Controller, CostModel, FlowModBatch, PipelineResult, arp_discovery_rule
from .dataplane import BLOCK_RULE_PRIORITY, Packet, Switch, TableFullError
from .defense import FloodMonitor
from .interdomain import AugmentedPacket, Handle, PolicyTransferToken, forward_interdomain
from .metrics import FlowRecord, InstallRecord, LatencyRecord, MetricsReport
from .scenario import FloodSpec, HostSpec, Scenario
from .topology import ASDescriptor, ASGraph, SwitchGraph, gateway_name, probe_topology

__all__ = ["World", "build_world", "run", "wallclock_latency"]

LINK_TICK = 1


@dataclass
class _InFlight:
    packet: Packet
    record: FlowRecord
    handle: Handle | None = None
    ptt: PolicyTransferToken | None = None
    trace: list[str] = field(default_factory=list)


@dataclass
class World:
    scenario: Scenario
    as_graph: ASGraph
    switches: dict[str, Switch]
    switch_domain: dict[str, str]
    controllers: dict[str, Controller]
    hosts: dict[str, HostSpec]
    host_domain: dict[str, str]
    hosts_by_ip: dict[IPv4Address, HostSpec]

    def controller_of_switch(self, switch_id: str) -> Controller:
        return self.controllers[self.switch_domain[switch_id]]


def build_world(scenario: Scenario, costs: CostModel = CostModel()) -> World:
    as_graph = ASGraph()
    for domain in scenario.domains:
        as_graph.add_domain(
            ASDescriptor(
                as_id=domain.id,
                subnet=domain.subnet,
                as_type=domain.as_type,
                sec_label=domain.label,
                controller_id=f"C-{domain.id}",
            )
        )
    for a, b in scenario.links:
        as_graph.add_link(a, b)

    switches: dict[str, Switch] = {}
    switch_domain: dict[str, str] = {}
    intra_graphs: dict[str, SwitchGraph] = {}
    for domain in scenario.domains:
        graph = SwitchGraph()
        for spec in domain.switches:
            switches[spec.id] = Switch(spec.id, spec.label, capacity=scenario.table_capacity)
            switch_domain[spec.id] = domain.id
            graph.add_switch(spec.id, spec.label)
        for a, b in domain.links:
            graph.add_link(a, b)
        intra_graphs[domain.id] = graph

    # port wiring: intra links first (declaration order), then domain links,
    # then hosts, so port numbers are a pure function of the scenario
    for domain in scenario.domains:
        for a, b in domain.links:
            switches[a].attach(b)
            switches[b].attach(a)
    for a, b in scenario.links:
        ab, ba = gateway_name(a, b), gateway_name(b, a)
        switches[ab].attach(ba)
        switches[ba].attach(ab)
    hosts: dict[str, HostSpec] = {}
    host_domain: dict[str, str] = {}
    hosts_by_ip: dict[IPv4Address, HostSpec] = {}
    for domain in scenario.domains:
        for host in domain.hosts:
            switches[host.switch].attach(host.id)
            hosts[host.id] = host
            host_domain[host.id] = domain.id
            hosts_by_ip[host.ip] = host

    for switch in switches.values():
        switch.install(arp_discovery_rule())

    repos = {
        domain.id: probe_topology(as_graph, domain.id, scenario.max_ttl, intra_graphs[domain.id])
        for domain in scenario.domains
    }
    world_repos = [repos[domain.id] for domain in scenario.domains]

    def port_lookup(switch_id: str, peer: str) -> int:
        return switches[switch_id].port_to(peer)

    controllers: dict[str, Controller] = {}
    for domain in scenario.domains:
        monitor = None
        if scenario.capacity is not None and scenario.defense_response.value != "none":
            monitor = FloodMonitor(
                scenario.capacity,
                response=scenario.defense_response,
                window_ticks=scenario.window_ticks,
            )
        neighbor_keys = {
            peer: scenario.domain(peer).handle_key.encode()
            for peer in as_graph.neighbors(domain.id)
        }
        controllers[domain.id] = Controller(
            as_graph.descriptor(domain.id),
            list(domain.policies),
            repos[domain.id],
            domain.handle_key.encode(),
            monitor=monitor,
            key_ring=neighbor_keys,
            user_bindings=domain.users,
            host_switch={host.ip: host.switch for host in domain.hosts},
            host_names={host.ip: host.id for host in domain.hosts},
            world_repos=world_repos,
            enforcement_enabled=scenario.enforcement,
            costs=costs,
            port_of=port_lookup,
            window_ticks=scenario.window_ticks,
        )
    return World(
        scenario=scenario,
        as_graph=as_graph,
        switches=switches,
        switch_domain=switch_domain,
        controllers=controllers,
        hosts=hosts,
        host_domain=host_domain,
        hosts_by_ip=hosts_by_ip,
    )


_POLICY_REASONS = {"POLICY", "HANDLE_INVALID", "UNSATISFIABLE_CONSTRAINTS"}
_DEFENSE_REASONS = {"DEFENSE_THROTTLED", "DEFENSE_BLOCKED", "BLOCKED_AT_SWITCH", "RATE_LIMIT"}
_NOPATH_REASONS = {"NO_SATISFYING_PATH", "NO_ROUTE"}


class Simulation:
    def __init__(self, world: World):
        self.world = world
        self.scenario = world.scenario
        self.report = MetricsReport(
            scenario=self.scenario.name,
            seed=self.scenario.seed,
            mode=self.scenario.mode,
            enforcement=self.scenario.enforcement,
            window_ticks=self.scenario.window_ticks,
        )
        self._heap: list[tuple[int, int, str, tuple]] = []
        self._seq = 0
        self._counters = {
            "offered": 0,
            "delivered": 0,
            "dropped_policy": 0,
            "dropped_defense": 0,
            "dropped_nopath": 0,
            "dropped_other": 0,
            "packet_ins": 0,
            "flow_mods": 0,
            "rules_installed": 0,
            "proactive_installs": 0,
            "table_full_events": 0,
        }

    def _schedule(self, tick: int, action: str, payload: tuple) -> None:
        heapq.heappush(self._heap, (tick, self._seq, action, payload))
        self._seq += 1

    # --- traffic expansion -----------------------------------------------------

    def _make_packet(self, src: HostSpec, dst_ip: IPv4Address, spec, port: int, tick: int) -> Packet:
        dst_host = self.world.hosts_by_ip.get(dst_ip)
        return Packet(
            src_ip=src.ip,
            dst_ip=dst_ip,
            src_mac=src.mac,
            dst_mac=dst_host.mac if dst_host else "ff:ff:ff:ff:ff:ff",
            ip_proto=spec.proto,
            service_port=port,
            packet_type=spec.packet_type,
            payload_size=getattr(spec, "size", 64),
            timestamp=tick,
        )

    def _resolve_dst(self, dst: str) -> IPv4Address:
        if dst in self.world.hosts:
            return self.world.hosts[dst].ip
        return IPv4Address(dst)

    def _offer_flow(self, spec, port: int, tick: int, from_flood: bool) -> None:
        src = self.world.hosts[spec.src_host]
        dst_ip = self._resolve_dst(spec.dst)
        packet = self._make_packet(src, dst_ip, spec, port, tick)
        record = FlowRecord(
            index=len(self.report.flows),
            flow_id=packet.flow_id,
            src=spec.src_host,
            dst=str(dst_ip),
            request_tick=tick,
            from_flood=from_flood,
        )
        self.report.flows.append(record)
        self._counters["offered"] += 1
        inflight = _InFlight(packet=packet, record=record)
        attach = self.world.switches[src.switch]
        self._schedule(tick + LINK_TICK, "switch_rx", (src.switch, inflight, attach.port_to(src.id)))

    def _expand_traffic(self) -> None:
        ticks_per_second = self.scenario.window_ticks
        for item in self.scenario.traffic:
            if isinstance(item, FloodSpec):
                total = item.rate * item.seconds
                for i in range(total):
                    tick = item.at + i * ticks_per_second // item.rate
                    self._offer_flow(item, item.port_base + i, tick, from_flood=True)
            else:
                self._offer_flow(item, item.port, item.at, from_flood=False)

    # --- event handlers -----------------------------------------------------

    def _finish(self, record: FlowRecord, reason: str, domain: str) -> None:
        if record.outcome != "pending":
            return
        record.outcome = "dropped"
        record.reason = reason
        record.drop_domain = domain
        if reason in _POLICY_REASONS:
            self._counters["dropped_policy"] += 1
        elif reason in _DEFENSE_REASONS:
            self._counters["dropped_defense"] += 1
        elif reason in _NOPATH_REASONS:
            self._counters["dropped_nopath"] += 1
        else:
            self._counters["dropped_other"] += 1

    def _deliver(self, inflight: _InFlight, host: HostSpec, tick: int) -> None:
        record = inflight.record
        if record.outcome != "pending":
            return
        domain = self.world.host_domain[host.id]
        ctrl = self.world.controllers[domain]
        state = ctrl.flow_state.get(inflight.packet.flow_id)
        if state is not None and state.handle_out is not None:
            as_path = state.handle_out.visited
        else:
            as_path = (domain,)
        record.outcome = "delivered"
        record.delivered_tick = tick
        record.as_path = tuple(as_path)
        record.switch_path = tuple(inflight.trace)
        self._counters["delivered"] += 1

    def _on_switch_rx(self, tick: int, switch_id: str, inflight: _InFlight, in_port: int) -> None:
        switch = self.world.switches[switch_id]
        outcome = switch.process_packet(inflight.packet, in_port)
        if outcome.kind == "packet_in":
            domain = self.world.switch_domain[switch_id]
            self._counters["packet_ins"] += 1
            self._schedule(tick + LINK_TICK, "ctrl_job", (domain, inflight, switch_id, in_port))
            return
        if outcome.kind == "dropped":
            reason = (
                "BLOCKED_AT_SWITCH"
                if outcome.rule is not None and outcome.rule.priority == BLOCK_RULE_PRIORITY
                else "SWITCH_DROP"
            )
            self._finish(inflight.record, reason, self.world.switch_domain[switch_id])
            return
        if outcome.kind == "link_down":
            self._finish(inflight.record, "LINK_DOWN", self.world.switch_domain[switch_id])
            return
        inflight.trace.append(switch_id)
        peer = outcome.peer
        if peer in self.world.hosts:
            host = self.world.hosts[peer]
            if host.ip == inflight.packet.dst_ip:
                self._deliver(inflight, host, tick + LINK_TICK)
            else:
                self._finish(inflight.record, "MISDELIVERED", self.world.switch_domain[switch_id])
            return
        peer_domain = self.world.switch_domain[peer]
        here = self.world.switch_domain[switch_id]
        if peer_domain != here:
            # domain boundary: the gateway tags the packet with the handle
            # and token its controller minted for this flow
            ctrl = self.world.controllers[here]
            state = ctrl.flow_state.get(inflight.packet.flow_id)
            if state is not None:
                inflight.handle = state.handle_out
                inflight.ptt = state.ptt_out
        peer_port = self.world.switches[peer].port_to(switch_id)
        self._schedule(tick + LINK_TICK, "switch_rx", (peer, inflight, peer_port))

    def _on_ctrl_job(
        self, tick: int, domain: str, inflight: _InFlight, ingress: str, in_port: int
    ) -> None:
        ctrl = self.world.controllers[domain]
        arrival = tick
        start = max(arrival, ctrl.next_free_tick)
        if inflight.handle is not None:
            augmented = AugmentedPacket(inflight.packet, inflight.handle, inflight.ptt)
            result = forward_interdomain(ctrl, augmented, ingress, start)
        else:
            entry_peer = self.world.switches[ingress].ports.get(in_port)
            result = ctrl.handle_packet_in(
                inflight.packet, ingress, start, entry_peer=entry_peer
            )
        emission = start + result.service_ticks
        ctrl.next_free_tick = emission
        self.report.latencies.append(LatencyRecord(domain, arrival, start, emission))
        self._schedule(emission, "apply_result", (domain, inflight, ingress, result))

    def _install_batch(self, batch: FlowModBatch, domain: str, tick: int, src_ip: str, flow_id: str) -> bool:
        try:
            for switch_id, rule in batch.installs:
                self.world.switches[switch_id].install(rule)
        except TableFullError:
            self._counters["table_full_events"] += 1
            return False
        self._counters["rules_installed"] += len(batch)
        self.report.installs.append(
            InstallRecord(tick, domain, src_ip, flow_id, len(batch), batch.provenance)
        )
        return True

    def _on_apply_result(
        self, tick: int, domain: str, inflight: _InFlight, ingress: str, result: PipelineResult
    ) -> None:
        flow_id = inflight.packet.flow_id
        src_ip = str(inflight.packet.src_ip)
        if result.block_batch is not None:
            self._install_batch(result.block_batch, domain, tick, src_ip, flow_id)
        if not result.installed:
            self.world.switches[ingress].take_buffered(flow_id)
            self._finish(inflight.record, result.reason, domain)
            return
        assert result.batch is not None
        if not self._install_batch(result.batch, domain, tick, src_ip, flow_id):
            self.world.switches[ingress].take_buffered(flow_id)
            self._finish(inflight.record, "TABLE_FULL", domain)
            return
        self._counters["flow_mods"] += 1
        buffered = self.world.switches[ingress].take_buffered(flow_id)
        if buffered is not None:
            packet, in_port = buffered
            self._schedule(tick + LINK_TICK, "switch_rx", (ingress, inflight, in_port))

    # --- proactive pre-install ---------------------------------------------------

    def _preinstall(self) -> None:
        for item in self.scenario.traffic:
            if isinstance(item, FloodSpec):
                continue  # floods are reactive by nature
            src = self.world.hosts[item.src_host]
            dst_ip = self._resolve_dst(item.dst)
            packet = self._make_packet(src, dst_ip, item, item.port, item.at)
            domain = self.world.host_domain[item.src_host]
            ingress = src.switch
            entry_peer = src.id
            handle = ptt = None
            for _hop in range(len(self.scenario.domains) + 1):
                ctrl = self.world.controllers[domain]
                result = ctrl.handle_packet_in(
                    packet,
                    ingress,
                    item.at,
                    handle=handle,
                    ptt=ptt,
                    entry_peer=entry_peer,
                    defense=False,
                )
                if not result.installed:
                    break
                assert result.batch is not None
                for switch_id, rule in result.batch.installs:
                    self.world.switches[switch_id].install(rule)
                self._counters["proactive_installs"] += len(result.batch)
                if result.disposition == "deliver":
                    break
                entry_peer = gateway_name(domain, result.next_as)
                ingress = gateway_name(result.next_as, domain)
                handle, ptt = result.handle_out, result.ptt_out
                domain = result.next_as

    # --- main loop -------------------------------------------------------------

    def run(self) -> MetricsReport:
        if self.scenario.mode == "proactive":
            self._preinstall()
        self._expand_traffic()
        handlers = {
            "switch_rx": self._on_switch_rx,
            "ctrl_job": self._on_ctrl_job,
            "apply_result": self._on_apply_result,
        }
        while self._heap:
            tick, _seq, action, payload = heapq.heappop(self._heap)
            handlers[action](tick, *payload)
        for record in self.report.flows:
            if record.outcome == "pending":
                record.outcome = "dropped"
                record.reason = "STALLED"
                self._counters["dropped_other"] += 1
        self.report.counters = dict(self._counters)
        for ctrl in self.world.controllers.values():
            for event in ctrl.events:
                self.report.events.append(
                    f"tick={event.tick} domain={ctrl.as_id} flow={event.flow_id}"
                    f" verdict={event.verdict} reason={event.reason!r}"
                    f" pe={event.matched_pe} rules={event.rules_installed}"
                    f" service_ticks={event.service_ticks} [{event.summary}]"
                )
        return self.report


def run(scenario: Scenario, costs: CostModel | None = None) -> MetricsReport:
    """Build the world and execute the scenario to quiescence."""
    return Simulation(build_world(scenario, costs or scenario.costs)).run()


def wallclock_latency(scenario: Scenario, repeats: int = 10) -> float:
    """Optional wall-clock microbenchmark: mean seconds per run over
    ``repeats`` repetitions.  Tick-based latency is the deterministic
    measure; this exists for hardware-bound comparisons only."""
    import time

    total = 0.0
    for _ in range(repeats):
        started = time.perf_counter()
        run(scenario)
        total += time.perf_counter() - started
    return total / repeats
