"""Shared builders and independent oracles for the test suite.

The oracles here deliberately re-derive expected behaviour from first
principles (plain conjunctions, brute-force enumeration, textbook BFS/DFS)
so they stay independent of the implementation paths they check.
"""

from __future__ import annotations

import random
from ipaddress import IPv4Address, IPv4Network

from sdnsec.labels import ANY_LABEL, LabelConstraint, LabelRelation, SecurityLabel
from sdnsec.policy import (
    Action,
    Constraint,
    ConstraintKind,
    DomainInfo,
    EndpointSelector,
    FlowContext,
    PolicyExpression,
    derive_flow_id,
)

AS_IDS = ("AS1", "AS2", "AS3", "AS4")
AS_TYPES = ("EDU", "COM", "GOV")
PACKET_TYPES = ("HTTP", "HTTPS", "FTP", "SYN", "ARP")
PORTS = (22, 80, 443, 21, 8080)
MACS = tuple(f"00:00:00:00:00:{i:02x}" for i in range(1, 9))


def make_domain(as_id="AS1", subnet="10.0.0.0/24", as_type="EDU", rank=2) -> DomainInfo:
    return DomainInfo(as_id, IPv4Network(subnet), as_type, SecurityLabel(rank))


def make_ctx(**overrides) -> FlowContext:
    src_ip = overrides.pop("src_ip", IPv4Address("10.0.0.2"))
    dst_ip = overrides.pop("dst_ip", IPv4Address("192.168.52.72"))
    port = overrides.pop("service_port", 443)
    proto = overrides.pop("ip_proto", "tcp")
    defaults = dict(
        flow_id=derive_flow_id(src_ip, dst_ip, proto, port),
        src_as=make_domain("AS1", "10.0.0.0/24", "EDU", 2),
        dst_as=make_domain("AS4", "192.168.52.0/24", "EDU", 4),
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_mac="00:00:00:00:00:01",
        dst_mac="00:00:00:00:01:01",
        service_port=port,
        packet_type="HTTPS",
        timestamp=0,
        user=None,
        traversed_path=(),
    )
    defaults.update(overrides)
    return FlowContext(**defaults)


def random_ctx(rng: random.Random) -> FlowContext:
    src_as = DomainInfo(
        rng.choice(AS_IDS),
        IPv4Network(f"10.{rng.randrange(4)}.0.0/16"),
        rng.choice(AS_TYPES),
        SecurityLabel(rng.randrange(1, 6)),
    )
    dst_as = DomainInfo(
        rng.choice(AS_IDS),
        IPv4Network(f"192.168.{rng.randrange(4)}.0/24"),
        rng.choice(AS_TYPES),
        SecurityLabel(rng.randrange(1, 6)),
    )
    src_ip = IPv4Address(f"10.{rng.randrange(4)}.{rng.randrange(4)}.{rng.randrange(1, 9)}")
    dst_ip = IPv4Address(f"192.168.{rng.randrange(4)}.{rng.randrange(1, 9)}")
    port = rng.choice(PORTS)
    traversed = tuple(AS_IDS[: rng.randrange(0, 4)])
    return FlowContext(
        flow_id=derive_flow_id(src_ip, dst_ip, "tcp", port),
        src_as=src_as,
        dst_as=dst_as,
        src_ip=src_ip,
        dst_ip=dst_ip,
        src_mac=rng.choice(MACS),
        dst_mac=rng.choice(MACS),
        service_port=port,
        packet_type=rng.choice(PACKET_TYPES),
        timestamp=rng.randrange(0, 1000),
        user=rng.choice((None, "alice", "bob")),
        traversed_path=traversed,
    )


def random_pe(rng: random.Random, pe_id: str, action: Action = Action.ALLOW) -> PolicyExpression:
    """Random expression in which every condition field is independently wild."""

    def maybe(value):
        return value if rng.random() < 0.4 else None

    def selector() -> EndpointSelector:
        label = ANY_LABEL
        if rng.random() < 0.3:
            relation = rng.choice((LabelRelation.GEQ, LabelRelation.LEQ, LabelRelation.EQ))
            label = LabelConstraint(relation, SecurityLabel(rng.randrange(1, 6)))
        return EndpointSelector(
            as_id=maybe(rng.choice(AS_IDS)),
            subnet=maybe(IPv4Network(f"10.{rng.randrange(4)}.0.0/16")),
            as_type=maybe(rng.choice(AS_TYPES)),
            label_req=label,
            host_ip=maybe(IPv4Address(f"10.{rng.randrange(4)}.{rng.randrange(4)}.{rng.randrange(1, 9)}")),
            host_mac=maybe(rng.choice(MACS)),
        )

    constraints = []
    if rng.random() < 0.25:
        constraints.append(
            Constraint(ConstraintKind.PACKET_ATTR, attr="type", value=rng.choice(PACKET_TYPES))
        )
    if rng.random() < 0.15:
        constraints.append(Constraint(ConstraintKind.SIGNATURE, signature=rng.choice(PACKET_TYPES)))
    path = None
    if rng.random() < 0.3:
        path = tuple(AS_IDS[: rng.randrange(1, 4)])
    validity = None
    if rng.random() < 0.25:
        start = rng.randrange(0, 500)
        validity = (start, start + rng.randrange(1, 600))
    return PolicyExpression(
        id=pe_id,
        action=action,
        flow_id=None,
        source=selector(),
        dest=selector(),
        user=maybe(rng.choice(("alice", "bob"))),
        flow_cons=tuple(constraints),
        dom_cons=(),
        services=maybe(frozenset(rng.sample(PORTS, rng.randrange(1, 4)))),
        sec_profile=maybe(frozenset(rng.sample(("conf", "intg"), rng.randrange(1, 3)))),
        path=path,
        validity=validity,
    )


def oracle_match(pe: PolicyExpression, ctx: FlowContext) -> bool:
    """Plain conjunction of per-field predicates, written independently."""
    checks = []
    checks.append(pe.flow_id is None or pe.flow_id == ctx.flow_id)
    for sel, dom, ip, mac in (
        (pe.source, ctx.src_as, ctx.src_ip, ctx.src_mac),
        (pe.dest, ctx.dst_as, ctx.dst_ip, ctx.dst_mac),
    ):
        checks.append(sel.as_id is None or sel.as_id == dom.as_id)
        checks.append(sel.subnet is None or ip in sel.subnet)
        checks.append(sel.as_type is None or sel.as_type == dom.as_type)
        if sel.label_req.relation is LabelRelation.ANY:
            checks.append(True)
        else:
            base = sel.label_req.base.rank
            rank = dom.label.rank if dom.label else None
            if rank is None:
                checks.append(False)
            elif sel.label_req.relation is LabelRelation.GEQ:
                checks.append(rank >= base)
            elif sel.label_req.relation is LabelRelation.LEQ:
                checks.append(rank <= base)
            else:
                checks.append(rank == base)
        checks.append(sel.host_ip is None or sel.host_ip == ip)
        checks.append(sel.host_mac is None or sel.host_mac == mac)
    checks.append(pe.user is None or pe.user == ctx.user)
    checks.append(pe.services is None or ctx.service_port in pe.services)
    if pe.path is not None and pe.path[0].startswith("AS"):
        checks.append(tuple(ctx.traversed_path) == tuple(pe.path))
    if pe.validity is not None:
        checks.append(pe.validity[0] <= ctx.timestamp < pe.validity[1])
    for constraint in pe.flow_cons + pe.dom_cons:
        if constraint.kind is ConstraintKind.PACKET_ATTR:
            if constraint.attr == "type":
                checks.append(ctx.packet_type == constraint.value)
            elif constraint.attr == "port":
                checks.append(str(ctx.service_port) == constraint.value)
            else:
                checks.append(False)
        elif constraint.kind is ConstraintKind.SIGNATURE:
            checks.append(ctx.packet_type == constraint.signature)
    return all(checks)
