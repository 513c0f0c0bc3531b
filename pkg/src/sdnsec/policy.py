"""Policy expressions, flow contexts and the match/decide semantics.

A policy expression pairs a set of wildcardable condition fields with an
allow/deny action plus obligations (an explicit path, a label requirement on
the path, a pinned exit switch).  Selection over a repository is
default-deny, deny-overrides, then most-specific-allow with the smallest
id as the final tie-break, so the outcome is a pure function of
(repository, context).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from ipaddress import IPv4Address, IPv4Network

from .labels import ANY_LABEL, LabelConstraint, LabelWindow, SecurityLabel

__all__ = [
    "Action",
    "Constraint",
    "ConstraintKind",
    "Decision",
    "DomainInfo",
    "EndpointSelector",
    "FlowContext",
    "PolicyExpression",
    "derive_flow_id",
    "match_pe",
    "normalize_mac",
    "select_policy",
    "specificity",
]

_MAC_RE = re.compile(r"^([0-9a-f]{2}:){5}[0-9a-f]{2}$")


def normalize_mac(text: str) -> str:
    """Validate and lowercase a six-octet colon-separated MAC address."""
    mac = text.strip().lower()
    if not _MAC_RE.match(mac):
        raise ValueError(f"bad MAC address {text!r}: expected six colon-separated octets")
    return mac


def derive_flow_id(src_ip: IPv4Address, dst_ip: IPv4Address, ip_proto: str, service_port: int) -> str:
    """Canonical flow key used to tie packets, handles and tokens together."""
    return f"{src_ip}>{dst_ip}:{service_port}/{ip_proto}"


class Action(Enum):
    ALLOW = "allow"
    DENY = "deny"


class ConstraintKind(Enum):
    LABEL_PATH = "label_path"
    RATE_THRESHOLD = "rate_threshold"
    PACKET_ATTR = "packet_attr"
    SIGNATURE = "signature"


# Flow-scoped constraint kinds that may be delegated downstream in a
# policy transfer token; SIGNATURE stays local to the defining domain.
DELEGABLE_KINDS = frozenset(
    {ConstraintKind.LABEL_PATH, ConstraintKind.PACKET_ATTR, ConstraintKind.RATE_THRESHOLD}
)


@dataclass(frozen=True)
class Constraint:
    """One flow or domain constraint.

    LABEL_PATH applies its label constraint to every element of the path
    (domains across domains, switches within one).  RATE_THRESHOLD carries a
    requests-per-window budget.  PACKET_ATTR is an equality predicate on a
    packet attribute.  SIGNATURE names an attack-signature token compared
    against the packet type.
    """

    kind: ConstraintKind
    label: LabelConstraint | None = None
    rate: Fraction | None = None
    attr: str | None = None
    value: str | None = None
    signature: str | None = None

    def __post_init__(self) -> None:
        if self.kind is ConstraintKind.LABEL_PATH:
            if self.label is None:
                raise ValueError("LABEL_PATH constraint requires exactly one label constraint")
        elif self.kind is ConstraintKind.RATE_THRESHOLD:
            if self.rate is None or self.rate <= 0:
                raise ValueError("RATE_THRESHOLD constraint requires a positive rate")
        elif self.kind is ConstraintKind.PACKET_ATTR:
            if not self.attr or self.value is None:
                raise ValueError("PACKET_ATTR constraint requires attr and value")
        elif not self.signature:
            raise ValueError("SIGNATURE constraint requires a signature token")

    def text(self) -> str:
        if self.kind is ConstraintKind.LABEL_PATH:
            assert self.label is not None
            return self.label.text()
        if self.kind is ConstraintKind.RATE_THRESHOLD:
            assert self.rate is not None
            value = int(self.rate) if self.rate.denominator == 1 else self.rate
            return f"rate<={value}"
        if self.kind is ConstraintKind.PACKET_ATTR:
            return f"pkt.{self.attr}={self.value}"
        return f"sig.{self.signature}"

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class EndpointSelector:
    """Wildcardable description of one end of a flow; ``None`` means any.

    ``gateway`` names the entry (source side) or exit (destination side)
    switch of the domain.  Gateways are carried for enforcement but are not
    match conditions.
    """

    as_id: str | None = None
    subnet: IPv4Network | None = None
    as_type: str | None = None
    label_req: LabelConstraint = ANY_LABEL
    gateway: str | None = None
    host_ip: IPv4Address | None = None
    host_mac: str | None = None

    def __post_init__(self) -> None:
        if self.host_mac is not None:
            object.__setattr__(self, "host_mac", normalize_mac(self.host_mac))


ANY_ENDPOINT = EndpointSelector()


def _classify_path(entries: tuple[str, ...]) -> str:
    kinds = {"as" if entry.startswith("AS") else "switch" for entry in entries}
    if len(kinds) > 1:
        raise ValueError(f"path mixes AS and switch identifiers: {entries}")
    return kinds.pop()


@dataclass(frozen=True)
class PolicyExpression:
    """One policy rule: condition fields, constraints and an action."""

    id: str
    action: Action
    flow_id: str | None = None
    source: EndpointSelector = ANY_ENDPOINT
    dest: EndpointSelector = ANY_ENDPOINT
    user: str | None = None
    flow_cons: tuple[Constraint, ...] = ()
    dom_cons: tuple[Constraint, ...] = ()
    services: frozenset[int] | None = None
    sec_profile: frozenset[str] | None = None
    path: tuple[str, ...] | None = None
    action_exit: str | None = None
    validity: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.path is not None:
            if not self.path:
                raise ValueError("path must be nonempty or wildcard")
            _classify_path(self.path)
        if self.sec_profile is not None:
            unknown = self.sec_profile - {"conf", "intg"}
            if unknown:
                raise ValueError(f"unknown security-profile tokens: {sorted(unknown)}")
        if self.validity is not None:
            start, end = self.validity
            if start > end:
                raise ValueError(f"validity window start {start} after end {end}")

    @property
    def path_is_switches(self) -> bool:
        return self.path is not None and _classify_path(self.path) == "switch"

    @property
    def path_is_domains(self) -> bool:
        return self.path is not None and _classify_path(self.path) == "as"

    def label_window(self) -> LabelWindow:
        """All LABEL_PATH constraints of this expression collapsed to one window."""
        labels = [c.label for c in self.flow_cons + self.dom_cons if c.kind is ConstraintKind.LABEL_PATH]
        return LabelWindow.conjoin(labels)

    def delegable_constraints(self) -> tuple[Constraint, ...]:
        """Flow constraints eligible for transfer to downstream domains."""
        return tuple(c for c in self.flow_cons if c.kind in DELEGABLE_KINDS)


@dataclass(frozen=True)
class DomainInfo:
    """What a controller knows about an AS when matching: identity, address
    space, administrative type and security label.  Unknown pieces are None
    and fail any non-wildcard condition on them."""

    as_id: str
    subnet: IPv4Network | None = None
    as_type: str | None = None
    label: SecurityLabel | None = None


@dataclass(frozen=True)
class FlowContext:
    """Everything extracted from a packet (and its handle) that policies see."""

    flow_id: str
    src_as: DomainInfo
    dst_as: DomainInfo
    src_ip: IPv4Address
    dst_ip: IPv4Address
    src_mac: str
    dst_mac: str
    service_port: int
    packet_type: str
    timestamp: int
    user: str | None = None
    traversed_path: tuple[str, ...] = ()
    ingress_switch: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "src_mac", normalize_mac(self.src_mac))
        object.__setattr__(self, "dst_mac", normalize_mac(self.dst_mac))
        if len(set(self.traversed_path)) != len(self.traversed_path):
            raise ValueError(f"traversed path repeats a domain: {self.traversed_path}")


@dataclass(frozen=True)
class Decision:
    """Outcome of policy selection plus the obligations of the winning rule."""

    verdict: Action
    matched_pe: str | None = None
    path_obligation: tuple[str, ...] | None = None
    label_obligation: LabelConstraint | None = None
    exit_obligation: str | None = None
    ptt_constraints: tuple[Constraint, ...] = ()
    sec_profile: frozenset[str] = frozenset()
    reason: str = ""

    def __post_init__(self) -> None:
        if self.verdict is Action.DENY:
            if (
                self.path_obligation is not None
                or self.label_obligation is not None
                or self.exit_obligation is not None
                or self.ptt_constraints
            ):
                raise ValueError("deny decision must carry no obligations")
        elif self.matched_pe is None:
            raise ValueError("allow decision must name the matched policy expression")


DENY_DEFAULT = Decision(Action.DENY, reason="no matching policy expression")


def _selector_matches(sel: EndpointSelector, domain: DomainInfo, ip: IPv4Address, mac: str) -> bool:
    if sel.as_id is not None and sel.as_id != domain.as_id:
        return False
    if sel.subnet is not None and ip not in sel.subnet:
        return False
    if sel.as_type is not None and sel.as_type != domain.as_type:
        return False
    if not sel.label_req.is_wildcard:
        if domain.label is None or not sel.label_req.satisfies(domain.label):
            return False
    if sel.host_ip is not None and sel.host_ip != ip:
        return False
    if sel.host_mac is not None and sel.host_mac != mac:
        return False
    return True


def _predicate_constraints_hold(pe: PolicyExpression, ctx: FlowContext) -> bool:
    for constraint in pe.flow_cons + pe.dom_cons:
        if constraint.kind is ConstraintKind.PACKET_ATTR:
            actual = {"type": ctx.packet_type, "port": str(ctx.service_port)}.get(constraint.attr or "")
            if actual != constraint.value:
                return False
        elif constraint.kind is ConstraintKind.SIGNATURE:
            if ctx.packet_type != constraint.signature:
                return False
    return True


def match_pe(pe: PolicyExpression, ctx: FlowContext) -> bool:
    """True iff every non-wildcard condition of ``pe`` holds for ``ctx``.

    Subnets match by containment of the host address; a domain-typed path
    condition requires the context's traversed domains to equal it exactly;
    a switch-typed path is an obligation, never a condition.
    """
    if pe.flow_id is not None and pe.flow_id != ctx.flow_id:
        return False
    if not _selector_matches(pe.source, ctx.src_as, ctx.src_ip, ctx.src_mac):
        return False
    if not _selector_matches(pe.dest, ctx.dst_as, ctx.dst_ip, ctx.dst_mac):
        return False
    if pe.user is not None and pe.user != ctx.user:
        return False
    if pe.services is not None and ctx.service_port not in pe.services:
        return False
    if pe.path_is_domains and ctx.traversed_path != pe.path:
        return False
    if pe.validity is not None:
        start, end = pe.validity
        if not start <= ctx.timestamp < end:
            return False
    return _predicate_constraints_hold(pe, ctx)


_SELECTOR_FIELDS = ("as_id", "subnet", "as_type", "label_req", "host_ip", "host_mac")


def specificity(pe: PolicyExpression) -> int:
    """Count of non-wildcard condition fields, used to rank overlapping allows."""
    count = 0
    count += pe.flow_id is not None
    for sel in (pe.source, pe.dest):
        count += sel.as_id is not None
        count += sel.subnet is not None
        count += sel.as_type is not None
        count += not sel.label_req.is_wildcard
        count += sel.host_ip is not None
        count += sel.host_mac is not None
    count += pe.user is not None
    count += bool(pe.flow_cons)
    count += bool(pe.dom_cons)
    count += pe.services is not None
    count += pe.sec_profile is not None
    count += pe.path is not None
    count += pe.validity is not None
    return count


def wildcarded(pe: PolicyExpression, field_name: str) -> PolicyExpression:
    """Copy of ``pe`` with one condition field widened to the wildcard.

    Field names: ``flow_id``, ``user``, ``services``, ``sec_profile``,
    ``path``, ``validity``, ``flow_cons``, ``dom_cons``, or
    ``source.<attr>`` / ``dest.<attr>`` for selector components.
    """
    if "." in field_name:
        side, attr = field_name.split(".", 1)
        sel = getattr(pe, side)
        value = ANY_LABEL if attr == "label_req" else None
        return replace(pe, **{side: replace(sel, **{attr: value})})
    if field_name in ("flow_cons", "dom_cons"):
        return replace(pe, **{field_name: ()})
    return replace(pe, **{field_name: None})


CONDITION_FIELDS = (
    "flow_id",
    *(f"source.{name}" for name in _SELECTOR_FIELDS),
    *(f"dest.{name}" for name in _SELECTOR_FIELDS),
    "user",
    "flow_cons",
    "dom_cons",
    "services",
    "sec_profile",
    "path",
    "validity",
)


def select_policy(pes: list[PolicyExpression], ctx: FlowContext) -> Decision:
    """Decide a context against one domain's repository.

    No match is a deny (default deny); any matching deny wins over every
    allow; otherwise the most specific allow is chosen, ties broken by the
    lexicographically smallest id, and its obligations are emitted.
    """
    matches = [pe for pe in pes if match_pe(pe, ctx)]
    if not matches:
        return DENY_DEFAULT
    denies = [pe for pe in matches if pe.action is Action.DENY]
    if denies:
        pe = min(denies, key=lambda p: p.id)
        return Decision(Action.DENY, matched_pe=pe.id, reason=f"denied by {pe.id}")
    winner = min(matches, key=lambda p: (-specificity(p), p.id))
    window = winner.label_window()
    if window.empty:
        return Decision(
            Action.DENY, matched_pe=winner.id, reason=f"unsatisfiable label constraints on {winner.id}"
        )
    return Decision(
        Action.ALLOW,
        matched_pe=winner.id,
        path_obligation=winner.path if winner.path_is_switches else None,
        label_obligation=window.primary_constraint(),
        exit_obligation=winner.action_exit,
        ptt_constraints=winner.delegable_constraints(),
        sec_profile=winner.sec_profile or frozenset(),
        reason=f"allowed by {winner.id}",
    )
