"""Scenario documents: the declarative world a simulation runs in.

A scenario is one JSON document naming the domain graph (per-domain labels,
types, subnets and keys), each domain's switch fabric and hosts, per-domain
policy repositories (inline, in either policy format), static MAC-to-user
bindings, a capacity model with a defense response, and a timed traffic
program.  ``docs/scenario-format.md`` documents the schema; bundled
scenarios live in ``sdnsec/scenarios/``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from ipaddress import IPv4Address, IPv4Network
from pathlib import Path

from .controller import CostModel
from .defense import CapacityModel, ResponseMode
from .formats import PolicyParseError, parse_compact_pe, parse_ipv4, parse_network, parse_repository
from .labels import LabelParseError, SecurityLabel, parse_label
from .policy import PolicyExpression, normalize_mac
from .topology import gateway_name

__all__ = [
    "DomainSpec",
    "FloodSpec",
    "FlowSpec",
    "HostSpec",
    "Scenario",
    "ScenarioError",
    "SwitchSpec",
    "bundled_scenario_path",
    "list_bundled_scenarios",
    "load_scenario",
    "parse_scenario",
]

TICKS_PER_SECOND = 1_000_000


class ScenarioError(ValueError):
    """Scenario document is malformed; the message carries the field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SwitchSpec:
    id: str
    label: SecurityLabel


@dataclass(frozen=True)
class HostSpec:
    id: str
    ip: IPv4Address
    mac: str
    switch: str


@dataclass(frozen=True)
class DomainSpec:
    id: str
    subnet: IPv4Network
    as_type: str
    label: SecurityLabel
    handle_key: str
    switches: tuple[SwitchSpec, ...]
    links: tuple[tuple[str, str], ...]
    hosts: tuple[HostSpec, ...]
    users: dict[str, str]
    policies: tuple[PolicyExpression, ...]

    def switch_ids(self) -> set[str]:
        return {s.id for s in self.switches}


@dataclass(frozen=True)
class FlowSpec:
    """One flow attempt: a single first packet offered at a tick."""

    at: int
    src_host: str
    dst: str  # host id or literal IP
    port: int
    packet_type: str
    proto: str = "tcp"
    size: int = 64


@dataclass(frozen=True)
class FloodSpec:
    """A burst of one-packet flows from one host at a fixed request rate."""

    at: int
    src_host: str
    dst: str
    rate: int  # requests per second
    seconds: int
    packet_type: str = "SYN"
    port_base: int = 20000
    proto: str = "tcp"


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    mode: str  # reactive | proactive
    enforcement: bool
    domains: tuple[DomainSpec, ...]
    links: tuple[tuple[str, str], ...]
    traffic: tuple[FlowSpec | FloodSpec, ...]
    capacity: CapacityModel | None = None
    defense_response: ResponseMode = ResponseMode.NONE
    window_ticks: int = TICKS_PER_SECOND
    table_capacity: int = 1024
    max_ttl: int = 6
    costs: CostModel = CostModel()

    def domain(self, as_id: str) -> DomainSpec:
        for domain in self.domains:
            if domain.id == as_id:
                return domain
        raise KeyError(as_id)

    def host(self, host_id: str) -> tuple[DomainSpec, HostSpec]:
        for domain in self.domains:
            for host in domain.hosts:
                if host.id == host_id:
                    return domain, host
        raise KeyError(host_id)

    # functional updates used by experiments and acceptance variants

    def without_policy(self, as_id: str, pe_id: str) -> Scenario:
        domain = self.domain(as_id)
        if pe_id not in {pe.id for pe in domain.policies}:
            raise KeyError(f"{as_id} has no policy {pe_id}")
        updated = replace(
            domain, policies=tuple(pe for pe in domain.policies if pe.id != pe_id)
        )
        return replace(
            self, domains=tuple(updated if d.id == as_id else d for d in self.domains)
        )

    def with_policies(self, as_id: str, policies: tuple[PolicyExpression, ...]) -> Scenario:
        domain = self.domain(as_id)
        updated = replace(domain, policies=domain.policies + tuple(policies))
        return replace(
            self, domains=tuple(updated if d.id == as_id else d for d in self.domains)
        )

    def with_defense(self, response: ResponseMode) -> Scenario:
        return replace(self, defense_response=response)

    def with_enforcement(self, enabled: bool) -> Scenario:
        return replace(self, enforcement=enabled)

    def with_mode(self, mode: str) -> Scenario:
        return replace(self, mode=mode)

    def with_flood_rate(self, rate: int) -> Scenario:
        traffic = tuple(
            replace(item, rate=rate) if isinstance(item, FloodSpec) else item
            for item in self.traffic
        )
        return replace(self, traffic=traffic)


def _want(obj: dict, key: str, path: str, kind=None):
    if key not in obj:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"{path}.{key}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_policies(raw, path: str) -> tuple[PolicyExpression, ...]:
    policies: list[PolicyExpression] = []
    records = []
    for index, item in enumerate(raw):
        if isinstance(item, str):
            try:
                policies.append(parse_compact_pe(item))
            except PolicyParseError as exc:
                raise ScenarioError(f"{path}[{index}]", str(exc)) from None
        elif isinstance(item, dict):
            records.append((index, item))
        else:
            raise ScenarioError(f"{path}[{index}]", "policy must be a compact string or a record object")
    if records:
        try:
            parsed = parse_repository([item for _, item in records])
        except PolicyParseError as exc:
            raise ScenarioError(path, str(exc)) from None
        policies.extend(parsed)
    ids = [pe.id for pe in policies]
    duplicates = {i for i in ids if ids.count(i) > 1}
    if duplicates:
        raise ScenarioError(path, f"duplicate policy ids {sorted(duplicates)}")
    return tuple(policies)


def _parse_domain(obj: dict, path: str) -> DomainSpec:
    as_id = _want(obj, "id", path, str)
    if not as_id.startswith("AS"):
        raise ScenarioError(f"{path}.id", f"domain ids start with 'AS', got {as_id!r}")
    try:
        subnet = parse_network(_want(obj, "subnet", path, str))
    except ValueError as exc:
        raise ScenarioError(f"{path}.subnet", str(exc)) from None
    try:
        label = parse_label(_want(obj, "label", path, str))
    except LabelParseError as exc:
        raise ScenarioError(f"{path}.label", exc.reason) from None
    switches = []
    for index, sw in enumerate(_want(obj, "switches", path, list)):
        sw_path = f"{path}.switches[{index}]"
        sw_id = _want(sw, "id", sw_path, str)
        if sw_id.startswith("AS"):
            raise ScenarioError(f"{sw_path}.id", "switch ids must not start with 'AS'")
        try:
            sw_label = parse_label(_want(sw, "label", sw_path, str))
        except LabelParseError as exc:
            raise ScenarioError(f"{sw_path}.label", exc.reason) from None
        switches.append(SwitchSpec(sw_id, sw_label))
    switch_ids = {s.id for s in switches}
    if len(switch_ids) != len(switches):
        raise ScenarioError(f"{path}.switches", "duplicate switch ids")
    links = []
    for index, pair in enumerate(obj.get("links", [])):
        link_path = f"{path}.links[{index}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ScenarioError(link_path, "link must be a [a, b] pair")
        for end in pair:
            if end not in switch_ids:
                raise ScenarioError(link_path, f"undefined switch {end!r}")
        links.append((pair[0], pair[1]))
    hosts = []
    for index, h in enumerate(obj.get("hosts", [])):
        host_path = f"{path}.hosts[{index}]"
        host_id = _want(h, "id", host_path, str)
        try:
            ip = parse_ipv4(_want(h, "ip", host_path, str))
        except ValueError as exc:
            raise ScenarioError(f"{host_path}.ip", str(exc)) from None
        try:
            mac = normalize_mac(_want(h, "mac", host_path, str))
        except ValueError as exc:
            raise ScenarioError(f"{host_path}.mac", str(exc)) from None
        attach = _want(h, "switch", host_path, str)
        if attach not in switch_ids:
            raise ScenarioError(f"{host_path}.switch", f"undefined switch {attach!r}")
        hosts.append(HostSpec(host_id, ip, mac, attach))
    users = {}
    for mac, user in obj.get("users", {}).items():
        try:
            users[normalize_mac(mac)] = str(user)
        except ValueError as exc:
            raise ScenarioError(f"{path}.users[{mac!r}]", str(exc)) from None
    return DomainSpec(
        id=as_id,
        subnet=subnet,
        as_type=_want(obj, "type", path, str),
        label=label,
        handle_key=_want(obj, "handle_key", path, str),
        switches=tuple(switches),
        links=tuple(links),
        hosts=tuple(hosts),
        users=users,
        policies=_parse_policies(obj.get("policies", []), f"{path}.policies"),
    )


def _parse_traffic(items: list, path: str, host_ids: set[str]) -> tuple[FlowSpec | FloodSpec, ...]:
    out: list[FlowSpec | FloodSpec] = []
    for index, item in enumerate(items):
        item_path = f"{path}[{index}]"
        if not isinstance(item, dict):
            raise ScenarioError(item_path, "traffic entries are objects")
        src = _want(item, "from", item_path, str)
        if src not in host_ids:
            raise ScenarioError(f"{item_path}.from", f"undefined host {src!r}")
        dst = _want(item, "to", item_path, str)
        at = int(item.get("at", 0))
        if item.get("kind") == "flood":
            out.append(
                FloodSpec(
                    at=at,
                    src_host=src,
                    dst=dst,
                    rate=int(_want(item, "rate", item_path)),
                    seconds=int(item.get("seconds", 1)),
                    packet_type=str(item.get("type", "SYN")),
                    port_base=int(item.get("port_base", 20000)),
                    proto=str(item.get("proto", "tcp")),
                )
            )
        else:
            out.append(
                FlowSpec(
                    at=at,
                    src_host=src,
                    dst=dst,
                    port=int(_want(item, "port", item_path)),
                    packet_type=str(_want(item, "type", item_path, str)),
                    proto=str(item.get("proto", "tcp")),
                    size=int(item.get("size", 64)),
                )
            )
    return tuple(out)


def parse_scenario(document: dict, name_hint: str = "scenario") -> Scenario:
    """Validate a loaded scenario document and resolve every reference."""
    if not isinstance(document, dict):
        raise ScenarioError("$", "scenario document must be an object")
    name = str(document.get("name", name_hint))
    mode = str(document.get("mode", "reactive"))
    if mode not in ("reactive", "proactive"):
        raise ScenarioError("$.mode", f"mode must be reactive or proactive, got {mode!r}")
    domains = tuple(
        _parse_domain(obj, f"$.domains[{index}]")
        for index, obj in enumerate(_want(document, "domains", "$", list))
    )
    domain_ids = [d.id for d in domains]
    if len(set(domain_ids)) != len(domain_ids):
        raise ScenarioError("$.domains", f"duplicate domain ids in {domain_ids}")
    all_switches: dict[str, str] = {}
    for domain in domains:
        for sw in domain.switches:
            if sw.id in all_switches:
                raise ScenarioError(
                    "$.domains", f"switch {sw.id!r} declared in both {all_switches[sw.id]} and {domain.id}"
                )
            all_switches[sw.id] = domain.id
    links = []
    for index, pair in enumerate(document.get("links", [])):
        link_path = f"$.links[{index}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ScenarioError(link_path, "domain link must be a [a, b] pair")
        a, b = pair
        for end in (a, b):
            if end not in domain_ids:
                raise ScenarioError(link_path, f"undefined domain {end!r}")
        for owner, peer in ((a, b), (b, a)):
            gateway = gateway_name(owner, peer)
            if all_switches.get(gateway) != owner:
                raise ScenarioError(
                    link_path,
                    f"gateway switch {gateway!r} must be declared in domain {owner}",
                )
        links.append((a, b))
    host_ids: set[str] = set()
    host_ips: dict[IPv4Address, str] = {}
    for domain in domains:
        for host in domain.hosts:
            if host.id in host_ids:
                raise ScenarioError("$.domains", f"duplicate host id {host.id!r}")
            host_ids.add(host.id)
            if host.ip in host_ips:
                raise ScenarioError("$.domains", f"duplicate host ip {host.ip}")
            host_ips[host.ip] = host.id
    capacity = None
    if "capacity" in document:
        cap = document["capacity"]
        try:
            capacity = CapacityModel(
                cc=cap["controller_rps"],
                x=int(cap["switches_per_controller"]),
                y=int(cap["hosts_per_switch"]),
                cs=cap.get("switch_rps"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ScenarioError("$.capacity", str(exc)) from None
    response = ResponseMode.NONE
    window_ticks = TICKS_PER_SECOND
    if "defense" in document:
        defense = document["defense"]
        try:
            response = ResponseMode(defense.get("response", "none"))
        except ValueError:
            raise ScenarioError("$.defense.response", f"unknown response {defense.get('response')!r}") from None
        window_ticks = int(defense.get("window_ticks", TICKS_PER_SECOND))
        if response is not ResponseMode.NONE and capacity is None:
            raise ScenarioError("$.defense", "a defense response requires a capacity model")
    costs = CostModel()
    if "costs" in document:
        raw = document["costs"]
        known = {"base", "defense", "per_pe", "per_switch", "per_rule"}
        unknown = set(raw) - known
        if unknown:
            raise ScenarioError("$.costs", f"unknown cost fields {sorted(unknown)}")
        costs = CostModel(**{k: int(v) for k, v in raw.items()})
    return Scenario(
        name=name,
        seed=int(document.get("seed", 0)),
        mode=mode,
        enforcement=bool(document.get("enforcement", True)),
        domains=domains,
        links=tuple(links),
        traffic=_parse_traffic(document.get("traffic", []), "$.traffic", host_ids),
        capacity=capacity,
        defense_response=response,
        window_ticks=window_ticks,
        table_capacity=int(document.get("table_capacity", 1024)),
        max_ttl=int(document.get("max_ttl", 6)),
        costs=costs,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError("$", f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"not valid JSON: {exc}") from None
    return parse_scenario(document, name_hint=path.stem)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (name without .json)."""
    root = resources.files("sdnsec") / "scenarios"
    candidate = root / f"{name}.json"
    if not candidate.is_file():
        known = ", ".join(sorted(p.stem for p in Path(str(root)).glob("*.json")))
        raise ScenarioError("$", f"no bundled scenario {name!r} (have: {known})")
    return Path(str(candidate))


def list_bundled_scenarios() -> list[str]:
    root = Path(str(resources.files("sdnsec") / "scenarios"))
    return sorted(p.stem for p in root.glob("*.json"))
