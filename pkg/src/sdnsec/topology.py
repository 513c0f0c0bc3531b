"""Topology discovery by TTL probing and label-constrained path search.

Each controller walks the domain graph with probes of increasing TTL; a
probe whose TTL expires at a domain is answered with that domain's identity,
security label and addressing, and the answers become the controller's
topology repository.  Path search then runs over the union of hop-1 entries
(domain level) or over a domain's own switch graph (intra level), filtering
every element through a label constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from ipaddress import IPv4Network

from .labels import ANY_LABEL, SecurityLabel

__all__ = [
    "ASDescriptor",
    "ASGraph",
    "NoPathError",
    "ProbeResponse",
    "SwitchGraph",
    "TopologyEntry",
    "TopologyRepository",
    "find_as_paths",
    "find_switch_path",
    "gateway_name",
    "probe_topology",
]


class NoPathError(Exception):
    """No path satisfies the constraint; callers map this to a deny."""


def _as_number(as_id: str) -> str:
    return as_id[2:] if as_id.startswith("AS") else as_id


def gateway_name(owner_as: str, peer_as: str) -> str:
    """Edge-switch naming convention: the gateway that connects domain a
    toward domain b is ``aSWb``."""
    return f"{_as_number(owner_as)}SW{_as_number(peer_as)}"


@dataclass(frozen=True)
class ASDescriptor:
    as_id: str
    subnet: IPv4Network
    as_type: str
    sec_label: SecurityLabel
    controller_id: str


@dataclass(frozen=True)
class ProbeResponse:
    """Payload of a TTL-expired reply: sender identity plus its security label."""

    sender_ip: str
    as_id: str
    sec_label: SecurityLabel
    subnet: IPv4Network
    as_type: str


@dataclass(frozen=True)
class TopologyEntry:
    as_id: str
    sec_label: SecurityLabel
    hops: int
    next_hop_gateway: str
    subnet: IPv4Network | None = None
    as_type: str | None = None

    def __post_init__(self) -> None:
        if self.hops < 1:
            raise ValueError("foreign domain is at least one hop away")


class ASGraph:
    """Undirected domain-level adjacency with per-domain descriptors."""

    def __init__(self) -> None:
        self._descriptors: dict[str, ASDescriptor] = {}
        self._adjacency: dict[str, set[str]] = {}

    def add_domain(self, descriptor: ASDescriptor) -> None:
        if descriptor.as_id in self._descriptors:
            raise ValueError(f"duplicate domain {descriptor.as_id}")
        self._descriptors[descriptor.as_id] = descriptor
        self._adjacency[descriptor.as_id] = set()

    def add_link(self, a: str, b: str) -> None:
        for end in (a, b):
            if end not in self._descriptors:
                raise KeyError(f"unknown domain {end}")
        self._adjacency[a].add(b)
        self._adjacency[b].add(a)

    def domains(self) -> list[str]:
        return sorted(self._descriptors)

    def descriptor(self, as_id: str) -> ASDescriptor:
        return self._descriptors[as_id]

    def neighbors(self, as_id: str) -> list[str]:
        return sorted(self._adjacency[as_id])


class SwitchGraph:
    """One domain's switch adjacency with per-switch security labels."""

    def __init__(self) -> None:
        self._labels: dict[str, SecurityLabel] = {}
        self._adjacency: dict[str, set[str]] = {}

    def add_switch(self, switch_id: str, label: SecurityLabel) -> None:
        if switch_id in self._labels:
            raise ValueError(f"duplicate switch {switch_id}")
        self._labels[switch_id] = label
        self._adjacency[switch_id] = set()

    def add_link(self, a: str, b: str) -> None:
        for end in (a, b):
            if end not in self._labels:
                raise KeyError(f"unknown switch {end}")
        self._adjacency[a].add(b)
        self._adjacency[b].add(a)

    def __contains__(self, switch_id: str) -> bool:
        return switch_id in self._labels

    def switches(self) -> list[str]:
        return sorted(self._labels)

    def label(self, switch_id: str) -> SecurityLabel:
        return self._labels[switch_id]

    def neighbors(self, switch_id: str) -> list[str]:
        return sorted(self._adjacency[switch_id])

    def adjacent(self, a: str, b: str) -> bool:
        return b in self._adjacency.get(a, ())


@dataclass
class TopologyRepository:
    """What one controller knows about the rest of the world, plus its own
    switch fabric.  Rebuilt atomically by :func:`probe_topology`."""

    owner_as: str
    owner_label: SecurityLabel
    entries: dict[str, TopologyEntry] = field(default_factory=dict)
    intra_graph: SwitchGraph = field(default_factory=SwitchGraph)

    def neighbors(self) -> list[str]:
        return sorted(as_id for as_id, entry in self.entries.items() if entry.hops == 1)

    def domain_for_ip(self, ip) -> str | None:
        """Domain whose advertised subnet contains ``ip`` (the owner included)."""
        for as_id in sorted(self.entries):
            entry = self.entries[as_id]
            if entry.subnet is not None and ip in entry.subnet:
                return as_id
        return None


def probe_topology(
    world: ASGraph, owner_as: str, max_ttl: int, intra_graph: SwitchGraph | None = None
) -> TopologyRepository:
    """Build (or rebuild) a controller's topology repository.

    Simulates probes at TTL 1..max_ttl: a domain at shortest-path distance d
    answers the TTL-d probe with a :class:`ProbeResponse`, so hop counts come
    out as breadth-first distances and unreachable domains are simply absent.
    Re-running replaces the repository wholesale, so it is idempotent.
    """
    if max_ttl < 1:
        raise ValueError("max_ttl must be >= 1")
    owner = world.descriptor(owner_as)
    repo = TopologyRepository(
        owner_as=owner_as,
        owner_label=owner.sec_label,
        intra_graph=intra_graph if intra_graph is not None else SwitchGraph(),
    )
    # breadth-first walk; first_hop tracks which neighbor the shortest path
    # leaves through so the entry can name the local egress gateway
    distances: dict[str, int] = {owner_as: 0}
    first_hop: dict[str, str] = {}
    frontier = [owner_as]
    while frontier:
        next_frontier: list[str] = []
        for node in frontier:
            for neighbor in world.neighbors(node):
                if neighbor in distances:
                    continue
                distances[neighbor] = distances[node] + 1
                first_hop[neighbor] = neighbor if node == owner_as else first_hop[node]
                next_frontier.append(neighbor)
        frontier = next_frontier
    for as_id, distance in sorted(distances.items()):
        if as_id == owner_as or distance > max_ttl:
            continue
        descriptor = world.descriptor(as_id)
        response = ProbeResponse(
            sender_ip=str(next(descriptor.subnet.hosts())),
            as_id=as_id,
            sec_label=descriptor.sec_label,
            subnet=descriptor.subnet,
            as_type=descriptor.as_type,
        )
        repo.entries[as_id] = TopologyEntry(
            as_id=response.as_id,
            sec_label=response.sec_label,
            hops=distance,
            next_hop_gateway=gateway_name(owner_as, first_hop[as_id]),
            subnet=response.subnet,
            as_type=response.as_type,
        )
    return repo


def _adjacency_and_labels(repo_set) -> tuple[dict[str, set[str]], dict[str, SecurityLabel]]:
    adjacency: dict[str, set[str]] = {}
    labels: dict[str, SecurityLabel] = {}
    for repo in repo_set:
        labels[repo.owner_as] = repo.owner_label
        adjacency.setdefault(repo.owner_as, set())
        for as_id, entry in repo.entries.items():
            labels.setdefault(as_id, entry.sec_label)
            if entry.hops == 1:
                adjacency.setdefault(as_id, set())
                adjacency[repo.owner_as].add(as_id)
                adjacency[as_id].add(repo.owner_as)
    return adjacency, labels


def find_as_paths(repo_set, src_as: str, dst_as: str, constraint=ANY_LABEL) -> list[tuple[str, ...]]:
    """All simple domain paths src..dst whose transit domains satisfy the
    constraint, ordered by (length, lexicographic).

    ``repo_set`` is any iterable of topology repositories; domain adjacency
    is reconstructed from their hop-1 entries.  Endpoints are not filtered:
    the constraint governs the domains a flow passes through, not where it
    starts or ends.  An empty result is a valid return.
    """
    if src_as == dst_as:
        raise ValueError("source and destination domain must differ")
    adjacency, labels = _adjacency_and_labels(repo_set)
    if src_as not in adjacency or dst_as not in adjacency:
        return []
    paths: list[tuple[str, ...]] = []

    def extend(node: str, trail: list[str]) -> None:
        for neighbor in sorted(adjacency[node]):
            if neighbor in trail:
                continue
            if neighbor == dst_as:
                paths.append(tuple(trail + [neighbor]))
                continue
            if not constraint.satisfies(labels[neighbor]):
                continue
            extend(neighbor, trail + [neighbor])

    extend(src_as, [src_as])
    paths.sort(key=lambda p: (len(p), p))
    return paths


def _shortest_valid_paths(graph: SwitchGraph, ingress: str, egress: str, constraint) -> list[tuple[str, ...]]:
    if not constraint.satisfies(graph.label(ingress)) or not constraint.satisfies(graph.label(egress)):
        return []
    if ingress == egress:
        return [(ingress,)]
    best: dict[str, int] = {ingress: 0}
    paths: list[tuple[str, ...]] = []
    shortest: int | None = None
    queue: list[tuple[str, tuple[str, ...]]] = [(ingress, (ingress,))]
    while queue:
        node, trail = queue.pop(0)
        if shortest is not None and len(trail) > shortest:
            break
        for neighbor in graph.neighbors(node):
            if neighbor in trail or not constraint.satisfies(graph.label(neighbor)):
                continue
            extended = trail + (neighbor,)
            if neighbor == egress:
                if shortest is None:
                    shortest = len(extended)
                if len(extended) == shortest:
                    paths.append(extended)
                continue
            if best.get(neighbor, len(extended)) >= len(extended):
                best[neighbor] = len(extended)
                queue.append((neighbor, extended))
    return paths


def _handoff_key(graph: SwitchGraph, path: tuple[str, ...]) -> tuple[int, ...]:
    # the preferred hand-off at each step is toward an equally or more
    # trusted neighbor (label(S_i) <= label(S_i+1)); earlier steps dominate,
    # mirroring a greedy neighbor choice
    return tuple(
        0 if graph.label(a).rank <= graph.label(b).rank else 1
        for a, b in zip(path, path[1:])
    )


def find_switch_path(
    graph: SwitchGraph,
    ingress: str,
    egress: str,
    required: tuple[str, ...] | None = None,
    constraint=ANY_LABEL,
) -> tuple[str, ...]:
    """Resolve the switch path a flow must take inside one domain.

    With ``required``, the explicit path is validated (hops exist, are
    adjacent, span ingress to egress, and every switch satisfies the
    constraint) and returned verbatim.  Otherwise the shortest satisfying
    path wins; among equals, paths with fewer violations of the
    nondecreasing-label hand-off rule are preferred, then the
    lexicographically smallest.
    """
    for end in (ingress, egress):
        if end not in graph:
            raise NoPathError(f"switch {end} not in graph")
    if required is not None:
        for switch in required:
            if switch not in graph:
                raise NoPathError(f"required path names unknown switch {switch}")
            if not constraint.satisfies(graph.label(switch)):
                raise NoPathError(f"switch {switch} violates label constraint")
        if required[0] != ingress or required[-1] != egress:
            raise NoPathError(
                f"required path {required} does not span {ingress}..{egress}"
            )
        for a, b in zip(required, required[1:]):
            if not graph.adjacent(a, b):
                raise NoPathError(f"required path hop {a}-{b} is not a link")
        return tuple(required)
    candidates = _shortest_valid_paths(graph, ingress, egress, constraint)
    if not candidates:
        raise NoPathError(f"no path {ingress}..{egress} satisfies the constraint")
    candidates.sort(key=lambda path: (_handoff_key(graph, path), path))
    return candidates[0]
