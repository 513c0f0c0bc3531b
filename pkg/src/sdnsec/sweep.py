"""Parameter sweeps reproducing the performance experiment shapes.

Absolute timings are hardware-bound and not reproduced; what a sweep checks
is the trend: latency grows with fabric size and is higher with policy
processing enabled, flow establishment at a saturating offered rate falls as
the repository grows, end-to-end establishment time grows with the number of
domains crossed, and the flooding defenses reshape the installation-rate
curve (rising baseline, flat plateau at the threshold, near-zero after a
block rule).
"""

from __future__ import annotations

from dataclasses import replace

from .defense import ResponseMode
from .labels import SecurityLabel
from .metrics import MetricsReport
from .policy import Action, PolicyExpression
from .scenario import (
    DomainSpec,
    FloodSpec,
    FlowSpec,
    HostSpec,
    Scenario,
    SwitchSpec,
    TICKS_PER_SECOND,
)
from .simulation import run

__all__ = [
    "SWEEP_AXES",
    "chain_scenario",
    "flood_response_series",
    "offer_horizon",
    "pad_policies",
    "pad_switches",
    "sweep",
]

SWEEP_AXES = ("pe_count", "switch_count", "as_count", "request_rate")


def pad_policies(scenario: Scenario, total: int) -> Scenario:
    """Grow the first domain's repository to ``total`` expressions with
    never-matching filler (each pinned to a flow id no packet can have)."""
    domain = scenario.domains[0]
    missing = total - len(domain.policies)
    if missing < 0:
        raise ValueError(f"scenario already has {len(domain.policies)} policies > {total}")
    pads = tuple(
        PolicyExpression(id=f"pad-{i:05d}", action=Action.ALLOW, flow_id=f"pad-flow-{i}")
        for i in range(missing)
    )
    return scenario.with_policies(domain.id, pads)


def pad_switches(scenario: Scenario, total: int) -> Scenario:
    """Grow the first domain's fabric to ``total`` switches with a dangling
    chain, leaving every existing path intact."""
    domain = scenario.domains[0]
    missing = total - len(domain.switches)
    if missing < 0:
        raise ValueError(f"domain already has {len(domain.switches)} switches > {total}")
    if missing == 0:
        return scenario
    anchor = domain.switches[-1].id
    extra: list[SwitchSpec] = []
    links: list[tuple[str, str]] = []
    previous = anchor
    for i in range(missing):
        switch_id = f"PAD{i:03d}"
        extra.append(SwitchSpec(switch_id, domain.label))
        links.append((previous, switch_id))
        previous = switch_id
    updated = replace(
        domain,
        switches=domain.switches + tuple(extra),
        links=domain.links + tuple(links),
    )
    return replace(
        scenario, domains=(updated,) + scenario.domains[1:], name=f"{scenario.name}+sw{total}"
    )


def chain_scenario(as_count: int, seed: int = 0, mode: str = "reactive", enforcement: bool = True) -> Scenario:
    """A source-to-destination world of ``as_count`` domains in a row, each
    with one transit switch between its gateways, used for the multi-domain
    establishment-time experiment."""
    from .formats import parse_ipv4, parse_network

    if as_count < 1:
        raise ValueError("need at least one domain")
    domains = []
    dst_ip = parse_ipv4(f"10.{as_count}.0.9")
    for i in range(1, as_count + 1):
        transit = f"T{i}"
        switches = [SwitchSpec(transit, SecurityLabel(2))]
        links: list[tuple[str, str]] = []
        if i > 1:
            gateway = f"{i}SW{i - 1}"
            switches.append(SwitchSpec(gateway, SecurityLabel(2)))
            links.append((gateway, transit))
        if i < as_count:
            gateway = f"{i}SW{i + 1}"
            switches.append(SwitchSpec(gateway, SecurityLabel(2)))
            links.append((transit, gateway))
        hosts = []
        if i == 1:
            hosts.append(HostSpec("src", parse_ipv4("10.1.0.5"), "00:00:00:00:aa:01", transit))
        if i == as_count:
            hosts.append(HostSpec("dst", dst_ip, "00:00:00:00:aa:02", transit))
        domains.append(
            DomainSpec(
                id=f"AS{i}",
                subnet=parse_network(f"10.{i}.0.0/24"),
                as_type="EDU",
                label=SecurityLabel(2),
                handle_key=f"chain-key-{i}",
                switches=tuple(switches),
                links=tuple(links),
                hosts=tuple(hosts),
                users={},
                policies=(
                    PolicyExpression(id=f"chain-{i}", action=Action.ALLOW),
                ),
            )
        )
    links = tuple((f"AS{i}", f"AS{i + 1}") for i in range(1, as_count))
    traffic = (FlowSpec(at=0, src_host="src", dst=dst_ip, port=80, packet_type="HTTP"),)
    return Scenario(
        name=f"chain-{as_count}",
        seed=seed,
        mode=mode,
        enforcement=enforcement,
        domains=tuple(domains),
        links=links,
        traffic=traffic,
    )


def offer_horizon(scenario: Scenario) -> int:
    """Last tick at which the traffic program is still offering requests."""
    horizon = 0
    for item in scenario.traffic:
        if isinstance(item, FloodSpec):
            horizon = max(horizon, item.at + item.seconds * TICKS_PER_SECOND)
        else:
            horizon = max(horizon, item.at)
    return horizon


def sweep(scenario: Scenario, axis: str, points: list[int]) -> list[tuple[int, MetricsReport]]:
    """One run per point, shared seed, reports keyed by the axis value."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r} (have {SWEEP_AXES})")
    results = []
    for point in points:
        if axis == "request_rate":
            variant = scenario.with_flood_rate(point)
        elif axis == "pe_count":
            variant = pad_policies(scenario, point)
        elif axis == "switch_count":
            variant = pad_switches(scenario, point)
        else:
            variant = chain_scenario(point, seed=scenario.seed, mode=scenario.mode, enforcement=scenario.enforcement)
        results.append((point, run(variant)))
    return results


def flood_response_series(
    scenario: Scenario, rates: list[int]
) -> dict[str, list[tuple[int, float]]]:
    """Attacker flow installations per offered rate under the three response
    policies: no defense at all, threshold throttling, and a block rule."""
    flood = next(item for item in scenario.traffic if isinstance(item, FloodSpec))
    attacker_ip = None
    for domain in scenario.domains:
        for host in domain.hosts:
            if host.id == flood.src_host:
                attacker_ip = str(host.ip)
    assert attacker_ip is not None
    variants = {
        "baseline": scenario.with_enforcement(False),
        "threshold": scenario.with_defense(ResponseMode.THROTTLE),
        "drop_rule": scenario.with_defense(ResponseMode.DROP_RULE),
    }
    series: dict[str, list[tuple[int, float]]] = {}
    for label, variant in variants.items():
        points = []
        for rate, report in sweep(variant, "request_rate", rates):
            installs = sum(
                1
                for record in report.installs
                if record.src_ip == attacker_ip and not record.provenance.startswith("defense:")
            )
            points.append((rate, float(installs)))
        series[label] = points
    return series
