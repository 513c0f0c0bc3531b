"""Probe a multi-domain world and search paths under label constraints.

Run:  python demos/02_topology_discovery.py
"""

from ipaddress import IPv4Network

from sdnsec import (
    ASDescriptor,
    ASGraph,
    SecurityLabel,
    find_as_paths,
    parse_label_constraint,
    probe_topology,
)

# Four domains in a row plus a shortcut through a low-trust domain.
world = ASGraph()
labels = {"AS1": 2, "AS2": 3, "AS3": 2, "AS4": 4, "AS5": 1}
for index, (as_id, rank) in enumerate(sorted(labels.items())):
    world.add_domain(
        ASDescriptor(as_id, IPv4Network(f"10.{index}.0.0/16"), "EDU", SecurityLabel(rank), f"C-{as_id}")
    )
for a, b in [("AS1", "AS2"), ("AS2", "AS3"), ("AS3", "AS4"), ("AS1", "AS5"), ("AS5", "AS4")]:
    world.add_link(a, b)

# Each controller probes with rising TTL; answers carry identity + label.
repos = [probe_topology(world, as_id, max_ttl=4) for as_id in world.domains()]
print("topology repository of AS1:")
for as_id, entry in sorted(repos[0].entries.items()):
    print(f"  {as_id}: label={entry.sec_label} hops={entry.hops} via {entry.next_hop_gateway}")

# Unconstrained, every simple path is a candidate, shortest first.
print("\nall simple paths AS1 -> AS4:")
for path in find_as_paths(repos, "AS1", "AS4"):
    print("  ", " -> ".join(path))

# Requiring trusted transit prunes the shortcut through AS5 (label SL1).
constraint = parse_label_constraint("SL2+=")
print(f"\npaths whose transit domains satisfy {constraint}:")
for path in find_as_paths(repos, "AS1", "AS4", constraint):
    print("  ", " -> ".join(path))
