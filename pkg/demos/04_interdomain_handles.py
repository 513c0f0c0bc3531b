"""A flow crossing four domains: handles, transfer tokens, per-domain permits.

Run:  python demos/04_interdomain_handles.py
"""

from sdnsec import bundled_scenario_path, load_scenario, run

scenario = load_scenario(bundled_scenario_path("four_domain_transit"))
report = run(scenario)
flow = report.flows[0]

print(f"flow {flow.flow_id}: {flow.outcome}")
print("  domains visited (from the delivered handle):", " -> ".join(flow.as_path))
print("  switch-level route:                          ", " -> ".join(flow.switch_path))

print("\ncontroller event log:")
for line in report.events:
    print("  " + line)

# Every domain holds its own permit; removing any single one strands the
# flow exactly there (default deny at that domain).
print("\nremoving one permit at a time:")
for as_id, pe_id in [("AS1", "1"), ("AS2", "4"), ("AS3", "2"), ("AS4", "2")]:
    variant = run(scenario.without_policy(as_id, pe_id))
    outcome = variant.flows[0]
    print(f"  without {as_id}/{pe_id}: {outcome.outcome} at {outcome.drop_domain} ({outcome.reason})")
