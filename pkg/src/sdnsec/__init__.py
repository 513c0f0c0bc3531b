"""Policy-driven security engine and deterministic multi-domain SDN simulator.

The package splits into a policy core (labels, expressions, two text
formats, match/decide semantics), a topology layer (probe-built
repositories, label-constrained path search), a simulated data plane
(switches with priority flow tables), the per-domain controller pipeline
with cross-domain handles and transfer tokens, a flooding defense, and a
scenario harness with deterministic metrics, sweeps and a CLI.
"""

from .labels import (
    ANY_LABEL,
    LabelConstraint,
    LabelParseError,
    LabelRelation,
    LabelWindow,
    SecurityLabel,
    parse_label_constraint,
)
from .policy import (
    Action,
    Constraint,
    ConstraintKind,
    Decision,
    DomainInfo,
    EndpointSelector,
    FlowContext,
    PolicyExpression,
    derive_flow_id,
    match_pe,
    select_policy,
    specificity,
)
from .formats import (
    PolicyParseError,
    format_compact_pe,
    parse_compact_pe,
    parse_repository,
    serialize_repository,
)
from .topology import (
    ASDescriptor,
    ASGraph,
    NoPathError,
    SwitchGraph,
    TopologyEntry,
    TopologyRepository,
    find_as_paths,
    find_switch_path,
    gateway_name,
    probe_topology,
)
from .dataplane import (
    ActionKind,
    FlowMatch,
    FlowRule,
    Packet,
    Switch,
    TableFullError,
    flow_dump,
    format_flow_dump,
)
from .interdomain import (
    UNSATISFIABLE,
    AugmentedPacket,
    Handle,
    IntegrityError,
    PolicyTransferToken,
    forward_interdomain,
    merge_constraints,
    validate_handle,
)
from .defense import (
    CapacityModel,
    FloodMonitor,
    ResponseMode,
    Verdict,
    compute_thresholds,
    rescale_thresholds,
)
from .controller import Controller, CostModel, DropReason, FlowModBatch, synthesize_rules
from .scenario import (
    Scenario,
    ScenarioError,
    bundled_scenario_path,
    list_bundled_scenarios,
    load_scenario,
)
from .metrics import MetricsReport, emit, emit_series
from .simulation import build_world, run, wallclock_latency
from .sweep import chain_scenario, flood_response_series, sweep

__all__ = [
    "ANY_LABEL",
    "ASDescriptor",
    "ASGraph",
    "Action",
    "ActionKind",
    "AugmentedPacket",
    "CapacityModel",
    "Constraint",
    "ConstraintKind",
    "Controller",
    "CostModel",
    "Decision",
    "DomainInfo",
    "DropReason",
    "EndpointSelector",
    "FloodMonitor",
    "FlowContext",
    "FlowMatch",
    "FlowModBatch",
    "FlowRule",
    "Handle",
    "IntegrityError",
    "LabelConstraint",
    "LabelParseError",
    "LabelRelation",
    "LabelWindow",
    "MetricsReport",
    "NoPathError",
    "Packet",
    "PolicyExpression",
    "PolicyParseError",
    "PolicyTransferToken",
    "ResponseMode",
    "Scenario",
    "ScenarioError",
    "SecurityLabel",
    "Switch",
    "SwitchGraph",
    "TableFullError",
    "TopologyEntry",
    "TopologyRepository",
    "UNSATISFIABLE",
    "Verdict",
    "build_world",
    "bundled_scenario_path",
    "chain_scenario",
    "compute_thresholds",
    "derive_flow_id",
    "emit",
    "emit_series",
    "find_as_paths",
    "find_switch_path",
    "flood_response_series",
    "flow_dump",
    "format_compact_pe",
    "format_flow_dump",
    "forward_interdomain",
    "gateway_name",
    "list_bundled_scenarios",
    "load_scenario",
    "match_pe",
    "merge_constraints",
    "parse_compact_pe",
    "parse_label_constraint",
    "parse_repository",
    "probe_topology",
    "rescale_thresholds",
    "run",
    "select_policy",
    "serialize_repository",
    "specificity",
    "sweep",
    "synthesize_rules",
    "validate_handle",
    "wallclock_latency",
]

__version__ = "0.1.0"
