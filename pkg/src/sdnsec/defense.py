"""Flooding detection and mitigation at the controller.

Per-switch and per-host request budgets are derived from the controller's
processing capacity: a controller serving X switches gives each switch
``TSw = CC/X``, and a switch serving Y hosts gives each host
``Thost = TSw/Y``.  Arithmetic is exact (fractions), enforcement compares
window counts against the floor.

Two responses are available once an offender crosses its budget: THROTTLE
caps the offender's admitted packet-ins at the threshold in every window
(excess is dropped, not queued), and DROP_RULE asks for a one-time block
rule in the offender's switch so nothing further reaches the controller.
Hosts below their own budget are never acted on, whichever switch the
attacker sits behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

__all__ = [
    "CapacityModel",
    "FloodMonitor",
    "ResponseMode",
    "Verdict",
    "compute_thresholds",
    "rescale_thresholds",
]


@dataclass(frozen=True)
class CapacityModel:
    """controller capacity (requests/s), switches per controller, hosts per
    switch, switch capacity (requests/s)."""

    cc: Fraction
    x: int
    y: int
    cs: Fraction | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cc", Fraction(self.cc))
        if self.cs is not None:
            object.__setattr__(self, "cs", Fraction(self.cs))
        for name in ("cc", "x", "y"):
            if getattr(self, name) <= 0:
                raise ValueError(f"capacity model field {name} must be positive")


def compute_thresholds(cap: CapacityModel) -> tuple[Fraction, Fraction]:
    """Per-switch and per-host request budgets: TSw = CC/X, Thost = TSw/Y."""
    tsw = cap.cc / cap.x
    thost = tsw / cap.y
    return tsw, thost


class Verdict(Enum):
    OK = "ok"
    THROTTLE = "throttle"
    DROP_RULE = "drop_rule"


class ResponseMode(Enum):
    NONE = "none"
    THROTTLE = "throttle"
    DROP_RULE = "drop_rule"


@dataclass
class _WindowCounter:
    current: int = 0
    admitted: int = 0
    history: list[int] = field(default_factory=list)


class FloodMonitor:
    """Sliding-window request accounting against the capacity thresholds.

    History weighting is off by default: a steady offender is capped at
    exactly the threshold per window.  :func:`rescale_thresholds` switches on
    exponentially decayed history so that a burst in a previous window
    tightens the budget for a while.
    """

    def __init__(
        self,
        cap: CapacityModel,
        response: ResponseMode = ResponseMode.THROTTLE,
        window_ticks: int = 1_000_000,
        history_windows: int = 4,
    ):
        if window_ticks < 1:
            raise ValueError("window must be at least one tick")
        self.cap = cap
        self.response = response
        self.window_ticks = window_ticks
        self.history_windows = history_windows
        self.decay: Fraction | None = None
        self.instances = 1
        self.tsw, self.thost = compute_thresholds(cap)
        self._window_index = 0
        self._hosts: dict[str, _WindowCounter] = {}
        self._switches: dict[str, _WindowCounter] = {}
        self.active_responses: dict[str, Verdict] = {}
        self.crossings: list[tuple[int, str, str]] = []

    def _roll(self, tick: int) -> None:
        index = tick // self.window_ticks
        while self._window_index < index:
            for counter in list(self._hosts.values()) + list(self._switches.values()):
                counter.history.insert(0, counter.current)
                del counter.history[self.history_windows :]
                counter.current = 0
                counter.admitted = 0
            self._window_index += 1

    def _over_budget(self, counter: _WindowCounter, threshold: Fraction) -> bool:
        """Would admitting the current request overshoot the budget?

        Without decay: admitted-so-far + 1 must stay within floor(threshold).
        With decay d, previous windows are weighted in on both sides, so a
        steady rate at exactly the threshold is a fixed point and never
        flagged.
        """
        admitted = Fraction(counter.admitted + 1)
        budget = Fraction(math.floor(threshold))
        if self.decay is not None:
            weight = Fraction(1)
            factor = self.decay
            for past in counter.history:
                admitted += factor * past
                weight += factor
                factor *= self.decay
            budget = threshold * weight
        return admitted > budget

    def weighted_count(self, host: str) -> Fraction:
        """Decayed view of a host's request history plus the live window."""
        counter = self._hosts.get(host)
        if counter is None:
            return Fraction(0)
        total = Fraction(counter.current)
        factor = self.decay if self.decay is not None else Fraction(0)
        step = factor
        for past in counter.history:
            total += step * past
            step *= factor
        return total

    def record_and_check(self, src_host: str, src_switch: str, tick: int) -> Verdict:
        """Account one request and say how the pipeline should treat it.

        OK admits; THROTTLE drops this request; DROP_RULE means the offender
        must be blocked in its switch (emitted once, then remembered so the
        install-latency gap cannot readmit the offender).
        """
        self._roll(tick)
        host = self._hosts.setdefault(src_host, _WindowCounter())
        switch = self._switches.setdefault(src_switch, _WindowCounter())
        host.current += 1
        switch.current += 1
        if self.response is ResponseMode.NONE:
            host.admitted += 1
            switch.admitted += 1
            return Verdict.OK
        if self.active_responses.get(src_host) is Verdict.DROP_RULE:
            return Verdict.DROP_RULE
        host_over = self._over_budget(host, self.thost)
        switch_over = self._over_budget(switch, self.tsw)
        if not host_over and not switch_over:
            host.admitted += 1
            switch.admitted += 1
            return Verdict.OK
        if not host_over:
            # switch budget blown by someone else: only offenders above their
            # own host budget are acted on, so this request is throttled at
            # the switch level but the host is not marked
            self.crossings.append((tick, src_switch, "switch"))
            return Verdict.THROTTLE
        self.crossings.append((tick, src_host, "host"))
        if self.response is ResponseMode.DROP_RULE:
            self.active_responses[src_host] = Verdict.DROP_RULE
            return Verdict.DROP_RULE
        self.active_responses[src_host] = Verdict.THROTTLE
        return Verdict.THROTTLE


def rescale_thresholds(
    monitor: FloodMonitor, instances: int, history_decay: Fraction | float | None = Fraction(1, 2)
) -> None:
    """Scale capacity to the number of running controller instances and turn
    on exponentially decayed history weighting (decay per window step)."""
    if instances < 1:
        raise ValueError("instances must be >= 1")
    monitor.instances = instances
    effective = CapacityModel(monitor.cap.cc * instances, monitor.cap.x, monitor.cap.y, monitor.cap.cs)
    monitor.tsw, monitor.thost = compute_thresholds(effective)
    monitor.decay = None if history_decay is None else Fraction(history_decay)
