"""Python access to the acme aggregation core and simulator."""

from acme._core import (
    QueryParseError,
    ScenarioError,
    aggregate,
    node_timeout,
    parse_query,
    report_bytes,
    report_latency,
    report_loss,
    run_scenario,
    tree_shape,
)

__all__ = [
    "QueryParseError",
    "ScenarioError",
    "aggregate",
    "node_timeout",
    "parse_query",
    "report_bytes",
    "report_latency",
    "report_loss",
    "run_scenario",
    "tree_shape",
]
