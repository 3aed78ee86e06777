"""Web service exposing the benchmark runner and the reactive-IK playground."""

from .app import PlaygroundSession, create_app
from .protocol import BUDGET_MS, PROTOCOL_VERSION, schema_document

__all__ = [
    "BUDGET_MS",
    "PROTOCOL_VERSION",
    "PlaygroundSession",
    "create_app",
    "schema_document",
]
