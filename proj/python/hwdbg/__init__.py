"""Mini-HDL compiler and source-level hardware debugger."""

import json

from ._hwdbg import (
    DEFAULT_PORT,
    CapabilityError,
    Compiled,
    HdlSyntaxError,
    Host,
    HwdbgError,
    RawClient,
    bench,
    compile,
)
from ._hwdbg import symtab_json as _symtab_json

__all__ = [
    "DEFAULT_PORT",
    "CapabilityError",
    "Client",
    "Compiled",
    "HdlSyntaxError",
    "Host",
    "HwdbgError",
    "bench",
    "compile",
    "load_symtab",
]


def load_symtab(path):
    """Rows of a stored symbol table as a dict of lists."""
    return json.loads(_symtab_json(path))


class Client:
    """Protocol client; requests and events are plain dicts."""

    def __init__(self, host="127.0.0.1", port=DEFAULT_PORT):
        self._raw = RawClient(host, port)

    def request(self, command, payload=None, timeout=30.0):
        return json.loads(self._raw.request(command, json.dumps(payload or {}), timeout))

    def next_event(self, timeout=30.0):
        text = self._raw.next_event(timeout)
        return None if text is None else json.loads(text)

    def wait_event(self, name, timeout=30.0):
        while True:
            event = self.next_event(timeout)
            if event is None:
                raise TimeoutError(f"no {name!r} event")
            if event["command"] == name:
                return event
