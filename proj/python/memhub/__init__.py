"""Python access to the memhub core.

    hub = memhub.Hub("/tmp/hub")
    s = hub.post("/v1/sessions", {"agent": "scout"})["session"]
"""

import json

from ._core import HubError, embed, list_scenarios, tokenize
from ._core import Hub as _Hub
from ._core import run_scenario as _run_scenario

__all__ = ["Hub", "HubError", "embed", "list_scenarios", "run_scenario", "tokenize"]


class Hub:
    """In-process hub. Without a token, calls run as the local admin."""

    def __init__(self, data_dir, admin_token=None, embedding_dim=64, sync_mode="per_append"):
        self._hub = _Hub(str(data_dir), admin_token, embedding_dim, sync_mode)

    def request(self, method, path, body=None, token=None, params=None):
        raw = "" if body is None else json.dumps(body)
        out = self._hub.request(method, path, raw, token, {k: str(v) for k, v in (params or {}).items()})
        return json.loads(out)

    def get(self, path, token=None, **params):
        return self.request("GET", path, token=token, params=params)

    def post(self, path, body=None, token=None):
        return self.request("POST", path, {} if body is None else body, token=token)

    def delete(self, path, token=None):
        return self.request("DELETE", path, token=token)

    def serve(self, host="127.0.0.1", port=0):
        return self._hub.serve(host, port)

    def stop(self):
        self._hub.stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def run_scenario(name, mode="hub"):
    return json.loads(_run_scenario(name, mode))
