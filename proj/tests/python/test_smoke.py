import json
import urllib.error
import urllib.request

import pytest

import memhub


def test_tokenize_and_embed():
    assert memhub.tokenize("Sea-Level rise, 2023!") == ["sea", "level", "rise", "2023"]
    v = memhub.embed("coral reef", 64)
    assert len(v) == 64
    assert abs(sum(x * x for x in v) - 1.0) < 1e-5
    assert memhub.embed("", 8) == [0.0] * 8


def test_session_query_recall(tmp_path):
    hub = memhub.Hub(tmp_path, sync_mode="per_batch")
    s = hub.post("/v1/sessions", {"agent": "scout", "task_tags": ["river"]})["session"]
    hub.post("/v1/records", {"session": s, "agent": "scout", "content": "Turbidity rising at the weir."})
    hub.post(f"/v1/sessions/{s}/close")
    res = hub.post("/v1/query", {"text": "turbidity"})["results"]
    assert [r["seq"] for r in res] == [1]
    assert res[0]["record"]["content"].startswith("Turbidity")
    eps = hub.post("/v1/recall", {"context": {"text": "weir"}})["episodes"]
    assert eps[0]["episode"] == s
    assert len(hub.get("/v1/episodes")["episodes"]) == 1


def test_errors_carry_codes(tmp_path):
    hub = memhub.Hub(tmp_path)
    with pytest.raises(memhub.HubError) as e:
        hub.post("/v1/query", {"k": 0})
    assert e.value.args[0] == "invalid_request"
    with pytest.raises(memhub.HubError) as e:
        hub.get("/v1/records/5")
    assert e.value.args[0] == "not_found"
    with pytest.raises(memhub.HubError) as e:
        hub.get("/v1/episodes", token="bogus")
    assert e.value.args[0] == "unauthenticated"


def test_tokens_and_policies(tmp_path):
    hub = memhub.Hub(tmp_path)
    tok = hub.post("/v1/tokens", {"agent": "field", "roles": ["specialist"]})["token"]
    with pytest.raises(memhub.HubError):
        hub.post("/v1/query", {"text": "x"}, token=tok)
    hub.post("/v1/policies", {"id": "own", "strategy": "role", "subject": {"role": "specialist"},
                              "effect": "allow", "scope": {"agent": "${self}"}})
    s = hub.post("/v1/sessions", {}, token=tok)["session"]
    hub.post("/v1/records", {"session": s, "content": "mine"}, token=tok)
    assert len(hub.post("/v1/query", {"text": "mine"}, token=tok)["results"]) == 1
    audit = hub.get("/v1/audit", operation="query")["entries"]
    assert [e["decision"] for e in audit] == ["deny", "allow"]


def test_http(tmp_path):
    with memhub.Hub(tmp_path, admin_token="py-admin") as hub:
        port = hub.serve()
        req = urllib.request.Request(f"http://127.0.0.1:{port}/v1/sessions", data=b"{}", method="POST",
                                     headers={"Authorization": "Bearer py-admin"})
        with urllib.request.urlopen(req) as r:
            assert json.loads(r.read())["session"] == 1
        with pytest.raises(urllib.error.HTTPError) as e:
            urllib.request.urlopen(f"http://127.0.0.1:{port}/v1/episodes")
        assert e.value.code == 401


def test_scenarios():
    names = memhub.list_scenarios()
    assert "forest-health" in names
    report = memhub.run_scenario("forest-health")
    assert report["outcome"] == "PASS"
    assert memhub.run_scenario("forest-health", "isolated")["outcome"] == "EXPECTED_FAILURE"
