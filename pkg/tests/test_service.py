import json

import pytest
from fastapi.testclient import TestClient

from explearn.core import Explanation, payload_from_dict
from explearn.oracle import SimulatedAnnotator
from explearn.service import SessionStoreError, create_app


def toy_config(budget=6, burn_in=1, oracle_hint=False, seed=11):
    return {
        "seed": seed,
        "dataset": {"kind": "toy-corners", "n": 80},
        "learner": {"kind": "linear", "loss": "hinge", "regularizer": "l2",
                    "lam": 0.01, "max_epochs": 60},
        "query_strategy": "closest-to-margin",
        "lime": {"samples": 120, "stability_runs": 2, "k": 2},
        "session": {"budget": budget, "burn_in": burn_in, "corrections": True,
                    "strategy": "randomize", "c": 2, "test_expl_every": 0,
                    "test_expl_subsample": 0, "oracle_hint": oracle_hint},
    }


@pytest.fixture()
def client(tmp_path):
    app = create_app(store_dir=tmp_path / "store")
    with TestClient(app) as c:
        yield c


def drive_with_local_oracle(client, session_id, config):
    """Scripted client that recomputes the simulated annotator's answers from
    the query payloads alone (no server-side hints)."""
    from explearn.config import build_dataset, parse_config
    task, _ = build_dataset(parse_config(config))
    annotator = SimulatedAnnotator(task)
    while True:
        q = client.get(f"/sessions/{session_id}/query").json()
        if q.get("done"):
            return q
        inst = task.make_instance(payload_from_dict(q["instance"]["payload"]))
        expl = Explanation(
            components=tuple((int(j), float(w)) for j, w in q["explanation"]["components"]),
            intercept=q["explanation"]["intercept"], k=q["explanation"]["k"],
            target_label=q["explanation"]["target_label"])
        fb = annotator.respond(inst, q["predicted_label"], expl,
                               request_correction=not q["burn_in"])
        r = client.post(f"/sessions/{session_id}/feedback",
                        json={"iteration": q["iteration"], "label": fb.label,
                              "flagged": sorted(fb.correction.indices)})
        assert r.status_code == 200, r.text


class TestSessionLifecycle:
    def test_create_returns_201_and_id(self, client):
        r = client.post("/sessions", json={"config": toy_config()})
        assert r.status_code == 201
        assert "session_id" in r.json()

    def test_invalid_config_names_field(self, client):
        bad = toy_config()
        del bad["dataset"]["kind"]
        r = client.post("/sessions", json={"config": bad})
        assert r.status_code == 422
        assert r.json()["field"] == "dataset.kind"

    def test_query_read_is_idempotent(self, client):
        sid = client.post("/sessions", json={"config": toy_config()}).json()["session_id"]
        a = client.get(f"/sessions/{sid}/query").json()
        b = client.get(f"/sessions/{sid}/query").json()
        assert a == b

    def test_stale_iteration_conflicts(self, client):
        sid = client.post("/sessions", json={"config": toy_config()}).json()["session_id"]
        q = client.get(f"/sessions/{sid}/query").json()
        r = client.post(f"/sessions/{sid}/feedback",
                        json={"iteration": q["iteration"] + 1,
                              "label": q["predicted_label"], "flagged": []})
        assert r.status_code == 409
        assert r.json()["code"] == "stale-iteration"

    def test_feedback_idempotent_by_iteration(self, client):
        sid = client.post("/sessions", json={"config": toy_config()}).json()["session_id"]
        q = client.get(f"/sessions/{sid}/query").json()
        body = {"iteration": q["iteration"], "label": q["predicted_label"], "flagged": []}
        first = client.post(f"/sessions/{sid}/feedback", json=body)
        assert first.status_code == 200 and first.json()["status"] == "accepted"
        again = client.post(f"/sessions/{sid}/feedback", json=body)
        assert again.status_code == 200 and again.json()["status"] == "already-applied"
        different = client.post(f"/sessions/{sid}/feedback",
                                json={**body, "label": 1 - body["label"]})
        assert different.status_code == 409

    def test_burn_in_rejects_flags(self, client):
        sid = client.post("/sessions",
                          json={"config": toy_config(burn_in=3)}).json()["session_id"]
        q = client.get(f"/sessions/{sid}/query").json()
        assert q["burn_in"] is True
        comps = [j for j, _ in q["explanation"]["components"]]
        if comps:
            r = client.post(f"/sessions/{sid}/feedback",
                            json={"iteration": q["iteration"],
                                  "label": q["predicted_label"],
                                  "flagged": comps[:1]})
            assert r.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef/query").status_code == 404

    def test_list_sessions(self, client):
        client.post("/sessions", json={"config": toy_config()})
        listing = client.get("/sessions").json()["sessions"]
        assert len(listing) == 1
        assert listing[0]["dataset"] == "toy-corners"


class TestLiveEqualsSimulated:
    def test_scripted_client_reproduces_in_process_history(self, client):
        config = toy_config(budget=6, burn_in=1, seed=29)
        sim = client.post("/simulate", json={"config": config}).json()
        sid = client.post("/sessions", json={"config": config}).json()["session_id"]
        drive_with_local_oracle(client, sid, config)
        live = client.get(f"/sessions/{sid}/metrics").json()
        assert live["history"] == sim["history"]
        assert live["status"] == sim["status"]

    def test_oracle_hint_path_matches_too(self, client):
        config = toy_config(budget=5, burn_in=1, oracle_hint=True, seed=31)
        sim = client.post("/simulate", json={"config": config}).json()
        sid = client.post("/sessions", json={"config": config}).json()["session_id"]
        while True:
            q = client.get(f"/sessions/{sid}/query").json()
            if q.get("done"):
                break
            hint = q["oracle_hint"]
            r = client.post(f"/sessions/{sid}/feedback",
                            json={"iteration": q["iteration"], "label": hint["label"],
                                  "flagged": hint["flagged"]})
            assert r.status_code == 200
        live = client.get(f"/sessions/{sid}/metrics").json()
        assert live["history"] == sim["history"]


class TestPersistence:
    def test_restart_resumes_awaiting_feedback_state(self, tmp_path):
        store = tmp_path / "store"
        config = toy_config(budget=4, burn_in=0, seed=17)
        app = create_app(store_dir=store)
        with TestClient(app) as c:
            sid = c.post("/sessions", json={"config": config}).json()["session_id"]
            q1 = c.get(f"/sessions/{sid}/query").json()
            c.post(f"/sessions/{sid}/feedback",
                   json={"iteration": q1["iteration"],
                         "label": q1["predicted_label"], "flagged": []})
            q2 = c.get(f"/sessions/{sid}/query").json()
        app2 = create_app(store_dir=store)
        with TestClient(app2) as c2:
            q2_resumed = c2.get(f"/sessions/{sid}/query").json()
            assert q2_resumed == q2
            hist = c2.get(f"/sessions/{sid}/metrics").json()["history"]
            assert len(hist) == 1

    def test_corrupt_store_refuses_to_load_and_names_file(self, tmp_path):
        store = tmp_path / "store"
        store.mkdir(parents=True)
        bad = store / "broken.jsonl"
        bad.write_text("{not json\n", encoding="utf-8")
        with pytest.raises(SessionStoreError) as err:
            create_app(store_dir=store)
        assert "broken.jsonl" in str(err.value)

    def test_histories_identical_after_replay(self, tmp_path):
        store = tmp_path / "store"
        config = toy_config(budget=3, burn_in=0, seed=23)
        app = create_app(store_dir=store)
        with TestClient(app) as c:
            sid = c.post("/sessions", json={"config": config}).json()["session_id"]
            drive_with_local_oracle(c, sid, config)
            before = c.get(f"/sessions/{sid}/metrics").json()
        app2 = create_app(store_dir=store)
        with TestClient(app2) as c2:
            after = c2.get(f"/sessions/{sid}/metrics").json()
        assert after == before


class TestColorsSession:
    def test_colors_config_creates_and_serves_pixel_cells(self, client):
        config = {
            "seed": 3,
            "dataset": {"kind": "colors", "n": 60, "rule": 0},
            "learner": {"kind": "linear", "loss": "hinge", "regularizer": "l1",
                        "lam": 0.05, "max_epochs": 40},
            "lime": {"samples": 150, "stability_runs": 2},
            "session": {"budget": 2, "burn_in": 0, "strategy": "enumerate-alternatives",
                        "c": 3, "test_expl_every": 0, "test_expl_subsample": 0},
        }
        r = client.post("/sessions", json={"config": config})
        assert r.status_code == 201
        sid = r.json()["session_id"]
        q = client.get(f"/sessions/{sid}/query").json()
        assert q["instance"]["payload"]["kind"] == "image"
        assert q["class_names"] == ["negative", "positive"]
        for comp, cells in q.get("component_cells", {}).items():
            assert cells == [int(comp)]


class TestDocumentSession:
    def test_text_query_carries_words(self, client):
        config = {
            "seed": 4,
            "dataset": {"kind": "text", "source": "synthetic", "n_docs": 60},
            "learner": {"kind": "linear", "loss": "logistic", "regularizer": "l2",
                        "lam": 0.01, "max_epochs": 40},
            "query_strategy": "random",
            "lime": {"samples": 150, "stability_runs": 2},
            "session": {"budget": 2, "burn_in": 0, "strategy": "remove-tokens",
                        "c": 1, "test_expl_every": 0, "test_expl_subsample": 0},
        }
        sid = client.post("/sessions", json={"config": config}).json()["session_id"]
        q = client.get(f"/sessions/{sid}/query").json()
        payload = q["instance"]["payload"]
        assert payload["kind"] == "document"
        assert len(payload["words"]) == len(payload["tokens"])
        for comp, word in q.get("component_words", {}).items():
            assert isinstance(word, str)
