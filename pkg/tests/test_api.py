"""HTTP endpoint contracts, auth, event streams, schema round-trips."""

from __future__ import annotations

import asyncio
import io
import json
from pathlib import Path

import httpx
import pytest
from PIL import Image

from ideastudio.api import create_app
from ideastudio.config import ServiceConfig

pytestmark = pytest.mark.anyio

SCHEMA_DIR = Path(__file__).parent.parent / "docs" / "api"


def make_app(tmp_path, **overrides):
    config = ServiceConfig(store_root=tmp_path / "store", **overrides)
    return create_app(config)


async def settle(app, client, cycle_id: str, timeout: float = 10.0) -> dict:
    """Wait until the cycle reports complete, draining background tasks."""
    orchestrator = app.state.orchestrator
    deadline = asyncio.get_event_loop().time() + timeout
    while True:
        if not app.state.tasks:
            await orchestrator.drain()
        response = await client.get(f"/api/cycles/{cycle_id}")
        body = response.json()
        if body["complete"]:
            return body
        if asyncio.get_event_loop().time() > deadline:
            raise AssertionError(f"cycle never completed: {body}")
        await asyncio.sleep(0.02)


@pytest.fixture
async def client(tmp_path):
    app = make_app(tmp_path)
    transport = httpx.ASGITransport(app=app)
    async with httpx.AsyncClient(transport=transport, base_url="http://testserver") as http:
        http.app = app
        yield http


async def make_session(client) -> str:
    response = await client.post("/api/sessions", json={"name": "demo"})
    assert response.status_code == 201
    return response.json()["id"]


async def brainstormed_cycle(client, instruction="a haunted lighthouse") -> dict:
    sid = await make_session(client)
    response = await client.post(
        f"/api/sessions/{sid}/brainstorm", json={"instruction": instruction}
    )
    assert response.status_code == 202
    return await settle(client.app, client, response.json()["cycle_id"])


class TestSessions:
    async def test_create_and_fetch(self, client):
        sid = await make_session(client)
        response = await client.get(f"/api/sessions/{sid}")
        body = response.json()
        assert body["name"] == "demo"
        assert body["counters"] == {"cycles": 0, "ideas_generated": 0, "ideas_used": 0}

    async def test_list(self, client):
        await make_session(client)
        await make_session(client)
        response = await client.get("/api/sessions")
        assert len(response.json()) == 2

    async def test_unknown_404(self, client):
        assert (await client.get("/api/sessions/nope")).status_code == 404


class TestBrainstormEndpoint:
    async def test_accepted_then_cards_stream_in(self, client):
        cycle = await brainstormed_cycle(client)
        assert len(cycle["cards"]) == 8
        assert all(card["state"] == "ready" for card in cycle["cards"])
        assert all(slot["state"] == "ready" for slot in cycle["slots"])

    async def test_missing_inputs_422(self, client):
        sid = await make_session(client)
        response = await client.post(f"/api/sessions/{sid}/brainstorm", json={})
        assert response.status_code == 422

    async def test_bad_body_400(self, client):
        sid = await make_session(client)
        response = await client.post(
            f"/api/sessions/{sid}/brainstorm", json={"instruction": ["not", "text"]}
        )
        assert response.status_code == 400

    async def test_unknown_session_404(self, client):
        response = await client.post("/api/sessions/nope/brainstorm", json={"instruction": "x"})
        assert response.status_code == 404


class TestCardEndpoint:
    async def test_full_card_shape(self, client):
        cycle = await brainstormed_cycle(client)
        card_id = cycle["cards"][0]["id"]
        body = (await client.get(f"/api/cards/{card_id}")).json()
        assert body["state"] == "ready"
        idea = body["idea"]
        for section in (
            "theme",
            "art_style",
            "content",
            "lighting_atmosphere",
            "color_palette",
            "layout",
            "shot_angle",
        ):
            assert idea[section]
        keywords = body["keywords"]
        categories = [k for k in keywords if keywords[k]]
        assert sorted(categories) == sorted(
            ["theme", "art_style", "content", "lighting_atmosphere", "color_palette", "shot_angle"]
        )
        assert "layout" not in keywords
        assert body["lineage"][0]["origin_kind"] == "brainstorm_root"

    async def test_image_blob_served(self, client):
        cycle = await brainstormed_cycle(client)
        card = (await client.get(f"/api/cards/{cycle['cards'][0]['id']}")).json()
        response = await client.get(card["image_url"])
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert Image.open(io.BytesIO(response.content)).size == (1792, 1024)

    async def test_unknown_404(self, client):
        assert (await client.get("/api/cards/card-none")).status_code == 404


async def read_sse(client, url: str, *, until, limit: float = 10.0) -> list[dict]:
    """Collect SSE frames until ``until`` (an event type, or a predicate
    over the parsed event) is satisfied."""
    stop = until if callable(until) else (lambda event: event["type"] == until)
    events = []
    async with client.stream("GET", url, timeout=limit) as response:
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/event-stream")
        buffer = ""
        async for chunk in response.aiter_text():
            buffer += chunk
            while "\n\n" in buffer:
                frame, buffer = buffer.split("\n\n", 1)
                event = {}
                for line in frame.splitlines():
                    if line.startswith("event: "):
                        event["type"] = line[len("event: ") :]
                    elif line.startswith("data: "):
                        event["data"] = json.loads(line[len("data: ") :])
                if event.get("type"):
                    events.append(event)
                    if stop(event):
                        return events
    return events


class TestEventStreams:
    async def test_cycle_stream_delivers_cards_then_completes(self, client):
        sid = await make_session(client)
        response = await client.post(
            f"/api/sessions/{sid}/brainstorm", json={"instruction": "a night market"}
        )
        cycle_id = response.json()["cycle_id"]

        def settled(event):
            if event["type"] == "cycle-complete":
                return True
            return event["type"] == "cycle-state" and event["data"].get("complete", False)

        events = await read_sse(
            client, f"/api/cycles/{cycle_id}/events?until_complete=1", until=settled
        )
        types = [event["type"] for event in events]
        assert types[0] == "cycle-state"
        created = [e for e in events if e["type"] == "card-created"]
        if created:
            # per card: creation precedes keyword and image readiness, and
            # both enrichment events reach cycle-stream subscribers
            first_card = created[0]["data"]["card_id"]
            sequence = [
                event["type"]
                for event in events
                if event["data"].get("card_id") == first_card
                and event["type"] in ("card-created", "card-keywords", "card-image")
            ]
            assert sequence[0] == "card-created"
            assert "card-keywords" in sequence and "card-image" in sequence
        else:
            # the fan-out outpaced the subscription; the snapshot carries it
            assert len(events[-1]["data"]["cards"]) == 8
        await settle(client.app, client, cycle_id)

    async def test_card_stream_snapshot_terminates_for_settled_card(self, client):
        cycle = await brainstormed_cycle(client)
        card_id = cycle["cards"][0]["id"]
        events = await read_sse(client, f"/api/cards/{card_id}/events", until="card-state")
        assert events[-1]["data"]["state"] == "ready"

    async def test_stream_404_for_unknown_cycle(self, client):
        assert (await client.get("/api/cycles/cyc-none/events")).status_code == 404


class TestSearchEndpoint:
    async def test_fifty_results(self, client):
        sid = await make_session(client)
        response = await client.get(
            "/api/search", params={"keyword": "Antique Telephone", "page": 0, "session_id": sid}
        )
        body = response.json()
        assert len(body["results"]) == 50
        assert body["page"] == 0

    async def test_empty_keyword_422(self, client):
        assert (await client.get("/api/search", params={"keyword": " "})).status_code == 422

    async def test_pages_disjoint_and_history_recorded(self, client):
        sid = await make_session(client)
        a = (
            await client.get(
                "/api/search", params={"keyword": "sofa", "page": 0, "session_id": sid}
            )
        ).json()
        b = (
            await client.get(
                "/api/search", params={"keyword": "sofa", "page": 1, "session_id": sid}
            )
        ).json()
        urls_a = {r["image_url"] for r in a["results"]}
        assert urls_a.isdisjoint({r["image_url"] for r in b["results"]})

    async def test_thumbnail_proxy_serves_mock_thumbs(self, client):
        response = await client.get("/api/search", params={"keyword": "sofa"})
        thumb = response.json()["results"][0]["thumbnail_url"]
        proxied = await client.get("/api/thumb", params={"url": thumb})
        assert proxied.status_code == 200
        assert proxied.headers["content-type"] == "image/png"


class TestRefinementEndpoints:
    async def test_combine_returns_five_ids(self, client):
        cycle = await brainstormed_cycle(client)
        card = (await client.get(f"/api/cards/{cycle['cards'][0]['id']}")).json()
        keyword = card["keywords"]["theme"][0]
        search = (await client.get("/api/search", params={"keyword": keyword})).json()
        response = await client.post(
            f"/api/cards/{card['id']}/combine",
            json={"keyword": keyword, "reference": search["results"][0]},
        )
        assert response.status_code == 200
        assert len(response.json()["card_ids"]) == 5
        await settle(client.app, client, cycle["id"])

    async def test_combine_with_upload(self, client):
        cycle = await brainstormed_cycle(client)
        upload = await client.post(
            "/api/images", files={"file": ("ref.png", b"fake-image-bytes", "image/png")}
        )
        assert upload.status_code == 201
        blob = upload.json()["image_ref"]
        response = await client.post(
            f"/api/cards/{cycle['cards'][0]['id']}/combine",
            json={"keyword": "sofa", "reference": {"image_ref": blob}},
        )
        assert len(response.json()["card_ids"]) == 5
        await settle(client.app, client, cycle["id"])

    async def test_combine_without_reference_422(self, client):
        cycle = await brainstormed_cycle(client)
        response = await client.post(
            f"/api/cards/{cycle['cards'][0]['id']}/combine",
            json={"keyword": "sofa", "reference": {}},
        )
        assert response.status_code == 422

    async def test_refine_returns_five_ids_and_lineage(self, client):
        cycle = await brainstormed_cycle(client)
        card_id = cycle["cards"][0]["id"]
        response = await client.post(
            f"/api/cards/{card_id}/refine", json={"instruction": "make it more tropical"}
        )
        ids = response.json()["card_ids"]
        assert len(ids) == 5
        child = (await client.get(f"/api/cards/{ids[0]}")).json()
        kinds = [step["origin_kind"] for step in child["lineage"]]
        assert kinds == ["brainstorm_root", "refined_by_instruction"]
        await settle(client.app, client, cycle["id"])

    async def test_refine_empty_instruction_422(self, client):
        cycle = await brainstormed_cycle(client)
        response = await client.post(
            f"/api/cards/{cycle['cards'][0]['id']}/refine", json={"instruction": "  "}
        )
        assert response.status_code == 422

    async def test_explore_starts_new_cycle(self, client):
        cycle = await brainstormed_cycle(client)
        response = await client.post(
            f"/api/cards/{cycle['cards'][0]['id']}/explore",
            json={"instruction": "design a kitchen based on this"},
        )
        assert response.status_code == 202
        new_cycle = await settle(client.app, client, response.json()["cycle_id"])
        assert new_cycle["kind"] == "explore_more"
        assert len(new_cycle["cards"]) == 8
        assert new_cycle["source_card_id"] == cycle["cards"][0]["id"]


class TestUsedEndpoint:
    async def test_mark_and_stats(self, client):
        cycle = await brainstormed_cycle(client)
        sid = cycle["session_id"]
        response = await client.post(f"/api/cards/{cycle['cards'][0]['id']}/used", json={"used": True})
        assert response.json()["ideas_used"] == 1
        stats = (await client.get(f"/api/sessions/{sid}/stats")).json()
        assert stats == {"cycles": 1, "ideas_generated": 8, "ideas_used": 1}


class TestAuth:
    async def test_endpoints_guarded_when_token_set(self, tmp_path):
        app = make_app(tmp_path, bearer_token="hunter2")
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://t") as http:
            assert (await http.post("/api/sessions", json={"name": "x"})).status_code == 401
            bad = await http.post(
                "/api/sessions", json={"name": "x"}, headers={"Authorization": "Bearer wrong"}
            )
            assert bad.status_code == 401
            good = await http.post(
                "/api/sessions", json={"name": "x"}, headers={"Authorization": "Bearer hunter2"}
            )
            assert good.status_code == 201
            # query token accepted for browser-loaded resources
            listed = await http.get("/api/sessions", params={"token": "hunter2"})
            assert listed.status_code == 200
            # health stays open for probes
            assert (await http.get("/api/health")).status_code == 200


class TestSchemas:
    """Every response shape validates against the checked-in schemas."""

    def schema(self, name: str) -> dict:
        return json.loads((SCHEMA_DIR / f"{name}.schema.json").read_text())

    async def test_responses_validate(self, client):
        import jsonschema

        cycle = await brainstormed_cycle(client)
        sid = cycle["session_id"]
        card_id = cycle["cards"][0]["id"]

        session_body = (await client.get(f"/api/sessions/{sid}")).json()
        jsonschema.validate(session_body, self.schema("session"))

        jsonschema.validate(cycle, self.schema("cycle"))

        card_body = (await client.get(f"/api/cards/{card_id}")).json()
        jsonschema.validate(card_body, self.schema("card"))

        search_body = (
            await client.get("/api/search", params={"keyword": "lantern", "page": 0})
        ).json()
        jsonschema.validate(search_body, self.schema("search"))

        stats_body = (await client.get(f"/api/sessions/{sid}/stats")).json()
        jsonschema.validate(stats_body, self.schema("counters"))

        refine = await client.post(
            f"/api/cards/{card_id}/refine", json={"instruction": "warmer"}
        )
        jsonschema.validate(refine.json(), self.schema("card_ids"))

        error_body = (await client.get("/api/cards/card-none")).json()
        jsonschema.validate(error_body, self.schema("error"))
        await settle(client.app, client, cycle["id"])


class TestRestartDurability:
    async def test_acknowledged_state_survives_service_restart(self, tmp_path):
        config = ServiceConfig(store_root=tmp_path / "store")
        app = create_app(config)
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://t") as http:
            http.app = app
            sid = await make_session(http)
            response = await http.post(
                f"/api/sessions/{sid}/brainstorm", json={"instruction": "x"}
            )
            cycle = await settle(app, http, response.json()["cycle_id"])
            await http.post(f"/api/cards/{cycle['cards'][0]['id']}/used", json={"used": True})

        second = create_app(ServiceConfig(store_root=tmp_path / "store"))
        transport2 = httpx.ASGITransport(app=second)
        async with httpx.AsyncClient(transport=transport2, base_url="http://t") as http:
            stats = (await http.get(f"/api/sessions/{sid}/stats")).json()
            assert stats == {"cycles": 1, "ideas_generated": 8, "ideas_used": 1}
            card = (await http.get(f"/api/cards/{cycle['cards'][0]['id']}")).json()
            assert card["state"] == "ready"
            blob = await http.get(card["image_url"])
            assert blob.status_code == 200
