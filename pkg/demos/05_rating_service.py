"""
Running a rating session over HTTP
==================================

The service hands each rater a private seeded presentation order,
accepts slider submissions, and appends every rating to a JSON-lines
log with an fsync before acknowledging.  Because all session state
lives in that log, a process restart (simulated here by building a
second app over the same log) loses nothing.
"""

import tempfile
import warnings
from pathlib import Path

warnings.filterwarnings("ignore", message="Using `httpx`")
from fastapi.testclient import TestClient

from gesturebench.service import create_app
from gesturebench.synth import SynthConfig, generate_dataset

root = Path(tempfile.mkdtemp(prefix="gesturebench_demo_"))
config = SynthConfig(n_audio=8, seed=21)
manifest = generate_dataset(config, root)
log = root / "ratings.jsonl"

client = TestClient(create_app(manifest, root, log, raters=["ann", "bob"]))

# ann pulls her first assignment; the order is hers alone
assignment = client.get("/api/session/ann/next").json()
print("ann's first assignment:", assignment["sample_id"],
      f"({assignment['position']} of {assignment['total']})")
print("media endpoints:", assignment["media"])

# the media URLs really serve the files
audio = client.get(assignment["media"]["audio"])
print("audio bytes:", len(audio.content), audio.headers["content-type"])

# rate three samples; each acknowledgment means the record is on disk
for _ in range(3):
    sid = client.get("/api/session/ann/next").json()["sample_id"]
    ack = client.post("/api/ratings", json={
        "rater_id": "ann",
        "sample_id": sid,
        "quality_raw": 72.0,
        "consistency_raw": 64.0,
        "emotion_vote": True,
    })
    print("rated", sid, "->", ack.json()["ok"])

print("progress:", client.get("/api/progress/ann").json())

# out-of-range sliders are rejected before anything touches the log
bad = client.post("/api/ratings", json={
    "rater_id": "ann",
    "sample_id": assignment["sample_id"],
    "quality_raw": 140.0,
    "consistency_raw": 50.0,
    "emotion_vote": False,
})
print("out-of-range submission ->", bad.status_code, bad.json()["detail"])

# bob rates the same three samples so aggregation has two raters per sample
rated = [r.sample_id for r in client.app.state.store.snapshot()]
for sid in rated:
    client.post("/api/ratings", json={
        "rater_id": "bob",
        "sample_id": sid,
        "quality_raw": 55.0,
        "consistency_raw": 80.0,
        "emotion_vote": True,
    })

# "restart": a fresh app over the same log rebuilds every session
client2 = TestClient(create_app(manifest, root, log, raters=["ann", "bob"]))
print("after restart, ann's progress:", client2.get("/api/progress/ann").json())

csv = client2.get("/api/aggregates.csv")
print("\nexported aggregates:")
print(csv.text)
