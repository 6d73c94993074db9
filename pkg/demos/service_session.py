"""Drive the HTTP service's session lifecycle in-process and show the JSON
payloads a client sees, including the write-through log that lets a session
survive a restart.

Run from the repository root:

    python3 demos/service_session.py

The same flow is available over the wire with:

    askless serve --rules corpus/rules --requirements corpus/requirements \
        --storage /tmp/askless-sessions --port 8000
"""

import json
import tempfile
from pathlib import Path

from askless.service import DialogService

storage = Path(tempfile.mkdtemp(prefix="askless-demo-"))
service = DialogService(
    rules_dir="corpus/rules",
    requirements_dir="corpus/requirements",
    storage_dir=storage,
)

listing = service.list_opportunities()
print(f"{len(listing)} opportunities on offer; first: {listing[0]['title']}")
print()

created = service.create_session(["rent-freeze-senior", "senior-meal-delivery"])
sid = created["session_id"]
print("POST /v1/sessions ->")
print(json.dumps(created, indent=2))
print()

# A 70-year-old renter living alone: answer the questions as they come.
for answer in ("rent", "70", "28000", "1"):
    body = service.post_answer(sid, answer)
    question = body.get("current_question", "(concluded)")
    print(f"answered {answer!r}; next: {question}")
print()

print("GET /v1/sessions/{id} after conclusion ->")
print(json.dumps(service.get_session(sid), indent=2))
print()

# The JSONL log is the durable record: a fresh process reloads it and
# serves the same session read-only.
reborn = DialogService(
    rules_dir="corpus/rules",
    requirements_dir="corpus/requirements",
    storage_dir=storage,
)
same = reborn.get_session(sid) == service.get_session(sid)
print(f"restarted service returns an identical payload: {same}")
print(f"write-through log: {storage / (sid + '.jsonl')}")
