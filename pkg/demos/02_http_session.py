"""Walkthrough: the same dialog over real HTTP.

Boots a dialogd server on a scratch data directory, drives it with httpx the
way the web client does, stops it, restarts it, and shows the data survived.

    python3 demos/02_http_session.py
"""

import json
import signal
import socket
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import httpx

with socket.socket() as s:
    s.bind(("127.0.0.1", 0))
    PORT = s.getsockname()[1]
BASE = f"http://127.0.0.1:{PORT}"
DATA = Path(tempfile.mkdtemp(prefix="dialogd-demo-"))

SEED = DATA / "seed.json"
SEED.write_text(json.dumps([
    {"kind": "create-table", "table": "customer", "columns": [
        {"name": "id", "data_type": "int", "is_nullable": False, "constraint": "PRIMARY KEY"},
        {"name": "name", "data_type": "varchar", "max_length": 100, "is_nullable": False},
    ]},
]))


def start():
    proc = subprocess.Popen(
        [sys.executable, "-m", "dialogd.cli",
         "--port", str(PORT), "--data-dir", str(DATA / "data"), "--seed", str(SEED)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    for _ in range(100):
        try:
            httpx.get(f"{BASE}/api/tables", timeout=0.5)
            return proc
        except httpx.HTTPError:
            time.sleep(0.1)
    raise RuntimeError("server did not start")


def show(title, obj):
    print(f"\n== {title}")
    print(json.dumps(obj, indent=2))


proc = start()
try:
    show("seeded table list", httpx.get(f"{BASE}/api/tables").json())

    r = httpx.post(f"{BASE}/api/tables/customer/items", json=["1", "Alice"])
    show("insert response", r.json())
    httpx.post(f"{BASE}/api/tables/customer/items", json=["2", "O'Brien"])

    show("filtered aggregate (quote doubling, URL-encoded)",
         httpx.get(f"{BASE}/api/tables/customer",
                   params={"filter": "name = 'O''Brien'", "take": 10}).json())

    show("an injection attempt is a 400 with an offset",
         httpx.get(f"{BASE}/api/tables/customer",
                   params={"filter": "1=1; drop table customer"}).json())

    # schema edit over the wire; no restart anywhere
    httpx.post(f"{BASE}/api/schema", json={
        "kind": "add-column", "table": "customer",
        "column": {"name": "vip", "data_type": "bit", "is_nullable": True},
    })
    show("fields right after add-column",
         [f["Name"] for f in httpx.get(f"{BASE}/api/tables/customer/fields").json()])

    print("\n== stopping (graceful: checkpoint on shutdown) and restarting")
    proc.send_signal(signal.SIGTERM)
    proc.wait(timeout=10)
    proc = start()

    show("after restart: rows and the new column survived",
         httpx.get(f"{BASE}/api/tables/customer").json())
finally:
    if proc.poll() is None:
        proc.send_signal(signal.SIGTERM)
        proc.wait(timeout=10)
print(f"\n(data directory kept at {DATA})")
