"""Talking to the external trainer process over its line protocol.

The search engine never trains networks itself; it ships each candidate
as one JSON line to a worker subprocess and reads one result line back.
This script spawns the bundled Node.js worker against the tiny fixture
dataset, evaluates three candidates of increasing depth, and prints the
scored results.  Run `npm run build` inside worker/ first.
"""

import sys
from pathlib import Path

from ased import EvaluationRequest, WorkerClient

ROOT = Path(__file__).resolve().parent.parent
WORKER_JS = ROOT / "worker" / "dist" / "main.js"
DATA_ROOT = ROOT / "worker" / "data"

if not WORKER_JS.exists():
    sys.exit(f"worker bundle missing at {WORKER_JS}; run: cd worker && npm install && npm run build")

candidates = [
    ("shallow", "c3-m2", ()),
    ("dilated", "d3-m2-c3", ()),
    ("shortcut", "c3-c3-m2-c3", ((1, 3),)),
]

argv = ["node", str(WORKER_JS), "serve", "--dataset-root", str(DATA_ROOT)]
print(f"spawning: {' '.join(argv)}")
with WorkerClient(argv, timeout=300.0) as worker:
    print("handshake complete, protocol 1")
    for name, layers, shortcuts in candidates:
        req = EvaluationRequest(
            candidate_id=name,
            layers=layers,
            shortcuts=shortcuts,
            channels=8,
            dataset="digits",
            regime="brief",
            seed=2024,
        )
        res = worker.request_evaluation(req)
        print(f"  {name:>9} ({layers:<14} shortcuts {list(shortcuts)}): "
              f"status {res.status}, accuracy {res.accuracy:.3f}, "
              f"matthews {res.matthews:+.3f}, {res.parameter_count:,} params, "
              f"{res.wall_time:.1f}s")
print("worker shut down cleanly")
