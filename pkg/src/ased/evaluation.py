"""Evaluator contract: surrogate oracles, external worker client, dispatcher.

Candidate evaluation is the only concurrent part of the system.  The
dispatcher runs up to pool-size evaluations in flight and gathers all
results before returning; because every evaluation is seeded from its
request rather than from arrival order, the aggregate outcome does not
depend on scheduling or pool size.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .architecture import CandidateArchitecture, effective_depth, parameter_count, parse_layers
from .layer_library import LayerLibrary
from .metrics import EvaluationResult, failed_result

PROTOCOL_VERSION = 1
REGIMES = ("brief", "full")
SURROGATE_KINDS = ("target_match", "deceptive_trap", "noisy_target")

# Fitness score of the all-identity candidate under the deceptive trap,
# as a fraction of the optimum.  High enough that greedy marginal updates
# are drawn to it, low enough that the true target still wins outright.
TRAP_SCORE = 0.99


class WorkerError(RuntimeError):
    """Base class for external-worker transport failures."""


class WorkerCrash(WorkerError):
    """The worker process exited or its pipes closed unexpectedly."""


class ProtocolViolation(WorkerError):
    """The worker sent a line outside the message grammar."""


class EvaluationTimeout(WorkerError):
    """No response arrived within the per-candidate timeout."""


class PoolExhausted(RuntimeError):
    """Every pool member failed while requests were still unserved."""


def derive_seed(root_seed: int, *path) -> int:
    """Stable 32-bit seed for a node of the run's derivation tree.

    All randomness flows from the root seed through tuples like
    (root, iteration, tag, candidate_index), so distributed and local
    runs of the same configuration agree.
    """
    entropy = (int(root_seed),) + tuple(int(p) for p in path)
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def derive_rng(root_seed: int, *path) -> np.random.Generator:
    entropy = (int(root_seed),) + tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class EvaluationRequest:
    """One candidate evaluation order, self-contained and seedable."""

    candidate_id: str
    layers: str                   # hyphenated shorthand, e.g. "c3-m2-c5"
    shortcuts: tuple = ()
    channels: int = 32
    dataset: str = "surrogate"
    regime: str = "brief"
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        object.__setattr__(
            self, "shortcuts", tuple((int(s), int(e)) for s, e in self.shortcuts)
        )

    def to_wire(self) -> dict:
        return {
            "type": "eval",
            "id": self.candidate_id,
            "layers": self.layers,
            "shortcuts": [[s, e] for s, e in self.shortcuts],
            "channels": self.channels,
            "dataset": self.dataset,
            "regime": self.regime,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SurrogateSpec:
    """Built-in oracle definition for desk-scale verification runs."""

    kind: str
    target: tuple
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in SURROGATE_KINDS:
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        target = tuple(int(i) for i in self.target)
        if not target:
            raise ValueError("surrogate target must be nonempty")
        object.__setattr__(self, "target", target)


def match_fraction(candidate, target, identity_index: int) -> float:
    """Positional match share after identity-padding both to equal length.

    Identity layers are structurally null, so padding with them compares
    the two sequences as networks rather than as raw strings.
    """
    n = max(len(candidate), len(target))
    pad_c = tuple(candidate) + (identity_index,) * (n - len(candidate))
    pad_t = tuple(target) + (identity_index,) * (n - len(target))
    hits = sum(1 for a, b in zip(pad_c, pad_t) if a == b)
    return hits / n


def evaluate_surrogate(req: EvaluationRequest, spec: SurrogateSpec,
                       library: LayerLibrary, rng=None, *,
                       input_shape=(32, 32, 3), num_classes: int = 10) -> EvaluationResult:
    """Scores a candidate against a synthetic oracle.

    Fitness f is the identity-padded match fraction against the hidden
    target, reported through the matthews field as 2f - 1 (rank order
    preserved).  The deceptive trap rewards the all-identity candidate
    with TRAP_SCORE of the optimum; the noisy variant adds seeded
    zero-mean Gaussian noise.  Wall time is reported as 0.0 so logs are
    byte-identical across pool sizes.
    """
    if library.identity_index is None:
        raise ValueError("surrogate oracles need a library with an identity entry")
    layers = parse_layers(req.layers, library)
    f = match_fraction(layers, spec.target, library.identity_index)
    if spec.kind == "deceptive_trap" and effective_depth(layers, library) == 0:
        f = TRAP_SCORE
    elif spec.kind == "noisy_target":
        if rng is None:
            rng = np.random.default_rng(req.seed)
        f += spec.noise_sigma * float(rng.standard_normal())
        f = min(max(f, 0.0), 1.0)
    arch = CandidateArchitecture(layers, req.shortcuts, req.channels, input_shape)
    params = parameter_count(arch, library, num_classes)
    return EvaluationResult(
        candidate_id=req.candidate_id,
        accuracy=f,
        matthews=2.0 * f - 1.0,
        parameter_count=params,
        wall_time=0.0,
    )


class SurrogateEvaluator:
    """Pool member wrapping a surrogate oracle.  Never fails."""

    def __init__(self, spec: SurrogateSpec, library: LayerLibrary,
                 input_shape=(32, 32, 3), num_classes: int = 10):
        self.spec = spec
        self.library = library
        self.input_shape = tuple(input_shape)
        self.num_classes = num_classes

    @property
    def alive(self) -> bool:
        return True

    def evaluate(self, req: EvaluationRequest) -> EvaluationResult:
        return evaluate_surrogate(req, self.spec, self.library,
                                  input_shape=self.input_shape,
                                  num_classes=self.num_classes)

    def close(self) -> None:
        pass


class WorkerClient:
    """One external trainer process speaking newline-delimited JSON.

    Handshake: the worker emits {"type": "ready", "protocol": 1} on
    startup.  Each evaluation is one request line answered by one result
    line; {"type": "shutdown"} ends the session.  Unknown fields in a
    result are ignored; unknown message types, malformed lines, and id
    mismatches are protocol violations and poison the connection, since
    a desynchronized stream cannot pair requests with responses anymore.
    """

    def __init__(self, argv, timeout: float = 600.0,
                 handshake_timeout: float = 60.0, cwd=None):
        self.argv = list(argv)
        self.timeout = timeout
        self._lines = queue.Queue()
        self._stderr_tail = deque(maxlen=50)
        self._dead = False
        self._proc = subprocess.Popen(
            self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE, text=True, bufsize=1, cwd=cwd,
        )
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()
        self._handshake(handshake_timeout)

    def _pump_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _pump_stderr(self):
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def _diagnostic(self) -> str:
        if not self._stderr_tail:
            return ""
        return " | stderr: " + " / ".join(list(self._stderr_tail)[-5:])

    def _read_message(self, timeout: float) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            self._kill()
            raise EvaluationTimeout(f"no worker response within {timeout}s" + self._diagnostic())
        if line is None:
            self._dead = True
            raise WorkerCrash("worker closed its output stream" + self._diagnostic())
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            self._kill()
            raise ProtocolViolation(f"malformed worker line: {line!r}")
        if not isinstance(msg, dict):
            self._kill()
            raise ProtocolViolation(f"worker message is not an object: {line!r}")
        return msg

    def _handshake(self, timeout: float) -> None:
        msg = self._read_message(timeout)
        if msg.get("type") != "ready":
            self._kill()
            raise ProtocolViolation(f"expected ready handshake, got {msg!r}")
        if msg.get("protocol") != PROTOCOL_VERSION:
            self._kill()
            raise ProtocolViolation(f"unsupported protocol version {msg.get('protocol')!r}")

    def _send(self, msg: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self._dead = True
            raise WorkerCrash("worker stdin closed" + self._diagnostic())

    @property
    def alive(self) -> bool:
        return not self._dead and self._proc.poll() is None

    def request_evaluation(self, req: EvaluationRequest) -> EvaluationResult:
        """Raw request/response round trip.  Raises on transport failure."""
        if not self.alive:
            raise WorkerCrash("worker is not running" + self._diagnostic())
        start = time.monotonic()
        self._send(req.to_wire())
        msg = self._read_message(self.timeout)
        wall = time.monotonic() - start
        if msg.get("type") != "result":
            self._kill()
            raise ProtocolViolation(f"unknown message type {msg.get('type')!r}")
        if msg.get("id") != req.candidate_id:
            self._kill()
            raise ProtocolViolation(
                f"response id {msg.get('id')!r} does not match request {req.candidate_id!r}"
            )
        status = msg.get("status")
        if status == "failed":
            return failed_result(req.candidate_id, str(msg.get("error", "")), wall_time=wall)
        if status != "ok":
            self._kill()
            raise ProtocolViolation(f"unknown result status {status!r}")
        try:
            return EvaluationResult(
                candidate_id=req.candidate_id,
                accuracy=float(msg["accuracy"]),
                matthews=float(msg["matthews"]),
                parameter_count=int(msg["params"]),
                wall_time=wall,
            )
        except (KeyError, TypeError, ValueError) as exc:
            self._kill()
            raise ProtocolViolation(f"bad result payload: {exc}")

    def evaluate(self, req: EvaluationRequest) -> EvaluationResult:
        return evaluate_external(req, self)

    def _kill(self) -> None:
        self._dead = True
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self) -> None:
        if self._proc.poll() is None and not self._dead:
            try:
                self._send({"type": "shutdown"})
                self._proc.wait(timeout=10.0)
            except (WorkerCrash, subprocess.TimeoutExpired):
                self._kill()
        else:
            self._kill()
        self._dead = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def evaluate_external(req: EvaluationRequest, worker) -> EvaluationResult:
    """Maps transport failures to failed results so populations stay full."""
    try:
        return worker.request_evaluation(req)
    except EvaluationTimeout as exc:
        return failed_result(req.candidate_id, f"timeout: {exc}")
    except ProtocolViolation as exc:
        return failed_result(req.candidate_id, f"protocol violation: {exc}")
    except WorkerCrash as exc:
        return failed_result(req.candidate_id, f"worker crash: {exc}")


class EvaluatorPool:
    """Fixed set of evaluator members, each serving one request at a time."""

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("pool needs at least one member")
        self.members = members

    @property
    def size(self) -> int:
        return len(self.members)

    def close(self) -> None:
        for m in self.members:
            m.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def dispatch(requests, pool: EvaluatorPool) -> list:
    """Evaluates every request; result order matches request order.

    Per-candidate failures become failed results.  A member that dies is
    dropped from rotation; the call aborts only when all members are gone
    while requests remain unserved.
    """
    requests = list(requests)
    if not requests:
        return []
    live = [m for m in pool.members if m.alive]
    if not live:
        raise PoolExhausted("no live evaluators in pool")
    results = [None] * len(requests)
    pending = queue.SimpleQueue()
    for item in enumerate(requests):
        pending.put(item)

    def drain(member):
        while member.alive:
            try:
                i, req = pending.get_nowait()
            except queue.Empty:
                return
            results[i] = member.evaluate(req)

    if len(live) == 1:
        drain(live[0])
    else:
        threads = [threading.Thread(target=drain, args=(m,), daemon=True) for m in live]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    missing = sum(1 for r in results if r is None)
    if missing:
        raise PoolExhausted(f"{missing} evaluations unserved after all pool members failed")
    return results
