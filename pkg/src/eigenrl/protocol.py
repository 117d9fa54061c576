"""Measurement-feedback learning loop.

An :class:`AgentState` holds an orthonormal basis (one column per basis
state) and adapts it from single-shot measurement outcomes alone.  Each
iteration at stage ``t``:

1. prepare the probe, column ``t`` of the basis;
2. send it through the black box (an opaque ``interact`` callable — the
   only channel to the hidden operator);
3. express the returned state in the current basis and sample one outcome
   ``m`` from the Born weights;
4. update: ``m == t`` is a reward (the search range ``w`` shrinks by
   ``r``), ``m > t`` is a punishment (columns ``t`` and ``m`` are mixed by
   a random two-level rotation with angles uniform in ``[-w pi, w pi]``,
   then ``w`` grows by ``p = nu / r``, saturating at ``w_cap`` when one is
   configured), and ``m < t`` refers to a column fixed in an earlier
   stage, so nothing changes.

A stage ends when its stopping rule fires; the search range then resets
and the next column is learned.  The last column needs no stage of its
own, being pinned by unitarity.

Punish angles are drawn in the fixed order x, z, y from the per-agent
generator, using the pre-update ``w``, so runs are reproducible and a
recorded trace can be replayed bit for bit.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from . import linalg
from .errors import (
    BadDim,
    ConfigError,
    DimMismatch,
    OutOfRange,
    StageOverflow,
)
from .linalg import RotationAngles

#: cadence (in iterations) of the drift-control re-orthonormalization
REORTHONORMALIZE_EVERY = 10_000

#: ceiling on the punish draw interval: beyond a million full turns the
#: angles are uniform mod 2pi anyway, and an unbounded interval would
#: eventually overflow the sampler on runaway uncapped runs.  ``w`` itself
#: is never clamped by this, so the bookkeeping identity stays exact.
MAX_DRAW_BOUND = 1e6 * math.pi

TRACE_FORMAT = "eigenrl-trace-1"

REWARD = "reward"
PUNISH = "punish"
NEUTRAL = "neutral"


@dataclass(frozen=True)
class RewardParams:
    """Feedback constants: shrink factor ``r``, growth product ``nu = r p``.

    ``w_cap`` optionally saturates the search range on punishment.  The
    default (infinity) keeps the bare multiplicative update, for which
    ``w = w1 * r**n_r * p**n_p`` holds exactly.  A cap of 1 is the natural
    saturated choice: at ``w = 1`` the punish angles already span the full
    ``[-pi, pi]`` interval, so larger ``w`` only relabels the same rotation
    distribution while making recovery from a long punish streak
    arbitrarily slow.
    """

    r: float
    nu: float
    w1: float = 1.0
    w_cap: float = math.inf

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 1.0:
            raise ConfigError(f"r must lie in (0, 1), got {self.r}")
        if self.nu < 1.0:
            raise ConfigError(f"nu must be >= 1, got {self.nu}")
        if self.w1 <= 0.0:
            raise ConfigError(f"w1 must be positive, got {self.w1}")
        if not self.w_cap > 0.0:
            raise ConfigError(f"w_cap must be positive, got {self.w_cap}")

    @property
    def p(self) -> float:
        """Punishment growth factor ``nu / r`` (> 1)."""
        return self.nu / self.r


@dataclass(frozen=True)
class StoppingRule:
    """When a stage is considered done.

    ``threshold`` stops once ``w`` drops below ``w_min`` (with
    ``max_iterations`` as a per-stage safety cap); ``fixed-budget`` runs
    exactly ``budgets[stage]`` iterations per stage.
    """

    kind: str = "threshold"
    budgets: tuple[int, ...] | None = None
    w_min: float = 1e-3
    max_iterations: int = 1_000_000

    def __post_init__(self) -> None:
        if self.kind not in ("threshold", "fixed-budget"):
            raise ConfigError(f"unknown stopping kind {self.kind!r}")
        if self.kind == "fixed-budget":
            if not self.budgets:
                raise ConfigError("fixed-budget stopping needs a budgets list")
            object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
            if any(b < 1 for b in self.budgets):
                raise ConfigError(f"budgets must be positive, got {self.budgets}")
        elif self.budgets is not None:
            raise ConfigError("threshold stopping takes no budgets")
        if self.w_min <= 0.0:
            raise ConfigError(f"w_min must be positive, got {self.w_min}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    """What one iteration did; the punish angles make replay possible."""

    k: int
    stage: int
    outcome: int
    classification: str
    angles: RotationAngles | None
    w_after: float


def _apply_block(basis: np.ndarray, t: int, m: int, block: np.ndarray) -> None:
    """Right-multiply the embedded two-level block onto columns t and m."""
    basis[:, (t, m)] = basis[:, (t, m)] @ block


class AgentState:
    """Mutable learning state: the adapting basis plus feedback bookkeeping.

    ``n_r``, ``n_p`` and ``n_neutral`` count the current stage only; they
    reset together with ``w`` when the stage advances, which keeps the
    ledger identity ``w = w1 * r**n_r * p**n_p`` valid per stage whenever
    the search range is uncapped (``w_cap`` infinite, the default).
    """

    __slots__ = ("dim", "params", "rng", "basis", "w", "stage", "k",
                 "n_r", "n_p", "n_neutral")

    def __init__(self, dim: int, params: RewardParams, seed: int) -> None:
        if dim < 2:
            raise BadDim(f"need dim >= 2, got {dim}")
        self.dim = dim
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.basis = np.eye(dim, dtype=np.complex128)
        self.w = params.w1
        self.stage = 0
        self.k = 1
        self.n_r = 0
        self.n_p = 0
        self.n_neutral = 0

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    @property
    def stage_iterations(self) -> int:
        """Iterations spent in the current stage."""
        return self.n_r + self.n_p + self.n_neutral

    def prepare_probe(self) -> np.ndarray:
        """Column ``stage`` of the basis (a read-only view)."""
        return self.basis[:, self.stage]

    def measure(self, evolved: np.ndarray) -> int:
        """Sample one outcome from the Born weights of ``evolved`` in the basis."""
        if evolved.shape != (self.dim,):
            raise DimMismatch(
                f"state shape {evolved.shape}, expected ({self.dim},)"
            )
        amps = evolved @ self.basis.conj()
        q = amps.real**2 + amps.imag**2
        total = float(q.sum())
        assert abs(total - 1.0) < 1e-9, "measurement weights drifted off 1"
        u = self.rng.random() * total
        acc = 0.0
        for j in range(self.dim - 1):
            acc += float(q[j])
            if u < acc:
                return j
        return self.dim - 1

    def decide_and_update(self, m: int) -> IterationRecord:
        """Apply the feedback for outcome ``m`` and advance the counter."""
        if not 0 <= m < self.dim:
            raise OutOfRange(f"outcome {m} outside [0, {self.dim})")
        t = self.stage
        k = self.k
        angles = None
        if m == t:
            self.w *= self.params.r
            self.n_r += 1
            classification = REWARD
        elif m > t:
            bound = min(self.w * math.pi, MAX_DRAW_BOUND)
            draw = self.rng.uniform(-bound, bound, 3)  # order: x, z, y
            angles = RotationAngles(
                phi_x=float(draw[0]), phi_y=float(draw[2]), phi_z=float(draw[1])
            )
            _apply_block(self.basis, t, m, linalg.rotation_block(angles))
            self.w = min(self.w * self.params.p, self.params.w_cap)
            self.n_p += 1
            classification = PUNISH
        else:
            self.n_neutral += 1
            classification = NEUTRAL
        self.k = k + 1
        if k % REORTHONORMALIZE_EVERY == 0:
            linalg.gram_schmidt(self.basis)
        return IterationRecord(
            k=k,
            stage=t,
            outcome=m,
            classification=classification,
            angles=angles,
            w_after=self.w,
        )

    def step(self, interact: Callable[[np.ndarray], np.ndarray]) -> IterationRecord:
        """Run one full iteration against the black box."""
        evolved = interact(self.prepare_probe())
        return self.decide_and_update(self.measure(evolved))

    def stage_converged(self, rule: StoppingRule) -> bool:
        done = self.stage_iterations
        if rule.kind == "fixed-budget":
            return done >= rule.budgets[self.stage]
        return self.w < rule.w_min or done >= rule.max_iterations

    def advance_stage(self) -> None:
        """Fix the current column and start learning the next one."""
        if self.stage >= self.dim - 1:
            raise StageOverflow(f"no stage after {self.stage} at dim {self.dim}")
        self.stage += 1
        self.w = self.params.w1
        self.n_r = 0
        self.n_p = 0
        self.n_neutral = 0

    def extract_eigenvectors(self) -> np.ndarray:
        """Copy of the basis; column j estimates the j-th eigenvector."""
        return self.basis.copy()


def validate_rule(dim: int, params: RewardParams, rule: StoppingRule) -> None:
    if rule.kind == "fixed-budget":
        if len(rule.budgets) < dim - 1:
            raise ConfigError(
                f"{dim - 1} stages need {dim - 1} budgets, got {len(rule.budgets)}"
            )
    elif rule.w_min >= params.w1:
        raise ConfigError(
            f"w_min {rule.w_min} must be below the initial range {params.w1}"
        )


def run_stages(
    agent: AgentState,
    interact: Callable[[np.ndarray], np.ndarray],
    rule: StoppingRule,
    observer: Callable[[AgentState, IterationRecord], None] | None = None,
) -> AgentState:
    """Drive the agent through all ``dim - 1`` stages; returns it finished."""
    validate_rule(agent.dim, agent.params, rule)
    final = agent.dim - 1
    while agent.stage < final:
        rec = agent.step(interact)
        if observer is not None:
            observer(agent, rec)
        if agent.stage_converged(rule):
            agent.advance_stage()
    return agent


# ---------------------------------------------------------------------------
# trace files: newline-delimited JSON, one record per iteration


def basis_hash(basis: np.ndarray) -> str:
    """SHA-256 of the row-major complex128 bytes of the basis."""
    return hashlib.sha256(np.ascontiguousarray(basis).tobytes()).hexdigest()


def write_trace(
    path: str,
    header: dict,
    records: Iterable[IterationRecord],
    final_basis: np.ndarray,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": TRACE_FORMAT, **header}) + "\n")
        for rec in records:
            row = {
                "k": rec.k,
                "stage": rec.stage,
                "m": rec.outcome,
                "class": rec.classification,
                "angles": None if rec.angles is None else asdict(rec.angles),
                "w_after": rec.w_after,
            }
            fh.write(json.dumps(row) + "\n")
        fh.write(json.dumps({"final_sha256": basis_hash(final_basis)}) + "\n")


def read_trace(path: str) -> tuple[dict, list[IterationRecord], str]:
    """Parse a trace file; raises ConfigError if unreadable or truncated."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in (raw.strip() for raw in fh) if line]
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc}") from exc
    if len(lines) < 2:
        raise ConfigError("trace too short: need a header and a final hash")
    try:
        rows = [json.loads(line) for line in lines]
    except json.JSONDecodeError as exc:
        raise ConfigError(f"trace line is not valid JSON: {exc}") from exc
    header, body, footer = rows[0], rows[1:-1], rows[-1]
    if header.get("format") != TRACE_FORMAT:
        raise ConfigError(f"unknown trace format: {header.get('format')!r}")
    if "final_sha256" not in footer:
        raise ConfigError("trace truncated: final hash line missing")
    records = []
    for row in body:
        try:
            angles = row["angles"]
            records.append(
                IterationRecord(
                    k=int(row["k"]),
                    stage=int(row["stage"]),
                    outcome=int(row["m"]),
                    classification=str(row["class"]),
                    angles=None if angles is None else RotationAngles(**angles),
                    w_after=float(row["w_after"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad trace record {row!r}: {exc}") from exc
    return dict(header), records, str(footer["final_sha256"])


def replay_basis(dim: int, records: Iterable[IterationRecord]) -> np.ndarray:
    """Re-apply recorded punishments; reproduces the live basis bit for bit."""
    basis = np.eye(dim, dtype=np.complex128)
    for rec in records:
        if rec.classification == PUNISH:
            _apply_block(
                basis, rec.stage, rec.outcome, linalg.rotation_block(rec.angles)
            )
        if rec.k % REORTHONORMALIZE_EVERY == 0:
            linalg.gram_schmidt(basis)
    return basis


def replay_trace(path: str) -> bool:
    """True iff the trace's recorded final hash matches the replayed basis."""
    header, records, recorded = read_trace(path)
    dim = header.get("dim")
    if not isinstance(dim, int) or dim < 2:
        raise ConfigError(f"trace header lacks a usable dim: {dim!r}")
    return basis_hash(replay_basis(dim, records)) == recorded
