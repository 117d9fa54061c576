"""Monte Carlo driver: repeated runs, aggregate curves, result files.

A single experiment repeats the learning protocol ``repetitions`` times
against a configured environment and aggregates two curves over the
iteration count k: the mean fidelity F_j(k) between basis column j and
the environment's eigenvectors, and the mean search range W(k).

Aggregation is a streaming reduction applied in repetition-index order,
so serial and pooled executions produce bit-identical results.
"""
from __future__ import annotations

import json
import math
import multiprocessing
import os
import subprocess
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import linalg, protocol
from .environment import (
    Environment,
    SingleQubitSpec,
    env_bell,
    env_from_matrix,
    env_random,
    env_single_qubit,
    env_spin_x,
    load_operator,
)
from .errors import ConfigError, DimMismatch, ModeMismatch, OutOfRange
from .protocol import AgentState, RewardParams, StoppingRule, run_stages

RESULTS_FORMAT = "eigenrl-results-1"

ENV_KINDS = ("random", "single-qubit-spec", "spin-x", "bell", "file")

#: "paper" keeps the best-matching eigenvector index shared across the whole
#: ensemble (max over l of the mean |amplitude|); "per-rep" lets every
#: repetition pick its own best match before averaging.
FIDELITY_MODES = ("paper", "per-rep")

_REP_SALT = 17
_ENV_SALT = 23


def derive_seed(root: int, index: int, salt: int = _REP_SALT) -> int:
    """Independent child seed for repetition ``index`` of a run seeded ``root``."""
    seq = np.random.SeedSequence([root, salt, index])
    return int(seq.generate_state(1, np.uint64)[0])


@lru_cache(maxsize=1)
def code_version() -> str:
    """git describe of the working tree, falling back to the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        probe = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=10,
        )
        if probe.returncode == 0 and probe.stdout.strip():
            return probe.stdout.strip()
    except OSError:
        pass
    try:
        from importlib.metadata import version

        return "eigenrl-" + version("eigenrl")
    except Exception:  # pragma: no cover - metadata missing in odd installs
        return "eigenrl-unknown"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment bit for bit."""

    dim: int
    env_kind: str
    r: float
    nu: float
    repetitions: int
    seed: int
    stopping: StoppingRule
    tau: float = 1.0
    w1: float = 1.0
    w_cap: float = math.inf
    env_seed: int = 0
    resample_env_per_repetition: bool = False
    fidelity_mode: str = "paper"
    record_every: int = 1
    single_qubit: SingleQubitSpec | None = None
    operator_file: str | None = None

    def __post_init__(self) -> None:
        if self.env_kind not in ENV_KINDS:
            raise ConfigError(
                f"env_kind must be one of {ENV_KINDS}, got {self.env_kind!r}"
            )
        if self.dim < 2:
            raise ConfigError(f"dim must be at least 2, got {self.dim}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")
        if not math.isfinite(self.tau):
            raise ConfigError(f"tau must be finite, got {self.tau}")
        if self.fidelity_mode not in FIDELITY_MODES:
            raise ConfigError(
                f"fidelity_mode must be one of {FIDELITY_MODES}, "
                f"got {self.fidelity_mode!r}"
            )
        if self.fidelity_mode == "paper" and self.resample_env_per_repetition:
            raise ModeMismatch(
                "fidelity_mode 'paper' shares one environment across "
                "repetitions; use 'per-rep' when resampling"
            )
        if self.resample_env_per_repetition and self.env_kind != "random":
            raise ConfigError(
                f"only env_kind 'random' can be resampled, got {self.env_kind!r}"
            )
        if self.env_kind == "single-qubit-spec" and self.single_qubit is None:
            raise ConfigError("env_kind 'single-qubit-spec' needs a single_qubit block")
        if self.env_kind != "single-qubit-spec" and self.single_qubit is not None:
            raise ConfigError("single_qubit only applies to env_kind 'single-qubit-spec'")
        if self.env_kind == "file" and not self.operator_file:
            raise ConfigError("env_kind 'file' needs an operator_file path")
        if self.env_kind != "file" and self.operator_file is not None:
            raise ConfigError("operator_file only applies to env_kind 'file'")
        protocol.validate_rule(self.dim, self.params, self.stopping)

    @property
    def params(self) -> RewardParams:
        return RewardParams(r=self.r, nu=self.nu, w1=self.w1, w_cap=self.w_cap)


_REQUIRED_KEYS = ("dim", "env_kind", "r", "nu", "repetitions", "seed", "stopping")
_OPTIONAL_KEYS = (
    "tau",
    "w1",
    "w_cap",
    "env_seed",
    "resample_env_per_repetition",
    "fidelity_mode",
    "record_every",
    "single_qubit",
    "operator_file",
)


def _as_int(raw: dict, key: str) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _as_float(raw: dict, key: str) -> float:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_bool(raw: dict, key: str) -> bool:
    value = raw[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{key} must be true or false, got {value!r}")
    return value


def _parse_stopping(raw) -> StoppingRule:
    if not isinstance(raw, dict):
        raise ConfigError(f"stopping must be an object, got {raw!r}")
    kind = raw.get("kind")
    if kind == "fixed-budget":
        allowed = {"kind", "budgets"}
        budgets = raw.get("budgets")
        if not isinstance(budgets, list) or not budgets:
            raise ConfigError("fixed-budget stopping needs a non-empty budgets list")
        for b in budgets:
            if isinstance(b, bool) or not isinstance(b, int):
                raise ConfigError(f"budgets must be integers, got {b!r}")
        rule = StoppingRule(kind="fixed-budget", budgets=tuple(budgets))
    elif kind == "threshold":
        allowed = {"kind", "w_min", "max_iterations"}
        kw = {}
        if "w_min" in raw:
            kw["w_min"] = _as_float(raw, "w_min")
        if "max_iterations" in raw:
            kw["max_iterations"] = _as_int(raw, "max_iterations")
        rule = StoppingRule(kind="threshold", **kw)
    else:
        raise ConfigError(f"stopping.kind must be fixed-budget or threshold, got {kind!r}")
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown stopping keys: {unknown}")
    return rule


def _parse_single_qubit(raw) -> SingleQubitSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"single_qubit must be an object, got {raw!r}")
    wanted = {"alpha", "beta", "lambda0", "lambda1"}
    if set(raw) != wanted:
        raise ConfigError(
            f"single_qubit needs exactly the keys {sorted(wanted)}, "
            f"got {sorted(raw)}"
        )
    return SingleQubitSpec(**{key: _as_float(raw, key) for key in wanted})


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from parsed JSON; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    missing = sorted(set(_REQUIRED_KEYS) - set(raw))
    if missing:
        raise ConfigError(f"missing config keys: {missing}")

    kwargs = {
        "dim": _as_int(raw, "dim"),
        "env_kind": raw["env_kind"],
        "r": _as_float(raw, "r"),
        "nu": _as_float(raw, "nu"),
        "repetitions": _as_int(raw, "repetitions"),
        "seed": _as_int(raw, "seed"),
        "stopping": _parse_stopping(raw["stopping"]),
    }
    if "tau" in raw:
        kwargs["tau"] = _as_float(raw, "tau")
    if "w1" in raw:
        kwargs["w1"] = _as_float(raw, "w1")
    if "w_cap" in raw:
        kwargs["w_cap"] = math.inf if raw["w_cap"] is None else _as_float(raw, "w_cap")
    if "env_seed" in raw:
        kwargs["env_seed"] = _as_int(raw, "env_seed")
    if "resample_env_per_repetition" in raw:
        kwargs["resample_env_per_repetition"] = _as_bool(
            raw, "resample_env_per_repetition"
        )
    if "fidelity_mode" in raw:
        kwargs["fidelity_mode"] = raw["fidelity_mode"]
    if "record_every" in raw:
        kwargs["record_every"] = _as_int(raw, "record_every")
    if "single_qubit" in raw and raw["single_qubit"] is not None:
        kwargs["single_qubit"] = _parse_single_qubit(raw["single_qubit"])
    if "operator_file" in raw and raw["operator_file"] is not None:
        path = raw["operator_file"]
        if not isinstance(path, str):
            raise ConfigError(f"operator_file must be a path string, got {path!r}")
        kwargs["operator_file"] = path
    return ExperimentConfig(**kwargs)


def config_to_dict(config: ExperimentConfig) -> dict:
    """Full echo of a config, invertible through config_from_dict."""
    stopping: dict = {"kind": config.stopping.kind}
    if config.stopping.kind == "fixed-budget":
        stopping["budgets"] = list(config.stopping.budgets)
    else:
        stopping["w_min"] = config.stopping.w_min
        stopping["max_iterations"] = config.stopping.max_iterations
    out = {
        "dim": config.dim,
        "env_kind": config.env_kind,
        "tau": config.tau,
        "r": config.r,
        "nu": config.nu,
        "w1": config.w1,
        "w_cap": None if math.isinf(config.w_cap) else config.w_cap,
        "repetitions": config.repetitions,
        "seed": config.seed,
        "env_seed": config.env_seed,
        "stopping": stopping,
        "resample_env_per_repetition": config.resample_env_per_repetition,
        "fidelity_mode": config.fidelity_mode,
        "record_every": config.record_every,
    }
    if config.single_qubit is not None:
        spec = config.single_qubit
        out["single_qubit"] = {
            "alpha": spec.alpha,
            "beta": spec.beta,
            "lambda0": spec.lambda0,
            "lambda1": spec.lambda1,
        }
    if config.operator_file is not None:
        out["operator_file"] = config.operator_file
    return out


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def build_environment(config: ExperimentConfig, rep_index: int = 0) -> Environment:
    """The environment repetition ``rep_index`` runs against."""
    kind = config.env_kind
    if kind == "random":
        if config.resample_env_per_repetition:
            env_seed = derive_seed(config.seed, rep_index, _ENV_SALT)
        else:
            env_seed = config.env_seed
        env = env_random(config.dim, config.tau, env_seed)
    elif kind == "single-qubit-spec":
        env = env_single_qubit(config.single_qubit, config.tau)
    elif kind == "spin-x":
        env = env_spin_x(config.tau)
    elif kind == "bell":
        env = env_bell(config.tau)
    else:  # file
        operator, _ = load_operator(config.operator_file)
        env = env_from_matrix(operator, config.tau, origin="file")
    if env.dim != config.dim:
        raise DimMismatch(
            f"config dim {config.dim} but the {kind} environment has dim {env.dim}"
        )
    return env


# ---------------------------------------------------------------------------
# per-repetition execution


@dataclass
class _RepOutcome:
    """Recorded rows of one repetition plus its final snapshot."""

    w_rows: np.ndarray      # (L,) post-iteration search range on the grid
    stage_rows: np.ndarray  # (L,) stage the recorded iteration ran in
    amp_rows: np.ndarray    # (L, d, d) |<l_E|D|j>| on the grid
    max_rows: np.ndarray    # (L, d)  per-column best match on the grid
    final_amp: np.ndarray   # (d, d)
    final_w: float
    residual: float
    total_iterations: int


def _amplitudes(eigenvectors: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """|<l_E|D|j>| matrix; rows follow ascending-eigenvalue order."""
    return np.abs(eigenvectors.conj().T @ basis)


def diag_residual(basis: np.ndarray, operator: np.ndarray) -> float:
    """Relative Frobenius weight of what D fails to diagonalize away."""
    basis = np.asarray(basis, dtype=complex)
    operator = np.asarray(operator, dtype=complex)
    if basis.shape != operator.shape or basis.ndim != 2:
        raise DimMismatch(
            f"basis shape {basis.shape} does not match operator {operator.shape}"
        )
    transformed = basis.conj().T @ operator @ basis
    off = transformed - np.diag(np.diag(transformed))
    denom = float(np.linalg.norm(operator))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(off) / denom)


def verify_diagonalization(agent: AgentState, env: Environment) -> float:
    """Off-diagonal residual of the agent's basis against the live operator."""
    if agent.dim != env.dim:
        raise DimMismatch(f"agent dim {agent.dim} vs environment dim {env.dim}")
    return diag_residual(agent.basis, env.operator)


def _run_single(config: ExperimentConfig, rep_index: int) -> _RepOutcome:
    env = build_environment(config, rep_index)
    eigenvectors = env.eigensystem_oracle().eigenvectors
    agent = AgentState(
        dim=config.dim,
        params=config.params,
        seed=derive_seed(config.seed, rep_index),
    )
    stride = config.record_every

    amp0 = _amplitudes(eigenvectors, agent.basis)
    w_rows = [config.w1]
    stage_rows = [0]
    amp_rows = [amp0]
    max_rows = [amp0.max(axis=0)]
    # stage advancement resets agent.w, so carry the last pre-reset value
    last_w = [config.w1]

    def observer(agent_now: AgentState, rec: protocol.IterationRecord) -> None:
        last_w[0] = rec.w_after
        if rec.k % stride == 0:
            amp = _amplitudes(eigenvectors, agent_now.basis)
            w_rows.append(rec.w_after)
            stage_rows.append(rec.stage)
            amp_rows.append(amp)
            max_rows.append(amp.max(axis=0))

    run_stages(agent, env.interact, config.stopping, observer)

    final_amp = _amplitudes(eigenvectors, agent.basis)
    return _RepOutcome(
        w_rows=np.asarray(w_rows),
        stage_rows=np.asarray(stage_rows, dtype=np.int64),
        amp_rows=np.asarray(amp_rows),
        max_rows=np.asarray(max_rows),
        final_amp=final_amp,
        final_w=last_w[0],
        residual=verify_diagonalization(agent, env),
        total_iterations=agent.k - 1,
    )


# ---------------------------------------------------------------------------
# aggregation


class _Accumulator:
    """Streaming sums over repetitions with carry-forward for short runs.

    A repetition that stopped before the longest one keeps contributing its
    final values to later grid points, so threshold-mode curves stay flat
    after convergence instead of dropping out of the average.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        d, n = config.dim, config.repetitions
        self.config = config
        self.w_sum: list[float] = []
        self.stage_min: list[int] = []
        self.amp_sum: list[np.ndarray] = []
        self.max_sum: list[np.ndarray] = []
        self.done_w = 0.0
        self.done_amp = np.zeros((d, d))
        self.done_max = np.zeros(d)
        self.reps_done = 0
        self.per_rep_final = np.empty((n, d, d))
        self.residual_sum = 0.0
        self.longest_run = 0

    def add(self, index: int, out: _RepOutcome) -> None:
        d = self.config.dim
        rows = len(out.w_rows)
        while len(self.w_sum) < rows:  # grid grows: seed with finished reps
            self.w_sum.append(self.done_w)
            self.amp_sum.append(self.done_amp.copy())
            self.max_sum.append(self.done_max.copy())
            self.stage_min.append(d - 1 if self.reps_done else d)
        for j in range(rows):
            self.w_sum[j] += out.w_rows[j]
            self.amp_sum[j] += out.amp_rows[j]
            self.max_sum[j] += out.max_rows[j]
            self.stage_min[j] = min(self.stage_min[j], int(out.stage_rows[j]))
        for j in range(rows, len(self.w_sum)):  # carry this rep forward
            self.w_sum[j] += out.final_w
            self.amp_sum[j] += out.final_amp
            self.max_sum[j] += out.max_rows[-1]
            self.stage_min[j] = min(self.stage_min[j], d - 1)
        self.done_w += out.final_w
        self.done_amp += out.final_amp
        self.done_max += out.max_rows[-1]
        self.reps_done += 1
        self.per_rep_final[index] = out.final_amp
        self.residual_sum += out.residual
        self.longest_run = max(self.longest_run, out.total_iterations)

    def finalize(self) -> "ExperimentResult":
        config = self.config
        n = config.repetitions
        ks = np.arange(len(self.w_sum)) * config.record_every
        search = np.asarray(self.w_sum) / n
        if config.fidelity_mode == "paper":
            fidelity = np.stack(self.amp_sum).max(axis=1).T / n  # (d, K)
        else:
            fidelity = np.stack(self.max_sum).T / n
        if fidelity.max(initial=0.0) > 1.0 + 1e-9:
            raise AssertionError("fidelity left [0, 1]: unitarity was lost")
        fidelity = np.minimum(fidelity, 1.0)
        metadata = {
            "format": RESULTS_FORMAT,
            "config": config_to_dict(config),
            "code_version": code_version(),
            "longest_run": self.longest_run,
        }
        return ExperimentResult(
            ks=ks,
            stages=np.asarray(self.stage_min, dtype=np.int64),
            fidelity_curves=fidelity,
            search_curve=search,
            per_repetition_final=self.per_rep_final,
            diag_residual=self.residual_sum / n,
            metadata=metadata,
        )


@dataclass
class ExperimentResult:
    """Aggregated curves plus the per-repetition final amplitudes."""

    ks: np.ndarray                   # (K,) recorded iteration counts
    stages: np.ndarray               # (K,) least-finished stage at each k
    fidelity_curves: np.ndarray      # (d, K), row j = F_j(k)
    search_curve: np.ndarray         # (K,) mean w after iteration k
    per_repetition_final: np.ndarray  # (N, d, d), [i, l, j] = |<l_E|D_i|j>|
    diag_residual: float
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.fidelity_curves.shape[0]

    def final_fidelities(self) -> np.ndarray:
        return self.fidelity_curves[:, -1].copy()


_POOL_CONFIG: ExperimentConfig | None = None


def _pool_init(config: ExperimentConfig) -> None:
    global _POOL_CONFIG
    _POOL_CONFIG = config


def _pool_run(rep_index: int) -> _RepOutcome:
    return _run_single(_POOL_CONFIG, rep_index)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run every repetition and reduce them in index order."""
    acc = _Accumulator(config)
    workers = min(max(1, threads), config.repetitions)
    if workers == 1:
        for i in range(config.repetitions):
            acc.add(i, _run_single(config, i))
    else:
        chunk = max(1, config.repetitions // (8 * workers))
        with multiprocessing.get_context().Pool(
            processes=workers, initializer=_pool_init, initargs=(config,)
        ) as pool:
            for i, out in enumerate(
                pool.imap(_pool_run, range(config.repetitions), chunksize=chunk)
            ):
                acc.add(i, out)
    return acc.finalize()


# ---------------------------------------------------------------------------
# fidelity / search-range reductions on raw matrices


def mean_fidelity(d_matrices, eigensystems, j: int, mode: str = "paper") -> float:
    """Mean overlap of basis column ``j`` with its best-matching eigenvector.

    ``eigensystems`` is either one shared eigensystem or one per repetition;
    in "paper" mode the best-matching index is chosen once for the whole
    ensemble, which only makes sense when the eigensystem is shared.
    """
    mats = np.asarray(d_matrices, dtype=complex)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[-1] != mats.shape[-2]:
        raise DimMismatch(f"need square matrices, got shape {mats.shape}")
    count, dim = mats.shape[0], mats.shape[-1]
    if not 0 <= j < dim:
        raise OutOfRange(f"column {j} outside [0, {dim})")
    if mode not in FIDELITY_MODES:
        raise ConfigError(f"mode must be one of {FIDELITY_MODES}, got {mode!r}")

    if isinstance(eigensystems, linalg.Eigensystem):
        systems = [eigensystems] * count
    else:
        systems = list(eigensystems)
        if len(systems) != count:
            raise DimMismatch(
                f"{count} matrices but {len(systems)} eigensystems"
            )
    for system in systems:
        if system.dim != dim:
            raise DimMismatch(f"eigensystem dim {system.dim}, matrices dim {dim}")

    if mode == "paper":
        first = systems[0].eigenvectors
        for system in systems[1:]:
            if system.eigenvectors is not first and not np.array_equal(
                system.eigenvectors, first
            ):
                raise ModeMismatch(
                    "mode 'paper' requires one shared environment; "
                    "use 'per-rep' with resampled environments"
                )
        amps = np.abs(mats[:, :, j] @ first.conj())  # [i, l] = |<l_E|D_i|j>|
        return float(amps.mean(axis=0).max())
    best = [
        float(np.abs(system.eigenvectors.conj().T @ mat[:, j]).max())
        for system, mat in zip(systems, mats)
    ]
    return float(np.mean(best))


def mean_search_range(w_values) -> float:
    """Arithmetic mean of per-repetition search ranges at one k."""
    values = np.asarray(w_values, dtype=float)
    if values.size == 0:
        raise ConfigError("mean_search_range needs at least one value")
    return float(values.mean())


# ---------------------------------------------------------------------------
# result files


def write_results(result: ExperimentResult, path: str, fmt: str = "csv") -> None:
    """Serialize curves; identical results produce byte-identical files."""
    if len(result.ks) == 0:
        raise ConfigError("result has no recorded points")
    if fmt == "csv":
        d = result.dim
        lines = ["# " + json.dumps(result.metadata, sort_keys=True)]
        lines.append("k,stage,W," + ",".join(f"F_{j}" for j in range(d)))
        for idx in range(len(result.ks)):
            cells = [
                str(int(result.ks[idx])),
                str(int(result.stages[idx])),
                repr(float(result.search_curve[idx])),
            ]
            cells += [repr(float(result.fidelity_curves[j, idx])) for j in range(d)]
            lines.append(",".join(cells))
        payload = "\n".join(lines) + "\n"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    elif fmt == "json":
        doc = {
            "metadata": result.metadata,
            "ks": [int(v) for v in result.ks],
            "stages": [int(v) for v in result.stages],
            "search_curve": [float(v) for v in result.search_curve],
            "fidelity_curves": [
                [float(v) for v in row] for row in result.fidelity_curves
            ],
            "per_repetition_final": [
                [[float(v) for v in row] for row in mat]
                for mat in result.per_repetition_final
            ],
            "diag_residual": result.diag_residual,
        }
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")


def read_results(path: str) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parse a CSV result file back into (metadata, ks, stages, W, F)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) < 3 or not lines[0].startswith("# "):
        raise ConfigError(f"{path} is not a results CSV")
    try:
        metadata = json.loads(lines[0][2:])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad metadata line in {path}: {exc}") from exc
    header = lines[1].split(",")
    if header[:3] != ["k", "stage", "W"]:
        raise ConfigError(f"unexpected header in {path}: {lines[1]!r}")
    d = len(header) - 3
    rows = [line.split(",") for line in lines[2:] if line]
    ks = np.array([int(row[0]) for row in rows])
    stages = np.array([int(row[1]) for row in rows])
    search = np.array([float(row[2]) for row in rows])
    fidelity = np.array(
        [[float(row[3 + j]) for row in rows] for j in range(d)]
    )
    return metadata, ks, stages, search, fidelity


# ---------------------------------------------------------------------------
# basis files and traces


def save_basis(path: str, basis: np.ndarray) -> None:
    """Write a learned basis as JSON (real and imaginary parts separately)."""
    basis = np.asarray(basis, dtype=complex)
    linalg.require_square(basis)
    doc = {
        "dim": basis.shape[0],
        "entries_re": basis.real.tolist(),
        "entries_im": basis.imag.tolist(),
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_basis(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read basis {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"basis {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"dim", "entries_re", "entries_im"}:
        raise ConfigError(f"basis {path} needs the keys dim/entries_re/entries_im")
    try:
        matrix = np.asarray(doc["entries_re"], dtype=float) + 1j * np.asarray(
            doc["entries_im"], dtype=float
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"basis {path} entries are not numeric: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape != (doc["dim"], doc["dim"]):
        raise ConfigError(
            f"basis {path} shape {matrix.shape} does not match dim {doc['dim']}"
        )
    return matrix


def record_trace(config: ExperimentConfig, path: str, rep_index: int = 0) -> str:
    """Re-run one repetition and write its full decision trace.

    Returns the SHA-256 of the final basis, the same hash the trace footer
    stores and ``replay_trace`` recomputes.
    """
    if not 0 <= rep_index < config.repetitions:
        raise OutOfRange(
            f"rep_index {rep_index} outside [0, {config.repetitions})"
        )
    env = build_environment(config, rep_index)
    agent = AgentState(
        dim=config.dim,
        params=config.params,
        seed=derive_seed(config.seed, rep_index),
    )
    records: list[protocol.IterationRecord] = []
    run_stages(
        agent, env.interact, config.stopping, lambda a, rec: records.append(rec)
    )
    header = {
        "dim": config.dim,
        "rep_index": rep_index,
        "root_seed": config.seed,
        "agent_seed": derive_seed(config.seed, rep_index),
    }
    protocol.write_trace(path, header, records, agent.basis)
    return protocol.basis_hash(agent.basis)
