"""The black-box side of the eigensolver.

An :class:`Environment` wraps a hidden Hermitian operator together with the
unitary propagator ``exp(-i tau O)`` it applies to incoming states.  The
learning layer is only ever handed :meth:`Environment.interact`; the exact
spectrum stays behind :meth:`Environment.eigensystem_oracle`, which exists
for scoring and verification and is never imported by the protocol module
(a structural test keeps it that way).

Random operators are drawn from the Gaussian unitary ensemble,
``(G + G^dag)/2`` with standard complex Gaussian ``G``, then rescaled so the
spectral range ``lambda_max - lambda_min`` equals 2.  With the default
``tau = 1`` the relevant phases ``lambda * tau`` then stay well inside one
period regardless of dimension.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import BadDim, ConfigError, DimMismatch

#: dimensions outside this range are rejected by the constructors
MIN_DIM = 2
MAX_DIM = 64


@dataclass(frozen=True)
class SingleQubitSpec:
    """Eigenbasis angles and eigenvalues of a single-qubit operator.

    The eigenvectors are
    ``|v0> = cos(alpha/2)|0> + e^{i beta} sin(alpha/2)|1>`` and
    ``|v1> = sin(alpha/2)|0> - e^{i beta} cos(alpha/2)|1>``, carrying
    eigenvalues ``lambda0`` and ``lambda1`` respectively.
    """

    alpha: float
    beta: float
    lambda0: float
    lambda1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 2.0 * math.pi:
            raise ConfigError(f"alpha must lie in [0, 2pi], got {self.alpha}")
        if not 0.0 <= self.beta <= math.pi:
            raise ConfigError(f"beta must lie in [0, pi], got {self.beta}")

    def basis_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        c = math.cos(0.5 * self.alpha)
        s = math.sin(0.5 * self.alpha)
        phase = complex(math.cos(self.beta), math.sin(self.beta))
        v0 = np.array([c, phase * s])
        v1 = np.array([s, -phase * c])
        return v0, v1


@dataclass(frozen=True)
class Environment:
    """Hidden Hermitian operator plus its cached propagator."""

    dim: int
    operator: np.ndarray
    tau: float
    unitary: np.ndarray
    origin: str

    def interact(self, psi: np.ndarray) -> np.ndarray:
        """Send a state through the black box: one application of exp(-i tau O)."""
        if psi.shape != (self.dim,):
            raise DimMismatch(f"state shape {psi.shape}, expected ({self.dim},)")
        return self.unitary @ psi

    def eigensystem_oracle(self) -> linalg.Eigensystem:
        """Exact spectrum of the hidden operator (verification side only)."""
        return linalg.eig_hermitian(self.operator)


def env_from_matrix(
    operator: np.ndarray, tau: float, origin: str = "explicit"
) -> Environment:
    operator = np.asarray(operator, dtype=np.complex128)
    dim = linalg.require_square(operator)
    if not MIN_DIM <= dim <= MAX_DIM:
        raise BadDim(f"dim must lie in [{MIN_DIM}, {MAX_DIM}], got {dim}")
    linalg.require_hermitian(operator)
    unitary = linalg.unitary_from_hermitian(operator, tau)
    return Environment(
        dim=dim, operator=operator.copy(), tau=tau, unitary=unitary, origin=origin
    )


def env_random(dim: int, tau: float, seed: int) -> Environment:
    """GUE-distributed hidden operator, rescaled to spectral range 2."""
    if not MIN_DIM <= dim <= MAX_DIM:
        raise BadDim(f"dim must lie in [{MIN_DIM}, {MAX_DIM}], got {dim}")
    rng = np.random.default_rng(seed)
    while True:
        g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        g /= math.sqrt(2.0)
        h = 0.5 * (g + g.conj().T)
        values = linalg.eig_hermitian(h).eigenvalues
        spread = float(values[-1] - values[0])
        if spread > 1e-9:  # degenerate draws are measure zero; redraw defensively
            break
    return env_from_matrix(h * (2.0 / spread), tau, origin="random")


def env_single_qubit(spec: SingleQubitSpec, tau: float) -> Environment:
    """Operator with the eigenbasis and eigenvalues of ``spec``."""
    v0, v1 = spec.basis_vectors()
    operator = spec.lambda0 * np.outer(v0, v0.conj()) + spec.lambda1 * np.outer(
        v1, v1.conj()
    )
    return env_from_matrix(operator, tau, origin="single-qubit-spec")


def env_spin_x(tau: float) -> Environment:
    """The x spin-half operator {{0, 1/2}, {1/2, 0}}."""
    operator = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=np.complex128)
    return env_from_matrix(operator, tau, origin="spin-x")


def bell_states() -> np.ndarray:
    """Columns: (|00>+|11>)/sqrt2, (|00>-|11>)/sqrt2, (|01>+|10>)/sqrt2,
    (|01>-|10>)/sqrt2."""
    s = 1.0 / math.sqrt(2.0)
    out = np.zeros((4, 4), dtype=np.complex128)
    out[[0, 3], 0] = s, s
    out[[0, 3], 1] = s, -s
    out[[1, 2], 2] = s, s
    out[[1, 2], 3] = s, -s
    return out


def env_bell(tau: float) -> Environment:
    """Two-qubit operator whose eigenvectors are the four Bell states.

    The symmetric/antisymmetric pairs carry eigenvalues +-1 on the
    {|00>, |11>} block and +-2 on the {|01>, |10>} block.
    """
    b = bell_states()
    weights = (1.0, -1.0, 2.0, -2.0)
    operator = sum(
        w * np.outer(b[:, i], b[:, i].conj()) for i, w in enumerate(weights)
    )
    return env_from_matrix(operator, tau, origin="bell")


def operator_to_json(operator: np.ndarray, tau: float) -> str:
    """Serialize an operator to the interchange schema (row-major entries)."""
    operator = np.asarray(operator, dtype=np.complex128)
    dim = linalg.require_square(operator)
    payload = {
        "dim": dim,
        "tau": tau,
        "entries_re": operator.real.tolist(),
        "entries_im": operator.imag.tolist(),
    }
    return json.dumps(payload, indent=2)


def operator_from_json(text: str) -> tuple[np.ndarray, float]:
    """Parse the interchange schema; raises ConfigError on any defect."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("operator file must hold a JSON object")
    required = {"dim", "tau", "entries_re", "entries_im"}
    if set(payload) != required:
        raise ConfigError(f"operator keys must be exactly {sorted(required)}")
    dim = payload["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"bad dim: {dim!r}")
    try:
        re = np.asarray(payload["entries_re"], dtype=np.float64)
        im = np.asarray(payload["entries_im"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"entries are not numeric arrays: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ConfigError(
            f"entries must be {dim}x{dim}, got {re.shape} and {im.shape}"
        )
    return re + 1j * im, float(payload["tau"])


def save_operator(path: str, operator: np.ndarray, tau: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(operator_to_json(operator, tau))
        fh.write("\n")


def load_operator(path: str) -> tuple[np.ndarray, float]:
    try:
        with open(path, encoding="utf-8") as fh:
            return operator_from_json(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read operator {path}: {exc}") from exc


def env_from_file(path: str) -> Environment:
    operator, tau = load_operator(path)
    return env_from_matrix(operator, tau, origin="explicit")
