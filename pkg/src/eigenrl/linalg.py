"""Dense complex linear algebra for small Hilbert spaces.

Conventions used throughout the package:

* states are complex128 numpy vectors, operators complex128 square matrices;
* basis index j read as a bit string is big-endian (qubit 0 leftmost);
* eigensystems are returned with eigenvalues ascending and eigenvectors as
  matrix columns, each column phase-fixed so that its first component above
  the phase tolerance is real and positive.  Ties between equal eigenvalues
  are broken by lexicographic comparison of the phase-fixed components, so
  identical input bits always produce identical output bits;
* two states are considered equal when the modulus of their inner product
  is 1, i.e. all comparisons ignore global phase.

Diagonalization uses cyclic Jacobi rotations.  The method is simple and
accurate at the dimensions this package targets (<= 64); it converges
quadratically and in practice needs well under the 100-sweep budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadIndices, DimMismatch, NoConvergence, NotHermitian, OutOfRange

#: tolerance for accepting a matrix as Hermitian
HERMITICITY_TOL = 1e-10
#: hard cap on cyclic Jacobi sweeps before giving up
JACOBI_SWEEP_BUDGET = 100
#: components smaller than this are ignored when fixing a global phase
PHASE_TOL = 1e-12


@dataclass(frozen=True)
class Eigensystem:
    """Spectral decomposition of a Hermitian matrix.

    ``eigenvalues`` is a real vector in ascending order and column ``l`` of
    ``eigenvectors`` is the unit eigenvector belonging to ``eigenvalues[l]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    def reconstruct(self) -> np.ndarray:
        """Return ``sum_l lambda_l |l><l|``."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class RotationAngles:
    """Angles of a two-level rotation, in radians.

    The rotation factors as ``exp(-i phi_y Sy) exp(-i phi_z Sz)
    exp(-i phi_x Sx)`` with the x factor applied first.
    """

    phi_x: float
    phi_y: float
    phi_z: float


def require_square(mat: np.ndarray) -> int:
    """Return the side length of a square 2-d array or raise DimMismatch."""
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {mat.shape}")
    return int(mat.shape[0])


def hermiticity_defect(mat: np.ndarray) -> float:
    """Largest absolute deviation of ``mat`` from its conjugate transpose."""
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


def require_hermitian(mat: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    defect = hermiticity_defect(mat)
    if defect > tol:
        raise NotHermitian(f"max |H - H^dag| = {defect:.3e} exceeds {tol:.1e}")


def state_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """Global-phase-insensitive overlap ``|<a|b>|`` of two state vectors."""
    if a.shape != b.shape:
        raise DimMismatch(f"state shapes differ: {a.shape} vs {b.shape}")
    return float(abs(np.vdot(a, b)))


def normalize_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate a global phase so the first significant component is real > 0."""
    for c in vec:
        if abs(c) > PHASE_TOL:
            return vec * (c.conjugate() / abs(c))
    return vec


def _vector_sort_key(vec: np.ndarray) -> tuple:
    return tuple((float(c.real), float(c.imag)) for c in vec)


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """One Jacobi step zeroing a[p, q]: A <- J^dag A J, V <- V J (in place)."""
    apq = a[p, q]
    mag = abs(apq)
    phase = apq / mag
    theta = 0.5 * math.atan2(2.0 * mag, a[p, p].real - a[q, q].real)
    c = math.cos(theta)
    s = math.sin(theta)
    sp = s * phase
    spc = s * phase.conjugate()

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p + spc * col_q
    a[:, q] = -sp * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p + sp * row_q
    a[q, :] = -spc * row_p + c * row_q

    col_p = v[:, p].copy()
    col_q = v[:, q].copy()
    v[:, p] = c * col_p + spc * col_q
    v[:, q] = -sp * col_p + c * col_q


def eig_hermitian(h: np.ndarray) -> Eigensystem:
    """Diagonalize a Hermitian matrix with cyclic Jacobi rotations.

    Parameters
    ----------
    h : complex Hermitian matrix.

    Returns
    -------
    Eigensystem with ascending eigenvalues and phase-fixed column
    eigenvectors (see module docstring for the tie-break rule).

    Raises
    ------
    NotHermitian if ``h`` is not Hermitian within HERMITICITY_TOL,
    NoConvergence if the sweep budget is exhausted.
    """
    h = np.asarray(h, dtype=np.complex128)
    n = require_square(h)
    require_hermitian(h)

    a = h.copy()
    v = np.eye(n, dtype=np.complex128)
    # absolute threshold below which an off-diagonal entry counts as zero
    stop = 1e-13 * max(1.0, float(np.max(np.abs(a)))) if n else 0.0

    for _ in range(JACOBI_SWEEP_BUDGET):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) > stop:
                    _jacobi_rotate(a, v, p, q)
                    rotated = True
        if not rotated:
            break
    else:
        off = float(np.max(np.abs(a - np.diag(a.diagonal()))))
        if off > stop:
            raise NoConvergence(
                f"off-diagonal {off:.3e} after {JACOBI_SWEEP_BUDGET} sweeps"
            )

    values = a.diagonal().real.copy()
    columns = [normalize_phase(v[:, l].copy()) for l in range(n)]
    order = sorted(
        range(n), key=lambda l: (float(values[l]), _vector_sort_key(columns[l]))
    )
    eigenvalues = np.array([values[l] for l in order])
    eigenvectors = np.column_stack([columns[l] for l in order]) if n else v
    return Eigensystem(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def unitary_from_hermitian(h: np.ndarray, tau: float) -> np.ndarray:
    """Return ``exp(-i tau H)`` through the spectral decomposition of H."""
    es = eig_hermitian(h)
    phases = np.exp(-1j * tau * es.eigenvalues)
    return (es.eigenvectors * phases) @ es.eigenvectors.conj().T


def rotation_block(angles: RotationAngles) -> np.ndarray:
    """2x2 unitary of a two-level rotation on its ordered subspace basis.

    Closed form of ``exp(-i phi_y Sy) exp(-i phi_z Sz) exp(-i phi_x Sx)``
    where, on the subspace basis {|a>, |b>},
    ``Sx = (|a><b| + |b><a|)/2``, ``Sy = -i(|a><b| - |b><a|)/2`` and
    ``Sz = (|a><a| - |b><b|)/2``.
    """
    cx = math.cos(0.5 * angles.phi_x)
    sx = math.sin(0.5 * angles.phi_x)
    cy = math.cos(0.5 * angles.phi_y)
    sy = math.sin(0.5 * angles.phi_y)
    ez = complex(math.cos(0.5 * angles.phi_z), -math.sin(0.5 * angles.phi_z))
    ezc = ez.conjugate()
    return np.array(
        [
            [cy * cx * ez + 1j * sy * sx * ezc, -1j * cy * sx * ez - sy * cx * ezc],
            [sy * cx * ez - 1j * cy * sx * ezc, -1j * sy * sx * ez + cy * cx * ezc],
        ]
    )


def two_level_rotation(a: int, b: int, dim: int, angles: RotationAngles) -> np.ndarray:
    """Embed a two-level rotation on basis states ``a < b`` into ``dim``."""
    if not (0 <= a < b < dim):
        raise BadIndices(f"need 0 <= a < b < dim, got a={a}, b={b}, dim={dim}")
    block = rotation_block(angles)
    u = np.eye(dim, dtype=np.complex128)
    u[a, a] = block[0, 0]
    u[a, b] = block[0, 1]
    u[b, a] = block[1, 0]
    u[b, b] = block[1, 1]
    return u


def apply_unitary(u: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply a unitary to a state vector; shapes must agree."""
    n = require_square(u)
    if psi.shape != (n,):
        raise DimMismatch(f"state shape {psi.shape} does not match dim {n}")
    return u @ psi


def gram_schmidt(mat: np.ndarray) -> None:
    """Re-orthonormalize the columns of ``mat`` in place (modified variant).

    Intended for drift control on matrices that are already unitary to within
    round-off, where it perturbs each column by O(machine epsilon) only.
    """
    n = require_square(mat)
    for j in range(n):
        col = mat[:, j]
        for i in range(j):
            col -= np.vdot(mat[:, i], col) * mat[:, i]
        col /= math.sqrt(np.vdot(col, col).real)


def binary_index_label(j: int, n_qubits: int) -> str:
    """Big-endian bit-string label of basis index ``j`` on ``n_qubits``."""
    if n_qubits < 1:
        raise OutOfRange(f"need at least one qubit, got {n_qubits}")
    if not 0 <= j < 2**n_qubits:
        raise OutOfRange(f"index {j} outside [0, {2**n_qubits})")
    return format(j, f"0{n_qubits}b")
