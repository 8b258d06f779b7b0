"""Dense complex linear algebra for operators and superoperators.

Operators are plain complex numpy arrays of shape (d, d). Superoperators are
(d*d, d*d) complex arrays acting on column-stacked operators:

    vec(X)[i + d*j] = X[i, j]                 (column stacking)
    vec(A @ X)     = kron(I, A)   @ vec(X)
    vec(X @ B)     = kron(B.T, I) @ vec(X)
    vec(A @ X @ B) = kron(B.T, A) @ vec(X)

Every superoperator built in this package follows this single convention, so
composition of maps is ordinary matrix multiplication. Target dimensions are
small (d <= 8, so d^2 <= 64) and everything is dense.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SpectrumReport",
    "vectorize",
    "devectorize",
    "left_mult",
    "right_mult",
    "is_hermitian",
    "is_density_matrix",
    "lindblad_superoperator",
    "mat_exp",
    "spectrum",
]


def _as_square(x, name="operator"):
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def vectorize(x):
    """Column-stack a d x d operator into a length d^2 vector."""
    return _as_square(x).reshape(-1, order="F")


def devectorize(v, dim=None):
    """Inverse of :func:`vectorize`. ``dim`` is inferred when omitted."""
    v = np.asarray(v, dtype=complex).ravel()
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a stacked {dim}x{dim} operator")
    return v.reshape((dim, dim), order="F")


def left_mult(a):
    """Superoperator for X -> A @ X."""
    a = _as_square(a)
    return np.kron(np.eye(a.shape[0]), a)


def right_mult(b):
    """Superoperator for X -> X @ B."""
    b = _as_square(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def is_hermitian(x, tol=1e-10):
    x = _as_square(x)
    return bool(np.max(np.abs(x - x.conj().T), initial=0.0) <= tol)


def is_density_matrix(x, tol=1e-10):
    """Hermitian, unit trace and eigenvalues >= -tol."""
    x = _as_square(x)
    if not is_hermitian(x, tol):
        return False
    if abs(np.trace(x) - 1.0) > tol:
        return False
    evals = np.linalg.eigvalsh((x + x.conj().T) / 2.0)
    return bool(evals.min() >= -tol)


def lindblad_superoperator(h, jumps=(), tol=1e-10):
    """Assemble the GKLS generator as a d^2 x d^2 matrix.

    Args:
        h: Hermitian Hamiltonian (may be None for purely dissipative maps).
        jumps: iterable of (jump operator, nonnegative rate) pairs.
        tol: Hermiticity tolerance for ``h``.

    The map is X -> -i[H, X] + sum_k g_k (L_k X L_k^+ - {L_k^+ L_k, X}/2).
    """
    jumps = [(_as_square(op, "jump operator"), float(rate)) for op, rate in jumps]
    if h is None:
        if not jumps:
            raise ValueError("need a Hamiltonian or at least one jump operator")
        h = np.zeros_like(jumps[0][0])
    h = _as_square(h, "Hamiltonian")
    if not is_hermitian(h, tol):
        raise ValueError("Hamiltonian is not Hermitian within tolerance")
    d = h.shape[0]
    gen = -1j * (left_mult(h) - right_mult(h))
    for op, rate in jumps:
        if op.shape[0] != d:
            raise ValueError("jump operator dimension mismatch")
        if rate < 0:
            raise ValueError(f"negative jump rate {rate}")
        ldl = op.conj().T @ op
        gen = gen + rate * (
            np.kron(op.conj(), op) - 0.5 * left_mult(ldl) - 0.5 * right_mult(ldl)
        )
    return gen


def mat_exp(m, t, method="pade", cond_threshold=1e8):
    """exp(M t) for a superoperator matrix M and time t >= 0.

    ``method`` is one of:
        "pade": scaling-and-squaring with Pade approximants (default, robust
                for non-normal and defective generators);
        "eig":  eigendecomposition, rejected when the eigenvector matrix has
                condition number above ``cond_threshold``;
        "auto": eigendecomposition when well conditioned, Pade otherwise.

    Overflow is reported (OverflowError), never silently clamped.
    """
    m = _as_square(m, "superoperator")
    t = float(t)
    if t < 0:
        raise ValueError(f"negative evolution time {t}")
    if method not in ("pade", "eig", "auto"):
        raise ValueError(f"unknown method {method!r}")
    out = None
    with np.errstate(over="ignore", invalid="ignore"):
        if method in ("eig", "auto"):
            evals, vecs = np.linalg.eig(m)
            cond = np.linalg.cond(vecs)
            if cond < cond_threshold:
                out = (vecs * np.exp(evals * t)) @ np.linalg.inv(vecs)
            elif method == "eig":
                raise ValueError(
                    f"eigenbasis condition number {cond:.3g} exceeds {cond_threshold:.3g}"
                )
        if out is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                out = scipy.linalg.expm(m * t)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"matrix exponential overflowed (t={t}, norm={np.abs(m).max():.3g})")
    return out


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of a superoperator, split into zero modes and the rest.

    ``eigenvalues`` are sorted by descending real part. ``zero_modes`` are the
    indices with |lambda| <= tol * spectral_radius, and ``gap`` is
    -max{Re lambda} over the remaining eigenvalues.
    """

    eigenvalues: np.ndarray
    zero_modes: tuple
    gap: float

    def is_dissipative(self):
        """True when exactly the zero modes are at zero and the rest decay."""
        others = np.delete(self.eigenvalues, list(self.zero_modes))
        return self.gap > 0 and bool(np.all(others.real < 0))


def spectrum(m, tol=1e-9):
    """Spectral report for a superoperator matrix.

    ``tol`` is relative to the spectral radius. Raises when there is no
    nonzero eigenvalue at all (no gap to report).
    """
    m = _as_square(m, "superoperator")
    try:
        evals = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-evals.real, kind="stable")
    evals = evals[order]
    radius = np.abs(evals).max(initial=0.0)
    cutoff = tol * radius
    zero = tuple(int(i) for i in np.flatnonzero(np.abs(evals) <= cutoff))
    if len(zero) == evals.size:
        raise ValueError("no dissipative gap: spectrum has no nonzero eigenvalue")
    nonzero = np.delete(evals, list(zero))
    gap = float(-nonzero.real.max())
    return SpectrumReport(eigenvalues=evals, zero_modes=zero, gap=gap)
