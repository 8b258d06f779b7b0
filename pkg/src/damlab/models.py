"""Parameterized Lindblad models, steady states and the group pseudoinverse.

A model maps a parameter vector theta to a GKLS triple (H, jump operators,
rates). For a model with a unique steady state rho and dissipative gap g > 0
the bundle below collects

    P = |vec(rho)><vec(I)|      projector onto the steady direction,
    Q = 1 - P,
    S = Q (L + P)^-1 Q          inverse of L on the image of Q,

which satisfy L S = S L = Q and S P = P S = 0. S is computed from the
bordered resolvent rather than by integrating -exp(t L) Q, which is kept as a
test oracle only.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .operators import (
    devectorize,
    is_hermitian,
    lindblad_superoperator,
    spectrum,
    vectorize,
)

__all__ = [
    "LindbladModel",
    "SteadyStateBundle",
    "gad_model",
    "product_gad_model",
    "steady_state_bundle",
    "gad_pseudoinverse_closed_form",
    "dissipation_coefficient",
]

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
EXCITED_PROJECTOR = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


@dataclass(frozen=True)
class LindbladModel:
    """A family theta -> Lindblad generator with a declared parameter box."""

    name: str
    param_dim: int
    system_dim: int
    generator: Callable
    param_domain: tuple

    def contains(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.size != self.param_dim:
            return False
        return all(lo < v < hi for v, (lo, hi) in zip(theta, self.param_domain))

    def liouvillian(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if not self.contains(theta):
            raise ValueError(
                f"theta {theta.tolist()} outside the domain of model {self.name!r}"
            )
        h, jumps = self.generator(theta)
        return lindblad_superoperator(h, jumps)


def _check_probe_gap(model, probe):
    rep = spectrum(model.liouvillian(probe))
    if len(rep.zero_modes) != 1 or rep.gap <= 0:
        raise ValueError(f"model {model.name!r} has no unique gapped steady state")
    return model


def gad_model():
    """Generalized amplitude damping qubit: decay rate theta, pumping 1-theta.

    Steady state diag(theta, 1-theta), dissipative gap 1/2, for any
    theta in (0, 1).
    """

    def generator(theta):
        th = float(theta[0])
        return None, [(SIGMA_MINUS, th), (SIGMA_PLUS, 1.0 - th)]

    model = LindbladModel(
        name="gad",
        param_dim=1,
        system_dim=2,
        generator=generator,
        param_domain=((0.0, 1.0),),
    )
    return _check_probe_gap(model, np.array([0.5]))


def _embed(op, site, m):
    mats = [np.eye(2, dtype=complex)] * m
    mats[site] = op
    out = mats[0]
    for a in mats[1:]:
        out = np.kron(out, a)
    return out


def product_gad_model(m):
    """M independent GAD qubits with theta = (theta_1, ..., theta_M).

    The steady state is the tensor product of diag(theta_i, 1-theta_i). M is
    capped at 3 to keep the dense superoperators small.
    """
    m = int(m)
    if m < 1:
        raise ValueError("need at least one qubit")
    if m > 3:
        raise ValueError(f"M={m} exceeds the dimension cap (M <= 3)")

    def generator(theta):
        jumps = []
        for site in range(m):
            th = float(theta[site])
            jumps.append((_embed(SIGMA_MINUS, site, m), th))
            jumps.append((_embed(SIGMA_PLUS, site, m), 1.0 - th))
        return None, jumps

    model = LindbladModel(
        name=f"product_gad_{m}",
        param_dim=m,
        system_dim=2**m,
        generator=generator,
        param_domain=tuple((0.0, 1.0) for _ in range(m)),
    )
    return _check_probe_gap(model, np.full(m, 0.5))


@dataclass(frozen=True)
class SteadyStateBundle:
    """Steady state rho_ss, gap, and the superoperators P, Q, S of a model."""

    rho_ss: np.ndarray
    gap: float
    P: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    liouvillian: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.rho_ss.shape[0]

    def expectation(self, a):
        """Steady-state expectation value tr(A rho_ss) (real part)."""
        return float(np.trace(np.asarray(a) @ self.rho_ss).real)

    def s_apply(self, x):
        """Apply the pseudoinverse S to an operator."""
        return devectorize(self.S @ vectorize(x), self.dim)


def steady_state_bundle(model, theta, tol=1e-9):
    """Steady state, gap and pseudoinverse for ``model`` at ``theta``.

    Raises on a degenerate steady space (two eigenvalues inside the zero
    tolerance) or a vanishing gap. The steady state is extracted from the
    zero-mode eigenvector, Hermitized, trace-normalized, and cleaned of
    eigenvalue dust in [-tol, 0).
    """
    lmat = model.liouvillian(theta)
    rep = spectrum(lmat, tol)
    if len(rep.zero_modes) != 1:
        raise ValueError(
            f"degenerate steady space: {len(rep.zero_modes)} zero modes for "
            f"model {model.name!r} at theta={np.atleast_1d(theta).tolist()}"
        )
    radius = np.abs(rep.eigenvalues).max()
    if rep.gap <= tol * radius:
        raise ValueError(f"no dissipative gap for model {model.name!r}")

    evals, evecs = np.linalg.eig(lmat)
    rho = devectorize(evecs[:, int(np.argmin(np.abs(evals)))], model.system_dim)
    rho = (rho + rho.conj().T) / 2.0
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise ValueError("zero-mode eigenvector has vanishing trace")
    rho = rho / tr
    w, v = np.linalg.eigh(rho)
    if w.min() < -tol:
        raise ValueError(f"steady state not positive (min eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    rho = rho / np.trace(rho).real

    d2 = model.system_dim**2
    p = np.outer(vectorize(rho), vectorize(np.eye(model.system_dim)).conj())
    q = np.eye(d2) - p
    s = q @ np.linalg.solve(lmat + p, q)
    return SteadyStateBundle(rho_ss=rho, gap=rep.gap, P=p, Q=q, S=s, liouvillian=lmat)


def gad_pseudoinverse_closed_form(x, theta):
    """Closed-form pseudoinverse action for the GAD qubit.

    S(X) = P(X) - X - |0><0| X |1><1| - |1><1| X |0><0|, with
    P(X) = tr(X) diag(theta, 1-theta). Serves as the independent oracle for
    the numeric bundle.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (2, 2):
        raise ValueError(f"closed form is for qubits, got shape {x.shape}")
    theta = float(theta)
    rho = np.diag([theta, 1.0 - theta]).astype(complex)
    out = np.trace(x) * rho - x
    out[0, 1] -= x[0, 1]
    out[1, 0] -= x[1, 0]
    return out


def dissipation_coefficient(bundle, a):
    """tr(A S(A rho_ss)), the backaction moment in the variance formulas.

    Its real part widens the pointer distribution at finite coupling time and
    its imaginary part skews the phase of the kernel.
    """
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise ValueError("observable must be Hermitian")
    return complex(np.trace(a @ bundle.s_apply(a @ bundle.rho_ss)))
