"""Estimators, error formulas, the projective baseline and QFI checks.

The estimator reads the pointer as theta_hat = f^{-1}(q / N), where f maps
parameters to steady-state expectation values of the coupled observables.
Predicted errors come from the pointer variance at finite coupling time; the
multi-parameter error measure is the root of the summed componentwise mean
squared deviations.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.stats import chi2

from .models import (
    dissipation_coefficient,
    gad_model,
    product_gad_model,
    steady_state_bundle,
)
from .operators import devectorize, is_density_matrix, is_hermitian, mat_exp, vectorize
from .pointer import DamRun, pointer_distribution, sample_pointer

__all__ = [
    "LinkFunction",
    "Estimate",
    "EstimationReport",
    "identity_link",
    "table_link",
    "steady_expectation_link",
    "dam_estimate",
    "dam_error_formula",
    "multiparam_error_formula",
    "mc_dam_error",
    "conventional_povm_error",
    "qfi_state",
    "cramer_rao_bound",
    "gad_channel_decomposition_check",
    "qfi_output_bound_check",
    "BoundCheckReport",
]

PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


@dataclass(frozen=True)
class LinkFunction:
    """Invertible map between parameters and observable expectations.

    forward: theta (m,) -> expectations (m,). inverse goes the other way;
    jacobian_inverse(avec) is the (m, m) Jacobian of the inverse map.
    domain/image are per-axis (lo, hi) boxes; inverse_batch, when present,
    applies the inverse to an (n, m) block of rows at once.
    """

    m: int
    forward: Callable
    inverse: Callable
    jacobian_inverse: Callable
    domain: tuple
    image: tuple
    inverse_batch: Optional[Callable] = None


def identity_link(domain=((0.0, 1.0),)):
    """Link for models whose expectations equal the parameters themselves."""
    domain = tuple((float(lo), float(hi)) for lo, hi in domain)
    m = len(domain)
    eye = np.eye(m)

    def as_vec(x):
        return np.atleast_1d(np.asarray(x, dtype=float)).copy()

    return LinkFunction(
        m=m,
        forward=as_vec,
        inverse=as_vec,
        jacobian_inverse=lambda a: eye.copy(),
        domain=domain,
        image=domain,
        inverse_batch=lambda rows: np.asarray(rows, dtype=float).copy(),
    )


def _fd_jacobian(fun, theta, widths, rel_step=1e-5):
    """Central-difference Jacobian with one Richardson refinement."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = theta.size
    steps = np.asarray(widths, dtype=float) * rel_step

    def diff(h):
        cols = []
        for i in range(m):
            e = np.zeros(m)
            e[i] = h[i]
            hi = np.atleast_1d(np.asarray(fun(theta + e), dtype=float))
            lo = np.atleast_1d(np.asarray(fun(theta - e), dtype=float))
            cols.append((hi - lo) / (2.0 * h[i]))
        return np.stack(cols, axis=1)

    d1 = diff(steps)
    d2 = diff(steps / 2.0)
    return (4.0 * d2 - d1) / 3.0


def table_link(thetas, avals):
    """Single-parameter link from a monotone (theta, expectation) table."""
    thetas = np.asarray(thetas, dtype=float)
    avals = np.asarray(avals, dtype=float)
    if thetas.ndim != 1 or thetas.size < 2 or thetas.shape != avals.shape:
        raise ValueError("need matching 1-D tables with at least two rows")
    if np.any(np.diff(thetas) <= 0):
        raise ValueError("theta table must be strictly increasing")
    d = np.diff(avals)
    if np.all(d > 0):
        a_sorted, t_sorted = avals, thetas
    elif np.all(d < 0):
        a_sorted, t_sorted = avals[::-1], thetas[::-1]
    else:
        raise ValueError("expectation table must be strictly monotone")
    domain = ((float(thetas[0]), float(thetas[-1])),)
    image = ((float(a_sorted[0]), float(a_sorted[-1])),)
    width = thetas[-1] - thetas[0]

    def forward(th):
        return np.atleast_1d(np.interp(np.asarray(th, dtype=float), thetas, avals))

    def inverse(a):
        return np.atleast_1d(np.interp(np.asarray(a, dtype=float), a_sorted, t_sorted))

    def jacobian_inverse(a):
        jac = _fd_jacobian(forward, inverse(a), [width])
        return np.linalg.inv(jac)

    return LinkFunction(
        m=1,
        forward=forward,
        inverse=inverse,
        jacobian_inverse=jacobian_inverse,
        domain=domain,
        image=image,
        inverse_batch=lambda rows: np.interp(
            np.asarray(rows, dtype=float).ravel(), a_sorted, t_sorted
        ).reshape(-1, 1),
    )


def steady_expectation_link(model, a, table_points=401, margin_rel=1e-6):
    """Numeric link theta -> tr(A rho_theta) for a single-parameter model.

    Forward values come from the steady-state bundle; the inverse seeds from
    a dense monotone table and polishes with Newton steps on the exact
    forward map.
    """
    if model.param_dim != 1:
        raise ValueError("numeric links are single-parameter only")
    a = np.asarray(a, dtype=complex)
    lo, hi = model.param_domain[0]
    width = hi - lo
    margin = margin_rel * width
    grid = np.linspace(lo + margin, hi - margin, int(table_points))

    def forward_scalar(th):
        return steady_state_bundle(model, [th]).expectation(a)

    table = np.array([forward_scalar(th) for th in grid])
    d = np.diff(table)
    if np.all(d > 0):
        a_sorted, t_sorted = table, grid
    elif np.all(d < 0):
        a_sorted, t_sorted = table[::-1], grid[::-1]
    else:
        raise ValueError("steady expectation is not monotone on the domain")

    def forward(th):
        th = np.atleast_1d(np.asarray(th, dtype=float))
        return np.array([forward_scalar(v) for v in th])

    def _invert(avec):
        avec = np.asarray(avec, dtype=float).ravel()
        th = np.interp(avec, a_sorted, t_sorted)
        h = 1e-7 * width
        for _ in range(3):
            f = np.array([forward_scalar(v) for v in th])
            fp = np.array(
                [
                    (forward_scalar(v + h) - forward_scalar(v - h)) / (2.0 * h)
                    for v in th
                ]
            )
            th = th - (f - avec) / fp
            th = np.clip(th, lo + margin, hi - margin)
        return th

    def inverse(avec):
        return _invert(avec)

    def jacobian_inverse(avec):
        jac = _fd_jacobian(forward, inverse(avec), [width])
        return np.linalg.inv(jac)

    return LinkFunction(
        m=1,
        forward=forward,
        inverse=inverse,
        jacobian_inverse=jacobian_inverse,
        domain=((lo + margin, hi - margin),),
        image=((float(a_sorted[0]), float(a_sorted[-1])),),
        inverse_batch=lambda rows: _invert(rows).reshape(-1, 1),
    )


class Estimate(NamedTuple):
    theta: object
    clamped: bool


def dam_estimate(q, n, link):
    """theta_hat = inverse(q / N); out-of-image readings clamp and flag.

    ``q`` may be a scalar (m=1) or a length-m vector of pointer readings.
    Returns an Estimate(theta, clamped) pair.
    """
    q_in = np.asarray(q, dtype=float)
    scalar = q_in.ndim == 0
    a = np.atleast_1d(q_in) / float(n)
    if a.size != link.m:
        raise ValueError(f"expected {link.m} readings, got {a.size}")
    lo = np.array([b[0] for b in link.image])
    hi = np.array([b[1] for b in link.image])
    clamped = bool(np.any(a < lo) or np.any(a > hi))
    theta = np.atleast_1d(np.asarray(link.inverse(np.clip(a, lo, hi)), dtype=float))
    return Estimate(theta=float(theta[0]) if scalar else theta, clamped=clamped)


def _estimate_batch(qs, n, link):
    """Vectorized dam_estimate over an (n_trials, m) block of readings."""
    a = np.asarray(qs, dtype=float) / float(n)
    lo = np.array([b[0] for b in link.image])
    hi = np.array([b[1] for b in link.image])
    clamp_mask = np.any((a < lo) | (a > hi), axis=1)
    a = np.clip(a, lo, hi)
    if link.inverse_batch is not None:
        thetas = np.asarray(link.inverse_batch(a), dtype=float).reshape(a.shape)
    else:
        thetas = np.stack(
            [np.atleast_1d(np.asarray(link.inverse(row), dtype=float)) for row in a]
        )
    return thetas, clamp_mask


def multiparam_error_formula(bundles, observables, link, sigma, n, t):
    """Predicted error for M jointly estimated parameters.

    (1/N) sqrt( sum_ij J_ij^2 [sigma^2 - (2N/T) Re c_j + (N Im c_j/(T sigma))^2] )
    with J the Jacobian of the inverse link at the operating point and
    c_j = tr(A_j S(A_j rho)). Reduces to the single-parameter formula at M=1.
    """
    observables = list(observables)
    m = len(observables)
    if link.m != m:
        raise ValueError(f"link expects {link.m} observables, got {m}")
    if isinstance(bundles, (list, tuple)):
        bundles = list(bundles)
        if len(bundles) == 1:
            bundles = bundles * m
    else:
        bundles = [bundles] * m
    if len(bundles) != m:
        raise ValueError("need one bundle per observable (or a single shared one)")
    avec = np.array([b.expectation(a) for b, a in zip(bundles, observables)])
    jinv = np.asarray(link.jacobian_inverse(avec), dtype=float)
    if jinv.shape != (m, m) or not np.all(np.isfinite(jinv)):
        raise ValueError("singular link Jacobian")
    sigma = float(sigma)
    n = float(n)
    t = float(t)
    total = 0.0
    for j in range(m):
        coeff = dissipation_coefficient(bundles[j], observables[j])
        bracket = (
            sigma * sigma
            - (2.0 * n / t) * coeff.real
            + (n * coeff.imag / (t * sigma)) ** 2
        )
        total += float(np.sum(jinv[:, j] ** 2)) * bracket
    return float(np.sqrt(total) / n)


def dam_error_formula(bundle, a, link, sigma, n, t):
    """Predicted single-parameter error, sqrt(Var q) / (N |df/dtheta|)."""
    if link.m != 1:
        raise ValueError("single-parameter formula needs a one-parameter link")
    avec = np.array([bundle.expectation(a)])
    jinv = np.asarray(link.jacobian_inverse(avec), dtype=float)
    if not np.all(np.isfinite(jinv)) or np.abs(jinv).max() > 1e12:
        raise ValueError("non-identifiable at theta: link derivative vanishes")
    return multiparam_error_formula([bundle], [a], link, sigma, n, t)


@dataclass(frozen=True)
class EstimationReport:
    """Monte Carlo estimation summary with its formula prediction."""

    theta_hat: np.ndarray
    predicted_error: float
    empirical_error: float
    ci: tuple
    n: float
    t: Optional[float]
    trials: int
    seed: object
    notes: dict


def _chi2_ci(err, dof, alpha=0.05):
    lo = err * np.sqrt(dof / chi2.ppf(1.0 - alpha / 2.0, dof))
    hi = err * np.sqrt(dof / chi2.ppf(alpha / 2.0, dof))
    return (float(lo), float(hi))


def _entropy(seed):
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def mc_dam_error(runs, link, trials, seed):
    """Monte Carlo error of the pointer estimator against the formula.

    ``runs`` is one DamRun or, for factorizing multi-parameter setups (one
    pointer per commuting local observable), a list of single-parameter runs
    sharing N, T and apparatus. Readings are sampled from the exact pointer
    distributions with per-observable seed substreams; runs with more than 1%
    clamped readings are rejected instead of silently biasing the estimate.
    """
    if isinstance(runs, DamRun):
        runs = [runs]
    runs = list(runs)
    trials = int(trials)
    if trials < 100:
        raise ValueError("need at least 100 trials")
    m = len(runs)
    if link.m != m:
        raise ValueError(f"link expects {link.m} runs, got {m}")
    n = runs[0].n
    t = runs[0].t
    sigma = runs[0].apparatus.sigma
    if any(r.n != n or r.t != t or r.apparatus.sigma != sigma for r in runs):
        raise ValueError("runs must share N, T and sigma")
    # run j estimates component j: either each run is a single-parameter
    # marginal model, or all runs share the full parameter vector
    theta_true = np.empty(m)
    for j, r in enumerate(runs):
        if r.theta.size == 1:
            theta_true[j] = r.theta[0]
        elif r.theta.size == m:
            theta_true[j] = r.theta[j]
        else:
            raise ValueError(
                f"run {j} carries {r.theta.size} parameters, expected 1 or {m}"
            )

    bundles = [steady_state_bundle(r.model, r.theta) for r in runs]
    dists = [
        pointer_distribution(r, "exact", bundle=b) for r, b in zip(runs, bundles)
    ]
    ent = _entropy(seed)
    qs = np.column_stack(
        [
            sample_pointer(d, np.random.SeedSequence(ent + [j]), trials)
            for j, d in enumerate(dists)
        ]
    )
    thetas, clamp_mask = _estimate_batch(qs, n, link)
    clamp_fraction = float(clamp_mask.mean())
    if clamp_fraction > 0.01:
        raise ValueError(
            f"{clamp_fraction:.2%} of trials clamped to the link image (limit 1%)"
        )
    dev2 = ((thetas - theta_true) ** 2).sum(axis=1)
    empirical = float(np.sqrt(dev2.mean()))
    predicted = multiparam_error_formula(
        bundles, [r.observable for r in runs], link, sigma, n, t
    )
    return EstimationReport(
        theta_hat=thetas.mean(axis=0),
        predicted_error=predicted,
        empirical_error=empirical,
        ci=_chi2_ci(empirical, trials * m),
        n=n,
        t=t,
        trials=trials,
        seed=seed,
        notes={
            "clamp_fraction": clamp_fraction,
            "mean_shift": [float(d.mean - r.n * b.expectation(r.observable))
                           for d, r, b in zip(dists, runs, bundles)],
        },
    )


def conventional_povm_error(theta, n, trials, seed):
    """Projective-measurement baseline: N Bernoulli(theta) outcomes per trial.

    theta_hat is the frequency of excited outcomes; the predicted error is
    sqrt(theta (1 - theta) / N).
    """
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    n = int(n)
    if n < 1:
        raise ValueError("N must be a positive integer")
    trials = int(trials)
    rng = np.random.default_rng(np.random.SeedSequence(_entropy(seed)))
    hats = rng.binomial(n, theta, size=trials) / n
    predicted = float(np.sqrt(theta * (1.0 - theta) / n))
    empirical = float(np.sqrt(((hats - theta) ** 2).mean()))
    return EstimationReport(
        theta_hat=np.array([float(hats.mean())]),
        predicted_error=predicted,
        empirical_error=empirical,
        ci=_chi2_ci(empirical, trials),
        n=float(n),
        t=None,
        trials=trials,
        seed=seed,
        notes={"clamp_fraction": 0.0},
    )


def qfi_state(rho, drho, tol=1e-12):
    """Quantum Fisher information of a state via the SLD eigenbasis sum.

    F = 2 sum_{ij} |<i|drho|j>|^2 / (l_i + l_j) over eigenpairs of rho with
    l_i + l_j > tol; dropped terms carrying weight above 1e-6 trigger a
    rank-deficiency warning.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if not is_hermitian(rho, 1e-9) or not is_hermitian(drho, 1e-9):
        raise ValueError("rho and drho must be Hermitian")
    evals, evecs = np.linalg.eigh((rho + rho.conj().T) / 2.0)
    melem2 = np.abs(evecs.conj().T @ drho @ evecs) ** 2
    denom = evals[:, None] + evals[None, :]
    mask = denom > tol
    dropped = float(melem2[~mask].sum())
    if dropped > 1e-6:
        warnings.warn(
            f"rank-deficient state: dropped QFI weight {dropped:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(2.0 * (melem2[mask] / denom[mask]).sum())


def cramer_rao_bound(f):
    """Estimation error lower bound 1 / sqrt(F)."""
    f = float(f)
    if f <= 0:
        raise ValueError("Fisher information must be positive")
    return 1.0 / np.sqrt(f)


def _bloch_affine_channel(diag3, offset3):
    """Qubit superoperator from an affine Bloch action r -> D r + b."""
    d3 = np.asarray(diag3, dtype=float)
    b3 = np.asarray(offset3, dtype=float)
    cols = []
    for j in range(2):
        for i in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            r = np.array([s[j, i] for s in PAULI])
            out = 0.5 * float(i == j) * (np.eye(2, dtype=complex)
                                         + sum(b * s for b, s in zip(b3, PAULI)))
            out = out + 0.5 * sum(dr * s for dr, s in zip(d3 * r, PAULI))
            cols.append(vectorize(out))
    return np.stack(cols, axis=1)


def amplitude_damping_pair(t):
    """Channels relaxing toward |0><0| and |1><1| after time t, from their
    Bloch actions r_xy -> exp(-t/2) r_xy, r_z -> +-(1 - exp(-t)) + exp(-t) r_z."""
    t = float(t)
    shrink = np.array([np.exp(-t / 2.0), np.exp(-t / 2.0), np.exp(-t)])
    kick = 1.0 - np.exp(-t)
    lam0 = _bloch_affine_channel(shrink, [0.0, 0.0, kick])
    lam1 = _bloch_affine_channel(shrink, [0.0, 0.0, -kick])
    return lam0, lam1


def gad_channel_decomposition_check(theta, t):
    """Max-entry defect of exp(L_theta t) = theta Lam0(t) + (1-theta) Lam1(t).

    Lam0/Lam1 are built independently from their Bloch actions, so the check
    exercises both constructions.
    """
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    lam_theta = mat_exp(gad_model().liouvillian([theta]), t)
    lam0, lam1 = amplitude_damping_pair(t)
    return float(np.abs(lam_theta - theta * lam0 - (1.0 - theta) * lam1).max())


@dataclass(frozen=True)
class BoundCheckReport:
    """Per-probe QFI values against the channel-output bound."""

    bound: float
    qfi: tuple
    fd_disagreement: tuple
    flagged: tuple
    passed: bool


def qfi_output_bound_check(theta, t, probes, copies=1, slack=1e-4):
    """Check F[channel output] <= copies / (theta (1-theta)) for each probe.

    The output-state derivative in theta uses central differences (step
    1e-5) with one Richardson refinement; probes whose two difference
    stencils disagree by more than 1e-5 are flagged.
    """
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if copies == 1:
        model = gad_model()

        def liouville(th):
            return model.liouvillian([th])

    elif copies == 2:
        model = product_gad_model(2)

        def liouville(th):
            return model.liouvillian([th, th])

    else:
        raise ValueError("copies must be 1 or 2")

    h = 1e-5
    chan = {dt: mat_exp(liouville(theta + dt), t) for dt in (0.0, h, -h, h / 2, -h / 2)}
    bound = copies / (theta * (1.0 - theta))
    qfis = []
    gaps = []
    flags = []
    for probe in probes:
        probe = np.asarray(probe, dtype=complex)
        if not is_density_matrix(probe, 1e-8):
            raise ValueError("probes must be density matrices")
        v = vectorize(probe)
        rho_out = devectorize(chan[0.0] @ v)
        d1 = devectorize((chan[h] - chan[-h]) @ v) / (2.0 * h)
        d2 = devectorize((chan[h / 2] - chan[-h / 2]) @ v) / h
        gap = float(np.abs(d2 - d1).max())
        drho = (4.0 * d2 - d1) / 3.0
        drho = (drho + drho.conj().T) / 2.0
        qfis.append(qfi_state(rho_out, drho))
        gaps.append(gap)
        flags.append(gap > 1e-5)
    passed = all(f <= bound + slack for f in qfis)
    return BoundCheckReport(
        bound=float(bound),
        qfi=tuple(qfis),
        fd_disagreement=tuple(gaps),
        flagged=tuple(flags),
        passed=passed,
    )
