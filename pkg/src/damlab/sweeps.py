"""Parameter sweeps over N, T or theta with a shared result table.

Every sweep command emits the same row schema

    series, axis, value, predicted_error, empirical_error,
    ci_lo, ci_hi, delta, mean_shift

so downstream tooling can parse any sweep CSV the same way. Cells that do not
apply to a series hold nan. Per-row runtimes are kept in memory for the
console summary but never written to the CSV, which keeps reruns of the same
scenario byte-identical regardless of machine load or worker count.

Series emitted by the error-scaling sweep:

    dam    pointer-measurement error, formula (predicted) and Monte Carlo
           (empirical, with a chi-squared confidence interval);
    povm   projective-readout baseline for the single-qubit thermal model
           under the identity link, sqrt(theta (1-theta) / N);
    ideal  the infinite-time pointer floor sigma ||J||_F / N, formula only.

The non-adiabaticity sweep fills the delta column with the exact kernel
deviation Delta(T) and the predicted column with its leading form
(2 sigma'^2 / T) sqrt(3 (Re c)^2 + (Im c)^2), c = tr(A S(A rho_ss)).
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .estimation import (
    conventional_povm_error,
    identity_link,
    mc_dam_error,
    steady_expectation_link,
)
from .models import dissipation_coefficient, steady_state_bundle
from .pointer import DamRun, nonadiabaticity

__all__ = [
    "SweepRow",
    "SweepResult",
    "SWEEP_COLUMNS",
    "scenario_link",
    "scaling_sweep",
    "nonadiabaticity_sweep",
    "leading_nonadiabaticity",
    "format_cell",
    "write_csv",
]

SWEEP_COLUMNS = (
    "series",
    "axis",
    "value",
    "predicted_error",
    "empirical_error",
    "ci_lo",
    "ci_hi",
    "delta",
    "mean_shift",
)

NAN = float("nan")


@dataclass(frozen=True)
class SweepRow:
    series: str
    axis: str
    value: float
    predicted: float = NAN
    empirical: float = NAN
    ci_lo: float = NAN
    ci_hi: float = NAN
    delta: float = NAN
    mean_shift: float = NAN
    runtime_ms: float = NAN  # console only, excluded from CSV

    def cells(self):
        return (
            self.series,
            self.axis,
            self.value,
            self.predicted,
            self.empirical,
            self.ci_lo,
            self.ci_hi,
            self.delta,
            self.mean_shift,
        )


@dataclass
class SweepResult:
    command: str
    axis: str
    scenario_sha256: str
    rows: list = field(default_factory=list)

    def series(self, name):
        return [r for r in self.rows if r.series == name]

    def loglog_slope(self, name, col="empirical"):
        """Least-squares slope of log(col) against log(value) for a series."""
        rows = self.series(name)
        xs = np.array([r.value for r in rows], dtype=float)
        ys = np.array([getattr(r, col) for r in rows], dtype=float)
        keep = np.isfinite(ys) & (ys > 0)
        if keep.sum() < 2:
            raise ValueError(f"series {name!r} has fewer than two positive points")
        return float(np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)[0])

    def to_jsonable(self):
        return {
            "command": self.command,
            "axis": self.axis,
            "scenario_sha256": self.scenario_sha256,
            "columns": list(SWEEP_COLUMNS),
            "rows": [
                [c if isinstance(c, str) else float(c) for c in r.cells()]
                for r in self.rows
            ],
            "runtime_ms": [float(r.runtime_ms) for r in self.rows],
        }


def format_cell(v):
    """CSV cell: strings pass through, ints stay ints, floats are %.12g."""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.12g" % float(v)


def write_csv(path, columns, rows, comments=()):
    """Write rows with %.12g floats and LF endings; no timestamps, ever."""
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_cell(c) for c in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def sweep_csv(result, path):
    write_csv(
        path,
        SWEEP_COLUMNS,
        [r.cells() for r in result.rows],
        comments=(
            f"scenario sha256 {result.scenario_sha256}",
            "errors and delta are dimensionless; value is in axis units "
            "(interactions for N, inverse coupling strength for T)",
        ),
    )


def scenario_link(scn):
    """The estimator link declared by a scenario."""
    if scn.link_kind == "identity":
        return identity_link(domain=scn.model.param_domain)
    return steady_expectation_link(scn.model, scn.observables[0][1])


def _point_runs(scn, t, n, theta):
    return [
        DamRun(
            model=scn.model,
            theta=theta,
            observable=a,
            t=t,
            n=n,
            apparatus=scn.apparatus,
        )
        for _, a in scn.observables
    ]


def _is_integral(v):
    return abs(v - round(v)) < 1e-9


def scaling_sweep(scn, workers=None):
    """Estimation error against N, T or theta: formula, Monte Carlo, baselines.

    Each sweep point runs ``scn.trials`` Monte Carlo trials seeded from the
    scenario seed and the point index, so the full table is reproducible from
    the scenario file alone. On a T sweep with ``n_over_t`` set, N follows the
    axis as N = n_over_t * T.
    """
    axis = scn.sweep_axis
    if axis is None:
        raise ValueError("scenario has no [sweep] section")
    if axis == "theta" and scn.model.param_dim != 1:
        raise ValueError("theta sweeps are single-parameter only")
    link = scenario_link(scn)
    want_povm = scn.model_name == "gad" and scn.link_kind == "identity"
    result = SweepResult(command="scaling", axis=axis, scenario_sha256=scn.sha256)

    for idx, value in enumerate(scn.sweep_values):
        t, n, theta = scn.t, scn.n, scn.theta
        if axis == "N":
            n = float(value)
        elif axis == "T":
            t = float(value)
            if scn.n_over_t is not None:
                n = scn.n_over_t * t
        else:
            theta = np.array([float(value)])
        if n < 1:
            raise ValueError(f"sweep point {value}: N = {n} below 1")

        start = time.perf_counter()
        runs = _point_runs(scn, t, n, theta)
        report = mc_dam_error(runs, link, scn.trials, [scn.seed, idx])
        elapsed = (time.perf_counter() - start) * 1e3
        shifts = report.notes.get("mean_shift", [NAN])
        result.rows.append(
            SweepRow(
                series="dam",
                axis=axis,
                value=float(value),
                predicted=report.predicted_error,
                empirical=report.empirical_error,
                ci_lo=report.ci[0],
                ci_hi=report.ci[1],
                mean_shift=float(np.max(np.abs(shifts))),
                runtime_ms=elapsed,
            )
        )

        bundles = [steady_state_bundle(r.model, r.theta) for r in runs]
        avec = np.array(
            [b.expectation(a) for b, (_, a) in zip(bundles, scn.observables)]
        )
        jinv = np.asarray(link.jacobian_inverse(avec), dtype=float)
        floor = float(
            scn.apparatus.sigma * np.sqrt((jinv**2).sum()) / n
        )
        result.rows.append(
            SweepRow(series="ideal", axis=axis, value=float(value), predicted=floor)
        )

        if want_povm and _is_integral(n):
            start = time.perf_counter()
            povm = conventional_povm_error(
                theta[0], int(round(n)), scn.trials, [scn.seed, idx, 1]
            )
            elapsed = (time.perf_counter() - start) * 1e3
            result.rows.append(
                SweepRow(
                    series="povm",
                    axis=axis,
                    value=float(value),
                    predicted=povm.predicted_error,
                    empirical=povm.empirical_error,
                    ci_lo=povm.ci[0],
                    ci_hi=povm.ci[1],
                    runtime_ms=elapsed,
                )
            )
    return result


def leading_nonadiabaticity(bundle, a, sigma, t):
    """First-order Delta: (2 sigma'^2 / T) sqrt(3 (Re c)^2 + (Im c)^2)."""
    coeff = dissipation_coefficient(bundle, a)
    sigma_p = 1.0 / (2.0 * float(sigma))
    return float(
        2.0
        * sigma_p**2
        / float(t)
        * math.sqrt(3.0 * coeff.real**2 + coeff.imag**2)
    )


def nonadiabaticity_sweep(scn, workers=None):
    """Exact kernel deviation Delta(T) against its leading 1/T form.

    Runs at N = 1 (where Delta is defined) for the first scenario observable;
    the axis must be T.
    """
    if scn.sweep_axis != "T":
        raise ValueError("non-adiabaticity sweeps run over the T axis")
    if scn.model.param_dim != 1:
        raise ValueError("non-adiabaticity sweeps are single-parameter only")
    a = scn.observables[0][1]
    bundle = steady_state_bundle(scn.model, scn.theta)
    result = SweepResult(
        command="nonadiabaticity", axis="T", scenario_sha256=scn.sha256
    )
    for value in scn.sweep_values:
        start = time.perf_counter()
        run = DamRun(
            model=scn.model,
            theta=scn.theta,
            observable=a,
            t=float(value),
            n=1.0,
            apparatus=scn.apparatus,
        )
        delta = nonadiabaticity(run, bundle=bundle, workers=workers)
        elapsed = (time.perf_counter() - start) * 1e3
        result.rows.append(
            SweepRow(
                series="delta",
                axis="T",
                value=float(value),
                predicted=leading_nonadiabaticity(
                    bundle, a, scn.apparatus.sigma, value
                ),
                delta=delta,
                runtime_ms=elapsed,
            )
        )
    return result
