"""Scenario files: sectioned key-value configs plus JSON custom models.

A scenario is an INI-style file with sections [model], [apparatus], [run] and
optionally [sweep] and [verify]:

    [model]
    name = gad                  ; or file = my_model.json (path relative
    theta = 0.3                 ;  to the scenario file)
    observable = excited        ; comma list, one per parameter

    [apparatus]
    sigma = 0.1                 ; grids default to +-6 sigma' / 161 momentum
    p_points = 161              ;  nodes and +-8 sigma / 2048 position nodes

    [run]
    t = 200
    n = 1
    link = identity             ; or steady (numeric table from the model)
    trials = 1000
    seed = 123                  ; mandatory, never defaulted from the clock
    out_dir = out               ; optional

    [sweep]
    axis = N                    ; N, T or theta
    values = 1, 2, 5, 10

Custom models are JSON files: complex matrices are nested [re, im] pairs, and
jump rates are affine in the parameters, {"const": c, "slope_per_param":
[s_1, ...]} meaning rate(theta) = c + s . theta. Rates must be nonnegative on
the whole (box) domain, which for affine maps is checked at the corners.

Registered model names: gad, product_gad_2, product_gad_3. Registered
observables: "excited" (the |0><0| projector) and "excited@k" for site k of a
product model; custom models may name additional observables in the file.
"""

import configparser
import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .models import (
    EXCITED_PROJECTOR,
    LindbladModel,
    gad_model,
    product_gad_model,
)
from .pointer import ApparatusConfig, DamRun, default_apparatus

__all__ = [
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "load_model_file",
    "scenario_runs",
]


class ScenarioError(ValueError):
    """Configuration problem: bad key, bad value, bad model file."""


def _fail(path, msg):
    raise ScenarioError(f"{path}: {msg}")


# --------------------------------------------------------------- JSON models


def _parse_cmatrix(raw, dim, where, path):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        _fail(path, f"{where}: expected nested [re, im] arrays")
    if arr.shape != (dim, dim, 2):
        _fail(path, f"{where}: expected shape {dim}x{dim}x2, got {list(arr.shape)}")
    return arr[..., 0] + 1j * arr[..., 1]


def load_model_file(path):
    """Parse a JSON model file into (LindbladModel, named observables)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        _fail(path, "top level must be an object")

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        _fail(path, "missing model name")
    dim = doc.get("dim")
    if not isinstance(dim, int) or not 2 <= dim <= 8:
        _fail(path, "dim must be an integer in [2, 8]")
    domain_raw = doc.get("param_domain")
    if not isinstance(domain_raw, list) or not domain_raw:
        _fail(path, "param_domain must be a nonempty list of [lo, hi] pairs")
    domain = []
    for k, pair in enumerate(domain_raw):
        try:
            lo, hi = float(pair[0]), float(pair[1])
        except (TypeError, ValueError, IndexError):
            _fail(path, f"param_domain[{k}]: expected [lo, hi]")
        if not lo < hi:
            _fail(path, f"param_domain[{k}]: need lo < hi")
        domain.append((lo, hi))
    m = len(domain)

    h = None
    if doc.get("hamiltonian") is not None:
        h = _parse_cmatrix(doc["hamiltonian"], dim, "hamiltonian", path)
    jumps_raw = doc.get("jumps")
    if not isinstance(jumps_raw, list) or not jumps_raw:
        _fail(path, "jumps must be a nonempty list")
    jump_ops = []
    rate_consts = []
    rate_slopes = []
    for k, entry in enumerate(jumps_raw):
        if not isinstance(entry, dict) or "matrix" not in entry or "rate" not in entry:
            _fail(path, f"jumps[{k}]: need matrix and rate")
        jump_ops.append(_parse_cmatrix(entry["matrix"], dim, f"jumps[{k}].matrix", path))
        rate = entry["rate"]
        if not isinstance(rate, dict):
            _fail(path, f"jumps[{k}].rate: expected {{const, slope_per_param}}")
        try:
            const = float(rate["const"])
            slope = np.asarray(rate["slope_per_param"], dtype=float)
        except (KeyError, TypeError, ValueError):
            _fail(path, f"jumps[{k}].rate: expected {{const, slope_per_param}}")
        if slope.shape != (m,):
            _fail(path, f"jumps[{k}].rate: slope_per_param must have {m} entries")
        rate_consts.append(const)
        rate_slopes.append(slope)

    # affine rates are nonnegative on the box iff nonnegative at its corners
    for k in range(len(jump_ops)):
        for corner in itertools.product(*domain):
            val = rate_consts[k] + rate_slopes[k] @ np.asarray(corner)
            if val < 0:
                _fail(
                    path,
                    f"jumps[{k}]: rate {val:.3g} negative at domain corner "
                    f"{list(corner)}",
                )

    observables = {}
    for oname, raw in (doc.get("observables") or {}).items():
        obs = _parse_cmatrix(raw, dim, f"observables[{oname}]", path)
        if np.abs(obs - obs.conj().T).max() > 1e-10:
            _fail(path, f"observables[{oname}]: not Hermitian")
        observables[oname] = obs

    def generator(theta):
        theta = np.asarray(theta, dtype=float)
        jumps = [
            (op, float(c + s @ theta))
            for op, c, s in zip(jump_ops, rate_consts, rate_slopes)
        ]
        return h, jumps

    model = LindbladModel(
        name=name,
        param_dim=m,
        system_dim=dim,
        generator=generator,
        param_domain=tuple(domain),
    )
    return model, observables


# ----------------------------------------------------------- INI scenarios


_REGISTERED = {
    "gad": lambda: gad_model(),
    "product_gad_2": lambda: product_gad_model(2),
    "product_gad_3": lambda: product_gad_model(3),
}


def _embed_site(op, site, sites):
    out = np.eye(1, dtype=complex)
    for k in range(sites):
        out = np.kron(out, op if k == site else np.eye(2, dtype=complex))
    return out


def _resolve_observable(spec, model, named, path):
    spec = spec.strip()
    if spec in named:
        return spec, named[spec]
    base, _, site = spec.partition("@")
    if base == "excited":
        if site:
            try:
                k = int(site)
            except ValueError:
                _fail(path, f"observable {spec!r}: bad site index")
            sites = round(np.log2(model.system_dim))
            if not 1 <= k <= sites or 2**sites != model.system_dim:
                _fail(path, f"observable {spec!r}: site out of range")
            return spec, _embed_site(EXCITED_PROJECTOR, k - 1, sites)
        if model.system_dim != 2:
            _fail(path, f"observable {spec!r} needs a site index on this model")
        return spec, EXCITED_PROJECTOR.copy()
    _fail(path, f"unknown observable {spec!r}")


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario: model, operating point, apparatus and execution keys."""

    path: str
    sha256: str
    model: LindbladModel
    model_name: str
    theta: np.ndarray
    observables: tuple  # of (label, matrix)
    link_kind: str
    apparatus: ApparatusConfig
    t: float
    n: float
    n_over_t: Optional[float]
    trials: int
    seed: int
    workers: Optional[int]
    sweep_axis: Optional[str]
    sweep_values: Optional[tuple]
    out_dir: str
    checks: Optional[tuple]
    verify_overrides: dict


def _get(cfg, section, key, conv, path, default=None, required=False):
    if not cfg.has_option(section, key):
        if required:
            _fail(path, f"missing [{section}] {key}")
        return default
    raw = cfg.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError):
        _fail(path, f"[{section}] {key}: cannot parse {raw!r}")


def _floats(raw):
    vals = [float(v) for v in raw.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def load_scenario(path, seed=None, workers=None, out_dir=None):
    """Parse and validate a scenario file; CLI overrides win over file keys."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    digest = hashlib.sha256(text.encode()).hexdigest()
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cfg.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    for section in ("model", "run"):
        if not cfg.has_section(section):
            _fail(path, f"missing [{section}] section")

    named = {}
    if cfg.has_option("model", "file"):
        if cfg.has_option("model", "name"):
            _fail(path, "[model] must set exactly one of name/file")
        model_file = (path.parent / cfg.get("model", "file")).resolve()
        model, named = load_model_file(model_file)
        model_name = model.name
    else:
        model_name = _get(cfg, "model", "name", str, path, required=True).strip()
        if model_name not in _REGISTERED:
            _fail(
                path,
                f"unknown model {model_name!r} (registered: "
                f"{', '.join(sorted(_REGISTERED))})",
            )
        model = _REGISTERED[model_name]()

    theta = np.asarray(_get(cfg, "model", "theta", _floats, path, required=True))
    if theta.size != model.param_dim:
        _fail(path, f"theta needs {model.param_dim} entries, got {theta.size}")
    if not model.contains(theta):
        _fail(path, f"theta {theta.tolist()} outside the model domain")

    obs_raw = _get(cfg, "model", "observable", str, path, required=True)
    observables = tuple(
        _resolve_observable(s, model, named, path) for s in obs_raw.split(",")
    )
    if len(observables) != model.param_dim:
        _fail(
            path,
            f"need {model.param_dim} observables (one per parameter), "
            f"got {len(observables)}",
        )

    sigma = _get(cfg, "apparatus", "sigma", float, path, default=0.1) \
        if cfg.has_section("apparatus") else 0.1
    base = default_apparatus(sigma)
    if cfg.has_section("apparatus"):
        apparatus = ApparatusConfig(
            sigma=sigma,
            p_halfwidth=_get(cfg, "apparatus", "p_halfwidth", float, path,
                             default=base.p_halfwidth),
            p_points=_get(cfg, "apparatus", "p_points", int, path,
                          default=base.p_points),
            q_halfwidth=_get(cfg, "apparatus", "q_halfwidth", float, path,
                             default=base.q_halfwidth),
            q_points=_get(cfg, "apparatus", "q_points", int, path,
                          default=base.q_points),
        )
    else:
        apparatus = base

    t = _get(cfg, "run", "t", float, path, required=True)
    n = _get(cfg, "run", "n", float, path, default=1.0)
    n_over_t = _get(cfg, "run", "n_over_t", float, path)
    link_kind = _get(cfg, "run", "link", str, path, default="identity").strip()
    if link_kind not in ("identity", "steady"):
        _fail(path, f"[run] link must be identity or steady, got {link_kind!r}")
    if link_kind == "steady" and model.param_dim != 1:
        _fail(path, "the steady link is single-parameter only")
    trials = _get(cfg, "run", "trials", int, path, default=1000)
    if trials < 100:
        _fail(path, "[run] trials must be at least 100")
    if seed is None:
        seed = _get(cfg, "run", "seed", int, path)
    if seed is None:
        _fail(path, "seed is mandatory: set [run] seed or pass --seed")
    file_workers = _get(cfg, "run", "workers", int, path)
    if workers is None:
        workers = file_workers
    if workers is not None and workers < 1:
        _fail(path, "workers must be at least 1")
    if out_dir is None:
        out_dir = _get(cfg, "run", "out_dir", str, path, default="out")

    sweep_axis = None
    sweep_values = None
    if cfg.has_section("sweep"):
        sweep_axis = _get(cfg, "sweep", "axis", str, path, required=True).strip()
        if sweep_axis not in ("N", "T", "theta"):
            _fail(path, f"sweep axis must be N, T or theta, got {sweep_axis!r}")
        sweep_values = _get(cfg, "sweep", "values", _floats, path, required=True)
        if list(sweep_values) != sorted(sweep_values):
            _fail(path, "sweep values must be ascending")
        if len(set(sweep_values)) != len(sweep_values):
            _fail(path, "sweep values must be distinct")

    checks = None
    overrides = {}
    if cfg.has_section("verify"):
        for key in cfg.options("verify"):
            if key == "checks":
                checks = tuple(
                    int(v) for v in cfg.get("verify", "checks").replace(",", " ").split()
                )
                if not checks or not all(1 <= c <= 10 for c in checks):
                    _fail(path, "[verify] checks must list numbers in 1..10")
            else:
                overrides[key] = cfg.get("verify", key)

    if t <= 0:
        _fail(path, f"[run] t must be positive, got {t!r}")
    if n < 1:
        _fail(path, "[run] n must be at least 1")

    return Scenario(
        path=str(path),
        sha256=digest,
        model=model,
        model_name=model_name,
        theta=theta,
        observables=observables,
        link_kind=link_kind,
        apparatus=apparatus,
        t=float(t),
        n=float(n),
        n_over_t=n_over_t,
        trials=trials,
        seed=int(seed),
        workers=workers,
        sweep_axis=sweep_axis,
        sweep_values=sweep_values,
        out_dir=str(out_dir),
        checks=checks,
        verify_overrides=overrides,
    )


def scenario_runs(scn, t=None, n=None, theta=None):
    """DamRun per observable at the scenario's (or an overridden) point."""
    theta_vec = scn.theta if theta is None else np.asarray(theta, dtype=float)
    return [
        DamRun(
            model=scn.model,
            theta=theta_vec,
            observable=a,
            t=scn.t if t is None else t,
            n=scn.n if n is None else n,
            apparatus=scn.apparatus,
        )
        for _, a in scn.observables
    ]
