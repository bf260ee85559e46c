"""Convergence studies with rate fits, plus their flat-file outputs."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .adjoint import (
    DiscreteMeasure,
    compensated_energy,
    energy_flux_integral,
    propagate_adjoint,
)
from .hamiltonians import Hamiltonian, NumericalFlux, gamma_bound
from .initial_data import InitialData, named
from .oracle import ExactSolution, fine_reference, hopf_lax
from .solver import INTEGRATORS, SolverConfig, evolve_gradient, evolve_second, gradient_box, monitor_bounds, solve

COLUMNS = (
    "h",
    "n",
    "dt",
    "sup_error",
    "local_rate",
    "lip_excess",
    "second_excess",
    "sup_excess",
    "energy410",
    "energy413",
)
TOY_COLUMNS = ("h", "sup_error", "local_rate")
TRAJECTORY_COLUMNS = ("t", "i", "u", "v", "s")
ADJOINT_COLUMNS = ("t", "i", "sigma")
ORACLES = ("hopf_lax", "fine_reference")
EXACT_TOL = 1e-10
DEFAULT_H_LIST = ((16, 1), (32, 1), (64, 1), (128, 1), (256, 1))

_FLUX_ALIASES = {
    "upwind": "upwind_quadratic",
    "upwind_quadratic": "upwind_quadratic",
    "cl": "crandall_lions",
    "crandall_lions": "crandall_lions",
    "split": "split",
    "smoothed": "smoothed_upwind",
    "smoothed_upwind": "smoothed_upwind",
}


class StudyError(RuntimeError):
    """A convergence-study row failed; the message names the offending h."""


class DegenerateFit(ValueError):
    """Too few nonzero errors to fit a rate (the table is exact)."""


@dataclass(frozen=True)
class ExperimentConfig:
    hamiltonian: str = "quadratic"
    flux: str = "upwind"
    u0: str = "cos"
    T: float = 1.0
    h_list: tuple = DEFAULT_H_LIST
    cfl: float = 0.5
    integrator: str = "euler"
    oracle: str = "hopf_lax"
    out: str = "runs"
    gamma: str = "auto"
    eps: float = 1e-3
    x0: float = 0.0
    time_samples: int = 64
    n_ref: int = 2048
    energies: bool = True

    def __post_init__(self):
        hl = tuple((int(n), int(m)) for n, m in self.h_list)
        object.__setattr__(self, "h_list", hl)
        if not hl:
            raise ValueError("h_list is empty")
        hs = [m / n for n, m in hl]
        if any(m <= 0 or m >= n for n, m in hl):
            raise ValueError("each (n, m) needs 0 < m < n")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("h_list must be strictly decreasing in h = m/n")
        if self.T <= 0 or self.cfl <= 0:
            raise ValueError("T and cfl must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.oracle not in ORACLES:
            raise ValueError(f"oracle must be one of {ORACLES}")
        flux_kind(self.flux)
        if self.gamma != "auto":
            float(self.gamma)
        if self.time_samples < 2:
            raise ValueError("time_samples must be at least 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["h_list"] = [list(p) for p in self.h_list]
        return d


def flux_kind(name: str) -> str:
    key = name.split(":")[0]
    if key not in _FLUX_ALIASES:
        raise ValueError(f"unknown flux {name!r}; choose from {sorted(_FLUX_ALIASES)}")
    return _FLUX_ALIASES[key]


def build_hamiltonian(spec: str) -> Hamiltonian:
    """``quadratic`` or ``power:<even a>``."""
    name, _, arg = spec.partition(":")
    if name == "quadratic":
        return Hamiltonian.quadratic()
    if name == "power":
        return Hamiltonian.power_even(int(arg or 4))
    raise ValueError(f"unknown hamiltonian {spec!r}; use quadratic or power:<a>")


def build_flux(cfg: ExperimentConfig, u0: InitialData | None = None) -> NumericalFlux:
    H = build_hamiltonian(cfg.hamiltonian)
    kind = flux_kind(cfg.flux)
    if kind in ("upwind_quadratic", "smoothed_upwind") and H.kind != "quadratic":
        raise ValueError(f"{kind} is only defined for the quadratic Hamiltonian")
    if kind == "upwind_quadratic":
        return NumericalFlux.upwind_quadratic()
    if kind == "smoothed_upwind":
        _, _, arg = cfg.flux.partition(":")
        return NumericalFlux.smoothed_upwind(float(arg) if arg else cfg.eps)
    if kind == "split":
        return NumericalFlux.split(H)
    if cfg.gamma == "auto":
        u0 = u0 if u0 is not None else named(cfg.u0)
        gamma = gamma_bound(H, gradient_box(u0))
    else:
        gamma = float(cfg.gamma)
    return NumericalFlux.crandall_lions(H, gamma)


# configuration files

def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def parse_h_list(text) -> tuple:
    """``"16:1, 32:1"`` or a sequence of pairs."""
    if isinstance(text, str):
        pairs = []
        for item in text.replace(";", ",").split(","):
            item = item.strip()
            if not item:
                continue
            n, _, m = item.partition(":")
            pairs.append((int(n), int(m or 1)))
        return tuple(pairs)
    return tuple((int(n), int(m)) for n, m in text)


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay string or typed values onto ``base``; unknown keys are an error."""
    base = base or ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    changes = {}
    for key, val in values.items():
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        if val is None:
            continue
        if key == "h_list":
            changes[key] = parse_h_list(val)
        elif key == "gamma":
            changes[key] = "auto" if str(val) == "auto" else str(float(val))
        elif key in ("T", "cfl", "eps", "x0"):
            changes[key] = float(val)
        elif key in ("time_samples", "n_ref"):
            changes[key] = int(val)
        elif key == "energies":
            changes[key] = val if isinstance(val, bool) else _BOOL[str(val).lower()]
        else:
            changes[key] = str(val)
    return replace(base, **changes)


def load_config(path) -> ExperimentConfig:
    """Read a ``key = value`` file, or the ``config`` block of a JSON manifest."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        return config_from_mapping(data.get("config", data))
    return config_from_mapping(parse_config_text(text))


# tables

@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    label: str = ""

    @property
    def hs(self) -> np.ndarray:
        return np.array([r["h"] for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r["sup_error"] for r in self.rows])

    @property
    def exact(self) -> bool:
        return bool(self.rows) and bool(np.all(self.errors <= EXACT_TOL))

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in COLUMNS])
        return path

    @classmethod
    def from_csv(cls, path) -> ResultTable:
        with Path(path).open(encoding="utf-8") as fh:
            rows = [{k: (int(v) if k == "n" else float(v)) for k, v in r.items()} for r in csv.DictReader(fh)]
        return cls(rows)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def local_rates(hs, errors) -> np.ndarray:
    """``log(e_{k-1}/e_k) / log(h_{k-1}/h_k)``; the first entry is nan."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    out = np.full(hs.size, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    return out


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    C: float


def fit_rate(table) -> RateFit:
    """Least-squares slope of ``log err`` against ``log h``, plus ``max err/sqrt(h)``."""
    if isinstance(table, ResultTable):
        hs, errs = table.hs, table.errors
    else:
        hs, errs = (np.asarray(a, dtype=float) for a in zip(*table))
    ok = errs > 1e-13
    if np.count_nonzero(ok) < 3:
        raise DegenerateFit("need at least three rows with error above 1e-13")
    slope, intercept = np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)
    return RateFit(float(slope), float(intercept), float(np.max(errs[ok] / np.sqrt(hs[ok]))))


# the study

def sup_over_time(err, nsteps: int, coarse: int = 64, zoom: int = 8, keep: int = 2):
    """Approximate ``max_k err(k)`` over steps ``0..nsteps``.

    Evaluates ``coarse + 1`` evenly spaced steps, then zooms in around the
    ``keep`` largest with ``zoom``-point sweeps until the bracket is one
    step wide.  Returns ``(max, argmax_step, evaluated)``.
    """
    cache = {}

    def f(k):
        k = int(min(max(k, 0), nsteps))
        if k not in cache:
            cache[k] = float(err(k))
        return cache[k]

    grid = np.unique(np.round(np.linspace(0, nsteps, min(coarse, nsteps) + 1)).astype(int))
    for k in grid:
        f(k)
    span = max(1, int(math.ceil(nsteps / max(coarse, 1))))
    starts = sorted(cache, key=lambda k: (-cache[k], k))[:keep]
    for k0 in starts:
        best, half = k0, span
        while half > 1:
            pts = np.unique(np.round(np.linspace(best - half, best + half, zoom + 1)).astype(int))
            for k in pts:
                f(k)
            best = max((k for k in cache if abs(k - best) <= half), key=lambda k: (cache[k], -k))
            half = int(math.ceil(half / (zoom / 2)))
        for k in (best - 1, best + 1):
            f(k)
    kmax = max(cache, key=lambda k: (cache[k], -k))
    return cache[kmax], kmax, dict(sorted(cache.items()))


def _error_function(cfg, u0, F, traj):
    g = traj.grid
    if cfg.oracle == "hopf_lax":
        sol = ExactSolution(u0, F.hamiltonian)

        def err(k):
            ex = hopf_lax(sol, g.x, float(traj.times[k]))
            return np.max(np.abs(traj.states[k] - ex))

        return err, None
    return None, sol_fine(cfg, u0, F, traj)


def sol_fine(cfg, u0, F, traj):
    steps = np.unique(np.round(np.linspace(0, traj.nsteps, cfg.time_samples + 1)).astype(int))
    refs = fine_reference(u0, F, cfg.T, cfg.n_ref, traj.grid.n, cfg.cfl, times=traj.times[steps])
    return {int(k): float(np.max(np.abs(traj.states[k] - r.values))) for k, r in zip(steps, refs)}


def study_row(cfg: ExperimentConfig, n: int, m: int, u0: InitialData, F: NumericalFlux) -> tuple[dict, dict]:
    """Solve at ``h = m/n`` and return the table row and extra diagnostics."""
    sc = SolverConfig(n=n, m=m, T=cfg.T, cfl=cfg.cfl, integrator=cfg.integrator)
    traj = solve(u0, F, sc)
    err, fine = _error_function(cfg, u0, F, traj)
    if err is not None:
        sup_err, kmax, evaluated = sup_over_time(err, traj.nsteps, coarse=cfg.time_samples)
    else:
        evaluated = fine
        kmax = max(fine, key=lambda k: (fine[k], -k))
        sup_err = fine[kmax]
    traj = evolve_gradient(traj)
    if F.has_hessian:
        traj = evolve_second(traj)
    mon = monitor_bounds(traj)
    e410 = e413 = float("nan")
    if cfg.energies and cfg.integrator == "euler":
        adj = propagate_adjoint(traj, DiscreteMeasure.dirac(traj.grid, cfg.x0))
        e410 = energy_flux_integral(traj, adj)
        if F.kind == "crandall_lions":
            e413 = compensated_energy(traj)
    row = {
        "h": m / n,
        "n": n,
        "dt": traj.dt,
        "sup_error": sup_err,
        "local_rate": float("nan"),
        "lip_excess": mon.lipschitz_max,
        "second_excess": mon.one_sided_second_max,
        "sup_excess": mon.sup_bound_max,
        "energy410": e410,
        "energy413": e413,
    }
    extra = {
        "nsteps": traj.nsteps,
        "t_at_max_error": float(kmax * traj.dt),
        "error_evaluations": len(evaluated),
        "monitor_maxima": mon.maxima(),
    }
    return row, extra


def convergence_study(cfg: ExperimentConfig, progress=None) -> tuple[ResultTable, dict]:
    """Run every ``(n, m)`` of ``cfg.h_list``; returns the table and per-row diagnostics."""
    u0 = named(cfg.u0)
    F = build_flux(cfg, u0)
    table = ResultTable(label=F.label)
    diagnostics = []
    for n, m in cfg.h_list:
        t0 = time.perf_counter()
        try:
            row, extra = study_row(cfg, n, m, u0, F)
        except Exception as exc:
            raise StudyError(f"h={m}/{n}: {type(exc).__name__}: {exc}") from exc
        extra["wall_time"] = time.perf_counter() - t0
        table.rows.append(row)
        diagnostics.append({"n": n, "m": m, **extra})
        if progress is not None:
            progress(row, extra)
    for r, rate in zip(table.rows, local_rates(table.hs, table.errors)):
        r["local_rate"] = float(rate)
    return table, {"flux": F.label, "gamma": F.gamma, "rows": diagnostics}


# manifests and plots

@dataclass
class RunManifest:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    oracle: str = ""
    version: str = __version__
    backend: str = _backend.BACKEND
    environment: dict = field(
        default_factory=lambda: {"python": platform.python_version(), "numpy": np.__version__}
    )

    def to_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_json(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_svg(series: dict, path, xlabel: str = "h", ylabel: str = "sup error") -> Path:
    """Log-log plot with one line per entry of ``series`` (label -> (h, err))."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "hjadjoint", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for label, (hs, errs) in series.items():
            ax.loglog(hs, errs, "o-", label=label)
        hs_all = np.concatenate([np.asarray(h, dtype=float) for h, _ in series.values()])
        if hs_all.size:
            ref = np.array([hs_all.min(), hs_all.max()])
            e0 = max(float(np.max(e)) for _, e in series.values())
            ax.loglog(ref, e0 * np.sqrt(ref / ref.max()), "k--", lw=0.8, label="slope 1/2")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def trajectory_rows(traj, max_times: int = 101):
    """``(t, i, u, v, s)`` rows at up to ``max_times`` evenly spaced recorded times."""
    idx = np.unique(np.round(np.linspace(0, traj.steps.size - 1, min(max_times, traj.steps.size))).astype(int))
    nan = np.full(traj.grid.n, np.nan)
    for j in idx:
        v = traj.gradient_states[j] if traj.gradient_states is not None else nan
        s = traj.second_states[j] if traj.second_states is not None else nan
        for i in range(traj.grid.n):
            yield traj.times[j], i, traj.states[j, i], v[i], s[i]


def adjoint_rows(adj, max_times: int = 101):
    K = adj.weights.shape[0] - 1
    idx = np.unique(np.round(np.linspace(0, K, min(max_times, K + 1))).astype(int))
    for k in idx:
        for i, w in enumerate(adj.weights[k]):
            yield adj.times[k], i, w
