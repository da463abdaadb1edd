"""Command-line entry point.

Every run writes ``manifest.json`` (config echo, version, wall time, status)
plus mode-specific CSV/JSON/JSONL files into ``--out-dir``. A manifest's
``config`` block can be fed back through ``--config`` to repeat the run.

Exit codes: 0 success, 1 self-test failure, 2 invalid configuration,
3 numerical blow-up.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as dg
from .diophantine import critical_index, min_resonance_gap, mu_of_coefficients, smoothing_gain
from .errors import BlowUpError, ConfigurationError, DomainError
from .normal_form import compute_coefficients, verify_integrated_identity
from .oracles import run_oracle_suites
from .spectral import GridSpec
from .system import HSParams, simulate

EXIT_OK, EXIT_TEST_FAILURE, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3
MODES = ("simulate", "verify-normal-form", "smoothing", "resonance-scan", "dissipative", "attractor", "oracle-test")

# mode -> (N, dt, T, amplitude)
_MODE_DEFAULTS = {
    "simulate": (32, 1e-3, 1.0, 1.0),
    "verify-normal-form": (32, 1e-4, 0.1, 1e-3),
    "smoothing": (256, None, 1.0, 0.5),
    "resonance-scan": (32, 1e-3, 1.0, 1.0),
    "dissipative": (32, 2.5e-4, 40.0, None),
    "attractor": (32, 2.5e-4, 100.0, None),
    "oracle-test": (8, 1e-3, 1.0, 1.0),
}


@dataclass
class RunConfig:
    mode: str
    a: str = "1/2"
    beta: float = -1.0
    gamma: float = 0.0
    s: float = 1.0
    s1_grid: list = field(default_factory=lambda: [1.0, 1.25, 1.5])
    N: int | None = None
    M: int | None = None
    dt: float | None = None
    T: float | None = None
    seed: int = 0
    mu: float | None = None
    jobs: int = 1
    out_dir: str = "."
    K: int = 100
    amplitude: float | None = None
    sample_every: int | None = None
    alpha: float = 0.4
    h1_radius: float = 10.0
    n_data: int = 5

    def parsed_a(self):
        """``a`` as a Fraction when written ``p/q``, otherwise a float."""
        text = str(self.a).strip()
        try:
            a = Fraction(text) if "/" in text else float(text)
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f"a: cannot parse {self.a!r}") from None
        if not Fraction(1, 4) < a < 1:
            raise ConfigurationError(f"a: {self.a} must lie in (1/4, 1)")
        return a

    def validate(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode: {self.mode!r} is not one of {', '.join(MODES)}")
        N, dt, T, amp = _MODE_DEFAULTS[self.mode]
        self.N = N if self.N is None else self.N
        self.dt = dt if self.dt is None else self.dt
        self.T = T if self.T is None else self.T
        self.amplitude = amp if self.amplitude is None else self.amplitude
        if self.mode in ("dissipative", "attractor") and self.gamma == 0:
            self.gamma = 0.5
        self.parsed_a()
        if self.N < 8:
            raise ConfigurationError(f"N: {self.N} must be >= 8")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt: {self.dt} must be positive")
        if not self.T > 0:
            raise ConfigurationError(f"T: {self.T} must be positive")
        if self.jobs < 1:
            raise ConfigurationError("jobs: must be >= 1")
        if self.mode in ("dissipative", "attractor") and not (self.beta < 0 and self.gamma > 0):
            raise ConfigurationError("beta/gamma: dissipative modes need beta < 0 and gamma > 0")
        if self.mode == "resonance-scan" and self.K < 1:
            raise ConfigurationError("K: must be >= 1")
        if self.mu is not None and not (self.mu == 1 or self.mu >= 2):
            raise ConfigurationError(f"mu: {self.mu} not in {{1}} U [2, inf]")
        return self


_FLAG_FIELDS = {
    "mode": str, "a": str, "beta": float, "gamma": float, "s": float, "N": int, "M": int,
    "dt": float, "T": float, "seed": int, "mu": float, "jobs": int, "out_dir": str, "K": int,
    "amplitude": float, "sample_every": int, "alpha": float, "h1_radius": float, "n_data": int,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="hirota", description="Coupled KdV experiments on the torus.")
    ap.add_argument("--config", help="JSON file with the same keys as the flags; flags win")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--a", help="dispersion ratio, 'p/q' for exact arithmetic or a decimal")
    ap.add_argument("--beta", type=float)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--s", type=float, help="data regularity")
    ap.add_argument("--s1-grid", dest="s1_grid", help="comma separated target regularities")
    ap.add_argument("--n-modes", dest="N", type=int, help="truncation N")
    ap.add_argument("--M", type=int, help="physical grid size (> 3N, even)")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--t-final", dest="T", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--mu", type=float, help="irrationality exponent for inexact a")
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out-dir", dest="out_dir")
    ap.add_argument("--K", type=int, help="scan length for resonance-scan")
    ap.add_argument("--amplitude", type=float)
    ap.add_argument("--sample-every", dest="sample_every", type=int)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--h1-radius", dest="h1_radius", type=float, help="H^1 x H^1 norm of the random data")
    ap.add_argument("--n-data", dest="n_data", type=int)
    return ap


def config_from_args(argv=None):
    ns = build_parser().parse_args(argv)
    merged = {}
    if ns.config:
        try:
            merged.update(json.loads(Path(ns.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"config: cannot read {ns.config}: {exc}") from None
    for key, val in vars(ns).items():
        if key != "config" and val is not None:
            merged[key] = val
    if isinstance(merged.get("s1_grid"), str):
        try:
            merged["s1_grid"] = [float(x) for x in merged["s1_grid"].split(",") if x.strip()]
        except ValueError:
            raise ConfigurationError(f"s1_grid: cannot parse {merged['s1_grid']!r}") from None
    unknown = set(merged) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ConfigurationError(f"{sorted(unknown)[0]}: unknown config key")
    if "mode" not in merged:
        raise ConfigurationError("mode: required")
    for key, typ in _FLAG_FIELDS.items():
        if merged.get(key) is not None and not isinstance(merged[key], typ):
            try:
                merged[key] = typ(merged[key])
            except (TypeError, ValueError):
                raise ConfigurationError(f"{key}: expected {typ.__name__}, got {merged[key]!r}") from None
    return RunConfig(**merged).validate()


# --- mode runners -----------------------------------------------------------


def _params(cfg, T=None, **kw):
    grid = GridSpec(cfg.N, cfg.M)
    return HSParams(a=cfg.parsed_a(), beta=cfg.beta, dt=cfg.dt, T=cfg.T if T is None else T, grid=grid, **kw)


def _write(out, name, text):
    path = out / name
    path.write_text(text)
    return name


def _dissipative_params(cfg):
    f, g = dg.forcing_pair(cfg.N, cfg.seed + 1000)
    return _params(cfg, gamma=cfg.gamma, forcing_f=f, forcing_g=g)


def run_simulate(cfg, out):
    p = _params(cfg, gamma=cfg.gamma)
    if cfg.gamma > 0:
        p = _dissipative_params(cfg)
    data = dg.random_sobolev_data(cfg.N, cfg.s, cfg.amplitude, cfg.seed)
    traj = simulate(data, p, sample_every=cfg.sample_every or max(1, p.n_steps // 100))
    series = dg.energy_series(traj, p)
    files = [
        _write(out, "trajectory.jsonl", traj.to_jsonl()),
        _write(out, "energies.csv", dg.long_table_csv(series.to_long_rows())),
        _write(out, "norms.csv", traj.norms_csv((0.0, 1.0, cfg.s))),
    ]
    summary = {"E1_drift": series.relative_drift("E1"), "E2_drift": series.relative_drift("E2")}
    return files, summary, EXIT_OK


def run_verify(cfg, out):
    p = _params(cfg)
    rc = compute_coefficients(cfg.parsed_a())
    data = _low_mode_data(cfg.N, cfg.amplitude, cfg.seed)
    traj = simulate(data, p, sample_every=cfg.sample_every or 1)
    rep = verify_integrated_identity(traj, rc, p)
    files = [_write(out, "residual.json", rep.to_json())]
    return files, {"max_residual": rep.max_residual, "rho2_max": rep.rho2_max, "rho3_max": rep.rho3_max}, EXIT_OK


def _low_mode_data(N, amplitude, seed, kmax=None):
    """Flat spectrum of size ``amplitude`` on modes ``1..N/3`` with random phases."""
    kmax = N // 3 if kmax is None else kmax
    return dg.random_sobolev_data(N, -0.51, amplitude, seed, kmax=kmax)


def run_smoothing(cfg, out):
    if cfg.dt is None:
        cfg.dt = dg.smoothing_dt(cfg.N, cfg.T)
    rep = dg.smoothing_experiment(cfg.s, cfg.parsed_a(), cfg.amplitude, cfg.seed, cfg.T, cfg.s1_grid, p=_params(cfg))
    files = [
        _write(out, "smoothing.json", rep.to_json()),
        _write(out, "smoothing.csv", dg.long_table_csv(rep.to_long_rows())),
    ]
    return files, {"empirical_gain": rep.empirical_gain, "gain_v": rep.gain_v}, EXIT_OK


def run_resonance_scan(cfg, out):
    rc = compute_coefficients(cfg.parsed_a())
    r = rc.exact_roots[0] if rc.is_rational_case else rc.r1
    table = min_resonance_gap(r, cfg.K)
    mu = mu_of_coefficients(cfg.parsed_a(), rc, user_mu=cfg.mu)
    summary = {
        "r1": str(r),
        "rational_case": rc.rational_case,
        "zeros": table.zeros.tolist(),
        "fitted_exponent": table.fitted_exponent,
        "mu": mu.value,
        "mu_provenance": mu.provenance,
        "critical_index": critical_index(mu),
    }
    try:
        summary["smoothing_gain"] = smoothing_gain(cfg.s, mu, rc.is_rational_case)
    except DomainError as exc:
        summary["smoothing_gain"] = None
        summary["smoothing_gain_note"] = str(exc)
    return [_write(out, "gaps.csv", table.to_csv())], summary, EXIT_OK


def _h1_data(cfg, n):
    # h1_radius is the H^1 x H^1 norm of the pair, split evenly
    r = cfg.h1_radius / math.sqrt(2)
    return [dg.random_sobolev_data(cfg.N, cfg.s, 1.0, cfg.seed + i, normalize=(1.0, r)) for i in range(n)]


def run_dissipative(cfg, out):
    p = _dissipative_params(cfg)
    every = cfg.sample_every or max(1, p.n_steps // 400)
    reports = []
    rows = []
    for i, data in enumerate(_h1_data(cfg, cfg.n_data)):
        traj = simulate(data, p, sample_every=every)
        rep = dg.dissipative_energy_check(traj, p)
        reports.append({"seed": cfg.seed + i, "ok": rep.ok, "min_margin": rep.min_margin})
        rows.extend((t, f"{q}_{i}", x) for t, q, x in rep.to_long_rows())
    ball = dg.absorbing_ball_probe(_h1_data(cfg, cfg.n_data), p, sample_every=every, jobs=cfg.jobs)
    files = [
        _write(out, "dissipative.json", json.dumps({"runs": reports, "absorbing": ball.to_dict()})),
        _write(out, "dissipative.csv", dg.long_table_csv(rows)),
    ]
    ok = all(r["ok"] for r in reports)
    return files, {"all_ok": ok, "absorbed": ball.all_enter_and_stay, "radius": ball.radius}, EXIT_OK


def run_attractor(cfg, out):
    p = _dissipative_params(cfg)
    rc = compute_coefficients(cfg.parsed_a())
    data = _h1_data(cfg, 1)[0]
    traj = simulate(data, p, sample_every=cfg.sample_every or max(1, p.n_steps // 1000))
    rep = dg.attractor_regularity_probe(traj, p, cfg.alpha, rc)
    entry = dg.absorbing_entry(traj, dg.absorbing_radius(p))
    files = [
        _write(out, "attractor.json", json.dumps({**rep.to_dict(), "absorbing": entry.__dict__})),
        _write(out, "attractor.csv", dg.long_table_csv(rep.to_long_rows())),
    ]
    return files, {"trend_slope": rep.trend_slope, "entry_time": entry.entry_time, "stays": entry.stays}, EXIT_OK


def run_oracle_test(cfg, out):
    results = run_oracle_suites(N=cfg.N, trials=20, seed=cfg.seed)
    files = [_write(out, "oracle.json", json.dumps(results))]
    ok = all(r["ok"] for r in results.values())
    return files, {"all_ok": ok}, EXIT_OK if ok else EXIT_TEST_FAILURE


_RUNNERS = {
    "simulate": run_simulate,
    "verify-normal-form": run_verify,
    "smoothing": run_smoothing,
    "resonance-scan": run_resonance_scan,
    "dissipative": run_dissipative,
    "attractor": run_attractor,
    "oracle-test": run_oracle_test,
}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(type(x))


def run(cfg):
    """Execute one configured run; returns the exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, files, summary, error = EXIT_OK, [], {}, None
    try:
        files, summary, status = _RUNNERS[cfg.mode](cfg, out)
    except BlowUpError as exc:
        status, error = EXIT_BLOWUP, str(exc)
        summary = {"blowup_time": exc.time, "max_abs": exc.max_abs}
    except ConfigurationError as exc:
        status, error = EXIT_CONFIG, str(exc)
    manifest = {
        "config": asdict(cfg),
        "version": __version__,
        "wall_time": time.perf_counter() - t0,
        "status": status,
        "error": error,
        "outputs": files,
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
    if error:
        print(f"hirota: {error}", file=sys.stderr)
    return status


def main(argv=None):
    try:
        cfg = config_from_args(argv)
    except ConfigurationError as exc:
        print(f"hirota: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
