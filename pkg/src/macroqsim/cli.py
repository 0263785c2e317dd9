"""Command-line front end.

Usage::

    macroqsim <experiment> --config <path> [--out <dir>] [--threads k] [--seed s ...]

Experiments: ``convergence``, ``identities``, ``lg-chsh``, ``bell-chsh``,
``density``. The configuration is an INI file; see the README for the keys.
Exit status is 0 on success, 2 for configuration or validation errors and 3
for numerical failures.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .devind import (LG_REFERENCE_ANGLES, lg_chsh, lg_orbit_distance, lg_reference_state,
                     lg_reference_value, lg_sigma_scan, no_signalling_residual,
                     optimize_chsh)
from .errors import NumericalError, ValidationError
from .finite_n import (DensityGrid, DickeCoefficients, GridSpec, PointerSpec,
                       finite_distribution, ks_distance)
from .limit_theory import (FockState, hermite_product_lemma_check, identity_report,
                           lemma_f, lemma_g, povm_completeness, single_meas_density)
from .qubit_algebra import ChannelSpec, LimitMeasurement, limit_params, pauli_observable, to_record
from .serialization import dumps

EXPERIMENTS = ("convergence", "identities", "lg-chsh", "bell-chsh", "density")

SCHEMA = {
    "state": {"coefficients", "k", "d", "basis"},
    "observable": {"nx", "ny", "nz", "n0"},
    "channel": {"kind", "strength", "loss_p"},
    "pointer": {"sigma"},
    "finite": {"n_values"},
    "grid": {"x_min", "x_max", "n"},
    "lg": {"sigma", "d", "scan_min", "scan_max", "scan_points"},
    "bell": {"d", "beta_min", "beta_max"},
    "identities": {"random_cases", "max_k"},
    "run": {"seeds", "threads", "out"},
}


class ConfigError(ValidationError):
    pass


# --- configuration ----------------------------------------------------------

def _complex_list(text):
    try:
        return [complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse coefficient list {text!r}") from exc


def _int_list(text):
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc


@dataclass
class ExperimentConfig:
    experiment: str
    coefficients: list | None = None
    basis: str = "dicke"
    observable: dict = field(default_factory=lambda: {"nx": 1.0, "ny": 0.0, "nz": 0.0, "n0": 0.0})
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    sigma: float = 1.0
    n_values: list = field(default_factory=lambda: [50, 200, 800])
    grid: GridSpec = field(default_factory=GridSpec)
    lg_sigma: float = 1.0
    lg_d: int = 3
    scan: tuple = (0.05, 2.0, 40)
    bell_d: int = 3
    bell_beta: tuple = (0.02, 3.0)
    random_cases: int = 100
    max_k: int = 6
    seeds: list = field(default_factory=lambda: list(range(16)))
    threads: int = 1
    out: str = "out"

    def to_record(self):
        return {"experiment": self.experiment,
                "coefficients": None if self.coefficients is None else
                [[c.real, c.imag] for c in self.coefficients],
                "basis": self.basis, "observable": self.observable,
                "channel": to_record(self.channel), "sigma": self.sigma,
                "n_values": self.n_values,
                "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n": self.grid.n},
                "lg": {"sigma": self.lg_sigma, "d": self.lg_d, "scan": list(self.scan)},
                "bell": {"d": self.bell_d, "beta_range": list(self.bell_beta)},
                "identities": {"random_cases": self.random_cases, "max_k": self.max_k},
                "seeds": self.seeds}


def load_config(path, experiment) -> ExperimentConfig:
    """Parse and validate an INI configuration.

    Raises
    ------
    ConfigError
        On unreadable files, unknown sections or keys, or malformed values.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - SCHEMA[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    cfg = ExperimentConfig(experiment)
    try:
        if cp.has_section("state"):
            s = cp["state"]
            cfg.basis = s.get("basis", "dicke")
            if cfg.basis not in ("dicke", "fock"):
                raise ConfigError("state basis must be 'dicke' or 'fock'")
            if "coefficients" in s:
                cfg.coefficients = _complex_list(s["coefficients"])
            elif "k" in s:
                k = s.getint("k")
                d = s.getint("d", k + 1)
                if not 0 <= k < d:
                    raise ConfigError("need 0 <= k < d")
                cfg.coefficients = [1.0 + 0j if i == k else 0j for i in range(d)]
            if cfg.coefficients is not None:
                nrm = np.linalg.norm(cfg.coefficients)
                if abs(nrm - 1) > 1e-10:
                    raise ConfigError(f"state coefficients must have unit norm (got {nrm!r})")
        if cp.has_section("observable"):
            for key in SCHEMA["observable"]:
                if key in cp["observable"]:
                    cfg.observable[key] = cp["observable"].getfloat(key)
        if cp.has_section("channel"):
            c = cp["channel"]
            cfg.channel = ChannelSpec(c.get("kind", "identity"), c.getfloat("strength", 0.0),
                                      c.getfloat("loss_p", 1.0))
        if cp.has_section("pointer"):
            cfg.sigma = cp["pointer"].getfloat("sigma", 1.0)
            PointerSpec(cfg.sigma)
        if cp.has_section("finite"):
            cfg.n_values = _int_list(cp["finite"].get("n_values", "50 200 800"))
            if not cfg.n_values or min(cfg.n_values) < 1:
                raise ConfigError("n_values must be positive integers")
        if cp.has_section("grid"):
            g = cp["grid"]
            cfg.grid = GridSpec(g.getfloat("x_min", -16.0), g.getfloat("x_max", 16.0),
                                g.getint("n", 3201))
        if cp.has_section("lg"):
            g = cp["lg"]
            cfg.lg_sigma = g.getfloat("sigma", 1.0)
            cfg.lg_d = g.getint("d", 3)
            cfg.scan = (g.getfloat("scan_min", 0.05), g.getfloat("scan_max", 2.0),
                        g.getint("scan_points", 40))
        if cp.has_section("bell"):
            g = cp["bell"]
            cfg.bell_d = g.getint("d", 3)
            cfg.bell_beta = (g.getfloat("beta_min", 0.02), g.getfloat("beta_max", 3.0))
        if cp.has_section("identities"):
            g = cp["identities"]
            cfg.random_cases = g.getint("random_cases", 100)
            cfg.max_k = g.getint("max_k", 6)
        if cp.has_section("run"):
            g = cp["run"]
            if "seeds" in g:
                cfg.seeds = _int_list(g["seeds"])
            cfg.threads = g.getint("threads", 1)
            cfg.out = g.get("out", "out")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.sigma > 0 or not cfg.lg_sigma > 0:
        raise ConfigError("sigma must be positive")
    if not 1 <= cfg.lg_d <= 3 or not 1 <= cfg.bell_d <= 3:
        raise ConfigError("optimiser dimension d must be 1, 2 or 3")
    if not 0 < cfg.bell_beta[0] < cfg.bell_beta[1]:
        raise ConfigError("need 0 < beta_min < beta_max")
    if experiment in ("convergence", "density") and cfg.coefficients is None:
        raise ConfigError(f"experiment {experiment!r} needs a [state] section")
    if experiment in ("convergence", "density"):
        if cfg.basis == "dicke" and len(cfg.coefficients) > min(cfg.n_values) + 1:
            raise ConfigError("state dimension exceeds N + 1")
        A = pauli_observable(**cfg.observable)
        limit_params(cfg.channel, A, cfg.sigma)  # raises for diagonal observables
    return cfg


# --- output helpers ---------------------------------------------------------

class Artifacts:
    """Single writer for all files of one run plus the manifest."""

    def __init__(self, out):
        self.out = out
        self.files = []
        os.makedirs(out, exist_ok=True)

    def _path(self, name):
        return os.path.join(self.out, name)

    def json(self, name, obj, params=None):
        with open(self._path(name), "w") as fh:
            fh.write(dumps(obj))
            fh.write("\n")
        self.files.append({"file": name, "parameters": params or {}})

    def csv(self, name, header, rows, params=None):
        with open(self._path(name), "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        self.files.append({"file": name, "parameters": params or {}})

    def density(self, name, grid: DensityGrid, params=None):
        grid.to_csv(self._path(name))
        # re-read and validate what was written
        DensityGrid.from_csv(self._path(name)).check()
        self.files.append({"file": name, "parameters": params or {}})

    def manifest(self, cfg):
        rec = {"experiment": cfg.experiment, "config": cfg.to_record(),
               "versions": {"macroqsim": __version__, "numpy": np.__version__,
                            "scipy": scipy.__version__, "python": platform.python_version()},
               "files": self.files,
               "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
        with open(self._path("manifest.json"), "w") as fh:
            fh.write(dumps(rec))
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


# --- experiments ------------------------------------------------------------

def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def run_convergence(cfg, art):
    A = pauli_observable(**cfg.observable)
    c = np.asarray(cfg.coefficients)
    meas = limit_params(cfg.channel, A, cfg.sigma)
    limit = single_meas_density(FockState.pure(c), meas, cfg.grid)
    ptr = PointerSpec(cfg.sigma)

    def one(N):
        f = finite_distribution(DickeCoefficients.pure(c, N), A, cfg.channel, ptr, cfg.grid)
        return N, f, ks_distance(f, limit)

    res = _map(one, list(cfg.n_values), cfg.threads)
    art.csv("convergence.csv", ["N", "ks_distance"], [(N, ks) for N, _, ks in res],
            {"limit": to_record(meas)})
    art.density("limit_density.csv", limit, {"limit": to_record(meas)})
    for N, f, _ in res:
        art.density(f"finite_density_N{N}.csv", f, {"N": N})
    Ns = np.array([r[0] for r in res], float)
    ks = np.array([r[2] for r in res])
    slope = float(np.polyfit(np.log(Ns), np.log(ks), 1)[0]) if len(Ns) > 1 else None
    art.json("convergence.json", {"limit": to_record(meas), "N": Ns.astype(int).tolist(),
                                  "ks": ks.tolist(), "loglog_slope": slope,
                                  "strictly_decreasing": bool(np.all(np.diff(ks) < 0))})


def identity_suite(seed=0, random_cases=100, max_k=6):
    """Run the special-function identity checks; returns a list of reports."""
    rng = np.random.default_rng(seed)
    reports = []
    # Hermite product lemma
    xs = np.linspace(-6, 6, 61)
    for k in range(5):
        for l in range(k + 1):
            beta, gamma = rng.uniform(0.3, 2.0, 2)
            alpha = np.sqrt(beta**2 + gamma**2)
            r = hermite_product_lemma_check(alpha, beta, gamma, k, l, xs)
            reports.append(identity_report("hermite-product-lemma",
                                           {"k": k, "l": l, "alpha": alpha, "beta": beta,
                                            "gamma": gamma}, r, 1e-8))

    def quad():
        return rng.uniform(0, 1, 4) * np.exp(2j * np.pi * rng.uniform(0, 1, 4))

    worst, worst_p = 0.0, None
    for _ in range(random_cases):
        z = quad()
        for k in range(max_k + 1):
            for l in range(max_k + 1):
                f = lemma_f(k, l, *z)
                g = lemma_g(k, l, *z)
                r = abs(f - g) / max(1.0, abs(f))
                if r >= worst:
                    worst, worst_p = r, {"k": k, "l": l, "args": [[v.real, v.imag] for v in z]}
    reports.append(identity_report("laguerre-f-equals-g", {"cases": random_cases, "max_k": max_k,
                                                           "worst": worst_p}, worst, 1e-8))
    z = quad()
    r1 = max(abs(lemma_f(k + 1, 0, *z) - (z[1] + z[3]) / (k + 1) * lemma_f(k, 0, *z))
             for k in range(11))
    reports.append(identity_report("REC1", {"k_max": 10}, r1, 1e-8))
    r2 = 0.0
    for fn in (lemma_f, lemma_g):
        for k in range(1, 9):
            for l in range(k):
                lhs = fn(k, l + 1, *z)
                rhs = (z[0] + z[2]) / (l + 1) * fn(k, l, *z) + fn(k - 1, l, *z) / (l + 1)
                r2 = max(r2, abs(lhs - rhs))
    reports.append(identity_report("REC2", {"k_max": 8}, r2, 1e-8))
    for beta, D in ((1.0, 64), (2.0, 32), (3.0, 32)):
        r = povm_completeness(LimitMeasurement(beta, rng.uniform(0, 2 * np.pi)), D)
        reports.append(identity_report("povm-completeness", {"beta": beta, "D": D,
                                                             "protected_block": D // 2}, r, 1e-6))
    return reports


def run_identities(cfg, art):
    reports = identity_suite(cfg.seeds[0] if cfg.seeds else 0, cfg.random_cases, cfg.max_k)
    art.json("identities.json", {"reports": reports,
                                 "all_pass": all(r["pass"] for r in reports)},
             {"seed": cfg.seeds[0] if cfg.seeds else 0})


def run_lg(cfg, art, reproduce):
    if reproduce:
        state = lg_reference_state()
        ref = lg_reference_value()
        at1 = lg_chsh(state, LG_REFERENCE_ANGLES, 1.0)
        lo, hi, n = cfg.scan
        s_star, c_star, trace = lg_sigma_scan(state, LG_REFERENCE_ANGLES, lo, hi, n)
        art.csv("lg_sigma_scan.csv", ["sigma", "C"], trace)
        art.json("lg_reproduce.json", {
            "reference_value": ref, "angles": list(LG_REFERENCE_ANGLES),
            "state_amplitudes": np.sqrt(np.real(np.diag(state.rho))).tolist(),
            "C_at_sigma_1": at1.value, "abs_delta_at_sigma_1": abs(at1.value - ref),
            "correlators_at_sigma_1": list(at1.correlators),
            "sigma_star": s_star, "C_at_sigma_star": c_star,
            "abs_delta_at_sigma_star": abs(c_star - ref)})
        return
    out = optimize_chsh("leggett-garg", cfg.lg_d, cfg.seeds, sigma=cfg.lg_sigma,
                        threads=cfg.threads)
    runs = []
    for r in out.runs:
        rec = r.to_record()
        rec["orbit_distance_to_reference_angles"] = lg_orbit_distance(r.settings)
        runs.append(rec)
    art.json("lg_optimize.json", {"best": out.best.to_record(), "runs": runs})
    art.csv("lg_optimize_trace.csv", ["seed", "evaluation", "C"], out.trace)


def run_bell(cfg, art):
    out = optimize_chsh("bell", cfg.bell_d, cfg.seeds, beta_range=cfg.bell_beta,
                        threads=cfg.threads)
    best = out.best
    c = np.asarray(best.extra["amplitudes"])
    xs = np.linspace(-6, 6, 121)
    rng = np.random.default_rng(cfg.seeds[0] if cfg.seeds else 0)
    ns = max(no_signalling_residual(c, best.beta, rng.uniform(0, 2 * np.pi, 2),
                                    rng.uniform(0, 2 * np.pi, 2), xs, xs) for _ in range(5))
    rec = best.to_record()
    rec["no_signalling_residual"] = ns
    rec["violation_margin_over_error"] = ((best.value - 2) / best.error_bound
                                          if best.error_bound > 0 else None)
    art.json("bell_optimize.json", {"best": rec, "runs": [r.to_record() for r in out.runs]})
    art.csv("bell_optimize_trace.csv", ["seed", "evaluation", "S"], out.trace)


def run_density(cfg, art):
    A = pauli_observable(**cfg.observable)
    c = np.asarray(cfg.coefficients)
    meas = limit_params(cfg.channel, A, cfg.sigma)
    limit = single_meas_density(FockState.pure(c), meas, cfg.grid)
    art.density("limit_density.csv", limit, {"limit": to_record(meas)})
    if cfg.basis == "dicke":
        for N in cfg.n_values:
            f = finite_distribution(DickeCoefficients.pure(c, N), A, cfg.channel,
                                    PointerSpec(cfg.sigma), cfg.grid)
            art.density(f"finite_density_N{N}.csv", f, {"N": N})


# --- entry point ------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="macroqsim", description=__doc__.split("\n")[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int, nargs="+")
    p.add_argument("--reproduce-paper", action="store_true",
                   help="lg-chsh only: evaluate the known optimum instead of searching")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config, args.experiment)
        if args.out:
            cfg.out = args.out
        if args.threads:
            cfg.threads = args.threads
        if args.seed:
            cfg.seeds = list(args.seed)
        art = Artifacts(cfg.out)
        if cfg.experiment == "convergence":
            run_convergence(cfg, art)
        elif cfg.experiment == "identities":
            run_identities(cfg, art)
        elif cfg.experiment == "lg-chsh":
            run_lg(cfg, art, args.reproduce_paper)
        elif cfg.experiment == "bell-chsh":
            run_bell(cfg, art)
        else:
            run_density(cfg, art)
        art.manifest(cfg)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
