"""``tpmwb`` command-line frontend.

Every command builds an :class:`OutputTable`; its metadata header echoes the
resolved configuration so the table can be regenerated from it with
``tpmwb <command> --config <file>``.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import ensemble as ens
from . import smallmat as sm
from . import tpm
from .errors import DegenerateFrameError, InputFileError, UsageError
from .propagator import evolve_observable, exact_propagator, sigma_z_t, stepped_trajectory
from .sampler import RngState, empirical_violation_rate, run_batch
from .spinsys import (
    ResonanceParams,
    driven_hamiltonian,
    frame_params,
    gibbs_state,
    magnetization_f,
    quasistatic_deltas,
    static_hamiltonian,
)
from .tables import OutputTable, format_value

COMMANDS = ("workdist", "charfn", "sweep", "ensemble", "sample", "evolve", "check")

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_IO = 0, 1, 2, 3

FIG2_F = 0.5


@dataclass(frozen=True)
class RunConfig:
    command: str
    b0: float = 1.0
    b1: float = 0.1
    omega: float = 0.8
    f: float | None = None
    beta: float | None = None
    t: str = "pi/Omega"
    t_grid: str = "0:2pi/Omega:41"
    n_spins: int = 10
    n_samples: int = 100_000
    seed: int = 0
    steps: int = 10_000
    omega_grid: str = "0.5:1.5:101"
    r_grid: str = "0:2pi:65"
    format: str = "csv"
    out: str | None = None

    @property
    def params(self) -> ResonanceParams:
        if self.beta is not None:
            return ResonanceParams(b0=self.b0, b1=self.b1, omega=self.omega, beta=self.beta)
        return ResonanceParams.from_f(self.b0, self.b1, self.omega, self.f)

    @property
    def magnetization(self) -> float:
        return self.f if self.f is not None else magnetization_f(self.params)

    def echo(self) -> dict:
        """Config fields that reproduce this run (output path excluded)."""
        out = {}
        for fld in fields(self):
            value = getattr(self, fld.name)
            if fld.name in ("command", "out") or value is None:
                continue
            out[fld.name] = value
        return out


_FLOAT_KEYS = {"b0", "b1", "omega", "f", "beta"}
_INT_KEYS = {"n_spins", "n_samples", "seed", "steps"}
_STR_KEYS = {"t", "t_grid", "omega_grid", "r_grid", "format", "out"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="tpmwb", description="Two-point-measurement work statistics for driven spins.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH")
    for key in ("b0", "b1", "omega", "f", "beta"):
        p.add_argument(f"--{key}", type=float)
    p.add_argument("--t", metavar="SPEC")
    p.add_argument("--t-grid", dest="t_grid", metavar="START:STOP:COUNT")
    p.add_argument("--n-spins", dest="n_spins", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--omega-grid", dest="omega_grid", metavar="START:STOP:COUNT")
    p.add_argument("--r-grid", dest="r_grid", metavar="START:STOP:COUNT")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", metavar="PATH")
    return p


def _coerce(key: str, raw: str):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
    except ValueError:
        raise UsageError(f"bad value for {key!r}: {raw!r}") from None
    return raw


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputFileError(f"cannot read config file {path!r}: {exc}") from None
    return parse_config_text(text)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"line {lineno}: expected 'key = value', got {line!r}")
        key = key.strip().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        out[key] = _coerce(key, value.strip())
    return out


def parse_config(argv: list[str] | None = None) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    values = read_config_file(ns.config) if ns.config else {}
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config") and v is not None}
    if "seed" not in values and "seed" not in flags and os.environ.get("TPMWB_SEED"):
        values["seed"] = _coerce("seed", os.environ["TPMWB_SEED"])
    values.update(flags)
    if values.get("f") is not None and values.get("beta") is not None:
        raise UsageError("give exactly one of 'f' and 'beta', not both")
    if values.get("f") is None and values.get("beta") is None:
        values["f"] = FIG2_F
    cfg = RunConfig(command=ns.command, **values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.f is not None and not 0.0 < cfg.f < 1.0:
        raise UsageError(f"'f' must lie in (0, 1), got {cfg.f}")
    for key in ("n_spins", "n_samples", "steps"):
        if getattr(cfg, key) < 1:
            raise UsageError(f"{key!r} must be >= 1, got {getattr(cfg, key)}")
    if cfg.format not in ("csv", "json"):
        raise UsageError(f"'format' must be csv or json, got {cfg.format!r}")
    cfg.params  # constructs and validates the physical parameters


_TIME_TOKEN = re.compile(r"^\s*([-+]?[0-9.]*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\w+))?\s*$")


def resolve_time(spec, p: ResonanceParams) -> float:
    """Number, or ``[k]pi[/Omega|/B1]`` resolved against the drive parameters."""
    if isinstance(spec, (int, float)):
        return float(spec)
    text = str(spec).strip()
    try:
        return float(text)
    except ValueError:
        pass
    m = _TIME_TOKEN.match(text)
    if not m:
        raise UsageError(f"cannot parse time {text!r}")
    k = float(m.group(1)) if m.group(1) not in ("", "+", "-") else (-1.0 if m.group(1) == "-" else 1.0)
    denom = m.group(2)
    if denom is None:
        return k * math.pi
    if denom in ("Omega", "omega_rabi"):
        try:
            rate = frame_params(p).omega_rabi
        except DegenerateFrameError:
            raise UsageError("time token uses Omega but the Rabi frequency is zero") from None
    elif denom.lower() == "b1":
        rate = p.b1
        if rate == 0:
            raise UsageError("time token uses B1 but b1 == 0")
    else:
        raise UsageError(f"unknown time unit {denom!r} (use Omega or B1)")
    return k * math.pi / rate


def parse_grid(spec: str, p: ResonanceParams | None = None) -> np.ndarray:
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be START:STOP:COUNT, got {spec!r}")
    try:
        count = int(parts[2])
    except ValueError:
        raise UsageError(f"grid count must be an integer, got {parts[2]!r}") from None
    if count < 1:
        raise UsageError(f"grid needs at least one point, got {count}")
    if p is None:
        start, stop = float(parts[0]), float(parts[1])
    else:
        start, stop = resolve_time(parts[0], p), resolve_time(parts[1], p)
    return np.linspace(start, stop, count)


def _base_table(cfg: RunConfig, columns: list[str]) -> OutputTable:
    table = OutputTable(columns=columns)
    table.add_meta(command=cfg.command, tpmwb_version=__version__)
    table.add_meta(**cfg.echo())
    return table


def cmd_workdist(cfg: RunConfig) -> OutputTable:
    p, f = cfg.params, cfg.magnetization
    t = resolve_time(cfg.t, p)
    dist = tpm.work_distribution_spin(p, f, t)
    mom = tpm.moments(dist)
    jar = tpm.jarzynski_check(dist, p.beta, 0.0)
    table = _base_table(cfg, ["w", "p"])
    table.rows = [(w, q) for w, q in dist.atoms]
    table.add_meta(
        t_resolved=t,
        beta_resolved=p.beta,
        f_resolved=f,
        transition_probability=tpm.exact_uv(p, t).transition_probability,
        mean_work=mom.mean,
        variance_work=mom.variance,
        delta_f=0.0,
        jarzynski_residual=jar.residual,
        violation_probability=tpm.violation_probability(dist, 0.0),
    )
    return table


def cmd_charfn(cfg: RunConfig) -> OutputTable:
    p, f = cfg.params, cfg.magnetization
    t = resolve_time(cfg.t, p)
    setup = tpm.spin_setup(p, t)
    table = _base_table(cfg, ["r", "re_g", "im_g", "re_g_trace", "im_g_trace"])
    worst = 0.0
    for r in parse_grid(cfg.r_grid, p):
        g = tpm.char_fn_spin(p, f, t, r)
        gt = tpm.char_fn_general(setup, r)
        worst = max(worst, abs(g - gt))
        table.rows.append((float(r), g.real, g.imag, gt.real, gt.imag))
    g_jar = tpm.char_fn_spin(p, f, t, 1j * p.beta)
    table.add_meta(
        t_resolved=t,
        beta_resolved=p.beta,
        f_resolved=f,
        max_path_difference=worst,
        g_i_beta_re=g_jar.real,
        g_i_beta_im=g_jar.imag,
        jarzynski_residual=abs(g_jar - 1.0),
    )
    return table


def cmd_sweep(cfg: RunConfig) -> OutputTable:
    """Peak of the mean work over t (reached at t = pi/Omega) versus drive frequency."""
    f = cfg.magnetization
    table = _base_table(cfg, ["omega", "max_mean_work", "max_transition_probability"])
    best = (-math.inf, math.nan)
    for omega in parse_grid(cfg.omega_grid):
        p = ResonanceParams(b0=cfg.b0, b1=cfg.b1, omega=float(omega), beta=cfg.params.beta)
        try:
            t_star = math.pi / frame_params(p).omega_rabi
        except DegenerateFrameError:
            t_star = 0.0
        mw = tpm.mean_work_spin(p, f, t_star)
        v2 = tpm.exact_uv(p, t_star).transition_probability
        table.rows.append((float(omega), mw, v2))
        if mw > best[0]:
            best = (mw, float(omega))
    table.add_meta(f_resolved=f, peak_mean_work=best[0], peak_omega=best[1])
    return table


def cmd_ensemble(cfg: RunConfig) -> OutputTable:
    p, f = cfg.params, cfg.magnetization
    t = resolve_time(cfg.t, p)
    weights = ens.single_spin_weights(p, f, t)
    e = ens.ensemble_distribution(weights, cfg.n_spins, p.b0)
    g = ens.gaussian_approx(p, f, t, cfg.n_spins)
    dens = g.pdf(e.works) * p.b0 if g.variance > 0 else np.zeros(e.ks.size)
    table = _base_table(cfg, ["k", "w", "gamma_k", "gaussian_pdf_at_k"])
    table.rows = [(int(k), float(w), float(gk), float(gp)) for k, w, gk, gp in zip(e.ks, e.works, e.gammas, dens)]
    table.add_meta(
        t_resolved=t,
        beta_resolved=p.beta,
        f_resolved=f,
        mean_work=e.mean(),
        variance_work=e.variance(),
        gaussian_mean=g.mean,
        gaussian_variance=g.variance,
        gamma_sum=float(math.fsum(e.gammas)),
        violation_probability=ens.ensemble_violation_probability(e, 0.0),
    )
    if g.variance > 0:
        table.add_meta(total_variation_gaussian=ens.total_variation(e, g))
    return table


def cmd_sample(cfg: RunConfig) -> OutputTable:
    p, f = cfg.params, cfg.magnetization
    t = resolve_time(cfg.t, p)
    setup = tpm.spin_setup(p, t)
    stats = run_batch(setup, cfg.n_samples, RngState(cfg.seed))
    exact = tpm.work_distribution_spin(p, f, t)
    counts = stats.atom_counts()
    support = sorted(set(exact.values.tolist()) | set(counts))
    table = _base_table(cfg, ["w", "count", "p_empirical", "p_exact"])
    for w in support:
        c = counts.get(w, 0)
        table.rows.append((w, c, c / stats.count, exact.prob_at(w)))
    table.add_meta(
        t_resolved=t,
        beta_resolved=p.beta,
        f_resolved=f,
        mean_work=stats.mean_work,
        mean_work_standard_error=stats.standard_error_mean,
        jarzynski_estimate=stats.jarzynski_estimate,
        jarzynski_standard_error=stats.standard_error_jarzynski,
        empirical_violation_rate=empirical_violation_rate(stats, 0.0),
    )
    return table


def cmd_evolve(cfg: RunConfig) -> OutputTable:
    p, f = cfg.params, cfg.magnetization
    grid = np.sort(parse_grid(cfg.t_grid, p))
    if grid[0] < 0:
        raise UsageError("t-grid must be non-negative")
    rho = gibbs_state(static_hamiltonian(p), p.beta)
    numeric = stepped_trajectory(lambda ts: driven_hamiltonian(p, ts), grid, cfg.steps, vectorized=True)
    table = _base_table(cfg, ["t", "sigma_z_exact", "sigma_z_numeric", "mean_work_exact", "propagator_error"])
    worst = 0.0
    for t, u_num in zip(grid, numeric):
        u_ex = exact_propagator(p, float(t))
        err = sm.max_norm(u_num.matrix - u_ex.matrix)
        worst = max(worst, err)
        table.rows.append(
            (
                float(t),
                sigma_z_t(p, f, float(t)),
                evolve_observable(sm.SIGMA_Z, u_num, rho),
                tpm.mean_work_spin(p, f, float(t)),
                err,
            )
        )
    table.add_meta(beta_resolved=p.beta, f_resolved=f, max_propagator_error=worst)
    return table


CHECK_TOL = {
    "quasistatic": 1e-10,
    "first_law_rel": 1e-12,
    "jarzynski": 1e-10,
    "second_law": 1e-12,
    "unitarity": 1e-10,
    "charfn_paths": 1e-12,
    "normalization": 1e-12,
}


def run_checks(cfg: RunConfig) -> list[tuple[str, float, float]]:
    """(name, residual, tolerance) for each invariant suite."""
    out = []
    for beta in (0.5, 1.0, 2.0):
        q = quasistatic_deltas(static_hamiltonian, cfg.b0, 1e-6, beta)
        out.append((f"quasistatic_dW_dF_beta{beta:g}", abs(q.delta_w - q.d_f), CHECK_TOL["quasistatic"]))
        out.append((f"quasistatic_dQ_TdS_beta{beta:g}", abs(q.delta_q - q.t_d_s), CHECK_TOL["quasistatic"]))
        first = abs(q.d_u - q.delta_q - q.delta_w) / abs(q.d_u)
        out.append((f"first_law_relative_beta{beta:g}", first, CHECK_TOL["first_law_rel"]))

    p, f = cfg.params, cfg.magnetization
    t = resolve_time(cfg.t, p)
    jar = abs(tpm.char_fn_spin(p, f, t, 1j * p.beta) - 1.0)
    out.append(("jarzynski_spin", jar, CHECK_TOL["jarzynski"]))
    setup = tpm.spin_setup(p, t)
    out.append(("unitarity_exact_propagator", sm.unitary_residual(setup.u.matrix), CHECK_TOL["unitarity"]))
    rs = np.linspace(-7.0, 7.0, 29)
    paths = max(abs(tpm.char_fn_spin(p, f, t, r) - tpm.char_fn_general(setup, r)) for r in rs)
    out.append(("charfn_closed_form_vs_trace", paths, CHECK_TOL["charfn_paths"]))

    rng = np.random.default_rng(cfg.seed)
    jar_worst, second_worst = 0.0, 0.0
    for _ in range(20):
        s = tpm.random_setup(rng, 4)
        z_ratio = math.exp(gibbs_state(s.h_final, s.beta).log_z - s.rho0.log_z)
        jar_worst = max(jar_worst, abs(tpm.char_fn_general(s, 1j * s.beta) - z_ratio) / max(1.0, z_ratio))
        mean = tpm.moments(tpm.work_distribution_general(s)).mean
        second_worst = max(second_worst, s.delta_f() - mean)
    out.append(("jarzynski_general_d4", jar_worst, CHECK_TOL["jarzynski"]))
    out.append(("second_law_general_d4", max(0.0, second_worst), CHECK_TOL["second_law"]))

    e = ens.ensemble_distribution(ens.single_spin_weights(p, f, t), cfg.n_spins, p.b0)
    out.append(("ensemble_normalization", abs(math.fsum(e.gammas) - 1.0), CHECK_TOL["normalization"]))
    return out


def cmd_check(cfg: RunConfig) -> OutputTable:
    table = _base_table(cfg, ["check", "residual", "tolerance", "passed"])
    results = run_checks(cfg)
    table.rows = [(name, res, tol, int(res <= tol)) for name, res, tol in results]
    table.add_meta(all_passed=all(res <= tol for _, res, tol in results))
    return table


HANDLERS = {
    "workdist": cmd_workdist,
    "charfn": cmd_charfn,
    "sweep": cmd_sweep,
    "ensemble": cmd_ensemble,
    "sample": cmd_sample,
    "evolve": cmd_evolve,
    "check": cmd_check,
}


def run(cfg: RunConfig) -> OutputTable:
    return HANDLERS[cfg.command](cfg)


def config_from_metadata(meta: dict[str, str]) -> dict:
    """Recover the config keys echoed into a table header."""
    return {k: _coerce(k, v) for k, v in meta.items() if k in CONFIG_KEYS}


def write_config(values: dict) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in values.items())


def main(argv: list[str] | None = None) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            cfg = parse_config(argv)
            table = run(cfg)
    except UsageError as exc:
        print(f"tpmwb: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputFileError as exc:
        print(f"tpmwb: {exc}", file=sys.stderr)
        return EXIT_IO
    text = table.render(cfg.format)
    try:
        if cfg.out:
            with open(cfg.out, "w", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"tpmwb: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.command == "check" and table.metadata.get("all_passed") != "true":
        print("tpmwb: at least one check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
