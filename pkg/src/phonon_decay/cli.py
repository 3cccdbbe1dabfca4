"""Command-line front end: ``phonon-decay <subcommand> --config FILE``.

Every subcommand writes CSV tables into the output directory plus a
``manifest.json`` listing them. Exit status 1 is a configuration or usage
error, 2 a numerical failure and 3 an I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import units as u
from .config import Config, ConfigError, default_config, load_config
from .coupling import ContinuumBank, CouplingError, force_matrix
from .dynamics import (DynamicsError, LevelSubset, build_generator, evolve, rate_evolve,
                       shift_matrix)
from .potential import DomainError
from .rates import (_nbar_omega, adsorption_rates, depletion_rates, free_free_rates,
                    log_quadrature, rate_matrices, rate_prefactor, thermal_adsorption,
                    thermal_free_free, thermal_free_free_density)
from .shifts import ShiftError, frequency_shift
from .spectrum import (SpectrumCatalog, SpectrumError, load_catalog, save_catalog,
                       solve_bound_spectrum)

log = logging.getLogger("phonon_decay")

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3
CACHE_ENV = "PHONON_DECAY_CACHE"

_NUMERICAL = (SpectrumError, CouplingError, ShiftError, DynamicsError, DomainError,
              ArithmeticError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


# ------------------------------------------------------------------ helpers


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.11e}"


class Run:
    """State shared by one invocation: config, catalog cache and outputs."""

    def __init__(self, config: Config, out_dir: Path, command: str, overrides: dict):
        self.config = config
        self.out_dir = out_dir
        self.command = command
        self.overrides = overrides
        self.outputs: list[str] = []
        self.catalog_path: Path | None = None
        self._catalog: SpectrumCatalog | None = None
        self._bank: ContinuumBank | None = None

    @property
    def cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        return Path(env) if env else self.out_dir / "cache"

    def catalog(self) -> SpectrumCatalog:
        if self._catalog is not None:
            return self._catalog
        key = self.config.spectrum_hash()
        path = self.cache_dir / f"catalog-{key}.bin"
        self.catalog_path = path
        if path.exists():
            cat = load_catalog(path)
            if cat.config_hash == key:
                log.info("catalog loaded from %s", path)
                self._catalog = cat
                return cat
            log.warning("catalog %s has hash %s, expected %s; rebuilding", path, cat.config_hash, key)
        log.info("solving the bound spectrum")
        cat = solve_bound_spectrum(self.config)
        force_matrix(cat)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_catalog(cat, path)
        log.info("catalog saved to %s", path)
        self._catalog = cat
        return cat

    def bank(self) -> ContinuumBank:
        if self._bank is None:
            self._bank = ContinuumBank(self.catalog())
        return self._bank

    def solid(self, temperature: float | None = None):
        s = self.config.solid
        return s if temperature is None else s.at_temperature(temperature)

    def write(self, name: str, columns, rows, note: str = "") -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"# phonon_decay {__version__} config {self.config.physics_hash()}\n")
            if note:
                fh.write(f"# {note}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.outputs.append(str(path))
        return path

    def manifest(self, wall: float) -> Path:
        path = self.out_dir / "manifest.json"
        data = {
            "version": __version__,
            "config_hash": self.config.physics_hash(),
            "catalog_path": str(self.catalog_path) if self.catalog_path else None,
            "subcommand": self.command,
            "overrides": self.overrides,
            "outputs": self.outputs,
            "wall_time_s": round(wall, 3),
        }
        path.write_text(json.dumps(data, indent=1) + "\n")
        return path


def _per_hz(density_per_rad):
    # a density per rad/s of final energy is 2 pi times the density per Hz
    return u.TWO_PI * np.asarray(density_per_rad)


def _floats(text: str | None, scale: float = 1.0):
    if text is None:
        return None
    try:
        return [float(v) * scale for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def _ints(text: str):
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"cannot parse index list {text!r}") from None


def _check_level(cat, nu):
    if not 0 <= nu < len(cat):
        raise UsageError(f"level {nu} is not in the catalog ({len(cat)} levels)")


# -------------------------------------------------------------- subcommands


def cmd_spectrum(run: Run, args):
    cat = run.catalog()
    xc = cat.crossings()
    rows = [(s.nu, u.hz(s.energy), x * 1e9) for s, x in zip(cat.states, xc)]
    run.write("spectrum.csv", ["nu", "energy_hz", "x_cross_nm"], rows)


def cmd_elements(run: Run, args):
    cat = run.catalog()
    force = force_matrix(cat)
    e = cat.energies
    top = len(cat) if args.max_nu is None else min(len(cat), args.max_nu + 1)
    rows = []
    for a in range(top):
        for b in range(a + 1, top):
            rows.append((a, b, u.HBAR * force[a, b], u.hz(e[b] - e[a])))
    run.write("elements.csv", ["nu", "nu_prime", "F_si", "omega_hz"], rows,
              "F_si in newtons; omega_hz = (E_nu_prime - E_nu) / h")


def cmd_rates(run: Run, args):
    cat = run.catalog()
    nu = args.from_nu
    _check_level(cat, nu)
    solid = run.solid(args.temperature)
    rs = rate_matrices(cat, solid)
    e = cat.energies
    rows = []
    for mu in range(len(cat)):
        if mu == nu:
            continue
        omega = e[nu] - e[mu]
        re = rs.emission[mu, nu] if mu < nu else 0.0
        ra = rs.absorption[mu, nu] if mu > nu else 0.0
        rows.append((mu, u.hz(omega), re, ra, "bound"))
    top = e[nu] + solid.omega_debye
    if top > 0 and not args.bound_only:
        bank = run.bank()
        energies, _ = log_quadrature(0.0, top, args.free_nodes, min(top, u.from_hz(1e3)))
        k = rate_prefactor(solid)
        for ef in energies:
            f = bank.bound_column(ef)[nu]
            ra = k * _nbar_omega(ef - e[nu], solid.temperature) * f * f
            rows.append((u.hz(ef), u.hz(e[nu] - ef), 0.0, float(_per_hz(ra)), "free"))
    run.write(f"rates_from_{nu}.csv", ["nu_prime_or_Ef", "omega_hz", "Re", "Ra", "final"], rows,
              f"T = {solid.temperature!r} K; bound rows in 1/s, free rows in 1/s per Hz of Ef")


def cmd_depletion(run: Run, args):
    cat = run.catalog()
    solid = run.solid(args.temperature)
    bank = None if args.bound_only else run.bank()
    dep = depletion_rates(cat, solid, bank, include_free=not args.bound_only)
    rows = [(s.nu, dep.gamma_e[i], dep.gamma_a[i], dep.gamma_a_bound[i], dep.gamma_a_free[i])
            for i, s in enumerate(cat.states)]
    suffix = f"_{_tag(solid.temperature)}K" if args.temperature is not None else ""
    run.write(f"depletion{suffix}.csv", ["nu", "gamma_e", "gamma_a", "gamma_a_bound", "gamma_a_free"],
              rows, f"T = {solid.temperature!r} K")


def _tag(value: float) -> str:
    return f"{value:g}".replace(".", "p")


def _ef_mesh(run: Run, args):
    ef = _floats(args.Ef, u.TWO_PI)
    if ef is None and args.T0 is None:
        cfg = run.config
        ef = list(np.geomspace(cfg.continuum_emax * 1e-3, cfg.continuum_emax, cfg.continuum_mesh))
    return ef


def cmd_adsorption(run: Run, args):
    cat = run.catalog()
    bank = run.bank()
    solid = run.solid(args.temperature)
    length = args.L if args.L is not None else run.config.box_length
    ef = _ef_mesh(run, args)
    if ef:
        rows, levels = [], []
        for x in ef:
            g, total = adsorption_rates(x, bank, solid, length)
            rows.append((u.hz(x), total))
            levels += [(u.hz(x), s.nu, u.hz(s.energy), g[i]) for i, s in enumerate(cat.states)]
        run.write("adsorption_Ef.csv", ["Ef_hz", "G_f"], rows, f"T = {solid.temperature!r} K; L = {length!r} m")
        run.write("adsorption_Ef_levels.csv", ["Ef_hz", "nu", "energy_hz", "G_nu_f"], levels)
    t0 = _floats(args.T0)
    if t0:
        order = args.order or run.config.laguerre_order
        rows, levels = [], []
        for t in t0:
            g, total = thermal_adsorption(t, bank, solid, length, order)
            rows.append((t, total))
            levels += [(t, s.nu, u.hz(s.energy), g[i]) for i, s in enumerate(cat.states)]
        run.write("adsorption_T0.csv", ["T0_k", "G_T0"], rows, f"T = {solid.temperature!r} K; L = {length!r} m")
        run.write("adsorption_T0_levels.csv", ["T0_k", "nu", "energy_hz", "G_nu_T0"], levels)


def cmd_freefree(run: Run, args):
    bank = run.bank()
    solid = run.solid(args.temperature)
    length = args.L if args.L is not None else run.config.box_length
    ef = _ef_mesh(run, args)
    if ef:
        rows, dens = [], []
        for x in ef:
            ff = free_free_rates(x, bank, solid, length, args.nodes)
            rows.append((u.hz(x), ff.q_e, ff.q_a))
            dens += [(u.hz(x), u.hz(y), "down", d) for y, d in zip(ff.final_down, _per_hz(ff.density_down))]
            dens += [(u.hz(x), u.hz(y), "up", d) for y, d in zip(ff.final_up, _per_hz(ff.density_up))]
        run.write("freefree_Ef.csv", ["Ef_hz", "Q_e", "Q_a"], rows, f"T = {solid.temperature!r} K; L = {length!r} m")
        run.write("freefree_Ef_density.csv", ["Ef_hz", "Ef_final_hz", "direction", "Q_per_hz"], dens)
    t0 = _floats(args.T0)
    if t0:
        order = args.order or run.config.laguerre_order
        rows = []
        for t in t0:
            tf = thermal_free_free(t, bank, solid, length, order, args.nodes, args.mesh)
            rows.append((t, tf.q_e, tf.q_a))
        run.write("freefree_T0.csv", ["T0_k", "Q_e", "Q_a"], rows, f"T = {solid.temperature!r} K; L = {length!r} m")
        finals = _floats(args.final)
        if finals:
            dens = []
            for t in t0:
                for y in finals:
                    qe, qa = thermal_free_free_density(y * u.TWO_PI, t, bank, solid, length)
                    dens.append((t, y, float(_per_hz(qe)), float(_per_hz(qa))))
            run.write("freefree_T0_density.csv", ["T0_k", "Ef_hz", "Q_e_per_hz", "Q_a_per_hz"], dens)


def _read_pairs(path: str | None, pair):
    pairs = []
    if pair:
        pairs.append(tuple(pair))
    if path:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].replace(",", " ").split()
            if not line:
                continue
            if len(line) != 2:
                raise UsageError(f"{path}:{lineno}: expected two level indices")
            pairs.append((int(line[0]), int(line[1])))
    if not pairs:
        raise UsageError("shifts needs --pairs FILE or --pair L K")
    return pairs


def cmd_shifts(run: Run, args):
    cat = run.catalog()
    solid = run.solid(args.temperature)
    rows = []
    for l, k in _read_pairs(args.pairs, args.pair):
        _check_level(cat, l)
        _check_level(cat, k)
        res = frequency_shift(cat, l, k, solid, None if args.bound_only else run.bank(),
                              include_free=not args.bound_only)
        rows.append((l, k, u.hz(res.delta_zero), u.hz(res.delta_thermal), u.hz(res.total),
                     res.pv_refinement, u.hz(res.truncation_residual)))
    run.write("shifts.csv", ["l", "k", "delta0_hz", "deltaT_hz", "total_hz", "pv_refinement",
                             "truncation_residual_hz"], rows, f"T = {solid.temperature!r} K")


def _initial_rho(spec: str, n: int) -> np.ndarray:
    kind, _, body = spec.partition(":")
    if not body:
        kind, body = "populations", spec
    vals = _floats(body)
    if kind == "populations":
        if len(vals) != n:
            raise UsageError(f"--rho0 needs {n} populations")
        return np.diag(np.asarray(vals, dtype=complex))
    if kind == "superposition":
        idx = [int(v) for v in vals]
        if any(not 0 <= i < n for i in idx) or len(set(idx)) != len(idx) or not idx:
            raise UsageError("--rho0 superposition indices must be distinct subset positions")
        psi = np.zeros(n, dtype=complex)
        psi[idx] = 1.0 / math.sqrt(len(idx))
        return np.outer(psi, psi.conj())
    raise UsageError(f"unknown --rho0 form {kind!r}")


def cmd_evolve(run: Run, args):
    cat = run.catalog()
    solid = run.solid(args.temperature)
    subset = LevelSubset.from_catalog(cat, _ints(args.subset))
    n = len(subset)
    rho0 = _initial_rho(args.rho0, n)
    bank = None if args.bound_only else run.bank()
    shifts = shift_matrix(cat, subset, solid, bank=bank, include_free=not args.bound_only) \
        if args.shifts else None
    gen = build_generator(cat, subset, solid, include_free=not args.bound_only, bank=bank,
                          shifts=shifts, include_offdiagonal_gain=args.offdiagonal_gain)
    loss = float(gen.loss.max())
    t_final = args.t_final if args.t_final is not None else (10.0 / loss if loss > 0 else 1e-9)
    names = [f"p_{nu}" for nu in subset.indices]
    if args.rate_only:
        times = np.linspace(0.0, t_final, args.samples + 1)
        tr = rate_evolve(rho0.diagonal().real, gen, times)
        rows = [(t, *p, lk) for t, p, lk in zip(tr.times, tr.populations, tr.leaked)]
        run.write("evolve.csv", ["t_s", *names, "leaked"], rows)
        return
    dt = args.dt if args.dt is not None else 0.1 / gen.max_frequency()
    steps = max(1, math.ceil(t_final / dt - 1e-9))
    tr = evolve(rho0, gen, t_final, dt, sample_every=max(1, steps // args.samples))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if abs(rho0[a, b]) > 0]
    coh = [f"abs_rho_{subset.indices[a]}_{subset.indices[b]}" for a, b in pairs]
    rows = []
    for t, r in zip(tr.times, tr.states):
        rows.append((t, *r.diagonal().real, *[abs(r[a, b]) for a, b in pairs]))
    run.write("evolve.csv", ["t_s", *names, *coh], rows, f"T = {solid.temperature!r} K; dt = {t_final / steps!r} s")


def cmd_reproduce(run: Run, args):
    """Every standard table, grouped by topic in subdirectories of the output."""
    base = run.out_dir
    cfg = run.config
    plan = [
        ("spectrum", "spectrum", {}),
        ("bound_rates", "rates", {"from_nu": 280}),
        ("bound_rates", "rates", {"from_nu": 120}),
        ("depletion_300K", "depletion", {}),
        ("depletion_30K", "depletion", {"temperature": 30.0}),
        ("adsorption_energy", "adsorption", {"Ef": "2e6,3.1e12"}),
        ("adsorption_energy", "adsorption", {}),
        ("adsorption_thermal", "adsorption", {"T0": "1e-4,2e-4,3e-4,4e-4"}),
        ("adsorption_thermal", "adsorption", {"T0": "50,100,150,200,250,300,350"}),
        ("freefree_energy", "freefree", {"Ef": "2e6,3.1e12"}),
        ("freefree_thermal", "freefree", {"T0": "1e-4,2e-4,3e-4,4e-4", "final": "1e6,5e6,2e7"}),
        ("freefree_thermal", "freefree", {"T0": "50,100,150,200,250,300,350", "order": 16,
                                          "nodes": 24, "mesh": 24}),
    ]
    for sub, name, extra in plan:
        ns = _defaults(name)
        for k, v in extra.items():
            setattr(ns, k, v)
        run.out_dir = base / sub
        # distinct file names per sweep within one directory
        before = len(run.outputs)
        COMMANDS[name](run, ns)
        if "T0" in extra and float(extra["T0"].split(",")[0]) >= 1.0:
            _rename_last(run, before, "_kelvin")
        elif name == "adsorption" and "Ef" in extra:
            _rename_last(run, before, "_panels")
        elif name == "freefree" and "Ef" in extra:
            _rename_last(run, before, "_panels")
    run.out_dir = base
    log.info("wrote all tables for config %s", cfg.physics_hash())


def _rename_last(run: Run, start: int, suffix: str):
    for i in range(start, len(run.outputs)):
        p = Path(run.outputs[i])
        q = p.with_name(p.stem + suffix + p.suffix)
        p.replace(q)
        run.outputs[i] = str(q)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "elements": cmd_elements,
    "rates": cmd_rates,
    "depletion": cmd_depletion,
    "adsorption": cmd_adsorption,
    "freefree": cmd_freefree,
    "shifts": cmd_shifts,
    "evolve": cmd_evolve,
    "reproduce-figures": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="configuration file; 'builtin' selects the bundled silica/cesium set")
    common.add_argument("--out", default=None, help="output directory (default: out_dir from the config)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    common.add_argument("--temperature", type=float, default=None, help="phonon bath temperature in K")
    common.add_argument("--L", type=float, default=None, help="quantization box length in m")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="phonon-decay", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"phonon_decay {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("spectrum", parents=[common], help="bound levels and crossing points")
    s = sub.add_parser("elements", parents=[common], help="bound-bound force matrix")
    s.add_argument("--max-nu", type=int, default=None)
    s = sub.add_parser("rates", parents=[common], help="transition rates from one bound level")
    s.add_argument("--from-nu", "--from", dest="from_nu", type=int, required=True)
    s.add_argument("--free-nodes", type=int, default=64)
    s.add_argument("--bound-only", action="store_true")
    s = sub.add_parser("depletion", parents=[common], help="per-level depletion rates")
    s.add_argument("--bound-only", action="store_true")
    for name, helptext in (("adsorption", "free-to-bound rates"), ("freefree", "free-to-free rates")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--Ef", default=None, help="comma-separated free energies in Hz")
        s.add_argument("--T0", default=None, help="comma-separated gas temperatures in K")
        s.add_argument("--order", type=int, default=None, help="Gauss-Laguerre order")
        if name == "freefree":
            s.add_argument("--nodes", type=int, default=64, help="final-energy nodes")
            s.add_argument("--mesh", type=int, default=48, help="upper-energy spline mesh")
            s.add_argument("--final", default=None, help="final energies (Hz) for thermal densities")
    s = sub.add_parser("shifts", parents=[common], help="coherence frequency shifts")
    s.add_argument("--pairs", default=None, help="file with one 'l k' pair per line")
    s.add_argument("--pair", type=int, nargs=2, default=None)
    s.add_argument("--bound-only", action="store_true")
    s = sub.add_parser("evolve", parents=[common], help="density-matrix time evolution")
    s.add_argument("--subset", required=True, help="comma-separated bound levels")
    s.add_argument("--rho0", required=True,
                   help="'p0,p1,...' populations or 'superposition:i,j' over subset positions")
    s.add_argument("--t-final", type=float, default=None)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--rate-only", action="store_true")
    s.add_argument("--shifts", action="store_true")
    s.add_argument("--offdiagonal-gain", action="store_true")
    s.add_argument("--bound-only", action="store_true")
    sub.add_parser("reproduce-figures", parents=[common], help="all figure tables")
    return p


def _defaults(name: str) -> argparse.Namespace:
    argv = {"rates": ["--from-nu", "0"], "evolve": ["--subset", "0", "--rho0", "1"]}.get(name, [])
    return build_parser().parse_args([name, "--config", "builtin", *argv])


def _load(path: str) -> Config:
    if path == "builtin":
        return default_config()
    return load_config(path)


def _overrides(args) -> dict:
    skip = {"config", "out", "verbose", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v not in (None, False)}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors, --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        config = _load(args.config)
        if args.threads:
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        out_dir = Path(args.out or config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        r = Run(config, out_dir, args.command, _overrides(args))
        COMMANDS[args.command](r, args)
        r.manifest(time.perf_counter() - start)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        print(f"numerical failure in {type(exc).__module__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
