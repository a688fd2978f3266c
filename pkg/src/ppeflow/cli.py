"""Command-line entry point.

Exit codes: 0 success, 1 numerical failure (including a failed wedge check
or an unconverged steady state), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench, io
from .config import COMMANDS, SCHEMA, ConfigError, RunConfig, load_config, parse_value
from .imex import imex111, imex443, load_pair, raster_region, wedge_check
from .verify.cases import CASES, get_case
from .verify.convergence import convergence_study

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

CASE_MODES = {
    "vhe": "spatial",
    "stokes-spatial": "spatial",
    "stokes-temporal": "temporal",
    "full-square": "coupled",
    "nonlinear-advdiff": "spatial",
    "full-ns": "coupled",
}
FIRST_LEVEL = 4  # coarsest mesh has n = 4 cells per side
FIRST_DT_EXPONENT = 7  # temporal studies start at dt = 2^-7

log = logging.getLogger("ppeflow")


def _typed(key):
    def conv(text):
        try:
            return parse_value(key, text)
        except ConfigError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = SCHEMA[key][0].__name__
    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppeflow", description="PPE Navier-Stokes solver with electric boundary conditions.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", metavar="{convergence,stability,cavity,step,run}")

    c = sub.add_parser("convergence", help="manufactured-solution convergence table as CSV")
    c.add_argument("--case", required=True, type=_typed("case"), help=f"one of {', '.join(CASES)}")
    c.add_argument("--r", required=True, type=_typed("r"))
    c.add_argument("--levels", required=True, type=_typed("levels"))
    c.add_argument("--lambda", dest="lam", type=_typed("lambda"))
    c.add_argument("--dt-factor", dest="dt_factor", type=_typed("dt_factor"))
    c.add_argument("--n", type=_typed("n"), help="fixed mesh for temporal studies (default 32)")
    c.add_argument("--T", type=_typed("T"))
    c.add_argument("--output", type=_typed("output"), help="CSV path (default stdout)")

    s = sub.add_parser("stability", help="wedge check and stability raster of an IMEX pair")
    s.add_argument("--scheme", required=True, type=_typed("scheme"))
    s.add_argument("--alpha-max", dest="alpha_max", type=_typed("alpha_max"), default=1e4)
    s.add_argument("--grid", type=_typed("grid"), default=200)
    s.add_argument("--raster", type=_typed("raster"), help="CSV of |R| on [0, 2]^2")
    s.add_argument("--pgm", type=_typed("pgm"), help="PGM image of the same raster")

    cav = sub.add_parser("cavity", help="lid-driven cavity to steady state")
    cav.add_argument("--re", required=True, type=_typed("re"))
    cav.add_argument("--n", type=_typed("n"), default=64)
    cav.add_argument("--r", type=_typed("r"), default=3)
    cav.add_argument("--lambda", dest="lam", type=_typed("lambda"), default=10.0)
    cav.add_argument("--dt-factor", dest="dt_factor", type=_typed("dt_factor"), default=0.8)
    cav.add_argument("--tol", type=_typed("tol"), default=bench.STEADY_TOL)
    cav.add_argument("--max-steps", dest="max_steps", type=_typed("max_steps"), default=200000)
    cav.add_argument("--output", type=_typed("output"), help="centerline profile CSV")
    cav.add_argument("--vtk", type=_typed("vtk"))

    st = sub.add_parser("step", help="backward-facing step to steady state; prints L1/S")
    st.add_argument("--re", required=True, type=_typed("re"))
    st.add_argument("--hmin", dest="h_min", type=_typed("h_min"), default=1.7028e-2)
    st.add_argument("--L", type=_typed("L"), default=8.0)
    st.add_argument("--r", type=_typed("r"), default=3)
    st.add_argument("--lambda", dest="lam", type=_typed("lambda"), default=10.0)
    st.add_argument("--dt-factor", dest="dt_factor", type=_typed("dt_factor"), default=0.02)
    st.add_argument("--tol", type=_typed("tol"), default=bench.STEADY_TOL)
    st.add_argument("--max-steps", dest="max_steps", type=_typed("max_steps"), default=10**7)
    st.add_argument("--vtk", type=_typed("vtk"))

    rn = sub.add_parser("run", help="run the command described by a key = value file")
    rn.add_argument("--config", required=True)
    return ap


def _pair(scheme: str):
    if scheme == "imex443":
        return imex443()
    if scheme == "imex111":
        return imex111()
    try:
        return load_pair(scheme[len("file:"):])
    except OSError as exc:
        raise ConfigError(f"cannot read tableau: {exc}") from None


def _spec_kw(cfg: RunConfig) -> dict:
    kw = {}
    if cfg.pressure_form:
        kw["pressure_form"] = cfg.pressure_form
    if cfg.solver:
        kw["solver"] = cfg.solver
    return kw


def _require(cfg: RunConfig, *keys):
    missing = [k for k in keys if getattr(cfg, "lam" if k == "lambda" else k) is None]
    if missing:
        raise ConfigError(f"{cfg.command}: missing {', '.join(missing)}")


def cmd_convergence(cfg: RunConfig) -> int:
    _require(cfg, "case", "r", "levels")
    case = get_case(cfg.case)
    mode = CASE_MODES[cfg.case]
    kw = dict(lam=cfg.lam, mode=mode, T=cfg.T, **_spec_kw(cfg))
    if mode == "temporal":
        kw["dts"] = [2.0 ** -(FIRST_DT_EXPONENT + k) for k in range(cfg.levels)]
        kw["n_fixed"] = cfg.n or 32
    else:
        kw["levels"] = [FIRST_LEVEL * 2**k for k in range(cfg.levels)]
        kw["dt_factor"] = cfg.dt_factor
    table = convergence_study(case, cfg.r, **kw)
    table.write_csv(cfg.output if cfg.output else sys.stdout)
    for level, msg in table.failures:
        print(f"level {level} failed: {msg}", file=sys.stderr)
    return EXIT_NUMERIC if table.failures else EXIT_OK


def cmd_stability(cfg: RunConfig) -> int:
    _require(cfg, "scheme")
    pair = _pair(cfg.scheme)
    res = wedge_check(pair, cfg.alpha_max or 1e4, cfg.grid or 200)
    if res.passed:
        print(f"wedge: PASS ({pair.name}, max |R| = {res.max_abs_R:.15g}, {res.samples} samples)")
    else:
        a, b = res.violation
        print(f"wedge: FAIL ({pair.name}) at alpha={a:.6g}, beta={b:.6g}")
    if cfg.raster or cfg.pgm:
        raster = raster_region(pair)
        if cfg.raster:
            io.write_raster_csv(raster, cfg.raster)
        if cfg.pgm:
            io.write_pgm(raster, cfg.pgm)
    return EXIT_OK if res.passed else EXIT_NUMERIC


def _progress(step, state, res):
    if step % 500 == 0:
        log.info("step %d t=%.4f residual %.3e", step, state.t, res)


def cmd_cavity(cfg: RunConfig) -> int:
    nu = cfg.viscosity
    if nu is None:
        raise ConfigError("cavity: missing re or nu")
    out = bench.run_cavity(1.0 / nu, n=cfg.n or 64, r=cfg.r or 3, dt_factor=cfg.dt_factor or 0.8,
                           lam=10.0 if cfg.lam is None else cfg.lam, tol=cfg.tol or bench.STEADY_TOL,
                           max_steps=cfg.max_steps or 200000, callback=_progress, **_spec_kw(cfg))
    if cfg.output:
        io.write_profiles_csv(out.profiles, cfg.output)
    if cfg.vtk:
        io.write_vtk(out.state, out.disc, cfg.vtk)
    print(f"cavity: steps={out.steps} t={out.state.t:.6g} residual={out.residual:.3e} converged={out.converged}")
    return EXIT_OK if out.converged else EXIT_NUMERIC


def cmd_step(cfg: RunConfig) -> int:
    nu = cfg.viscosity
    if nu is None:
        raise ConfigError("step: missing re or nu")
    out = bench.run_step(1.0 / nu, L=cfg.L or 8.0, h_min=cfg.h_min or 1.7028e-2, r=cfg.r or 3,
                         dt_factor=cfg.dt_factor or 0.02, lam=10.0 if cfg.lam is None else cfg.lam,
                         tol=cfg.tol or bench.STEADY_TOL, max_steps=cfg.max_steps or 10**7,
                         callback=_progress, **_spec_kw(cfg))
    if cfg.vtk:
        io.write_vtk(out.state, out.disc, cfg.vtk)
    print(f"step: L1/S = {out.ratio:.6g} (steps={out.steps}, residual={out.residual:.3e}, converged={out.converged})")
    return EXIT_OK if out.converged else EXIT_NUMERIC


HANDLERS = {"convergence": cmd_convergence, "stability": cmd_stability, "cavity": cmd_cavity, "step": cmd_step}


def execute(cfg: RunConfig) -> int:
    if cfg.command not in COMMANDS:
        raise ConfigError("config must set command")
    return HANDLERS[cfg.command](cfg)


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    for k, v in vars(ns).items():
        if k not in ("command", "verbose") and hasattr(cfg, k):
            setattr(cfg, k, v)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = load_config(ns.config) if ns.command == "run" else _config_from_args(ns)
        return execute(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, bench.ReattachmentError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
