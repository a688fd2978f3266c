"""Convergence studies in space, time, or both, with successive log2 rates."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..imex import ImexPair, imex443
from ..solver import Discretization, run
from .cases import ManufacturedCase
from .errors import QUANTITIES, ErrorRecord, compute_errors

log = logging.getLogger(__name__)


def rates(errors) -> list[float]:
    """``log2(e_{k-1} / e_k)``; NaN where either error is zero or missing."""
    e = np.asarray(errors, dtype=float)
    out = [math.nan]
    for a, b in zip(e[:-1], e[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 and np.isfinite(a) and np.isfinite(b) else math.nan)
    return out


@dataclass
class ConvergenceTable:
    case: str
    r: int
    mode: str
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (level, message)

    def errors(self, q: str, norm: str = "l2") -> list[float]:
        return [getattr(rec, norm)[q] for rec in self.records]

    def rates(self, q: str, norm: str = "l2") -> list[float]:
        return rates(self.errors(q, norm))

    def final_rate(self, q: str, norm: str = "l2") -> float:
        return self.rates(q, norm)[-1]

    def write_csv(self, path_or_file, norm: str = "l2", quantities=QUANTITIES) -> None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            w = csv.writer(fh)
            header = ["dx", "dt"]
            for q in quantities:
                header += [q, f"{q}_rate"]
            w.writerow(header)
            rt = {q: self.rates(q, norm) for q in quantities}
            for k, rec in enumerate(self.records):
                row = [_fmt(rec.dx), _fmt(rec.dt)]
                for q in quantities:
                    row += [_fmt(getattr(rec, norm)[q]), _fmt(rt[q][k])]
                w.writerow(row)
        finally:
            if own:
                fh.close()


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.5e}"


def run_level(case: ManufacturedCase, n: int, r: int, dt: float, T: float, lam: float | None = None,
              pair: ImexPair | None = None, **spec_overrides) -> ErrorRecord:
    mesh = case.mesh(n)
    spec = case.problem(mesh, lam, **spec_overrides)
    disc = Discretization(mesh, r, spec)
    res = run(spec, mesh, r, dt, T, pair or imex443(), disc=disc)
    return compute_errors(res.state, case, disc, dx=1.0 / n, dt=dt)


def convergence_study(case: ManufacturedCase, r: int, levels=None, dts=None, mode: str = "spatial",
                      lam: float | None = None, pair: ImexPair | None = None, n_fixed: int = 32,
                      dt_factor: float | None = None, T: float | None = None,
                      **spec_overrides) -> ConvergenceTable:
    """Run one simulation per level.

    ``spatial``: ``levels`` are mesh counts ``n`` at the case's fixed ``dt``.
    ``temporal``: ``dts`` on the ``n_fixed`` mesh. ``coupled``: ``dt = dt_factor / n``.
    Failed levels are recorded and the partial table is returned.
    """
    T = case.T if T is None else T
    table = ConvergenceTable(case.name, r, mode)
    if mode == "spatial":
        jobs = [(n, case.dt if case.dt is not None else (case.dt_factor or 0.2) / n) for n in levels]
    elif mode == "temporal":
        jobs = [(n_fixed, dt) for dt in dts]
    elif mode == "coupled":
        f = dt_factor if dt_factor is not None else (case.dt_factor or 0.2)
        jobs = [(n, f / n) for n in levels]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    prev = None
    for n, dt in jobs:
        if prev is not None and mode != "temporal" and n <= prev:
            raise ValueError("refinement levels must increase")
        prev = n
        try:
            rec = run_level(case, n, r, dt, T, lam, pair, **spec_overrides)
        except ArithmeticError as exc:
            log.error("level n=%d dt=%g failed: %s", n, dt, exc)
            table.failures.append(((n, dt), str(exc)))
            break
        log.info("n=%d dt=%.3g u=%.3e", n, dt, rec.l2["u"])
        table.records.append(rec)
    return table
