"""IMEX Runge-Kutta pairs and their linear stability on ``u' = -gamma u + mu u``.

The implicit part is an s-stage DIRK ``(A, b, c)``; the explicit part is an
(s+1)-stage ERK ``(A_hat, b_hat, c_hat)`` with ``c_hat = (0, c)``.
Coefficients are kept as exact fractions and converted to float once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np


class PoleError(ZeroDivisionError):
    """The stage matrix ``I + alpha A~ - beta A^`` is singular."""


def _frac_matrix(rows, n) -> tuple[tuple[Fraction, ...], ...]:
    out = []
    for i in range(n):
        row = list(rows[i]) if i < len(rows) else []
        row = [Fraction(v) for v in row] + [Fraction(0)] * (n - len(row))
        out.append(tuple(row))
    return tuple(out)


@dataclass(frozen=True)
class ImexPair:
    name: str
    A_exact: tuple
    b_exact: tuple
    A_hat_exact: tuple
    b_hat_exact: tuple

    @classmethod
    def from_rows(cls, name, A, b, A_hat, b_hat) -> "ImexPair":
        s = len(b)
        pair = cls(
            name,
            _frac_matrix(A, s),
            tuple(Fraction(v) for v in b),
            _frac_matrix(A_hat, s + 1),
            tuple(Fraction(v) for v in b_hat),
        )
        pair.validate()
        return pair

    @property
    def s(self) -> int:
        return len(self.b_exact)

    @cached_property
    def A(self) -> np.ndarray:
        return np.array(self.A_exact, dtype=float)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array(self.b_exact, dtype=float)

    @cached_property
    def c(self) -> np.ndarray:
        return np.array([sum(row) for row in self.A_exact], dtype=float)

    @cached_property
    def A_hat(self) -> np.ndarray:
        return np.array(self.A_hat_exact, dtype=float)

    @cached_property
    def b_hat(self) -> np.ndarray:
        return np.array(self.b_hat_exact, dtype=float)

    @cached_property
    def c_hat(self) -> np.ndarray:
        return np.array([sum(row) for row in self.A_hat_exact], dtype=float)

    @cached_property
    def A_tilde(self) -> np.ndarray:
        """Implicit tableau padded with a zero first row and column."""
        At = np.zeros((self.s + 1, self.s + 1))
        At[1:, 1:] = self.A
        return At

    @cached_property
    def b_tilde(self) -> np.ndarray:
        return np.concatenate([[0.0], self.b])

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.A)

    @property
    def stiffly_accurate(self) -> bool:
        return self.b_exact == self.A_exact[-1] and self.b_hat_exact == self.A_hat_exact[-1]

    def validate(self) -> None:
        s = self.s
        A, Ah = self.A_exact, self.A_hat_exact
        if any(A[i][j] != 0 for i in range(s) for j in range(i + 1, s)):
            raise ValueError("implicit tableau must be lower triangular")
        if any(Ah[i][j] != 0 for i in range(s + 1) for j in range(i, s + 1)):
            raise ValueError("explicit tableau must be strictly lower triangular")
        if sum(self.b_exact) != 1 or sum(self.b_hat_exact) != 1:
            raise ValueError("weights must sum to one")
        c = [sum(row) for row in A]
        c_hat = [sum(row) for row in Ah]
        if c_hat != [Fraction(0)] + c:
            raise ValueError("explicit abscissae must equal (0, c)")


def imex443() -> ImexPair:
    """The 4-stage, third-order L-stable pair with all implicit diagonals 1/2."""
    F = Fraction
    h = F(1, 2)
    A = [[h], [F(1, 6), h], [-h, h, h], [F(3, 2), F(-3, 2), h, h]]
    b = [F(3, 2), F(-3, 2), h, h]
    A_hat = [
        [],
        [h],
        [F(11, 18), F(1, 18)],
        [F(5, 6), F(-5, 6), h],
        [F(1, 4), F(7, 4), F(3, 4), F(-7, 4)],
    ]
    b_hat = [F(1, 4), F(7, 4), F(3, 4), F(-7, 4), 0]
    return ImexPair.from_rows("imex443", A, b, A_hat, b_hat)


def imex111() -> ImexPair:
    """Forward-backward Euler."""
    return ImexPair.from_rows("imex111", [[1]], [1], [[], [1]], [1, 0])


def load_pair(path: str) -> ImexPair:
    """Read a pair from a text file.

    Format: ``key = value`` lines with keys ``A``, ``b``, ``A_hat``, ``b_hat``;
    matrices as rows separated by ``;``, entries by whitespace or commas;
    entries may be fractions such as ``-7/4``. ``#`` starts a comment.
    """
    fields: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed tableau line: {raw.strip()!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            fields[key] = value
    missing = {"A", "b", "A_hat", "b_hat"} - fields.keys()
    if missing:
        raise ValueError(f"tableau file lacks {sorted(missing)}")

    def vec(text):
        return [Fraction(tok) for tok in text.replace(",", " ").split()]

    def mat(text):
        return [vec(row) for row in text.split(";")]

    return ImexPair.from_rows(fields.get("name", path), mat(fields["A"]), vec(fields["b"]),
                              mat(fields["A_hat"]), vec(fields["b_hat"]))


def stage_matrix(pair: ImexPair, alpha: float, beta: float) -> np.ndarray:
    return np.eye(pair.s + 1) + alpha * pair.A_tilde - beta * pair.A_hat


def stability_function(pair: ImexPair, alpha: float, beta: float) -> float:
    """``R = 1 + (-alpha b~ + beta b^)^T (I + alpha A~ - beta A^)^{-1} e``."""
    R = batched_R(pair, np.array([alpha]), np.array([beta]))[0]
    if np.isnan(R):
        raise PoleError(f"pole of R at ({alpha}, {beta})")
    return float(R)


def stability_function_det(pair: ImexPair, alpha: float, beta: float) -> float:
    """Determinant form of the stability function."""
    M = stage_matrix(pair, alpha, beta)
    den = np.linalg.det(M)
    if den == 0.0:
        raise PoleError(f"pole of R at ({alpha}, {beta})")
    e = np.ones(pair.s + 1)
    num = np.linalg.det(M + np.outer(e, -alpha * pair.b_tilde + beta * pair.b_hat))
    return float(num / den)


@dataclass
class WedgeResult:
    passed: bool
    violation: tuple[float, float] | None
    max_abs_R: float
    samples: int


def wedge_samples(alpha_max: float, n_grid: int, alpha_min: float | None = None):
    """Log-spaced samples of ``{0 < beta <= alpha <= alpha_max}``."""
    if not alpha_max > 0 or n_grid < 2:
        raise ValueError("need alpha_max > 0 and n_grid >= 2")
    lo = alpha_min if alpha_min is not None else alpha_max * 1e-8
    grid = np.geomspace(lo, alpha_max, n_grid)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    keep = B <= A
    return A[keep], B[keep]


def batched_R(pair: ImexPair, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Vectorized linear-solve form; NaN at poles.

    The stage matrix is lower triangular, so forward substitution in extended
    precision keeps |R| accurate to ~1e-15 even at alpha ~ 1e4, where float64
    cancellation would otherwise cost about 1e-12.
    """
    alpha = np.asarray(alpha, dtype=np.longdouble)
    beta = np.asarray(beta, dtype=np.longdouble)
    m = pair.s + 1
    At = pair.A_tilde.astype(np.longdouble)
    Ah = pair.A_hat.astype(np.longdouble)
    y = []
    pole = np.zeros(alpha.shape, dtype=bool)
    for i in range(m):
        acc = np.ones(alpha.shape, dtype=np.longdouble)
        for j in range(i):
            acc = acc - (alpha * At[i, j] - beta * Ah[i, j]) * y[j]
        diag = 1 + alpha * At[i, i]
        pole |= diag == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            y.append(acc / diag)
    R = np.ones(alpha.shape, dtype=np.longdouble)
    for j in range(m):
        R = R + (-alpha * pair.b_tilde[j] + beta * pair.b_hat[j]) * y[j]
    out = R.astype(float)
    out[pole | ~np.isfinite(out)] = np.nan
    return out


def wedge_check(pair: ImexPair, alpha_max: float = 1e4, n_grid: int = 200, tol: float = 1e-12) -> WedgeResult:
    """Sample ``|R| <= 1 + tol`` over the wedge; reports the first violation."""
    a, b = wedge_samples(alpha_max, n_grid)
    R = np.abs(batched_R(pair, a, b))
    bad = ~(R <= 1.0 + tol)
    if bad.any():
        i = int(np.argmax(bad))
        return WedgeResult(False, (float(a[i]), float(b[i])), float(np.nanmax(R)), len(a))
    return WedgeResult(True, None, float(R.max()), len(a))


@dataclass
class StabilityRaster:
    alpha: np.ndarray
    beta: np.ndarray
    values: np.ndarray  # |R|, shape (len(beta), len(alpha)); NaN at poles


def raster_region(pair: ImexPair, alpha_range=(0.0, 2.0), beta_range=(0.0, 2.0), resolution: int = 101) -> StabilityRaster:
    if not (alpha_range[1] > alpha_range[0] and beta_range[1] > beta_range[0]) or resolution < 2:
        raise ValueError("ranges must be increasing and resolution >= 2")
    alpha = np.linspace(*alpha_range, resolution)
    beta = np.linspace(*beta_range, resolution)
    A, B = np.meshgrid(alpha, beta, indexing="xy")
    return StabilityRaster(alpha, beta, np.abs(batched_R(pair, A, B)))
