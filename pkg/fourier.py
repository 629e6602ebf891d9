"""
Matrix-valued trigonometric series on the torus T^d and their weighted norms

    |f|_{Λ,r} = Σ_k ‖f̂(k)‖ e^{2πΛ(|k|)r} + tail_bound

with the k = 0 term weighted by 1. Coefficients are complex 2x2 matrices stored as
two aligned arrays (keys sorted lexicographically, one matrix per key). tail_bound is
the weighted mass of coefficients dropped by compression; it is only ever increased.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping

import numpy as np

from errors import DomainError, InputError, PreconditionError
from mat2 import op_norms
from weights import WeightSpec

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Relative compression threshold (weighted contribution vs series norm)
REL_COMPRESSION = 1e-16
# Conjugate-symmetry mismatch tolerated by from_modes
SYMMETRY_TOL = 1e-12
# Pair count per convolution block
PRODUCT_BLOCK = 1 << 20
HEADER = "# fourier-matrix-series"


def _empty_keys(d: int) -> np.ndarray:
    return np.zeros((0, d), dtype=np.int64)


def _empty_values() -> np.ndarray:
    return np.zeros((0, 2, 2), dtype=complex)


def _encode(keys: np.ndarray, bound: int) -> np.ndarray:
    """Order-preserving int64 codes for keys with components in [−bound, bound]."""
    base = 2 * bound + 1
    if base ** keys.shape[1] >= 2**62:
        raise InputError("series support too wide to index")
    codes = np.zeros(len(keys), dtype=np.int64)
    for i in range(keys.shape[1]):
        codes = codes * base + (keys[:, i] + bound)
    return codes


def _decode(codes: np.ndarray, bound: int, d: int) -> np.ndarray:
    base = 2 * bound + 1
    keys = np.empty((len(codes), d), dtype=np.int64)
    rest = codes.copy()
    for i in range(d - 1, -1, -1):
        keys[:, i] = rest % base - bound
        rest //= base
    return keys


def _merge(d: int, keys: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum coefficients of repeated keys; result sorted lexicographically, zeros dropped."""
    if len(keys) == 0:
        return _empty_keys(d), _empty_values()
    bound = int(np.max(np.abs(keys))) if keys.size else 0
    codes = _encode(keys, bound)
    uniq, inverse = np.unique(codes, return_inverse=True)
    merged = np.zeros((len(uniq), 2, 2), dtype=complex)
    np.add.at(merged, inverse.ravel(), values)
    keep = np.any(merged != 0, axis=(1, 2))
    return _decode(uniq[keep], bound, d), merged[keep]


@dataclass(frozen=True, eq=False)
class FourierMatrixSeries:
    d: int
    keys: np.ndarray
    values: np.ndarray
    real_symmetric: bool = True
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise InputError("series dimension must be >= 1")
        if self.keys.shape != (len(self.values), self.d) or self.values.shape[1:] != (2, 2):
            raise InputError("keys and coefficient arrays do not line up")
        if not self.tail_bound >= 0.0:
            raise InputError(f"tail_bound must be non-negative, got {self.tail_bound}")
        self.keys.setflags(write=False)
        self.values.setflags(write=False)

    # —— Construction ——

    @classmethod
    def zero(cls, d: int, real_symmetric: bool = True) -> "FourierMatrixSeries":
        return cls(d, _empty_keys(d), _empty_values(), real_symmetric)

    @classmethod
    def constant(cls, d: int, A) -> "FourierMatrixSeries":
        A = np.asarray(A)
        return from_modes(d, {(0,) * d: A}, real_symmetric=bool(np.isrealobj(A) or not np.any(np.imag(A))))

    @classmethod
    def identity(cls, d: int) -> "FourierMatrixSeries":
        return cls.constant(d, np.eye(2))

    # —— Views ——

    def __len__(self) -> int:
        return len(self.keys)

    @cached_property
    def orders(self) -> np.ndarray:
        """|k| (ℓ¹) per stored key."""
        return np.abs(self.keys).sum(axis=1)

    @cached_property
    def coefficient_norms(self) -> np.ndarray:
        return op_norms(self.values)

    @property
    def max_order(self) -> int:
        return int(self.orders.max()) if len(self) else 0

    def coefficient(self, k) -> np.ndarray:
        k = tuple(int(c) for c in k)
        if len(k) != self.d:
            raise InputError(f"index {k} does not have {self.d} components")
        hit = np.nonzero(np.all(self.keys == np.asarray(k), axis=1))[0]
        return self.values[hit[0]].copy() if hit.size else np.zeros((2, 2), dtype=complex)

    def items(self):
        for k, c in zip(self.keys, self.values):
            yield tuple(int(x) for x in k), c

    def is_zero(self) -> bool:
        return len(self) == 0 and self.tail_bound == 0.0


@dataclass(frozen=True)
class NormContext:
    """Weight and radius a series is measured at, plus the compression floor."""

    weight: WeightSpec
    r: float
    floor: float = 0.0
    rel_tol: float = REL_COMPRESSION

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError("radius must be positive", self.r)

    def weights(self, orders: np.ndarray) -> np.ndarray:
        orders = np.asarray(orders, dtype=float)
        w = np.ones_like(orders)
        nz = orders > 0
        if np.any(nz):
            w[nz] = np.exp(TWO_PI * np.asarray(self.weight(orders[nz]), dtype=float) * self.r)
        return w

    def at(self, r: float) -> "NormContext":
        return replace(self, r=r)

    def norm(self, f: FourierMatrixSeries) -> float:
        return weighted_norm(f, self.weight, self.r)

    def coefficient_norm(self, f: FourierMatrixSeries) -> float:
        """Weighted norm without the tail."""
        if not len(f):
            return 0.0
        return float(np.sum(f.coefficient_norms * self.weights(f.orders)))


def from_modes(d: int, modes: Mapping, real_symmetric: bool = True, tail_bound: float = 0.0) -> FourierMatrixSeries:
    """
    Series from {k: 2x2 matrix}. With real_symmetric, every k needs its −k partner carrying
    the conjugate coefficient (a missing partner is filled in), and the k = 0 term must be real.
    """
    keys = []
    values = []
    for k, c in modes.items():
        k = tuple(int(x) for x in k)
        if len(k) != d:
            raise InputError(f"index {k} does not have {d} components")
        c = np.asarray(c, dtype=complex)
        if c.shape != (2, 2):
            raise InputError(f"coefficient at {k} is not 2x2")
        keys.append(k)
        values.append(c)
    if not keys:
        return FourierMatrixSeries.zero(d, real_symmetric)
    keys_arr = np.asarray(keys, dtype=np.int64).reshape(-1, d)
    values_arr = np.asarray(values, dtype=complex)
    if real_symmetric:
        keys_arr, values_arr = _symmetrize(keys_arr, values_arr, modes)
    keys_arr, values_arr = _merge(d, keys_arr, values_arr)
    return FourierMatrixSeries(d, keys_arr, values_arr, real_symmetric, float(tail_bound))


def _symmetrize(keys: np.ndarray, values: np.ndarray, modes: Mapping) -> tuple[np.ndarray, np.ndarray]:
    given = {tuple(int(x) for x in k): np.asarray(c, dtype=complex) for k, c in modes.items()}
    out_keys, out_values = [], []
    for k, c in given.items():
        mirror = tuple(-x for x in k)
        if k == mirror:
            if np.max(np.abs(c.imag)) > SYMMETRY_TOL * (1.0 + np.max(np.abs(c))):
                raise InputError("mean coefficient of a real series must be real")
            out_keys.append(k)
            out_values.append(c.real.astype(complex))
            continue
        partner = given.get(mirror)
        if partner is not None and np.max(np.abs(partner - c.conj())) > SYMMETRY_TOL * (1.0 + np.max(np.abs(c))):
            raise InputError(f"coefficients at {k} and {mirror} are not complex conjugates")
        if _is_canonical(k):
            out_keys += [k, mirror]
            out_values += [c, c.conj()]
        elif partner is None:
            out_keys += [k, mirror]
            out_values += [c, c.conj()]
    return np.asarray(out_keys, dtype=np.int64).reshape(-1, keys.shape[1]), np.asarray(out_values, dtype=complex)


def _is_canonical(k: tuple[int, ...]) -> bool:
    for c in k:
        if c:
            return c > 0
    return False


def scalar_times_matrix(d: int, scalars: Mapping, matrix, real_symmetric: bool = True) -> FourierMatrixSeries:
    """u(θ)·A for a scalar series u given as {k: complex}."""
    A = np.asarray(matrix)
    return from_modes(d, {k: complex(u) * A for k, u in scalars.items()}, real_symmetric=real_symmetric)


# —— Norms ——

def weighted_norm(f: FourierMatrixSeries, weight: WeightSpec, r: float) -> float:
    if not r > 0:
        raise DomainError("radius must be positive", r)
    return NormContext(weight, r).coefficient_norm(f) + f.tail_bound


def sup_norm_bound(f: FourierMatrixSeries) -> float:
    """Σ‖f̂(k)‖ + tail_bound, an upper bound for sup_θ ‖f(θ)‖."""
    return float(np.sum(f.coefficient_norms)) + f.tail_bound


def compress(f: FourierMatrixSeries, ctx: NormContext) -> FourierMatrixSeries:
    """Drop coefficients whose weighted contribution is below the threshold; their mass joins tail_bound."""
    if not len(f):
        return f
    contributions = f.coefficient_norms * ctx.weights(f.orders)
    threshold = max(ctx.rel_tol * (float(contributions.sum()) + f.tail_bound), ctx.floor)
    drop = contributions < threshold
    if not np.any(drop):
        return f
    dropped = float(contributions[drop].sum())
    logger.debug("compressed %d of %d modes, mass %.3e", int(drop.sum()), len(f), dropped)
    keep = ~drop
    return FourierMatrixSeries(
        f.d, f.keys[keep].copy(), f.values[keep].copy(), f.real_symmetric, f.tail_bound + dropped
    )


# —— Linear operations ——

def _check_same_d(f: FourierMatrixSeries, g: FourierMatrixSeries) -> None:
    if f.d != g.d:
        raise InputError(f"dimension mismatch: {f.d} vs {g.d}")


def add(f: FourierMatrixSeries, g: FourierMatrixSeries) -> FourierMatrixSeries:
    _check_same_d(f, g)
    keys, values = _merge(f.d, np.concatenate([f.keys, g.keys]), np.concatenate([f.values, g.values]))
    return FourierMatrixSeries(f.d, keys, values, f.real_symmetric and g.real_symmetric, f.tail_bound + g.tail_bound)


def scale(f: FourierMatrixSeries, s: complex) -> FourierMatrixSeries:
    s = complex(s)
    if s == 0:
        return FourierMatrixSeries.zero(f.d, f.real_symmetric)
    return FourierMatrixSeries(
        f.d, f.keys.copy(), f.values * s, f.real_symmetric and s.imag == 0, f.tail_bound * abs(s)
    )


def subtract(f: FourierMatrixSeries, g: FourierMatrixSeries) -> FourierMatrixSeries:
    return add(f, scale(g, -1.0))


def left_multiply(A, f: FourierMatrixSeries) -> FourierMatrixSeries:
    """A·f for a constant matrix A."""
    A = np.asarray(A)
    keys, values = _merge(f.d, f.keys, np.einsum("ij,njk->nik", A, f.values))
    return FourierMatrixSeries(f.d, keys, values, f.real_symmetric and np.isrealobj(A), f.tail_bound * float(op_norms(A)))


def right_multiply(f: FourierMatrixSeries, A) -> FourierMatrixSeries:
    """f·A for a constant matrix A."""
    A = np.asarray(A)
    keys, values = _merge(f.d, f.keys, np.einsum("nij,jk->nik", f.values, A))
    return FourierMatrixSeries(f.d, keys, values, f.real_symmetric and np.isrealobj(A), f.tail_bound * float(op_norms(A)))


def conjugate_by(P, f: FourierMatrixSeries, P_inv=None) -> FourierMatrixSeries:
    """P f P⁻¹."""
    P = np.asarray(P)
    P_inv = np.linalg.inv(P) if P_inv is None else np.asarray(P_inv)
    return right_multiply(left_multiply(P, f), P_inv)


def add_constant(f: FourierMatrixSeries, A) -> FourierMatrixSeries:
    return add(f, FourierMatrixSeries.constant(f.d, A))


# —— Products ——

def multiply(f: FourierMatrixSeries, g: FourierMatrixSeries, ctx: NormContext | None = None) -> FourierMatrixSeries:
    """
    (fg)^(k) = Σ_{m+n=k} f̂(m)ĝ(n). With a context the result is compressed and the tails
    propagate as tf·(|g| + tg) + tg·|f|; without one, inputs must carry no tail.
    """
    _check_same_d(f, g)
    if ctx is None and (f.tail_bound > 0 or g.tail_bound > 0):
        raise InputError("multiplying series with tail mass needs a norm context")
    real = f.real_symmetric and g.real_symmetric
    if not len(f) or not len(g):
        tail = 0.0
        if ctx is not None:
            tail = f.tail_bound * (ctx.coefficient_norm(g) + g.tail_bound) + g.tail_bound * ctx.coefficient_norm(f)
        return FourierMatrixSeries(f.d, _empty_keys(f.d), _empty_values(), real, tail)

    bound = int(np.max(np.abs(f.keys), initial=0)) + int(np.max(np.abs(g.keys), initial=0))
    g_codes = _encode(g.keys, bound)
    f_codes = _encode(f.keys, bound)
    # codes are linear in k, so code(m + n) = code(m) + code(n) − code(0)
    zero_code = int(_encode(np.zeros((1, f.d), dtype=np.int64), bound)[0])
    rows = max(1, PRODUCT_BLOCK // len(g))
    code_parts, value_parts = [], []
    for lo in range(0, len(f), rows):
        fc = f_codes[lo:lo + rows]
        fv = f.values[lo:lo + rows]
        code_parts.append((fc[:, None] + g_codes[None, :] - zero_code).ravel())
        value_parts.append(np.einsum("aij,bjk->abik", fv, g.values).reshape(-1, 2, 2))
    codes = np.concatenate(code_parts)
    uniq, inverse = np.unique(codes, return_inverse=True)
    merged = np.zeros((len(uniq), 2, 2), dtype=complex)
    np.add.at(merged, inverse.ravel(), np.concatenate(value_parts))
    keep = np.any(merged != 0, axis=(1, 2))
    product = FourierMatrixSeries(f.d, _decode(uniq[keep], bound, f.d), merged[keep], real, 0.0)
    if ctx is None:
        return product
    tail = f.tail_bound * (ctx.coefficient_norm(g) + g.tail_bound) + g.tail_bound * ctx.coefficient_norm(f)
    return compress(replace(product, tail_bound=tail), ctx)


def commutator(A, f: FourierMatrixSeries) -> FourierMatrixSeries:
    """[A, f] for a constant A."""
    return subtract(left_multiply(A, f), right_multiply(f, A))


def inverse_neumann(x: FourierMatrixSeries, ctx: NormContext) -> FourierMatrixSeries:
    """(I + X)⁻¹ = Σ(−X)^j for |X| < 1, cut when a term drops below rel_tol·|X|; the rest goes to the tail."""
    q = ctx.norm(x)
    if not q < 1.0:
        raise PreconditionError(f"Neumann series needs |X| < 1, got {q:.6g}")
    total = FourierMatrixSeries.identity(x.d)
    if q == 0.0:
        return total
    minus_x = scale(x, -1.0)
    term = minus_x
    j = 1
    while True:
        total = add(total, term)
        term_norm = ctx.norm(term)
        if term_norm <= ctx.rel_tol * q or term_norm == 0.0:
            break
        term = multiply(term, minus_x, ctx)
        j += 1
    remainder = q ** (j + 1) / (1.0 - q)
    logger.debug("Neumann series: %d terms, |X|=%.3e, remainder %.3e", j, q, remainder)
    return compress(replace(total, tail_bound=total.tail_bound + remainder), ctx)


# —— Truncation, derivative, averages ——

def truncate(f: FourierMatrixSeries, N: int, dotted: bool = False) -> FourierMatrixSeries:
    """T_N (|k| <= N) or, with dotted, Ṫ_N (0 < |k| <= N). The tail is kept as an upper bound."""
    if N < 0:
        raise DomainError("truncation order must be >= 0", N)
    keep = f.orders <= N
    if dotted:
        keep &= f.orders > 0
    return FourierMatrixSeries(f.d, f.keys[keep].copy(), f.values[keep].copy(), f.real_symmetric, f.tail_bound)


def high_modes(f: FourierMatrixSeries, N: int) -> FourierMatrixSeries:
    """f − T_N f."""
    keep = f.orders > N
    return FourierMatrixSeries(f.d, f.keys[keep].copy(), f.values[keep].copy(), f.real_symmetric, f.tail_bound)


def frequencies_along(f: FourierMatrixSeries, omega) -> np.ndarray:
    """2π k·ω per stored key."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (f.d,):
        raise InputError(f"frequency has {omega.size} components, series has d={f.d}")
    return TWO_PI * (f.keys @ omega)


def directional_derivative(f: FourierMatrixSeries, freq) -> FourierMatrixSeries:
    """∂_ω f: coefficient at k times 2πi(k·ω). The result carries no tail."""
    omega = getattr(freq, "vector", freq)
    factors = 1j * frequencies_along(f, omega)
    keys, values = f.keys, f.values * factors[:, None, None]
    keep = np.any(values != 0, axis=(1, 2))
    return FourierMatrixSeries(f.d, keys[keep].copy(), values[keep], f.real_symmetric, 0.0)


def average_and_trace(f: FourierMatrixSeries) -> tuple[np.ndarray, float]:
    mean = f.coefficient((0,) * f.d)
    if f.real_symmetric:
        mean = mean.real.copy()
    return mean, float(np.real(np.trace(mean)))


# —— Evaluation ——

def evaluate_many(f: FourierMatrixSeries, thetas) -> np.ndarray:
    """f at each row of thetas, shape (m, 2, 2); real when the series is real-symmetric."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != f.d:
        raise InputError(f"points have {thetas.shape[1]} components, series has d={f.d}")
    if not len(f):
        out = np.zeros((len(thetas), 2, 2))
        return out if f.real_symmetric else out.astype(complex)
    phases = np.exp(1j * TWO_PI * (thetas @ f.keys.T))
    out = np.einsum("mn,nij->mij", phases, f.values)
    return out.real if f.real_symmetric else out


def evaluate(f: FourierMatrixSeries, theta) -> np.ndarray:
    return evaluate_many(f, np.asarray(theta, dtype=float)[None, :])[0]


# —— Text serialization ——

def dumps(f: FourierMatrixSeries) -> str:
    lines = [
        HEADER,
        f"d {f.d}",
        f"real_symmetric {str(f.real_symmetric).lower()}",
        f"tail_bound {f.tail_bound!r}",
    ]
    for k, c in f.items():
        nums = []
        for z in (c[0, 0], c[0, 1], c[1, 0], c[1, 1]):
            nums += [repr(float(z.real)), repr(float(z.imag))]
        lines.append(" ".join(str(x) for x in k) + "  " + " ".join(nums))
    return "\n".join(lines) + "\n"


def loads(text: str) -> FourierMatrixSeries:
    header: dict[str, str] = {}
    records: list[list[str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in ("d", "real_symmetric", "tail_bound"):
            if len(parts) != 2:
                raise InputError(f"malformed header on line {lineno}: {raw!r}")
            header[parts[0]] = parts[1]
        else:
            records.append(parts)
    try:
        d = int(header["d"])
        real = header.get("real_symmetric", "true").lower() == "true"
        tail = float(header.get("tail_bound", "0"))
    except (KeyError, ValueError) as exc:
        raise InputError("series header needs 'd', optional 'real_symmetric' and 'tail_bound'") from exc

    keys, values = [], []
    for parts in records:
        if len(parts) != d + 8:
            raise InputError(f"series record has {len(parts)} fields, expected {d + 8}")
        try:
            k = [int(x) for x in parts[:d]]
            nums = [float(x) for x in parts[d:]]
        except ValueError as exc:
            raise InputError(f"bad series record: {' '.join(parts)}") from exc
        z = [complex(nums[2 * i], nums[2 * i + 1]) for i in range(4)]
        keys.append(k)
        values.append([[z[0], z[1]], [z[2], z[3]]])
    if not keys:
        return FourierMatrixSeries(d, _empty_keys(d), _empty_values(), real, tail)
    merged_keys, merged_values = _merge(d, np.asarray(keys, dtype=np.int64), np.asarray(values, dtype=complex))
    return FourierMatrixSeries(d, merged_keys, merged_values, real, tail)


def save(f: FourierMatrixSeries, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(f))


def load(path: str) -> FourierMatrixSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
