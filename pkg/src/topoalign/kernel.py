"""Rank-weight kernels K: [0, 1] -> R+ with unit integral.

A kernel is carried as a truncated power series ``K(x) = sum_m a_m x**m`` and,
for the built-ins, also as a closed form.  The series coefficients are what
the bound constant ``A = sum_m |a_m| 8**m`` is computed from; the closed form
(when present) is what gets evaluated.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelSpec",
    "KernelError",
    "KernelDomainError",
    "DegenerateNormalizerError",
    "BUILTIN_KERNELS",
    "DEFAULT_TRUNCATION",
    "make_kernel",
    "eval_kernel",
    "eval_series",
    "kernel_antiderivative",
    "series_of_example_kernel",
    "compute_A",
    "normalization_residual",
    "riemann_error",
    "alpha_N",
    "rank_weights",
]

DEFAULT_TRUNCATION = 20
BUILTIN_KERNELS = ("uniform", "linear", "paper_example")

_E = math.e
_EX_DENOM = _E - 2.0


class KernelError(ValueError):
    """Invalid kernel specification."""


class KernelDomainError(KernelError):
    """Kernel evaluated outside [0, 1]."""


class DegenerateNormalizerError(ArithmeticError):
    """Rank-weight normalizer is not positive (bad truncation or kernel)."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel description.

    ``name`` is one of the built-ins or ``"series"``.  For built-ins the
    closed form is evaluated; ``coefficients`` always holds the truncated
    series ``a_0..a_M``.
    """

    name: str
    coefficients: tuple[float, ...]
    truncation: int = field(default=0)

    def __post_init__(self):
        if self.name not in BUILTIN_KERNELS and self.name != "series":
            raise KernelError(f"unknown kernel name {self.name!r}")
        if len(self.coefficients) == 0:
            raise KernelError("kernel needs at least one coefficient")
        if self.truncation != len(self.coefficients) - 1:
            raise KernelError(
                f"truncation {self.truncation} does not match "
                f"{len(self.coefficients)} coefficients"
            )
        if not all(math.isfinite(a) for a in self.coefficients):
            raise KernelError("kernel coefficients must be finite")

    @property
    def form(self) -> str:
        return "series" if self.name == "series" else "closed"

    def __call__(self, x):
        return eval_kernel(self, x)


def series_of_example_kernel(order: int) -> list[float]:
    """Taylor coefficients of ``(e**(1-x) - 1)/(e - 2)`` up to ``x**order``."""
    if order < 0:
        raise KernelError("order must be >= 0")
    coeffs = [(_E - 1.0) / _EX_DENOM]
    for r in range(1, order + 1):
        coeffs.append(_E * (-1.0) ** r / (_EX_DENOM * math.factorial(r)))
    return coeffs


def make_kernel(
    name: str,
    coefficients=None,
    truncation: int | None = None,
    *,
    validate: bool = True,
) -> KernelSpec:
    """Build a :class:`KernelSpec` from a name (and coefficients for ``series``)."""
    if name == "uniform":
        coeffs = [1.0]
    elif name == "linear":
        coeffs = [0.0, 2.0]
    elif name == "paper_example":
        coeffs = series_of_example_kernel(
            DEFAULT_TRUNCATION if truncation is None else truncation
        )
    elif name == "series":
        if coefficients is None:
            raise KernelError("series kernel needs coefficients")
        coeffs = [float(a) for a in coefficients]
        if truncation is not None and truncation != len(coeffs) - 1:
            coeffs = (coeffs + [0.0] * (truncation + 1))[: truncation + 1]
    else:
        raise KernelError(f"unknown kernel name {name!r}")
    spec = KernelSpec(name, tuple(coeffs), len(coeffs) - 1)
    if validate:
        validate_kernel(spec)
    return spec


def validate_kernel(spec: KernelSpec, *, norm_tol: float = 1e-10, grid_step: float = 1e-3):
    res = normalization_residual(spec)
    if abs(res) > norm_tol:
        raise KernelError(f"normalization residual {res:.3e} exceeds {norm_tol:g}")
    xs = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    vals = eval_kernel(spec, xs)
    # round-off slack at zeros of the closed form (paper_example vanishes at 1)
    if np.min(vals) < -1e-12:
        raise KernelError(f"kernel takes negative value {np.min(vals):.3e} on [0, 1]")
    A = compute_A(spec)
    if not A > 0:
        raise KernelError("A must be positive")


def eval_series(coefficients, x):
    """Horner evaluation of ``sum_m a_m x**m``."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for a in reversed(coefficients):
        acc = acc * x + a
    return acc if acc.ndim else float(acc)


def _closed(name: str, x):
    if name == "uniform":
        return np.ones_like(x)
    if name == "linear":
        return 2.0 * x
    return (np.exp(1.0 - x) - 1.0) / _EX_DENOM


def eval_kernel(spec: KernelSpec, x):
    """Evaluate K at ``x`` (scalar or array); raises outside [0, 1]."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > 1.0) or np.any(np.isnan(xa)):
        raise KernelDomainError("kernel argument must lie in [0, 1]")
    if spec.name == "series":
        return eval_series(spec.coefficients, xa)
    out = _closed(spec.name, xa)
    return out if out.ndim else float(out)


def kernel_antiderivative(spec: KernelSpec, x):
    """Primitive of K vanishing at 0."""
    x = np.asarray(x, dtype=float)
    if spec.name == "uniform":
        out = x.copy()
    elif spec.name == "linear":
        out = x * x
    elif spec.name == "paper_example":
        out = (_E - np.exp(1.0 - x) - x) / _EX_DENOM
    else:
        acc = np.zeros_like(x)
        for m in range(len(spec.coefficients) - 1, -1, -1):
            acc = acc * x + spec.coefficients[m] / (m + 1)
        out = acc * x
    return out if out.ndim else float(out)


def normalization_residual(spec: KernelSpec) -> float:
    """``sum_m a_m/(m+1) - 1`` for the (truncated) series."""
    return math.fsum(a / (m + 1) for m, a in enumerate(spec.coefficients)) - 1.0


def compute_A(spec: KernelSpec) -> float:
    terms = []
    for m, a in enumerate(spec.coefficients):
        try:
            terms.append(abs(a) * 8.0**m)
        except OverflowError:
            terms.append(math.inf)
    A = math.fsum(terms) if all(math.isfinite(t) for t in terms) else math.inf
    if not math.isfinite(A):
        warnings.warn("kernel constant A overflowed; bounds will be vacuous", RuntimeWarning)
        return math.inf
    return A


def rank_weights(spec: KernelSpec, N: int) -> np.ndarray:
    """``K(s/(N-1))`` for ranks ``s = 1..N-1``."""
    if N < 2:
        raise ValueError("need N >= 2")
    s = np.arange(1, N, dtype=float)
    return np.asarray(eval_kernel(spec, s / (N - 1)), dtype=float)


def riemann_error(spec: KernelSpec, N: int) -> float:
    """``e_K(N) = 1 - (1/(N-1)) sum_{s=1}^{N-1} K(s/(N-1))``."""
    w = rank_weights(spec, N)
    return 1.0 - math.fsum(w.tolist()) / (N - 1)


def alpha_N(spec: KernelSpec, N: int) -> float:
    """Normalizer ``1 / ((N-1)(1 - e_K(N)))`` of the rank weights."""
    gap = 1.0 - riemann_error(spec, N)
    if gap <= 0.0:
        raise DegenerateNormalizerError(
            f"1 - e_K({N}) = {gap:.3e} <= 0; kernel weights sum to zero"
        )
    return 1.0 / ((N - 1) * gap)
