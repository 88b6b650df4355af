"""Uniformly elliptic, positively homogeneous operators F(x, X) on symmetric matrices.

Every operator follows the sign convention of the parabolic problem
``u_t + F(D^2 u) = 0``, so ``F(X) = -tr X`` is the negative Laplacian and
the operators are nonincreasing in the matrix order.

All evaluation routines accept a single ``(N, N)`` matrix or a stack of
shape ``(..., N, N)``; the stacked path is what the solvers use.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

KINDS = ("linear-trace", "pucci-plus", "pucci-minus", "barenblatt", "minmax-2d", "composite")

_SYM_ATOL = 1e-12


def _check_symmetric(X):
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise InvalidArgument(f"expected square matrices, got shape {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X), initial=0.0)))
    if not np.allclose(X, np.swapaxes(X, -1, -2), rtol=0.0, atol=_SYM_ATOL * scale):
        raise InvalidArgument("matrix is not symmetric")
    return X


def _check_constants(lam, Lam):
    if not (lam > 0 and Lam >= lam):
        raise InvalidArgument(f"need 0 < lambda <= Lambda, got lambda={lam}, Lambda={Lam}")


def sym_eigenvalues(X):
    """Eigenvalues of symmetric matrices, sorted in nondecreasing order.

    Closed form for N <= 2; LAPACK's symmetric solver (``eigvalsh``) for
    larger N. Works on stacks of matrices.
    """
    X = _check_symmetric(X)
    return _eigvals(X)


def _eigvals(X):
    n = X.shape[-1]
    if n == 1:
        return X[..., 0, :].copy()
    if n == 2:
        a = X[..., 0, 0]
        c = X[..., 1, 1]
        b = 0.5 * (X[..., 0, 1] + X[..., 1, 0])
        mean = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return np.stack([mean - rad, mean + rad], axis=-1)
    return np.linalg.eigvalsh(X)


def _pucci_plus(X, lam, Lam):
    e = _eigvals(X)
    return -lam * np.sum(np.maximum(e, 0.0), axis=-1) + Lam * np.sum(np.maximum(-e, 0.0), axis=-1)


def _pucci_minus(X, lam, Lam):
    e = _eigvals(X)
    return -Lam * np.sum(np.maximum(e, 0.0), axis=-1) + lam * np.sum(np.maximum(-e, 0.0), axis=-1)


def pucci_plus(X, lam, Lam):
    """Maximal Pucci operator ``max{tr[-AX] : lam I <= A <= Lam I}``.

    Parameters
    ----------
    X : array_like
        Symmetric matrix or stack of matrices, shape ``(..., N, N)``.
    lam, Lam : float
        Ellipticity constants, ``0 < lam <= Lam``.
    """
    _check_constants(lam, Lam)
    return _pucci_plus(_check_symmetric(X), lam, Lam)


def pucci_minus(X, lam, Lam):
    """Minimal Pucci operator ``min{tr[-AX] : lam I <= A <= Lam I}``."""
    _check_constants(lam, Lam)
    return _pucci_minus(_check_symmetric(X), lam, Lam)


def _trace(X):
    return np.trace(X, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class EllipticOperator:
    """An x-independent uniformly elliptic operator with constants ``(lam, Lam)``.

    Use the constructor helpers (:func:`laplacian`, :func:`pucci`, ...) rather
    than building instances by hand; they fill in the ellipticity constants.
    """

    kind: str
    lam: float
    Lam: float
    dim: int | None = None
    matrix: tuple | None = None
    gamma: float | None = None
    reducer: str | None = None
    parts: tuple = field(default_factory=tuple)
    x_dependent: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown operator kind {self.kind!r}")
        _check_constants(self.lam, self.Lam)

    def __call__(self, X, x=None):
        return evaluate(self, x, X)

    def evaluate_batch(self, X):
        """Evaluate on a stack ``(..., N, N)`` without validation (solver hot path)."""
        k = self.kind
        if k == "pucci-plus":
            return _pucci_plus(X, self.lam, self.Lam)
        if k == "pucci-minus":
            return _pucci_minus(X, self.lam, self.Lam)
        if k == "linear-trace":
            A = np.asarray(self.matrix)
            return -np.einsum("ij,...ji->...", A, X)
        if k == "barenblatt":
            s = -_trace(X)
            return np.maximum(s / (1.0 - self.gamma), s / (1.0 + self.gamma))
        if k == "minmax-2d":
            lap = -_trace(X)
            return np.minimum(np.maximum(lap, 2.0 * lap), -X[..., 0, 0] - 2.0 * X[..., 1, 1])
        vals = np.stack([op.evaluate_batch(X) for op in self.parts])
        return vals.max(axis=0) if self.reducer == "max" else vals.min(axis=0)

    def describe(self):
        """Round-trippable text form, as accepted by :func:`parse_operator`."""
        k = self.kind
        if k in ("pucci-plus", "pucci-minus"):
            return f"{k} lambda={self.lam:g} Lambda={self.Lam:g}"
        if k == "linear-trace":
            A = np.asarray(self.matrix)
            if np.allclose(A, A[0, 0] * np.eye(len(A))):
                return f"linear-trace A={A[0, 0]:g} dim={len(A)}"
            return "linear-trace A=" + ";".join(",".join(f"{v:g}" for v in row) for row in A)
        if k == "barenblatt":
            return f"barenblatt gamma={self.gamma:g}"
        if k == "minmax-2d":
            return "minmax-2d"
        inner = " | ".join(op.describe() for op in self.parts)
        return f"composite {self.reducer}({inner})"


def evaluate(op, x, X):
    """Evaluate ``F(x, X)``.

    ``x`` is accepted for interface compatibility; all shipped operators are
    independent of it.
    """
    X = _check_symmetric(X)
    n = X.shape[-1]
    if op.dim is not None and n != op.dim:
        raise InvalidArgument(f"operator {op.kind} expects dimension {op.dim}, got {n}")
    return op.evaluate_batch(X)


def linear_trace(A):
    """``F(X) = tr[-A X]`` for a symmetric positive definite ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    A = _check_symmetric(A)
    e = np.linalg.eigvalsh(A)
    if e[0] <= 0:
        raise InvalidArgument("linear-trace coefficient must be positive definite")
    return EllipticOperator(
        "linear-trace", float(e[0]), float(e[-1]), dim=len(A), matrix=tuple(map(tuple, A))
    )


def laplacian(dim=1, scale=1.0):
    """``F = -scale * Laplacian`` in ``dim`` dimensions."""
    return linear_trace(scale * np.eye(dim))


def pucci(sign, lam, Lam):
    _check_constants(lam, Lam)
    if sign in ("+", "plus"):
        return EllipticOperator("pucci-plus", float(lam), float(Lam))
    if sign in ("-", "minus"):
        return EllipticOperator("pucci-minus", float(lam), float(Lam))
    raise InvalidArgument(f"pucci sign must be '+' or '-', got {sign!r}")


def barenblatt(gamma):
    """Elasto-plastic filtration operator ``max(-tr X/(1-g), -tr X/(1+g))``.

    Declared constants are the extreme slopes of the two branches,
    ``(1/(1+g), 1/(1-g))``.
    """
    if not 0 < gamma < 1:
        raise InvalidArgument(f"barenblatt needs 0 < gamma < 1, got {gamma}")
    return EllipticOperator(
        "barenblatt", 1.0 / (1.0 + gamma), 1.0 / (1.0 - gamma), gamma=float(gamma)
    )


def minmax_2d():
    """The nonconvex example ``min{max{-Lu, -2Lu}, -u_11 - 2u_22}`` (N = 2)."""
    return EllipticOperator("minmax-2d", 1.0, 2.0, dim=2)


def composite(reducer, parts):
    """Pointwise max or min of operators; constants are the envelope of the parts'."""
    if reducer not in ("max", "min"):
        raise InvalidArgument(f"reducer must be 'max' or 'min', got {reducer!r}")
    parts = tuple(parts)
    if not parts:
        raise InvalidArgument("composite needs at least one part")
    dims = {op.dim for op in parts if op.dim is not None}
    if len(dims) > 1:
        raise InvalidArgument(f"composite parts disagree on dimension: {sorted(dims)}")
    return EllipticOperator(
        "composite",
        min(op.lam for op in parts),
        max(op.Lam for op in parts),
        dim=dims.pop() if dims else None,
        reducer=reducer,
        parts=parts,
    )


def _parse_matrix(text, dim):
    rows = [r for r in text.split(";") if r.strip()]
    vals = [[float(v) for v in r.split(",")] for r in rows]
    if len(vals) == 1 and len(vals[0]) == 1:
        return vals[0][0] * np.eye(dim or 1)
    if len(vals) == 1:
        return np.diag(vals[0])
    return np.array(vals)


def parse_operator(text):
    """Parse an operator spec such as ``"pucci-minus lambda=1 Lambda=2"``.

    Recognized forms::

        laplacian [dim=N]
        linear-trace A=<s> [dim=N] | A=<d1,d2,...> | A=<r1;r2;...>
        pucci-plus lambda=<l> Lambda=<L>
        pucci-minus lambda=<l> Lambda=<L>
        barenblatt gamma=<g>
        minmax-2d
    """
    tokens = text.split()
    if not tokens:
        raise InvalidArgument("empty operator spec")
    kind, kv = tokens[0], {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise InvalidArgument(f"malformed operator parameter {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        if kind == "laplacian":
            return laplacian(int(kv.get("dim", 1)), float(kv.get("scale", 1.0)))
        if kind == "linear-trace":
            dim = int(kv["dim"]) if "dim" in kv else None
            return linear_trace(_parse_matrix(kv["A"], dim))
        if kind in ("pucci-plus", "pucci-minus"):
            return pucci(kind.split("-")[1], float(kv["lambda"]), float(kv["Lambda"]))
        if kind == "barenblatt":
            return barenblatt(float(kv["gamma"]))
        if kind == "minmax-2d":
            return minmax_2d()
    except KeyError as exc:
        raise InvalidArgument(f"operator {kind!r} missing parameter {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, InvalidArgument):
            raise
        raise InvalidArgument(f"bad parameter in {text!r}: {exc}") from None
    raise InvalidArgument(f"unknown operator kind {kind!r}")
