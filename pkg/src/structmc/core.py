"""Data model for structured matrices theta = X B Z^T.

Specs describe the class geometry (dimensions, row sparsity, alphabets,
optional sup-norm bounds), factorizations are concrete (X, B, Z) triples,
observations hold the masked data together with the sampling probability.
Everything is immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

__all__ = [
    "Alphabet",
    "StructureSpec",
    "Factorization",
    "Observation",
    "ValidationReport",
    "Norms",
    "ShapeError",
    "ParameterError",
    "assemble",
    "validate_membership",
    "norms",
    "spectral_norm",
    "matrix_to_obj",
    "matrix_from_obj",
    "observation_to_obj",
    "observation_from_obj",
    "factorization_to_obj",
    "factorization_from_obj",
    "spec_to_obj",
    "spec_from_obj",
    "dumps_canonical",
    "save_json",
    "load_json",
]


class ShapeError(ValueError):
    """Dimension mismatch between factors or data."""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


def _freeze(a, dtype=float) -> np.ndarray:
    """Defensive copy as a read-only float array."""
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


# ---------- alphabets ---------- #

@dataclass(frozen=True)
class Alphabet:
    """Set of allowed non-zero values in a factor matrix.

    kind is "finite" (explicit sorted values) or "interval" ([lo, hi]).
    """

    kind: str
    values: tuple[float, ...] | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind == "finite":
            if not self.values:
                raise ParameterError("finite alphabet must be non-empty")
            vals = tuple(float(v) for v in self.values)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ParameterError("finite alphabet values must be strictly increasing")
            object.__setattr__(self, "values", vals)
        elif self.kind == "interval":
            if self.lo is None or self.hi is None:
                raise ParameterError("interval alphabet needs lo and hi")
            if self.lo > self.hi:
                raise ParameterError(f"interval alphabet requires lo <= hi, got [{self.lo}, {self.hi}]")
        else:
            raise ParameterError(f"unknown alphabet kind {self.kind!r}")

    @classmethod
    def finite(cls, values) -> "Alphabet":
        return cls(kind="finite", values=tuple(sorted(float(v) for v in set(values))))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Alphabet":
        return cls(kind="interval", lo=float(lo), hi=float(hi))

    def contains(self, v: float, tol: float = 0.0) -> bool:
        """Whether v is an allowed non-zero value (within tol)."""
        if self.kind == "finite":
            return bool(np.min(np.abs(np.asarray(self.values) - v)) <= tol)
        return self.lo - tol <= v <= self.hi + tol


# ---------- problem geometry ---------- #

@dataclass(frozen=True)
class StructureSpec:
    """Geometry of the class: theta = X B Z^T with row-sparse alphabet factors.

    s_n = 0 forces X to the n x n identity (so k_n must equal n); same for
    s_m / Z. With bounded=True the class additionally imposes |X|, |Z| <= 1,
    |B| <= b_max and |theta| <= theta_mx entrywise.
    """

    n: int
    m: int
    k_n: int
    k_m: int
    s_n: int
    s_m: int
    alphabet_n: Alphabet
    alphabet_m: Alphabet
    b_max: float = 1.0
    theta_mx: float = 1.0
    bounded: bool = False

    def __post_init__(self):
        for name in ("n", "m", "k_n", "k_m"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be a positive integer")
        if not (0 <= self.s_n <= self.k_n):
            raise ParameterError(f"s_n must satisfy 0 <= s_n <= k_n, got {self.s_n}")
        if not (0 <= self.s_m <= self.k_m):
            raise ParameterError(f"s_m must satisfy 0 <= s_m <= k_m, got {self.s_m}")
        # s = 0 means the factor is pinned to the identity
        if self.s_n == 0 and self.k_n != self.n:
            raise ParameterError("s_n = 0 forces X = I, which requires k_n = n")
        if self.s_m == 0 and self.k_m != self.m:
            raise ParameterError("s_m = 0 forces Z = I, which requires k_m = m")
        if self.b_max <= 0:
            raise ParameterError("b_max must be positive")
        if self.theta_mx <= 0:
            raise ParameterError("theta_mx must be positive")

    @property
    def d(self) -> int:
        return self.n + self.m

    @property
    def r_n(self) -> int:
        return min(self.n, self.k_n)

    @property
    def r_m(self) -> int:
        return min(self.m, self.k_m)

    def unbounded(self) -> "StructureSpec":
        """The same geometry with the sup-norm bounds dropped."""
        return replace(self, bounded=False)


@dataclass(frozen=True)
class Factorization:
    """A concrete triple (X, B, Z); the represented matrix is X B Z^T."""

    x: np.ndarray
    b: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _freeze(self.x))
        object.__setattr__(self, "b", _freeze(self.b))
        object.__setattr__(self, "z", _freeze(self.z))
        for name, arr in (("X", self.x), ("B", self.b), ("Z", self.z)):
            if arr.ndim != 2:
                raise ShapeError(f"{name} must be a 2-d matrix, got shape {arr.shape}")

    @property
    def theta(self) -> np.ndarray:
        return assemble(self)


@dataclass(frozen=True)
class Observation:
    """Masked data Y with Bernoulli mask E and sampling probability p.

    Masked entries are stored as exact zeros; y_rescaled = y / p is the
    unbiased surrogate of the signal.
    """

    y: np.ndarray
    mask: np.ndarray
    p: float
    sigma: float = 0.0
    b: float | None = None

    def __post_init__(self):
        y = _freeze(self.y)
        mask = _freeze(self.mask)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mask", mask)
        if y.shape != mask.shape:
            raise ShapeError(f"y has shape {y.shape} but mask has shape {mask.shape}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ParameterError("mask entries must be 0 or 1")
        if not (0.0 < self.p <= 1.0):
            raise ParameterError(f"p must lie in (0, 1], got {self.p}")
        if np.any(y[mask == 0] != 0):
            raise ParameterError("y must be exactly 0 wherever mask is 0")
        if self.sigma < 0:
            raise ParameterError("sigma must be >= 0")

    @property
    def y_rescaled(self) -> np.ndarray:
        return self.y / self.p

    @property
    def shape(self) -> tuple[int, int]:
        return self.y.shape


@dataclass(frozen=True)
class ValidationReport:
    accepted: bool
    violations: tuple[str, ...] = ()


class Norms(NamedTuple):
    frobenius: float
    spectral: float
    sup: float


# ---------- operations ---------- #

def assemble(f: Factorization) -> np.ndarray:
    """Dense product X B Z^T."""
    x, b, z = f.x, f.b, f.z
    if x.shape[1] != b.shape[0]:
        raise ShapeError(f"B has {b.shape[0]} rows but X has {x.shape[1]} columns")
    if z.shape[1] != b.shape[1]:
        raise ShapeError(f"Z has {z.shape[1]} columns but B has {b.shape[1]} columns")
    return x @ b @ z.T


def _check_factor(name, a, k, s, alphabet, bounded, tol, violations):
    """Row-sparsity + alphabet checks for one factor (X or Z)."""
    rows, cols = a.shape
    if cols != k:
        violations.append(f"shape {name}: expected {k} columns, got {cols}")
        return
    if s == 0:
        # the identity is the sole member
        if rows != cols or np.max(np.abs(a - np.eye(rows))) > tol:
            violations.append(f"{name} must equal the identity when s = 0")
        return
    nz = np.abs(a) > tol
    counts = nz.sum(axis=1)
    for i in np.nonzero(counts > s)[0]:
        violations.append(f"row-sparsity {name}, row {i}: {int(counts[i])} non-zeros > s = {s}")
    for i, j in zip(*np.nonzero(nz)):
        v = float(a[i, j])
        if not alphabet.contains(v, tol):
            violations.append(f"alphabet {name}, entry ({i},{j}): value {v} not in alphabet")
    if bounded and np.max(np.abs(a)) > 1 + tol:
        i, j = np.unravel_index(np.argmax(np.abs(a)), a.shape)
        violations.append(f"‖{name}‖_∞ ≤ 1 violated at ({i},{j}): {float(a[i, j])}")


def validate_membership(f: Factorization, spec: StructureSpec, tol: float = 0.0) -> ValidationReport:
    """Check every class invariant of f under spec.

    Violations are data, not failures: each one names the constraint, the
    index and the offending value. tol = 0 is for freshly generated factors
    (exact values); loaders use tol = 1e-9 to absorb decimal round-trips.
    """
    violations: list[str] = []
    if f.x.shape[0] != spec.n:
        violations.append(f"shape X: expected {spec.n} rows, got {f.x.shape[0]}")
    if f.z.shape[0] != spec.m:
        violations.append(f"shape Z: expected {spec.m} rows, got {f.z.shape[0]}")
    if f.b.shape != (spec.k_n, spec.k_m):
        violations.append(f"shape B: expected {(spec.k_n, spec.k_m)}, got {f.b.shape}")
    _check_factor("X", f.x, spec.k_n, spec.s_n, spec.alphabet_n, spec.bounded, tol, violations)
    _check_factor("Z", f.z, spec.k_m, spec.s_m, spec.alphabet_m, spec.bounded, tol, violations)
    if spec.bounded and not any(v.startswith("shape") for v in violations):
        if np.max(np.abs(f.b)) > spec.b_max + tol:
            violations.append(f"‖B‖_∞ ≤ b_max violated: {float(np.max(np.abs(f.b)))} > {spec.b_max}")
        theta = assemble(f)
        if np.max(np.abs(theta)) > spec.theta_mx + tol:
            violations.append(
                f"‖θ‖_∞ ≤ theta_mx violated: {float(np.max(np.abs(theta)))} > {spec.theta_mx}"
            )
    return ValidationReport(accepted=not violations, violations=tuple(violations))


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value.

    Full SVD up to 512x512; power iteration (tol 1e-10, max 10_000 iterations)
    above that.
    """
    a = np.asarray(a, dtype=float)
    if max(a.shape) <= 512:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    # power iteration on A^T A
    v = np.ones(a.shape[1]) / np.sqrt(a.shape[1])
    sigma = 0.0
    for _ in range(10_000):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new_sigma = np.sqrt(nw)
        if abs(new_sigma - sigma) <= 1e-10 * max(1.0, new_sigma):
            return float(new_sigma)
        sigma = new_sigma
    return float(sigma)


def norms(a: np.ndarray) -> Norms:
    """(frobenius, spectral, sup) of a non-empty matrix."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ParameterError("matrix must be non-empty")
    return Norms(
        frobenius=float(np.sqrt(np.sum(a * a))),
        spectral=spectral_norm(a),
        sup=float(np.max(np.abs(a))),
    )


# ---------- JSON formats ---------- #
# Dense matrix: {"rows": n, "cols": m, "data": [row-major reals]}.
# Observation adds {"mask": [row-major 0/1], "p": real, "sigma": real, "b": real-or-null}.
# Factorization: {"x": matrix, "b": matrix, "z": matrix}.
# Spec mirrors StructureSpec with alphabets as tagged objects.

def matrix_to_obj(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": [float(v) for v in a.ravel()]}


def matrix_from_obj(obj: dict) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != rows * cols:
        raise ShapeError(f"matrix data has {data.size} entries, expected {rows * cols}")
    return data.reshape(rows, cols)


def observation_to_obj(obs: Observation) -> dict:
    out = matrix_to_obj(obs.y)
    out["mask"] = [int(v) for v in obs.mask.ravel()]
    out["p"] = float(obs.p)
    out["sigma"] = float(obs.sigma)
    out["b"] = None if obs.b is None else float(obs.b)
    return out


def observation_from_obj(obj: dict) -> Observation:
    y = matrix_from_obj(obj)
    mask = np.asarray(obj["mask"], dtype=float).reshape(y.shape)
    b = obj.get("b")
    return Observation(y=y, mask=mask, p=float(obj["p"]), sigma=float(obj.get("sigma", 0.0)),
                       b=None if b is None else float(b))


def factorization_to_obj(f: Factorization) -> dict:
    return {"x": matrix_to_obj(f.x), "b": matrix_to_obj(f.b), "z": matrix_to_obj(f.z)}


def factorization_from_obj(obj: dict) -> Factorization:
    return Factorization(x=matrix_from_obj(obj["x"]), b=matrix_from_obj(obj["b"]),
                         z=matrix_from_obj(obj["z"]))


def _alphabet_to_obj(a: Alphabet) -> dict:
    if a.kind == "finite":
        return {"kind": "finite", "values": [float(v) for v in a.values]}
    return {"kind": "interval", "lo": float(a.lo), "hi": float(a.hi)}


def _alphabet_from_obj(obj: dict) -> Alphabet:
    if obj["kind"] == "finite":
        return Alphabet(kind="finite", values=tuple(float(v) for v in obj["values"]))
    if obj["kind"] == "interval":
        return Alphabet.interval(obj["lo"], obj["hi"])
    raise ParameterError(f"unknown alphabet kind {obj['kind']!r}")


def spec_to_obj(spec: StructureSpec) -> dict:
    return {
        "n": spec.n, "m": spec.m, "k_n": spec.k_n, "k_m": spec.k_m,
        "s_n": spec.s_n, "s_m": spec.s_m,
        "alphabet_n": _alphabet_to_obj(spec.alphabet_n),
        "alphabet_m": _alphabet_to_obj(spec.alphabet_m),
        "b_max": float(spec.b_max), "theta_mx": float(spec.theta_mx),
        "bounded": bool(spec.bounded),
    }


def spec_from_obj(obj: dict) -> StructureSpec:
    return StructureSpec(
        n=int(obj["n"]), m=int(obj["m"]), k_n=int(obj["k_n"]), k_m=int(obj["k_m"]),
        s_n=int(obj["s_n"]), s_m=int(obj["s_m"]),
        alphabet_n=_alphabet_from_obj(obj["alphabet_n"]),
        alphabet_m=_alphabet_from_obj(obj["alphabet_m"]),
        b_max=float(obj.get("b_max", 1.0)), theta_mx=float(obj.get("theta_mx", 1.0)),
        bounded=bool(obj.get("bounded", False)),
    )


def dumps_canonical(obj) -> str:
    """Stable JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def save_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_canonical(obj))


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
