"""Polynomial-exponential functions: sums of ``coeff * prod(x_i ** p_i)`` with real ``p_i``.

Exponents may be fractional, so a base must be non-negative wherever its
exponent is not an integer. ``0 ** p`` is 0 for ``p > 0`` and 1 for ``p == 0``.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .nn import load_json


@dataclass(frozen=True)
class PolyTerm:
    coeff: float
    factors: tuple = ()  # ((var_index, exponent), ...)

    def __post_init__(self):
        object.__setattr__(
            self, "factors", tuple((int(v), float(p)) for v, p in self.factors)
        )
        if not np.isfinite(self.coeff):
            raise ValueError(f"non-finite coefficient {self.coeff}")
        for v, p in self.factors:
            if not np.isfinite(p):
                raise ValueError(f"non-finite exponent {p} on x{v + 1}")
            if v < 0:
                raise ValueError(f"negative variable index {v}")


@dataclass(frozen=True)
class PolyFunction:
    n_vars: int
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            for v, _ in t.factors:
                if v >= self.n_vars:
                    raise ValueError(f"term uses x{v + 1} but n_vars = {self.n_vars}")

    def fractional_vars(self) -> set:
        """Indices of variables raised to some non-integer power."""
        return {v for t in self.terms for v, p in t.factors if p != round(p)}

    def __call__(self, x):
        return poly_eval(self, x)


@dataclass(frozen=True)
class PolySystem:
    n_vars: int
    equations: tuple

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(self.equations))
        if not self.equations:
            raise ValueError("a system needs at least one equation")
        for k, eq in enumerate(self.equations):
            if eq.n_vars != self.n_vars:
                raise ValueError(f"equation {k} has {eq.n_vars} vars, system has {self.n_vars}")

    def fractional_vars(self) -> set:
        out = set()
        for eq in self.equations:
            out |= eq.fractional_vars()
        return out


def _batch(f, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != f.n_vars:
        raise ShapeError(f"expected {f.n_vars} variables, got shape {np.shape(x)}")
    return x, single


def _power(base, p, var):
    """``base ** p`` for a column of bases, with the package's 0 and domain rules."""
    if p == 0:
        return np.ones_like(base)
    integral = p == round(p)
    if not integral and np.any(base < 0):
        bad = base[base < 0][0]
        raise DomainError(f"x{var + 1} = {bad!r} < 0 raised to fractional power {p}")
    if p < 0 and np.any(base == 0):
        raise DomainError(f"x{var + 1} = 0 raised to negative power {p}")
    if integral:
        return base ** int(p)
    return np.power(base, p)


def poly_eval(f: PolyFunction, x):
    """Evaluate ``f`` at one point (1-D) or at each row of a batch (2-D)."""
    xb, single = _batch(f, x)
    total = np.zeros(xb.shape[0])
    for t in f.terms:
        val = np.full(xb.shape[0], float(t.coeff))
        for v, p in t.factors:
            val = val * _power(xb[:, v], p, v)
        total = total + val
    return float(total[0]) if single else total


def poly_grad(f: PolyFunction, x):
    """Gradient of ``f``; shape ``(n_vars,)`` for a point, ``(n, n_vars)`` for a batch.

    Raises ``DomainError`` where the derivative is singular (a zero base
    under an exponent strictly between 0 and 1).
    """
    xb, single = _batch(f, x)
    n = xb.shape[0]
    grad = np.zeros_like(xb)
    for t in f.terms:
        powers = [_power(xb[:, v], p, v) for v, p in t.factors]
        for j, (v, p) in enumerate(t.factors):
            if p == 0:
                continue
            if p < 1 and np.any(xb[:, v] == 0):
                raise DomainError(
                    f"derivative of x{v + 1}**{p} is singular at x{v + 1} = 0"
                )
            d = np.full(n, float(t.coeff) * p) * _power(xb[:, v], p - 1, v)
            for i, pw in enumerate(powers):
                if i != j:
                    d = d * pw
            grad[:, v] += d
    return grad[0] if single else grad


def system_residuals(system: PolySystem, x) -> np.ndarray:
    """Residual of each equation; shape ``(m,)`` or ``(n, m)``."""
    cols = [poly_eval(eq, x) for eq in system.equations]
    return np.stack(cols, axis=-1) if np.ndim(cols[0]) else np.array(cols)


def term(coeff, *factors) -> PolyTerm:
    """Shorthand: ``term(9, (0, 0.87))`` is ``9 * x1**0.87``."""
    return PolyTerm(float(coeff), tuple(factors))


# y = 9 x1^0.87 + 8.97 x2^0.02 + 0.876 x3^0.12 + 2.9876 x4^0.987
POLY4 = PolyFunction(
    4,
    (
        term(9.0, (0, 0.87)),
        term(8.97, (1, 0.02)),
        term(0.876, (2, 0.12)),
        term(2.9876, (3, 0.987)),
    ),
)

# 9x^2 + 8.97y^7.8 + 0.876z - 32 = 0
# 12x^3 + 9.97y^8 + 10.876z^3 - 43 = 0
DEMO_SYSTEM = PolySystem(
    3,
    (
        PolyFunction(3, (term(9.0, (0, 2)), term(8.97, (1, 7.8)), term(0.876, (2, 1)), term(-32.0))),
        PolyFunction(3, (term(12.0, (0, 3)), term(9.97, (1, 8)), term(10.876, (2, 3)), term(-43.0))),
    ),
)

BUILTIN_FUNCTIONS = {"poly4": POLY4}
BUILTIN_SYSTEMS = {"demo-system": DEMO_SYSTEM}


def function_to_dict(f: PolyFunction) -> list:
    return [{"coeff": t.coeff, "factors": [[v, p] for v, p in t.factors]} for t in f.terms]


def system_to_dict(system: PolySystem) -> dict:
    return {
        "format_version": 1,
        "n_vars": system.n_vars,
        "equations": [function_to_dict(eq) for eq in system.equations],
    }


def _terms_from(raw, where):
    if not isinstance(raw, list):
        raise ValidationError(f"{where}: expected a list of terms")
    terms = []
    for i, t in enumerate(raw):
        if not isinstance(t, dict) or "coeff" not in t:
            raise ValidationError(f"{where}[{i}]: term needs a 'coeff' field")
        factors = t.get("factors", [])
        try:
            pairs = [(int(v), float(p)) for v, p in factors]
            terms.append(PolyTerm(float(t["coeff"]), tuple(pairs)))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{where}[{i}]: bad term ({exc})") from exc
    return terms


def system_from_dict(d: dict, where: str = "system") -> PolySystem:
    """Decode ``{"n_vars": d?, "equations": [[term, ...], ...]}``.

    ``n_vars`` defaults to one past the largest variable index used.
    """
    if not isinstance(d, dict) or "equations" not in d:
        raise ValidationError(f"{where}: missing field 'equations'")
    if not isinstance(d["equations"], list) or not d["equations"]:
        raise ValidationError(f"{where}: 'equations' must be a non-empty list")
    eqs = [_terms_from(e, f"{where}.equations[{k}]") for k, e in enumerate(d["equations"])]
    used = [v for eq in eqs for t in eq for v, _ in t.factors]
    n_vars = d.get("n_vars", max(used) + 1 if used else 1)
    try:
        return PolySystem(int(n_vars), tuple(PolyFunction(int(n_vars), eq) for eq in eqs))
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def save_system(system: PolySystem, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=1) + "\n")


def load_system(path) -> PolySystem:
    return system_from_dict(load_json(path), where=str(path))


def resolve_function(name_or_path) -> PolyFunction:
    """A built-in function id, or a system file holding exactly one equation."""
    if name_or_path in BUILTIN_FUNCTIONS:
        return BUILTIN_FUNCTIONS[name_or_path]
    if not Path(name_or_path).is_file():
        raise ValidationError(
            f"unknown function {name_or_path!r} (built-ins: {', '.join(BUILTIN_FUNCTIONS)})"
        )
    system = load_system(name_or_path)
    if len(system.equations) != 1:
        raise ValidationError(f"{name_or_path}: expected one equation, found {len(system.equations)}")
    return system.equations[0]


def resolve_system(name_or_path) -> PolySystem:
    if name_or_path in BUILTIN_SYSTEMS:
        return BUILTIN_SYSTEMS[name_or_path]
    if not Path(name_or_path).is_file():
        raise ValidationError(
            f"unknown system {name_or_path!r} (built-ins: {', '.join(BUILTIN_SYSTEMS)})"
        )
    return load_system(name_or_path)
