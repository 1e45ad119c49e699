"""Problem data shared by the exact solver, the shooting solver and the symmetry tools."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .special_functions import DomainError

__all__ = [
    "InvalidParameters",
    "DiffusivityDomainError",
    "PhysicalParameters",
    "Diffusivity",
    "Flux",
    "StefanProblem",
    "REFERENCE_PARAMETERS",
]


class InvalidParameters(ValueError):
    """Parameters violate a model invariant (the 'invalid regime')."""


class DiffusivityDomainError(DomainError):
    """Diffusivity evaluated outside the range where it is defined and positive."""


@dataclass(frozen=True)
class PhysicalParameters:
    """Material and boundary constants of the melting/evaporation problem.

    Attributes:
        u_v: evaporation temperature (liquid, gas interface).
        u_m: melting temperature seen from the liquid.
        v_m: melting temperature seen from the solid.
        v_inf: far-field solid temperature.
        H_v: latent-heat coefficient of evaporation.
        H_m: latent-heat coefficient of melting.
        q: signed heat-flux magnitude along x3.
        R: radius of the irradiated spot; also the liquid/gas similarity level.
    """

    u_v: float
    u_m: float
    v_m: float
    v_inf: float
    H_v: float
    H_m: float
    q: float
    R: float

    def __post_init__(self) -> None:
        for name in ("u_v", "u_m", "v_m", "v_inf", "H_v", "H_m", "q", "R"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParameters(f"{name} must be a finite real, got {value!r}")
        if self.u_v == self.u_m:
            raise InvalidParameters("u_v must differ from u_m")
        if self.v_m == self.v_inf:
            raise InvalidParameters("v_m must differ from v_inf")
        if self.q == 0:
            raise InvalidParameters("heat flux q must be nonzero")
        if not self.R > 0:
            raise InvalidParameters("spot radius R must be positive")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("u_v", "u_m", "v_m", "v_inf", "H_v", "H_m", "q", "R")}


REFERENCE_PARAMETERS = PhysicalParameters(
    u_v=1.0, u_m=2.0, v_m=1.0, v_inf=0.2, H_v=1.0, H_m=0.5, q=-1.0, R=1.0
)


_KINDS = ("constant", "power", "tabulated")


@dataclass(frozen=True)
class Diffusivity:
    """Temperature-dependent diffusivity ``d(s) = factor * base((s - shift) / stretch)``.

    ``base`` is ``c`` (constant), ``c * y**n`` (power) or a monotone cubic
    interpolant of a table (tabulated). The affine wrapper is what the
    equivalence group acts on; ordinary construction goes through the
    classmethods and leaves it at the identity.
    """

    kind: str
    c: float = 1.0
    n: float = 0.0
    table_s: tuple[float, ...] = ()
    table_d: tuple[float, ...] = ()
    factor: float = 1.0
    shift: float = 0.0
    stretch: float = 1.0
    _interp: PchipInterpolator | None = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise InvalidParameters(f"unknown diffusivity kind {self.kind!r}")
        if self.factor == 0 or self.stretch == 0:
            raise InvalidParameters("diffusivity factor and stretch must be nonzero")
        if self.kind == "tabulated":
            s = np.asarray(self.table_s, dtype=float)
            d = np.asarray(self.table_d, dtype=float)
            if s.ndim != 1 or s.size < 2 or s.shape != d.shape:
                raise InvalidParameters("tabulated diffusivity needs matching 1-D tables of length >= 2")
            if np.any(np.diff(s) <= 0):
                raise InvalidParameters("tabulated diffusivity abscissae must be strictly increasing")
            if np.any(d <= 0):
                raise InvalidParameters("tabulated diffusivity values must be positive")
            object.__setattr__(self, "_interp", PchipInterpolator(s, d, extrapolate=False))
        elif self.kind == "constant" and not self.c * self.factor > 0:
            raise InvalidParameters("constant diffusivity must be positive")

    @classmethod
    def constant(cls, c: float) -> Diffusivity:
        return cls("constant", c=float(c))

    @classmethod
    def power(cls, c: float, n: float) -> Diffusivity:
        return cls("power", c=float(c), n=float(n))

    @classmethod
    def tabulated(cls, s, d) -> Diffusivity:
        return cls("tabulated", table_s=tuple(map(float, s)), table_d=tuple(map(float, d)))

    @classmethod
    def from_dict(cls, spec: dict) -> Diffusivity:
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind == "constant":
            obj = cls.constant(spec.pop("c"))
        elif kind == "power":
            obj = cls.power(spec.pop("c", 1.0), spec.pop("n"))
        elif kind == "tabulated":
            obj = cls.tabulated(spec.pop("s"), spec.pop("d"))
        else:
            raise InvalidParameters(f"unknown diffusivity kind {kind!r}")
        if spec:
            raise InvalidParameters(f"unknown diffusivity keys {sorted(spec)}")
        return obj

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "tabulated":
            out.update(s=list(self.table_s), d=list(self.table_d))
        else:
            out["c"] = self.c
            if self.kind == "power":
                out["n"] = self.n
        if (self.factor, self.shift, self.stretch) != (1.0, 0.0, 1.0):
            out.update(factor=self.factor, shift=self.shift, stretch=self.stretch)
        return out

    def _base(self, y: float) -> float:
        if self.kind == "constant":
            return self.c
        if self.kind == "power":
            if y <= 0 and not float(self.n).is_integer():
                raise DiffusivityDomainError(f"power-law diffusivity needs positive argument, got {y}")
            if y == 0 and self.n < 0:
                raise DiffusivityDomainError("power-law diffusivity singular at 0")
            return self.c * y ** self.n
        val = float(self._interp(y))
        if math.isnan(val):
            lo, hi = self.table_s[0], self.table_s[-1]
            raise DiffusivityDomainError(f"tabulated diffusivity evaluated at {y} outside [{lo}, {hi}]")
        return val

    def _base_derivative(self, y: float) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "power":
            self._base(y)
            return self.c * self.n * y ** (self.n - 1.0)
        val = float(self._interp(y, 1))
        if math.isnan(val):
            raise DiffusivityDomainError(f"tabulated diffusivity evaluated at {y} outside its table")
        return val

    def __call__(self, s: float) -> float:
        val = self.factor * self._base((s - self.shift) / self.stretch)
        if not val > 0:
            raise DiffusivityDomainError(f"diffusivity non-positive ({val}) at s={s}")
        return val

    def derivative(self, s: float) -> float:
        return self.factor / self.stretch * self._base_derivative((s - self.shift) / self.stretch)

    def transformed(self, factor: float, stretch: float, shift: float) -> Diffusivity:
        """Return ``s -> factor * self((s - shift) / stretch)``."""
        return replace(
            self,
            factor=self.factor * factor,
            stretch=self.stretch * stretch,
            shift=shift + stretch * self.shift,
        )

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (self.kind == "power" and self.n == 0)

    @property
    def is_inverse(self) -> bool:
        """True for ``k / (s - c)``, the diffusivity of the exactly solvable case."""
        return self.kind == "power" and self.n == -1


@dataclass(frozen=True)
class Flux:
    """Heat flux magnitude ``Q(t) = q * g((t - t0) / t_scale)``.

    ``g`` is 1 (constant), ``y**-1/2`` (inverse_sqrt) or a user callable
    (arbitrary).
    """

    kind: str
    q: float
    t0: float = 0.0
    t_scale: float = 1.0
    func: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "inverse_sqrt", "arbitrary"):
            raise InvalidParameters(f"unknown flux kind {self.kind!r}")
        if self.q == 0:
            raise InvalidParameters("heat flux q must be nonzero")
        if self.kind == "arbitrary" and self.func is None:
            raise InvalidParameters("arbitrary flux needs a callable")

    def __call__(self, t: float) -> float:
        y = (t - self.t0) / self.t_scale
        if self.kind == "constant":
            return self.q
        if self.kind == "inverse_sqrt":
            if y <= 0:
                raise InvalidParameters(f"q/sqrt(t) flux undefined at t={t}")
            return self.q / math.sqrt(y)
        return self.q * self.func(y)


@dataclass(frozen=True)
class StefanProblem:
    """A member of the problem class: constants, diffusivities and flux.

    The interface coefficients ``d1v = d1(u_v)``, ``d1m = d1(u_m)`` and
    ``d2m = d2(v_m)`` are derived by default; they may be given explicitly
    because the equivalence group rescales them independently of ``d1, d2``.

    ``solid_flux_sign`` orients the solid-side conduction term in the melting
    front balance: the front condition reads
    ``2*sign*d2m*v' = 2*d1m*u' + mu*H_m`` in the similarity variable. The
    default ``-1`` measures the solid flux against the liquid-side normal and is
    the orientation for which the reference parameter set has a solution.
    """

    params: PhysicalParameters
    d1: Diffusivity = field(default_factory=lambda: Diffusivity.power(1.0, -1.0))
    d2: Diffusivity = field(default_factory=lambda: Diffusivity.constant(1.0))
    flux: Flux | None = None
    d1v_override: float | None = None
    d1m_override: float | None = None
    d2m_override: float | None = None
    solid_flux_sign: int = -1

    def __post_init__(self) -> None:
        if self.solid_flux_sign not in (-1, 1):
            raise InvalidParameters("solid_flux_sign must be +1 or -1")
        if self.flux is None:
            object.__setattr__(self, "flux", Flux("constant", self.params.q))

    @property
    def d1v(self) -> float:
        return self.d1v_override if self.d1v_override is not None else self.d1(self.params.u_v)

    @property
    def d1m(self) -> float:
        return self.d1m_override if self.d1m_override is not None else self.d1(self.params.u_m)

    @property
    def d2m(self) -> float:
        return self.d2m_override if self.d2m_override is not None else self.d2(self.params.v_m)


def as_problem(p: PhysicalParameters | StefanProblem) -> StefanProblem:
    return p if isinstance(p, StefanProblem) else StefanProblem(p)
