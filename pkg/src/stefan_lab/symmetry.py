"""Point symmetries of the problem class.

Vector fields here have coefficients that are affine in ``(t, x1, x2, x3)``,
which is enough for every generator involved (translations, the rotation
``J12`` and the scaling ``D``). Such a field is stored as a 4x5 matrix: row
``i`` holds the coefficient of ``d/d(coord_i)`` as ``[const, t, x1, x2, x3]``.
Brackets of affine fields are affine, so all Lie-algebra manipulations are
exact matrix arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .model import Diffusivity, Flux, InvalidParameters, PhysicalParameters, StefanProblem, as_problem

__all__ = [
    "AffineVectorField",
    "EquivalenceParams",
    "SubalgebraSpec",
    "P_t",
    "P1",
    "P2",
    "P3",
    "J12",
    "D",
    "commutator",
    "structure_constants",
    "in_span",
    "invariance_generators",
    "optimal_subalgebras",
    "reduction_algebra",
    "flow",
    "flow_map",
    "equivalence_transform",
    "verify_invariance",
    "InvarianceReport",
]

COORDS = ("t", "x1", "x2", "x3")


class AffineVectorField:
    """``X = sum_i (A p + a)_i d/dp_i`` with ``p = (t, x1, x2, x3)``."""

    __slots__ = ("matrix", "name")

    def __init__(self, matrix, name: str = "") -> None:
        m = np.array(matrix, dtype=float)
        if m.shape != (4, 5):
            raise ValueError(f"affine vector field needs a 4x5 coefficient matrix, got {m.shape}")
        m.setflags(write=False)
        self.matrix = m
        self.name = name

    @classmethod
    def from_parts(cls, linear, offset, name: str = "") -> AffineVectorField:
        m = np.zeros((4, 5))
        m[:, 0] = offset
        m[:, 1:] = linear
        return cls(m, name)

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, 1:]

    @property
    def offset(self) -> np.ndarray:
        return self.matrix[:, 0]

    def __call__(self, point) -> np.ndarray:
        return self.linear @ np.asarray(point, float) + self.offset

    def __add__(self, other: AffineVectorField) -> AffineVectorField:
        return AffineVectorField(self.matrix + other.matrix)

    def __sub__(self, other: AffineVectorField) -> AffineVectorField:
        return AffineVectorField(self.matrix - other.matrix)

    def __neg__(self) -> AffineVectorField:
        return AffineVectorField(-self.matrix)

    def __mul__(self, c: float) -> AffineVectorField:
        return AffineVectorField(float(c) * self.matrix)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, AffineVectorField) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.matrix.any()

    def augmented(self) -> np.ndarray:
        """5x5 matrix acting on ``(p, 1)``."""
        m = np.zeros((5, 5))
        m[:4, :4] = self.linear
        m[:4, 4] = self.offset
        return m

    def __repr__(self) -> str:
        if self.name:
            return f"AffineVectorField({self.name})"
        terms = []
        for i, c in enumerate(COORDS):
            row = self.matrix[i]
            if row.any():
                parts = [f"{row[0]:g}"] if row[0] else []
                parts += [f"{row[j + 1]:g}*{COORDS[j]}" for j in range(4) if row[j + 1]]
                terms.append(f"({' + '.join(parts)}) d/d{c}")
        return "AffineVectorField(" + (" + ".join(terms) or "0") + ")"


def _translation(i: int, name: str) -> AffineVectorField:
    m = np.zeros((4, 5))
    m[i, 0] = 1.0
    return AffineVectorField(m, name)


P_t = _translation(0, "P_t")
P1 = _translation(1, "P1")
P2 = _translation(2, "P2")
P3 = _translation(3, "P3")
# x2 d/dx1 - x1 d/dx2
J12 = AffineVectorField.from_parts(
    [[0, 0, 0, 0], [0, 0, 1, 0], [0, -1, 0, 0], [0, 0, 0, 0]], np.zeros(4), "J12"
)
# 2t d/dt + x_i d/dx_i
D = AffineVectorField.from_parts(np.diag([2.0, 1.0, 1.0, 1.0]), np.zeros(4), "D")


def commutator(X: AffineVectorField, Y: AffineVectorField) -> AffineVectorField:
    """Lie bracket ``[X, Y]^i = X(Y^i) - Y(X^i)``.

    For ``X = A p + a`` and ``Y = B p + b`` this is ``(BA - AB) p + (B a - A b)``.
    """
    A, a = X.linear, X.offset
    B, b = Y.linear, Y.offset
    return AffineVectorField.from_parts(B @ A - A @ B, B @ a - A @ b)


def _flat(fields: Sequence[AffineVectorField]) -> np.ndarray:
    return np.array([f.matrix.ravel() for f in fields]).T


def in_span(X: AffineVectorField, basis: Sequence[AffineVectorField], tol: float = 1e-10) -> bool:
    """Rank test: adding ``X`` to ``basis`` does not increase the rank."""
    if X.is_zero():
        return True
    base = _flat(basis)
    r0 = np.linalg.matrix_rank(base, tol=tol)
    r1 = np.linalg.matrix_rank(np.column_stack([base, X.matrix.ravel()]), tol=tol)
    return r1 == r0


def structure_constants(basis: Sequence[AffineVectorField]) -> np.ndarray:
    """``c[i, j, k]`` with ``[e_i, e_j] = sum_k c[i, j, k] e_k``.

    Raises:
        ValueError: if the basis is dependent or not closed under the bracket.
    """
    n = len(basis)
    base = _flat(basis)
    if np.linalg.matrix_rank(base) != n:
        raise ValueError("basis is linearly dependent")
    c = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            br = commutator(basis[i], basis[j]).matrix.ravel()
            coef, *_ = np.linalg.lstsq(base, br, rcond=None)
            if not np.allclose(base @ coef, br, atol=1e-12):
                raise ValueError(f"[{basis[i]!r}, {basis[j]!r}] leaves the span")
            c[i, j] = coef
    return c


def invariance_generators(flux_kind: str) -> list[AffineVectorField]:
    """Maximal invariance algebra of the problem class for a given flux shape.

    ``arbitrary`` gives the translations in ``x`` and the rotation ``J12``;
    ``inverse_sqrt`` (``Q = q/sqrt(t)``) adds the scaling ``D``; ``constant``
    adds the time translation ``P_t``.
    """
    base = [P1, P2, P3, J12]
    if flux_kind == "arbitrary":
        return base
    if flux_kind == "inverse_sqrt":
        return base + [D]
    if flux_kind == "constant":
        return base + [P_t]
    raise ValueError(f"unknown flux kind {flux_kind!r}")


# ---------------------------------------------------------------------------
# Optimal system of subalgebras of <P_t, P1, P2, P3, J12>
# ---------------------------------------------------------------------------

@dataclass
class SubalgebraSpec:
    dimension: int
    basis: list[AffineVectorField]
    parameters: dict[str, float]
    label: str = ""

    def is_independent(self) -> bool:
        return np.linalg.matrix_rank(_flat(self.basis), tol=1e-10) == len(self.basis)

    def is_closed(self) -> bool:
        return all(
            in_span(commutator(X, Y), self.basis)
            for i, X in enumerate(self.basis)
            for Y in self.basis[i + 1 :]
        )


def _T(phi):
    return P3 * math.cos(phi) + P_t * math.sin(phi)


def _N(phi):
    return P3 * math.sin(phi) - P_t * math.cos(phi)


# label, parameter slots used, basis builder
_CATALOG: dict[int, list[tuple[str, tuple[str, ...], Callable]]] = {
    1: [
        ("<P3 cos(phi) + P_t sin(phi)>", ("phi",), lambda a, b, f: [_T(f)]),
        ("<P1 + alpha (P3 cos(phi) + P_t sin(phi))>", ("alpha", "phi"), lambda a, b, f: [P1 + a * _T(f)]),
        ("<J12 + beta (P3 cos(phi) + P_t sin(phi))>", ("beta", "phi"), lambda a, b, f: [J12 + b * _T(f)]),
    ],
    2: [
        ("<P3, P_t>", (), lambda a, b, f: [P3, P_t]),
        ("<P1 + alpha T(phi), P2>", ("alpha", "phi"), lambda a, b, f: [P1 + a * _T(f), P2]),
        ("<P1 + alpha T(phi), N(phi)>", ("alpha", "phi"), lambda a, b, f: [P1 + a * _T(f), _N(f)]),
        ("<J12 + beta T(phi), N(phi)>", ("beta", "phi"), lambda a, b, f: [J12 + b * _T(f), _N(f)]),
    ],
    3: [
        ("<P1, P3, P_t>", (), lambda a, b, f: [P1, P3, P_t]),
        ("<J12, P3, P_t>", (), lambda a, b, f: [J12, P3, P_t]),
        ("<P1 + alpha T(phi), P2, N(phi)>", ("alpha", "phi"), lambda a, b, f: [P1 + a * _T(f), P2, _N(f)]),
        ("<J12 + beta T(phi), P1, P2>", ("beta", "phi"), lambda a, b, f: [J12 + b * _T(f), P1, P2]),
    ],
    4: [
        ("<P1, P2, P3, P_t>", (), lambda a, b, f: [P1, P2, P3, P_t]),
        ("<J12 + beta T(phi), P1, P2, N(phi)>", ("beta", "phi"), lambda a, b, f: [J12 + b * _T(f), P1, P2, _N(f)]),
    ],
    5: [
        ("<J12, P1, P2, P3, P_t>", (), lambda a, b, f: [J12, P1, P2, P3, P_t]),
    ],
}


def optimal_subalgebras(s: int, alpha: float = 0.0, beta: float = 0.0, phi: float = 0.0) -> list[SubalgebraSpec]:
    """Instantiate every optimal-system family of dimension ``s``.

    ``T(phi) = P3 cos(phi) + P_t sin(phi)`` and ``N(phi) = P3 sin(phi) - P_t cos(phi)``;
    ``alpha >= 0``, ``0 <= phi < pi``.

    Raises:
        ValueError: for ``s`` outside 1..5 or parameters outside their ranges,
            or if an instantiated family fails the closure check.
    """
    if s not in _CATALOG:
        raise ValueError(f"subalgebra dimension must be in 1..5, got {s}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not 0 <= phi < math.pi:
        raise ValueError("phi must lie in [0, pi)")
    values = {"alpha": alpha, "beta": beta, "phi": phi}
    out = []
    for label, slots, build in _CATALOG[s]:
        spec = SubalgebraSpec(s, build(alpha, beta, phi), {k: values[k] for k in slots}, label)
        if not (spec.is_independent() and spec.is_closed()):
            raise ValueError(f"catalog entry {label} failed closure at {spec.parameters}")
        out.append(spec)
    return out


def reduction_algebra(phi: float = 0.0) -> SubalgebraSpec:
    """``<J12, P3 sin(phi) - P_t cos(phi)>``, the algebra behind the travelling-frame ansatz."""
    return SubalgebraSpec(2, [J12, _N(phi)], {"phi": phi}, "<J12, P3 sin(phi) - P_t cos(phi)>")


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------

def flow_map(X: AffineVectorField, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """``(M, b)`` with ``flow(X, epsilon, p) = M p + b``.

    Translations and diagonal linear parts use closed forms, anything else the
    matrix exponential of the 5x5 augmented representation.
    """
    A, a = X.linear, X.offset
    eps = float(epsilon)
    if not A.any():
        return np.eye(4), eps * a
    if not (A - np.diag(np.diag(A))).any():
        lam = np.diag(A)
        scale = np.exp(eps * lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(lam != 0, a * np.expm1(eps * lam) / np.where(lam != 0, lam, 1.0), eps * a)
        return np.diag(scale), b
    if not a.any() and not A[[0, 3]].any() and not A[:, [0, 3]].any() and A[1, 1] == A[2, 2] == 0 and A[1, 2] == -A[2, 1]:
        # rotation in the (x1, x2) plane: x1' = w x2, x2' = -w x1
        w = A[1, 2]
        c, s = math.cos(w * eps), math.sin(w * eps)
        M = np.eye(4)
        M[1, 1], M[1, 2], M[2, 1], M[2, 2] = c, s, -s, c
        return M, np.zeros(4)
    E = expm(eps * X.augmented())
    return E[:4, :4], E[:4, 4]


def flow(X: AffineVectorField, epsilon: float, point) -> tuple[float, float, float, float]:
    """Image of ``point = (t, x1, x2, x3)`` under the one-parameter group of ``X``.

    ``J12 = x2 d/dx1 - x1 d/dx2`` turns ``(x1, x2)`` clockwise by ``epsilon``.
    """
    M, b = flow_map(X, epsilon)
    return tuple(float(c) for c in M @ np.asarray(point, float) + b)


# ---------------------------------------------------------------------------
# Equivalence group
# ---------------------------------------------------------------------------

def _rot(b1: float) -> np.ndarray:
    c, s = math.cos(b1), math.sin(b1)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class EquivalenceParams:
    """Parameters of one element of the equivalence group.

    Acts as ``x12 -> beta Rot(beta1) x12 + (gamma1, gamma2)``,
    ``x3 -> beta x3 + gamma3``, ``t -> alpha t + gamma0``,
    ``u -> delta1 u + gamma4``, ``v -> delta2 v + gamma5``.
    """

    alpha: float = 1.0
    beta: float = 1.0
    beta1: float = 0.0
    gamma0: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    gamma4: float = 0.0
    gamma5: float = 0.0
    delta1: float = 1.0
    delta2: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha * self.beta * self.delta1 * self.delta2 == 0:
            raise InvalidParameters("equivalence transformation needs alpha*beta*delta1*delta2 != 0")

    def transform_point(self, point) -> tuple[float, float, float, float]:
        t, x1, x2, x3 = map(float, point)
        y = self.beta * (_rot(self.beta1) @ np.array([x1, x2])) + np.array([self.gamma1, self.gamma2])
        return (self.alpha * t + self.gamma0, float(y[0]), float(y[1]), self.beta * x3 + self.gamma3)

    def transform_u(self, u: float) -> float:
        return self.delta1 * u + self.gamma4

    def transform_v(self, v: float) -> float:
        return self.delta2 * v + self.gamma5

    def inverse(self) -> EquivalenceParams:
        g12 = -(_rot(-self.beta1) @ np.array([self.gamma1, self.gamma2])) / self.beta
        return EquivalenceParams(
            alpha=1.0 / self.alpha,
            beta=1.0 / self.beta,
            beta1=-self.beta1,
            gamma0=-self.gamma0 / self.alpha,
            gamma1=float(g12[0]),
            gamma2=float(g12[1]),
            gamma3=-self.gamma3 / self.beta,
            gamma4=-self.gamma4 / self.delta1,
            gamma5=-self.gamma5 / self.delta2,
            delta1=1.0 / self.delta1,
            delta2=1.0 / self.delta2,
        )

    def compose(self, first: EquivalenceParams) -> EquivalenceParams:
        """The transformation 'apply ``first``, then ``self``'."""
        g12 = self.beta * (_rot(self.beta1) @ np.array([first.gamma1, first.gamma2])) + np.array(
            [self.gamma1, self.gamma2]
        )
        return EquivalenceParams(
            alpha=self.alpha * first.alpha,
            beta=self.beta * first.beta,
            beta1=self.beta1 + first.beta1,
            gamma0=self.alpha * first.gamma0 + self.gamma0,
            gamma1=float(g12[0]),
            gamma2=float(g12[1]),
            gamma3=self.beta * first.gamma3 + self.gamma3,
            gamma4=self.delta1 * first.gamma4 + self.gamma4,
            gamma5=self.delta2 * first.gamma5 + self.gamma5,
            delta1=self.delta1 * first.delta1,
            delta2=self.delta2 * first.delta2,
        )


def equivalence_transform(e: EquivalenceParams, problem: StefanProblem | PhysicalParameters) -> StefanProblem:
    """Map a problem of the class to its image under ``e``.

    Temperatures shift and scale with ``delta``/``gamma``, latent heats scale
    by ``alpha``, the flux by ``beta``, the spot radius by ``|beta|``, the
    diffusivity functions by ``beta^2/alpha`` and the three interface
    coefficients by ``beta^2/delta``. The interface coefficients are carried
    as explicit values afterwards.
    """
    prob = as_problem(problem)
    p = prob.params
    b2 = e.beta * e.beta
    new_params = PhysicalParameters(
        u_v=e.transform_u(p.u_v),
        u_m=e.transform_u(p.u_m),
        v_m=e.transform_v(p.v_m),
        v_inf=e.transform_v(p.v_inf),
        H_v=e.alpha * p.H_v,
        H_m=e.alpha * p.H_m,
        q=e.beta * p.q,
        R=abs(e.beta) * p.R,
    )
    fl = prob.flux
    new_flux = Flux(fl.kind, e.beta * fl.q, t0=e.alpha * fl.t0 + e.gamma0, t_scale=e.alpha * fl.t_scale, func=fl.func)
    return StefanProblem(
        params=new_params,
        d1=prob.d1.transformed(b2 / e.alpha, e.delta1, e.gamma4),
        d2=prob.d2.transformed(b2 / e.alpha, e.delta2, e.gamma5),
        flux=new_flux,
        d1v_override=b2 / e.delta1 * prob.d1v,
        d1m_override=b2 / e.delta1 * prob.d1m,
        d2m_override=b2 / e.delta2 * prob.d2m,
        solid_flux_sign=prob.solid_flux_sign,
    )


# ---------------------------------------------------------------------------
# Numerical invariance check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvarianceReport:
    generator: str
    epsilon: float
    before: float
    after: float
    factor: float = 2.0

    @property
    def invariant(self) -> bool:
        """Residuals after flowing stay within ``factor`` times the original ones."""
        return self.after <= self.factor * max(self.before, 1e-300)


def verify_invariance(
    X: AffineVectorField,
    epsilon: float,
    field,
    checker: Callable[[object], float],
    factor: float = 2.0,
) -> InvarianceReport:
    """Push a verified solution forward along ``X`` and re-run ``checker``.

    The transformed field is ``u_eps(p) = u(flow(X, -epsilon, p))`` (see
    :class:`stefan_lab.reconstruction.TransformedField`); ``checker`` maps a
    field to its maximal residual.
    """
    from .reconstruction import TransformedField

    before = checker(field)
    after = checker(TransformedField(field, X, epsilon))
    return InvarianceReport(X.name or repr(X), float(epsilon), float(before), float(after), factor)
