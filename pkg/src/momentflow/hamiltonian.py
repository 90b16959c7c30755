"""Quantum Hamiltonian expansion and generation of truncated moment ODEs.

The expectation value of the Hamiltonian operator, expanded around the
classical point, is a formal series

    H_Q = sum_{n,a} (1/n!) C(n,a) d^n H / dp^a dq^{n-a} * G(a, n)

truncated at a chosen moment order.  Its Hamiltonian flow under the moment
Poisson algebra gives the equations of motion for (q, p) and all retained
moments; moments above the truncation order are handled by a closure
policy.  Single degree of freedom throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ClosureError, ConfigError, DomainError, RangeError
from .moment_algebra import (
    MomentIndex,
    MomentPolynomial,
    SemiclassicalState,
    bracket_general,
    moment_indices,
)

__all__ = [
    "PotentialSpec",
    "ClassicalHamiltonian",
    "QuantumHamiltonian",
    "expand_quantum_hamiltonian",
    "closure_apply",
    "generate_eom",
    "EquationSystem",
    "to_dimensionless",
    "from_dimensionless",
]


class PotentialSpec:
    """Anharmonic potential with exact derivative access.

    Either polynomial coefficients ``[c_0, c_1, ...]`` for sum c_k q^k, or a
    callable ``derivs(q, n) -> d^n U/dq^n`` with ``max_order`` stating how
    far the derivatives are trustworthy.
    """

    def __init__(self, coefficients=None, derivs: Callable | None = None, max_order: int | None = None):
        if (coefficients is None) == (derivs is None):
            raise ConfigError("give exactly one of coefficients or derivs")
        if coefficients is not None:
            self.coefficients = [float(c) for c in coefficients]
            self.max_order = math.inf
        else:
            self._derivs = derivs
            self.coefficients = None
            if max_order is None:
                raise ConfigError("callable potential needs max_order")
            self.max_order = max_order

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(coefficients=[0.0])

    @classmethod
    def quartic(cls, delta: float) -> "PotentialSpec":
        return cls(coefficients=[0.0, 0.0, 0.0, 0.0, delta / 24.0])

    def derivative(self, q: float, n: int) -> float:
        if n > self.max_order:
            raise RangeError(f"potential derivatives available only to order {self.max_order}")
        if self.coefficients is not None:
            total = 0.0
            for k, c in enumerate(self.coefficients):
                if k >= n and c != 0.0:
                    total += c * math.perm(k, n) * q ** (k - n)
            return total
        return self._derivs(q, n)

    def __call__(self, q: float) -> float:
        return self.derivative(q, 0)


@dataclass
class ClassicalHamiltonian:
    """Oscillator family p^2/2m + (1/2) m w^2 q^2 + U(q), or the isotropic
    cosmology Hamiltonian -3 c^2 sqrt(p) / (gamma^2 kappa) + E on the
    canonical pair (c, p) with {c, p} = gamma kappa / 3."""

    kind: str = "oscillator"
    m: float = 1.0
    omega: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec.zero)
    gamma: float = 1.0
    kappa: float = 1.0
    E: float = 0.0

    def __post_init__(self):
        if self.kind not in ("oscillator", "cosmology"):
            raise ConfigError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "oscillator" and self.m <= 0:
            raise ConfigError("mass must be positive")

    @property
    def xvars(self) -> tuple[str, str]:
        return ("q", "p") if self.kind == "oscillator" else ("c", "p")

    @property
    def bracket_scale(self) -> Fraction | float:
        if self.kind == "oscillator":
            return Fraction(1)
        return self.gamma * self.kappa / 3.0

    def as_polynomial(self) -> MomentPolynomial:
        if self.kind == "oscillator":
            out = MomentPolynomial.term(Fraction(1, 2) * (1.0 / self.m), x={"p": 2})
            if self.omega != 0.0:
                out = out + MomentPolynomial.term(0.5 * self.m * self.omega**2, x={"q": 2})
            # polynomial potentials expand to explicit q powers so that
            # quadratic models stay structurally free of potential symbols
            if self.potential.coefficients is not None:
                for k, c in enumerate(self.potential.coefficients):
                    if c != 0.0:
                        out = out + MomentPolynomial.term(c, x={"q": k})
            else:
                out = out + MomentPolynomial.term(1.0, x={"U0": 1})
            return out
        coeff = -3.0 / (self.gamma**2 * self.kappa)
        out = MomentPolynomial.term(coeff, x={"c": 2, "p": Fraction(1, 2)})
        if self.E != 0.0:
            out = out + MomentPolynomial.constant(self.E)
        return out


@dataclass
class QuantumHamiltonian:
    """H_Q as a formal polynomial, plus the metadata needed to evolve it."""

    poly: MomentPolynomial
    n_max: int
    model: ClassicalHamiltonian

    @property
    def xvars(self):
        return self.model.xvars

    def evaluate(self, state: SemiclassicalState) -> float:
        if self.model.kind == "cosmology" and state.x["p"] <= 0:
            raise DomainError("cosmology Hamiltonian needs p > 0")
        return self.poly.evaluate(state)


def expand_quantum_hamiltonian(H: ClassicalHamiltonian, n_max: int) -> QuantumHamiltonian:
    """Taylor-expand <H> around the classical point, truncating at n_max."""
    if n_max < 2:
        raise ConfigError("n_max must be at least 2")
    if H.kind == "oscillator" and H.potential.max_order < n_max + 2:
        raise ConfigError(
            f"potential derivatives to order {n_max + 2} required, have {H.potential.max_order}"
        )
    qv, pv = H.xvars
    base = H.as_polynomial()
    out = base
    # cache mixed partials: derivs[a] after n passes holds d^n H / dp^a dq^{n-a}
    derivs = {0: base}
    for n in range(1, n_max + 1):
        nxt = {}
        for a in range(n + 1):
            if a == 0:
                nxt[0] = derivs[0].diff_x(qv)
            else:
                nxt[a] = derivs[a - 1].diff_x(pv)
        derivs = nxt
        if n < 2:
            continue
        for a in range(n + 1):
            coeff = Fraction(math.comb(n, a), math.factorial(n))
            g = MomentPolynomial.moment(MomentIndex.single(a, n))
            out = out + coeff * (derivs[a] * g)
    return QuantumHamiltonian(out, n_max, H)


# ---------------------------------------------------------------------------
# closure


def closure_apply(policy: str, idx: MomentIndex) -> MomentPolynomial:
    """Replacement expression for a moment above the truncation order.

    "zero" drops it; "gaussian-factorize" substitutes the Gaussian pairing
    identity (sum over perfect matchings of the n deviation factors into
    second moments), zero for odd order.
    """
    if policy == "zero":
        return MomentPolynomial.zero()
    if policy != "gaussian-factorize":
        raise ConfigError(f"unknown closure policy {policy!r}")
    if idx.dof != 1:
        raise ClosureError(f"gaussian-factorize not defined for {idx}")
    j, k = idx.q_powers[0], idx.p_powers[0]
    n = j + k
    if n % 2 == 1:
        return MomentPolynomial.zero()
    out = MomentPolynomial.zero()
    g_qq = MomentIndex.single(0, 2)
    g_qp = MomentIndex.single(1, 2)
    g_pp = MomentIndex.single(2, 2)
    for t in range(min(j, k) + 1):
        if (j - t) % 2:
            continue
        nqq, npp = (j - t) // 2, (k - t) // 2
        count = Fraction(
            math.factorial(j) * math.factorial(k),
            math.factorial(nqq) * 2**nqq * math.factorial(npp) * 2**npp * math.factorial(t),
        )
        out = out + MomentPolynomial.term(count, gs=(g_qq,) * nqq + (g_qp,) * t + (g_pp,) * npp)
    return out


# ---------------------------------------------------------------------------
# equation system


@dataclass
class EquationSystem:
    """Symbolic right-hand sides plus a compiled numeric evaluator.

    Variable order is (x coordinates, then moments sorted canonically);
    this fixes the layout of state vectors and CSV columns downstream.
    """

    xvars: tuple[str, str]
    moment_vars: list[MomentIndex]
    rhs: dict[object, MomentPolynomial]
    model: ClassicalHamiltonian
    n_max: int
    closure: str

    @property
    def variables(self) -> list:
        return list(self.xvars) + list(self.moment_vars)

    def labels(self) -> list[str]:
        return list(self.xvars) + [g.column_label() for g in self.moment_vars]

    # -- numeric packing ---------------------------------------------------

    def pack(self, state: SemiclassicalState) -> np.ndarray:
        y = [state.x[v] for v in self.xvars]
        y.extend(state.moment(g) for g in self.moment_vars)
        return np.array(y, dtype=float)

    def unpack(self, y: np.ndarray, hbar: float) -> SemiclassicalState:
        x = {v: float(y[i]) for i, v in enumerate(self.xvars)}
        nx = len(self.xvars)
        moments = {g: float(y[nx + i]) for i, g in enumerate(self.moment_vars)}
        pot = self.model.potential if self.model.kind == "oscillator" else None
        return SemiclassicalState(hbar, x, moments, self.n_max, pot)

    def compile(self, hbar: float) -> Callable[[np.ndarray], np.ndarray]:
        """Flatten each RHS into evaluatable term lists once; no symbolic
        work happens per step."""
        slot = {v: i for i, v in enumerate(self.xvars)}
        nx = len(self.xvars)
        for i, g in enumerate(self.moment_vars):
            slot[g] = nx + i
        pot = self.model.potential if self.model.kind == "oscillator" else None
        qslot = slot.get("q")
        cosmology = self.model.kind == "cosmology"
        pslot = slot["p"] if cosmology else None

        compiled = []
        for var in self.variables:
            terms = []
            for c, h, x, gs in self.rhs[var].terms():
                coeff = float(c) * hbar ** float(h)
                upows = []
                xpows = []
                for sym, e in x:
                    if sym.startswith("U") and sym[1:].isdigit():
                        upows.append((int(sym[1:]), float(e)))
                    else:
                        xpows.append((slot[sym], float(e)))
                gidx = [slot[g] for g in gs]
                terms.append((coeff, tuple(xpows), tuple(upows), tuple(gidx)))
            compiled.append(terms)

        def rhs_fn(y: np.ndarray) -> np.ndarray:
            if cosmology and y[pslot] <= 0.0:
                raise DomainError("reached p <= 0")
            q = y[qslot] if qslot is not None else 0.0
            uvals: dict[int, float] = {}
            out = np.empty(len(compiled))
            for i, terms in enumerate(compiled):
                total = 0.0
                for coeff, xpows, upows, gidx in terms:
                    val = coeff
                    for s, e in xpows:
                        val *= y[s] ** e
                    for k, e in upows:
                        if k not in uvals:
                            uvals[k] = pot.derivative(q, k)
                        val *= uvals[k] ** e
                    for s in gidx:
                        val *= y[s]
                    total += val
                out[i] = total
            return out

        return rhs_fn

    # -- listings ----------------------------------------------------------

    def listing_text(self) -> str:
        lines = [f"# model={self.model.kind} n_max={self.n_max} closure={self.closure}"]
        for var in self.variables:
            name = var if isinstance(var, str) else str(var)
            body = self.rhs[var].to_text().replace("\n", " + ")
            lines.append(f"d/dt {name} = {body}")
        return "\n".join(lines)

    def listing_json(self) -> str:
        eqs = []
        for var in self.variables:
            name = var if isinstance(var, str) else str(var)
            terms = []
            for c, h, x, gs in self.rhs[var].terms():
                terms.append(
                    {
                        "coeff": str(c) if isinstance(c, Fraction) else c,
                        "hbar_power": str(h),
                        "x": [[sym, str(e)] for sym, e in x],
                        "moments": [str(g) for g in gs],
                    }
                )
            eqs.append({"variable": name, "terms": terms})
        meta = {"model": self.model.kind, "n_max": self.n_max, "closure": self.closure}
        return json.dumps({"meta": meta, "equations": eqs}, indent=2, sort_keys=True)

    # -- structural probes -------------------------------------------------

    def classical_backreaction_free(self) -> bool:
        """True if no moment appears in the (q, p) equations."""
        return all(not self.rhs[v].moment_indices() for v in self.xvars)

    def block_diagonal(self) -> bool:
        """True if each moment equation couples only to its own order."""
        for g in self.moment_vars:
            for other in self.rhs[g].moment_indices():
                if other.order != g.order:
                    return False
            for _, _, _, gs in self.rhs[g].terms():
                if len(gs) > 1:
                    return False
        return True


def generate_eom(HQ: QuantumHamiltonian, closure: str = "zero") -> EquationSystem:
    """Hamiltonian flow of H_Q over (x, moments up to n_max)."""
    if closure not in ("zero", "gaussian-factorize"):
        raise ConfigError(f"unknown closure policy {closure!r}")
    qv, pv = HQ.xvars
    scale = HQ.model.bracket_scale
    mvars = []
    for n in range(2, HQ.n_max + 1):
        mvars.extend(moment_indices(n, 1))

    rhs: dict[object, MomentPolynomial] = {}
    for var in (qv, pv):
        rhs[var] = bracket_general(MomentPolynomial.x_var(var), HQ.poly, (qv, pv), scale)
    for g in mvars:
        rhs[g] = bracket_general(MomentPolynomial.moment(g), HQ.poly, (qv, pv), scale)

    # close moments above n_max
    for var, poly in rhs.items():
        high = [g for g in poly.moment_indices() if g.order > HQ.n_max]
        for g in sorted(high, key=MomentIndex.sort_key, reverse=True):
            poly = poly.subs_moment(g, closure_apply(closure, g))
        rhs[var] = poly

    return EquationSystem((qv, pv), mvars, rhs, HQ.model, HQ.n_max, closure)


# ---------------------------------------------------------------------------
# moment conventions


def to_dimensionless(value: float, a: int, n: int, m: float, omega: float, hbar: float) -> float:
    """Dimensionful G(a, n) to the tilde convention hbar^{-n/2}(m w)^{n/2-a} G."""
    return hbar ** (-n / 2) * (m * omega) ** (n / 2 - a) * value


def from_dimensionless(value: float, a: int, n: int, m: float, omega: float, hbar: float) -> float:
    return hbar ** (n / 2) * (m * omega) ** (a - n / 2) * value
