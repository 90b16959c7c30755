"""Exact quantum mechanics in a truncated harmonic-oscillator basis.

Serves as the independent ground truth for the moment algebra and for the
truncated dynamics: dense operator matrices, eigendecomposition-based time
evolution, Weyl-ordered moment extraction, a commutator-based bracket
oracle, and moment-sequence reconstruction of wave functions.

Truncation caveat: the top basis levels are polluted by the cutoff, so
commutator identities hold only on the interior block and states must keep
their support well below dimension D.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

import numpy as np
from numpy.polynomial import hermite as np_hermite
from scipy.linalg import expm

from .errors import CapacityError, ReconstructionError, StateError
from .moment_algebra import MomentIndex, SemiclassicalState

__all__ = [
    "FockSpace",
    "fock_ops",
    "weyl_op",
    "Propagator",
    "evolve",
    "moments_of",
    "bracket_oracle",
    "coherent",
    "squeezed",
    "random_state",
    "hamburger_density",
    "hamburger_phase",
    "OracleDProvider",
]

WEYL_CAP = 8  # j + k cap for explicit multinomial symmetrization


def fock_ops(D: int, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0):
    """Position and momentum matrices from the ladder construction.

    Hermiticity is exact by construction (real symmetric q, purely
    imaginary antisymmetric p).
    """
    if D < 8:
        raise CapacityError(f"need D >= 8, got {D}")
    n = np.arange(1, D)
    lower = np.diag(np.sqrt(n), 1)  # annihilation
    lq = math.sqrt(hbar / (2 * m * omega))
    lp = math.sqrt(hbar * m * omega / 2)
    q = lq * (lower + lower.T)
    p = 1j * lp * (lower.T - lower)
    return q, p


class FockSpace:
    """Truncated oscillator basis for N degrees of freedom (N = 1 or 2).

    For N = 2 the per-mode dimension is ``D`` and operators act on the
    kron-product space of dimension D**N; per-mode Weyl-ordered operators
    combine by kron since the modes commute.
    """

    def __init__(self, D: int, m: float = 1.0, omega: float = 1.0, hbar: float = 1.0, dof: int = 1):
        if dof not in (1, 2):
            raise CapacityError("only 1 or 2 degrees of freedom supported")
        self.D = D
        self.m = m
        self.omega = omega
        self.hbar = hbar
        self.dof = dof
        self.q1, self.p1 = fock_ops(D, m, omega, hbar)
        self._weyl_cache: dict[tuple[int, int], np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.D**self.dof

    def weyl(self, j: int, k: int) -> np.ndarray:
        """Single-mode Weyl-ordered q^j p^k (cached)."""
        key = (j, k)
        if key not in self._weyl_cache:
            self._weyl_cache[key] = weyl_op(j, k, self.q1, self.p1)
        return self._weyl_cache[key]

    def mode_op(self, op: np.ndarray, f: int) -> np.ndarray:
        """Embed a single-mode operator on mode f into the full space."""
        if self.dof == 1:
            return op
        eye = np.eye(self.D)
        return np.kron(op, eye) if f == 0 else np.kron(eye, op)

    def weyl_multi(self, powers: tuple[tuple[int, int], ...]) -> np.ndarray:
        """kron product of per-mode Weyl operators, powers[f] = (j_f, k_f)."""
        mats = [self.weyl(j, k) for j, k in powers]
        out = mats[0]
        for mat in mats[1:]:
            out = np.kron(out, mat)
        return out


def weyl_op(j: int, k: int, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Average over all distinct orderings of j copies of q and k copies of p."""
    if j + k > WEYL_CAP:
        raise CapacityError(f"Weyl order {j + k} exceeds cap {WEYL_CAP}")
    if j + k == 0:
        return np.eye(q.shape[0], dtype=complex)
    total = np.zeros(q.shape, dtype=complex)
    positions = range(j + k)
    count = 0
    for qslots in combinations(positions, j):
        acc = np.eye(q.shape[0], dtype=complex)
        for pos in positions:
            acc = acc @ (q if pos in qslots else p)
        total += acc
        count += 1
    return total / count


# ---------------------------------------------------------------------------
# evolution


class Propagator:
    """exp(-iHt/hbar) applied through a one-time eigendecomposition."""

    def __init__(self, H: np.ndarray, hbar: float = 1.0):
        H = np.asarray(H)
        if not np.allclose(H, H.conj().T, atol=1e-12):
            raise StateError("Hamiltonian must be Hermitian")
        self.hbar = hbar
        self.evals, self.evecs = np.linalg.eigh(H)

    def __call__(self, psi0: np.ndarray, t: float) -> np.ndarray:
        c = self.evecs.conj().T @ psi0
        psi = self.evecs @ (np.exp(-1j * self.evals * t / self.hbar) * c)
        return psi


def evolve(H: np.ndarray, psi0: np.ndarray, t: float, hbar: float = 1.0) -> np.ndarray:
    """One-shot evolution; build a Propagator for repeated sample times."""
    return Propagator(H, hbar)(psi0, t)


# ---------------------------------------------------------------------------
# moments


def _expect(psi: np.ndarray, op: np.ndarray) -> complex:
    return complex(psi.conj() @ (op @ psi))


def moments_of(psi: np.ndarray, space: FockSpace, up_to_n: int) -> SemiclassicalState:
    """Classical point and all Weyl-ordered central moments up to order n.

    Centered operators are formed per mode before symmetrization, so the
    binomial bookkeeping happens at operator level and stays exact.
    """
    if space.D < 10 * up_to_n:
        warnings.warn(
            f"D={space.D} is small for moment order {up_to_n}; "
            "truncation may bite", stacklevel=2
        )
    x = {}
    centered = []
    for f in range(space.dof):
        qf = space.mode_op(space.q1, f)
        pf = space.mode_op(space.p1.astype(complex), f)
        qbar = _expect(psi, qf).real
        pbar = _expect(psi, pf).real
        if space.dof == 1:
            x["q"], x["p"] = qbar, pbar
        else:
            x[f"q{f}"], x[f"p{f}"] = qbar, pbar
        qc = space.q1 - qbar * np.eye(space.D)
        pc = space.p1 - pbar * np.eye(space.D)
        centered.append((qc, pc))

    weyl_c: list[dict[tuple[int, int], np.ndarray]] = [{} for _ in range(space.dof)]

    def cweyl(f, j, k):
        if (j, k) not in weyl_c[f]:
            weyl_c[f][(j, k)] = weyl_op(j, k, *centered[f])
        return weyl_c[f][(j, k)]

    moments: dict[MomentIndex, float] = {}
    for n in range(2, up_to_n + 1):
        from .moment_algebra import moment_indices

        for idx in moment_indices(n, space.dof):
            mats = [cweyl(f, idx.q_powers[f], idx.p_powers[f]) for f in range(space.dof)]
            op = mats[0]
            for mat in mats[1:]:
                op = np.kron(op, mat)
            moments[idx] = _expect(psi, op).real
    return SemiclassicalState(space.hbar, x, moments, up_to_n)


# ---------------------------------------------------------------------------
# bracket oracle

#: symbol for <Weyl-ordered product>, one (j, k) pair per mode
_WKey = tuple[tuple[int, int], ...]


def _central_poly(idx: MomentIndex, x: dict[_WKey, float]) -> dict[tuple[_WKey, ...], float]:
    """G as a polynomial in raw Weyl expectations W[(j1,k1),(j2,k2),...].

    The classical point enters as W with a single unit power, e.g. for one
    DOF q = W[(1,0)] and p = W[(0,1)].  Returned as a dict mapping a sorted
    tuple of W keys (a monomial) to its coefficient.
    """
    N = idx.dof
    terms: dict[tuple[_WKey, ...], float] = {}
    ranges = [range(idx.q_powers[f] + 1) for f in range(N)]
    sranges = [range(idx.p_powers[f] + 1) for f in range(N)]
    for rs in product(*ranges):
        for ss in product(*sranges):
            coeff = 1.0
            factors: list[_WKey] = []
            for f in range(N):
                j, k = idx.q_powers[f], idx.p_powers[f]
                r, s = rs[f], ss[f]
                coeff *= math.comb(j, r) * math.comb(k, s) * (-1) ** (j - r + k - s)
                qkey = tuple((1, 0) if g == f else (0, 0) for g in range(N))
                pkey = tuple((0, 1) if g == f else (0, 0) for g in range(N))
                factors.extend([qkey] * (j - r))
                factors.extend([pkey] * (k - s))
            wkey = tuple(zip(rs, ss))
            if any(sum(pair) > 0 for pair in wkey):
                factors.append(wkey)
            key = tuple(sorted(factors))
            terms[key] = terms.get(key, 0.0) + coeff
    return terms


def _poly_grad(terms, values):
    """Gradient of a W-polynomial: dict Wkey -> d(poly)/dW evaluated."""
    grad: dict[_WKey, float] = {}
    for mono, coeff in terms.items():
        for i, wk in enumerate(mono):
            rest = mono[:i] + mono[i + 1 :]
            val = coeff
            for other in rest:
                val *= values[other]
            grad[wk] = grad.get(wk, 0.0) + val
    return grad


def bracket_oracle(i1, i2, psi: np.ndarray, space: FockSpace) -> float:
    """{G_{i1}, G_{i2}} evaluated exactly on the state psi.

    Uses the chain rule over the raw Weyl expectations W_A: the bracket of
    two expectation-value functions is <[A, B]>/(i hbar), and moment
    functions are polynomials in the W_A.  Accepts classical labels "q"/"p"
    (or ("q", f)) in place of either index.
    """
    polys = []
    for idx in (i1, i2):
        if isinstance(idx, MomentIndex):
            polys.append(_central_poly(idx, {}))
        else:
            kind, f = (idx, 0) if isinstance(idx, str) else idx
            key = tuple(
                ((1, 0) if kind == "q" else (0, 1)) if g == f else (0, 0)
                for g in range(space.dof)
            )
            polys.append({(key,): 1.0})

    needed: set[_WKey] = set()
    for poly in polys:
        for mono in poly:
            needed.update(mono)
    ops = {wk: space.weyl_multi(wk) for wk in needed}
    values = {wk: _expect(psi, op).real for wk, op in ops.items()}
    grads = [_poly_grad(poly, values) for poly in polys]

    applied = {wk: ops[wk] @ psi for wk in needed}
    total = 0.0
    for wa, ga in grads[0].items():
        for wb, gb in grads[1].items():
            # <[A,B]>/(i hbar) = 2 Im <A psi, B psi> / hbar for Hermitian A, B
            pb = 2.0 * np.imag(np.vdot(applied[wa], applied[wb])) / space.hbar
            total += ga * gb * pb
    return total


# ---------------------------------------------------------------------------
# state constructors


def coherent(alpha: complex, D: int) -> np.ndarray:
    """Normalized coherent state; errors out if the tail carries weight."""
    n = np.arange(D)
    log_amp = n * np.log(np.abs(alpha) + 1e-300) - 0.5 * np.cumsum(
        np.concatenate([[0.0], np.log(np.arange(1, D))])
    )
    amps = np.exp(log_amp - np.abs(alpha) ** 2 / 2) * np.exp(1j * n * np.angle(alpha))
    if alpha == 0:
        amps = np.zeros(D, dtype=complex)
        amps[0] = 1.0
    tail = np.sum(np.abs(amps[-max(2, D // 20):]) ** 2)
    if tail > 1e-10:
        raise CapacityError(f"coherent-state tail norm {tail:.2e} too large for D={D}")
    return amps / np.linalg.norm(amps)


def displacement(x_point, space: FockSpace) -> np.ndarray:
    """exp((i/hbar)(p0 q - q0 p)) shifting the state to the phase-space point."""
    q0, p0 = x_point
    gen = (1j / space.hbar) * (p0 * space.q1 - q0 * space.p1)
    return expm(gen)


def squeezed(g: np.ndarray, x_point, space: FockSpace) -> np.ndarray:
    """Squeezed state exp((i/2 hbar) g_ij (xhat-x)^i (xhat-x)^j) D(x) |0>.

    g is real symmetric 2x2 acting on the centered pair (qhat-q, phat-p).
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (2, 2) or not np.allclose(g, g.T):
        raise StateError("squeeze matrix must be real symmetric 2x2")
    q0, p0 = x_point
    vac = np.zeros(space.D, dtype=complex)
    vac[0] = 1.0
    psi = displacement((q0, p0), space) @ vac
    qc = space.q1 - q0 * np.eye(space.D)
    pc = space.p1 - p0 * np.eye(space.D)
    xs = [qc, pc.astype(complex)]
    quad = sum(g[i, j] * (xs[i] @ xs[j]) for i in range(2) for j in range(2))
    psi = expm((1j / (2 * space.hbar)) * quad) @ psi
    nrm = np.linalg.norm(psi)
    tail = np.sum(np.abs(psi[-max(2, space.D // 20):]) ** 2) / nrm**2
    if tail > 1e-10:
        raise CapacityError(f"squeezed-state tail norm {tail:.2e} too large for D={space.D}")
    return psi / nrm


def random_state(rng: np.random.Generator, D: int, support: int | None = None) -> np.ndarray:
    """Random normalized state supported on the lowest levels (default D/3)."""
    support = support or D // 3
    psi = np.zeros(D, dtype=complex)
    psi[:support] = rng.standard_normal(support) + 1j * rng.standard_normal(support)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# moment-sequence reconstruction


def hamburger_density(a, order: int):
    """Reconstruct |Psi(q)|^2 from the raw position moments a_l = <q^l>.

    Expands the density in the orthogonal family {H_n(q) e^{-q^2}} with the
    standard normalization int H_n H_m e^{-q^2} dq = 2^n n! sqrt(pi) delta_nm
    (the source text prints 2^n pi n! for this constant, which breaks the
    a_0 = 1 normalization; the standard constant is used).  Assumes the
    dimensionless units m = omega = hbar = 1.
    """
    a = np.asarray(a, dtype=float)
    if a.size < order + 1:
        raise ReconstructionError(f"need {order + 1} moments, got {a.size}")
    cs = []
    for n in range(order + 1):
        herm = np_hermite.herm2poly([0] * n + [1])  # H_n power-basis coeffs
        cs.append(float(np.dot(herm, a[: n + 1])))

    def density(q):
        q = np.asarray(q, dtype=float)
        total = np.zeros_like(q)
        for n, cn in enumerate(cs):
            hn = np_hermite.hermval(q, [0] * n + [1])
            total += cn * hn / (2**n * math.factorial(n) * math.sqrt(math.pi))
        return np.exp(-(q**2)) * total

    return density


def hamburger_phase(b, a, density, order: int, hbar: float = 1.0):
    """Reconstruct the phase gradient d(alpha)/dq from b_n = <q^n p>.

    Writing Psi = |Psi| e^{i alpha}, the real combination
    m_n = b_n / hbar - i (n/2) a_{n-1} equals int q^n rho(q) alpha'(q) dq;
    the product rho * alpha' is then expanded like the density and divided
    out pointwise.
    """
    b = np.asarray(b, dtype=complex)
    a = np.asarray(a, dtype=float)
    if b.size < order + 1:
        raise ReconstructionError(f"need {order + 1} mixed moments, got {b.size}")
    m = np.empty(order + 1)
    for n in range(order + 1):
        prev = a[n - 1] if n >= 1 else 0.0
        val = b[n] / hbar - 0.5j * n * prev
        if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
            raise ReconstructionError(
                f"mixed moment b_{n} inconsistent with a-sequence (imag {val.imag:.2e})"
            )
        m[n] = val.real
    cs = []
    for n in range(order + 1):
        herm = np_hermite.herm2poly([0] * n + [1])
        cs.append(float(np.dot(herm, m[: n + 1])))

    def phase_gradient(q):
        q = np.asarray(q, dtype=float)
        total = np.zeros_like(q)
        for n, cn in enumerate(cs):
            hn = np_hermite.hermval(q, [0] * n + [1])
            total += cn * hn / (2**n * math.factorial(n) * math.sqrt(math.pi))
        rho = density(q)
        if np.any(rho <= 0):
            raise ReconstructionError("density not positive at a phase-evaluation point")
        return np.exp(-(q**2)) * total / rho

    return phase_gradient


# ---------------------------------------------------------------------------
# characteristic-function provider


class OracleDProvider:
    """D(alpha) = <exp(alpha . (xhat - x))> evaluated on a Fock-basis state.

    The exponent is Hermitian, so the matrix exponential grows with alpha;
    keep amplitudes modest relative to the basis size.
    """

    def __init__(self, psi: np.ndarray, space: FockSpace):
        self.psi = psi
        self.space = space
        self.hbar = space.hbar
        st = moments_of(psi, space, 2)
        self._qc = space.q1 - st.x["q"] * np.eye(space.D)
        self._pc = (space.p1 - st.x["p"] * np.eye(space.D)).astype(complex)

    def D(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        gen = alpha[0] * self._qc + alpha[1] * self._pc
        return _expect(self.psi, expm(gen)).real
