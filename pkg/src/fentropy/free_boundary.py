"""Harmonic measures on the boundary of the free group and entropy minimality.

Depth-n cylinder masses plus a tail rule determine a genuine boundary measure;
the harmonic tail makes the mu-harmonic measure itself a member of every
scanned family. First-passage probabilities q_i solve
q_j = p_j + q_j * sum_{i != j} p_i q_{-i}, and v_i = q_i/(1+q_i).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .divergence import INF, ConvexGenerator, FiniteMeasure, f_divergence
from .errors import (
    DepthMismatch,
    NoConvergence,
    NonPositiveDenominator,
    NotProbability,
    ParseError,
    RankTooSmall,
    StepTooLarge,
)
from .words import ReducedWord, encode_word, decode_word, enumerate_words, letter_order, reduce_letters

Q_RESIDUAL_TOL = 1e-12
V_SUM_TOL = 1e-10


@dataclass(frozen=True)
class GeneratorMeasure:
    """A generating symmetric probability measure on the +-d generators."""

    d: int
    p: dict  # letter j -> weight, j in {-d..-1, 1..d}

    def __post_init__(self):
        if self.d < 2:
            raise RankTooSmall("rank d must be >= 2 (the walk on Z is recurrent)")
        letters = set(letter_order(self.d))
        if set(self.p) != letters:
            raise ParseError(f"p must be keyed by exactly {sorted(letters)}")
        for j in range(1, self.d + 1):
            if self.p[j] <= 0 or self.p[-j] <= 0:
                raise NotProbability("generator weights must be strictly positive")
            if abs(self.p[j] - self.p[-j]) > 1e-12:
                raise NotProbability(f"weights of {j} and {-j} differ")
        if abs(math.fsum(self.p.values()) - 1.0) > 1e-12:
            raise NotProbability("generator weights must sum to 1")

    def weight(self, j: int) -> float:
        return self.p[j]

    def to_json(self) -> dict:
        return {"d": self.d, "p": {str(j): self.p[j] for j in letter_order(self.d)}}

    @classmethod
    def from_json(cls, doc: dict) -> "GeneratorMeasure":
        try:
            d = int(doc["d"])
            p = {int(k): float(v) for k, v in doc["p"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad GeneratorMeasure JSON: {exc}") from exc
        return cls(d, p)


def uniform_generator_measure(d: int) -> GeneratorMeasure:
    return GeneratorMeasure(d, {j: 1.0 / (2 * d) for j in letter_order(d)})


@dataclass(frozen=True)
class QVector:
    """First-passage probabilities q and the boundary hit weights v."""

    d: int
    q: dict  # letter -> q in (0,1)

    @property
    def v(self) -> dict:
        return {j: qj / (1.0 + qj) for j, qj in self.q.items()}

    def residuals(self, mu: GeneratorMeasure) -> dict:
        res = {}
        for j in letter_order(self.d):
            s = math.fsum(mu.p[i] * self.q[-i] for i in letter_order(self.d) if i != j)
            res[j] = self.q[j] - (mu.p[j] + self.q[j] * s)
        return res


def _q_iteration_map(mu: GeneratorMeasure, q: dict) -> dict:
    out = {}
    for j in letter_order(mu.d):
        s = math.fsum(mu.p[i] * q[-i] for i in letter_order(mu.d) if i != j)
        out[j] = mu.p[j] + q[j] * s
    return out


def _newton_polish(mu: GeneratorMeasure, q: dict, steps: int = 6) -> dict:
    """Newton refinement of the symmetric reduced system.

    With q_{-j} = q_j the system is F_j = q_j - p_j - q_j S + p_j q_j^2 with
    S = 2 sum_k p_k q_k; the fixed-point phase lands close enough that a few
    Newton steps push the residual to machine precision even when the
    fixed-point contraction factor is near 1.
    """
    d = mu.d
    p = np.array([mu.p[j] for j in range(1, d + 1)])
    x = np.array([q[j] for j in range(1, d + 1)])
    for _ in range(steps):
        s = 2.0 * float(p @ x)
        fval = x - p - x * s + p * x * x
        jac = -2.0 * np.outer(x, p)
        jac[np.diag_indices(d)] += 1.0 - s + 2.0 * p * x
        try:
            step = np.linalg.solve(jac, fval)
        except np.linalg.LinAlgError:
            break
        x = x - step
        if np.max(np.abs(step)) < 1e-16:
            break
    if np.all((x > 0.0) & (x < 1.0)):
        return {j: float(x[abs(j) - 1]) for j in letter_order(d)}
    return q


def solve_q(mu: GeneratorMeasure, tol: float = Q_RESIDUAL_TOL, max_iter: int = 100_000) -> QVector:
    """Damped fixed-point iteration for the first-passage system.

    The iteration map is monotone on (0,1)^{2d}; damping with theta=0.5 guards
    oscillation. If the start 2*p drifts toward the spurious fixed point at 1,
    restart from p, which increases monotonically to the interior root.
    """
    if tol <= 0:
        raise ParseError("tol must be positive")
    theta = 0.5
    for start in ({j: 2.0 * mu.p[j] for j in letter_order(mu.d)}, dict(mu.p)):
        q = dict(start)
        for _ in range(max_iter):
            m = _q_iteration_map(mu, q)
            q = {j: (1.0 - theta) * q[j] + theta * m[j] for j in q}
            if max(abs(q[j] - m[j]) for j in q) < tol / 4:
                break
        # exact symmetrization; the iterates are symmetric up to roundoff
        q = {j: 0.5 * (q[j] + q[-j]) for j in q}
        q = _newton_polish(mu, q)
        qv = QVector(mu.d, q)
        res = qv.residuals(mu)
        if max(abs(r) for r in res.values()) < tol and all(0.0 < q[j] < 1.0 for j in q):
            vsum = math.fsum(qv.v.values())
            if abs(vsum - 1.0) > 10 * max(tol, 1e-12):
                raise NoConvergence(f"q solved but sum v = {vsum!r}")
            return qv
    raise NoConvergence(f"q iteration did not reach residual {tol} in {max_iter} steps")


@dataclass(frozen=True)
class TailRule:
    kind: str  # "harmonic" | "uniform"
    qvec: QVector | None = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "uniform"):
            raise ParseError(f"unknown tail rule {self.kind!r}")
        if self.kind == "harmonic" and self.qvec is None:
            raise ParseError("harmonic tail rule needs a QVector")

    def conditional(self, last: int, nxt: int, d: int) -> float:
        """Next-letter probability given the current last letter."""
        if nxt == -last:
            return 0.0
        if self.kind == "uniform":
            return 1.0 / (2 * d - 1)
        q, v = self.qvec.q, self.qvec.v
        return q[last] * v[nxt] / v[last]


@dataclass(frozen=True)
class CylinderMeasure:
    """Masses on depth-n cylinders of the boundary, plus a tail rule."""

    d: int
    depth: int
    masses: dict  # length-n reduced word (tuple) -> mass
    tail: TailRule

    def __post_init__(self):
        if self.depth < 1:
            raise DepthMismatch("depth must be >= 1")
        for w, m in self.masses.items():
            if len(w) != self.depth:
                raise DepthMismatch(f"word {w} has length {len(w)}, expected {self.depth}")
            if m < 0:
                raise NotProbability(f"negative mass at {w}")

    @property
    def total(self) -> float:
        return math.fsum(self.masses.values())

    def mass(self, w: tuple) -> float:
        return self.masses.get(w, 0.0)

    def refine(self) -> "CylinderMeasure":
        """Extend to depth+1 using the tail rule."""
        out = {}
        for w, m in sorted(self.masses.items()):
            last = w[-1]
            for x in letter_order(self.d):
                if x == -last:
                    continue
                out[w + (x,)] = m * self.tail.conditional(last, x, self.d)
        return CylinderMeasure(self.d, self.depth + 1, out, self.tail)

    def refine_to(self, depth: int) -> "CylinderMeasure":
        nu = self
        while nu.depth < depth:
            nu = nu.refine()
        return nu

    def marginal(self, depth: int) -> "CylinderMeasure":
        """Sum masses over extensions down to the given smaller depth."""
        if depth > self.depth or depth < 1:
            raise DepthMismatch(f"cannot marginalize depth {self.depth} to {depth}")
        acc: dict = {}
        for w, m in self.masses.items():
            acc.setdefault(w[:depth], []).append(m)
        return CylinderMeasure(
            self.d, depth, {w: math.fsum(v) for w, v in sorted(acc.items())}, self.tail
        )

    def to_json(self) -> dict:
        doc = {
            "d": self.d,
            "depth": self.depth,
            "tail": self.tail.kind,
            "masses": {encode_word(w): m for w, m in sorted(self.masses.items())},
        }
        if self.tail.kind == "harmonic":
            doc["q"] = {str(j): self.tail.qvec.q[j] for j in letter_order(self.d)}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "CylinderMeasure":
        try:
            d = int(doc["d"])
            depth = int(doc["depth"])
            kind = doc["tail"]
            masses = {decode_word(k, d): float(v) for k, v in doc["masses"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad CylinderMeasure JSON: {exc}") from exc
        if kind == "harmonic":
            if "q" not in doc:
                raise ParseError("harmonic tail needs a 'q' object in JSON")
            qv = QVector(d, {int(k): float(v) for k, v in doc["q"].items()})
            tail = TailRule("harmonic", qv)
        else:
            tail = TailRule(kind)
        return cls(d, depth, masses, tail)


def harmonic_measure(mu: GeneratorMeasure, depth: int) -> CylinderMeasure:
    """nu_mu on depth-n cylinders: mass(i_1...i_n) = q_{i_1}...q_{i_{n-1}} v_{i_n}."""
    if depth < 1:
        raise DepthMismatch("depth must be >= 1")
    qv = solve_q(mu)
    q, v = qv.q, qv.v
    masses = {}
    for w in enumerate_words(mu.d, depth):
        m = v[w[-1]]
        for x in w[:-1]:
            m *= q[x]
        masses[w] = m
    return CylinderMeasure(mu.d, depth, masses, TailRule("harmonic", qv))


def pushforward(g: ReducedWord, nu: CylinderMeasure, target_depth: int) -> CylinderMeasure:
    """(g nu) on depth-m cylinders from nu at depth m+|g|.

    Every depth-(m+|g|) cylinder maps into exactly one depth-m cylinder since
    |reduce(g u)| >= m, so the output total equals the input total.
    """
    if target_depth < 1:
        raise DepthMismatch("target depth must be >= 1")
    if nu.depth != target_depth + len(g):
        raise DepthMismatch(
            f"need source depth {target_depth + len(g)}, got {nu.depth}"
        )
    acc: dict = {}
    gl = g.letters
    for u, m in nu.masses.items():
        r = reduce_letters(gl + u, nu.d)
        acc.setdefault(r[:target_depth], []).append(m)
    out = {w: math.fsum(v) for w, v in sorted(acc.items())}
    return CylinderMeasure(nu.d, target_depth, out, nu.tail)


def rn_generator(qv: QVector, j: int, w: tuple) -> float:
    """d(a_j nu_mu)/d nu_mu on the cylinder C_w: 1/q_j if w starts with a_j, else q_j."""
    if len(w) < 1:
        raise DepthMismatch("need a nonempty cylinder word")
    return 1.0 / qv.q[j] if w[0] == j else qv.q[j]


def _divergence_on_words(p_meas: CylinderMeasure, q_meas: CylinderMeasure,
                         f: ConvexGenerator) -> float:
    labels = set(p_meas.masses) | set(q_meas.masses)
    # both totals equal 1 in exact arithmetic; divide out the fixed-point
    # solver's roundoff so the strict probability check stays meaningful
    pt = math.fsum(p_meas.mass(w) for w in labels)
    qt = math.fsum(q_meas.mass(w) for w in labels)
    if not (0.999 < pt < 1.001 and 0.999 < qt < 1.001):
        raise NotProbability(f"cylinder totals {pt!r}, {qt!r} are not near 1")
    P = FiniteMeasure({w: p_meas.mass(w) / pt for w in labels})
    Q = FiniteMeasure({w: q_meas.mass(w) / qt for w in labels})
    return f_divergence(P, Q, f)


def cylinder_entropy(lam: GeneratorMeasure, nu: CylinderMeasure,
                     f: ConvexGenerator) -> float:
    """h = sum_j lam_j D_f(a_j nu || nu), computed at depth n+1.

    For tail-extended measures d(a_j nu)/d nu is constant on depth-(n+1)
    cylinders, so the finite partition at depth n+1 already realizes the full
    divergence.
    """
    if lam.d != nu.d:
        raise DepthMismatch("lambda and nu have different ranks")
    nu1 = nu.refine()
    nu2 = nu1.refine()
    terms = []
    for j in letter_order(lam.d):
        g = ReducedWord((j,), lam.d)
        pushed = pushforward(g, nu2, nu.depth + 1)
        dj = _divergence_on_words(pushed, nu1, f)
        if dj == INF:
            return INF
        terms.append(lam.p[j] * dj)
    return math.fsum(terms)


def closed_form_harmonic_entropy(lam: GeneratorMeasure, mu: GeneratorMeasure,
                                 f: ConvexGenerator) -> float:
    """sum_j lam_j (v_j f(1/q_j) + (1-v_j) f(q_j)) for nu = nu_mu."""
    qv = solve_q(mu)
    q, v = qv.q, qv.v
    return math.fsum(
        lam.p[j] * (v[j] * f.eval(1.0 / q[j]) + (1.0 - v[j]) * f.eval(q[j]))
        for j in letter_order(lam.d)
    )


def convolve(mu: GeneratorMeasure, nu: CylinderMeasure, target_depth: int) -> CylinderMeasure:
    """mu * nu on depth-m cylinders, m+1 <= nu.depth."""
    src = nu.marginal(target_depth + 1) if nu.depth > target_depth + 1 else nu
    acc: dict = {}
    for j in letter_order(mu.d):
        pushed = pushforward(ReducedWord((j,), mu.d), src, target_depth)
        for w, m in pushed.masses.items():
            acc.setdefault(w, []).append(mu.p[j] * m)
    out = {w: math.fsum(v) for w, v in sorted(acc.items())}
    return CylinderMeasure(nu.d, target_depth, out, nu.tail)


def stationarity_residual(mu: GeneratorMeasure, nu: CylinderMeasure,
                          target_depth: int) -> float:
    """max_w |(mu * nu)(C_w) - nu(C_w)| over depth-m cylinders."""
    conv = convolve(mu, nu, target_depth)
    marg = nu.marginal(target_depth)
    labels = set(conv.masses) | set(marg.masses)
    return max(abs(conv.mass(w) - marg.mass(w)) for w in labels)


# --- T map and its inverse ----------------------------------------------------

def psi(f: ConvexGenerator, z: float) -> float:
    """Psi_f(z) = f(z) - z f'(z) + f'(1/z)."""
    return f.eval(z) - z * f.deriv(z) + f.deriv(1.0 / z)


def _phi(f: ConvexGenerator, q: float) -> float:
    """Psi_f(q) - Psi_f(1/q); positive and decreasing on (0,1) for the builtin f."""
    return psi(f, q) - psi(f, 1.0 / q)


def t_map(mu: GeneratorMeasure, f: ConvexGenerator) -> GeneratorMeasure:
    """lambda_j = c / (Psi_f(q_j) - Psi_f(1/q_j)), normalized over the 2d generators."""
    qv = solve_q(mu)
    inv = {}
    for j in range(1, mu.d + 1):
        denom = _phi(f, qv.q[j])
        if denom <= 0:
            raise NonPositiveDenominator(
                f"Psi_f(q_{j}) - Psi_f(1/q_{j}) = {denom!r} <= 0"
            )
        inv[j] = 1.0 / denom
    c = 1.0 / (2.0 * math.fsum(inv.values()))
    lam = {}
    for j in range(1, mu.d + 1):
        lam[j] = lam[-j] = c * inv[j]
    # remove the last-bit normalization error so the constructor's sum check passes
    s = math.fsum(lam.values())
    lam = {j: w / s for j, w in lam.items()}
    return GeneratorMeasure(mu.d, lam)


def _phi_inverse(f: ConvexGenerator, y: float) -> float:
    lo, hi = 1e-14, 1.0 - 1e-14
    if _phi(f, hi) >= y:
        return hi
    if _phi(f, lo) <= y:
        return lo
    return brentq(lambda q: _phi(f, q) - y, lo, hi, xtol=1e-16, rtol=8.9e-16)


def t_inverse(lam: GeneratorMeasure, f: ConvexGenerator,
              tol: float = 1e-10) -> GeneratorMeasure:
    """Invert the T map by solving for the normalization constant.

    Given c, q_j = Phi^{-1}(c/lam_j) where Phi(q) = Psi_f(q)-Psi_f(1/q); the
    admissibility constraint sum_i v_i = 1 pins c by monotone bisection, and p
    is then recovered from the first-passage system in closed form.
    """
    d = lam.d

    def vsum(c: float) -> float:
        return 2.0 * math.fsum(
            (lambda q: q / (1.0 + q))(_phi_inverse(f, c / lam.p[j]))
            for j in range(1, d + 1)
        )

    lo, hi = 1e-8, 1.0
    while vsum(hi) > 1.0:
        hi *= 2.0
        if hi > 1e12:
            raise NoConvergence("could not bracket the normalization constant")
    while vsum(lo) < 1.0:
        lo /= 2.0
        if lo < 1e-300:
            raise NoConvergence("could not bracket the normalization constant")
    c = brentq(lambda x: vsum(x) - 1.0, lo, hi, xtol=1e-300, rtol=8.9e-16)

    q = {}
    for j in range(1, d + 1):
        q[j] = q[-j] = _phi_inverse(f, c / lam.p[j])
    a = 2.0 * math.fsum(q[j] ** 2 / (1.0 - q[j] ** 2) for j in range(1, d + 1))
    s = a / (1.0 + a)
    p = {}
    for j in range(1, d + 1):
        p[j] = p[-j] = q[j] * (1.0 - s) / (1.0 - q[j] ** 2)
    total = math.fsum(p.values())
    p = {j: w / total for j, w in p.items()}
    mu = GeneratorMeasure(d, p)

    back = t_map(mu, f)
    resid = max(abs(back.p[j] - lam.p[j]) for j in letter_order(d))
    if resid >= tol:
        raise NoConvergence(f"t_inverse residual {resid!r} >= {tol}",
                            residual_trace=[resid])
    return mu


# --- vectorized entropy engine for scanning and gradients ---------------------

class EntropyEngine:
    """Entropy of depth-n mass vectors as dense linear algebra.

    The depth-(n+1) refinement and each generator pushforward are linear in
    the depth-n masses; precomputing those matrices makes one entropy
    evaluation a handful of small matvecs.
    """

    def __init__(self, lam: GeneratorMeasure, f: ConvexGenerator, depth: int,
                 tail: TailRule):
        self.lam = lam
        self.f = f
        self.depth = depth
        self.tail = tail
        d = lam.d
        self.words_n = enumerate_words(d, depth)
        self.words_n1 = enumerate_words(d, depth + 1)
        self.index_n = {w: i for i, w in enumerate(self.words_n)}
        index_n1 = {w: i for i, w in enumerate(self.words_n1)}
        m, m1 = len(self.words_n), len(self.words_n1)

        self.refine_matrix = np.zeros((m1, m))
        for w1 in self.words_n1:
            c = tail.conditional(w1[-2], w1[-1], d)
            self.refine_matrix[index_n1[w1], self.index_n[w1[:depth]]] += c

        self.push_matrices = {}
        words_n2 = enumerate_words(d, depth + 2)
        for j in letter_order(d):
            B = np.zeros((m1, m))
            for u in words_n2:
                c = (tail.conditional(u[-3], u[-2], d)
                     * tail.conditional(u[-2], u[-1], d))
                if c == 0.0:
                    continue
                r = reduce_letters((j,) + u, d)
                B[index_n1[r[: depth + 1]], self.index_n[u[:depth]]] += c
            self.push_matrices[j] = B

    def mass_vector(self, nu: CylinderMeasure) -> np.ndarray:
        x = np.zeros(len(self.words_n))
        for w, m in nu.masses.items():
            x[self.index_n[w]] = m
        return x

    def _div_arrays(self, p: np.ndarray, q: np.ndarray) -> float:
        f = self.f
        pos = q > 1e-15
        ppos = p > 1e-15
        escaped = float(p[~pos].sum())
        if escaped > 1e-15 and f.at_infinity_slope == INF:
            return INF
        both = pos & ppos
        r = p[both] / q[both]
        if f.kind == "kl":
            vals = p[both] * np.log(r)
        elif f.kind == "chi2":
            vals = (p[both] - q[both]) ** 2 / q[both]
        else:
            a = f.alpha
            vals = (r**a - 1.0) / (a * (a - 1.0)) * q[both]
        out = math.fsum(vals.tolist())
        qz = pos & ~ppos
        if np.any(qz):
            z = f.at_zero
            if z == INF:
                return INF
            out += z * float(q[qz].sum())
        if escaped > 1e-15:
            out += escaped * f.at_infinity_slope
        return max(out, 0.0)

    def entropy(self, x: np.ndarray) -> float:
        q1 = self.refine_matrix @ x
        terms = []
        for j in letter_order(self.lam.d):
            pj = self.push_matrices[j] @ x
            dj = self._div_arrays(pj, q1)
            if dj == INF:
                return INF
            terms.append(self.lam.p[j] * dj)
        return math.fsum(terms)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FE_THREADS", "1")))
    except ValueError:
        return 1


def _scan_sample(engines: dict, m: int, seed: int, i: int,
                 zero_fraction: float, uniform_tail_fraction: float):
    rng = np.random.default_rng([seed, i])
    conc = 10.0 ** rng.uniform(-1.0, 1.0)
    x = rng.dirichlet(np.full(m, conc))
    u = rng.random()
    zeroed = u < zero_fraction
    if zeroed:
        k = int(rng.integers(1, max(2, m // 4)))
        idx = rng.choice(m, size=k, replace=False)
        x[idx] = 0.0
        total = x.sum()
        if total <= 0.0:
            x[:] = 1.0 / m
        else:
            x /= total
    tail_kind = "uniform" if rng.random() < uniform_tail_fraction else "harmonic"
    h = engines[tail_kind].entropy(x)
    return h, x, tail_kind


def minimality_scan(lam: GeneratorMeasure, f: ConvexGenerator, depth: int,
                    samples: int, seed: int, zero_fraction: float = 0.05,
                    uniform_tail_fraction: float = 0.1) -> dict:
    """Scan random tail-extended depth-n measures for entropy below nu_mu's.

    Sample i's randomness depends only on (seed, i), so the report does not
    depend on the worker count.
    """
    if samples < 1 or depth < 1:
        raise ParseError("need samples >= 1 and depth >= 1")
    mu = t_inverse(lam, f)
    qv = solve_q(mu)
    nu_mu = harmonic_measure(mu, depth)
    reference = cylinder_entropy(lam, nu_mu, f)
    engines = {
        "harmonic": EntropyEngine(lam, f, depth, TailRule("harmonic", qv)),
        "uniform": EntropyEngine(lam, f, depth, TailRule("uniform")),
    }
    m = len(engines["harmonic"].words_n)

    def run_block(indices):
        return [
            _scan_sample(engines, m, seed, i, zero_fraction, uniform_tail_fraction)
            for i in indices
        ]

    workers = _worker_count()
    all_indices = list(range(samples))
    if workers == 1 or samples < 64:
        results = run_block(all_indices)
    else:
        blocks = [all_indices[k::workers] for k in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(pool.map(run_block, blocks))
        merged = {}
        for block, res in zip(blocks, partial):
            for i, r in zip(block, res):
                merged[i] = r
        results = [merged[i] for i in all_indices]

    min_entropy = INF
    argmin_x = None
    argmin_tail = None
    n_infinite = 0
    for h, x, tail_kind in results:
        if h == INF:
            n_infinite += 1
        if h < min_entropy:
            min_entropy = h
            argmin_x = x
            argmin_tail = tail_kind
    words = engines["harmonic"].words_n
    argmin_masses = (
        {encode_word(w): float(argmin_x[i]) for i, w in enumerate(words)}
        if argmin_x is not None else {}
    )
    return {
        "reference_entropy": reference,
        "min_entropy": min_entropy,
        "argmin_masses": argmin_masses,
        "argmin_tail": argmin_tail,
        "samples": samples,
        "infinite_entropy_samples": n_infinite,
        "theorem_A_violated": bool(min_entropy < reference - 1e-9),
    }


def gradient_of_masses(engine: EntropyEngine, x: np.ndarray, h_step: float) -> np.ndarray:
    """Central differences of the entropy along simplex-tangent pairs (i, i+1)."""
    if h_step <= 0:
        raise ParseError("h_step must be positive")
    m = len(x)
    grad = np.zeros(m - 1)
    for i in range(m - 1):
        if x[i] - h_step < 0 or x[i + 1] - h_step < 0:
            raise StepTooLarge(f"h_step {h_step} would push mass {i} negative")
        plus = x.copy()
        plus[i] += h_step
        plus[i + 1] -= h_step
        minus = x.copy()
        minus[i] -= h_step
        minus[i + 1] += h_step
        grad[i] = (engine.entropy(plus) - engine.entropy(minus)) / (2.0 * h_step)
    return grad


def entropy_gradient_at_harmonic(lam: GeneratorMeasure, f: ConvexGenerator,
                                 depth: int, h_step: float = 1e-5) -> np.ndarray:
    """Finite-difference entropy gradient at nu_mu; vanishes at the minimizer."""
    mu = t_inverse(lam, f)
    qv = solve_q(mu)
    engine = EntropyEngine(lam, f, depth, TailRule("harmonic", qv))
    x = engine.mass_vector(harmonic_measure(mu, depth))
    if h_step >= x.min() / 10.0:
        raise StepTooLarge(f"h_step {h_step} too large for min mass {x.min()}")
    return gradient_of_masses(engine, x, h_step)
