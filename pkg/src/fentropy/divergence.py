"""f-divergences between finite measures and Furstenberg (lambda,f)-entropy.

The divergence kernel is a convex f with f(1)=0; only the three builtin
generators (KL, chi-squared, power) are accepted so that f(0+) and the slope
at infinity stay exact instead of being estimated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import AtomMismatch, MissingTranslate, NotProbability, ParseError

INF = math.inf

PROB_TOL = 1e-12
# masses below this are treated as exact zeros in the p=0 / q=0 branches
ZERO_MASS = 1e-15


@dataclass(frozen=True)
class ConvexGenerator:
    """A convex function f on (0,inf) with f(1)=0, plus its exact boundary data."""

    kind: str  # "kl" | "chi2" | "power"
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("kl", "chi2", "power"):
            raise ParseError(f"unknown generator kind {self.kind!r}")
        if self.kind == "power":
            if self.alpha is None or self.alpha in (0.0, 1.0):
                raise ParseError("power generator needs alpha not in {0,1}")

    def eval(self, t: float) -> float:
        if t <= 0:
            raise ValueError("eval defined for t>0; use at_zero for the boundary")
        if self.kind == "kl":
            return t * math.log(t)
        if self.kind == "chi2":
            return (t - 1.0) ** 2
        a = self.alpha
        return (t**a - 1.0) / (a * (a - 1.0))

    def deriv(self, t: float) -> float:
        if t <= 0:
            raise ValueError("deriv defined for t>0")
        if self.kind == "kl":
            return math.log(t) + 1.0
        if self.kind == "chi2":
            return 2.0 * (t - 1.0)
        a = self.alpha
        return t ** (a - 1.0) / (a - 1.0)

    @property
    def at_zero(self) -> float:
        """f(0+), possibly +inf."""
        if self.kind == "kl":
            return 0.0
        if self.kind == "chi2":
            return 1.0
        a = self.alpha
        if a < 0:
            return INF
        return -1.0 / (a * (a - 1.0))

    @property
    def at_infinity_slope(self) -> float:
        """f'(inf) = lim f(t)/t, possibly +inf."""
        if self.kind in ("kl", "chi2"):
            return INF
        return INF if self.alpha > 1 else 0.0

    @property
    def spec_string(self) -> str:
        if self.kind == "power":
            return f"power:{self.alpha:.17g}"
        return self.kind


KL = ConvexGenerator("kl")
CHI2 = ConvexGenerator("chi2")


def generator_from_string(s: str) -> ConvexGenerator:
    """Parse "kl" | "chi2" | "power:<alpha>"."""
    s = s.strip().lower()
    if s == "kl":
        return KL
    if s == "chi2":
        return CHI2
    if s.startswith("power:"):
        try:
            alpha = float(s.split(":", 1)[1])
        except ValueError as exc:
            raise ParseError(f"bad power alpha in {s!r}") from exc
        return ConvexGenerator("power", alpha)
    raise ParseError(f"unknown generator spec {s!r}")


@dataclass(frozen=True)
class FiniteMeasure:
    """A finite non-negative measure on an opaque atom set."""

    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        for label, mass in self.atoms.items():
            if mass < 0:
                raise NotProbability(f"negative mass {mass} at atom {label!r}")

    @property
    def total(self) -> float:
        return math.fsum(self.atoms.values())

    @property
    def is_probability(self) -> bool:
        return abs(self.total - 1.0) <= PROB_TOL

    def mass(self, label) -> float:
        return self.atoms.get(label, 0.0)

    def labels(self):
        return set(self.atoms)

    def pushforward(self, pi) -> "FiniteMeasure":
        """Image measure under the label map pi."""
        out: dict = {}
        for label, mass in self.atoms.items():
            key = pi(label)
            out[key] = out.get(key, 0.0) + mass
        return FiniteMeasure(out)

    def to_json(self) -> dict:
        return {"atoms": {str(k): v for k, v in self.atoms.items()}}

    @classmethod
    def from_json(cls, doc: dict) -> "FiniteMeasure":
        if not isinstance(doc, dict) or "atoms" not in doc:
            raise ParseError("FiniteMeasure JSON needs an 'atoms' object")
        return cls(dict(doc["atoms"]))


def _require_probability(m: FiniteMeasure, name: str):
    if not m.is_probability:
        raise NotProbability(f"{name} has total {m.total!r}, expected 1")


def f_divergence(P: FiniteMeasure, Q: FiniteMeasure, f: ConvexGenerator) -> float:
    """D_f(P||Q) on a common finite atom set, with the f(0+)/f'(inf) conventions.

    Atoms where both masses vanish contribute nothing (0*inf = 0).
    """
    if P.labels() != Q.labels():
        raise AtomMismatch("P and Q live on different atom sets")
    _require_probability(P, "P")
    _require_probability(Q, "Q")
    terms = []
    p_on_null = []
    for label in P.atoms:
        p = P.atoms[label]
        q = Q.atoms[label]
        if q <= ZERO_MASS:
            if p > ZERO_MASS:
                p_on_null.append(p)
            continue
        if p <= ZERO_MASS:
            z = f.at_zero
            if z == INF:
                return INF
            terms.append(z * q)
        else:
            terms.append(f.eval(p / q) * q)
    escaped = math.fsum(p_on_null)
    if escaped > 0.0:
        slope = f.at_infinity_slope
        if slope == INF:
            return INF
        terms.append(escaped * slope)
    value = math.fsum(terms)
    # the supporting line at 1 makes each term nonnegative in exact arithmetic,
    # so a tiny negative total is pure roundoff
    if -PROB_TOL < value < 0.0:
        return 0.0
    return value


@dataclass(frozen=True)
class MeasureFamily:
    """A base measure, its group translates, and a weighting measure on the group."""

    base: FiniteMeasure
    translates: dict  # group-element key -> FiniteMeasure
    lam: FiniteMeasure  # probability measure over group-element keys

    def __post_init__(self):
        base_labels = self.base.labels()
        for g, nu_g in self.translates.items():
            if nu_g.labels() != base_labels:
                raise AtomMismatch(f"translate at {g!r} has a different atom set")
        _require_probability(self.lam, "lambda")


def furstenberg_entropy(fam: MeasureFamily, f: ConvexGenerator) -> float:
    """h_{lambda,f} = sum_g lambda(g) D_f(g.nu || nu)."""
    terms = []
    for g, weight in fam.lam.atoms.items():
        if weight == 0.0:
            continue
        if g not in fam.translates:
            raise MissingTranslate(f"lambda charges {g!r} but no translate is given")
        d = f_divergence(fam.translates[g], fam.base, f)
        if d == INF:
            return INF
        terms.append(weight * d)
    return math.fsum(terms)
