"""Sufficiency checks, counterexample search, and a complete desk-scale oracle.

A query fixes a subset of input features to their values in x and lets the
rest range over a clamped epsilon-box.  A subset is sufficient when the
predicted class cannot change anywhere in that box.  Enclosure-based checks
are sound but incomplete: a failed separation yields either a concrete
counterexample (validated on the real network) or an Uncertain verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .abstraction import AbstractNetwork
from .bounds import propagate_abstract, propagate_box
from .errors import DimensionError, ValidationError
from .intervals import IntervalVector
from .network import ConcreteNetwork, forward, forward_batch, gradient, predict


class VerdictKind(str, Enum):
    SUFFICIENT = "sufficient"
    UNCERTAIN = "uncertain"
    INSUFFICIENT = "insufficient"


@dataclass(frozen=True, eq=False)
class Verdict:
    kind: VerdictKind
    margin: float
    witness: np.ndarray | None = None

    @property
    def is_sufficient(self) -> bool:
        return self.kind is VerdictKind.SUFFICIENT

    @property
    def is_insufficient(self) -> bool:
        return self.kind is VerdictKind.INSUFFICIENT


def _query_box(x: np.ndarray, fixed: frozenset[int], epsilon: float, domain: IntervalVector) -> IntervalVector:
    lo = np.maximum(domain.lo, x - epsilon)
    hi = np.minimum(domain.hi, x + epsilon)
    idx = np.fromiter(fixed, dtype=int, count=len(fixed)) if fixed else np.empty(0, dtype=int)
    lo[idx] = x[idx]
    hi[idx] = x[idx]
    return IntervalVector(lo, hi)


@dataclass(frozen=True, eq=False)
class SufficiencyQuery:
    """Is fixing ``fixed_features`` of x enough to pin the predicted class?"""

    x: np.ndarray
    fixed_features: frozenset[int]
    epsilon: float
    target: int
    domain: IntervalVector

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionError(f"instance must be a vector, got shape {x.shape}")
        if len(self.domain) != x.shape[0]:
            raise DimensionError("instance and domain lengths disagree")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be nonnegative")
        fixed = frozenset(int(i) for i in self.fixed_features)
        if any(i < 0 or i >= x.shape[0] for i in fixed):
            raise ValidationError("fixed feature index out of range")
        if not self.domain.contains_point(np.clip(x, self.domain.lo, self.domain.hi)):
            raise ValidationError("instance lies outside the domain")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "fixed_features", fixed)

    @property
    def free_features(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.x.shape[0]) if i not in self.fixed_features)

    def query_box(self) -> IntervalVector:
        """Fixed dimensions pin to x; free ones span the clamped epsilon range."""
        return _query_box(self.x, self.fixed_features, self.epsilon, self.domain)


@dataclass(frozen=True, eq=False)
class RegressionQuery:
    """Does fixing the subset keep a scalar output within ``delta`` of f(x)?"""

    x: np.ndarray
    fixed_features: frozenset[int]
    epsilon: float
    delta: float
    domain: IntervalVector

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionError(f"instance must be a vector, got shape {x.shape}")
        if len(self.domain) != x.shape[0]:
            raise DimensionError("instance and domain lengths disagree")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be nonnegative")
        if self.delta <= 0:
            raise ValidationError("delta must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "fixed_features", frozenset(int(i) for i in self.fixed_features))

    def query_box(self) -> IntervalVector:
        return _query_box(self.x, self.fixed_features, self.epsilon, self.domain)


def _separation_margin(out: IntervalVector, target: int) -> float:
    """lo of the target logit minus the largest hi among the others."""
    others_hi = np.delete(out.hi, target)
    if others_hi.size == 0:
        return float("inf")
    return float(out.lo[target] - np.max(others_hi))


def _validate_target(net: ConcreteNetwork, q: SufficiencyQuery) -> None:
    if not 0 <= q.target < net.output_dim:
        raise DimensionError(f"target {q.target} out of range for {net.output_dim} classes")
    if predict(net, q.x) != q.target:
        raise ValidationError("target class does not match the network's prediction for x")


def _candidate_points(
    net: ConcreteNetwork,
    q: SufficiencyQuery,
    box: IntervalVector,
    out: IntervalVector,
    rng: np.random.Generator,
    n_random: int = 64,
) -> np.ndarray:
    """Candidate misclassification points inside the query box.

    One gradient-sign corner per top-2 runner-up class (the corner that
    maximizes the linearized logit gap), the box center, and seeded
    uniform points.
    """
    center = box.midpoint
    candidates = [center]
    runner_ups = [j for j in np.argsort(-out.hi) if j != q.target][:2]
    for j in runner_ups:
        d = gradient(net, center, int(j)) - gradient(net, center, q.target)
        corner = np.where(d > 0, box.hi, box.lo)
        corner[list(q.fixed_features)] = q.x[list(q.fixed_features)]
        candidates.append(corner)
    if n_random > 0:
        lo = np.broadcast_to(box.lo, (n_random, len(box)))
        hi = np.broadcast_to(box.hi, (n_random, len(box)))
        candidates.extend(rng.uniform(lo, hi))
    return np.asarray(candidates)


def check_abstract(anet: AbstractNetwork, q: SufficiencyQuery) -> Verdict:
    """Enclosure check on a reduced network: Sufficient or Uncertain.

    Witnesses are never produced here; they are only certified against the
    concrete network.
    """
    out = propagate_abstract(anet, q.query_box())
    margin = _separation_margin(out, q.target)
    if margin >= 0:
        return Verdict(VerdictKind.SUFFICIENT, margin)
    return Verdict(VerdictKind.UNCERTAIN, margin)


def check_concrete(
    net: ConcreteNetwork,
    q: SufficiencyQuery,
    rng: np.random.Generator | None = None,
) -> Verdict:
    """Enclosure check plus candidate falsification on the concrete network."""
    _validate_target(net, q)
    box = q.query_box()
    out = propagate_box(net, box).final
    margin = _separation_margin(out, q.target)
    if margin >= 0:
        return Verdict(VerdictKind.SUFFICIENT, margin)
    rng = rng if rng is not None else np.random.default_rng(0)
    cands = _candidate_points(net, q, box, out, rng)
    labels = np.argmax(forward_batch(net, cands), axis=1)
    bad = np.nonzero(labels != q.target)[0]
    if bad.size:
        return Verdict(VerdictKind.INSUFFICIENT, margin, witness=cands[bad[0]])
    return Verdict(VerdictKind.UNCERTAIN, margin)


def check_regression(
    net: ConcreteNetwork,
    q: RegressionQuery,
    rng: np.random.Generator | None = None,
) -> Verdict:
    """Sufficiency for scalar outputs: enclosure within f(x) +- delta."""
    if net.output_dim != 1:
        raise ValidationError("regression queries require a single-output network")
    box = q.query_box()
    ref = float(forward(net, q.x)[0])
    out = propagate_box(net, box).final
    margin = float(q.delta - max(out.hi[0] - ref, ref - out.lo[0]))
    if margin >= 0:
        return Verdict(VerdictKind.SUFFICIENT, margin)
    rng = rng if rng is not None else np.random.default_rng(0)
    center = box.midpoint
    d = gradient(net, center, 0)
    corners = [np.where(d > 0, box.hi, box.lo), np.where(d > 0, box.lo, box.hi)]
    for c in corners:
        c[list(q.fixed_features)] = q.x[list(q.fixed_features)]
    lo = np.broadcast_to(box.lo, (64, len(box)))
    hi = np.broadcast_to(box.hi, (64, len(box)))
    cands = np.vstack([center[None, :], corners, rng.uniform(lo, hi)])
    values = forward_batch(net, cands)[:, 0]
    bad = np.nonzero(np.abs(values - ref) > q.delta)[0]
    if bad.size:
        return Verdict(VerdictKind.INSUFFICIENT, margin, witness=cands[bad[0]])
    return Verdict(VerdictKind.UNCERTAIN, margin)


def gen_counterexample(
    net: ConcreteNetwork,
    anet: AbstractNetwork,
    q: SufficiencyQuery,
    rng: np.random.Generator | None = None,
    n_random: int = 64,
) -> np.ndarray | None:
    """Search the query box for a point the concrete network misclassifies.

    Called after an Uncertain enclosure verdict.  Runner-up classes are
    ranked by the reduced network's upper bounds; every candidate is
    evaluated exactly, so a returned witness is a genuine counterexample.
    Absence of a witness is a normal outcome.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    box = q.query_box()
    out = propagate_abstract(anet, box)
    cands = _candidate_points(net, q, box, out, rng, n_random=n_random)
    labels = np.argmax(forward_batch(net, cands), axis=1)
    bad = np.nonzero(labels != q.target)[0]
    if bad.size:
        return cands[bad[0]]
    return None


class OracleOutcome(str, Enum):
    PROVED_SUFFICIENT = "proved_sufficient"
    WITNESS = "witness"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True, eq=False)
class OracleResult:
    outcome: OracleOutcome
    witness: np.ndarray | None
    splits: int
    evaluations: int

    @property
    def proved(self) -> bool:
        return self.outcome is OracleOutcome.PROVED_SUFFICIENT


def oracle_check(net: ConcreteNetwork, q: SufficiencyQuery, budget: int = 1 << 16) -> OracleResult:
    """Complete branch-and-bound decision for small free-feature counts.

    Recursively bisects the widest free dimension.  A sub-box is discharged
    when its enclosure certifies the target class; the center and the two
    top runner-up gradient-sign corners of each sub-box are evaluated
    exactly and any misclassification is returned as a witness.  Exhausted
    means the split budget ran out with sub-boxes still open.
    """
    _validate_target(net, q)
    fixed_idx = list(q.fixed_features)
    stack = [q.query_box()]
    splits = 0
    evaluations = 0
    while stack:
        box = stack.pop()
        out = propagate_box(net, box).final
        evaluations += 1
        if _separation_margin(out, q.target) >= 0:
            continue
        points = [box.midpoint]
        runner_ups = [j for j in np.argsort(-out.hi) if j != q.target][:2]
        for j in runner_ups:
            d = gradient(net, box.midpoint, int(j)) - gradient(net, box.midpoint, q.target)
            corner = np.where(d > 0, box.hi, box.lo)
            corner[fixed_idx] = q.x[fixed_idx]
            points.append(corner)
        labels = np.argmax(forward_batch(net, np.asarray(points)), axis=1)
        bad = np.nonzero(labels != q.target)[0]
        if bad.size:
            return OracleResult(OracleOutcome.WITNESS, np.asarray(points)[bad[0]], splits, evaluations)
        widths = box.width.copy()
        if fixed_idx:
            widths[fixed_idx] = 0.0
        dim = int(np.argmax(widths))
        if widths[dim] <= 0.0:
            # Degenerate box whose only point classifies correctly. The
            # enclosure of a point is that point, so this cannot happen
            # unless separation is an exact tie; treat as discharged.
            continue
        if splits >= budget:
            return OracleResult(OracleOutcome.EXHAUSTED, None, splits, evaluations)
        splits += 1
        mid = 0.5 * (box.lo[dim] + box.hi[dim])
        lo_hi = box.hi.copy()
        lo_hi[dim] = mid
        hi_lo = box.lo.copy()
        hi_lo[dim] = mid
        # Lower half is explored first for a deterministic witness order.
        stack.append(IntervalVector(hi_lo, box.hi))
        stack.append(IntervalVector(box.lo, lo_hi))
    return OracleResult(OracleOutcome.PROVED_SUFFICIENT, None, splits, evaluations)
