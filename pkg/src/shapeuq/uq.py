"""Affine shape parameters, nested Clenshaw-Curtis rules and Smolyak quadrature."""

import heapq
import itertools
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .shape import ADMISSIBLE_BOUND, RadialShape


# ---------------------------------------------------------------------------
# parameterization

@dataclass(frozen=True)
class WeightSequence:
    """Positive weights ``beta_j`` of the affine shape expansion."""

    beta: tuple
    C: float | None = None
    epsilon: float | None = None
    p_smooth: float | None = None
    dim: int = 2

    def __post_init__(self):
        b = tuple(float(v) for v in self.beta)
        if not b or min(b) <= 0:
            raise ValueError("weights must be positive")
        if sum(b) > 1.0 + 1e-14:
            raise ValueError("weights must satisfy sum(beta) <= 1")
        object.__setattr__(self, "beta", b)
        if self.C is not None:
            j = np.arange(1, len(b) + 1)
            if np.any(np.array(b) > self.C * j ** (-self.decay_exponent) * (1 + 1e-12)):
                raise ValueError("weights violate the declared decay bound")

    @property
    def decay_exponent(self):
        eps = 0.0 if self.epsilon is None else self.epsilon
        p = 0.0 if self.p_smooth is None else self.p_smooth
        return 1.0 + eps + (p + 1.0) / (self.dim - 1)

    @classmethod
    def from_decay(cls, C, epsilon, p_smooth, J, dim=2):
        e = 1.0 + epsilon + (p_smooth + 1.0) / (dim - 1)
        beta = C * np.arange(1, J + 1, dtype=float) ** (-e)
        return cls(tuple(beta), C, epsilon, p_smooth, dim)

    def __len__(self):
        return len(self.beta)

    def sensitivities(self, s=None):
        """``b_j = beta_j * max(1, (j/2)^2)``, a C^2-size proxy of ``beta_j r_j``."""
        s = len(self.beta) if s is None else s
        j = np.arange(1, s + 1, dtype=float)
        return np.array(self.beta[:s]) * np.maximum(1.0, (j / 2.0) ** 2)


def shape_from_params(y, weights, k, k_scaling=True):
    """``r = (1/k) sum_j beta_j y_j r_j`` (without the ``1/k`` if ``k_scaling`` is off)."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    beta = np.array(weights.beta, dtype=float)
    if y.size > beta.size:
        raise ValueError("more parameters than weights")
    if np.isrealobj(y) or np.all(y.imag == 0):
        if np.any(np.abs(y.real) > 1 + 1e-14):
            raise ValueError("parameters must lie in [-1, 1]")
    scale = 1.0
    if k_scaling:
        if k < 3.0 * beta.sum() - 1e-14:
            raise ValueError("k must be at least 3 * sum(beta) for admissible shapes")
        scale = 1.0 / k
    c = scale * beta[:y.size] * y
    if np.all(c.imag == 0):
        c = c.real
    shape = RadialShape(c)
    if not shape.admissible_real:
        raise ValueError(f"parameter point gives sup|Re r| > {ADMISSIBLE_BOUND:.4f}")
    return shape


# ---------------------------------------------------------------------------
# univariate rules

@dataclass(frozen=True)
class NestedRule1D:
    """Clenshaw-Curtis rule for the uniform probability measure on ``[-1, 1]``.

    ``keys`` identify nodes across levels: node ``-cos(pi t)`` has key ``t``
    stored as a reduced dyadic fraction ``(numerator, log2 denominator)``.
    """

    level: int
    nodes: np.ndarray
    weights: np.ndarray
    keys: tuple

    @property
    def n_points(self):
        return self.nodes.size

    @property
    def degree(self):
        return self.n_points if self.n_points % 2 else self.n_points - 1

    def abs_weight_sum(self):
        return float(np.sum(np.abs(self.weights)))


def _dyadic_key(num, exp):
    while exp > 0 and num % 2 == 0:
        num //= 2
        exp -= 1
    return (num, exp)


def cc_points(level):
    return 1 if level == 0 else 2**level + 1


@lru_cache(maxsize=None)
def cc_rule(level):
    """Nested Clenshaw-Curtis rule with 1, 3, 5, 9, ... points."""
    if level < 0:
        raise ValueError("level must be non-negative")
    if level == 0:
        nodes, weights, keys = np.zeros(1), np.ones(1), ((1, 1),)
    else:
        N = 2**level
        j = np.arange(N + 1)
        theta = np.pi * j / N
        nodes = -np.cos(theta)
        nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry, exact zero at the centre
        b = np.full(N // 2, 2.0)
        b[-1] = 1.0
        kk = np.arange(1, N // 2 + 1)
        s = np.cos(2 * np.outer(theta, kk)) @ (b / (4 * kk**2 - 1))
        c = np.full(N + 1, 2.0)
        c[0] = c[-1] = 1.0
        weights = 0.5 * c / N * (1.0 - s)
        keys = tuple(_dyadic_key(int(i), level) for i in j)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return NestedRule1D(level, nodes, weights, keys)


def key_to_point(key):
    num, exp = key
    t = num / 2.0**exp
    return 0.5 * (np.cos(np.pi * (1.0 - t)) - np.cos(np.pi * t))


# ---------------------------------------------------------------------------
# index sets and Smolyak quadrature

@dataclass(frozen=True)
class MultiIndexSet:
    indices: tuple

    def __post_init__(self):
        idx = tuple(sorted({tuple(int(v) for v in nu) for nu in self.indices}))
        if not idx:
            raise ValueError("index set must be non-empty")
        s = len(idx[0])
        if any(len(nu) != s for nu in idx) or any(min(nu) < 0 for nu in idx):
            raise ValueError("indices must be non-negative tuples of equal length")
        object.__setattr__(self, "indices", idx)

    @property
    def s(self):
        return len(self.indices[0])

    def __len__(self):
        return len(self.indices)

    def __contains__(self, nu):
        return tuple(nu) in self._set

    @property
    def _set(self):
        return frozenset(self.indices)

    def is_downward_closed(self):
        members = self._set
        for nu in self.indices:
            for j, v in enumerate(nu):
                if v > 0 and nu[:j] + (v - 1,) + nu[j + 1:] not in members:
                    return False
        return True

    @classmethod
    def total_degree(cls, s, L):
        return cls(tuple(nu for nu in itertools.product(range(L + 1), repeat=s) if sum(nu) <= L))

    @classmethod
    def box(cls, s, L):
        return cls(tuple(itertools.product(range(L + 1), repeat=s)))


def combination_coeffs(index_set):
    """``iota_nu = sum over e in {0,1}^s with nu + e in Lambda of (-1)^|e|``."""
    if not index_set.is_downward_closed():
        raise ValueError("index set is not downward closed")
    members = index_set._set
    s = index_set.s
    out = {}
    for nu in index_set.indices:
        total = 0
        for e in itertools.product((0, 1), repeat=s):
            if tuple(a + b for a, b in zip(nu, e)) in members:
                total += (-1) ** sum(e)
        out[nu] = total
    return out


def tensor_keys(nu):
    return itertools.product(*(cc_rule(l).keys for l in nu))


def smolyak_points(index_set):
    """Node keys of ``pts(Lambda)``, the union of the tensor grids, in sorted order."""
    pts = set()
    for nu in index_set.indices:
        pts.update(tensor_keys(nu))
    return sorted(pts)


def smolyak_weights(index_set):
    """Combined weight of every node in ``pts(Lambda)``."""
    iota = combination_coeffs(index_set)
    w = {key: 0.0 for key in smolyak_points(index_set)}
    for nu, c in iota.items():
        if c == 0:
            continue
        rules = [cc_rule(l) for l in nu]
        for combo in itertools.product(*(range(r.n_points) for r in rules)):
            key = tuple(r.keys[i] for r, i in zip(rules, combo))
            w[key] += c * float(np.prod([r.weights[i] for r, i in zip(rules, combo)]))
    return w


def node_coordinates(key):
    return np.array([key_to_point(k) for k in key])


class EvaluationCache:
    """Integrand values keyed by Smolyak node so nested points are evaluated once."""

    def __init__(self, fn):
        self.fn = fn
        self.values = {}
        self.times = {}
        self.n_evaluations = 0

    def evaluate(self, keys, jobs=1):
        todo = [k for k in keys if k not in self.values]
        if jobs > 1 and len(todo) > 1:
            results = _parallel_map(self.fn, [node_coordinates(k) for k in todo], jobs)
        else:
            results = []
            for key in todo:
                t0 = time.perf_counter()
                try:
                    val = self.fn(node_coordinates(key))
                except Exception as exc:
                    raise NodeFailure(key, exc) from exc
                results.append((val, time.perf_counter() - t0))
        for key, (val, dt) in zip(todo, results):
            self.values[key] = val
            self.times[key] = dt
            self.n_evaluations += 1
        return [self.values[k] for k in keys]


class NodeFailure(RuntimeError):
    def __init__(self, key, exc):
        super().__init__(f"integrand failed at node {node_coordinates(key).tolist()}: {exc}")
        self.key = key


_WORKER_FN = None


def _worker(y):
    t0 = time.perf_counter()
    return _WORKER_FN(y), time.perf_counter() - t0


def _parallel_map(fn, ys, jobs):
    import multiprocessing as mp

    global _WORKER_FN
    _WORKER_FN = fn
    ctx = mp.get_context("fork")
    with ctx.Pool(jobs) as pool:
        return pool.map(_worker, ys, chunksize=1)


@dataclass
class SmolyakResult:
    value: object
    index_set: MultiIndexSet
    n_points: int
    weights: dict = field(repr=False, default_factory=dict)


def smolyak_integrate(index_set, integrand, cache=None, jobs=1):
    """Smolyak quadrature ``Q_Lambda`` of ``integrand(y)`` for the uniform measure.

    Values may be scalars or arrays; a shared ``cache`` lets successive index
    sets reuse earlier evaluations.
    """
    if cache is None:
        cache = EvaluationCache(integrand)
    w = smolyak_weights(index_set)
    keys = list(w)  # sorted: deterministic reduction order
    vals = cache.evaluate(keys, jobs)
    total = None
    for key, v in zip(keys, vals):
        term = w[key] * np.asarray(v)
        total = term if total is None else total + term
    return SmolyakResult(total, index_set, len(keys), w)


def build_index_set(weights, s, budget, count="points"):
    """Largest set ``{nu : sum nu_j c_j <= L}`` within the budget, ``c_j = -log b_j``.

    ``count`` selects whether the budget limits points (integrand
    evaluations) or indices.  Indices of equal cost are added together.
    """
    if count not in ("points", "indices"):
        raise ValueError("count must be 'points' or 'indices'")
    if s > len(weights):
        raise ValueError("dimension exceeds the number of weights")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    b = weights.sensitivities(s)
    if np.any(b >= 1.0):
        raise ValueError("index-set costs need b_j < 1")
    c = -np.log(b)
    zero = (0,) * s
    heap = [(0.0, zero)]
    seen = {zero}
    chosen, pts = [], set()
    tol = 1e-12
    while heap:
        cost = heap[0][0]
        group = []
        while heap and heap[0][0] <= cost + tol:
            _, nu = heapq.heappop(heap)
            group.append(nu)
        new_pts = set(pts)
        for nu in group:
            new_pts.update(tensor_keys(nu))
        size = len(new_pts) if count == "points" else len(chosen) + len(group)
        if size > budget:
            break
        chosen += group
        pts = new_pts
        for nu in group:
            for j in range(s):
                nxt = nu[:j] + (nu[j] + 1,) + nu[j + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (float(np.dot(nxt, c)), nxt))
    return MultiIndexSet(tuple(chosen))


def gauss_tensor_rule(s, n):
    """Tensor Gauss-Legendre rule for the uniform probability measure on ``[-1,1]^s``."""
    x, w = np.polynomial.legendre.leggauss(n)
    pts = np.array(list(itertools.product(x, repeat=s)))
    wts = np.prod(np.array(list(itertools.product(w / 2.0, repeat=s))), axis=1)
    return pts, wts


def tensor_reference(integrand, s, n=16):
    pts, wts = gauss_tensor_rule(s, n)
    total = None
    for y, w in zip(pts, wts):
        term = w * np.asarray(integrand(y))
        total = term if total is None else total + term
    return total


def monomial_moment(mu):
    """``E[y^mu]`` for independent uniform ``y_j`` on ``[-1, 1]``."""
    return float(np.prod([0.0 if m % 2 else 1.0 / (m + 1) for m in mu]))


# ---------------------------------------------------------------------------
# holomorphy probe

@dataclass(frozen=True)
class HolomorphyReport:
    coefficients: np.ndarray
    rho: float
    used: np.ndarray
    floor: float

    @property
    def decaying(self):
        return self.rho > 1.0


def chebyshev_coefficients(values):
    """Coefficients of the interpolant through values at first-kind Chebyshev points."""
    v = np.asarray(values)
    N = v.shape[0]
    theta = np.pi * (np.arange(N) + 0.5) / N
    T = np.cos(np.outer(np.arange(N), theta))
    c = (2.0 / N) * (T @ v)
    c[0] *= 0.5
    return c


def chebyshev_nodes(N):
    return np.cos(np.pi * (np.arange(N) + 0.5) / N)


def fit_geometric_rate(coeffs, floor_rel=1e-10, floor_abs=1e-14):
    """Fit ``|c_n| ~ C rho^-n`` over the coefficients above the noise floor."""
    a = np.abs(np.asarray(coeffs))
    scale = np.max(a)
    floor = max(floor_abs, floor_rel * scale)
    n = np.arange(a.size)
    used = n[(n >= 1) & (a > floor)]
    if used.size == 0:
        return np.inf, used, floor
    if used.size == 1:
        # one coefficient above the floor: bound the rate by the drop to the floor
        slope = (np.log(floor) - np.log(a[used[0]])) / 1.0
        return float(np.exp(-slope)), used, floor
    slope = np.polyfit(used, np.log(a[used]), 1)[0]
    return float(np.exp(-slope)), used, floor


def holomorphy_decay_check(fn, n_nodes=12, floor_rel=1e-10):
    """Chebyshev expansion of ``t -> fn(t)`` on ``[-1, 1]`` and its geometric decay rate."""
    t = chebyshev_nodes(n_nodes)
    vals = np.array([fn(ti) for ti in t])
    c = chebyshev_coefficients(vals)
    rho, used, floor = fit_geometric_rate(c, floor_rel)
    return HolomorphyReport(c, rho, used, floor)


# ---------------------------------------------------------------------------
# expected far-field

@dataclass
class MeanFarField:
    """Smolyak means for a ladder of index sets sharing one evaluation cache."""

    theta: np.ndarray
    means: list            # one complex array per index set
    index_sets: list
    n_points: list
    manifest: list         # per node: coordinates, weight in the last set, wall time

    @property
    def mean(self):
        return self.means[-1]

    def differences(self):
        """``L2(S^1)`` norms of successive Smolyak differences (a-posteriori indicator)."""
        return [l2_circle(b - a) for a, b in zip(self.means[:-1], self.means[1:])]


def l2_circle(values):
    """Trapezoidal ``L2(S^1)`` norm of equispaced samples."""
    v = np.asarray(values)
    return float(np.sqrt(2 * np.pi * np.mean(np.abs(v) ** 2)))


def farfield_integrand(solver, weights, s, theta, k_scaling=True):
    """``y -> far-field samples`` for the shape ``shape_from_params(y)``."""

    def fn(y):
        shape = shape_from_params(np.asarray(y)[:s], weights, solver.k, k_scaling)
        return solver.farfield_of_shape(shape, theta).values

    return fn


def mean_farfield(solver, weights, s, index_sets, theta, jobs=1, k_scaling=True):
    """Expected far-field pattern over ``y`` uniform in ``[-1,1]^s``.

    Every node shape is checked for admissibility before any solve.
    """
    sets = [index_sets] if isinstance(index_sets, MultiIndexSet) else list(index_sets)
    for L in sets:
        if L.s != s:
            raise ValueError("index-set dimension does not match s")
        for key in smolyak_points(L):
            shape_from_params(node_coordinates(key), weights, solver.k, k_scaling)
    cache = EvaluationCache(farfield_integrand(solver, weights, s, theta, k_scaling))
    means, counts, last = [], [], None
    for L in sets:
        res = smolyak_integrate(L, None, cache=cache, jobs=jobs)
        means.append(res.value)
        counts.append(res.n_points)
        last = res
    manifest = [{"node": node_coordinates(key).tolist(), "weight": last.weights[key],
                 "wall_time": cache.times[key]} for key in last.weights]
    return MeanFarField(np.asarray(theta), means, sets, counts, manifest)
