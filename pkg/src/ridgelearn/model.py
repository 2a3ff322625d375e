"""Ground-truth instances and the black-box query oracle.

A target function is a finite sum of ridge features ``sum_i a_i * s_i(v_i . x)``
with unit directions ``v_i`` and univariate activations ``s_i``.  All learner
code accesses the target exclusively through :class:`QueryOracle`, which
returns values of a fixed perturbed function within a sup-norm band ``eps`` of
the truth.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Activation",
    "Feature",
    "SumOfFeaturesModel",
    "NoiseSpec",
    "QueryOracle",
    "ValidationReport",
    "evaluate_model",
    "validate_assumptions",
    "gaussian_reweight_eval",
]


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

_BUILTIN_KINDS = (
    "sine",
    "cosine-bump",
    "tanh-like",
    "relu-like",
    "piecewise-linear",
    "gaussian-bump",
    "absolute-value",
    "custom-tabulated",
)


class Activation:
    """A univariate activation with a declared Lipschitz constant.

    Builtins are normalized so that ``s(0) == 0`` exactly (a constant is
    subtracted at construction).  ``bounded`` declares ``|s| <= 1``
    everywhere; unbounded builtins (relu-like, absolute-value, open-ended
    piecewise-linear) are only valid for the smoothing/derivative pipeline.

    ``trig_profile``, when not ``None``, lists closed-form components of the
    function as ``("sin"|"cos", freq, coeff)``, ``("const", 0.0, coeff)`` or
    ``("gauss", (center, width), coeff)`` terms; the Gaussian-damped Fourier
    transform of such activations is known exactly and reference oracles use
    it instead of numerical quadrature.
    """

    def __init__(self, kind, params, fn, lipschitz, bounded, trig_profile=None,
                 derivative_profile=None):
        if kind not in _BUILTIN_KINDS and kind != "callable":
            raise ValueError(f"unknown activation kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self._raw_fn = fn
        self._shift = float(np.asarray(fn(np.zeros(1)))[0])
        self.lipschitz = float(lipschitz)
        self.bounded = bool(bounded)
        self.trig_profile = trig_profile
        self.derivative_profile = derivative_profile

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._raw_fn(x) - self._shift

    def __repr__(self):
        brief = {k: (f"<{len(v)} values>" if isinstance(v, list) and len(v) > 8
                     else v)
                 for k, v in self.params.items()}
        return f"Activation({self.kind}, {brief})"

    # -- constructors -------------------------------------------------------

    @staticmethod
    def sine(freq=1.0):
        """s(x) = sin(freq * x); Lipschitz constant ``freq``."""
        w = float(freq)
        return Activation(
            "sine", {"freq": w}, lambda x: np.sin(w * x), abs(w), True,
            trig_profile=[("sin", w, 1.0)],
        )

    @staticmethod
    def cosine_bump(width=1.0):
        """Raised-cosine dip: (cos(pi x / width) - 1)/2 inside ``|x| <= width``,
        -1 outside.  Smooth (C1), bounded in [-1, 0], s(0) = 0."""
        w = float(width)

        def fn(x):
            inside = np.abs(x) <= w
            out = np.where(inside, 0.5 * (np.cos(np.pi * x / w) - 1.0), -1.0)
            return out

        return Activation("cosine-bump", {"width": w}, fn, np.pi / (2 * w), True)

    @staticmethod
    def tanh_like(slope=1.0):
        s = float(slope)
        return Activation("tanh-like", {"slope": s},
                          lambda x: np.tanh(s * x), abs(s), True)

    @staticmethod
    def relu_hinge(kink=0.0, slope=1.0):
        """max(0, slope*(x - kink)) shifted to vanish at 0.  Unbounded."""
        k, s = float(kink), float(slope)
        return Activation(
            "relu-like", {"kink": k, "slope": s},
            lambda x: np.maximum(0.0, s * (x - k)), abs(s), False,
        )

    @staticmethod
    def piecewise_linear(points):
        """Linear interpolation through sorted (x, y) breakpoints, extended
        beyond the ends with the terminal slopes.  Unbounded in general."""
        pts = sorted((float(a), float(b)) for a, b in points)
        if len(pts) < 2:
            raise ValueError("need at least two breakpoints")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoint abscissae must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        lo_slope, hi_slope = slopes[0], slopes[-1]

        def fn(x):
            y = np.interp(x, xs, ys)
            y = np.where(x < xs[0], ys[0] + lo_slope * (x - xs[0]), y)
            y = np.where(x > xs[-1], ys[-1] + hi_slope * (x - xs[-1]), y)
            return y

        lip = float(np.max(np.abs(slopes)))
        return Activation(
            "piecewise-linear", {"points": [list(p) for p in pts]}, fn, lip, False,
        )

    @staticmethod
    def gaussian_bump(width=1.0, center=0.0):
        """exp(-(x-center)^2 / (2 width^2)) minus its value at 0."""
        w, mu = float(width), float(center)
        off = math.exp(-mu * mu / (2 * w * w))
        return Activation(
            "gaussian-bump", {"width": w, "center": mu},
            lambda x: np.exp(-((x - mu) ** 2) / (2 * w * w)),
            math.exp(-0.5) / w, True,
            trig_profile=[("gauss", (mu, w), 1.0), ("const", 0.0, -off)],
        )

    @staticmethod
    def absolute_value():
        return Activation("absolute-value", {}, np.abs, 1.0, False)

    @staticmethod
    def custom_tabulated(xs, ys, lipschitz=None):
        """Linear interpolation of a sample table, clamped to the endpoint
        values outside the table range.  The mesh must be <= 1e-3 so the
        interpolation error stays below ``lipschitz * 1e-3``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("table must be two equal-length 1-D arrays")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        if np.max(np.diff(xs)) > 1e-3 + 1e-12:
            raise ValueError("table mesh must be <= 1e-3")
        if lipschitz is None:
            lipschitz = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
        bounded = bool(np.max(np.abs(ys)) <= 1.0 + 1e-12)

        def fn(x):
            return np.interp(x, xs, ys)  # np.interp clamps outside the range

        return Activation(
            "custom-tabulated",
            {"xs": xs.tolist(), "ys": ys.tolist(), "lipschitz": float(lipschitz)},
            fn, lipschitz, bounded,
        )

    @staticmethod
    def from_callable(fn, lipschitz, bounded, name="callable",
                      trig_profile=None, derivative_profile=None,
                      normalize=True):
        """Wrap an arbitrary vectorized callable.  Not serializable; intended
        for tests and for derived (smoothed-derivative) instances."""
        act = Activation("callable", {"name": name}, fn, lipschitz, bounded,
                         trig_profile=trig_profile,
                         derivative_profile=derivative_profile)
        if not normalize:
            act._shift = 0.0
        return act

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        if self.kind == "callable":
            raise ValueError("callable activations cannot be serialized")
        return {"kind": self.kind, "params": self.params}

    @staticmethod
    def from_dict(doc):
        kind = doc["kind"]
        p = doc["params"]
        ctors = {
            "sine": lambda: Activation.sine(p["freq"]),
            "cosine-bump": lambda: Activation.cosine_bump(p["width"]),
            "tanh-like": lambda: Activation.tanh_like(p["slope"]),
            "relu-like": lambda: Activation.relu_hinge(p["kink"], p["slope"]),
            "piecewise-linear": lambda: Activation.piecewise_linear(p["points"]),
            "gaussian-bump": lambda: Activation.gaussian_bump(p["width"], p["center"]),
            "absolute-value": Activation.absolute_value,
            "custom-tabulated": lambda: Activation.custom_tabulated(
                p["xs"], p["ys"], p.get("lipschitz")),
        }
        if kind not in ctors:
            raise ValueError(f"unknown activation kind {kind!r}")
        return ctors[kind]()


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Feature:
    coeff: float
    direction: np.ndarray  # unit vector, read-only
    activation: Activation


class SumOfFeaturesModel:
    """f(x) = sum_i coeff_i * activation_i(direction_i . x).

    Directions are renormalized to unit length at construction (rejecting
    anything further than 1e-6 from unit length as a likely bug) and stored
    read-only.  ``lipschitz`` and ``gamma`` are the declared Lipschitz bound
    of the activations and the declared minimum pairwise sine of angles
    between directions; they are *declared*, and checked by
    :func:`validate_assumptions`.
    """

    def __init__(self, dim, features, lipschitz=None, gamma=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        feats = []
        for coeff, direction, act in features:
            v = np.asarray(direction, dtype=float).reshape(-1)
            if v.shape != (self.dim,):
                raise ValueError("direction dimension mismatch")
            nrm = float(np.linalg.norm(v))
            if not 1e-12 < nrm:
                raise ValueError("direction must be nonzero")
            if abs(nrm - 1.0) > 1e-6:
                raise ValueError("direction is not close to unit length")
            v = v / nrm
            v.flags.writeable = False
            if abs(coeff) > 1.0 + 1e-12:
                raise ValueError("coefficients must satisfy |a| <= 1")
            feats.append(Feature(float(coeff), v, act))
        self.features = tuple(feats)
        if lipschitz is None:
            lipschitz = max((f.activation.lipschitz for f in feats), default=1.0)
        self.lipschitz = float(lipschitz)
        if gamma is None:
            gamma = min_pairwise_sine([f.direction for f in feats])
        self.gamma = float(gamma)

    @property
    def n_features(self):
        return len(self.features)

    def directions(self):
        if not self.features:
            return np.zeros((0, self.dim))
        return np.stack([f.direction for f in self.features])

    def coeffs(self):
        return np.array([f.coeff for f in self.features])

    def __call__(self, x):
        return evaluate_model(self, x)

    def evaluate_many(self, X):
        """Evaluate on an (N, dim) batch; returns shape (N,)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError("expected an (N, dim) array")
        out = np.zeros(X.shape[0])
        for f in self.features:
            out += f.coeff * f.activation(X @ f.direction)
        return out

    def as_function(self):
        """Plain callable view (N, dim) -> (N,), for estimator plumbing."""
        return self.evaluate_many

    # -- serialization ------------------------------------------------------

    def to_dict(self, noise=None):
        doc = {
            "dim": self.dim,
            "features": [
                {
                    "coeff": f.coeff,
                    "direction": f.direction.tolist(),
                    "activation": f.activation.to_dict(),
                }
                for f in self.features
            ],
            "lipschitz": self.lipschitz,
            "gamma": self.gamma,
        }
        if noise is not None:
            doc["noise"] = noise.to_dict()
        return doc

    @staticmethod
    def from_dict(doc):
        feats = [
            (f["coeff"], np.asarray(f["direction"], dtype=float),
             Activation.from_dict(f["activation"]))
            for f in doc["features"]
        ]
        return SumOfFeaturesModel(doc["dim"], feats,
                                  lipschitz=doc.get("lipschitz"),
                                  gamma=doc.get("gamma"))


def evaluate_model(model, x):
    """Exact target value sum_i a_i s_i(v_i . x) at a single point."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (model.dim,):
        raise ValueError(f"expected a vector of dimension {model.dim}")
    total = 0.0
    for f in model.features:
        total += f.coeff * float(f.activation(np.dot(f.direction, x)))
    return total


def min_pairwise_sine(directions):
    """Brute-force minimum over pairs of sin(angle(v_i, v_j)); 1.0 if < 2."""
    vs = [np.asarray(v, dtype=float) for v in directions]
    best = 1.0
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            c = abs(float(np.dot(vs[i], vs[j])))
            c = min(c, 1.0)
            best = min(best, math.sqrt(max(0.0, 1.0 - c * c)))
    return best


# ---------------------------------------------------------------------------
# Query oracle
# ---------------------------------------------------------------------------

_NOISE_KINDS = ("none", "deterministic-bounded", "uniform-bounded")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    def to_dict(self):
        return {"kind": self.kind, "eps": self.eps, "seed": self.seed}

    @staticmethod
    def from_dict(doc):
        return NoiseSpec(doc["kind"], doc["eps"], doc["seed"])


def _mix64(z):
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _hash_unit(X, seed):
    """Map each row's float64 bit pattern to a value in [0, 1).

    Pure in (seed, x): the perturbed target stays a fixed function, queried
    twice at the same point it answers the same.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    # normalize -0.0 to 0.0 so equal inputs share a bit pattern
    X = X + 0.0
    bits = X.view(np.uint64)
    mask = (1 << 64) - 1
    h = np.full(X.shape[0],
                np.uint64((int(seed) ^ 0x9E3779B97F4A7C15) & mask))
    for k in range(X.shape[1]):
        tweak = np.uint64(((k + 1) * 0x9E3779B97F4A7C15) & mask)
        h = _mix64(h ^ _mix64(bits[:, k] + tweak))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


class QueryOracle:
    """Black-box access to a fixed function within sup-distance eps of f.

    The perturbation is a seeded hash of the query point's bit pattern, so
    the oracle realizes one fixed function f~ (not fresh randomness) with
    ``|f~(x) - f(x)| <= eps`` everywhere.  A thread-safe counter tracks the
    number of points queried.
    """

    def __init__(self, target, noise=NoiseSpec(), dim=None):
        if isinstance(target, SumOfFeaturesModel):
            self._fn = target.evaluate_many
            self.dim = target.dim
        else:
            if dim is None:
                raise ValueError("dim is required for a plain-callable target")
            self._fn = target
            self.dim = int(dim)
        self.noise = noise
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self):
        return self._count

    def query(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of dimension {self.dim}")
        return float(self.query_many(x[None, :])[0])

    def query_many(self, X):
        """Query a batch of points, shape (N, dim) -> (N,).  Counts N."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError("expected an (N, dim) array")
        with self._lock:
            self._count += X.shape[0]
        y = np.asarray(self._fn(X), dtype=float)
        kind = self.noise.kind
        if kind == "none" or self.noise.eps == 0.0:
            return y
        u = _hash_unit(X, self.noise.seed)
        if kind == "uniform-bounded":
            return y + self.noise.eps * (2.0 * u - 1.0)
        # deterministic-bounded: full-amplitude +-eps
        return y + self.noise.eps * np.where(u >= 0.5, 1.0, -1.0)


# ---------------------------------------------------------------------------
# Assumption validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)
    measured_gamma: float = 1.0
    measured_lipschitz: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def __str__(self):
        lines = [f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in self.checks.items()]
        return "\n".join(lines)


def validate_assumptions(model, radius=1.0, require_bounded=False, step=1e-4,
                         grid=1e-3):
    """Report-only check of the standing model assumptions.

    Lipschitz constants can only be spot-checked: finite differences at
    ``step`` are sampled on a grid of pitch ``grid`` over [-4*radius,
    4*radius] and compared against the declared constant.
    """
    report = ValidationReport()
    report.checks["coefficients"] = all(
        abs(f.coeff) <= 1.0 + 1e-12 for f in model.features)
    report.checks["zero-at-origin"] = all(
        abs(float(f.activation(0.0))) <= 1e-12 for f in model.features)
    report.checks["unit-directions"] = all(
        abs(np.linalg.norm(f.direction) - 1.0) <= 1e-12 for f in model.features)

    xs = np.arange(-4.0 * radius, 4.0 * radius + grid, grid)
    lip_ok = True
    for i, f in enumerate(model.features):
        d = np.abs(f.activation(xs + step) - f.activation(xs)) / step
        m = float(np.max(d)) if d.size else 0.0
        report.measured_lipschitz[i] = m
        if m > f.activation.lipschitz * (1.0 + 1e-6) + 1e-12:
            lip_ok = False
    report.checks["lipschitz"] = lip_ok
    per_model = max(
        (f.activation.lipschitz for f in model.features), default=0.0)
    report.checks["lipschitz-declared"] = per_model <= model.lipschitz + 1e-12

    report.measured_gamma = min_pairwise_sine([f.direction for f in model.features])
    report.checks["separation"] = report.measured_gamma >= model.gamma - 1e-12

    if require_bounded:
        zs = np.linspace(-50.0, 50.0, 20001)
        report.checks["bounded"] = all(
            float(np.max(np.abs(f.activation(zs)))) <= 1.0 + 1e-9
            for f in model.features)
    return report


def gaussian_reweight_eval(fn, ell, x):
    """fn(x) * exp(-|x|^2 / (2 ell^2)) for a real-valued fn on R^d."""
    if ell <= 0:
        raise ValueError("ell must be > 0")
    x = np.asarray(x, dtype=float)
    return fn(x) * math.exp(-float(np.dot(x, x)) / (2.0 * ell * ell))
