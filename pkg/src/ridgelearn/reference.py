"""Trusted quadrature reference oracles.

These compute Gaussian-damped Fourier transforms of activations, ridge-sum
transforms, and Gaussian-windowed Fourier masses directly from a ground-truth
model, without touching the query oracle.  They serve as the slow, trusted
side of every dual-route check and as the noise-free "quadrature backend" for
the direction search when a ground-truth model is available (tests,
calibration).

The windowed-mass integral over R^d is evaluated by an exact reduction: every
pairwise product of ridge-tube terms depends on at most two scalar
projections, so the remaining d-2 (or d-1) Gaussian directions integrate in
closed form, leaving 1-D/2-D integrals of smooth, rapidly decaying analytic
integrands which uniform trapezoid sums resolve to near machine precision.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

__all__ = [
    "GaussianWeight",
    "sigma_hat_quadrature",
    "SigmaHat",
    "sigma_hat",
    "ridge_fourier_transform",
    "quadrature_mass_oracle",
    "QuadratureValueOracle",
    "TabulatedMassOracle",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Gaussian window (v, A)
# ---------------------------------------------------------------------------

class GaussianWeight:
    """Window exp(-(y-v)^T A (y-v)) with symmetric PSD A.

    Symmetry is required to 1e-12; eigenvalues below -1e-12 are rejected,
    small negative ones are clamped to zero.
    """

    def __init__(self, center, matrix):
        v = np.asarray(center, dtype=float).reshape(-1)
        A = np.asarray(matrix, dtype=float)
        if A.shape != (v.size, v.size):
            raise ValueError("matrix shape must match center dimension")
        if not np.allclose(A, A.T, atol=1e-12, rtol=0.0):
            raise ValueError("matrix must be symmetric to 1e-12")
        A = 0.5 * (A + A.T)
        w, U = np.linalg.eigh(A)
        if np.any(w < -1e-12):
            raise ValueError("matrix must be positive semidefinite")
        w = np.clip(w, 0.0, None)
        self.center = v
        self.matrix = (U * w) @ U.T
        self.eigvals = w
        self.eigvecs = U

    @property
    def dim(self):
        return self.center.size


def _as_weight(w, A=None):
    if isinstance(w, GaussianWeight):
        return w
    return GaussianWeight(w, A)


# ---------------------------------------------------------------------------
# 1-D damped Fourier transforms of activations
# ---------------------------------------------------------------------------

def sigma_hat_quadrature(activation, ell, t, eps_abs=1e-10):
    """(2 pi)^{-1/2} * int s(x) e^{-x^2/(2 ell^2)} e^{-i t x} dx by adaptive
    quadrature, domain truncated at |x| <= 12 ell.

    Slow trusted path; raises if the quadrature error estimate exceeds the
    target.
    """
    if ell <= 0:
        raise ValueError("ell must be > 0")
    t = float(t)
    cutoff = 12.0 * ell
    # Panels capped in width: the damped integrand can occupy a sliver of
    # [-12 ell, 12 ell] and a single global rule would never sample it.
    width = min(2.0 * ell, 8.0)
    edges = {-cutoff, cutoff}
    edges.update(b for b in _breakpoints(activation) if -cutoff < b < cutoff)
    x = -cutoff
    while x < cutoff:
        edges.add(x)
        x += width
    pieces = sorted(edges)

    def damped(x):
        return activation(np.asarray(x)) * np.exp(-x * x / (2.0 * ell * ell))

    re = im = 0.0
    err = 0.0
    import warnings
    with warnings.catch_warnings():
        # roundoff chatter is expected at these tolerances; the explicit
        # error-estimate check below is the authority
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, im, err = _quad_pieces(damped, pieces, t)
    if err > 10.0 * eps_abs:
        raise ArithmeticError(
            f"quadrature did not reach the error target: est err {err:.3e} "
            f"(ell={ell}, t={t}, activation={activation!r})")
    return complex(re, im) / _SQRT2PI


def _quad_pieces(damped, pieces, t):
    re = im = 0.0
    err = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if t == 0.0:
            r, e = integrate.quad(damped, a, b, epsabs=1e-13, epsrel=1e-12,
                                  limit=800)
            re += r
            err += e
        else:
            r, e = integrate.quad(damped, a, b, weight="cos", wvar=t,
                                  epsabs=1e-13, epsrel=1e-12, limit=800,
                                  maxp1=120)
            re += r
            err += e
            r, e = integrate.quad(damped, a, b, weight="sin", wvar=t,
                                  epsabs=1e-13, epsrel=1e-12, limit=800,
                                  maxp1=120)
            im -= r
            err += e
    return re, im, err


def _breakpoints(activation):
    kind = activation.kind
    p = activation.params
    if kind == "cosine-bump":
        return (-p["width"], p["width"])
    if kind == "relu-like":
        return (p["kink"],)
    if kind == "absolute-value":
        return (0.0,)
    if kind == "piecewise-linear":
        return tuple(q[0] for q in p["points"])
    if kind == "custom-tabulated":
        return (p["xs"][0], p["xs"][-1])
    return ()


def _gauss_spike(ell, t, center):
    """exp(-ell^2 (t - center)^2 / 2), vectorized, underflow-safe."""
    z = ell * (np.asarray(t, dtype=float) - center)
    out = np.zeros_like(z)
    ok = np.abs(z) < 38.0
    out[ok] = np.exp(-0.5 * z[ok] * z[ok])
    return out


def _profile_hat(profile, ell, t):
    """Closed-form damped transform for trig/const/gauss component sums."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for tag, arg, coeff in profile:
        if tag == "sin":
            out += coeff * (-0.5j * ell) * (_gauss_spike(ell, t, arg)
                                            - _gauss_spike(ell, t, -arg))
        elif tag == "cos":
            out += coeff * (0.5 * ell) * (_gauss_spike(ell, t, arg)
                                          + _gauss_spike(ell, t, -arg))
        elif tag == "const":
            out += coeff * ell * _gauss_spike(ell, t, 0.0)
        elif tag == "gauss":
            mu, w = arg
            s2 = 1.0 / (1.0 / (w * w) + 1.0 / (ell * ell))
            m = s2 * mu / (w * w)
            amp = math.sqrt(s2) * math.exp(
                m * m / (2 * s2) - mu * mu / (2 * w * w))
            out += coeff * amp * np.exp(-0.5 * s2 * t * t) * np.exp(-1j * m * t)
        else:
            raise ValueError(f"unknown profile component {tag!r}")
    return out


def _odd_linspace(lo, hi, h):
    """Uniform grid with an odd point count (ready for composite Simpson)."""
    n = max(2, int(math.ceil((hi - lo) / h)))
    if n % 2 == 1:
        n += 1
    return np.linspace(lo, hi, n + 1)


def _simpson_weights(n, h):
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _damped_transform_grid(f_vals, xs, ts, weights=None):
    """int f(x) e^{-i t x} dx for f sampled on a grid, per t.

    Composite Simpson on an odd uniform grid by default; pass explicit
    ``weights`` (e.g. trapezoid on a kink-aligned grid) to override.
    """
    if weights is None:
        weights = _simpson_weights(xs.size, xs[1] - xs[0])
    w = weights * f_vals
    out = np.empty(ts.size, dtype=complex)
    step = max(1, int(4e6 // xs.size))
    for k in range(0, ts.size, step):
        tc = ts[k:k + step]
        out[k:k + step] = np.exp(-1j * np.outer(tc, xs)) @ w
    return out


def _trapezoid_weights(xs):
    w = np.zeros(xs.size)
    dx = np.diff(xs)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


class SigmaHat:
    """Damped Fourier transform of one activation, evaluable on arrays.

    Exact closed forms for activations carrying a trig/gauss profile, a
    Dawson-function split for tanh-like, compact Simpson transforms for the
    rest.  Numeric kinds are tabulated once on a uniform grid and splined.
    """

    def __init__(self, activation, ell, t_range=8.0):
        self.activation = activation
        self.ell = float(ell)
        self.t_range = float(t_range)
        self._closed = activation.trig_profile is not None
        self._spline_re = None
        self._spline_im = None
        self._grid = None
        self._support = None
        if not self._closed:
            self._build_table()

    # -- evaluation ---------------------------------------------------------

    def eval(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self._closed:
            return _profile_hat(self.activation.trig_profile, self.ell, t)
        out = np.zeros(t.shape, dtype=complex)
        inside = np.abs(t) <= self.t_range
        out[inside] = (self._spline_re(t[inside])
                       + 1j * self._spline_im(t[inside]))
        return out

    def __call__(self, t):
        return self.eval(t)

    def abs2(self, t):
        v = self.eval(t)
        return (v * v.conj()).real

    # -- support ------------------------------------------------------------

    def grid(self):
        """Uniform grid resolving every feature of |s_hat|^2 (cached)."""
        if self._grid is None:
            h = min(1.0 / (8.0 * self.ell), 2e-3)
            n = int(math.ceil(self.t_range / h))
            self._grid = np.linspace(-n * h, n * h, 2 * n + 1)
        return self._grid

    def support_radius(self, tol=1e-13):
        """Radius beyond which |s_hat| is negligible relative to its peak."""
        if self._support is None:
            ts = self.grid()
            mags = np.abs(self.eval(ts))
            peak = float(np.max(mags))
            if peak == 0.0:
                self._support = 0.0
            else:
                keep = np.nonzero(mags > tol * peak)[0]
                self._support = float(np.abs(ts[keep]).max()) if keep.size else 0.0
        return self._support

    # -- numeric table builders ---------------------------------------------

    def _build_table(self):
        ts = self.grid()
        if self.activation.kind == "tanh-like":
            vals = self._tanh_hat(ts)
        else:
            vals = self._compact_hat(ts)
        self._spline_re = CubicSpline(ts, vals.real)
        self._spline_im = CubicSpline(ts, vals.imag)

    def _tanh_hat(self, ts):
        """tanh(sx) = sign(x) - remainder; the sign part is a Dawson term and
        the remainder 2 sign(x) / (1 + e^{2 s |x|}) decays like e^{-2s|x|}."""
        s = self.activation.params["slope"]
        ell = self.ell
        sgn = 1.0 if s >= 0 else -1.0
        s = abs(s)
        dawson = math.sqrt(2.0) * ell * special.dawsn(
            ell * np.abs(ts) / math.sqrt(2.0)) * np.sign(ts)
        x_hi = min(12.0 * ell, 45.0 / s)
        xs = _odd_linspace(0.0, x_hi, min(2e-3, x_hi / 2000.0))
        g = 2.0 * np.exp(-xs * xs / (2 * ell * ell)) / (1.0 + np.exp(
            np.clip(2.0 * s * xs, None, 700.0)))
        wg = _simpson_weights(xs.size, xs[1] - xs[0]) * g
        sine_part = np.empty(ts.size)
        step = max(1, int(4e6 // xs.size))
        for k in range(0, ts.size, step):
            sine_part[k:k + step] = np.sin(np.outer(ts[k:k + step], xs)) @ wg
        return sgn * (-1j) * math.sqrt(2.0 / math.pi) * (dawson - sine_part)

    def _compact_hat(self, ts):
        """Remaining builtins: Simpson transform over the effective support,
        clamp/asymptote constants in closed form."""
        act = self.activation
        ell = self.ell
        kind = act.kind
        if kind == "cosine-bump":
            wdt = act.params["width"]
            xs = _odd_linspace(-wdt, wdt, min(2e-3, wdt / 1000.0))
            vals = 0.5 * (1.0 + np.cos(np.pi * xs / wdt)) \
                * np.exp(-xs * xs / (2 * ell * ell))
            tr = _damped_transform_grid(vals, xs, ts) / _SQRT2PI
            return tr - ell * _gauss_spike(ell, ts, 0.0)
        if kind == "custom-tabulated":
            # trapezoid on the table's own nodes: exact in the piecewise
            # linear factor, so no kink-misalignment error
            xs = np.asarray(act.params["xs"], dtype=float)
            x0, x1 = xs[0], xs[-1]
            lo = float(act(np.array([x0]))[0])
            hi = float(act(np.array([x1]))[0])
            vals = np.asarray(act(xs), dtype=float) \
                * np.exp(-xs * xs / (2 * ell * ell))
            tr = _damped_transform_grid(vals, xs, ts,
                                        _trapezoid_weights(xs)) / _SQRT2PI
            tr = tr + lo * _gauss_halfline_ft(ell, ts, upper=x0)
            tr = tr + hi * _gauss_halfline_ft(ell, ts, lower=x1)
            return tr
        # generic fallback: direct Simpson over the damped support
        hi_x = 10.0 * ell
        xs = _odd_linspace(-hi_x, hi_x, min(5e-3, hi_x / 4000.0))
        vals = np.asarray(act(xs), dtype=float) \
            * np.exp(-xs * xs / (2 * ell * ell))
        return _damped_transform_grid(vals, xs, ts) / _SQRT2PI


def _tail_gauss_ft(a, x1, ts):
    """int_{x1}^inf e^{-a x^2} e^{-i t x} dx, stable for all x1 and t.

    Uses erfc(z) e^{-t^2/(4a)} = e^{-a x1^2 - i x1 t} w(iz) with the Faddeeva
    function, reflected into the upper half plane when x1 < 0 so nothing
    overflows.
    """
    ra = math.sqrt(a)
    ts = np.asarray(ts, dtype=float)
    zeta = 1j * (ra * x1) - ts / (2.0 * ra)
    pref = math.sqrt(math.pi) / (2.0 * ra)
    phase = np.exp(complex(-a * x1 * x1, 0.0) - 1j * x1 * ts)
    if x1 >= 0:
        return pref * phase * special.wofz(zeta)
    damp = np.exp(-np.minimum(ts * ts / (4.0 * a), 700.0))
    return pref * (2.0 * damp - phase * special.wofz(-zeta))


def _gauss_halfline_ft(ell, ts, lower=None, upper=None):
    """(2 pi)^{-1/2} int over a half line of e^{-x^2/(2 ell^2)} e^{-i t x} dx."""
    a = 1.0 / (2.0 * ell * ell)
    ts = np.asarray(ts, dtype=float)
    if lower is not None:
        return _tail_gauss_ft(a, lower, ts) / _SQRT2PI
    # lower half line: conjugate-reflect the tail integral
    return np.conj(_tail_gauss_ft(a, -upper, ts)) / _SQRT2PI


_sigma_hat_cache = {}


def _activation_key(act):
    if act.kind == "callable":
        return ("callable", id(act))

    def freeze(v):
        if isinstance(v, list):
            return tuple(freeze(x) for x in v)
        return v

    return (act.kind,
            tuple(sorted((k, freeze(v)) for k, v in act.params.items())))


def sigma_hat(activation, ell, t_range=8.0):
    """Cached SigmaHat for (activation, ell, range); built at most once."""
    key = (_activation_key(activation), float(ell), float(t_range))
    got = _sigma_hat_cache.get(key)
    if got is None:
        got = (SigmaHat(activation, ell, t_range), activation)
        _sigma_hat_cache[key] = got
    return got[0]


# ---------------------------------------------------------------------------
# Ridge transforms and the reference value oracle
# ---------------------------------------------------------------------------

def ridge_fourier_transform(activation, ell, v, y):
    """Transform of the damped ridge s(v.x): the univariate profile along the
    ridge line times a Gaussian falloff transverse to it."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("v must be a unit vector")
    d = v.size
    proj = float(np.dot(v, y))
    perp = y - proj * v
    sh = sigma_hat(activation, ell, t_range=max(8.0, abs(proj) + 2.0))
    arg = -0.5 * ell * ell * float(np.dot(perp, perp))
    atten = math.exp(arg) if arg > -700 else 0.0
    return complex(sh.eval(proj)[0]) * ell ** (d - 1) * atten


class QuadratureValueOracle:
    """Reference pointwise transform of the damped model: closed-form sum of
    per-feature ridge profiles.  The noise-free value-oracle backend."""

    def __init__(self, model, ell, t_range=10.0):
        self.model = model
        self.ell = float(ell)
        self._hats = [sigma_hat(f.activation, self.ell, t_range)
                      for f in model.features]

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return complex(self.value_line(y, np.array([1.0]))[0])

    def value_line(self, u, ts):
        """Vectorized values at the points t*u; u need not be unit length."""
        u = np.asarray(u, dtype=float)
        ts = np.asarray(ts, dtype=float)
        d = self.model.dim
        nrm2 = float(np.dot(u, u))
        out = np.zeros(ts.shape, dtype=complex)
        for f, sh in zip(self.model.features, self._hats):
            c = float(np.dot(f.direction, u))
            perp2 = max(nrm2 - c * c, 0.0)
            arg = -0.5 * self.ell ** 2 * perp2 * ts * ts
            atten = np.exp(np.maximum(arg, -700.0))
            atten[arg <= -700.0] = 0.0
            out += f.coeff * sh.eval(ts * c) * self.ell ** (d - 1) * atten
        return out

    def __call__(self, y):
        return self.value(y)


# ---------------------------------------------------------------------------
# Windowed Fourier mass: exact pairwise reduction
# ---------------------------------------------------------------------------

def _perp_basis(v):
    """Orthonormal basis of the complement of span(v), shape (d, d-1)."""
    d = v.size
    if d == 1:
        return np.zeros((1, 0))
    _, _, vt = np.linalg.svd(v[None, :])
    return vt[1:].T


def _pair_basis(vi, vj):
    """Orthonormal basis of the complement of span(vi, vj), (d, d-2)."""
    U = np.stack([vi, vj], axis=1)
    u_full, _, _ = np.linalg.svd(U, full_matrices=True)
    return u_full[:, 2:]


class _DiagReduction:
    """One feature's tube-squared term against a window.  After integrating
    the transverse Gaussian block the residual exponent is an exact quadratic
    in the ridge projection; its coefficients are fitted from three
    evaluations."""

    def __init__(self, v_i, ell, A):
        d = v_i.size
        self.v_i = v_i
        self.ell = ell
        self.A = A
        Q = _perp_basis(v_i)
        M = Q.T @ (ell * ell * np.eye(d) + A) @ Q
        self._Q = Q
        self._M = M
        detM = float(np.linalg.det(M)) if M.size else 1.0
        self.const = ell ** (2 * (d - 1)) * math.pi ** ((d - 1) / 2) \
            / math.sqrt(detM)

    def phi(self, s, v):
        r = s * self.v_i - v
        c = float(r @ self.A @ r)
        if self._M.size == 0:
            return c
        b = self._Q.T @ (self.A @ r)
        return c - float(b @ np.linalg.solve(self._M, b))

    def window(self, v):
        """(kappa, mu, rho) with phi(s) = kappa (s - mu)^2 + rho."""
        p0 = self.phi(0.0, v)
        p1 = self.phi(1.0, v)
        pm = self.phi(-1.0, v)
        alpha = 0.5 * (p1 + pm) - p0
        beta = 0.5 * (p1 - pm)
        if alpha <= 1e-14:
            return 0.0, 0.0, max(p0, 0.0)
        mu = -beta / (2.0 * alpha)
        rho = p0 - beta * beta / (4.0 * alpha)
        return alpha, mu, max(rho, 0.0)


class _CrossReduction:
    """A pair of distinct tubes against a window; the transverse block is
    closed form, leaving a 2-D integral in the two ridge projections."""

    def __init__(self, v_i, v_j, ell, A):
        d = v_i.size
        self.v_i, self.v_j = v_i, v_j
        self.ell, self.A = ell, A
        c = float(np.dot(v_i, v_j))
        self.sin = math.sqrt(max(1.0 - c * c, 0.0))
        G = np.array([[1.0, c], [c, 1.0]])
        self._Ginv = np.linalg.inv(G)
        self._U = np.stack([v_i, v_j], axis=1)
        W = _pair_basis(v_i, v_j)
        Mz = W.T @ (ell * ell * np.eye(d) + A) @ W
        self._W = W
        self._Mz = Mz
        detMz = float(np.linalg.det(Mz)) if Mz.size else 1.0
        self.const = ell ** (2 * (d - 1)) / self.sin \
            * math.pi ** ((d - 2) / 2) / math.sqrt(detMz)

    def _psi(self, s, t, v):
        y_par = self._U @ (self._Ginv @ np.array([s, t]))
        ell2 = self.ell * self.ell
        r = y_par - v
        q = 0.5 * ell2 * (float(np.sum((y_par - s * self.v_i) ** 2))
                          + float(np.sum((y_par - t * self.v_j) ** 2))) \
            + float(r @ self.A @ r)
        if self._Mz.size == 0:
            return q
        L = self._W.T @ (self.A @ r)
        return q - float(L @ np.linalg.solve(self._Mz, L))

    def quad_form(self, v):
        """Exact psi(s,t) = (u-mu)^T H (u-mu) + rho, or (H, None, const) when
        H is degenerate (caller falls back to direct integration)."""
        pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (2.0, 0.0), (0.0, 2.0),
               (1.0, 1.0)]
        vals = np.array([self._psi(s, t, v) for s, t in pts])
        Mfit = np.array([[s * s, t * t, s * t, s, t, 1.0] for s, t in pts])
        a_ss, a_tt, a_st, b_s, b_t, c0 = np.linalg.solve(Mfit, vals)
        H = np.array([[a_ss, 0.5 * a_st], [0.5 * a_st, a_tt]])
        if np.linalg.eigvalsh(H)[0] <= 1e-13:
            return H, None, c0
        mu = np.linalg.solve(H, -0.5 * np.array([b_s, b_t]))
        rho = c0 - float(mu @ H @ mu)
        return H, mu, max(rho, 0.0)


def _window_integral_1d(hat, kappa, mu):
    """int |s_hat(s)|^2 e^{-kappa (s - mu)^2} ds, uniform trapezoid."""
    S = hat.support_radius()
    if S == 0.0:
        return 0.0
    if kappa <= 1e-14:
        lo, hi = -S, S
    else:
        reach = 8.5 / math.sqrt(kappa)
        lo, hi = max(-S, mu - reach), min(S, mu + reach)
        if lo >= hi:
            return 0.0
    h = min(1.0 / (4.0 * hat.ell), 4e-3)
    if kappa > 1e-14:
        h = min(h, 0.25 / math.sqrt(kappa))
    xs = np.linspace(lo, hi, int(math.ceil((hi - lo) / h)) + 2)
    vals = hat.abs2(xs)
    if kappa > 1e-14:
        vals = vals * np.exp(-kappa * (xs - mu) ** 2)
    return float(np.trapezoid(vals, xs))


def _collinear_cross(hat_i, hat_j, sign, kappa, mu):
    S = max(hat_i.support_radius(), hat_j.support_radius())
    if S == 0.0:
        return 0.0
    if kappa <= 1e-14:
        lo, hi = -S, S
    else:
        reach = 8.5 / math.sqrt(kappa)
        lo, hi = max(-S, mu - reach), min(S, mu + reach)
        if lo >= hi:
            return 0.0
    h = min(1.0 / (4.0 * hat_i.ell), 1.0 / (4.0 * hat_j.ell), 4e-3)
    if kappa > 1e-14:
        h = min(h, 0.25 / math.sqrt(kappa))
    xs = np.linspace(lo, hi, int(math.ceil((hi - lo) / h)) + 2)
    vals = (hat_i.eval(xs) * np.conj(hat_j.eval(sign * xs))).real
    if kappa > 1e-14:
        vals = vals * np.exp(-kappa * (xs - mu) ** 2)
    return float(np.trapezoid(vals, xs))


def _cross_integral_2d(hat_i, hat_j, H, mu, rho):
    """int s_hat_i(s) conj(s_hat_j(t)) e^{-(u-mu)^T H (u-mu) - rho} ds dt."""
    if rho > 700.0:
        return 0.0 + 0.0j
    Hinv = np.linalg.inv(H)
    widths = 8.5 * np.sqrt(np.maximum(np.diag(Hinv), 0.0)) + 1e-9
    Si, Sj = hat_i.support_radius(), hat_j.support_radius()
    lo_s, hi_s = max(-Si, mu[0] - widths[0]), min(Si, mu[0] + widths[0])
    lo_t, hi_t = max(-Sj, mu[1] - widths[1]), min(Sj, mu[1] + widths[1])
    if lo_s >= hi_s or lo_t >= hi_t:
        return 0.0 + 0.0j
    h_cap = 0.25 / math.sqrt(max(float(np.linalg.eigvalsh(H)[-1]), 1e-14))
    h_s = min(1.0 / (4.0 * hat_i.ell), h_cap, 4e-3)
    h_t = min(1.0 / (4.0 * hat_j.ell), h_cap, 4e-3)
    n_s = min(int(math.ceil((hi_s - lo_s) / h_s)) + 2, 4001)
    n_t = min(int(math.ceil((hi_t - lo_t) / h_t)) + 2, 4001)
    ss = np.linspace(lo_s, hi_s, n_s)
    tt = np.linspace(lo_t, hi_t, n_t)
    fi = hat_i.eval(ss)
    fj = np.conj(hat_j.eval(tt))
    ds = ss - mu[0]
    dt = tt - mu[1]
    expo = (H[0, 0] * ds[:, None] ** 2
            + 2.0 * H[0, 1] * ds[:, None] * dt[None, :]
            + H[1, 1] * dt[None, :] ** 2) + rho
    kern = np.exp(-np.minimum(expo, 700.0))
    kern[expo > 700.0] = 0.0
    vals = fi[:, None] * fj[None, :] * kern
    return complex(np.trapezoid(np.trapezoid(vals, tt, axis=1), ss))


def quadrature_mass_oracle(model, ell, weight, matrix=None, t_range=8.0):
    """Reference windowed Fourier mass of the damped model.

    ``weight`` is a GaussianWeight, or a center vector with ``matrix`` the
    window matrix.  Guarded to dim <= 3 as a cost contract.
    """
    if model.dim > 3:
        raise ValueError("quadrature mass oracle supports dim <= 3 only")
    w = _as_weight(weight, matrix)
    if w.dim != model.dim:
        raise ValueError("weight dimension mismatch")
    ell = float(ell)
    v, A = w.center, w.matrix
    feats = model.features
    hats = [sigma_hat(f.activation, ell, t_range) for f in feats]
    total = 0.0
    for f, hat in zip(feats, hats):
        red = _DiagReduction(f.direction, ell, A)
        kappa, mu, rho = red.window(v)
        if rho > 700.0:
            continue
        total += f.coeff ** 2 * red.const * math.exp(-rho) \
            * _window_integral_1d(hat, kappa, mu)
    for i in range(len(feats)):
        for j in range(i + 1, len(feats)):
            vi, vj = feats[i].direction, feats[j].direction
            c = float(np.dot(vi, vj))
            amp = 2.0 * feats[i].coeff * feats[j].coeff
            if abs(c) > 1.0 - 1e-9:
                red = _DiagReduction(vi, ell, A)
                kappa, mu, rho = red.window(v)
                if rho > 700.0:
                    continue
                total += amp * red.const * math.exp(-rho) * _collinear_cross(
                    hats[i], hats[j], math.copysign(1.0, c), kappa, mu)
                continue
            red = _CrossReduction(vi, vj, ell, A)
            H, mu2, rho = red.quad_form(v)
            if mu2 is None:
                continue
            val = _cross_integral_2d(hats[i], hats[j], H, mu2, rho)
            total += amp * red.const * val.real
    return float(total)


# ---------------------------------------------------------------------------
# Tabulated fast oracle for search backends
# ---------------------------------------------------------------------------

class TabulatedMassOracle:
    """Windowed-mass oracle backed by per-feature convolution tables.

    For a fixed window matrix A the per-feature reduction constants are
    fixed, the window center enters only through exact affine/quadratic
    dependences, and the remaining 1-D integral is a Gaussian convolution of
    |s_hat|^2 precomputed on a grid and splined.  Cross terms carry an exact
    exponential bound; whenever the bound is below ``cross_tol`` the term is
    skipped (and the largest skipped bound is tracked), otherwise it is
    computed directly.

    Values are exact-model reference masses (no query noise).
    """

    def __init__(self, model, ell, t_range=8.0, cross_tol=0.0):
        self.model = model
        self.ell = float(ell)
        self.t_range = float(t_range)
        self.cross_tol = float(cross_tol)
        self._hats = [sigma_hat(f.activation, self.ell, t_range)
                      for f in model.features]
        self._per_A = {}
        self.calls = 0
        self.neglected_cross_bound = 0.0

    def _setup(self, A):
        key = A.tobytes()
        got = self._per_A.get(key)
        if got is not None:
            return got
        feats = self.model.features
        diag = []
        for f, hat in zip(feats, self._hats):
            red = _DiagReduction(f.direction, self.ell, A)
            kappa, _, _ = red.window(np.zeros(self.model.dim))
            diag.append((red, self._conv_table(hat, kappa)))
        cross = []
        for i in range(len(feats)):
            for j in range(i + 1, len(feats)):
                vi, vj = feats[i].direction, feats[j].direction
                if abs(float(np.dot(vi, vj))) > 1.0 - 1e-9:
                    cross.append((i, j, None))
                    continue
                red = _CrossReduction(vi, vj, self.ell, A)
                peak = float(np.max(np.abs(self._hats[i].eval(
                    self._hats[i].grid())))) * float(np.max(np.abs(
                        self._hats[j].eval(self._hats[j].grid()))))
                H, _, _ = red.quad_form(np.zeros(self.model.dim))
                detH = float(np.linalg.det(H))
                box = math.pi / math.sqrt(detH) if detH > 1e-13 \
                    else (2.0 * self.t_range) ** 2
                cross.append((i, j, (red, peak * box)))
        got = (diag, cross)
        self._per_A[key] = got
        return got

    def _conv_table(self, hat, kappa):
        key = (id(hat), float(kappa))
        got = _conv_cache.get(key)
        if got is not None:
            return got
        xs = hat.grid()
        vals = hat.abs2(xs)
        if kappa <= 1e-14:
            got = ("flat", float(np.trapezoid(vals, xs)))
        else:
            h = xs[1] - xs[0]
            nk = int(math.ceil(8.5 / math.sqrt(kappa) / h))
            ks = np.arange(-nk, nk + 1) * h
            kern = np.exp(-kappa * ks * ks) * h
            conv = np.convolve(vals, kern, mode="same")
            got = ("spline", CubicSpline(xs, conv), float(xs[0]),
                   float(xs[-1]))
        _conv_cache[key] = got
        return got

    @staticmethod
    def _conv_eval(table, mu):
        if table[0] == "flat":
            return np.full(np.shape(mu), table[1])
        _, cs, lo, hi = table
        mu = np.asarray(mu, dtype=float)
        out = np.zeros(mu.shape)
        ok = (mu >= lo) & (mu <= hi)
        out[ok] = cs(mu[ok])
        return np.maximum(out, 0.0)

    # -- evaluation ----------------------------------------------------------

    def mass(self, v, A):
        v = np.asarray(v, dtype=float)
        return float(self.mass_profile(v, np.zeros(self.model.dim),
                                       np.array([0.0]),
                                       np.asarray(A, dtype=float))[0])

    def mass_profile(self, v0, b, cs, A):
        """Masses at window centers v0 + c*b for an array of offsets c."""
        A = np.ascontiguousarray(np.asarray(A, dtype=float))
        v0 = np.asarray(v0, dtype=float)
        b = np.asarray(b, dtype=float)
        cs = np.asarray(cs, dtype=float)
        self.calls += cs.size
        diag, cross = self._setup(A)
        out = np.zeros(cs.size)
        feats = self.model.features
        scan = bool(b.any())
        for f, (red, table) in zip(feats, diag):
            _, m0, r0 = red.window(v0)
            if scan:
                _, m1, r1 = red.window(v0 + b)
                _, mm, rm = red.window(v0 - b)
            else:
                m1, r1, mm, rm = m0, r0, m0, r0
            mu = m0 + 0.5 * (m1 - mm) * cs          # exact affine in c
            rho = r0 + 0.5 * (r1 - rm) * cs \
                + (0.5 * (r1 + rm) - r0) * cs * cs  # exact quadratic in c
            atten = np.exp(-np.minimum(rho, 700.0))
            atten[rho > 700.0] = 0.0
            out += f.coeff ** 2 * red.const * atten * self._conv_eval(table, mu)
        for i, j, data in cross:
            amp2 = 2.0 * feats[i].coeff * feats[j].coeff
            if data is None:
                red = _DiagReduction(feats[i].direction, self.ell, A)
                sgn = math.copysign(1.0, float(np.dot(feats[i].direction,
                                                      feats[j].direction)))
                for k in range(cs.size):
                    kappa, mu1, rho = red.window(v0 + cs[k] * b)
                    if rho > 700.0:
                        continue
                    out[k] += amp2 * red.const * math.exp(-rho) \
                        * _collinear_cross(self._hats[i], self._hats[j], sgn,
                                           kappa, mu1)
                continue
            red, peak_box = data
            _, mu_a, r_a = red.quad_form(v0)
            if scan:
                _, mu_b, r_b = red.quad_form(v0 + b)
                _, mu_c, r_c = red.quad_form(v0 - b)
            else:
                mu_b, r_b, mu_c, r_c = mu_a, r_a, mu_a, r_a
            if mu_a is None or mu_b is None or mu_c is None:
                r_arr = np.zeros(cs.size)
            else:
                r_arr = r_a + 0.5 * (r_b - r_c) * cs \
                    + (0.5 * (r_b + r_c) - r_a) * cs * cs
            bound = abs(amp2) * red.const * peak_box \
                * np.exp(-np.minimum(r_arr, 700.0))
            bound[r_arr > 700.0] = 0.0
            small = bound <= self.cross_tol
            if np.any(small):
                self.neglected_cross_bound = max(
                    self.neglected_cross_bound,
                    float(np.max(bound[small], initial=0.0)))
            for k in np.nonzero(~small)[0]:
                H, mu2, rho = red.quad_form(v0 + cs[k] * b)
                if mu2 is None:
                    continue
                val = _cross_integral_2d(self._hats[i], self._hats[j], H, mu2,
                                         rho)
                out[k] += amp2 * red.const * val.real
        return out


_conv_cache = {}
