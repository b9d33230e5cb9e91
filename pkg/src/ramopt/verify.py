"""Numerical probes and brute-force oracles.

Every probe returns a :class:`ProbeReport`. Probes marked ``expect_fail`` are
negative controls: they feed a deliberately wrong ingredient and count as
healthy only when the check rejects it.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .linalg import thin_qr
from .manifolds import (
    Euclidean,
    FixedRank,
    Oblique,
    SPD,
    Stiefel,
    UnsupportedOperation,
    sphere_geometry,
)
from .mixing import HistoryBuffer, lambda_max_sym, solve_gamma
from .problems import build_problem

__all__ = [
    "ProbeReport",
    "fd_gradient_check",
    "tangent_basis",
    "ls_bruteforce",
    "lambda_max_bruteforce",
    "retraction_first_order_probe",
    "retraction_order_probe",
    "transport_isometry_probe",
    "transport_linearity_probe",
    "feasibility_probe",
    "sphere_dist_identity_probe",
    "contraction_probe",
    "oracle_gamma_probe",
    "probe_geometries",
    "run_suite",
    "format_reports",
]


@dataclass
class ProbeReport:
    name: str
    samples: int
    max_error: float
    threshold: float
    expect_fail: bool = False
    skipped: bool = False
    detail: str = ""

    @property
    def passed(self):
        """Whether the measured error is within the threshold."""
        return bool(self.max_error <= self.threshold)

    @property
    def ok(self):
        """Healthy outcome: passed, or failed as a negative control should, or skipped."""
        return self.skipped or (self.passed != self.expect_fail)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.update(passed=self.passed, ok=self.ok)
        return d


def _skip(name, reason):
    return ProbeReport(name, 0, math.nan, math.nan, skipped=True, detail=reason)


def _slope(ts, ds, noise=1e-13):
    """Fitted log-log slope, or ``None`` when every distance is at rounding level."""
    keep = (ts > 0) & (ds > noise)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(ts[keep]), np.log(ds[keep]), 1)[0])


# --- gradients ------------------------------------------------------------------


def fd_gradient_check(problem, x, directions=20, h=None, rng=None, grad=None, threshold=1e-5):
    """Compare ``<grad f(x), u>`` with central differences of ``f(R_x(t u))``.

    ``u`` runs over the normalized gradient followed by ``directions - 1``
    random unit tangents. The error for a direction is the absolute mismatch
    divided by ``||grad f(x)||`` (or by the largest difference quotient when
    the gradient vanishes). ``grad`` overrides ``problem.grad``, which is how
    negative controls are built.
    """
    geom = problem.geometry
    rng = np.random.default_rng(0) if rng is None else rng
    grad = problem.grad if grad is None else grad
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(geom.ambient_point(x))))
    g = grad(x)
    gnorm = geom.norm(x, g)
    dirs = [g / gnorm] if gnorm > 0 else []
    while len(dirs) < directions:
        dirs.append(geom.random_tangent(x, rng))
    errs, fds = [], []
    for u in dirs:
        fd = (problem.cost(geom.retract(x, h * u)) - problem.cost(geom.retract(x, -h * u))) / (2.0 * h)
        errs.append(abs(fd - geom.inner(x, g, u)))
        fds.append(abs(fd))
    scale = max(gnorm, max(fds))
    err = 0.0 if scale == 0.0 else max(errs) / scale
    return ProbeReport(f"fd_gradient_check[{problem.name}]", len(dirs), err, threshold, detail=f"h={h:.2e}")


# --- least-squares oracle -------------------------------------------------------


def tangent_basis(geom, x):
    """Orthonormal basis of ``T_x`` (in the metric at ``x``) from projected ambient axes.

    Returns ``coords(u)``, a function mapping a tangent at ``x`` to its
    coordinate vector. Intended for small oracle problems only.
    """
    shape = np.shape(geom.ambient_point(x))
    size = int(np.prod(shape))
    cand = []
    for j in range(size):
        e = np.zeros(size)
        e[j] = 1.0
        cand.append(geom.proj(x, e.reshape(shape)))
    K = geom.gram(x, cand)
    d, Z = np.linalg.eigh(0.5 * (K + K.T))
    keep = d > 1e-10 * d[-1]
    W = Z[:, keep] / np.sqrt(d[keep])
    if W.shape[1] != geom.dim:
        raise RuntimeError(f"basis has {W.shape[1]} vectors, expected {geom.dim}")

    def coords(u):
        return W.T @ np.array([geom.inner(x, t, u) for t in cand])

    return coords


def ls_bruteforce(h, r, delta, geom, coords=None):
    """Reference ``argmin ||r - R G||^2 + delta ||X G||^2`` by dense stacked least squares.

    Columns are written in an orthonormal tangent basis, stacked as
    ``[[R], [sqrt(delta) X]]`` and solved with a thin QR. A ridge is added
    only when the triangular factor is exactly singular.
    """
    mk = len(h)
    if mk == 0:
        return np.zeros(0)
    coords = tangent_basis(geom, h.base) if coords is None else coords
    R = np.column_stack([coords(c) for c in h.dr])
    rhs = coords(r)
    A, b = R, rhs
    if delta:
        X = np.column_stack([coords(c) for c in h.dx])
        A = np.vstack([R, math.sqrt(delta) * X])
        b = np.concatenate([rhs, np.zeros(X.shape[0])])
    Q, T = thin_qr(A)
    if np.any(np.diag(T) == 0.0):
        ridge = 1e-12 * max(1.0, float(np.sum(A * A)))
        A = np.vstack([A, math.sqrt(ridge) * np.eye(mk)])
        b = np.concatenate([b, np.zeros(mk)])
        Q, T = thin_qr(A)
    return np.linalg.solve(T, Q.T @ b)


def lambda_max_bruteforce(h, beta, delta, geom, coords=None):
    """Largest eigenvalue of ``(E + E^*) / 2`` from the dense matrix of ``E`` in a tangent basis."""
    coords = tangent_basis(geom, h.base) if coords is None else coords
    R = np.column_stack([coords(c) for c in h.dr])
    X = np.column_stack([coords(c) for c in h.dx])
    G = R.T @ R + delta * (X.T @ X)
    E = (X + beta * R) @ np.linalg.solve(G, R.T)
    return float(np.linalg.eigvalsh(0.5 * (E + E.T))[-1])


def _random_history(geom, rng, mk):
    x = geom.random_point(rng)
    dx = [geom.random_tangent(x, rng) * rng.uniform(0.5, 2.0) for _ in range(mk)]
    dr = [geom.random_tangent(x, rng) * rng.uniform(0.5, 2.0) for _ in range(mk)]
    r = geom.random_tangent(x, rng)
    return HistoryBuffer(x, mk, dx, dr), r


def oracle_geometries():
    return [sphere_geometry(7), Oblique(4, 3), Stiefel(5, 2), SPD(3), FixedRank(5, 4, 2), Euclidean(6)]


def oracle_gamma_probe(instances=500, deltas=(0.0, 1e-8, 1e-2), max_memory=5, seed=0, threshold=1e-8):
    """``solve_gamma`` against :func:`ls_bruteforce` on random histories."""
    rng = np.random.default_rng(seed)
    geoms = oracle_geometries()
    worst, count = 0.0, 0
    for i in range(instances):
        geom = geoms[i % len(geoms)]
        mk = int(rng.integers(1, max_memory + 1))
        h, r = _random_history(geom, rng, mk)
        coords = tangent_basis(geom, h.base)
        for delta in deltas:
            ref = ls_bruteforce(h, r, delta, geom, coords=coords)
            got = solve_gamma(h, r, delta, geom).gamma
            err = np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300)
            worst = max(worst, float(err))
            count += 1
    return ProbeReport("oracle[solve_gamma vs ls_bruteforce]", count, worst, threshold)


def oracle_lambda_probe(instances=100, beta=0.6, deltas=(1e-8, 1e-2), seed=1, threshold=1e-8):
    """``lambda_max_sym`` against the dense operator in an orthonormal basis."""
    rng = np.random.default_rng(seed)
    geoms = oracle_geometries()
    worst, count = 0.0, 0
    for i in range(instances):
        geom = geoms[i % len(geoms)]
        mk = int(rng.integers(1, 4))
        h, _ = _random_history(geom, rng, mk)
        coords = tangent_basis(geom, h.base)
        for delta in deltas:
            ref = lambda_max_bruteforce(h, beta, delta, geom, coords=coords)
            got = lambda_max_sym(h, beta, delta, geom)
            worst = max(worst, abs(got - ref) / max(abs(ref), 1.0))
            count += 1
    return ProbeReport("oracle[lambda_max_sym vs dense operator]", count, worst, threshold)


# --- geometry probes ------------------------------------------------------------

SCALES = np.logspace(-4, -1, 7)


def retraction_first_order_probe(geom, samples=5, rng=None):
    """Slope of ``||R_x(t u) - (x + t u)||`` in ambient coordinates; 2 for a first-order retraction."""
    name = f"retraction_first_order[{geom.name}]"
    rng = np.random.default_rng(0) if rng is None else rng
    worst, slopes = 0.0, []
    for _ in range(samples):
        x = geom.random_point(rng)
        u = geom.random_tangent(x, rng)
        base, ua = geom.ambient_point(x), geom.to_ambient(u)
        ds = np.array([np.linalg.norm(geom.ambient_point(geom.retract(x, t * u)) - base - t * ua) for t in SCALES])
        s = _slope(SCALES, ds)
        if s is None:
            continue  # retraction is the straight line
        slopes.append(s)
        worst = max(worst, abs(s - 2.0))
    detail = "exact (zero second-order term)" if not slopes else f"slopes {min(slopes):.3f}..{max(slopes):.3f}"
    return ProbeReport(name, samples, worst, 0.1, detail=detail)


def retraction_order_probe(geom, samples=5, rng=None):
    """Log-log slope of ``dist(R_x(t u), Exp_x(t u))`` over ``t`` in ``[1e-4, 1e-1]``.

    The reported error is ``max(0, 1.9 - slope)``, so a slope of 2 or more
    passes. A retraction that equals the exponential is reported as exact.
    """
    name = f"retraction_vs_exp[{geom.name}]"
    rng = np.random.default_rng(0) if rng is None else rng
    try:
        x = geom.random_point(rng)
        u = geom.random_tangent(x, rng)
        geom.dist(x, geom.exp(x, u))
    except UnsupportedOperation as exc:
        return _skip(name, str(exc))
    worst, slopes = 0.0, []
    for _ in range(samples):
        x = geom.random_point(rng)
        u = geom.random_tangent(x, rng)
        ds = np.array([geom.dist(geom.retract(x, t * u), geom.exp(x, t * u)) for t in SCALES])
        s = _slope(SCALES, ds)
        if s is None:
            continue
        slopes.append(s)
        worst = max(worst, 1.9 - s)
    detail = "retraction equals Exp" if not slopes else f"slopes {min(slopes):.3f}..{max(slopes):.3f}"
    return ProbeReport(name, samples, max(worst, 0.0), 0.0, detail=detail)


def transport_isometry_probe(geom, samples=10, rng=None, parallel_transport=None, transport=None, step=0.5):
    """Parallel transport preserves norms and the vector transport never grows them.

    The error is the worst of ``| ||P u|| - ||u|| | / ||u||`` (when parallel
    transport exists) and ``max(0, ||T u|| / ||u|| - 1)``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    pt = geom.parallel_transport if parallel_transport is None else parallel_transport
    vt = geom.transport if transport is None else transport
    worst, has_pt = 0.0, True
    for _ in range(samples):
        x = geom.random_point(rng)
        d = geom.random_tangent(x, rng) * step
        y = geom.retract(x, d)
        u = geom.random_tangent(x, rng) * rng.uniform(0.1, 10.0)
        nu = geom.norm(x, u)
        if has_pt:
            try:
                worst = max(worst, abs(geom.norm(y, pt(x, y, u)) - nu) / nu)
            except UnsupportedOperation:
                has_pt = False
        worst = max(worst, geom.norm(y, vt(x, d, u, y=y)) / nu - 1.0)
    detail = "isometry and boundedness" if has_pt else "boundedness only"
    return ProbeReport(f"transport_isometry[{geom.name}]", samples, max(worst, 0.0), 1e-10, detail=detail)


def transport_linearity_probe(geom, samples=10, rng=None):
    """``T(a u + b w) = a T u + b T w``, relative to ``|a| ||u|| + |b| ||w||``."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for _ in range(samples):
        x = geom.random_point(rng)
        d = geom.random_tangent(x, rng) * 0.5
        y = geom.retract(x, d)
        u, w = geom.random_tangent(x, rng), geom.random_tangent(x, rng)
        a, b = rng.standard_normal(2)
        lhs = geom.transport(x, d, a * u + b * w, y=y)
        rhs = a * geom.transport(x, d, u, y=y) + b * geom.transport(x, d, w, y=y)
        worst = max(worst, geom.norm(y, lhs - rhs) / (abs(a) + abs(b)))
    return ProbeReport(f"transport_linearity[{geom.name}]", samples, worst, 1e-12)


def feasibility_probe(geom, samples=20, steps=50, rng=None):
    """Constraint residual after ``steps`` chained retractions of unit-size steps."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for _ in range(max(1, samples // 5)):
        x = geom.random_point(rng)
        for _ in range(steps):
            x = geom.retract(x, geom.random_tangent(x, rng) * rng.uniform(0.1, 1.0))
            worst = max(worst, geom.feasibility_error(x))
    return ProbeReport(f"feasibility_drift[{geom.name}]", samples, worst, 1e-12)


def sphere_dist_identity_probe(d=5, samples=20, rng=None):
    """On the sphere ``dist(x, R_x(v)) = arctan ||v||`` for the normalization retraction."""
    rng = np.random.default_rng(0) if rng is None else rng
    geom = sphere_geometry(d)
    worst = 0.0
    for _ in range(samples):
        x = geom.random_point(rng)
        v = geom.random_tangent(x, rng) * 10.0 ** rng.uniform(-3, 2)
        worst = max(worst, abs(geom.dist(x, geom.retract(x, v)) - math.atan(geom.norm(x, v))))
    return ProbeReport(f"dist_arctan_identity[{geom.name}]", samples, worst, 1e-12)


def contraction_probe(problem, x_star, lam, radius=1e-2, samples=20, rng=None):
    """Estimate ``max dist(g(x), g(y)) / dist(x, y)`` for ``g(x) = Exp_x(-lam grad f(x))`` near ``x_star``.

    Points are drawn at distance at most ``radius`` from ``x_star``. Uses the
    retraction when the geometry has no exponential map. Informational.
    """
    geom = problem.geometry
    rng = np.random.default_rng(0) if rng is None else rng
    try:
        geom.dist(x_star, x_star)
    except UnsupportedOperation as exc:
        raise UnsupportedOperation(f"contraction_probe needs a distance: {exc}") from exc

    def move(x, v):
        try:
            return geom.exp(x, v)
        except UnsupportedOperation:
            return geom.retract(x, v)

    def g(x):
        return move(x, -lam * problem.grad(x))

    def near():
        return move(x_star, geom.random_tangent(x_star, rng) * rng.uniform(0.1, 1.0) * radius)

    ratio = 0.0
    for _ in range(samples):
        x, y = near(), near()
        dxy = geom.dist(x, y)
        if dxy > 0.0:
            ratio = max(ratio, geom.dist(g(x), g(y)) / dxy)
    return ratio


# --- suites ---------------------------------------------------------------------


def probe_geometries():
    return [
        sphere_geometry(5),
        Oblique(6, 3),
        Stiefel(6, 3),
        SPD(4),
        FixedRank(7, 6, 2),
        Euclidean(3, 2),
    ]


def geometry_suite(seed=0):
    reports = []
    for geom in probe_geometries():
        rng = np.random.default_rng(seed)
        reports += [
            retraction_first_order_probe(geom, rng=rng),
            retraction_order_probe(geom, rng=rng),
            transport_isometry_probe(geom, rng=rng),
            transport_linearity_probe(geom, rng=rng),
            feasibility_probe(geom, rng=rng),
        ]
    reports.append(sphere_dist_identity_probe(rng=np.random.default_rng(seed)))

    # a transport that stretches vectors must be caught
    sphere = sphere_geometry(5)
    fake = transport_isometry_probe(
        sphere,
        rng=np.random.default_rng(seed),
        parallel_transport=lambda x, y, u: 1.01 * sphere.parallel_transport(x, y, u),
    )
    fake.name, fake.expect_fail = "transport_isometry[stretched fake] (negative control)", True
    reports.append(fake)
    return reports


GRADIENT_PROBLEMS = (
    ("maxcut", {"n": 30, "p": 4, "tau": 0.3}),
    ("brockett", {"n": 20, "p": 4}),
    ("karcher", {"n": 5, "m": 4}),
    ("matcomp", {"n": 30, "m": 25, "k": 3}),
    ("rayleigh", {"n": 12}),
)


def gradient_suite(seed=0, points=5):
    reports = []
    for name, dims in GRADIENT_PROBLEMS:
        problem = build_problem(name, seed, **dims)
        rng = np.random.default_rng(seed)
        worst = None
        for _ in range(points):
            x = problem.geometry.random_point(rng)
            rep = fd_gradient_check(problem, x, rng=rng)
            if worst is None or rep.max_error > worst.max_error:
                worst = rep
        worst.samples *= points
        reports.append(worst)
        bad = fd_gradient_check(problem, x, rng=rng, grad=lambda y, p=problem: 2.0 * p.grad(y))
        bad.name, bad.expect_fail = f"fd_gradient_check[{name}, gradient x2] (negative control)", True
        reports.append(bad)
    return reports


def oracle_suite(seed=0, instances=500):
    return [oracle_gamma_probe(instances=instances, seed=seed), oracle_lambda_probe(seed=seed + 1)]


def run_suite(name="all", seed=0):
    """Run ``geometry``, ``gradients``, ``oracle`` or ``all``; returns the reports."""
    suites = {"geometry": geometry_suite, "gradients": gradient_suite, "oracle": oracle_suite}
    if name == "all":
        return [rep for fn in suites.values() for rep in fn(seed=seed)]
    if name not in suites:
        raise ValueError(f"unknown suite {name!r}")
    return suites[name](seed=seed)


def format_reports(reports):
    lines = [f"{'probe':<62s} {'n':>5s} {'error':>10s} {'limit':>8s}  result"]
    for r in reports:
        if r.skipped:
            verdict = "skip"
        elif r.expect_fail:
            verdict = "ok (rejected)" if r.ok else "FAIL (not rejected)"
        else:
            verdict = "ok" if r.ok else "FAIL"
        lines.append(f"{r.name:<62s} {r.samples:>5d} {r.max_error:>10.2e} {r.threshold:>8.0e}  {verdict}  {r.detail}".rstrip())
    bad = sum(not r.ok for r in reports)
    lines.append(f"{len(reports)} probes, {bad} failing")
    return "\n".join(lines)
