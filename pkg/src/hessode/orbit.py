"""Closed-orbit search and Hessian spectrum analysis.

The objective is orbit nonclosure: the squared coordinate distance
between the motion state at time 0 and at a fixed time T.  A BFGS
optimizer with a strong-Wolfe line search drives it to zero; the
nonclosure Hessian at the solution is then diagonalized (cyclic Jacobi
rotations, no external linear algebra) and its near-null eigenvectors
are the interesting output: they contain the generators of the dynamical
symmetries, and deforming along a small-but-nonzero eigenvalue direction
followed by reconvergence walks to genuinely different solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bp2 import bp2_hessian, nc_gradient
from .errors import DidNotConverge, LineSearchFailure, NotConverged, ReconvergedToOriginal
from .ode import IntegratorConfig, OdeSystem
from .twopoint import HessianResult, TwoPointLoss, l2_loss

__all__ = [
    "OrbitProblem",
    "OrbitReport",
    "find_orbit",
    "eigh",
    "flat_directions",
    "deform_and_reconverge",
    "mass_tracks",
    "track_separation",
    "FLAT_THRESHOLD_DEFAULT",
]

# Relative scale separating "numerically zero" Hessian eigenvalues from the
# stiff directions on the reference problems (see flat_directions).
FLAT_THRESHOLD_DEFAULT = 1e-8


@dataclass(frozen=True)
class OrbitProblem:
    system: OdeSystem
    T: float
    loss: TwoPointLoss = None
    config: IntegratorConfig = IntegratorConfig()

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("orbit time T must be positive")
        if self.loss is None:
            object.__setattr__(self, "loss", l2_loss())


@dataclass(frozen=True)
class OrbitReport:
    y0: np.ndarray
    nc_value: float
    grad_norm: float
    hessian: HessianResult
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray      # orthonormal columns, ascending eigenvalues
    n_flat: int
    n_calls: int


# --- symmetric eigensolver ----------------------------------------------------

def eigh(sym_matrix, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues ascending and the matching orthonormal eigenvector
    columns.  Converges when the off-diagonal Frobenius norm drops below
    1e-12 of the input's norm.
    """
    a = np.array(sym_matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"need a square matrix, got {a.shape}")
    v = np.eye(n)
    norm0 = np.linalg.norm(a)
    if norm0 == 0.0:
        return np.zeros(n), v
    tol = 1e-12 * norm0
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[off_mask])
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q]) + tol):
                    a[p, q] = a[q, p] = 0.0
                    continue
                # rotation angle from the 2x2 block
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if abs(theta) > 1e150:        # tan from the large-angle limit
                    t = 0.5 / theta
                elif theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rv_p = c * v[:, p] - s * v[:, q]
                rv_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rv_p, rv_q
    else:
        raise NotConverged(f"Jacobi sweeps did not converge in {max_sweeps}")
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def flat_directions(report: OrbitReport, flat_threshold: float = FLAT_THRESHOLD_DEFAULT) -> int:
    """Count eigenvalues with |lambda| < flat_threshold * max(1, lambda_max)."""
    lam_max = float(np.max(report.eigenvalues)) if len(report.eigenvalues) else 0.0
    cut = flat_threshold * max(1.0, lam_max)
    return int(np.sum(np.abs(report.eigenvalues) < cut))


# --- strong-Wolfe line search + BFGS ------------------------------------------

_C1, _C2 = 1e-4, 0.9


def _interval_step(stx, fx, dx, sty, fy, dy, stp, fp, dp, brackt, stpmin, stpmax):
    """One safeguarded-interpolation update of the search interval.

    The four-case trial-point selection of the MINPACK 'dcstep' routine:
    cubic/quadratic interpolants chosen by which of (function increase,
    derivative sign change, derivative decrease) holds at the trial point.
    Returns the updated (stx, fx, dx, sty, fy, dy, stp, brackt).
    """
    sgnd = dp * np.sign(dx)
    if fp > fx:
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * np.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp < stx:
            gamma = -gamma
        p = (gamma - dx) + theta
        q = ((gamma - dx) + gamma) + dp
        r = p / q
        stpc = stx + r * (stp - stx)
        stpq = stx + ((dx / ((fx - fp) / (stp - stx) + dx)) / 2.0) * (stp - stx)
        if abs(stpc - stx) < abs(stpq - stx):
            stpf = stpc
        else:
            stpf = stpc + (stpq - stpc) / 2.0
        brackt = True
    elif sgnd < 0.0:
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * np.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp > stx:
            gamma = -gamma
        p = (gamma - dp) + theta
        q = ((gamma - dp) + gamma) + dx
        r = p / q
        stpc = stp + r * (stx - stp)
        stpq = stp + (dp / (dp - dx)) * (stx - stp)
        stpf = stpc if abs(stpc - stp) > abs(stpq - stp) else stpq
        brackt = True
    elif abs(dp) < abs(dx):
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * np.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp > stx:
            gamma = -gamma
        p = (gamma - dp) + theta
        q = (gamma + (dx - dp)) + gamma
        r = p / q
        if r < 0.0 and gamma != 0.0:
            stpc = stp + r * (stx - stp)
        elif stp > stx:
            stpc = stpmax
        else:
            stpc = stpmin
        stpq = stp + (dp / (dp - dx)) * (stx - stp)
        if brackt:
            stpf = stpc if abs(stpc - stp) < abs(stpq - stp) else stpq
            if stp > stx:
                stpf = min(stp + 0.66 * (sty - stp), stpf)
            else:
                stpf = max(stp + 0.66 * (sty - stp), stpf)
        else:
            stpf = stpc if abs(stpc - stp) > abs(stpq - stp) else stpq
            stpf = min(stpmax, max(stpmin, stpf))
    else:
        if brackt:
            theta = 3.0 * (fp - fy) / (sty - stp) + dy + dp
            s = max(abs(theta), abs(dy), abs(dp))
            gamma = s * np.sqrt(max(0.0, (theta / s) ** 2 - (dy / s) * (dp / s)))
            if stp > sty:
                gamma = -gamma
            p = (gamma - dp) + theta
            q = ((gamma - dp) + gamma) + dy
            r = p / q
            stpf = stp + r * (sty - stp)
        elif stp > stx:
            stpf = stpmax
        else:
            stpf = stpmin
    if fp > fx:
        sty, fy, dy = stp, fp, dp
    else:
        if sgnd < 0.0:
            sty, fy, dy = stx, fx, dx
        stx, fx, dx = stp, fp, dp
    return stx, fx, dx, sty, fy, dy, stpf, brackt


def _more_thuente(phi, f0, g0, a1, amin=1e-8, amax=100.0, xtol=1e-14,
                  max_iter=100):
    """Safeguarded strong-Wolfe search; returns (alpha, f, slope) or None."""
    brackt = False
    stage = 1
    gtest = _C1 * g0
    width = amax - amin
    width1 = width / 0.5
    stx, fx, dx = 0.0, f0, g0
    sty, fy, dy = 0.0, f0, g0
    stmin, stmax = 0.0, a1 + 4.0 * a1
    stp = min(max(a1, amin), amax)
    for _ in range(max_iter):
        fp, dp = phi(stp)
        ftest = f0 + stp * gtest
        if stage == 1 and fp <= ftest and dp >= 0.0:
            stage = 2
        if fp <= ftest and abs(dp) <= _C2 * (-g0):
            return stp, fp, dp
        # no further progress possible
        if brackt and (stp <= stmin or stp >= stmax):
            return None
        if brackt and stmax - stmin <= xtol * stmax:
            return None
        if stp == amax and fp <= ftest and dp <= gtest:
            return None
        if stp == amin and (fp > ftest or dp >= gtest):
            return None
        if stage == 1 and fp <= fx and fp > ftest:
            # work with the auxiliary function psi = f - f0 - c1 a g0
            fm, fxm, fym = fp - stp * gtest, fx - stx * gtest, fy - sty * gtest
            gm, gxm, gym = dp - gtest, dx - gtest, dy - gtest
            stx, fxm, gxm, sty, fym, gym, stp, brackt = _interval_step(
                stx, fxm, gxm, sty, fym, gym, stp, fm, gm, brackt, stmin, stmax)
            fx, fy = fxm + stx * gtest, fym + sty * gtest
            dx, dy = gxm + gtest, gym + gtest
        else:
            stx, fx, dx, sty, fy, dy, stp, brackt = _interval_step(
                stx, fx, dx, sty, fy, dy, stp, fp, dp, brackt, stmin, stmax)
        if brackt:
            if abs(sty - stx) >= 0.66 * width1:
                stp = stx + 0.5 * (sty - stx)
            width1 = width
            width = abs(sty - stx)
            stmin, stmax = min(stx, sty), max(stx, sty)
        else:
            stmin = stp + 1.1 * (stp - stx)
            stmax = stp + 4.0 * (stp - stx)
        stp = min(max(stp, amin), amax)
        if (brackt and (stp <= stmin or stp >= stmax)) \
                or (brackt and stmax - stmin <= xtol * stmax):
            stp = stx
    return None


def _cubic_min(a, fa, ga, b, fb, gb):
    # minimizer of the cubic interpolant through (a, fa, ga), (b, fb, gb)
    with np.errstate(all="ignore"):
        d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - ga * gb
        if rad < 0.0:
            return None
        d2 = np.sign(b - a) * np.sqrt(rad)
        x = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2)
    if not np.isfinite(x):
        return None
    return float(x)


def _zoom(phi, alo, ahi, flo, glo, fhi, ghi, f0, g0, max_iter=25):
    for _ in range(max_iter):
        a = _cubic_min(alo, flo, glo, ahi, fhi, ghi)
        width = abs(ahi - alo)
        lo, hi = min(alo, ahi), max(alo, ahi)
        if a is None or not (lo + 0.1 * width < a < hi - 0.1 * width):
            a = 0.5 * (alo + ahi)
        fa, ga = phi(a)
        if fa > f0 + _C1 * a * g0 or fa >= flo:
            ahi, fhi, ghi = a, fa, ga
        else:
            if abs(ga) <= -_C2 * g0:
                return a, fa, ga
            if ga * (ahi - alo) >= 0.0:
                ahi, fhi, ghi = alo, flo, glo
            alo, flo, glo = a, fa, ga
        if abs(ahi - alo) < 1e-16:
            break
    return None


def _wolfe_search(phi, f0, g0, a_init=1.0, max_expand=20):
    """Strong-Wolfe step along phi(alpha); returns (alpha, f, slope) or None."""
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = a_init
    for i in range(max_expand):
        fa, ga = phi(a)
        if fa > f0 + _C1 * a * g0 or (i > 0 and fa >= f_prev):
            return _zoom(phi, a_prev, a, f_prev, g_prev, fa, ga, f0, g0)
        if abs(ga) <= -_C2 * g0:
            return a, fa, ga
        if ga >= 0.0:
            return _zoom(phi, a, a_prev, fa, ga, f_prev, g_prev, f0, g0)
        a_prev, f_prev, g_prev = a, fa, ga
        a *= 2.0
    return None


def _bfgs_minimize(value_and_grad, x0, gtol, max_iters, stall_f=0.0):
    """Dense-inverse BFGS; returns (x, f, g, n_calls, converged, stalled).

    The update arithmetic and the first-trial step-length rule follow the
    classic dense BFGS recipe (identity initial inverse Hessian, trial
    alpha = min(1, 1.01 * 2 (f - f_prev) / slope), curvature update applied
    after every accepted step), so converged points land where standard
    implementations land; the line search accepts any step satisfying the
    strong Wolfe conditions with c1 = 1e-4, c2 = 0.9 and refines by
    safeguarded interpolation otherwise.

    ``stall_f``: once f drops below this level, an iteration improving it
    by less than 1% stops the run as stalled (the objective is at the
    evaluation noise floor; near a regular minimum BFGS improves
    quadratically, so slow relative progress there is pure noise).
    """
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    eye = np.eye(n)
    f, g = value_and_grad(x)
    n_calls = 1
    old_f = f + np.linalg.norm(g) / 2.0
    hinv = eye.copy()
    for _ in range(max_iters):
        if np.max(np.abs(g)) <= gtol:
            return x, f, g, n_calls, True, False
        p = -(hinv @ g)
        slope = float(g @ p)
        if slope >= 0.0:        # stale curvature; restart from steepest descent
            hinv = eye.copy()
            p = -g
            slope = float(g @ p)
            if slope == 0.0:
                return x, f, g, n_calls, False, True

        cache = {}

        def phi(alpha):
            nonlocal n_calls
            if alpha not in cache:
                fa, ga = value_and_grad(x + alpha * p)
                n_calls += 1
                cache[alpha] = (fa, float(ga @ p), ga)
            fa, sl, _ = cache[alpha]
            return fa, sl

        a_trial = min(1.0, 1.01 * 2.0 * (f - old_f) / slope)
        if a_trial <= 0.0:
            a_trial = 1.0
        hit = _more_thuente(phi, f, slope, a_trial)
        if hit is None:
            hit = _wolfe_search(phi, f, slope, a_init=a_trial)
        if hit is None:
            return x, f, g, n_calls, False, True
        alpha, f_new, _ = hit
        g_new = cache[alpha][2]
        s = alpha * p
        yv = g_new - g
        x = x + s
        stalling = 0.0 < f < stall_f and (f - f_new) < 0.01 * f
        old_f, f, g = f, f_new, g_new
        if np.max(np.abs(g)) <= gtol:
            return x, f, g, n_calls, True, False
        if stalling:
            return x, f, g, n_calls, False, True
        sy = float(yv @ s)
        rho = 1000.0 if sy == 0.0 else 1.0 / sy
        a1 = eye - np.outer(s, yv) * rho
        a2 = eye - np.outer(yv, s) * rho
        hinv = a1 @ hinv @ a2 + rho * np.outer(s, s)
    return x, f, g, n_calls, False, False


# --- orbit finding -------------------------------------------------------------

# A stalled line search with nonclosure at this level still counts as
# converged: the optimizer has reached the integrator's noise floor.
_STALL_OK_NC = 1e-12


def _build_report(problem, y0, value, grad, n_calls, jobs=1) -> OrbitReport:
    hess = bp2_hessian(problem.system, problem.loss, y0, problem.T,
                       problem.config, jobs=jobs)
    w, v = eigh(hess.hessian_sym)
    report = OrbitReport(
        y0=np.asarray(y0, dtype=float),
        nc_value=float(value),
        grad_norm=float(np.max(np.abs(grad))),
        hessian=hess,
        eigenvalues=w,
        eigenvectors=v,
        n_flat=0,
        n_calls=int(n_calls),
    )
    return replace(report, n_flat=flat_directions(report))


def find_orbit(problem: OrbitProblem, y0_init, gtol: float = 1e-12,
               max_iters: int = 200, jobs: int = 1) -> OrbitReport:
    """Minimize orbit nonclosure from y0_init; report spectrum at the end.

    Raises :class:`LineSearchFailure` if progress stalls while the
    nonclosure is still large, and :class:`DidNotConverge` when the
    iteration budget runs out; both carry the best point seen so far.
    """
    y0_init = np.asarray(y0_init, dtype=float)

    def value_and_grad(x):
        value, grad, _ = nc_gradient(problem.system, problem.loss, x,
                                     problem.T, problem.config)
        return value, grad

    x, f, g, n_calls, converged, stalled = _bfgs_minimize(
        value_and_grad, y0_init, gtol, max_iters, stall_f=_STALL_OK_NC)
    if converged or (stalled and f < _STALL_OK_NC):
        return _build_report(problem, x, f, g, n_calls, jobs=jobs)
    best = {"y0": x, "nc_value": float(f),
            "grad_norm": float(np.max(np.abs(g))), "n_calls": n_calls}
    if stalled:
        raise LineSearchFailure(
            f"line search stalled at nonclosure {f:.3e}", best=best)
    raise DidNotConverge(
        f"no convergence within {max_iters} iterations "
        f"(|grad|_inf = {best['grad_norm']:.3e})", best=best)


def deform_and_reconverge(problem: OrbitProblem, report: OrbitReport,
                          eig_index: int, step: float,
                          gtol: float = 1e-12, jobs: int = 1) -> OrbitReport:
    """Perturb y0 along one Hessian eigenvector and re-run the orbit search.

    A nonzero step that flows back to the starting solution (distance
    below 1e-6) raises :class:`ReconvergedToOriginal` carrying the report.
    """
    if not 0 <= eig_index < len(report.eigenvalues):
        raise IndexError(f"eigenvector index {eig_index} out of range")
    y0 = report.y0 + step * report.eigenvectors[:, eig_index]
    new_report = find_orbit(problem, y0, gtol=gtol, jobs=jobs)
    dist = float(np.max(np.abs(new_report.y0 - report.y0)))
    if step != 0.0 and dist < 1e-6:
        raise ReconvergedToOriginal(
            f"deformation step {step} flowed back to the original solution "
            f"(distance {dist:.2e})", report=new_report)
    return new_report


# --- position tracks -------------------------------------------------------------

# Coordinate groups of the q-part forming one mass's position, per system tag.
POSITION_LAYOUT = {
    "ho3": ((0, 1, 2),),
    "kepler": ((0, 1, 2),),
    "p3bp": ((0, 1), (2, 3), (4, 5)),
}


def mass_tracks(system_tag: str, states: np.ndarray):
    """Per-mass position samples from trajectory states (rows = times)."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    layout = POSITION_LAYOUT.get(system_tag)
    if layout is None:
        # no mass structure known: a single track over the first two coords
        layout = ((0, 1),) if states.shape[1] >= 2 else ((0,),)
    return [states[:, list(group)] for group in layout]


def _one_sided_track_distance(pts: np.ndarray, poly: np.ndarray) -> float:
    """max over pts of the min distance to the closed polyline poly."""
    closed = np.vstack([poly, poly[:1]])
    a, b = closed[:-1], closed[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    worst = 0.0
    for pt in pts:
        ap = pt - a
        t = np.clip(np.einsum("ij,ij->i", ap, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d2 = np.min(np.einsum("ij,ij->i", proj - pt, proj - pt))
        if d2 > worst:
            worst = d2
    return float(np.sqrt(worst))


def track_separation(tracks) -> float:
    """Smallest pairwise curve separation among position tracks.

    For each pair the separation is the larger of the two one-sided
    max-min point-to-polyline distances; coincident curves (sampled at
    different phases) give values at the sampling-resolution scale, while
    genuinely distinct curves stay separated.  Returns inf for a single
    track.
    """
    n = len(tracks)
    if n < 2:
        return float("inf")
    best = float("inf")
    for i in range(n):
        for j in range(i + 1, n):
            sep = max(_one_sided_track_distance(tracks[i], tracks[j]),
                      _one_sided_track_distance(tracks[j], tracks[i]))
            best = min(best, sep)
    return best
