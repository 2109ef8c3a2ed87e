# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot loops.

Mirrors the NumPy implementations in ode.py / systems.py / adjoint.py /
dp.py: rate functions and derivative contractions for the built-in
systems, the costate ("doubled") composition, the joint Hessian system,
and a Runge-Kutta driver that keeps the whole stepping loop in C.  The
Python modules remain the reference; cross-backend agreement is enforced
by the test suite.

Kernels that memoize Jacobian contractions (PolyKernel) are not safe to
share across threads; per-thread instances are cheap to build.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite, sqrt
from libc.string cimport memcpy, memset

from .errors import MaxStepsExceeded, NonFiniteState, SingularConfiguration

cnp.import_array()


cdef class CSystem:
    cdef readonly int dim

    cdef void c_f(self, double t, double* y, double* out) except *:
        raise NotImplementedError

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        raise NotImplementedError

    cdef void c_vjp(self, double* y, double* s, double* out) except *:
        raise NotImplementedError

    cdef void c_sovjp(self, double* y, double* a, double* b, double* out) except *:
        raise NotImplementedError

    # Python-visible wrappers (testing / parity checks)

    def f(self, double t, cnp.ndarray[double, ndim=1] y):
        cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(y)
        cdef cnp.ndarray[double, ndim=1] out = np.empty(self.dim)
        self.c_f(t, <double*> yy.data, <double*> out.data)
        return out

    def jvp(self, cnp.ndarray[double, ndim=1] y, cnp.ndarray[double, ndim=1] v):
        cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(y)
        cdef cnp.ndarray[double, ndim=1] vv = np.ascontiguousarray(v)
        cdef cnp.ndarray[double, ndim=1] out = np.empty(self.dim)
        self.c_jvp(<double*> yy.data, <double*> vv.data, <double*> out.data)
        return out

    def vjp(self, cnp.ndarray[double, ndim=1] y, cnp.ndarray[double, ndim=1] s):
        cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(y)
        cdef cnp.ndarray[double, ndim=1] ss = np.ascontiguousarray(s)
        cdef cnp.ndarray[double, ndim=1] out = np.empty(self.dim)
        self.c_vjp(<double*> yy.data, <double*> ss.data, <double*> out.data)
        return out

    def sovjp(self, cnp.ndarray[double, ndim=1] y, cnp.ndarray[double, ndim=1] a,
              cnp.ndarray[double, ndim=1] b):
        cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(y)
        cdef cnp.ndarray[double, ndim=1] aa = np.ascontiguousarray(a)
        cdef cnp.ndarray[double, ndim=1] bb = np.ascontiguousarray(b)
        cdef cnp.ndarray[double, ndim=1] out = np.empty(self.dim)
        self.c_sovjp(<double*> yy.data, <double*> aa.data, <double*> bb.data,
                     <double*> out.data)
        return out


# --- 3d harmonic oscillator ---------------------------------------------------

cdef class HO3Kernel(CSystem):
    def __cinit__(self):
        self.dim = 6

    cdef void c_f(self, double t, double* y, double* out) except *:
        cdef int i
        for i in range(3):
            out[i] = y[3 + i]
            out[3 + i] = -y[i]

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        cdef int i
        for i in range(3):
            out[i] = v[3 + i]
            out[3 + i] = -v[i]

    cdef void c_vjp(self, double* y, double* s, double* out) except *:
        cdef int i
        for i in range(3):
            out[i] = -s[3 + i]
            out[3 + i] = s[i]

    cdef void c_sovjp(self, double* y, double* a, double* b, double* out) except *:
        memset(out, 0, 6 * sizeof(double))


# --- Kepler problem -------------------------------------------------------------

cdef class KeplerKernel(CSystem):
    def __cinit__(self):
        self.dim = 6

    cdef double _r2(self, double* y) except -1.0:
        cdef double r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
        if r2 < 1e-24:
            raise SingularConfiguration("|q| below 1e-12")
        return r2

    cdef void c_f(self, double t, double* y, double* out) except *:
        cdef double r2 = self._r2(y)
        cdef double inv3 = r2 ** -1.5
        cdef int i
        for i in range(3):
            out[i] = y[3 + i]
            out[3 + i] = -y[i] * inv3

    cdef void _amul(self, double* y, double* w, double* out) except *:
        # out = A w with A = -r^-3 I + 3 r^-5 q q^T  (3-vectors)
        cdef double r2 = self._r2(y)
        cdef double inv3 = r2 ** -1.5
        cdef double inv5 = r2 ** -2.5
        cdef double qw = y[0] * w[0] + y[1] * w[1] + y[2] * w[2]
        cdef int i
        for i in range(3):
            out[i] = -inv3 * w[i] + 3.0 * inv5 * y[i] * qw

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        cdef double tmp[3]
        self._amul(y, v, tmp)
        cdef int i
        for i in range(3):
            out[i] = v[3 + i]
            out[3 + i] = tmp[i]

    cdef void c_vjp(self, double* y, double* s, double* out) except *:
        cdef double tmp[3]
        self._amul(y, s + 3, tmp)
        cdef int i
        for i in range(3):
            out[i] = tmp[i]
            out[3 + i] = s[i]

    cdef void c_sovjp(self, double* y, double* a, double* b, double* out) except *:
        cdef double r2 = self._r2(y)
        cdef double inv5 = r2 ** -2.5
        cdef double inv7 = r2 ** -3.5
        cdef double uw = 0.0, uq = 0.0, wq = 0.0
        cdef int i
        for i in range(3):
            uw += a[3 + i] * b[i]
            uq += a[3 + i] * y[i]
            wq += b[i] * y[i]
        for i in range(3):
            out[i] = 3.0 * inv5 * (uw * y[i] + wq * a[3 + i] + uq * b[i]) \
                - 15.0 * inv7 * uq * wq * y[i]
            out[3 + i] = 0.0


# --- planar three-body problem -----------------------------------------------

cdef class P3BPKernel(CSystem):
    def __cinit__(self):
        self.dim = 12

    cdef int _pairs(self, double* q, double* d, double* inv3, double* inv5,
                    double* inv7) except -1:
        # d[(3*i+j)*2 + a] = q_j[a] - q_i[a]; inverse odd powers per pair
        cdef int i, j
        cdef double dx, dy, r2
        for i in range(3):
            for j in range(3):
                if i == j:
                    d[(3 * i + j) * 2] = 0.0
                    d[(3 * i + j) * 2 + 1] = 0.0
                    inv3[3 * i + j] = 0.0
                    inv5[3 * i + j] = 0.0
                    inv7[3 * i + j] = 0.0
                    continue
                dx = q[2 * j] - q[2 * i]
                dy = q[2 * j + 1] - q[2 * i + 1]
                r2 = dx * dx + dy * dy
                if r2 < 1e-20:
                    raise SingularConfiguration("three-body near-collision")
                d[(3 * i + j) * 2] = dx
                d[(3 * i + j) * 2 + 1] = dy
                inv3[3 * i + j] = r2 ** -1.5
                inv5[3 * i + j] = r2 ** -2.5
                inv7[3 * i + j] = r2 ** -3.5
        return 0

    cdef void c_f(self, double t, double* y, double* out) except *:
        cdef double d[18]
        cdef double inv3[9]
        cdef double inv5[9]
        cdef double inv7[9]
        self._pairs(y, d, inv3, inv5, inv7)
        cdef int i, j, a
        for i in range(6):
            out[i] = y[6 + i]
        for i in range(3):
            for a in range(2):
                out[6 + 2 * i + a] = 0.0
            for j in range(3):
                if i == j:
                    continue
                for a in range(2):
                    out[6 + 2 * i + a] += d[(3 * i + j) * 2 + a] * inv3[3 * i + j]

    cdef void _acc_jvp(self, double* q, double* w, double* out) except *:
        # directional derivative of the acceleration along dq = w (6-vectors)
        cdef double d[18]
        cdef double inv3[9]
        cdef double inv5[9]
        cdef double inv7[9]
        self._pairs(q, d, inv3, inv5, inv7)
        cdef int i, j, a
        cdef double dwx, dwy, ddw, dd0, dd1
        for i in range(6):
            out[i] = 0.0
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                dd0 = d[(3 * i + j) * 2]
                dd1 = d[(3 * i + j) * 2 + 1]
                dwx = w[2 * j] - w[2 * i]
                dwy = w[2 * j + 1] - w[2 * i + 1]
                ddw = dd0 * dwx + dd1 * dwy
                out[2 * i] += inv3[3 * i + j] * dwx - 3.0 * inv5[3 * i + j] * dd0 * ddw
                out[2 * i + 1] += inv3[3 * i + j] * dwy - 3.0 * inv5[3 * i + j] * dd1 * ddw

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        cdef double tmp[6]
        self._acc_jvp(y, v, tmp)
        cdef int i
        for i in range(6):
            out[i] = v[6 + i]
            out[6 + i] = tmp[i]

    cdef void c_vjp(self, double* y, double* s, double* out) except *:
        cdef double tmp[6]
        self._acc_jvp(y, s + 6, tmp)
        cdef int i
        for i in range(6):
            out[i] = tmp[i]
            out[6 + i] = s[i]

    cdef void c_sovjp(self, double* y, double* a, double* b, double* out) except *:
        cdef double d[18]
        cdef double inv3[9]
        cdef double inv5[9]
        cdef double inv7[9]
        self._pairs(y, d, inv3, inv5, inv7)
        cdef int i, j, k
        cdef double du0, du1, dw0, dw1, dd0, dd1, uw, dw, ddu
        for i in range(12):
            out[i] = 0.0
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                dd0 = d[(3 * i + j) * 2]
                dd1 = d[(3 * i + j) * 2 + 1]
                du0 = a[6 + 2 * j] - a[6 + 2 * i]
                du1 = a[6 + 2 * j + 1] - a[6 + 2 * i + 1]
                dw0 = b[2 * j] - b[2 * i]
                dw1 = b[2 * j + 1] - b[2 * i + 1]
                uw = du0 * dw0 + du1 * dw1
                dw = dd0 * dw0 + dd1 * dw1
                ddu = dd0 * du0 + dd1 * du1
                out[2 * i] += -3.0 * inv5[3 * i + j] * (dd0 * uw + du0 * dw + dw0 * ddu) \
                    + 15.0 * inv7[3 * i + j] * ddu * dw * dd0
                out[2 * i + 1] += -3.0 * inv5[3 * i + j] * (dd1 * uw + du1 * dw + dw1 * ddu) \
                    + 15.0 * inv7[3 * i + j] * ddu * dw * dd1


# --- random polynomial systems -------------------------------------------------

cdef class PolyKernel(CSystem):
    """Rate P1 y + 0.5 (P2 . y) y with memoized Jacobian contractions.

    Not safe to share across threads (single-slot caches keyed on the
    argument bytes).
    """
    cdef double[:, ::1] p1
    cdef double[:, :, ::1] p2
    cdef double[::1] jac_key, sig_key, quad
    cdef double[:, ::1] jac, sig
    cdef bint jac_valid, sig_valid

    def __init__(self, cnp.ndarray[double, ndim=2] p1, cnp.ndarray[double, ndim=3] p2):
        self.dim = p1.shape[0]
        self.p1 = np.ascontiguousarray(p1)
        self.p2 = np.ascontiguousarray(p2)
        self.jac_key = np.empty(self.dim)
        self.sig_key = np.empty(self.dim)
        self.quad = np.empty(self.dim)
        self.jac = np.empty((self.dim, self.dim))
        self.sig = np.empty((self.dim, self.dim))
        self.jac_valid = False
        self.sig_valid = False

    cdef void _ensure_jac(self, double* y) except *:
        cdef int n = self.dim
        cdef int i, k, l
        cdef bint hit = self.jac_valid
        if hit:
            for i in range(n):
                if y[i] != self.jac_key[i]:
                    hit = False
                    break
        if hit:
            return
        cdef double* p1p = &self.p1[0, 0]
        cdef double* p2p = &self.p2[0, 0, 0]
        cdef double* jac = &self.jac[0, 0]
        cdef double* quad = &self.quad[0]
        cdef double acc
        for i in range(n):
            for k in range(n):
                acc = 0.0
                for l in range(n):
                    acc += p2p[(i * n + k) * n + l] * y[l]
                jac[i * n + k] = p1p[i * n + k] + acc
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += (jac[i * n + k] - p1p[i * n + k]) * y[k]
            quad[i] = acc            # (P2 . y . y)_i
        for i in range(n):
            self.jac_key[i] = y[i]
        self.jac_valid = True

    cdef void c_f(self, double t, double* y, double* out) except *:
        self._ensure_jac(y)
        cdef int n = self.dim
        cdef int i, k
        cdef double* jac = &self.jac[0, 0]
        cdef double acc
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += jac[i * n + k] * y[k]
            out[i] = acc - 0.5 * self.quad[i]

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        self._ensure_jac(y)
        cdef int n = self.dim
        cdef int i, k
        cdef double* jac = &self.jac[0, 0]
        cdef double acc
        for i in range(n):
            acc = 0.0
            for k in range(n):
                acc += jac[i * n + k] * v[k]
            out[i] = acc

    cdef void c_vjp(self, double* y, double* s, double* out) except *:
        self._ensure_jac(y)
        cdef int n = self.dim
        cdef int i, k
        cdef double* jac = &self.jac[0, 0]
        for k in range(n):
            out[k] = 0.0
        for i in range(n):
            for k in range(n):
                out[k] += s[i] * jac[i * n + k]

    cdef void c_sovjp(self, double* y, double* a, double* b, double* out) except *:
        # out_j = a_m b_i P2[m, i, j]; the a-contraction is cached.
        cdef int n = self.dim
        cdef int m, i, j
        cdef bint hit = self.sig_valid
        if hit:
            for i in range(n):
                if a[i] != self.sig_key[i]:
                    hit = False
                    break
        cdef double* p2p = &self.p2[0, 0, 0]
        cdef double* sig = &self.sig[0, 0]
        cdef double am
        if not hit:
            memset(sig, 0, n * n * sizeof(double))
            for m in range(n):
                am = a[m]
                if am == 0.0:
                    continue
                for i in range(n):
                    for j in range(n):
                        sig[i * n + j] += am * p2p[(m * n + i) * n + j]
            for i in range(n):
                self.sig_key[i] = a[i]
            self.sig_valid = True
        for j in range(n):
            out[j] = 0.0
        for i in range(n):
            if b[i] == 0.0:
                continue
            for j in range(n):
                out[j] += b[i] * sig[i * n + j]


# --- costate composition -------------------------------------------------------

cdef class ObpKernel(CSystem):
    """State (y, sigma); rate (F(y), -sigma . F'(y)); analytic jvp/vjp."""
    cdef CSystem inner
    cdef double[::1] t1, t2

    def __init__(self, CSystem inner):
        self.inner = inner
        self.dim = 2 * inner.dim
        self.t1 = np.empty(inner.dim)
        self.t2 = np.empty(inner.dim)

    cdef void c_f(self, double t, double* y, double* out) except *:
        cdef int d = self.inner.dim
        cdef int i
        self.inner.c_f(t, y, out)
        self.inner.c_vjp(y, y + d, out + d)
        for i in range(d):
            out[d + i] = -out[d + i]

    cdef void c_vjp(self, double* y, double* z, double* out) except *:
        cdef int d = self.inner.dim
        cdef int i
        cdef double* t1 = &self.t1[0]
        cdef double* t2 = &self.t2[0]
        self.inner.c_vjp(y, z, t1)
        self.inner.c_sovjp(y, y + d, z + d, t2)
        for i in range(d):
            out[i] = t1[i] - t2[i]
        self.inner.c_jvp(y, z + d, t1)
        for i in range(d):
            out[d + i] = -t1[i]

    cdef void c_jvp(self, double* y, double* v, double* out) except *:
        cdef int d = self.inner.dim
        cdef int i
        cdef double* t1 = &self.t1[0]
        cdef double* t2 = &self.t2[0]
        self.inner.c_jvp(y, v, out)
        self.inner.c_vjp(y, v + d, t1)
        self.inner.c_sovjp(y, y + d, v, t2)
        for i in range(d):
            out[d + i] = -t1[i] - t2[i]


# --- joint (y, sigma, h[, g]) system -------------------------------------------

cdef class DpKernel(CSystem):
    cdef CSystem inner
    cdef bint sigma_term, with_g
    cdef double[::1] col, ovec, evec

    def __init__(self, CSystem inner, bint sigma_term, bint with_g):
        cdef int d = inner.dim
        self.inner = inner
        self.sigma_term = sigma_term
        self.with_g = with_g
        self.dim = 2 * d + d * d * (2 if with_g else 1)
        self.col = np.empty(d)
        self.ovec = np.empty(d)
        self.evec = np.zeros(d)

    cdef void c_f(self, double t, double* y, double* out) except *:
        cdef int d = self.inner.dim
        cdef int i, j
        cdef double* sig = y + d
        cdef double* h = y + 2 * d
        cdef double* out_h = out + 2 * d
        cdef double* col = &self.col[0]
        cdef double* ovec = &self.ovec[0]
        cdef double* evec = &self.evec[0]
        self.inner.c_f(t, y, out)
        self.inner.c_vjp(y, sig, ovec)
        for i in range(d):
            out[d + i] = -ovec[i]
        memset(out_h, 0, d * d * sizeof(double))
        for j in range(d):
            for i in range(d):
                col[i] = h[i * d + j]
            self.inner.c_vjp(y, col, ovec)
            for i in range(d):
                out_h[i * d + j] -= ovec[i]
        for i in range(d):
            self.inner.c_vjp(y, h + i * d, ovec)
            for j in range(d):
                out_h[i * d + j] -= ovec[j]
        if self.sigma_term:
            for i in range(d):
                evec[i] = 1.0
                self.inner.c_sovjp(y, sig, evec, ovec)
                evec[i] = 0.0
                for j in range(d):
                    out_h[i * d + j] -= ovec[j]
        cdef double* g
        cdef double* out_g
        if self.with_g:
            g = y + 2 * d + d * d
            out_g = out + 2 * d + d * d
            for i in range(d):
                self.inner.c_vjp(y, g + i * d, ovec)
                for j in range(d):
                    out_g[i * d + j] = -ovec[j]


# --- Runge-Kutta driver ----------------------------------------------------------

cdef double DP_C[7]
cdef double DP_A[7][6]
cdef double DP_B5[7]
cdef double DP_E[7]

DP_C[0] = 0.0; DP_C[1] = 1.0 / 5; DP_C[2] = 3.0 / 10; DP_C[3] = 4.0 / 5
DP_C[4] = 8.0 / 9; DP_C[5] = 1.0; DP_C[6] = 1.0

cdef int _ii, _jj
for _ii in range(7):
    for _jj in range(6):
        DP_A[_ii][_jj] = 0.0
DP_A[1][0] = 1.0 / 5
DP_A[2][0] = 3.0 / 40; DP_A[2][1] = 9.0 / 40
DP_A[3][0] = 44.0 / 45; DP_A[3][1] = -56.0 / 15; DP_A[3][2] = 32.0 / 9
DP_A[4][0] = 19372.0 / 6561; DP_A[4][1] = -25360.0 / 2187
DP_A[4][2] = 64448.0 / 6561; DP_A[4][3] = -212.0 / 729
DP_A[5][0] = 9017.0 / 3168; DP_A[5][1] = -355.0 / 33
DP_A[5][2] = 46732.0 / 5247; DP_A[5][3] = 49.0 / 176
DP_A[5][4] = -5103.0 / 18656
DP_A[6][0] = 35.0 / 384; DP_A[6][1] = 0.0; DP_A[6][2] = 500.0 / 1113
DP_A[6][3] = 125.0 / 192; DP_A[6][4] = -2187.0 / 6784; DP_A[6][5] = 11.0 / 84

DP_B5[0] = 35.0 / 384; DP_B5[1] = 0.0; DP_B5[2] = 500.0 / 1113
DP_B5[3] = 125.0 / 192; DP_B5[4] = -2187.0 / 6784; DP_B5[5] = 11.0 / 84
DP_B5[6] = 0.0

DP_E[0] = 71.0 / 57600; DP_E[1] = 0.0; DP_E[2] = -71.0 / 16695
DP_E[3] = 71.0 / 1920; DP_E[4] = -17253.0 / 339200; DP_E[5] = 22.0 / 525
DP_E[6] = -1.0 / 40


cdef double _maxabs(double* v, int n):
    cdef double m = 0.0
    cdef int i
    for i in range(n):
        if fabs(v[i]) > m:
            m = fabs(v[i])
    return m


cdef bint _allfinite(double* v, int n):
    cdef int i
    for i in range(n):
        if not isfinite(v[i]):
            return False
    return True


def c_integrate(CSystem sys, cnp.ndarray[double, ndim=1] y0, double t0, double t1,
                double rtol, double atol, double h0, long max_steps, bint rk4):
    """Endpoint-only integration; returns (y_end, n_accepted, n_rejected)."""
    cdef int n = sys.dim
    cdef cnp.ndarray[double, ndim=1] yarr = np.array(y0, dtype=float, copy=True)
    cdef double* y = <double*> yarr.data
    cdef cnp.ndarray[double, ndim=2] karr = np.empty((7, n))
    cdef double* k = <double*> karr.data
    cdef cnp.ndarray[double, ndim=1] ytmp_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] ynew_a = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] err_a = np.empty(n)
    cdef double* ytmp = <double*> ytmp_a.data
    cdef double* ynew = <double*> ynew_a.data
    cdef double* err = <double*> err_a.data

    cdef double direction = 1.0 if t1 > t0 else -1.0
    cdef double span = fabs(t1 - t0)
    cdef double t = t0
    cdef double h, acc, scale, err_norm, factor, min_step
    cdef long n_acc = 0, n_rej = 0, nsteps, step_i
    cdef int i, j, st

    if rk4:
        nsteps = <long> (span / h0)
        if nsteps * h0 < span - 1e-15 * span:
            nsteps += 1
        if nsteps < 1:
            nsteps = 1
        if nsteps > max_steps:
            raise MaxStepsExceeded(f"{nsteps} fixed steps exceed max_steps={max_steps}")
        h = (t1 - t0) / nsteps
        for step_i in range(nsteps):
            sys.c_f(t, y, k)
            for i in range(n):
                ytmp[i] = y[i] + 0.5 * h * k[i]
            sys.c_f(t + 0.5 * h, ytmp, k + n)
            for i in range(n):
                ytmp[i] = y[i] + 0.5 * h * k[n + i]
            sys.c_f(t + 0.5 * h, ytmp, k + 2 * n)
            for i in range(n):
                ytmp[i] = y[i] + h * k[2 * n + i]
            sys.c_f(t + h, ytmp, k + 3 * n)
            for i in range(n):
                y[i] += (h / 6.0) * (k[i] + 2.0 * k[n + i] + 2.0 * k[2 * n + i]
                                     + k[3 * n + i])
            t += h
            if not _allfinite(y, n):
                raise NonFiniteState(f"non-finite state at t={t}")
        return yarr, nsteps, 0

    h = direction * (h0 if h0 < span else span)
    min_step = 1e-14 * max(fabs(t0), fabs(t1), 1.0)
    sys.c_f(t, y, k)
    if not _allfinite(k, n):
        raise NonFiniteState(f"non-finite rate at t={t}")
    while direction * (t1 - t) > 0:
        if fabs(h) > fabs(t1 - t):
            h = t1 - t
        for st in range(1, 7):
            for i in range(n):
                acc = 0.0
                for j in range(st):
                    if DP_A[st][j] != 0.0:
                        acc += DP_A[st][j] * k[j * n + i]
                ytmp[i] = y[i] + h * acc
            sys.c_f(t + DP_C[st] * h, ytmp, k + st * n)
        for i in range(n):
            acc = 0.0
            for j in range(7):
                if DP_B5[j] != 0.0:
                    acc += DP_B5[j] * k[j * n + i]
            ynew[i] = y[i] + h * acc
            acc = 0.0
            for j in range(7):
                if DP_E[j] != 0.0:
                    acc += DP_E[j] * k[j * n + i]
            err[i] = h * acc
        scale = atol + rtol * max(_maxabs(y, n), _maxabs(ynew, n))
        err_norm = _maxabs(err, n) / scale
        if isfinite(err_norm) and err_norm <= 1.0:
            if not _allfinite(ynew, n):
                raise NonFiniteState(f"non-finite state at t={t + h}")
            t += h
            memcpy(y, ynew, n * sizeof(double))
            memcpy(k, k + 6 * n, n * sizeof(double))   # FSAL
            n_acc += 1
            if n_acc > max_steps:
                raise MaxStepsExceeded(
                    f"accepted-step budget {max_steps} exhausted at t={t}",
                    t=t, state=np.asarray(yarr).copy())
        else:
            n_rej += 1
        if isfinite(err_norm) and err_norm > 0.0:
            factor = 0.9 * err_norm ** -0.2
            if factor < 0.2:
                factor = 0.2
            elif factor > 5.0:
                factor = 5.0
        elif err_norm == 0.0:
            factor = 5.0
        else:
            factor = 0.2
        h *= factor
        if fabs(h) < min_step and direction * (t1 - t) > 0:
            raise MaxStepsExceeded(
                f"adaptive step collapsed below {min_step:g} at t={t}",
                t=t, state=np.asarray(yarr).copy())
    return yarr, n_acc, n_rej


# --- factories --------------------------------------------------------------------

def make_ho3():
    return HO3Kernel()


def make_kepler():
    return KeplerKernel()


def make_p3bp():
    return P3BPKernel()


def make_poly(p1, p2):
    return PolyKernel(np.ascontiguousarray(p1, dtype=float),
                      np.ascontiguousarray(p2, dtype=float))


def make_obp(CSystem inner):
    return ObpKernel(inner)


def make_dp(CSystem inner, bint sigma_term, bint with_g):
    return DpKernel(inner, sigma_term, with_g)
