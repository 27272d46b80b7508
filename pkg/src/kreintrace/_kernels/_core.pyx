# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled path kernels: scalar per-path loops over the same counter-based
streams as the numpy fallback (see kreintrace.rng for the frozen recipe)."""

from libc.math cimport sqrt, log, fabs, isfinite, fmin
cimport cython

ctypedef unsigned long long u64

cdef double U53 = 1.1102230246251565e-16   # 2**-53

cdef u64 K_CTR = 0xA0761D6478BD642FULL


cdef inline u64 mix64(u64 z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unit_u(u64 key, u64 ctr) nogil:
    cdef u64 x = mix64(mix64(key ^ (ctr * K_CTR)))
    return (((x >> 12) * 2ULL + 1ULL)) * U53


# AS241 coefficients (shared numerically with kreintrace.rng)
cdef double[8] A_C = [3.3871328727963666080e0, 1.3314166789178437745e2,
                      1.9715909503065514427e3, 1.3731693765509461125e4,
                      4.5921953931549871457e4, 6.7265770927008700853e4,
                      3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] B_C = [1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
                      5.3941960214247511077e3, 2.1213794301586595867e4,
                      3.9307895800092710610e4, 2.8729085735721942674e4,
                      5.2264952788528545610e3]
cdef double[8] C_M = [1.42343711074968357734e0, 4.63033784615654529590e0,
                      5.76949722146069140550e0, 3.64784832476320460504e0,
                      1.27045825245236838258e0, 2.41780725177450611770e-1,
                      2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] D_M = [1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
                      6.89767334985100004550e-1, 1.48103976427480074590e-1,
                      1.51986665636164571966e-2, 5.47593808499534494600e-4,
                      1.05075007164441684324e-9]
cdef double[8] E_T = [6.65790464350110377720e0, 5.46378491116411436990e0,
                      1.78482653991729133580e0, 2.96560571828504891230e-1,
                      2.65321895265761230930e-2, 1.24266094738807843860e-3,
                      2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] F_T = [1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                      1.48753612908506148525e-2, 7.86869131145613259100e-4,
                      1.84631831751005468180e-5, 1.42151175831644588870e-7,
                      2.04426310338993978564e-15]


cdef inline double poly8(double* c, double x) nogil:
    # Estrin grouping, matching kreintrace.rng exactly
    cdef double x2 = x * x
    cdef double x4 = x2 * x2
    return ((c[0] + c[1] * x) + x2 * (c[2] + c[3] * x)
            + x4 * ((c[4] + c[5] * x) + x2 * (c[6] + c[7] * x)))


cdef inline double ndtri_tail(double p, double q) nogil:
    cdef double r, x
    r = p if p < 1.0 - p else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        x = poly8(C_M, r) / poly8(D_M, r)
    else:
        r = r - 5.0
        x = poly8(E_T, r) / poly8(F_T, r)
    return -x if q < 0.0 else x


cdef inline double ndtri(double p) nogil:
    cdef double q = p - 0.5
    cdef double r
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * poly8(A_C, r) / poly8(B_C, r)
    return ndtri_tail(p, q)


cdef inline double normal(u64 key, u64 ctr) nogil:
    return ndtri(unit_u(key, ctr))


cdef extern from *:
    r"""
/* Strip generation in plain C: restrict-qualified buffers so the central
   rational pass vectorizes.  The coefficient values and the expression tree
   must stay in lockstep with kreintrace/rng.py (bit-identical backends). */
#include <stdint.h>

static const double KT_AC[8] = {3.3871328727963666080e0, 1.3314166789178437745e2,
    1.9715909503065514427e3, 1.3731693765509461125e4, 4.5921953931549871457e4,
    6.7265770927008700853e4, 3.3430575583588128105e4, 2.5090809287301226727e3};
static const double KT_BC[8] = {1.0, 4.2313330701600911252e1,
    6.8718700749205790830e2, 5.3941960214247511077e3, 2.1213794301586595867e4,
    3.9307895800092710610e4, 2.8729085735721942674e4, 5.2264952788528545610e3};

static inline uint64_t kt_mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static void kt_gen_uniforms(uint64_t key, uint64_t base, ptrdiff_t n,
                            double* restrict ubuf) {
    ptrdiff_t t;
    for (t = 0; t < n; t++) {
        uint64_t x = kt_mix64(kt_mix64(key ^ ((base + (uint64_t) t)
                                              * 0xA0761D6478BD642FULL)));
        ubuf[t] = (double)((x >> 12) * 2ULL + 1ULL) * 1.1102230246251565e-16;
    }
}

static void kt_central_pass(ptrdiff_t n, const double* restrict ubuf,
                            double* restrict out) {
    ptrdiff_t t;
    for (t = 0; t < n; t++) {
        double q = ubuf[t] - 0.5;
        double r = 0.180625 - q * q;
        double x2 = r * r;
        double x4 = x2 * x2;
        double num = ((KT_AC[0] + KT_AC[1] * r) + x2 * (KT_AC[2] + KT_AC[3] * r)
                      + x4 * ((KT_AC[4] + KT_AC[5] * r)
                              + x2 * (KT_AC[6] + KT_AC[7] * r)));
        double den = ((KT_BC[0] + KT_BC[1] * r) + x2 * (KT_BC[2] + KT_BC[3] * r)
                      + x4 * ((KT_BC[4] + KT_BC[5] * r)
                              + x2 * (KT_BC[6] + KT_BC[7] * r)));
        out[t] = q * num / den;
    }
}
"""
    void kt_gen_uniforms(u64 key, u64 base, Py_ssize_t n, double* ubuf) nogil
    void kt_central_pass(Py_ssize_t n, const double* ubuf, double* out) nogil


cdef inline void gen_normals(u64 key, u64 base, Py_ssize_t n,
                             double* ubuf, double* out) nogil:
    """Strip generation: integer pass, branch-free central pass over every
    lane (vectorized), then a scalar fixup for the ~15% tail lanes."""
    cdef Py_ssize_t t
    cdef double q
    kt_gen_uniforms(key, base, n, ubuf)
    kt_central_pass(n, ubuf, out)
    for t in range(n):
        q = ubuf[t] - 0.5
        if fabs(q) > 0.425:
            out[t] = ndtri_tail(ubuf[t], q)


cdef inline double rate_at(double y, Py_ssize_t np_, double* pl, double* pr,
                           long long* pk, double* pc, double* pb, double* pe,
                           double* pp, Py_ssize_t na, double* ay, double* ar,
                           double* ad) nogil:
    cdef double out = 0.0, base
    cdef Py_ssize_t i
    for i in range(np_):
        if pk[i] == 0:
            # branchless: the in-piece indicator flips randomly step to step
            out += pc[i] * <double> ((y >= pl[i]) & (y < pr[i]))
        elif pl[i] <= y < pr[i]:
            if pk[i] == 1:
                base = pb[i] + pe[i] * y
            else:
                base = pb[i] * pb[i] - (pe[i] * y) * (pe[i] * y)
            if pp[i] == -2.0:
                out += pc[i] / (base * base)
            else:
                out += pc[i] * base ** pp[i]
    for i in range(na):
        out += ar[i] * <double> (fabs(y - ay[i]) < ad[i])
    return out


DEF STRIP = 256


def trace_advance(u64[::1] keys, long long[::1] pid, u64 step0,
                  Py_ssize_t nsteps, double dt,
                  double[::1] piece_l, double[::1] piece_r,
                  long long[::1] piece_kind, double[::1] piece_c,
                  double[::1] piece_b, double[::1] piece_e, double[::1] piece_p,
                  double[::1] atom_y, double[::1] atom_rate, double[::1] atom_delta,
                  double[::1] levels, double kill_r,
                  double[::1] W, double[::1] M, double[::1] A,
                  long long[::1] next_lev,
                  double[:, ::1] out_a, double[:, ::1] out_l,
                  cython.uchar[:, ::1] reached, cython.uchar[::1] killed,
                  cython.uchar[::1] done):
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t np_ = piece_l.shape[0]
    cdef Py_ssize_t na = atom_y.shape[0]
    cdef Py_ssize_t nlev = levels.shape[0]
    cdef double sdt = sqrt(dt)
    cdef Py_ssize_t i, j, t, nstrip
    cdef long long p, nl
    cdef double w, m, a, y, yprev, lcur
    cdef bint kill_on = isfinite(kill_r)
    cdef bint alive
    cdef u64 key, base
    cdef double zbuf[STRIP]
    cdef double ubuf[STRIP]
    cdef double* pl = &piece_l[0] if np_ else NULL
    cdef double* pr = &piece_r[0] if np_ else NULL
    cdef long long* pk = &piece_kind[0] if np_ else NULL
    cdef double* pc = &piece_c[0] if np_ else NULL
    cdef double* pb = &piece_b[0] if np_ else NULL
    cdef double* pe = &piece_e[0] if np_ else NULL
    cdef double* pp = &piece_p[0] if np_ else NULL
    cdef double* ay = &atom_y[0] if na else NULL
    cdef double* ar = &atom_rate[0] if na else NULL
    cdef double* ad = &atom_delta[0] if na else NULL
    with nogil:
        for i in range(n):
            p = pid[i]
            if done[p]:
                continue
            key = keys[i]
            w = W[i]
            m = M[i]
            a = A[i]
            nl = next_lev[i]
            yprev = w - m
            alive = True
            j = 0
            while j < nsteps and alive:
                nstrip = nsteps - j
                if nstrip > STRIP:
                    nstrip = STRIP
                base = step0 + <u64> j
                gen_normals(key, base, nstrip, ubuf, zbuf)
                for t in range(nstrip):
                    a = a + rate_at(yprev, np_, pl, pr, pk, pc, pb, pe, pp,
                                    na, ay, ar, ad) * dt
                    w = w + sdt * zbuf[t]
                    m = fmin(m, w)
                    y = w - m
                    if kill_on and y >= kill_r:
                        killed[p] = 1
                        done[p] = 1
                        alive = False
                        break
                    lcur = -m
                    while nl < nlev and lcur > levels[nl]:
                        out_a[p, nl] = a
                        out_l[p, nl] = lcur
                        reached[p, nl] = 1
                        nl += 1
                    if nl >= nlev:
                        done[p] = 1
                        alive = False
                        break
                    yprev = y
                j += nstrip
            W[i] = w
            M[i] = m
            A[i] = a
            next_lev[i] = nl


def hit_advance(u64[::1] keys, long long[::1] pid, u64 step0,
                Py_ssize_t nsteps, double dt,
                double[::1] piece_l, double[::1] piece_r,
                long long[::1] piece_kind, double[::1] piece_c,
                double[::1] piece_b, double[::1] piece_e, double[::1] piece_p,
                double[::1] atom_y, double[::1] atom_rate, double[::1] atom_delta,
                double kill_r,
                double[::1] Y, double[::1] A,
                double[::1] out_a, cython.uchar[::1] hit,
                cython.uchar[::1] killed, cython.uchar[::1] done):
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t np_ = piece_l.shape[0]
    cdef Py_ssize_t na = atom_y.shape[0]
    cdef double sdt = sqrt(dt)
    cdef Py_ssize_t i, j, t, nstrip
    cdef long long p
    cdef double y, a, yprev
    cdef bint kill_on = isfinite(kill_r)
    cdef bint alive
    cdef u64 key, base
    cdef double zbuf[STRIP]
    cdef double ubuf[STRIP]
    cdef double* pl = &piece_l[0] if np_ else NULL
    cdef double* pr = &piece_r[0] if np_ else NULL
    cdef long long* pk = &piece_kind[0] if np_ else NULL
    cdef double* pc = &piece_c[0] if np_ else NULL
    cdef double* pb = &piece_b[0] if np_ else NULL
    cdef double* pe = &piece_e[0] if np_ else NULL
    cdef double* pp = &piece_p[0] if np_ else NULL
    cdef double* ay = &atom_y[0] if na else NULL
    cdef double* ar = &atom_rate[0] if na else NULL
    cdef double* ad = &atom_delta[0] if na else NULL
    with nogil:
        for i in range(n):
            p = pid[i]
            if done[p]:
                continue
            key = keys[i]
            y = Y[i]
            a = A[i]
            alive = True
            j = 0
            while j < nsteps and alive:
                nstrip = nsteps - j
                if nstrip > STRIP:
                    nstrip = STRIP
                base = step0 + <u64> j
                gen_normals(key, base, nstrip, ubuf, zbuf)
                for t in range(nstrip):
                    yprev = y if y > 0.0 else 0.0
                    a = a + rate_at(yprev, np_, pl, pr, pk, pc, pb, pe, pp,
                                    na, ay, ar, ad) * dt
                    y = y + sdt * zbuf[t]
                    if y <= 0.0:
                        out_a[p] = a
                        hit[p] = 1
                        done[p] = 1
                        alive = False
                        break
                    if kill_on and y >= kill_r:
                        killed[p] = 1
                        done[p] = 1
                        alive = False
                        break
                j += nstrip
            Y[i] = y
            A[i] = a


def bessel_advance(u64[::1] keys, long long[::1] pid, u64 step0,
                   Py_ssize_t nsteps, double dt, double drift_dt, double eps,
                   double delta, double occ_thresh,
                   double[::1] Y, double[::1] OCC,
                   double[::1] out_t, cython.uchar[::1] reached,
                   cython.uchar[::1] bad, cython.uchar[::1] done):
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t i, j, t, nstrip
    cdef long long p
    cdef double y, occ, ymax
    cdef double sdt = sqrt(dt)
    cdef bint alive
    cdef u64 key, base
    cdef double zbuf[STRIP]
    cdef double ubuf[STRIP]
    with nogil:
        for i in range(n):
            p = pid[i]
            if done[p]:
                continue
            key = keys[i]
            y = Y[i]
            occ = OCC[i]
            alive = True
            j = 0
            while j < nsteps and alive:
                nstrip = nsteps - j
                if nstrip > STRIP:
                    nstrip = STRIP
                base = step0 + <u64> j
                gen_normals(key, base, nstrip, ubuf, zbuf)
                for t in range(nstrip):
                    ymax = y if y > eps else eps
                    y = fabs(y + sdt * zbuf[t] + drift_dt / ymax)
                    occ = occ + dt * <double> (y < delta)
                    if not isfinite(y):
                        bad[p] = 1
                        done[p] = 1
                        alive = False
                        break
                    if occ > occ_thresh:
                        out_t[p] = (base + <u64> t + 1) * dt
                        reached[p] = 1
                        done[p] = 1
                        alive = False
                        break
                j += nstrip
            Y[i] = y
            OCC[i] = occ


def walk_advance(u64[::1] keys, long long[::1] pid, u64 step0,
                 Py_ssize_t nsteps, long long d,
                 long long[:, ::1] X, long long[::1] Y,
                 long long[:, ::1] out_x, cython.uchar[::1] hit,
                 cython.uchar[::1] done):
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t i, j
    cdef long long p, y, sgn, axis, ax
    cdef u64 r, dd = <u64> (d + 1)
    with nogil:
        for i in range(n):
            p = pid[i]
            if done[p]:
                continue
            y = Y[i]
            for j in range(nsteps):
                r = mix64(mix64(keys[i] ^ ((step0 + <u64> j) * K_CTR)))
                sgn = 1 if (r & 1ULL) else -1
                axis = <long long> ((r >> 1) % dd)
                if axis == d:
                    y += sgn
                    if y == 0:
                        for ax in range(d):
                            out_x[p, ax] = X[i, ax]
                        hit[p] = 1
                        done[p] = 1
                        break
                else:
                    X[i, axis] += sgn
            Y[i] = y


def _bench_gen(Py_ssize_t reps):
    """Micro-benchmark hook for the strip generator (not public API)."""
    cdef double ubuf[STRIP]
    cdef double zbuf[STRIP]
    cdef double s = 0.0
    cdef Py_ssize_t r, t
    with nogil:
        for r in range(reps):
            gen_normals(<u64> 12345, <u64> (r * STRIP), STRIP, ubuf, zbuf)
            for t in range(STRIP):
                s += zbuf[t]
    return s
