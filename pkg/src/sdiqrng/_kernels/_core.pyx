# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core.

Twin of ``_ref.py``: identical objectives, identical Nelder-Mead loop,
identical Walsh-Hadamard butterfly.  Any change here must be mirrored
there (and vice versa); the test suite asserts bit-identical outputs.
Compiled with -ffp-contract=off so double arithmetic matches CPython.
"""

from libc.math cimport fabs, log2, pow, sqrt


KIND_DUAL = 1
KIND_PRIMAL = 2
KIND_LENGTH_XOR = 3
KIND_LENGTH_MUL = 4

cdef double ARG_FLOOR = 1e-12
cdef double BARRIER = 1e12


cdef double _dual_penalty(double* th, double q00, double q01, double q11) nogil:
    # th points at [nu00, nu01, nu10, nu11, h0a, h0b, h0r, h0i, h1a, h1b, h1r, h1i]
    cdef double pen = 0.0
    cdef double na0, na1, h00, h11, hre, him, half_tr, dterm
    cdef double k00, k11, kre, kim, emax, v
    cdef int a, lam, hb, i
    for i in range(12):
        v = th[i]
        if v > 65536.0:
            pen += (v - 65536.0) * (v - 65536.0)
        elif v < -65536.0:
            pen += (v + 65536.0) * (v + 65536.0)
    for a in range(2):
        na0 = th[2 * a]
        na1 = th[2 * a + 1]
        for lam in range(2):
            hb = 4 + 4 * lam
            h00 = th[hb]
            h11 = th[hb + 1]
            hre = th[hb + 2]
            him = th[hb + 3]
            half_tr = 0.5 * (h00 + h11)
            dterm = 1.0 if a == lam else 0.0
            k00 = dterm - na0 - na1 * q00 + h00 - half_tr
            k11 = -na1 * q11 + h11 - half_tr
            kre = -na1 * q01 + hre
            kim = him
            emax = 0.5 * (k00 + k11) + sqrt(
                0.25 * (k00 - k11) * (k00 - k11) + kre * kre + kim * kim
            )
            if emax > 0.0:
                pen += emax * emax
    return pen


cdef double _eval_dual(double* th, double* data) nogil:
    cdef double obj = (
        th[0] * data[3]
        + th[1] * data[4]
        + th[2] * data[5]
        + th[3] * data[6]
    )
    return obj + data[7] * _dual_penalty(th, data[0], data[1], data[2])


cdef double _eval_primal(double* th, double* data) nogil:
    cdef double q00 = data[0]
    cdef double q01 = data[1]
    cdef double q11 = data[2]
    cdef double t0 = data[3]
    cdef double t1 = data[4]
    cdef double sre = th[0], sim = th[1]
    cdef double la0 = th[2], lar = th[3], lai = th[4], la2 = th[5]
    cdef double c0 = th[6]
    cdef double a00 = la0 * la0
    cdef double are = la0 * lar
    cdef double aim = -la0 * lai
    cdef double a11 = lar * lar + lai * lai + la2 * la2
    cdef double s11 = (t1 - q00 * t0 - 2.0 * q01 * sre) / q11
    cdef double b00 = t0 - a00
    cdef double b11 = s11 - a11
    cdef double bre = sre - are
    cdef double bim = sim - aim
    cdef double c1 = 1.0 - c0
    cdef double mid_b = 0.5 * (b00 + b11)
    cdef double rad_b = sqrt(
        0.25 * (b00 - b11) * (b00 - b11) + bre * bre + bim * bim
    )
    cdef double pen = 0.0
    cdef double v = -(mid_b - rad_b)
    if v > 0.0:
        pen += v * v
    cdef double emax_a = 0.5 * (a00 + a11) + sqrt(
        0.25 * (a00 - a11) * (a00 - a11) + are * are + aim * aim
    )
    v = emax_a - c0
    if v > 0.0:
        pen += v * v
    v = (mid_b + rad_b) - c1
    if v > 0.0:
        pen += v * v
    if c0 < 0.0:
        pen += c0 * c0
    elif c0 > 1.0:
        pen += (c0 - 1.0) * (c0 - 1.0)
    return -(a00 + c1 - b00) + data[5] * pen


cdef double _eval_length(double* th, double* data, bint xor_mode) nogil:
    cdef double q00 = data[0]
    cdef double q01 = data[1]
    cdef double q11 = data[2]
    cdef double u = data[7]
    cdef double pe = data[8]
    cdef double pr = data[9]
    cdef double weight = data[10]
    cdef double beta = th[0]
    if beta > 128.0 or beta < -128.0:
        return BARRIER * (1.0 + fabs(beta) - 128.0)
    cdef double s = pow(2.0, 0.5 * (beta - 1.0))
    cdef double f = u * beta
    cdef double bar = 0.0
    cdef double nuz, arg
    cdef int z
    for z in range(4):
        nuz = th[1 + z]
        if xor_mode:
            arg = 1.0 - pr * s * (4.0 * nuz - 1.0)
        else:
            arg = 1.0 - 4.0 * pr * s * nuz
        if arg < ARG_FLOOR:
            bar += BARRIER * (1.0 + (ARG_FLOOR - arg))
        else:
            f += data[3 + z] * (2.0 * log2(arg / pe))
    cdef double pen = _dual_penalty(th + 1, q00, q01, q11)
    return -f + weight * pen + bar


cdef double _eval(int kind, double* th, double* data) nogil:
    if kind == 1:
        return _eval_dual(th, data)
    elif kind == 2:
        return _eval_primal(th, data)
    elif kind == 3:
        return _eval_length(th, data, True)
    else:
        return _eval_length(th, data, False)


def evaluate(int kind, data, theta):
    """Evaluate one penalized objective; mirrors ``_ref.evaluate``."""
    cdef double d[32]
    cdef double t[16]
    cdef int i
    if kind < 1 or kind > 4:
        raise ValueError(f"unknown objective kind {kind}")
    if len(data) > 32 or len(theta) > 16:
        raise ValueError("argument vector too long")
    for i in range(len(data)):
        d[i] = data[i]
    for i in range(len(theta)):
        t[i] = theta[i]
    return _eval(kind, t, d)


def minimize(int kind, data, x0, int max_iter, double ftol, double xtol, double step=0.05):
    """Nelder-Mead, mirroring ``_ref.minimize`` operation for operation."""
    cdef double d[32]
    cdef double sim[17][16]
    cdef double fsim[17]
    cdef double tmp[16]
    cdef double xbar[16]
    cdef double xr[16]
    cdef double xe[16]
    cdef double xc[16]
    cdef int n = len(x0)
    cdef int i, k, j, it
    cdef double fr, fe, fc, keyf
    cdef double fspread, xspread, scale0, c, dd
    cdef bint shrink

    if kind < 1 or kind > 4:
        raise ValueError(f"unknown objective kind {kind}")
    if n > 16 or len(data) > 32:
        raise ValueError("problem dimension too large")
    for i in range(len(data)):
        d[i] = data[i]
    for i in range(n):
        sim[0][i] = x0[i]
    for k in range(n):
        for i in range(n):
            sim[k + 1][i] = sim[0][i]
        if sim[k + 1][k] != 0.0:
            sim[k + 1][k] = (1.0 + step) * sim[k + 1][k]
        else:
            sim[k + 1][k] = step / 200.0
    for k in range(n + 1):
        fsim[k] = _eval(kind, sim[k], d)

    # stable insertion sort of the simplex by objective value
    for k in range(1, n + 1):
        keyf = fsim[k]
        for i in range(n):
            tmp[i] = sim[k][i]
        j = k - 1
        while j >= 0 and fsim[j] > keyf:
            fsim[j + 1] = fsim[j]
            for i in range(n):
                sim[j + 1][i] = sim[j][i]
            j -= 1
        fsim[j + 1] = keyf
        for i in range(n):
            sim[j + 1][i] = tmp[i]

    it = 0
    while it < max_iter:
        fspread = fsim[n] - fsim[0]
        xspread = 0.0
        scale0 = 0.0
        for i in range(n):
            c = fabs(sim[0][i])
            if c > scale0:
                scale0 = c
            for k in range(1, n + 1):
                dd = fabs(sim[k][i] - sim[0][i])
                if dd > xspread:
                    xspread = dd
        if fspread <= ftol * (1.0 + fabs(fsim[0])) and xspread <= xtol * (
            1.0 + scale0
        ):
            break
        it += 1
        for i in range(n):
            xbar[i] = 0.0
        for k in range(n):
            for i in range(n):
                xbar[i] += sim[k][i]
        for i in range(n):
            xbar[i] /= n
        for i in range(n):
            xr[i] = xbar[i] + (xbar[i] - sim[n][i])
        fr = _eval(kind, xr, d)
        shrink = False
        if fr < fsim[0]:
            for i in range(n):
                xe[i] = xbar[i] + 2.0 * (xbar[i] - sim[n][i])
            fe = _eval(kind, xe, d)
            if fe < fr:
                for i in range(n):
                    sim[n][i] = xe[i]
                fsim[n] = fe
            else:
                for i in range(n):
                    sim[n][i] = xr[i]
                fsim[n] = fr
        elif fr < fsim[n - 1]:
            for i in range(n):
                sim[n][i] = xr[i]
            fsim[n] = fr
        elif fr < fsim[n]:
            for i in range(n):
                xc[i] = xbar[i] + 0.5 * (xr[i] - xbar[i])
            fc = _eval(kind, xc, d)
            if fc <= fr:
                for i in range(n):
                    sim[n][i] = xc[i]
                fsim[n] = fc
            else:
                shrink = True
        else:
            for i in range(n):
                xc[i] = xbar[i] - 0.5 * (xbar[i] - sim[n][i])
            fc = _eval(kind, xc, d)
            if fc < fsim[n]:
                for i in range(n):
                    sim[n][i] = xc[i]
                fsim[n] = fc
            else:
                shrink = True
        if shrink:
            for k in range(1, n + 1):
                for i in range(n):
                    sim[k][i] = sim[0][i] + 0.5 * (sim[k][i] - sim[0][i])
                fsim[k] = _eval(kind, sim[k], d)
        # stable insertion sort again
        for k in range(1, n + 1):
            keyf = fsim[k]
            for i in range(n):
                tmp[i] = sim[k][i]
            j = k - 1
            while j >= 0 and fsim[j] > keyf:
                fsim[j + 1] = fsim[j]
                for i in range(n):
                    sim[j + 1][i] = sim[j][i]
                j -= 1
            fsim[j + 1] = keyf
            for i in range(n):
                sim[j + 1][i] = tmp[i]

    out = [0.0] * n
    for i in range(n):
        out[i] = sim[0][i]
    return out, fsim[0], it


def wht_inplace(long long[::1] a):
    """In-place Walsh-Hadamard transform; mirrors ``_ref.wht_inplace``."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t h = 1
    cdef Py_ssize_t i, j
    cdef long long x0, x1
    while h < n:
        i = 0
        while i < n:
            for j in range(i, i + h):
                x0 = a[j]
                x1 = a[j + h]
                a[j] = x0 + x1
                a[j + h] = x0 - x1
            i += 2 * h
        h *= 2
    return None
