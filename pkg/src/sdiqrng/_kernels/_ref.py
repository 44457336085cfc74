"""Pure-Python twin of the compiled kernel core.

Implements exactly the same arithmetic, in the same order, as
``_core.pyx``: penalized objectives for the certificate/output-length
searches, a fixed-parameter Nelder-Mead loop, and the in-place
Walsh-Hadamard butterfly.  Both backends must produce bit-identical
results; keep every formula and loop order in sync with the .pyx file.

Objective kinds and their packed ``data`` layouts (all float64):

KIND_DUAL (theta: nu00 nu01 nu10 nu11 h0a h0b h0r h0i h1a h1b h1r h1i)
    data = [q00, q01, q11, p00, p01, p10, p11, weight]
    q** are the entries of the tilted projector |psi1><psi1|
    (q00 = delta, q01 = sqrt(delta(1-delta)), q11 = 1-delta),
    p** the behavior table p(a|x) flattened a-major.
    value = sum_nu_ax nu*p + weight * sum relu(eigmax K_{a,lam})^2.

KIND_PRIMAL (theta: sre sim la0 lar lai la2 c0)
    data = [q00, q01, q11, t0, t1, weight]; t_x = p(0|x).
    S = A + B is pinned to the behavior exactly: S00 = t0, offdiag
    sre + i*sim free, S11 solved from <psi1|S|psi1> = t1.  A = L L^dag
    is PSD by construction, B = S - A, c1 = 1 - c0.
    value = -(A00 + c1 - B00) + weight * (relu(-eigmin B)^2
            + relu(eigmax A - c0)^2 + relu(eigmax B - c1)^2 + box(c0)).

KIND_LENGTH_XOR / KIND_LENGTH_MUL (theta: beta + the 12 dual params)
    data = [q00, q01, q11, w00, w01, w10, w11, u, pe, pr, weight]
    value = -(sum w_ax * alpha_ax + u*beta) + weight * dual penalty
            + barrier for non-positive log arguments, where
    alpha_ax = 2*log2(arg_ax / pe),
    arg_ax = 1 - pr*s*(4 nu_ax - 1)   (XOR mode)
           = 1 - 4*pr*s*nu_ax         (multi-bit mode),
    s = sqrt(2)^(beta-1).
"""

from math import log2, pow as fpow, sqrt

KIND_DUAL = 1
KIND_PRIMAL = 2
KIND_LENGTH_XOR = 3
KIND_LENGTH_MUL = 4

_ARG_FLOOR = 1e-12
_BARRIER = 1e12


def _dual_penalty(th, off, q00, q01, q11):
    """Sum of squared positive parts of eigmax(K_{a,lam}) over a,lam.

    ``th[off:off+12]`` holds nu (a-major) then H_0, H_1 as
    (diag0, diag1, re offdiag, im offdiag).  Parameters are boxed at
    +/-65536: beyond that the objective gain is negligible while float
    cancellation starts eating the downstream operator identities.
    """
    pen = 0.0
    for i in range(12):
        v = th[off + i]
        if v > 65536.0:
            pen += (v - 65536.0) * (v - 65536.0)
        elif v < -65536.0:
            pen += (v + 65536.0) * (v + 65536.0)
    for a in (0, 1):
        na0 = th[off + 2 * a]
        na1 = th[off + 2 * a + 1]
        for lam in (0, 1):
            hb = off + 4 + 4 * lam
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


def _eval_dual(th, data):
    obj = (
        th[0] * data[3]
        + th[1] * data[4]
        + th[2] * data[5]
        + th[3] * data[6]
    )
    return obj + data[7] * _dual_penalty(th, 0, data[0], data[1], data[2])


def _eval_primal(th, data):
    q00 = data[0]
    q01 = data[1]
    q11 = data[2]
    t0 = data[3]
    t1 = data[4]
    sre, sim, la0, lar, lai, la2, c0 = th
    # A = LA LA^dag for LA = [[la0, 0], [lar + i lai, la2]]
    a00 = la0 * la0
    are = la0 * lar
    aim = -la0 * lai
    a11 = lar * lar + lai * lai + la2 * la2
    # S = A + B carries the behavior data exactly
    s11 = (t1 - q00 * t0 - 2.0 * q01 * sre) / q11
    b00 = t0 - a00
    b11 = s11 - a11
    bre = sre - are
    bim = sim - aim
    c1 = 1.0 - c0
    mid_b = 0.5 * (b00 + b11)
    rad_b = sqrt(0.25 * (b00 - b11) * (b00 - b11) + bre * bre + bim * bim)
    pen = 0.0
    v = -(mid_b - rad_b)  # relu(-eigmin B)
    if v > 0.0:
        pen += v * v
    emax_a = 0.5 * (a00 + a11) + sqrt(
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


def _eval_length(th, data, xor_mode):
    q00 = data[0]
    q01 = data[1]
    q11 = data[2]
    u = data[7]
    pe = data[8]
    pr = data[9]
    weight = data[10]
    beta = th[0]
    if beta > 128.0 or beta < -128.0:
        return _BARRIER * (1.0 + abs(beta) - 128.0)
    s = fpow(2.0, 0.5 * (beta - 1.0))
    f = u * beta
    bar = 0.0
    for z in range(4):
        nuz = th[1 + z]
        if xor_mode:
            arg = 1.0 - pr * s * (4.0 * nuz - 1.0)
        else:
            arg = 1.0 - 4.0 * pr * s * nuz
        if arg < _ARG_FLOOR:
            bar += _BARRIER * (1.0 + (_ARG_FLOOR - arg))
        else:
            f += data[3 + z] * (2.0 * log2(arg / pe))
    pen = _dual_penalty(th, 1, q00, q01, q11)
    return -f + weight * pen + bar


def evaluate(kind, data, theta):
    """Evaluate one penalized objective; used by the optimizers and tests."""
    if kind == KIND_DUAL:
        return _eval_dual(theta, data)
    if kind == KIND_PRIMAL:
        return _eval_primal(theta, data)
    if kind == KIND_LENGTH_XOR:
        return _eval_length(theta, data, True)
    if kind == KIND_LENGTH_MUL:
        return _eval_length(theta, data, False)
    raise ValueError(f"unknown objective kind {kind}")


def minimize(kind, data, x0, max_iter, ftol, xtol, step=0.05):
    """Nelder-Mead with fixed coefficients (1, 2, 0.5, 0.5).

    Initial simplex: vertex i offsets coordinate i by step*x0[i] (or by
    step/200 if the coordinate is zero); small steps give local
    refinement, the 0.05 default a global-ish probe.  Terminates when
    both the f-spread and the x-spread of the simplex drop below the
    relative tolerances, or at max_iter.  Returns (x_best, f_best,
    iterations).
    """
    if kind == KIND_DUAL:
        fn = lambda t: _eval_dual(t, data)
    elif kind == KIND_PRIMAL:
        fn = lambda t: _eval_primal(t, data)
    elif kind == KIND_LENGTH_XOR:
        fn = lambda t: _eval_length(t, data, True)
    elif kind == KIND_LENGTH_MUL:
        fn = lambda t: _eval_length(t, data, False)
    else:
        raise ValueError(f"unknown objective kind {kind}")

    n = len(x0)
    sim = [list(map(float, x0))]
    for i in range(n):
        v = list(sim[0])
        if v[i] != 0.0:
            v[i] = (1.0 + step) * v[i]
        else:
            v[i] = step / 200.0
        sim.append(v)
    fsim = [fn(v) for v in sim]

    def order():
        idx = sorted(range(n + 1), key=lambda k: fsim[k])
        sim[:] = [sim[k] for k in idx]
        fsim[:] = [fsim[k] for k in idx]

    order()
    it = 0
    while it < max_iter:
        fspread = fsim[n] - fsim[0]
        xspread = 0.0
        scale0 = 0.0
        for i in range(n):
            c = abs(sim[0][i])
            if c > scale0:
                scale0 = c
            for k in range(1, n + 1):
                d = abs(sim[k][i] - sim[0][i])
                if d > xspread:
                    xspread = d
        if fspread <= ftol * (1.0 + abs(fsim[0])) and xspread <= xtol * (
            1.0 + scale0
        ):
            break
        it += 1
        xbar = [0.0] * n
        for k in range(n):
            row = sim[k]
            for i in range(n):
                xbar[i] += row[i]
        for i in range(n):
            xbar[i] /= n
        worst = sim[n]
        xr = [xbar[i] + (xbar[i] - worst[i]) for i in range(n)]
        fr = fn(xr)
        shrink = False
        if fr < fsim[0]:
            xe = [xbar[i] + 2.0 * (xbar[i] - worst[i]) for i in range(n)]
            fe = fn(xe)
            if fe < fr:
                sim[n] = xe
                fsim[n] = fe
            else:
                sim[n] = xr
                fsim[n] = fr
        elif fr < fsim[n - 1]:
            sim[n] = xr
            fsim[n] = fr
        elif fr < fsim[n]:
            xc = [xbar[i] + 0.5 * (xr[i] - xbar[i]) for i in range(n)]
            fc = fn(xc)
            if fc <= fr:
                sim[n] = xc
                fsim[n] = fc
            else:
                shrink = True
        else:
            xc = [xbar[i] - 0.5 * (xbar[i] - worst[i]) for i in range(n)]
            fc = fn(xc)
            if fc < fsim[n]:
                sim[n] = xc
                fsim[n] = fc
            else:
                shrink = True
        if shrink:
            best = sim[0]
            for k in range(1, n + 1):
                row = sim[k]
                for i in range(n):
                    row[i] = best[i] + 0.5 * (row[i] - best[i])
                fsim[k] = fn(row)
        order()
    return list(sim[0]), fsim[0], it


def wht_inplace(a):
    """In-place Walsh-Hadamard transform of an int64 numpy vector.

    Length must be a power of two; int64 is exact for every table this
    package builds (|entries| <= 2^24 before, <= 2^48 after squaring).
    """
    n = a.shape[0]
    h = 1
    while h < n:
        view = a.reshape(-1, 2, h)
        x0 = view[:, 0, :].copy()
        x1 = view[:, 1, :].copy()
        view[:, 0, :] = x0 + x1
        view[:, 1, :] = x0 - x1
        h *= 2
    return None
