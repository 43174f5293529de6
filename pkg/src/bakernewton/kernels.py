"""Hot loops for log Pi and its first two logarithmic derivatives.

Zeros are a(x) = (x/delta)**beta at integer x >= k_min, beta = (1 + ic)/rho.
For a point w the sum over k of log(1 - w/a_k) is split as

    [k_min, kA)   inner zeros, |a_k| << |w|   exact, or Euler-Maclaurin
    [kA, kB]      the 2M zeros nearest |w|     exact
    (kB, inf)     outer zeros                  Euler-Maclaurin

The Euler-Maclaurin integrals are done by Gauss-Legendre panels graded
away from the complex points where a(x) = w, and by a closed power series
once |w/a| (or |a/w|) drops below 1/kappa.  The same machinery sums
y_k = u_k/(1 - u_k) and y_k**2 (u_k = w/a_k), which give the derivatives

    (log Pi)'  = -(1/w)   sum y_k
    (log Pi)'' = -(1/w^2) sum y_k^2
"""
import math

import numpy as np

from ._jit import jit

N_EM = 6
N_DERIV = 2 * N_EM  # orders 0..11 of d/dt are tabulated
EXACT_INNER = 256
INNER_HEAD = 64
MAX_SERIES = 400
MAX_PANELS = 400

# B_{2j} / (2j)!
_BERN = np.array([1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730])
EM_COEF = np.array([_BERN[j] / math.factorial(2 * j + 2) for j in range(N_EM)])


def stirling1(n_max: int) -> np.ndarray:
    """Signed Stirling numbers of the first kind s(n, k), 0 <= k <= n <= n_max."""
    s = np.zeros((n_max + 1, n_max + 1))
    s[0, 0] = 1.0
    for n in range(n_max):
        for k in range(1, n + 2):
            s[n + 1, k] = s[n, k - 1] - n * s[n, k]
    return s


STIRLING = stirling1(N_DERIV)


def derivative_tables(beta: complex):
    """Coefficients of D_t^i y and D_t^i y^2 as polynomials in y.

    Here t = log x and D_t y = -beta*y*(1 + y).  Row i, column d holds the
    coefficient of y**d.
    """
    deg = N_DERIV + 3
    P = np.zeros((N_DERIV, deg), dtype=np.complex128)
    Q = np.zeros((N_DERIV, deg), dtype=np.complex128)
    P[0, 1] = 1.0
    Q[0, 2] = 1.0
    for tab in (P, Q):
        for i in range(1, N_DERIV):
            for d in range(deg - 1):
                c = -beta * d * tab[i - 1, d]
                tab[i, d] += c
                tab[i, d + 1] += c
    return P, Q


@jit
def clog1p(z):
    """log(1 + z) without cancellation for small |z| or for 1 + z near 0."""
    x = z.real
    y = z.imag
    if x < -0.5:
        re = math.log(math.hypot(1.0 + x, y))
    else:
        re = 0.5 * math.log1p(x * (2.0 + x) + y * y)
    return complex(re, math.atan2(y, 1.0 + x))


@jit
def _y_of(E):
    """u/(1-u) for u = exp(E), stable on both sides of |u| = 1."""
    if E.real > 0.0:
        v = np.exp(-E)
        d = v - 1.0
        if d == 0:
            return complex(math.inf, 0.0)
        return 1.0 / d
    u = np.exp(E)
    d = 1.0 - u
    if d == 0:
        return complex(math.inf, 0.0)
    return u / d


@jit
def _log_term(E):
    """log(1 - u) for u = exp(E), modulo 2 pi i."""
    if E.real > 0.0:
        return E + clog1p(-np.exp(-E)) + 1j * math.pi
    return clog1p(-np.exp(E))


@jit
def _exact(lw, beta, ldelta, k_lo, k_hi):
    sl = 0j
    comp = 0j
    s1 = 0j
    s2 = 0j
    for k in range(k_lo, k_hi + 1):
        E = lw - beta * (math.log(k) - ldelta)
        t = _log_term(E) - comp
        nxt = sl + t
        comp = (nxt - sl) - t
        sl = nxt
        y = _y_of(E)
        s1 += y
        s2 += y * y
    return sl, s1, s2


@jit
def _polyval(row, y):
    acc = 0j
    for d in range(row.shape[0] - 1, -1, -1):
        acc = acc * y + row[d]
    return acc


@jit
def _x_derivs(x, lw, beta, ldelta, P, Q, S, inner):
    """Odd x-derivatives (orders 1, 3, ..., 11) of the three summands at x."""
    y = _y_of(lw - beta * (math.log(x) - ldelta))
    TG = np.empty(N_DERIV, dtype=np.complex128)
    TY = np.empty(N_DERIV, dtype=np.complex128)
    TQ = np.empty(N_DERIV, dtype=np.complex128)
    for i in range(1, N_DERIV):
        TG[i] = beta * _polyval(P[i - 1], y)
        TY[i] = _polyval(P[i], y)
        TQ[i] = _polyval(Q[i], y)
    if inner:
        TG[1] += beta
    out = np.zeros((3, N_EM), dtype=np.complex128)
    for j in range(N_EM):
        m = 2 * j + 1
        scale = x ** (-m)
        for i in range(1, m + 1):
            out[0, j] += S[m, i] * TG[i]
            out[1, j] += S[m, i] * TY[i]
            out[2, j] += S[m, i] * TQ[i]
        for f in range(3):
            out[f, j] *= scale
    return out


@jit
def _sing_dist(x, xs):
    d = abs(x - xs[0])
    for i in range(1, xs.shape[0]):
        di = abs(x - xs[i])
        if di < d:
            d = di
    return d


@jit
def _panel_sum(a, b, lw, beta, ldelta, xg, wg, inner):
    h = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    sg = 0j
    sy = 0j
    sq = 0j
    for i in range(xg.shape[0]):
        x = mid + h * xg[i]
        E = lw - beta * (math.log(x) - ldelta)
        if inner:
            g = clog1p(-np.exp(-E))
        else:
            g = clog1p(-np.exp(E))
        y = _y_of(E)
        sg += wg[i] * g
        sy += wg[i] * y
        sq += wg[i] * y * y
    return sg * h, sy * h, sq * h


@jit
def _quad_right(a, b, lw, beta, ldelta, xg, wg, xs):
    """Integrate the outer summands over [a, b], panels growing to the right."""
    sg = 0j
    sy = 0j
    sq = 0j
    x = a
    n = 0
    while x < b and n < MAX_PANELS:
        step = max(_sing_dist(x, xs), 1.0)
        nxt = min(b, x + step)
        if b - nxt < 0.25 * step:
            nxt = b
        g, y, q = _panel_sum(x, nxt, lw, beta, ldelta, xg, wg, False)
        sg += g
        sy += y
        sq += q
        x = nxt
        n += 1
    return sg, sy, sq


@jit
def _quad_left(a, b, lw, beta, ldelta, xg, wg, xs):
    """Integrate the inner summands over [a, b], panels growing to the left."""
    sg = 0j
    sy = 0j
    sq = 0j
    x = b
    n = 0
    while x > a and n < MAX_PANELS:
        step = max(_sing_dist(x, xs), 1.0)
        nxt = max(a, x - step)
        if nxt - a < 0.25 * step:
            nxt = a
        g, y, q = _panel_sum(nxt, x, lw, beta, ldelta, xg, wg, True)
        sg += g
        sy += y
        sq += q
        x = nxt
        n += 1
    return sg, sy, sq


@jit
def _series_right(X, lw, beta, ldelta):
    """Integrals over [X, inf) of log(1-u), y and y^2 by the power series in u."""
    lU = lw - beta * (math.log(X) - ldelta)
    aU = math.exp(lU.real)
    sg = 0j
    sy = 0j
    sq = 0j
    m = 1
    mag = 1.0
    while m <= MAX_SERIES and mag > 1e-19:
        t = np.exp(m * lU) * X / (m * beta - 1.0)
        sg -= t / m
        sy += t
        sq += (m - 1) * t
        m += 1
        mag *= aU
    return sg, sy, sq


@jit
def _series_left(k0, X, lw, beta, ldelta):
    """Integrals over [k0, X] of log(1-v), y and y^2 by the power series in v = 1/u."""
    lV = -(lw - beta * (math.log(X) - ldelta))
    aV = math.exp(lV.real)
    lr = math.log(k0 / X)
    sg = 0j
    sy = -(X - k0) + 0j
    sq = (X - k0) + 0j
    m = 1
    mag = 1.0
    while m <= MAX_SERIES and mag > 1e-19:
        e = m * beta + 1.0
        t = np.exp(m * lV) * X * (1.0 - np.exp(e * lr)) / e
        sg -= t / m
        sy -= t
        sq += (m + 1) * t
        m += 1
        mag *= aV
    return sg, sy, sq


@jit
def log_pi_point(w, beta, delta, kmin, rho, M, kappa, xg, wg, P, Q, S, direct_k):
    """(log Pi(w), sum y, sum y^2, error estimate) at a nonzero w.

    direct_k > 0 sums every zero up to index direct_k exactly and only
    treats the tail beyond it analytically.
    """
    ldelta = math.log(delta)
    lw = np.log(w)
    absw = abs(w)
    xm = delta * absw ** rho
    err = 0.0
    total_l = 0j
    total_y = 0j
    total_q = 0j

    # complex points where a(x) = w, on the three nearest sheets
    m0 = round((beta.imag * rho * math.log(absw) - lw.imag) / (2 * math.pi))
    xs = np.empty(3, dtype=np.complex128)
    for i in range(3):
        xs[i] = delta * np.exp((lw + 2j * math.pi * (m0 - 1 + i)) / beta)

    if direct_k > 0:
        l, y, q = _exact(lw, beta, ldelta, kmin, direct_k)
        total_l += l
        total_y += y
        total_q += q
        kS = direct_k + 1
    else:
        kc = int(math.floor(xm))
        kA = max(kmin, kc - M + 1)
        kB = kc + M
        l, y, q = _exact(lw, beta, ldelta, kA, kB)
        total_l += l
        total_y += y
        total_q += q
        kS = kB + 1
        # inner zeros
        if kA - kmin <= EXACT_INNER:
            if kA > kmin:
                l, y, q = _exact(lw, beta, ldelta, kmin, kA - 1)
                total_l += l
                total_y += y
                total_q += q
        else:
            k0 = kmin + INNER_HEAD
            K1 = kA - 1
            l, y, q = _exact(lw, beta, ldelta, kmin, k0 - 1)
            total_l += l
            total_y += y
            total_q += q
            nk = K1 - k0 + 1
            # sum of log(-w/a_k) over [k0, K1], exactly
            lmw = lw + 1j * math.pi
            total_l += nk * (lmw + beta * ldelta) - beta * (math.lgamma(K1 + 1.0) - math.lgamma(k0 * 1.0))
            X_lo = xm * kappa ** (-rho)
            ig = 0j
            iy = 0j
            iq = 0j
            if X_lo > k0:
                g, y, q = _series_left(float(k0), X_lo, lw, beta, ldelta)
                ig += g
                iy += y
                iq += q
                g, y, q = _quad_left(X_lo, float(K1), lw, beta, ldelta, xg, wg, xs)
            else:
                g, y, q = _quad_left(float(k0), float(K1), lw, beta, ldelta, xg, wg, xs)
            ig += g
            iy += y
            iq += q
            # endpoint values and corrections
            for xe, sgn in ((float(k0), -1.0), (float(K1), 1.0)):
                E = lw - beta * (math.log(xe) - ldelta)
                ye = _y_of(E)
                ig += 0.5 * clog1p(-np.exp(-E))
                iy += 0.5 * ye
                iq += 0.5 * ye * ye
                D = _x_derivs(xe, lw, beta, ldelta, P, Q, S, True)
                for j in range(N_EM):
                    ig += sgn * EM_COEF[j] * D[0, j]
                    iy += sgn * EM_COEF[j] * D[1, j]
                    iq += sgn * EM_COEF[j] * D[2, j]
                    if j == N_EM - 1:
                        err += abs(EM_COEF[j] * D[0, j])
            total_l += ig
            total_y += iy
            total_q += iq

    # outer zeros k >= kS
    X_hi = xm * kappa ** rho
    og = 0j
    oy = 0j
    oq = 0j
    xS = float(kS)
    if X_hi > xS + 1.0:
        g, y, q = _quad_right(xS, X_hi, lw, beta, ldelta, xg, wg, xs)
        og += g
        oy += y
        oq += q
        g, y, q = _series_right(X_hi, lw, beta, ldelta)
    else:
        g, y, q = _series_right(xS, lw, beta, ldelta)
    og += g
    oy += y
    oq += q
    E = lw - beta * (math.log(xS) - ldelta)
    ye = _y_of(E)
    og += 0.5 * clog1p(-np.exp(E))
    oy += 0.5 * ye
    oq += 0.5 * ye * ye
    D = _x_derivs(xS, lw, beta, ldelta, P, Q, S, False)
    for j in range(N_EM):
        og -= EM_COEF[j] * D[0, j]
        oy -= EM_COEF[j] * D[1, j]
        oq -= EM_COEF[j] * D[2, j]
        if j == N_EM - 1:
            err += abs(EM_COEF[j] * D[0, j])
    total_l += og
    total_y += oy
    total_q += oq
    err += 1e-15 * (abs(total_l) + xm)
    return total_l, total_y, total_q, err


@jit
def log_pi_many(ws, beta, delta, kmin, rho, M, kappa, xg, wg, P, Q, S, direct_k):
    n = ws.shape[0]
    out = np.empty((n, 3), dtype=np.complex128)
    err = np.empty(n)
    for i in range(n):
        if ws[i] == 0:
            out[i, 0] = 0j
            out[i, 1] = 0j
            out[i, 2] = 0j
            err[i] = 0.0
            continue
        l, y, q, e = log_pi_point(ws[i], beta, delta, kmin, rho, M, kappa, xg, wg, P, Q, S, direct_k)
        out[i, 0] = l
        out[i, 1] = y
        out[i, 2] = q
        err[i] = e
    return out, err


@jit
def truncated_sum(w, beta, delta, kmin, K):
    """Plain partial sum of log(1 - w/a_k) for k_min <= k <= K."""
    l, y, q = _exact(np.log(w), beta, math.log(delta), kmin, K)
    return l
