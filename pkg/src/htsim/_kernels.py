"""Hot loops, written once and compiled by numba when it is enabled.

Everything here works on plain floats and numpy arrays so the same source runs
under ``numba.njit`` and as ordinary Python.
"""

import math

import numpy as np

from ._jit import njit

# state layout
XO, VO, XA, XF, VF, XV = 0, 1, 2, 3, 4, 5

# packed parameter vector
P_KP, P_BP, P_KF, P_BF, P_MF, P_MO, P_BO, P_KA, P_KO1, P_KO2, P_X0, P_NORMAL = range(12)
# packed gain vector
G_KPO, G_KDO, G_KFO, G_KPF, G_KFF, G_KHAT, G_BHAT, G_FSAT, G_DMAX, G_DERR, G_TAU = range(11)

LAW_PP, LAW_FP, LAW_MESH = 0, 1, 2

# trajectory columns
C_T, C_XSTAR, C_XO, C_VO, C_FH, C_XV, C_XF, C_VF, C_FF = range(9)


# ---------------------------------------------------------------- scalar laws

@njit
def contact_force(x, v, k_p, b_p, x0, normal):
    if (x - x0) * normal < 0.0:
        return -(k_p * (x - x0) + b_p * v)
    return 0.0


@njit
def saturate(f, f_sat):
    if f > f_sat:
        return f_sat
    if f < -f_sat:
        return -f_sat
    return f


@njit
def deadband(e, width):
    a = abs(e) - width
    if a <= 0.0:
        return 0.0
    return a if e > 0.0 else -a


@njit
def haptic_law(law, x_o, v_o, x_f_d, v_f_d, f_ref, k_po, k_do, k_fo,
               k_hat, b_hat, x0, normal, f_sat):
    if law == LAW_PP:
        f = k_po * (x_f_d - x_o) + k_do * (v_f_d - v_o)
    elif law == LAW_FP:
        f = k_fo * f_ref - k_do * v_o
    else:
        if (x_o - x0) * normal < 0.0:
            f = -k_hat * (x_o - x0) - b_hat * v_o
        else:
            f = -b_hat * v_o
    return saturate(f, f_sat)


@njit
def tool_rate_law(x_o_d, v_o_d, f_h_d, x_f, f_f, k_pf, k_ff, d_err):
    return v_o_d + k_pf * deadband(x_o_d - x_f, d_err) + k_ff * (f_f - f_h_d)


@njit
def interp_read(hist, col, r, newest):
    """Value of ``hist[:, col]`` at fractional sample position ``r``."""
    if r <= 0.0:
        return hist[0, col]
    i = int(math.floor(r))
    if i >= newest:
        return hist[newest, col]
    frac = r - i
    if frac == 0.0:
        return hist[i, col]
    return hist[i, col] + frac * (hist[i + 1, col] - hist[i, col])


# ---------------------------------------------------------- closed-loop model

@njit
def _loop_deriv(y, xstar, par, gain, law, x_f_d, v_f_d, f_ref,
                x_o_d, v_o_d, f_h_d, out):
    f_f = contact_force(y[XF], y[VF], par[P_KP], par[P_BP], par[P_X0], par[P_NORMAL])
    f_h = haptic_law(law, y[XO], y[VO], x_f_d, v_f_d, f_ref, gain[G_KPO], gain[G_KDO],
                     gain[G_KFO], gain[G_KHAT], gain[G_BHAT], par[P_X0], par[P_NORMAL],
                     gain[G_FSAT])
    rate = tool_rate_law(x_o_d, v_o_d, f_h_d, y[XF], f_f, gain[G_KPF], gain[G_KFF],
                         gain[G_DERR])
    out[XO] = y[VO]
    out[VO] = (-par[P_KO1] * y[XO] - (par[P_BO] + par[P_KO2]) * y[VO]
               + par[P_KA] * y[XA] + f_h) / par[P_MO]
    out[XA] = xstar - y[XO]
    out[XF] = y[VF]
    out[VF] = (par[P_KF] * (y[XV] - y[XF]) + par[P_BF] * (rate - y[VF])) / par[P_MF]
    out[XV] = rate


@njit
def simulate_loop(x0_state, xstar_half, dt, par, gain, law, read_o, read_f,
                  bypass, limit):
    """Integrate the delayed operator/follower loop.

    ``xstar_half`` holds the operator target at every half step.  ``read_o`` and
    ``read_f`` give, per step, the fractional history position read from the
    operator->follower and follower->operator channels.  Returns the trajectory
    table, the number of valid rows, and a divergence flag.
    """
    n = (xstar_half.shape[0] - 1) // 2
    out = np.full((n + 1, 9), np.nan)
    hist_o = np.zeros((n + 1, 3))
    hist_f = np.zeros((n + 1, 3))
    y = x0_state.copy()
    k1 = np.empty(6)
    k2 = np.empty(6)
    k3 = np.empty(6)
    k4 = np.empty(6)
    tmp = np.empty(6)
    tau = gain[G_TAU]
    alpha = dt / (tau + dt) if tau > 0.0 else 1.0
    lp = 0.0
    d_max = gain[G_DMAX]
    diverged = False
    last = n
    for k in range(n + 1):
        f_f = contact_force(y[XF], y[VF], par[P_KP], par[P_BP], par[P_X0], par[P_NORMAL])
        hist_f[k, 0] = y[XF]
        hist_f[k, 1] = y[VF]
        hist_f[k, 2] = f_f
        if bypass:
            x_f_d = y[XF]
            v_f_d = y[VF]
            f_f_d = f_f
        else:
            x_f_d = interp_read(hist_f, 0, read_f[k], k)
            v_f_d = interp_read(hist_f, 1, read_f[k], k)
            f_f_d = interp_read(hist_f, 2, read_f[k], k)
        if k == 0:
            lp = f_f_d
        else:
            lp += alpha * (f_f_d - lp)
        f_ref = lp if tau > 0.0 else f_f_d
        f_h = haptic_law(law, y[XO], y[VO], x_f_d, v_f_d, f_ref, gain[G_KPO], gain[G_KDO],
                         gain[G_KFO], gain[G_KHAT], gain[G_BHAT], par[P_X0],
                         par[P_NORMAL], gain[G_FSAT])
        hist_o[k, 0] = y[XO]
        hist_o[k, 1] = y[VO]
        hist_o[k, 2] = f_h
        if bypass:
            x_o_d = y[XO]
            v_o_d = y[VO]
            f_h_d = f_h
        else:
            x_o_d = interp_read(hist_o, 0, read_o[k], k)
            v_o_d = interp_read(hist_o, 1, read_o[k], k)
            f_h_d = interp_read(hist_o, 2, read_o[k], k)
        if d_max > 0.0:
            if y[XV] > x_o_d + d_max:
                y[XV] = x_o_d + d_max
            elif y[XV] < x_o_d - d_max:
                y[XV] = x_o_d - d_max
        out[k, C_T] = k * dt
        out[k, C_XSTAR] = xstar_half[2 * k]
        out[k, C_XO] = y[XO]
        out[k, C_VO] = y[VO]
        out[k, C_FH] = f_h
        out[k, C_XV] = y[XV]
        out[k, C_XF] = y[XF]
        out[k, C_VF] = y[VF]
        out[k, C_FF] = f_f
        if k == n:
            break
        # RK4 with network samples held over the step
        _loop_deriv(y, xstar_half[2 * k], par, gain, law, x_f_d, v_f_d, f_ref,
                    x_o_d, v_o_d, f_h_d, k1)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        _loop_deriv(tmp, xstar_half[2 * k + 1], par, gain, law, x_f_d, v_f_d, f_ref,
                    x_o_d, v_o_d, f_h_d, k2)
        for i in range(6):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        _loop_deriv(tmp, xstar_half[2 * k + 1], par, gain, law, x_f_d, v_f_d, f_ref,
                    x_o_d, v_o_d, f_h_d, k3)
        for i in range(6):
            tmp[i] = y[i] + dt * k3[i]
        _loop_deriv(tmp, xstar_half[2 * k + 2], par, gain, law, x_f_d, v_f_d, f_ref,
                    x_o_d, v_o_d, f_h_d, k4)
        bad = False
        for i in range(6):
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not math.isfinite(y[i]):
                bad = True
        if bad or abs(y[XO]) > limit or abs(y[XF]) > limit or abs(y[XV]) > limit:
            diverged = True
            last = k
            break
    return out, last + 1, diverged


# ------------------------------------------------------ open-loop submodels

@njit
def simulate_follower(xv, dt, k_f, b_f, m_f, x_f0, v_f0):
    """Follower position driven by a sampled virtual-tool trajectory.

    Uses the observer-canonical realization so the input derivative is never
    needed: q1 = x_f, q2 = v_f - (b/m) x_v.
    """
    n = xv.shape[0]
    out = np.empty(n)
    c = b_f / m_f
    q1 = x_f0
    q2 = v_f0 - c * xv[0]
    out[0] = q1
    for i in range(n - 1):
        u0 = xv[i]
        u1 = xv[i + 1]
        um = 0.5 * (u0 + u1)
        a1 = q2 + c * u0
        a2 = (k_f * (u0 - q1) - b_f * a1) / m_f
        p1 = q1 + 0.5 * dt * a1
        p2 = q2 + 0.5 * dt * a2
        b1 = p2 + c * um
        b2 = (k_f * (um - p1) - b_f * b1) / m_f
        p1 = q1 + 0.5 * dt * b1
        p2 = q2 + 0.5 * dt * b2
        c1 = p2 + c * um
        c2 = (k_f * (um - p1) - b_f * c1) / m_f
        p1 = q1 + dt * c1
        p2 = q2 + dt * c2
        d1 = p2 + c * u1
        d2 = (k_f * (u1 - p1) - b_f * d1) / m_f
        q1 += dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        q2 += dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        out[i + 1] = q1
    return out


@njit
def _op_rhs(x, v, a, xs, fh, m_o, b_o, k_a, k_o1, k_o2):
    return v, (-k_o1 * x - (b_o + k_o2) * v + k_a * a + fh) / m_o, xs - x


@njit
def simulate_operator(xstar, fh, dt, m_o, b_o, k_a, k_o1, k_o2, x0, v0, a0):
    """Operator position driven by sampled target and haptic force."""
    n = xstar.shape[0]
    out = np.empty(n)
    x = x0
    v = v0
    a = a0
    out[0] = x
    for i in range(n - 1):
        s0 = xstar[i]
        s1 = xstar[i + 1]
        sm = 0.5 * (s0 + s1)
        f0 = fh[i]
        f1 = fh[i + 1]
        fm = 0.5 * (f0 + f1)
        dx1, dv1, da1 = _op_rhs(x, v, a, s0, f0, m_o, b_o, k_a, k_o1, k_o2)
        dx2, dv2, da2 = _op_rhs(x + 0.5 * dt * dx1, v + 0.5 * dt * dv1, a + 0.5 * dt * da1,
                                sm, fm, m_o, b_o, k_a, k_o1, k_o2)
        dx3, dv3, da3 = _op_rhs(x + 0.5 * dt * dx2, v + 0.5 * dt * dv2, a + 0.5 * dt * da2,
                                sm, fm, m_o, b_o, k_a, k_o1, k_o2)
        dx4, dv4, da4 = _op_rhs(x + dt * dx3, v + dt * dv3, a + dt * da3,
                                s1, f1, m_o, b_o, k_a, k_o1, k_o2)
        x += dt / 6.0 * (dx1 + 2.0 * dx2 + 2.0 * dx3 + dx4)
        v += dt / 6.0 * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)
        a += dt / 6.0 * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
        out[i + 1] = x
    return out


# ------------------------------------------------------------ correlation

def xcorr_scan(a, b, max_lag):
    """Pearson correlation of ``a[i]`` with ``b[i + k]`` for k in [-L, L].

    Left to numpy: one BLAS dot product per lag beats a compiled loop here.
    """
    n = a.shape[0]
    ca = np.concatenate(([0.0], np.cumsum(a)))
    cb = np.concatenate(([0.0], np.cumsum(b)))
    ca2 = np.concatenate(([0.0], np.cumsum(a * a)))
    cb2 = np.concatenate(([0.0], np.cumsum(b * b)))
    out = np.full(2 * max_lag + 1, -np.inf)
    for j in range(2 * max_lag + 1):
        k = j - max_lag
        a0, b0, m = (0, k, n - k) if k >= 0 else (-k, 0, n + k)
        if m < 2:
            continue
        sab = float(np.dot(a[a0:a0 + m], b[b0:b0 + m]))
        sa = ca[a0 + m] - ca[a0]
        sb = cb[b0 + m] - cb[b0]
        va = (ca2[a0 + m] - ca2[a0]) - sa * sa / m
        vb = (cb2[b0 + m] - cb2[b0]) - sb * sb / m
        if va <= 0.0 or vb <= 0.0:
            continue
        out[j] = (sab - sa * sb / m) / math.sqrt(va * vb)
    return out


# ------------------------------------------------------------ eigenvalues

@njit
def _balance(a, n):
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(1, n + 1):
            r = 0.0
            c = 0.0
            for j in range(1, n + 1):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(1, n + 1):
                        a[i, j] *= g
                    for j in range(1, n + 1):
                        a[j, i] *= f


@njit
def _hessenberg(a, n):
    # Gaussian elimination with pivoting (similarity transform)
    for m in range(2, n):
        x = 0.0
        i = m
        for j in range(m, n + 1):
            if abs(a[j, m - 1]) > abs(x):
                x = a[j, m - 1]
                i = j
        if i != m:
            for j in range(m - 1, n + 1):
                t = a[i, j]
                a[i, j] = a[m, j]
                a[m, j] = t
            for j in range(1, n + 1):
                t = a[j, i]
                a[j, i] = a[j, m]
                a[j, m] = t
        if x != 0.0:
            for i in range(m + 1, n + 1):
                y = a[i, m - 1]
                if y != 0.0:
                    y /= x
                    a[i, m - 1] = y
                    for j in range(m, n + 1):
                        a[i, j] -= y * a[m, j]
                    for j in range(1, n + 1):
                        a[j, m] += y * a[j, i]
    for i in range(3, n + 1):
        for j in range(1, i - 1):
            a[i, j] = 0.0


@njit
def _sign(a, b):
    return abs(a) if b >= 0.0 else -abs(a)


@njit
def _hqr(a, n, wr, wi):
    eps = 2.220446049250313e-16
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    x = 0.0
    y = 0.0
    z = 0.0
    w = 0.0
    p = 0.0
    q = 0.0
    r = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = nn
            while l >= 2:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= eps * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            if l < 1:
                l = 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if its == 60:
                        return False
                    if its == 10 or its == 20 or its == 40:
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    m = nn - 2
                    while True:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                        if u <= eps * v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign(math.sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if l >= nn - 1:
                break
    return True


@njit
def eig_real(m):
    """Eigenvalues of a real square matrix: balance, Hessenberg, Francis QR.

    Returns (real parts, imaginary parts, ok).
    """
    n = m.shape[0]
    a = np.zeros((n + 1, n + 1))
    for i in range(n):
        for j in range(n):
            a[i + 1, j + 1] = m[i, j]
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    _balance(a, n)
    _hessenberg(a, n)
    ok = _hqr(a, n, wr, wi)
    return wr[1:], wi[1:], ok
