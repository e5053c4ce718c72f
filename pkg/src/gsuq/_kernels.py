"""Numba kernels for the sequential-simulation hot loop.

Everything here operates on plain arrays; the public modules own validation,
seeding, and error reporting. The variogram parameter vector `p` is produced
by ``VariogramModel.kernel_params()``:

    p = [kind_code, a1, a2, a3, cos_az, sin_az, sill, nugget]

Kriging systems (at most (max_data + 1) square) are solved by Gaussian
elimination with partial pivoting; an exactly singular system yields NaN
results rather than an exception so callers can attach node context.

Moment-matching tables are indexed (s, y) with a uniform y grid, so the
nested bisections run on pure index arithmetic.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _cov(hx, hy, hz, p):
    u = (p[4] * hx + p[5] * hy) / p[1]
    v = (-p[5] * hx + p[4] * hy) / p[2]
    w = hz / p[3]
    d = np.sqrt(u * u + v * v + w * w)
    if d <= 0.0:
        return p[6] + p[7]
    kind = int(p[0])
    if kind == 0:
        if d >= 1.0:
            return 0.0
        return p[6] * (1.0 - 1.5 * d + 0.5 * d * d * d)
    elif kind == 1:
        return p[6] * np.exp(-3.0 * d)
    return p[6] * np.exp(-3.0 * d * d)


@njit(cache=True, inline="always")
def _solve_pp(A, b):
    """In-place Gaussian elimination with partial pivoting; solution in b.

    Returns False when a pivot is exactly zero (singular system).
    """
    n = A.shape[0]
    for col in range(n):
        piv = col
        best = abs(A[col, col])
        for r in range(col + 1, n):
            mag = abs(A[r, col])
            if mag > best:
                best = mag
                piv = r
        if best == 0.0:
            return False
        if piv != col:
            for c in range(n):
                tmp = A[col, c]
                A[col, c] = A[piv, c]
                A[piv, c] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        inv = 1.0 / A[col, col]
        for r in range(col + 1, n):
            f = A[r, col] * inv
            if f != 0.0:
                for c in range(col + 1, n):
                    A[r, c] -= f * A[col, c]
                b[r] -= f * b[col]
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc -= A[r, c] * b[c]
        b[r] = acc / A[r, r]
    return True


@njit(cache=True)
def krige_at(tx, tyy, tz, pos, vals, n, gm, use_sec, sec_val, sec_mean, cc, p):
    """Simple kriging, optionally augmented with one collocated secondary.

    The secondary shares the primary variance scale (Markov model 1 with
    C2(0) = C1(0)); its cross-covariance to a datum at lag h is cc * C1(h).
    Returns (mean, variance); both NaN when the system is singular.
    """
    c0 = p[6] + p[7]
    m = n + 1 if use_sec else n
    if m == 0:
        return gm, c0
    A = np.empty((m, m))
    b = np.empty(m)
    rhs = np.empty(m)
    for a in range(n):
        A[a, a] = c0
        for c in range(a + 1, n):
            cv = _cov(pos[a, 0] - pos[c, 0], pos[a, 1] - pos[c, 1], pos[a, 2] - pos[c, 2], p)
            A[a, c] = cv
            A[c, a] = cv
        b[a] = _cov(pos[a, 0] - tx, pos[a, 1] - tyy, pos[a, 2] - tz, p)
    if use_sec:
        A[n, n] = c0
        for a in range(n):
            cross = cc * b[a]
            A[a, n] = cross
            A[n, a] = cross
        b[n] = cc * c0
    for a in range(m):
        rhs[a] = b[a]
    if not _solve_pp(A, rhs):
        return np.nan, np.nan
    est = gm
    var = c0
    for a in range(n):
        est += rhs[a] * (vals[a] - gm)
        var -= rhs[a] * b[a]
    if use_sec:
        est += rhs[n] * (sec_val - sec_mean)
        var -= rhs[n] * b[n]
    return est, var


@njit(cache=True, inline="always")
def _row_val(row0, row1, fs, t):
    """Bilinear table read at fractional y index t between two s rows."""
    ny = row0.shape[0]
    if t <= 0.0:
        iy, fy = 0, 0.0
    elif t >= ny - 1:
        iy, fy = ny - 2, 1.0
    else:
        iy = int(t)
        fy = t - iy
    a = row0[iy] + (row0[iy + 1] - row0[iy]) * fy
    b = row1[iy] + (row1[iy + 1] - row1[iy]) * fy
    return a + (b - a) * fs


@njit(cache=True, inline="always")
def _tmatch(row0, row1, fs, m):
    """Fractional y index where the interpolated mean row crosses m."""
    lo = 0.0
    hi = row0.shape[0] - 1.0
    for _ in range(26):
        mid = 0.5 * (lo + hi)
        if _row_val(row0, row1, fs, mid) < m:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(cache=True)
def match_moments(m, v, ygrid, sgrid, mean_tab, ts, tyn, vscale):
    """Gaussian-interval parameters (y*, s) for local moments (m, v).

    The interval width stays on the normal-score scale, s^2 = v / vscale
    (vscale is the target variance), and the center y* is solved so the
    back-transformed mean equals m exactly. Zero variance degenerates to
    rank matching, and the unconditional case (m = target mean, v = vscale)
    yields (0, 1), reproducing the target marginal exactly. mean_tab is
    (n_s, n_y) with ygrid uniform. Means outside the target support clamp to
    its endpoints, flagged in the third return value.
    """
    clamped = 0
    if m < ts[0]:
        m = ts[0]
        clamped = 1
    elif m > ts[ts.shape[0] - 1]:
        m = ts[ts.shape[0] - 1]
        clamped = 1
    if v <= 1e-12 * vscale:
        return np.interp(m, ts, tyn), 0.0, clamped
    ns = sgrid.shape[0]
    nyg = ygrid.shape[0]
    dy = (ygrid[nyg - 1] - ygrid[0]) / (nyg - 1)
    smax = sgrid[ns - 1]
    s = np.sqrt(v / vscale)
    if s > smax:
        s = smax
    isx = np.searchsorted(sgrid, s)
    if isx < 1:
        isx = 1
    elif isx > ns - 1:
        isx = ns - 1
    fs = (s - sgrid[isx - 1]) / (sgrid[isx] - sgrid[isx - 1])
    t = _tmatch(mean_tab[isx - 1], mean_tab[isx], fs, m)
    return ygrid[0] + t * dy, s, clamped


@njit(cache=True)
def dss_realization(
    nx,
    ny,
    nz,
    dx,
    dy,
    dz,
    vals,
    known,
    path,
    z,
    tmpl,
    max_data,
    gm,
    p,
    ts,
    tyn,
    ygrid,
    sgrid,
    mean_tab,
    vscale,
    use_sec,
    sec,
    ccv,
    sec_mean,
):
    """Sequential simulation of all unknown nodes along `path`, in place.

    Flat node index is (i*ny + j)*nz + k. Returns (clamp_count, error_code,
    error_node, error_neighborhood). Error codes: 1 kriging variance more
    negative than tolerance, 2 singular kriging system.
    """
    npos = np.empty((max_data, 3))
    nval = np.empty(max_data)
    nt = tmpl.shape[0]
    nclamp = 0
    c0 = p[6] + p[7]
    vtol = 1e-9 * c0
    for pi in range(path.shape[0]):
        idx = path[pi]
        if known[idx]:
            continue
        k = idx % nz
        rem = idx // nz
        j = rem % ny
        i = rem // ny
        cnt = 0
        for t in range(nt):
            i2 = i + tmpl[t, 0]
            if i2 < 0 or i2 >= nx:
                continue
            j2 = j + tmpl[t, 1]
            if j2 < 0 or j2 >= ny:
                continue
            k2 = k + tmpl[t, 2]
            if k2 < 0 or k2 >= nz:
                continue
            nidx = (i2 * ny + j2) * nz + k2
            if not known[nidx]:
                continue
            npos[cnt, 0] = i2 * dx
            npos[cnt, 1] = j2 * dy
            npos[cnt, 2] = k2 * dz
            nval[cnt] = vals[nidx]
            cnt += 1
            if cnt == max_data:
                break
        if use_sec:
            est, var = krige_at(
                i * dx, j * dy, k * dz, npos, nval, cnt, gm, True, sec[idx], sec_mean, ccv[idx], p
            )
        else:
            est, var = krige_at(
                i * dx, j * dy, k * dz, npos, nval, cnt, gm, False, 0.0, 0.0, 0.0, p
            )
        if np.isnan(var):
            return nclamp, 2, idx, cnt
        if var < -vtol:
            return nclamp, 1, idx, cnt
        if var < 0.0:
            var = 0.0
        ystar, s, cl = match_moments(est, var, ygrid, sgrid, mean_tab, ts, tyn, vscale)
        nclamp += cl
        g = ystar + s * z[idx]
        vals[idx] = np.interp(g, tyn, ts)
        known[idx] = True
    return nclamp, 0, -1, 0
