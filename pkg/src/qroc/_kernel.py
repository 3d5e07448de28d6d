"""Compiled pivoting kernels for pinball-loss linear programs.

Everything in this module works on raw float64 arrays so it can be
jit-compiled; the public wrappers in qreg/inference own validation and
error translation.  The solver walks data-interpolating vertices: a
basis is a set of m = p + 1 row indices whose rows are linearly
independent, and the coefficient vector at a basis interpolates those
rows exactly.

Conventions fixed here and relied on by callers:
- residuals within rounding distance of zero are snapped to exactly 0
  (duplicated rows in a resample land there) and their one-sided
  derivative contributions are computed exactly per direction, so the
  optimality certificate is exact even under heavy ties
- step length along a pivot direction is chosen by weighted median: the
  first sign crossing at which the accumulated directional derivative
  turns nonnegative, ties broken by observation index
- after m + 2 consecutive zero-length steps the pivot choice switches
  to lowest-observation-index (Bland) until a real step is taken
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_MAX_PIVOTS = 1
STATUS_UNBOUNDED = 2
STATUS_SINGULAR = 3
STATUS_CYCLING = 4
STATUS_CAP = 5

# Optimality slack for directional derivatives.  Derivatives at suboptimal
# vertices of generic data are orders of magnitude larger; see solver tests.
_DTOL = 1e-9


@njit(cache=True)
def _solve_dest(A, b):
    """Solve A x = b in place (partial pivoting). b receives the solution.

    Returns False when a pivot collapses relative to the matrix scale.
    A and b are both destroyed.
    """
    m = A.shape[0]
    scale = 0.0
    for i in range(m):
        for j in range(m):
            aij = abs(A[i, j])
            if aij > scale:
                scale = aij
    if scale == 0.0:
        return False
    tol = 1e-13 * scale
    for col in range(m):
        piv = col
        pmax = abs(A[col, col])
        for row in range(col + 1, m):
            ar = abs(A[row, col])
            if ar > pmax:
                pmax = ar
                piv = row
        if pmax <= tol:
            return False
        if piv != col:
            for j in range(m):
                tmp = A[col, j]
                A[col, j] = A[piv, j]
                A[piv, j] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        inv = 1.0 / A[col, col]
        for row in range(col + 1, m):
            f = A[row, col] * inv
            if f != 0.0:
                A[row, col] = 0.0
                for j in range(col + 1, m):
                    A[row, j] -= f * A[col, j]
                b[row] -= f * b[col]
    for col in range(m - 1, -1, -1):
        acc = b[col]
        for j in range(col + 1, m):
            acc -= A[col, j] * b[j]
        b[col] = acc / A[col, col]
    return True


@njit(cache=True)
def pinball_objective(Z, y, beta, tau):
    """Sum of tau-weighted absolute residuals of y - Z beta."""
    n, m = Z.shape
    total = 0.0
    for i in range(n):
        r = y[i]
        for j in range(m):
            r -= Z[i, j] * beta[j]
        if r >= 0.0:
            total += tau * r
        else:
            total += (tau - 1.0) * r
    return total


@njit(cache=True)
def select_basis(Z, y, beta0, h):
    """Pick m independent rows closest (by |residual|) to the plane beta0.

    Fills h with the chosen row indices.  Returns STATUS_SINGULAR when no
    m independent rows exist (rank-deficient design).
    """
    n, m = Z.shape
    resid = np.empty(n)
    for i in range(n):
        acc = y[i]
        for j in range(m):
            acc -= Z[i, j] * beta0[j]
        resid[i] = abs(acc)
    order = np.argsort(resid, kind='mergesort')
    Q = np.zeros((m, m))
    v = np.empty(m)
    count = 0
    for t in range(n):
        i = order[t]
        nrm0 = 0.0
        for j in range(m):
            v[j] = Z[i, j]
            nrm0 += v[j] * v[j]
        nrm0 = np.sqrt(nrm0)
        for k in range(count):
            proj = 0.0
            for j in range(m):
                proj += Q[k, j] * v[j]
            for j in range(m):
                v[j] -= proj * Q[k, j]
        nrm = 0.0
        for j in range(m):
            nrm += v[j] * v[j]
        nrm = np.sqrt(nrm)
        if nrm > 1e-10 * (nrm0 + 1.0):
            for j in range(m):
                Q[count, j] = v[j] / nrm
            h[count] = i
            count += 1
            if count == m:
                return STATUS_OK
    return STATUS_SINGULAR


@njit(cache=True)
def simplex(Z, y, tau, tilt, h, max_piv):
    """Pivot h to a vertex minimizing sum(pinball_tau(y - Z b)) - tilt . b.

    h must hold independent row indices on entry and is updated in place.
    Returns (beta, status, pivot_count).
    """
    n, m = Z.shape
    B = np.empty((m, m))
    W = np.empty((m, m))
    wb = np.empty(m)
    beta = np.empty(m)
    v = np.empty(m)
    d = np.empty(m)
    a = np.empty(m)
    P = np.empty(m)
    N = np.empty(m)
    Dmat = np.empty((m, m))
    r = np.empty(n)
    u = np.empty(n)
    zlist = np.empty(n, dtype=np.int64)
    in_basis = np.zeros(n, dtype=np.bool_)
    tcand = np.empty(n)
    icand = np.empty(n, dtype=np.int64)
    wcand = np.empty(n)
    npiv = 0
    degen_run = 0
    while True:
        for k in range(m):
            ik = h[k]
            for j in range(m):
                B[k, j] = Z[ik, j]
                W[k, j] = Z[ik, j]
            wb[k] = y[ik]
        if not _solve_dest(W, wb):
            return beta, STATUS_SINGULAR, npiv
        for j in range(m):
            beta[j] = wb[j]
        for i in range(n):
            in_basis[i] = False
        for k in range(m):
            in_basis[h[k]] = True
        nz = 0
        for i in range(n):
            if in_basis[i]:
                r[i] = 0.0
            else:
                acc = y[i]
                for j in range(m):
                    acc -= Z[i, j] * beta[j]
                # rounding-level residuals (duplicated rows) are exact ties
                if abs(acc) <= 1e-11 * (1.0 + abs(y[i])):
                    acc = 0.0
                    zlist[nz] = i
                    nz += 1
                r[i] = acc
        for j in range(m):
            a[j] = tilt[j]
        for i in range(n):
            if not in_basis[i] and r[i] != 0.0:
                c = tau if r[i] > 0.0 else tau - 1.0
                for j in range(m):
                    a[j] += c * Z[i, j]
        for k in range(m):
            for j in range(m):
                W[k, j] = B[j, k]
            wb[k] = a[k]
        if not _solve_dest(W, wb):
            return beta, STATUS_SINGULAR, npiv
        for j in range(m):
            v[j] = wb[j]
        # one-sided contributions of exact ties, per release direction:
        # a tie crosses its kink at step 0, so it adds (1-tau)*u for
        # u > 0 and tau*|u| for u < 0 to the derivative going out
        for k in range(m):
            P[k] = 0.0
            N[k] = 0.0
        if nz > 0:
            for k in range(m):
                for kk in range(m):
                    for j in range(m):
                        W[kk, j] = B[kk, j]
                    wb[kk] = 1.0 if kk == k else 0.0
                if not _solve_dest(W, wb):
                    return beta, STATUS_SINGULAR, npiv
                for j in range(m):
                    Dmat[k, j] = wb[j]
            for t in range(nz):
                i = zlist[t]
                for k in range(m):
                    ui = 0.0
                    for j in range(m):
                        ui += Z[i, j] * Dmat[k, j]
                    if ui > 0.0:
                        P[k] += ui
                    elif ui < 0.0:
                        N[k] -= ui
        bk = -1
        bs = 0.0
        bd = -_DTOL
        if degen_run > m + 2:
            bh = n + 1
            for k in range(m):
                dp = (1.0 - tau) - v[k] + (1.0 - tau) * P[k] + tau * N[k]
                dm = tau + v[k] + (1.0 - tau) * N[k] + tau * P[k]
                if (dp < -_DTOL or dm < -_DTOL) and h[k] < bh:
                    bh = h[k]
                    bk = k
                    if dp < -_DTOL:
                        bs = 1.0
                        bd = dp
                    else:
                        bs = -1.0
                        bd = dm
        else:
            for k in range(m):
                dp = (1.0 - tau) - v[k] + (1.0 - tau) * P[k] + tau * N[k]
                dm = tau + v[k] + (1.0 - tau) * N[k] + tau * P[k]
                if dp < bd:
                    bd = dp
                    bk = k
                    bs = 1.0
                if dm < bd:
                    bd = dm
                    bk = k
                    bs = -1.0
        if bk < 0:
            return beta, STATUS_OK, npiv
        if npiv >= max_piv:
            return beta, STATUS_MAX_PIVOTS, npiv
        npiv += 1
        if nz > 0:
            for j in range(m):
                d[j] = Dmat[bk, j]
        else:
            for k in range(m):
                for j in range(m):
                    W[k, j] = B[k, j]
                wb[k] = 1.0 if k == bk else 0.0
            if not _solve_dest(W, wb):
                return beta, STATUS_SINGULAR, npiv
            for j in range(m):
                d[j] = wb[j]
        umax = 0.0
        for i in range(n):
            if in_basis[i] or r[i] == 0.0:
                u[i] = 0.0
            else:
                acc = 0.0
                for j in range(m):
                    acc += Z[i, j] * d[j]
                u[i] = bs * acc
                au = abs(u[i])
                if au > umax:
                    umax = au
        wtol = 1e-11 * (1.0 + umax)
        cnt = 0
        for i in range(n):
            if in_basis[i] or r[i] == 0.0:
                continue
            w = u[i]
            if abs(w) <= wtol:
                continue
            t = r[i] / w
            if t < 0.0:
                if t > -1e-12:
                    t = 0.0
                else:
                    continue
            tcand[cnt] = t
            icand[cnt] = i
            wcand[cnt] = abs(w)
            cnt += 1
        if cnt == 0:
            return beta, STATUS_UNBOUNDED, npiv
        order = np.argsort(tcand[:cnt], kind='mergesort')
        slope = bd if bd < 0.0 else 0.0
        chosen = -1
        for q in range(cnt):
            c = order[q]
            slope += wcand[c]
            if slope >= 0.0:
                chosen = c
                break
        if chosen < 0:
            return beta, STATUS_UNBOUNDED, npiv
        if tcand[chosen] <= 0.0:
            degen_run += 1
        else:
            degen_run = 0
        h[bk] = icand[chosen]


@njit(cache=True)
def path_sweep(Z, y, rho_lo, rho_hi, h, knots, betas):
    """Decompose the solution over rho in [rho_lo, rho_hi] into segments.

    h must be optimal for tau = 1 - rho_lo on entry.  Fills knots
    (length max_seg + 1) and betas (max_seg rows): segment s covers
    [knots[s], knots[s+1]) with coefficients betas[s], right-continuous,
    last segment closed at rho_hi.  Returns (nseg, status).

    Derivatives in every release direction are affine in tau, including
    the exact-tie terms, so each basis is optimal on a tau interval whose
    endpoints are ratios of the affine coefficients.  The sweep walks
    those intervals upward in rho, re-optimizing at each boundary for
    tau just below it.
    """
    n, m = Z.shape
    max_seg = betas.shape[0]
    B = np.empty((m, m))
    W = np.empty((m, m))
    wb = np.empty(m)
    beta = np.empty(m)
    d = np.empty(m)
    sx = np.empty(m)
    qx = np.empty(m)
    vs = np.empty(m)
    vq = np.empty(m)
    P = np.empty(m)
    N = np.empty(m)
    Dmat = np.empty((m, m))
    c0p = np.empty(m)
    c1p = np.empty(m)
    c0m = np.empty(m)
    c1m = np.empty(m)
    r = np.empty(n)
    u = np.empty(n)
    zlist = np.empty(n, dtype=np.int64)
    in_basis = np.zeros(n, dtype=np.bool_)
    tcand = np.empty(n)
    icand = np.empty(n, dtype=np.int64)
    wcand = np.empty(n)
    nseg = 0
    knots[0] = rho_lo
    cur_rho = rho_lo
    nudges = 0
    piv_since_emit = 0
    while True:
        tau = 1.0 - cur_rho
        for k in range(m):
            ik = h[k]
            for j in range(m):
                B[k, j] = Z[ik, j]
                W[k, j] = Z[ik, j]
            wb[k] = y[ik]
        if not _solve_dest(W, wb):
            return nseg, STATUS_SINGULAR
        for j in range(m):
            beta[j] = wb[j]
        for i in range(n):
            in_basis[i] = False
        for k in range(m):
            in_basis[h[k]] = True
        for j in range(m):
            sx[j] = 0.0
            qx[j] = 0.0
        nz = 0
        for i in range(n):
            if in_basis[i]:
                r[i] = 0.0
            else:
                acc = y[i]
                for j in range(m):
                    acc -= Z[i, j] * beta[j]
                if abs(acc) <= 1e-11 * (1.0 + abs(y[i])):
                    acc = 0.0
                    zlist[nz] = i
                    nz += 1
                r[i] = acc
                if acc != 0.0:
                    for j in range(m):
                        sx[j] += Z[i, j]
                    if acc < 0.0:
                        for j in range(m):
                            qx[j] += Z[i, j]
        for k in range(m):
            for j in range(m):
                W[k, j] = B[j, k]
            wb[k] = sx[k]
        if not _solve_dest(W, wb):
            return nseg, STATUS_SINGULAR
        for j in range(m):
            vs[j] = wb[j]
        for k in range(m):
            for j in range(m):
                W[k, j] = B[j, k]
            wb[k] = qx[k]
        if not _solve_dest(W, wb):
            return nseg, STATUS_SINGULAR
        for j in range(m):
            vq[j] = wb[j]
        for k in range(m):
            P[k] = 0.0
            N[k] = 0.0
        if nz > 0:
            for k in range(m):
                for kk in range(m):
                    for j in range(m):
                        W[kk, j] = B[kk, j]
                    wb[kk] = 1.0 if kk == k else 0.0
                if not _solve_dest(W, wb):
                    return nseg, STATUS_SINGULAR
                for j in range(m):
                    Dmat[k, j] = wb[j]
            for t in range(nz):
                i = zlist[t]
                for k in range(m):
                    ui = 0.0
                    for j in range(m):
                        ui += Z[i, j] * Dmat[k, j]
                    if ui > 0.0:
                        P[k] += ui
                    elif ui < 0.0:
                        N[k] -= ui
        # release-direction derivatives as affine functions of tau:
        # D(tau) = c0 + c1 * tau, for the up (+delta_k) and down
        # (-delta_k) directions of each basis coordinate
        for k in range(m):
            c0p[k] = 1.0 + P[k] + vq[k]
            c1p[k] = -(1.0 + vs[k] + P[k] - N[k])
            c0m[k] = N[k] - vq[k]
            c1m[k] = 1.0 + vs[k] + P[k] - N[k]
        bk = -1
        bs = 0.0
        bd = 0.0
        for k in range(m):
            dp = c0p[k] + c1p[k] * tau
            dm = c0m[k] + c1m[k] * tau
            # pivot when negative at tau, or zero at tau and turning
            # negative just below (sweep moves tau downward)
            if dp < -_DTOL or (dp <= _DTOL and c1p[k] > 1e-12):
                score = dp if dp < 0.0 else 0.0
                if bk < 0 or score < bd:
                    bd = score
                    bk = k
                    bs = 1.0
            if dm < -_DTOL or (dm <= _DTOL and c1m[k] > 1e-12):
                score = dm if dm < 0.0 else 0.0
                if bk < 0 or score < bd:
                    bd = score
                    bk = k
                    bs = -1.0
        if bk >= 0:
            # re-optimize at tau-minus with a weighted-median step
            piv_since_emit += 1
            if piv_since_emit > n + 16:
                return nseg, STATUS_CYCLING
            if nz > 0:
                for j in range(m):
                    d[j] = Dmat[bk, j]
            else:
                for k in range(m):
                    for j in range(m):
                        W[k, j] = B[k, j]
                    wb[k] = 1.0 if k == bk else 0.0
                if not _solve_dest(W, wb):
                    return nseg, STATUS_SINGULAR
                for j in range(m):
                    d[j] = wb[j]
            umax = 0.0
            for i in range(n):
                if in_basis[i] or r[i] == 0.0:
                    u[i] = 0.0
                else:
                    acc = 0.0
                    for j in range(m):
                        acc += Z[i, j] * d[j]
                    u[i] = bs * acc
                    au = abs(u[i])
                    if au > umax:
                        umax = au
            wtol = 1e-11 * (1.0 + umax)
            cnt = 0
            for i in range(n):
                if in_basis[i] or r[i] == 0.0:
                    continue
                w = u[i]
                if abs(w) <= wtol:
                    continue
                t = r[i] / w
                if t < 0.0:
                    if t > -1e-12:
                        t = 0.0
                    else:
                        continue
                tcand[cnt] = t
                icand[cnt] = i
                wcand[cnt] = abs(w)
                cnt += 1
            if cnt == 0:
                return nseg, STATUS_UNBOUNDED
            order = np.argsort(tcand[:cnt], kind='mergesort')
            slope = bd if bd < 0.0 else 0.0
            chosen = -1
            for q in range(cnt):
                c = order[q]
                slope += wcand[c]
                if slope >= 0.0:
                    chosen = c
                    break
            if chosen < 0:
                return nseg, STATUS_UNBOUNDED
            h[bk] = icand[chosen]
            continue
        # basis locked on a tau interval; find its lower endpoint
        tau_lb = -1.0e300
        for k in range(m):
            if c1p[k] > 1e-12:
                lb = -c0p[k] / c1p[k]
                if lb > tau_lb:
                    tau_lb = lb
            if c1m[k] > 1e-12:
                lb = -c0m[k] / c1m[k]
                if lb > tau_lb:
                    tau_lb = lb
        rho_reach = 1.0 - tau_lb
        final = rho_reach >= rho_hi - 1e-14
        if final:
            rho_reach = rho_hi
        elif rho_reach < cur_rho:
            rho_reach = cur_rho
        same = False
        if nseg > 0:
            same = True
            for j in range(m):
                if betas[nseg - 1, j] != beta[j]:
                    same = False
                    break
        if same:
            knots[nseg] = rho_reach
        elif rho_reach > knots[nseg] + 1e-13 or (final and nseg == 0):
            if nseg >= max_seg:
                return nseg, STATUS_CAP
            for j in range(m):
                betas[nseg, j] = beta[j]
            knots[nseg + 1] = rho_reach
            nseg += 1
        elif nseg > 0:
            # zero-width sliver with a different vertex: absorb it
            knots[nseg] = rho_reach
        if final:
            return nseg, STATUS_OK
        if rho_reach <= cur_rho + 1e-13:
            # locked basis with no reach progress: numerically stuck
            # sliver, skip past it a bounded number of times
            nudges += 1
            if nudges > 64:
                return nseg, STATUS_CYCLING
            cur_rho = cur_rho + 1e-11
        else:
            cur_rho = rho_reach
            piv_since_emit = 0


@njit(cache=True)
def grid_fits(Z, y, taus, beta_warm, betas_out, max_piv):
    """Chained fits over a tau grid, warm-starting each from the previous."""
    n, m = Z.shape
    h = np.empty(m, dtype=np.int64)
    st = select_basis(Z, y, beta_warm, h)
    if st != STATUS_OK:
        return st
    tilt = np.zeros(m)
    for g in range(taus.shape[0]):
        beta, st, _ = simplex(Z, y, taus[g], tilt, h, max_piv)
        if st != STATUS_OK:
            return st
        for j in range(m):
            betas_out[g, j] = beta[j]
    return STATUS_OK


@njit(cache=True)
def pooled_count(Z0, m0, beta):
    """Fraction of control rows with marker <= fitted threshold."""
    n0 = Z0.shape[0]
    m = Z0.shape[1]
    cnt = 0
    for i in range(n0):
        thr = 0.0
        for j in range(m):
            thr += Z0[i, j] * beta[j]
        if m0[i] <= thr:
            cnt += 1
    return cnt / n0


@njit(cache=True)
def boot_reps(Z1, y1, Z0, m0, tau, idx1, idx0, beta_warm, nu_out, ok, max_piv):
    """Refit on paired resamples; nu_out rows get (beta, phi) per replicate."""
    nb = idx1.shape[0]
    n1s = idx1.shape[1]
    n0s = idx0.shape[1]
    m = Z1.shape[1]
    Zb = np.empty((n1s, m))
    yb = np.empty(n1s)
    h = np.empty(m, dtype=np.int64)
    tilt = np.zeros(m)
    for b in range(nb):
        for t in range(n1s):
            i = idx1[b, t]
            for j in range(m):
                Zb[t, j] = Z1[i, j]
            yb[t] = y1[i]
        st = select_basis(Zb, yb, beta_warm, h)
        if st != STATUS_OK:
            ok[b] = False
            continue
        beta, st, _ = simplex(Zb, yb, tau, tilt, h, max_piv)
        if st != STATUS_OK:
            ok[b] = False
            continue
        cnt = 0
        for t in range(n0s):
            i0 = idx0[b, t]
            thr = 0.0
            for j in range(m):
                thr += Z0[i0, j] * beta[j]
            if m0[i0] <= thr:
                cnt += 1
        for j in range(m):
            nu_out[b, j] = beta[j]
        nu_out[b, m] = cnt / n0s
        ok[b] = True
    return STATUS_OK


@njit(cache=True)
def band_reps(Z1, y1, Z0, m0, taus, idx1, idx0, beta_warm, phi_out, ok, max_piv):
    """Resampled specificity curves over a tau grid (chained warm fits)."""
    nb = idx1.shape[0]
    n1s = idx1.shape[1]
    n0s = idx0.shape[1]
    m = Z1.shape[1]
    ng = taus.shape[0]
    Zb = np.empty((n1s, m))
    yb = np.empty(n1s)
    Z0b = np.empty((n0s, m))
    m0b = np.empty(n0s)
    h = np.empty(m, dtype=np.int64)
    tilt = np.zeros(m)
    for b in range(nb):
        for t in range(n1s):
            i = idx1[b, t]
            for j in range(m):
                Zb[t, j] = Z1[i, j]
            yb[t] = y1[i]
        for t in range(n0s):
            i0 = idx0[b, t]
            for j in range(m):
                Z0b[t, j] = Z0[i0, j]
            m0b[t] = m0[i0]
        st = select_basis(Zb, yb, beta_warm, h)
        if st != STATUS_OK:
            ok[b] = False
            continue
        good = True
        for g in range(ng):
            beta, st, _ = simplex(Zb, yb, taus[g], tilt, h, max_piv)
            if st != STATUS_OK:
                good = False
                break
            phi_out[b, g] = pooled_count(Z0b, m0b, beta)
        ok[b] = good
    return STATUS_OK


@njit(cache=True)
def mono_path_scan(betas, Zt, keep):
    """Forward scan over path segments accepting threshold-dominated ones.

    betas: (K, m) segment coefficients in rho order. Zt: (n, m) case design
    rows. A segment is kept when its threshold at every row is <= the last
    kept segment's (weak, with a tie slack). First segment always kept.
    """
    K, m = betas.shape
    n = Zt.shape[0]
    ref = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += Zt[i, j] * betas[0, j]
        ref[i] = acc
    keep[0] = True
    for s in range(1, K):
        good = True
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += Zt[i, j] * betas[s, j]
            if acc > ref[i] + 1e-12 * (1.0 + abs(ref[i])):
                good = False
                break
        keep[s] = good
        if good:
            for i in range(n):
                acc = 0.0
                for j in range(m):
                    acc += Zt[i, j] * betas[s, j]
                ref[i] = acc
    return STATUS_OK
