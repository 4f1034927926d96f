"""Hot inner loops for long training runs.

Everything here is written in nopython-compatible numpy and jitted via
:mod:`samlab._accel`; set ``SAMLAB_NO_NUMBA=1`` to run the identical code
uncompiled. Callers pass both ``X`` and a C-contiguous ``X.T`` so matrix
products stay BLAS-friendly under numba.

Method codes (full-batch flows): 0 = plain gradient descent, 1 = shared
ascent point for all examples (n-SAM), 2 = per-example ascent points (1-SAM).
Stochastic codes: 0 = sgd, 1 = shared-batch SAM (unnormalized), 2 =
shared-batch SAM with gradient-norm scaling of rho, 3 = fresh-batch SAM.
"""

import numpy as np

from ._accel import maybe_njit

GD, NSAM, ONESAM = 0, 1, 2
S_SGD, S_MSAM, S_MSAM_NORM, S_NSAM_FRESH = 0, 1, 2, 3


@maybe_njit
def diag_flow(X, XT, y, wp0, wm0, gamma, rho, method, max_steps, tol, log_stride):
    """Full-batch training of the diagonal net with running bias integrals.

    Returns (wp, wm, I_exact, I_lead, loss_integral, beta_max, steps,
    final_loss, t_log, beta_log, n_logged). `I_exact` / `I_lead` are the
    d-vectors whose exponentials give the effective initialization scale
    (time increment dt = gamma per step, Euler); for GD they stay zero.
    `beta_max` is the largest ||beta(t)||_2 seen.
    """
    n, d = X.shape
    wp = wp0.copy()
    wm = wm0.copy()
    I_exact = np.zeros(d)
    I_lead = np.zeros(d)
    loss_integral = 0.0
    beta_max = 0.0

    max_logs = max_steps // log_stride + 2
    t_log = np.empty(max_logs, dtype=np.int64)
    beta_log = np.empty((max_logs, d))
    n_logged = 0

    steps = 0
    loss = 0.0
    for t in range(max_steps):
        beta = wp * wp - wm * wm
        r = X @ beta - y
        loss = (r @ r) / (4.0 * n)
        bnorm = np.sqrt(beta @ beta)
        if bnorm > beta_max:
            beta_max = bnorm
        if t % log_stride == 0:
            t_log[n_logged] = t
            beta_log[n_logged] = beta
            n_logged += 1
        if loss < tol:
            break
        if not np.isfinite(loss):
            break
        loss_integral += gamma * loss

        if method == GD:
            g = (XT @ r) / n
            wp -= gamma * g * wp
            wm -= gamma * (-g) * wm
        elif method == NSAM:
            g = (XT @ r) / n
            gp = g * wp
            gm = -g * wm
            wpa = wp + rho * gp
            wma = wm + rho * gm
            beta_a = wpa * wpa - wma * wma
            r_sam = X @ beta_a - y
            gs = (XT @ r_sam) / n
            xr = XT @ r
            xrs = XT @ r_sam
            I_exact += gamma * (rho / (n * n)) * xrs * xr
            I_lead += gamma * (rho / (n * n)) * xr * xr
            wp -= gamma * gs * wpa
            wm -= gamma * (-gs) * wma
        else:  # ONESAM
            up = np.zeros(d)
            um = np.zeros(d)
            for i in range(n):
                xi = X[i]
                ri = r[i]
                gp = ri * xi * wp
                gm = -ri * xi * wm
                wpa = wp + rho * gp
                wma = wm + rho * gm
                beta_a = wpa * wpa - wma * wma
                r_sam = (xi @ beta_a) - y[i]
                up += r_sam * xi * wpa
                um += -r_sam * xi * wma
                I_exact += gamma * (rho / n) * xi * xi * r_sam * ri
                I_lead += gamma * (rho / n) * xi * xi * ri * ri
            wp -= gamma * up / n
            wm -= gamma * um / n
        steps = t + 1

    # final state log entry
    beta = wp * wp - wm * wm
    t_log[n_logged] = steps
    beta_log[n_logged] = beta
    n_logged += 1
    r = X @ beta - y
    loss = (r @ r) / (4.0 * n)
    return wp, wm, I_exact, I_lead, loss_integral, beta_max, steps, loss, t_log, beta_log, n_logged


@maybe_njit
def diag_stochastic(X, XT, y, wp0, wm0, gamma, rho, method, batches_i, batches_j,
                    check_every, tol):
    """Mini-batch training of the diagonal net with a precomputed batch order.

    `batches_i` (T, b) drives the descent step; `batches_j` drives the ascent
    step of the fresh-batch method and is ignored otherwise. Stops once the
    full-batch loss (checked every `check_every` steps) drops below `tol`.
    Returns (wp, wm, steps, final_loss).
    """
    n, d = X.shape
    T, b = batches_i.shape
    wp = wp0.copy()
    wm = wm0.copy()

    steps = 0
    for t in range(T):
        beta = wp * wp - wm * wm

        # batch gradient factor s = (1/b) sum r_i x_i over the descent batch
        s = np.zeros(d)
        for k in range(b):
            i = batches_i[t, k]
            xi = X[i]
            s += ((xi @ beta) - y[i]) * xi
        s /= b

        if method == S_SGD:
            wp -= gamma * s * wp
            wm -= gamma * (-s) * wm
        else:
            if method == S_NSAM_FRESH:
                sa = np.zeros(d)
                for k in range(b):
                    j = batches_j[t, k]
                    xj = X[j]
                    sa += ((xj @ beta) - y[j]) * xj
                sa /= b
            else:
                sa = s
            rho_t = rho
            if method == S_MSAM_NORM:
                gn = np.sqrt(np.sum(sa * sa * (wp * wp + wm * wm)))
                if gn > 0.0:
                    rho_t = rho / gn
                else:
                    rho_t = 0.0
            wpa = wp + rho_t * sa * wp
            wma = wm - rho_t * sa * wm
            beta_a = wpa * wpa - wma * wma
            ss = np.zeros(d)
            for k in range(b):
                i = batches_i[t, k]
                xi = X[i]
                ss += ((xi @ beta_a) - y[i]) * xi
            ss /= b
            wp -= gamma * ss * wpa
            wm -= gamma * (-ss) * wma

        steps = t + 1
        if steps % check_every == 0:
            beta = wp * wp - wm * wm
            r = X @ beta - y
            loss = (r @ r) / (4.0 * n)
            if loss < tol or not np.isfinite(loss):
                break

    beta = wp * wp - wm * wm
    r = X @ beta - y
    loss = (r @ r) / (4.0 * n)
    return wp, wm, steps, loss


@maybe_njit
def quad_msam(A, zeta, w_star, w0, gammas, rhos, batches, fresh_batches, method):
    """Shared- or fresh-batch SAM on a quadratic objective.

    Records ||grad L(w_t)||^2 and L(w_t) at every step (needed by the rate
    checks). Returns (grad_sq_trace, loss_trace, w_final, w_avg).
    """
    T, b = batches.shape
    d = w0.shape[0]
    w = w0.copy()
    w_sum = np.zeros(d)
    grad_sq = np.empty(T)
    losses = np.empty(T)
    for t in range(T):
        delta = w - w_star
        g_full = A @ delta
        grad_sq[t] = g_full @ g_full
        losses[t] = 0.5 * (delta @ g_full)
        w_sum += w

        zbar = np.zeros(d)
        for k in range(b):
            zbar += zeta[batches[t, k]]
        zbar /= b
        g_b = g_full + zbar

        if method == S_SGD:
            w -= gammas[t] * g_b
        else:
            if method == S_NSAM_FRESH:
                za = np.zeros(d)
                for k in range(b):
                    za += zeta[fresh_batches[t, k]]
                za /= b
                g_a = g_full + za
            else:
                g_a = g_b
            delta_half = delta + rhos[t] * g_a
            g_half = A @ delta_half + zbar
            w -= gammas[t] * g_half
    return grad_sq, losses, w, w_sum / T


@maybe_njit
def quad_nsam_full(A, w_star, w0, gamma, rho, T):
    """Full-batch SAM with a shared ascent point on a noiseless quadratic.

    Returns (grad_sq_trace, loss_trace, w_final, w_avg); the average is over
    w_0 .. w_{T-1} as the convex rate theorem prescribes.
    """
    d = w0.shape[0]
    w = w0.copy()
    w_sum = np.zeros(d)
    grad_sq = np.empty(T + 1)
    losses = np.empty(T + 1)
    for t in range(T):
        delta = w - w_star
        g = A @ delta
        grad_sq[t] = g @ g
        losses[t] = 0.5 * (delta @ g)
        w_sum += w
        g_half = A @ (delta + rho * g)
        w -= gamma * g_half
    delta = w - w_star
    g = A @ delta
    grad_sq[T] = g @ g
    losses[T] = 0.5 * (delta @ g)
    return grad_sq, losses, w, w_sum / T
