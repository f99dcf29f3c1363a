"""Compiled Metropolis-within-Gibbs chain for the areal Beta regression.

One iteration sweeps, in order: the global intercept, the gender block,
each coefficient (spike- or slab-scaled random walk depending on its
inclusion indicator), exact Gibbs draws of the inclusion indicators and
probabilities, the region effects (with re-centering folded into the
intercept), the spatial precision (Gibbs), the time effects, the temporal
precision (Gibbs), the AR coefficient, and the latent precision factor B.

The per-row Beta log likelihood is cached and updated incrementally, so a
proposal only re-evaluates the rows it touches. Proposal scales adapt on
fixed windows during burn-in with a Robbins-Monro decaying step and stay
frozen afterwards, keeping the post-burn-in kernel fixed.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_CLAMP_LO = 1e-8
_CLAMP_HI = 1e4


@njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _row_ll(eta, ly, l1y, phi, lgphi):
    mu = _sigmoid(eta)
    a = mu * phi
    b = phi - a
    if a <= 0.0 or b <= 0.0:
        return -np.inf
    return lgphi - math.lgamma(a) - math.lgamma(b) + (a - 1.0) * ly + (b - 1.0) * l1y


@njit(cache=True, inline="always")
def _clamp(s):
    if s < _CLAMP_LO:
        return _CLAMP_LO
    if s > _CLAMP_HI:
        return _CLAMP_HI
    return s


@njit(cache=True)
def run_chain(
    seed,
    n_iter,
    burn_in,
    thin,
    target_acc,
    adapt_window,
    # data
    ly,
    l1y,
    X,
    # row segments: rows sorted by region / time / group with ptr arrays
    reg_rows,
    reg_ptr,
    time_rows,
    time_ptr,
    grp_rows,
    grp_ptr,
    # graph
    nbr_flat,
    nbr_ptr,
    degrees,
    tau_psi_shape_add,
    # model constants
    spike_var,
    slab_var,
    a_phi,
    eps_phi,
    tau_shape,
    tau_rate,
    sigma2_gamma,
    mu_s_var,
    s2_low,
    s2_high,
    rho_beta_prior,
    gender_random,
    init_beta0,
    out,
):
    np.random.seed(seed)
    n = ly.shape[0]
    p = X.shape[1]
    R = degrees.shape[0]
    T = time_ptr.shape[0] - 1
    G = grp_ptr.shape[0] - 1

    # --- state ---------------------------------------------------------
    beta0 = init_beta0
    gamma = 0.0
    gamma_s = np.zeros(G)
    mu_s = np.zeros(G)
    s2_s = np.full(G, 0.5 * (s2_low + s2_high))
    beta = np.zeros(p)
    omega = np.zeros(p, dtype=np.int64)
    theta = np.full(p, 0.5)
    psi = np.zeros(R)
    alpha = np.zeros(T)
    rho = 0.5
    b_lat = 0.5
    phi = (a_phi * b_lat) ** 2
    lgphi = math.lgamma(phi)
    tau_psi = 1.0
    tau_alpha = 1.0

    eta = np.empty(n)
    ll = np.empty(n)
    llb = np.empty(n)
    for i in range(n):
        eta[i] = beta0
        ll[i] = _row_ll(eta[i], ly[i], l1y[i], phi, lgphi)
    ll_tot = ll.sum()

    # --- proposal scales and window counters ---------------------------
    s_beta0 = 0.1
    s_gamma = 0.1
    s_gs = np.full(G, 0.1)
    s_mus = np.full(G, 0.5)
    s_s2 = np.full(G, 1.0)
    s_bspike = np.full(p, 2.0 * math.sqrt(spike_var))
    s_bslab = np.full(p, 0.1)
    s_psi = np.full(R, 0.1)
    s_alpha = np.full(T, 0.1)
    s_rho = 0.5
    s_b = 0.2

    a_beta0 = 0
    a_gamma = 0
    a_gs = np.zeros(G, dtype=np.int64)
    a_mus = np.zeros(G, dtype=np.int64)
    a_s2 = np.zeros(G, dtype=np.int64)
    a_spike = np.zeros(p, dtype=np.int64)
    t_spike = np.zeros(p, dtype=np.int64)
    a_slab = np.zeros(p, dtype=np.int64)
    t_slab = np.zeros(p, dtype=np.int64)
    a_psi = np.zeros(R, dtype=np.int64)
    a_alpha = np.zeros(T, dtype=np.int64)
    a_rho = 0
    a_b = 0
    batch = 0

    # post-burn-in acceptance tallies: beta0, gender, beta, psi, alpha, rho, b
    post_acc = np.zeros(7)
    post_att = np.zeros(7)

    for it in range(n_iter):
        tracking = it >= burn_in

        # (1) global intercept, flat prior
        d = np.random.normal(0.0, s_beta0)
        new_tot = 0.0
        for i in range(n):
            llb[i] = _row_ll(eta[i] + d, ly[i], l1y[i], phi, lgphi)
            new_tot += llb[i]
        if tracking:
            post_att[0] += 1.0
        if math.log(np.random.random()) < new_tot - ll_tot:
            beta0 += d
            for i in range(n):
                eta[i] += d
                ll[i] = llb[i]
            ll_tot = new_tot
            a_beta0 += 1
            if tracking:
                post_acc[0] += 1.0

        # (2) gender block
        if not gender_random:
            d = np.random.normal(0.0, s_gamma)
            ng = gamma + d
            prior_diff = (gamma * gamma - ng * ng) / (2.0 * sigma2_gamma)
            dll = 0.0
            for idx in range(grp_ptr[1], grp_ptr[2]):
                i = grp_rows[idx]
                llb[i] = _row_ll(eta[i] + d, ly[i], l1y[i], phi, lgphi)
                dll += llb[i] - ll[i]
            if tracking:
                post_att[1] += 1.0
            if math.log(np.random.random()) < dll + prior_diff:
                gamma = ng
                for idx in range(grp_ptr[1], grp_ptr[2]):
                    i = grp_rows[idx]
                    eta[i] += d
                    ll[i] = llb[i]
                ll_tot += dll
                a_gamma += 1
                if tracking:
                    post_acc[1] += 1.0
        else:
            for s in range(G):
                # random deviation gamma_s
                d = np.random.normal(0.0, s_gs[s])
                ng = gamma_s[s] + d
                prior_diff = (
                    (gamma_s[s] - mu_s[s]) ** 2 - (ng - mu_s[s]) ** 2
                ) / (2.0 * s2_s[s])
                dll = 0.0
                for idx in range(grp_ptr[s], grp_ptr[s + 1]):
                    i = grp_rows[idx]
                    llb[i] = _row_ll(eta[i] + d, ly[i], l1y[i], phi, lgphi)
                    dll += llb[i] - ll[i]
                if tracking:
                    post_att[1] += 1.0
                if math.log(np.random.random()) < dll + prior_diff:
                    gamma_s[s] = ng
                    for idx in range(grp_ptr[s], grp_ptr[s + 1]):
                        i = grp_rows[idx]
                        eta[i] += d
                        ll[i] = llb[i]
                    ll_tot += dll
                    a_gs[s] += 1
                    if tracking:
                        post_acc[1] += 1.0
                # hyper mean mu_s, N(0, mu_s_var) prior; no likelihood rows
                d = np.random.normal(0.0, s_mus[s])
                nm = mu_s[s] + d
                diff = ((gamma_s[s] - mu_s[s]) ** 2 - (gamma_s[s] - nm) ** 2) / (
                    2.0 * s2_s[s]
                ) + (mu_s[s] * mu_s[s] - nm * nm) / (2.0 * mu_s_var)
                if math.log(np.random.random()) < diff:
                    mu_s[s] = nm
                    a_mus[s] += 1
                # hyper variance sigma2_s, Uniform(s2_low, s2_high)
                d = np.random.normal(0.0, s_s2[s])
                ns2 = s2_s[s] + d
                if s2_low <= ns2 <= s2_high:
                    diff = (
                        -0.5 * math.log(ns2)
                        - (gamma_s[s] - mu_s[s]) ** 2 / (2.0 * ns2)
                        + 0.5 * math.log(s2_s[s])
                        + (gamma_s[s] - mu_s[s]) ** 2 / (2.0 * s2_s[s])
                    )
                    if math.log(np.random.random()) < diff:
                        s2_s[s] = ns2
                        a_s2[s] += 1

        # (3) coefficients, one univariate walk each
        for k in range(p):
            slab = omega[k] == 1
            scale = s_bslab[k] if slab else s_bspike[k]
            var = slab_var if slab else spike_var
            d = np.random.normal(0.0, scale)
            nb = beta[k] + d
            prior_diff = (beta[k] * beta[k] - nb * nb) / (2.0 * var)
            new_tot = 0.0
            for i in range(n):
                llb[i] = _row_ll(eta[i] + X[i, k] * d, ly[i], l1y[i], phi, lgphi)
                new_tot += llb[i]
            if slab:
                t_slab[k] += 1
            else:
                t_spike[k] += 1
            if tracking:
                post_att[2] += 1.0
            if math.log(np.random.random()) < new_tot - ll_tot + prior_diff:
                beta[k] = nb
                for i in range(n):
                    eta[i] += X[i, k] * d
                    ll[i] = llb[i]
                ll_tot = new_tot
                if slab:
                    a_slab[k] += 1
                else:
                    a_spike[k] += 1
                if tracking:
                    post_acc[2] += 1.0

        # (4) inclusion indicators, exact Gibbs in log space
        for k in range(p):
            log_odds = (
                math.log(theta[k])
                - math.log1p(-theta[k])
                - 0.5 * math.log(slab_var)
                - 0.5 * beta[k] * beta[k] / slab_var
                + 0.5 * math.log(spike_var)
                + 0.5 * beta[k] * beta[k] / spike_var
            )
            omega[k] = 1 if np.random.random() < _sigmoid(log_odds) else 0

        # (5) inclusion probabilities, conjugate Beta
        for k in range(p):
            theta[k] = np.random.beta(1.0 + omega[k], 2.0 - omega[k])

        # (6) region effects sweep, then sum-to-zero re-centering
        for r in range(R):
            d = np.random.normal(0.0, s_psi[r])
            new = psi[r] + d
            deg = degrees[r]
            if deg > 0:
                m = 0.0
                for jj in range(nbr_ptr[r], nbr_ptr[r + 1]):
                    m += psi[nbr_flat[jj]]
                m /= deg
                prior_diff = -0.5 * tau_psi * deg * ((new - m) ** 2 - (psi[r] - m) ** 2)
            else:
                prior_diff = -0.5 * tau_psi * (new * new - psi[r] * psi[r])
            dll = 0.0
            for idx in range(reg_ptr[r], reg_ptr[r + 1]):
                i = reg_rows[idx]
                llb[i] = _row_ll(eta[i] + d, ly[i], l1y[i], phi, lgphi)
                dll += llb[i] - ll[i]
            if tracking:
                post_att[3] += 1.0
            if math.log(np.random.random()) < dll + prior_diff:
                psi[r] = new
                for idx in range(reg_ptr[r], reg_ptr[r + 1]):
                    i = reg_rows[idx]
                    eta[i] += d
                    ll[i] = llb[i]
                ll_tot += dll
                a_psi[r] += 1
                if tracking:
                    post_acc[3] += 1.0
        m = psi.mean()
        for r in range(R):
            psi[r] -= m
        beta0 += m  # likelihood value unchanged: eta rows keep beta0 + psi

        # (7) spatial precision, conjugate Gamma
        quad = 0.0
        for r in range(R):
            for jj in range(nbr_ptr[r], nbr_ptr[r + 1]):
                j = nbr_flat[jj]
                if j > r:
                    quad += (psi[r] - psi[j]) ** 2
            if degrees[r] == 0:
                quad += psi[r] * psi[r]
        tau_psi = np.random.gamma(tau_shape + tau_psi_shape_add, 1.0 / (tau_rate + 0.5 * quad))

        # (8) time effects sweep
        for t in range(T):
            d = np.random.normal(0.0, s_alpha[t])
            new = alpha[t] + d
            mean_t = rho * alpha[t - 1] if t > 0 else 0.0
            prior_diff = -0.5 * tau_alpha * ((new - mean_t) ** 2 - (alpha[t] - mean_t) ** 2)
            if t < T - 1:
                prior_diff += -0.5 * tau_alpha * (
                    (alpha[t + 1] - rho * new) ** 2 - (alpha[t + 1] - rho * alpha[t]) ** 2
                )
            dll = 0.0
            for idx in range(time_ptr[t], time_ptr[t + 1]):
                i = time_rows[idx]
                llb[i] = _row_ll(eta[i] + d, ly[i], l1y[i], phi, lgphi)
                dll += llb[i] - ll[i]
            if tracking:
                post_att[4] += 1.0
            if math.log(np.random.random()) < dll + prior_diff:
                alpha[t] = new
                for idx in range(time_ptr[t], time_ptr[t + 1]):
                    i = time_rows[idx]
                    eta[i] += d
                    ll[i] = llb[i]
                ll_tot += dll
                a_alpha[t] += 1
                if tracking:
                    post_acc[4] += 1.0

        # (9) temporal precision, conjugate Gamma
        ss = alpha[0] * alpha[0]
        for t in range(1, T):
            ss += (alpha[t] - rho * alpha[t - 1]) ** 2
        tau_alpha = np.random.gamma(tau_shape + 0.5 * T, 1.0 / (tau_rate + 0.5 * ss))

        # (10) AR coefficient
        if rho_beta_prior:
            l = math.log(rho / (1.0 - rho))
            l2 = l + np.random.normal(0.0, s_rho)
            r2 = _sigmoid(l2)
            # Beta(1,1) density is flat; only the logit Jacobian remains
            prior_diff = math.log(r2 * (1.0 - r2)) - math.log(rho * (1.0 - rho))
        else:
            r2 = rho + np.random.normal(0.0, s_rho)
            prior_diff = -0.5 * (r2 * r2 - rho * rho)
        ar_diff = 0.0
        for t in range(1, T):
            ar_diff += -0.5 * tau_alpha * (
                (alpha[t] - r2 * alpha[t - 1]) ** 2 - (alpha[t] - rho * alpha[t - 1]) ** 2
            )
        if tracking:
            post_att[5] += 1.0
        if math.log(np.random.random()) < prior_diff + ar_diff:
            rho = r2
            a_rho += 1
            if tracking:
                post_acc[5] += 1.0

        # (11) latent precision factor B on the logit scale
        l = math.log(b_lat / (1.0 - b_lat))
        l2 = l + np.random.normal(0.0, s_b)
        b2 = _sigmoid(l2)
        phi2 = (a_phi * b2) ** 2
        lg2 = math.lgamma(phi2)
        prior_diff = (1.0 + eps_phi) * (
            math.log(b2) + math.log1p(-b2) - math.log(b_lat) - math.log1p(-b_lat)
        )
        new_tot = 0.0
        for i in range(n):
            llb[i] = _row_ll(eta[i], ly[i], l1y[i], phi2, lg2)
            new_tot += llb[i]
        if tracking:
            post_att[6] += 1.0
        if math.log(np.random.random()) < new_tot - ll_tot + prior_diff:
            b_lat = b2
            phi = phi2
            lgphi = lg2
            for i in range(n):
                ll[i] = llb[i]
            ll_tot = new_tot
            a_b += 1
            if tracking:
                post_acc[6] += 1.0

        # --- adaptation (burn-in only; kernel frozen afterwards) --------
        if it < burn_in and (it + 1) % adapt_window == 0:
            batch += 1
            step = 1.0 / math.sqrt(batch)
            w = float(adapt_window)
            s_beta0 = _clamp(s_beta0 * math.exp(step * (a_beta0 / w - target_acc)))
            a_beta0 = 0
            if not gender_random:
                s_gamma = _clamp(s_gamma * math.exp(step * (a_gamma / w - target_acc)))
                a_gamma = 0
            else:
                for s in range(G):
                    s_gs[s] = _clamp(s_gs[s] * math.exp(step * (a_gs[s] / w - target_acc)))
                    s_mus[s] = _clamp(s_mus[s] * math.exp(step * (a_mus[s] / w - target_acc)))
                    s_s2[s] = _clamp(s_s2[s] * math.exp(step * (a_s2[s] / w - target_acc)))
                    a_gs[s] = 0
                    a_mus[s] = 0
                    a_s2[s] = 0
            for k in range(p):
                if t_spike[k] > 0:
                    s_bspike[k] = _clamp(
                        s_bspike[k] * math.exp(step * (a_spike[k] / t_spike[k] - target_acc))
                    )
                if t_slab[k] > 0:
                    s_bslab[k] = _clamp(
                        s_bslab[k] * math.exp(step * (a_slab[k] / t_slab[k] - target_acc))
                    )
                a_spike[k] = 0
                t_spike[k] = 0
                a_slab[k] = 0
                t_slab[k] = 0
            for r in range(R):
                s_psi[r] = _clamp(s_psi[r] * math.exp(step * (a_psi[r] / w - target_acc)))
                a_psi[r] = 0
            for t in range(T):
                s_alpha[t] = _clamp(s_alpha[t] * math.exp(step * (a_alpha[t] / w - target_acc)))
                a_alpha[t] = 0
            s_rho = _clamp(s_rho * math.exp(step * (a_rho / w - target_acc)))
            a_rho = 0
            s_b = _clamp(s_b * math.exp(step * (a_b / w - target_acc)))
            a_b = 0

        # --- record ---------------------------------------------------
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            row = (it - burn_in) // thin
            col = 0
            out[row, col] = beta0
            col += 1
            if gender_random:
                for s in range(G):
                    out[row, col] = gamma_s[s]
                    col += 1
                for s in range(G):
                    out[row, col] = mu_s[s]
                    col += 1
                for s in range(G):
                    out[row, col] = s2_s[s]
                    col += 1
            else:
                out[row, col] = gamma
                col += 1
            for k in range(p):
                out[row, col] = beta[k]
                col += 1
            for k in range(p):
                out[row, col] = float(omega[k])
                col += 1
            for k in range(p):
                out[row, col] = theta[k]
                col += 1
            for r in range(R):
                out[row, col] = psi[r]
                col += 1
            for t in range(T):
                out[row, col] = alpha[t]
                col += 1
            out[row, col] = rho
            out[row, col + 1] = tau_psi
            out[row, col + 2] = tau_alpha
            out[row, col + 3] = phi

    for j in range(7):
        if post_att[j] > 0.0:
            post_acc[j] /= post_att[j]
    return post_acc
