"""Pure-Python/numpy implementations of the numerical kernels.

Every function here has a twin with the same signature in ``_ccore.pyx``.
:mod:`fbmsteer._backend` picks one of the two at import time.
"""

import numpy as np

# pointwise nonlinearity codes shared with the compiled core
IDENTITY, TANH, SIN = 0, 1, 2


def apply_code(code, v):
    if code == IDENTITY:
        return v.copy()
    if code == TANH:
        return np.tanh(v)
    if code == SIN:
        return np.sin(v)
    raise ValueError(f"unknown pointwise code {code}")


def hosking(gamma, z):
    """Durbin-Levinson recursion turning white noise into stationary noise.

    Parameters
    ----------
    gamma : (n,) autocovariance at lags 0..n-1
    z : (P, n) standard normal draws, one row per path

    Returns
    -------
    (P, n) array whose rows have Toeplitz covariance built from ``gamma``.
    """
    gamma = np.asarray(gamma, dtype=float)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = gamma.shape[0]
    out = np.empty_like(z)
    phi = np.zeros(n)
    v = gamma[0]
    out[:, 0] = np.sqrt(v) * z[:, 0]
    for k in range(1, n):
        kappa = (gamma[k] - phi[: k - 1] @ gamma[k - 1 : 0 : -1]) / v
        phi[: k - 1] = phi[: k - 1] - kappa * phi[k - 2 :: -1][: k - 1]
        phi[k - 1] = kappa
        v = v * (1.0 - kappa * kappa)
        mean = out[:, k - 1 :: -1][:, :k] @ phi[:k]
        out[:, k] = mean + np.sqrt(v) * z[:, k]
    return out


def exp_scan(decay, data):
    """acc[0] = 0, acc[i+1] = decay * acc[i] + data[i]; returns (J+1, N)."""
    decay = np.asarray(decay, dtype=float)
    data = np.asarray(data, dtype=float)
    acc = np.zeros((data.shape[0] + 1, data.shape[1]))
    for i in range(data.shape[0]):
        acc[i + 1] = decay * acc[i] + data[i]
    return acc


def memory_sweep(lin, decay, w_as, w_s, synth, anal,
                 mem_on, mem_amp, mem_kappa, mem_code, mem_r0, mem_w,
                 imp_nodes, imp_gain, imp_code,
                 x0, dt, inner_tol, max_inner):
    """Time sweep of the discrete mild formula for exponential-memory maps.

    Slot 0 of the ``mem_*`` arrays is the neutral map, slot 1 the drift.
    Returns ``(left, right, g_values, f_values, status, quotient)``;
    ``status`` is 0 on success, otherwise 1 + the node where the implicit
    neutral solve failed.
    """
    n_nodes, n_modes = lin.shape
    left = np.zeros((n_nodes, n_modes))
    right = np.zeros((n_nodes, n_modes))
    g_val = np.zeros((n_nodes, n_modes))
    f_val = np.zeros((n_nodes, n_modes))
    imp_at = {int(node): k for k, node in enumerate(imp_nodes)}

    mem = [np.array(mem_r0[0], dtype=float), np.array(mem_r0[1], dtype=float)]
    shrink = [np.exp(-mem_kappa[0] * dt), np.exp(-mem_kappa[1] * dt)]

    def project(slot, i, r):
        if not mem_on[slot]:
            return np.zeros(n_modes)
        return anal @ (mem_amp[slot] * np.exp(-mem_kappa[slot] * i * dt) * r)

    left[0] = x0
    right[0] = x0
    g_val[0] = project(0, 0, mem[0])
    f_val[0] = project(1, 0, mem[1])
    phys = synth @ x0
    prev_code = [apply_code(mem_code[0], phys), apply_code(mem_code[1], phys)]
    acc = w_as * g_val[0] + w_s * f_val[0]
    quotient = 0.0

    for i in range(1, n_nodes):
        base = lin[i] + acc
        pre = [shrink[s] * mem[s] + mem_w[s, 0] * prev_code[s] for s in (0, 1)]

        if mem_on[0]:
            scale = mem_amp[0] * np.exp(-mem_kappa[0] * i * dt)
            const = scale * pre[0]
            coef = scale * mem_w[0, 1]

            def neutral(x):
                return anal @ (const + coef * apply_code(mem_code[0], synth @ x))
        else:
            def neutral(x):
                return np.zeros(n_modes)

        x = right[i - 1].copy()
        done = False
        quotient = 0.0
        last = -1.0
        for _ in range(max_inner):
            g = neutral(x)
            x_new = base + g
            diff = np.sqrt(np.sum((x_new - x) ** 2))
            if last > 0.0:
                quotient = diff / last
            last = diff
            x = x_new
            if diff <= inner_tol * (1.0 + np.sqrt(np.sum(x * x))):
                done = True
                break
        if not done:
            # damped retry
            x = right[i - 1].copy()
            for _ in range(max_inner):
                res = base + neutral(x) - x
                x = x + 0.5 * res
                if np.sqrt(np.sum(res * res)) <= inner_tol * (1.0 + np.sqrt(np.sum(x * x))):
                    done = True
                    break
            if not done:
                return left, right, g_val, f_val, i + 1, quotient
            g = neutral(x)
        g_val[i] = g
        left[i] = base + g

        phys = synth @ left[i]
        for s in (0, 1):
            mem[s] = pre[s] + mem_w[s, 1] * apply_code(mem_code[s], phys)
        f_val[i] = project(1, i, mem[1])

        jump = np.zeros(n_modes)
        if i in imp_at:
            k = imp_at[i]
            jump = imp_gain[k] * (anal @ apply_code(imp_code[k], phys))
        right[i] = left[i] + jump
        if i in imp_at:
            phys = synth @ right[i]
        prev_code = [apply_code(mem_code[0], phys), apply_code(mem_code[1], phys)]
        acc = decay * acc + w_as * g_val[i] + w_s * f_val[i] + decay * jump

    return left, right, g_val, f_val, 0, quotient
