# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels; see ``_pycore.py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, tanh, sin

cnp.import_array()

cdef enum:
    IDENTITY = 0
    TANH = 1
    SIN = 2


cdef inline double _code(int code, double v) nogil:
    if code == TANH:
        return tanh(v)
    if code == SIN:
        return sin(v)
    return v


def hosking(gamma, z):
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    zz = np.ascontiguousarray(np.atleast_2d(z), dtype=np.float64)
    cdef double[:, ::1] zv = zz
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t n_paths = zv.shape[0]
    out = np.empty((n_paths, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] phi = np.zeros(n, dtype=np.float64)
    cdef double[::1] tmp = np.zeros(n, dtype=np.float64)
    cdef double v = g[0], kappa, acc, sv
    cdef Py_ssize_t k, j, p
    with nogil:
        sv = sqrt(v)
        for p in range(n_paths):
            o[p, 0] = sv * zv[p, 0]
        for k in range(1, n):
            acc = g[k]
            for j in range(k - 1):
                acc -= phi[j] * g[k - 1 - j]
            kappa = acc / v
            for j in range(k - 1):
                tmp[j] = phi[j] - kappa * phi[k - 2 - j]
            for j in range(k - 1):
                phi[j] = tmp[j]
            phi[k - 1] = kappa
            v = v * (1.0 - kappa * kappa)
            sv = sqrt(v)
            for p in range(n_paths):
                acc = 0.0
                for j in range(k):
                    acc += phi[j] * o[p, k - 1 - j]
                o[p, k] = acc + sv * zv[p, k]
    return out


def exp_scan(decay, data):
    cdef double[::1] d = np.ascontiguousarray(decay, dtype=np.float64)
    cdef double[:, ::1] x = np.ascontiguousarray(data, dtype=np.float64)
    cdef Py_ssize_t J = x.shape[0], N = x.shape[1], i, n
    out = np.zeros((J + 1, N), dtype=np.float64)
    cdef double[:, ::1] acc = out
    with nogil:
        for i in range(J):
            for n in range(N):
                acc[i + 1, n] = d[n] * acc[i, n] + x[i, n]
    return out


cdef void _matvec(double[:, ::1] a, double[::1] x, double[::1] y) nogil:
    cdef Py_ssize_t r, c
    cdef double s
    for r in range(a.shape[0]):
        s = 0.0
        for c in range(a.shape[1]):
            s += a[r, c] * x[c]
        y[r] = s


def memory_sweep(lin, decay, w_as, w_s, synth, anal,
                 mem_on, mem_amp, mem_kappa, mem_code, mem_r0, mem_w,
                 imp_nodes, imp_gain, imp_code,
                 x0, double dt, double inner_tol, int max_inner):
    cdef double[:, ::1] L = np.ascontiguousarray(lin, dtype=np.float64)
    cdef double[::1] dec = np.ascontiguousarray(decay, dtype=np.float64)
    cdef double[::1] was = np.ascontiguousarray(w_as, dtype=np.float64)
    cdef double[::1] ws = np.ascontiguousarray(w_s, dtype=np.float64)
    cdef double[:, ::1] E = np.ascontiguousarray(synth, dtype=np.float64)
    cdef double[:, ::1] P = np.ascontiguousarray(anal, dtype=np.float64)
    cdef long[::1] on = np.ascontiguousarray(mem_on, dtype=np.int_)
    cdef double[:, ::1] amp = np.ascontiguousarray(mem_amp, dtype=np.float64)
    cdef double[::1] kap = np.ascontiguousarray(mem_kappa, dtype=np.float64)
    cdef long[::1] mcode = np.ascontiguousarray(mem_code, dtype=np.int_)
    cdef double[:, ::1] mem = np.array(mem_r0, dtype=np.float64, order="C")
    cdef double[:, ::1] mw = np.ascontiguousarray(mem_w, dtype=np.float64)
    cdef long[::1] inodes = np.ascontiguousarray(imp_nodes, dtype=np.int_)
    cdef double[::1] igain = np.ascontiguousarray(imp_gain, dtype=np.float64)
    cdef long[::1] icode = np.ascontiguousarray(imp_code, dtype=np.int_)
    cdef double[::1] xinit = np.ascontiguousarray(x0, dtype=np.float64)

    cdef Py_ssize_t n_nodes = L.shape[0], N = L.shape[1], M = E.shape[0]
    cdef Py_ssize_t n_imp = inodes.shape[0]
    left_a = np.zeros((n_nodes, N))
    right_a = np.zeros((n_nodes, N))
    g_a = np.zeros((n_nodes, N))
    f_a = np.zeros((n_nodes, N))
    cdef double[:, ::1] left = left_a, right = right_a, gv = g_a, fv = f_a

    cdef double[::1] acc = np.zeros(N), base = np.zeros(N), x = np.zeros(N)
    cdef double[::1] xn = np.zeros(N), gcur = np.zeros(N), jump = np.zeros(N)
    cdef double[::1] phys = np.zeros(M), work = np.zeros(M)
    cdef double[:, ::1] pre = np.zeros((2, M)), prev = np.zeros((2, M))
    cdef double[::1] const = np.zeros(M)
    cdef double shrink0 = exp(-kap[0] * dt), shrink1 = exp(-kap[1] * dt)
    cdef double shrink, scale, coef, diff, last, quotient = 0.0, nx, nr
    cdef Py_ssize_t i, n, q, s, k, it, imp_k
    cdef bint done
    cdef int status = 0

    with nogil:
        for n in range(N):
            left[0, n] = xinit[n]
            right[0, n] = xinit[n]
        for s in range(2):
            if on[s]:
                for q in range(M):
                    work[q] = amp[s, q] * mem[s, q]
                if s == 0:
                    _matvec(P, work, gv[0])
                else:
                    _matvec(P, work, fv[0])
        _matvec(E, xinit, phys)
        for s in range(2):
            for q in range(M):
                prev[s, q] = _code(mcode[s], phys[q])
        for n in range(N):
            acc[n] = was[n] * gv[0, n] + ws[n] * fv[0, n]

        for i in range(1, n_nodes):
            for n in range(N):
                base[n] = L[i, n] + acc[n]
            for s in range(2):
                shrink = shrink0 if s == 0 else shrink1
                for q in range(M):
                    pre[s, q] = shrink * mem[s, q] + mw[s, 0] * prev[s, q]

            scale = exp(-kap[0] * i * dt)
            coef = scale * mw[0, 1]
            for q in range(M):
                const[q] = amp[0, q] * scale * pre[0, q]

            for n in range(N):
                x[n] = right[i - 1, n]
            done = False
            last = -1.0
            quotient = 0.0
            for it in range(max_inner):
                # gcur = neutral(x)
                if on[0]:
                    _matvec(E, x, phys)
                    for q in range(M):
                        work[q] = const[q] + amp[0, q] * coef * _code(mcode[0], phys[q])
                    _matvec(P, work, gcur)
                else:
                    for n in range(N):
                        gcur[n] = 0.0
                diff = 0.0
                nx = 0.0
                for n in range(N):
                    xn[n] = base[n] + gcur[n]
                    diff += (xn[n] - x[n]) * (xn[n] - x[n])
                    nx += xn[n] * xn[n]
                    x[n] = xn[n]
                diff = sqrt(diff)
                if last > 0.0:
                    quotient = diff / last
                last = diff
                if diff <= inner_tol * (1.0 + sqrt(nx)):
                    done = True
                    break
            if not done:
                for n in range(N):
                    x[n] = right[i - 1, n]
                for it in range(max_inner):
                    if on[0]:
                        _matvec(E, x, phys)
                        for q in range(M):
                            work[q] = const[q] + amp[0, q] * coef * _code(mcode[0], phys[q])
                        _matvec(P, work, gcur)
                    else:
                        for n in range(N):
                            gcur[n] = 0.0
                    nr = 0.0
                    nx = 0.0
                    for n in range(N):
                        diff = base[n] + gcur[n] - x[n]
                        nr += diff * diff
                        x[n] = x[n] + 0.5 * diff
                        nx += x[n] * x[n]
                    if sqrt(nr) <= inner_tol * (1.0 + sqrt(nx)):
                        done = True
                        break
                if not done:
                    status = <int>(i + 1)
                    break
                if on[0]:
                    _matvec(E, x, phys)
                    for q in range(M):
                        work[q] = const[q] + amp[0, q] * coef * _code(mcode[0], phys[q])
                    _matvec(P, work, gcur)
                else:
                    for n in range(N):
                        gcur[n] = 0.0
            for n in range(N):
                gv[i, n] = gcur[n]
                left[i, n] = base[n] + gcur[n]

            _matvec(E, left[i], phys)
            for s in range(2):
                for q in range(M):
                    mem[s, q] = pre[s, q] + mw[s, 1] * _code(mcode[s], phys[q])
            if on[1]:
                scale = exp(-kap[1] * i * dt)
                for q in range(M):
                    work[q] = amp[1, q] * scale * mem[1, q]
                _matvec(P, work, fv[i])

            imp_k = -1
            for k in range(n_imp):
                if inodes[k] == i:
                    imp_k = k
            for n in range(N):
                jump[n] = 0.0
            if imp_k >= 0:
                for q in range(M):
                    work[q] = _code(icode[imp_k], phys[q])
                _matvec(P, work, jump)
                for n in range(N):
                    jump[n] = igain[imp_k] * jump[n]
            for n in range(N):
                right[i, n] = left[i, n] + jump[n]
            if imp_k >= 0:
                _matvec(E, right[i], phys)
            for s in range(2):
                for q in range(M):
                    prev[s, q] = _code(mcode[s], phys[q])
            for n in range(N):
                acc[n] = dec[n] * acc[n] + was[n] * gv[i, n] + ws[n] * fv[i, n] + dec[n] * jump[n]

    return left_a, right_a, g_a, f_a, status, quotient
