"""numba kernels: one point at a time, compiled loops."""
import math

import numpy as np
from numba import config, njit, prange

from ._ops import (BLEND, DUP, FLOW, FOURIER, INVERSE, N_TEMPS, ROT, SWAP, T_ARG, T_COS, T_E,
                   T_K, T_PROD, T_SIN, T_U, T_U2, T_U3, T_V, T_Y, T_YT, T_Z)

# the bundled TBB is too old for numba; skip it instead of warning
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _fsum(modes, m0, mc, pv, y):
    acc = 0.0
    for m in range(m0, m0 + mc):
        arg = TWO_PI * modes[m, 0] * y
        a, b = pv[modes[m, 1]], pv[modes[m, 2]]
        # single-phase modes are common (flow fields); skip the idle half
        if a != 0.0:
            acc += a * math.sin(arg)
        if b != 0.0:
            acc += b * math.cos(arg)
    return acc


@njit(cache=True, inline="always")
def _dfsum(modes, m0, mc, pv, y):
    acc = 0.0
    for m in range(m0, m0 + mc):
        w = TWO_PI * modes[m, 0]
        acc += w * (pv[modes[m, 1]] * math.cos(w * y) - pv[modes[m, 2]] * math.sin(w * y))
    return acc


@njit(cache=True, inline="always")
def _flow_value(modes, m0, mc, pv, delta, steps, y):
    h = delta / steps
    for _ in range(steps):
        k1 = _fsum(modes, m0, mc, pv, y)
        k2 = _fsum(modes, m0, mc, pv, y + 0.5 * h * k1)
        k3 = _fsum(modes, m0, mc, pv, y + 0.5 * h * k2)
        k4 = _fsum(modes, m0, mc, pv, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


@njit(cache=True, inline="always")
def _inverse_value(modes, m0, mc, pv, off, y):
    amp = 0.0
    for m in range(m0, m0 + mc):
        amp += abs(pv[modes[m, 1]]) + abs(pv[modes[m, 2]])
    lo = y - off - amp - 1e-12
    hi = y - off + amp + 1e-12
    z = y - off - _fsum(modes, m0, mc, pv, y - off)
    if z <= lo or z >= hi:
        z = 0.5 * (lo + hi)
    for _ in range(200):
        f = z + off + _fsum(modes, m0, mc, pv, z) - y
        if f == 0.0:
            return z
        if f > 0.0:
            hi = z
        else:
            lo = z
        d = 1.0 + _dfsum(modes, m0, mc, pv, z)
        znew = z - f / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < znew < hi):
            znew = 0.5 * (lo + hi)
        if abs(znew - z) <= 1e-16 * max(1.0, abs(z)) or hi - lo <= 1e-16 * max(1.0, abs(z)):
            return znew
        z = znew
    return z


@njit(cache=True, inline="always")
def _apply_value(code, modes, fdata, pv, x, stack):
    # the top of the stack lives in ``y``; ``stack`` only holds spilled entries
    sp = 0
    y = x
    for r in range(code.shape[0]):
        op = code[r, 0]
        if op == ROT:
            y += pv[code[r, 1]]
        elif op == FOURIER:
            y = y + pv[code[r, 1]] + _fsum(modes, code[r, 2], code[r, 3], pv, y)
        elif op == FLOW:
            y = _flow_value(modes, code[r, 1], code[r, 2], pv, fdata[code[r, 3]], code[r, 4], y)
        elif op == INVERSE:
            y = _inverse_value(modes, code[r, 2], code[r, 3], pv, pv[code[r, 1]], y)
        elif op == DUP:
            stack[sp] = y
            sp += 1
        elif op == SWAP:
            t = stack[sp - 1]
            stack[sp - 1] = y
            y = t
        elif op == BLEND:
            sp -= 1
            lower = stack[sp]
            y = lower + pv[code[r, 1]] * (y - lower)
    return y


@njit(cache=True, inline="always")
def _orbit(code, modes, fdata, pv, x, n, stack):
    y = x
    for _ in range(n):
        fl = math.floor(y)
        y = _apply_value(code, modes, fdata, pv, y - fl, stack) + fl
    return y


@njit(cache=True)
def _iterate_values_serial(code, modes, fdata, depth, pv, xs, n):
    out = np.empty(xs.shape[0])
    stack = np.empty(depth)
    for i in range(xs.shape[0]):
        out[i] = _orbit(code, modes, fdata, pv, xs[i], n, stack)
    return out


@njit(cache=True, parallel=True)
def _iterate_values_parallel(code, modes, fdata, depth, pv, xs, n):
    out = np.empty(xs.shape[0])
    for i in prange(xs.shape[0]):
        stack = np.empty(depth)
        out[i] = _orbit(code, modes, fdata, pv, xs[i], n, stack)
    return out


def iterate_values(code, modes, fdata, depth, pv, xs, n):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.shape[0] >= 2048:
        return _iterate_values_parallel(code, modes, fdata, depth, pv, xs, n)
    return _iterate_values_serial(code, modes, fdata, depth, pv, xs, n)


# jets

@njit(cache=True)
def _jmul(a, b, out, ma, mb, mc):
    for i in range(out.shape[0]):
        out[i] = 0.0
    for p in range(ma.shape[0]):
        out[mc[p]] += a[ma[p]] * b[mb[p]]


@njit(cache=True)
def _jsincos(a, sin_out, cos_out, W, t0, ma, mb, mc):
    u = W[t0 + T_U]
    u2 = W[t0 + T_U2]
    u3 = W[t0 + T_U3]
    n = a.shape[0]
    for i in range(n):
        u[i] = a[i]
    u[0] = 0.0
    _jmul(u, u, u2, ma, mb, mc)
    _jmul(u2, u, u3, ma, mb, mc)
    s0 = math.sin(a[0])
    c0 = math.cos(a[0])
    for i in range(n):
        odd = u[i] - u3[i] / 6.0
        even = -0.5 * u2[i]
        sin_out[i] = s0 * even + c0 * odd
        cos_out[i] = c0 * even - s0 * odd
    sin_out[0] += s0
    cos_out[0] += c0


@njit(cache=True)
def _is_zero(row):
    for i in range(row.shape[0]):
        if row[i] != 0.0:
            return False
    return True


@njit(cache=True)
def _jfsum(modes, m0, mc, pj, Y, out, W, t0, ma, mb, mc_):
    n = out.shape[0]
    for i in range(n):
        out[i] = 0.0
    arg = W[t0 + T_ARG]
    sn = W[t0 + T_SIN]
    cs = W[t0 + T_COS]
    prod = W[t0 + T_PROD]
    for m in range(m0, m0 + mc):
        w = TWO_PI * modes[m, 0]
        for i in range(n):
            arg[i] = w * Y[i]
        _jsincos(arg, sn, cs, W, t0, ma, mb, mc_)
        ps = pj[modes[m, 1]]
        pc = pj[modes[m, 2]]
        if not _is_zero(ps):
            _jmul(ps, sn, prod, ma, mb, mc_)
            for i in range(n):
                out[i] += prod[i]
        if not _is_zero(pc):
            _jmul(pc, cs, prod, ma, mb, mc_)
            for i in range(n):
                out[i] += prod[i]


@njit(cache=True)
def _jflow(modes, m0, mc, pj, delta, steps, X, W, t0, ma, mb, mc_):
    n = X.shape[0]
    h = delta / steps
    Y = W[t0 + T_Y]
    K = W[t0 + T_K]
    YT = W[t0 + T_YT]
    V = W[t0 + T_V]
    for i in range(n):
        Y[i] = X[i]
    for _ in range(steps):
        _jfsum(modes, m0, mc, pj, Y, V, W, t0, ma, mb, mc_)
        for i in range(n):
            K[i] = V[i]
            YT[i] = Y[i] + 0.5 * h * V[i]
        _jfsum(modes, m0, mc, pj, YT, V, W, t0, ma, mb, mc_)
        for i in range(n):
            K[i] += 2.0 * V[i]
            YT[i] = Y[i] + 0.5 * h * V[i]
        _jfsum(modes, m0, mc, pj, YT, V, W, t0, ma, mb, mc_)
        for i in range(n):
            K[i] += 2.0 * V[i]
            YT[i] = Y[i] + h * V[i]
        _jfsum(modes, m0, mc, pj, YT, V, W, t0, ma, mb, mc_)
        for i in range(n):
            Y[i] += h / 6.0 * (K[i] + V[i])
    for i in range(n):
        X[i] = Y[i]


@njit(cache=True)
def _jinverse(modes, m0, mc, pv, pj, off, X, W, t0, ma, mb, mc_):
    # chord iteration with the slope frozen at the base point; each pass
    # fixes one more order, so four passes settle every degree <= 3 term
    n = X.shape[0]
    z0 = _inverse_value(modes, m0, mc, pv, pv[off], X[0])
    d0 = 1.0 + _dfsum(modes, m0, mc, pv, z0)
    Z = W[t0 + T_Z]
    E = W[t0 + T_E]
    for i in range(n):
        Z[i] = 0.0
    Z[0] = z0
    offj = pj[off]
    for _ in range(4):
        _jfsum(modes, m0, mc, pj, Z, E, W, t0, ma, mb, mc_)
        for i in range(n):
            Z[i] -= (E[i] + Z[i] + offj[i] - X[i]) / d0
    for i in range(n):
        X[i] = Z[i]


@njit(cache=True)
def _apply_jet(code, modes, fdata, pv, pj, W, depth, ma, mb, mc):
    t0 = depth
    n = W.shape[1]
    sp = 0
    for r in range(code.shape[0]):
        op = code[r, 0]
        if op == ROT:
            p = pj[code[r, 1]]
            for i in range(n):
                W[sp, i] += p[i]
        elif op == FOURIER:
            V = W[t0 + T_V]
            _jfsum(modes, code[r, 2], code[r, 3], pj, W[sp], V, W, t0, ma, mb, mc)
            p = pj[code[r, 1]]
            for i in range(n):
                W[sp, i] += V[i] + p[i]
        elif op == FLOW:
            _jflow(modes, code[r, 1], code[r, 2], pj, fdata[code[r, 3]], code[r, 4],
                   W[sp], W, t0, ma, mb, mc)
        elif op == INVERSE:
            _jinverse(modes, code[r, 2], code[r, 3], pv, pj, code[r, 1], W[sp], W, t0, ma, mb, mc)
        elif op == DUP:
            for i in range(n):
                W[sp + 1, i] = W[sp, i]
            sp += 1
        elif op == SWAP:
            for i in range(n):
                t = W[sp, i]
                W[sp, i] = W[sp - 1, i]
                W[sp - 1, i] = t
        elif op == BLEND:
            D = W[t0 + T_ARG]
            P = W[t0 + T_PROD]
            for i in range(n):
                D[i] = W[sp, i] - W[sp - 1, i]
            _jmul(pj[code[r, 1]], D, P, ma, mb, mc)
            for i in range(n):
                W[sp - 1, i] += P[i]
            sp -= 1


@njit(cache=True)
def _jet_orbit(code, modes, fdata, depth, pv, pj, x, n, ma, mb, mc, xidx, W, out):
    for i in range(W.shape[1]):
        W[0, i] = 0.0
    W[0, 0] = x
    if xidx >= 0:
        W[0, xidx] = 1.0
    for _ in range(n):
        fl = math.floor(W[0, 0])
        W[0, 0] -= fl
        _apply_jet(code, modes, fdata, pv, pj, W, depth, ma, mb, mc)
        W[0, 0] += fl
    for i in range(W.shape[1]):
        out[i] = W[0, i]


@njit(cache=True)
def _iterate_jets_serial(code, modes, fdata, depth, pv, pj, xs, n, ma, mb, mc, xidx):
    ncoef = pj.shape[1]
    out = np.empty((xs.shape[0], ncoef))
    W = np.zeros((depth + N_TEMPS, ncoef))
    for i in range(xs.shape[0]):
        _jet_orbit(code, modes, fdata, depth, pv, pj, xs[i], n, ma, mb, mc, xidx, W, out[i])
    return out


@njit(cache=True, parallel=True)
def _iterate_jets_parallel(code, modes, fdata, depth, pv, pj, xs, n, ma, mb, mc, xidx):
    ncoef = pj.shape[1]
    out = np.empty((xs.shape[0], ncoef))
    for i in prange(xs.shape[0]):
        W = np.zeros((depth + N_TEMPS, ncoef))
        _jet_orbit(code, modes, fdata, depth, pv, pj, xs[i], n, ma, mb, mc, xidx, W, out[i])
    return out


def iterate_jets(code, modes, fdata, depth, pv, pj, xs, n, table):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    pj = np.ascontiguousarray(pj, dtype=np.float64)
    args = (code, modes, fdata, depth, pv, pj, xs, n, table.mul_a, table.mul_b, table.mul_c,
            table.index(1, 0, 0))
    if xs.shape[0] >= 512:
        return _iterate_jets_parallel(*args)
    return _iterate_jets_serial(*args)
