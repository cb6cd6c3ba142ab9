"""Vectorized numpy kernels: whole batches of points per operation.

Jets here are ``(ncoef, npts)`` arrays so the truncated products in
:mod:`circlebif.jet` apply unchanged.
"""
import math

import numpy as np

from ..jet import cmul, csincos
from ._ops import BLEND, DUP, FLOW, FOURIER, INVERSE, ROT, SWAP

TWO_PI = 2.0 * math.pi


def _fsum(modes, m0, mc, pv, y):
    acc = np.zeros_like(y)
    for k, ps, pc in modes[m0:m0 + mc]:
        arg = TWO_PI * k * y
        acc += pv[ps] * np.sin(arg) + pv[pc] * np.cos(arg)
    return acc


def _dfsum(modes, m0, mc, pv, y):
    acc = np.zeros_like(y)
    for k, ps, pc in modes[m0:m0 + mc]:
        w = TWO_PI * k
        acc += w * (pv[ps] * np.cos(w * y) - pv[pc] * np.sin(w * y))
    return acc


def _flow_value(modes, m0, mc, pv, delta, steps, y):
    h = delta / steps
    for _ in range(steps):
        k1 = _fsum(modes, m0, mc, pv, y)
        k2 = _fsum(modes, m0, mc, pv, y + 0.5 * h * k1)
        k3 = _fsum(modes, m0, mc, pv, y + 0.5 * h * k2)
        k4 = _fsum(modes, m0, mc, pv, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _inverse_value(modes, m0, mc, pv, off, y):
    amp = sum(abs(pv[ps]) + abs(pv[pc]) for _, ps, pc in modes[m0:m0 + mc])
    lo = y - off - amp - 1e-12
    hi = y - off + amp + 1e-12
    z = y - off - _fsum(modes, m0, mc, pv, y - off)
    z = np.where((z <= lo) | (z >= hi), 0.5 * (lo + hi), z)
    for _ in range(200):
        f = z + off + _fsum(modes, m0, mc, pv, z) - y
        hi = np.where(f > 0.0, z, hi)
        lo = np.where(f < 0.0, z, lo)
        d = 1.0 + _dfsum(modes, m0, mc, pv, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            znew = np.where(d > 0.0, z - f / d, 0.5 * (lo + hi))
        bad = ~((lo < znew) & (znew < hi))
        znew = np.where(bad, 0.5 * (lo + hi), znew)
        znew = np.where(f == 0.0, z, znew)
        done = np.abs(znew - z) <= 1e-16 * np.maximum(1.0, np.abs(z))
        z = znew
        if np.all(done):
            break
    return z


def _apply_value(code, modes, fdata, pv, x):
    stack = [x]
    for op, a, b, c, d in code:
        if op == ROT:
            stack[-1] = stack[-1] + pv[a]
        elif op == FOURIER:
            y = stack[-1]
            stack[-1] = y + pv[a] + _fsum(modes, b, c, pv, y)
        elif op == FLOW:
            stack[-1] = _flow_value(modes, a, b, pv, fdata[c], d, stack[-1])
        elif op == INVERSE:
            stack[-1] = _inverse_value(modes, b, c, pv, pv[a], stack[-1])
        elif op == DUP:
            stack.append(stack[-1].copy())
        elif op == SWAP:
            stack[-1], stack[-2] = stack[-2], stack[-1]
        elif op == BLEND:
            y1 = stack.pop()
            y0 = stack.pop()
            stack.append(y0 + pv[a] * (y1 - y0))
    return stack[0]


def iterate_values(code, modes, fdata, depth, pv, xs, n):
    y = np.array(xs, dtype=np.float64, copy=True)
    for _ in range(n):
        fl = np.floor(y)
        y = _apply_value(code, modes, fdata, pv, y - fl) + fl
    return y


# jets

def _jfsum(modes, m0, mc, pj, Y, table):
    acc = np.zeros_like(Y)
    for k, ps, pc in modes[m0:m0 + mc]:
        sn, cs = csincos(TWO_PI * k * Y, table)
        if np.any(pj[ps]):
            acc += cmul(pj[ps][:, None], sn, table)
        if np.any(pj[pc]):
            acc += cmul(pj[pc][:, None], cs, table)
    return acc


def _jflow(modes, m0, mc, pj, delta, steps, Y, table):
    h = delta / steps
    for _ in range(steps):
        k1 = _jfsum(modes, m0, mc, pj, Y, table)
        k2 = _jfsum(modes, m0, mc, pj, Y + 0.5 * h * k1, table)
        k3 = _jfsum(modes, m0, mc, pj, Y + 0.5 * h * k2, table)
        k4 = _jfsum(modes, m0, mc, pj, Y + h * k3, table)
        Y = Y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def _jinverse(modes, m0, mc, pv, pj, off, X, table):
    z0 = _inverse_value(modes, m0, mc, pv, pv[off], X[0])
    d0 = 1.0 + _dfsum(modes, m0, mc, pv, z0)
    Z = np.zeros_like(X)
    Z[0] = z0
    for _ in range(4):
        E = _jfsum(modes, m0, mc, pj, Z, table) + Z + pj[off][:, None] - X
        Z = Z - E / d0
    return Z


def _apply_jet(code, modes, fdata, pv, pj, X, table):
    stack = [X]
    for op, a, b, c, d in code:
        if op == ROT:
            stack[-1] = stack[-1] + pj[a][:, None]
        elif op == FOURIER:
            Y = stack[-1]
            stack[-1] = Y + pj[a][:, None] + _jfsum(modes, b, c, pj, Y, table)
        elif op == FLOW:
            stack[-1] = _jflow(modes, a, b, pj, fdata[c], d, stack[-1], table)
        elif op == INVERSE:
            stack[-1] = _jinverse(modes, b, c, pv, pj, a, stack[-1], table)
        elif op == DUP:
            stack.append(stack[-1].copy())
        elif op == SWAP:
            stack[-1], stack[-2] = stack[-2], stack[-1]
        elif op == BLEND:
            y1 = stack.pop()
            y0 = stack.pop()
            stack.append(y0 + cmul(pj[a][:, None], y1 - y0, table))
    return stack[0]


def iterate_jets(code, modes, fdata, depth, pv, pj, xs, n, table):
    xs = np.asarray(xs, dtype=np.float64)
    X = np.zeros((table.size, xs.shape[0]))
    X[0] = xs
    xi = table.index(1, 0, 0)
    if xi >= 0:
        X[xi] = 1.0
    for _ in range(n):
        fl = np.floor(X[0])
        X[0] -= fl
        X = _apply_jet(code, modes, fdata, pv, pj, X, table)
        X[0] += fl
    return np.ascontiguousarray(X.T)
