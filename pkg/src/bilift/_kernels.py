"""Hot numeric kernels with twin numba / pure-numpy implementations.

The package runs its inner loops (matrix exponentials in bulk, RK4 sweeps
over compiled expression tables) either through ``numba.njit`` or through a
pure-numpy path.  Selection happens once at import time:

* default: numba when importable,
* ``BILIFT_DISABLE_NUMBA=1`` in the environment forces the numpy path.

``benchmarks/bench_kernels.py`` times one path against the other.  Both
paths produce the same values up to floating-point roundoff; the scalar
sources below are written in nopython-compatible style so the same code
runs compiled or interpreted, while the ``*_numpy`` variants vectorize
across the batch axis instead.
"""

from __future__ import annotations

import math
import os

import numpy as np

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def _env_disabled() -> bool:
    return os.environ.get("BILIFT_DISABLE_NUMBA", "").strip().lower() in (
        "1",
        "true",
        "yes",
    )


try:
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _env_disabled()


def _prange(count):
    return range(count)


if USE_NUMBA:
    _prange = numba.prange


# ---------------------------------------------------------------------------
# matrix exponential, Pade degree 13 with scaling and squaring
# ---------------------------------------------------------------------------


def _mm(a, b, out):
    """out = a @ b for small square matrices, no BLAS dispatch."""
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def _gauss_jordan(w, rhs):
    """Solve w X = rhs in place (partial pivoting); rhs becomes X."""
    d = w.shape[0]
    for col in range(d):
        piv = col
        best = abs(w[col, col])
        for i in range(col + 1, d):
            mag = abs(w[i, col])
            if mag > best:
                best = mag
                piv = i
        if piv != col:
            for j in range(d):
                w[col, j], w[piv, j] = w[piv, j], w[col, j]
                rhs[col, j], rhs[piv, j] = rhs[piv, j], rhs[col, j]
        inv = 1.0 / w[col, col]
        for j in range(d):
            w[col, j] *= inv
            rhs[col, j] *= inv
        for i in range(d):
            if i != col:
                f = w[i, col]
                if f != 0.0:
                    for j in range(d):
                        w[i, j] -= f * w[col, j]
                        rhs[i, j] -= f * rhs[col, j]
    return rhs


def _expm_single_impl(a):
    d = a.shape[0]
    norm = 0.0
    for j in range(d):
        col = 0.0
        for i in range(d):
            col += abs(a[i, j])
        if col > norm:
            norm = col
    s = 0
    if norm > _THETA13:
        s = int(math.ceil(math.log2(norm / _THETA13)))
    sc = a / (2.0 ** s)
    a2 = _mm(sc, sc, np.empty((d, d)))
    a4 = _mm(a2, a2, np.empty((d, d)))
    a6 = _mm(a2, a4, np.empty((d, d)))
    u = np.empty((d, d))
    v = np.empty((d, d))
    tmp = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            tmp[i, j] = (
                _PADE13[13] * a6[i, j] + _PADE13[11] * a4[i, j] + _PADE13[9] * a2[i, j]
            )
    _mm(a6, tmp, u)
    for i in range(d):
        for j in range(d):
            u[i, j] += (
                _PADE13[7] * a6[i, j] + _PADE13[5] * a4[i, j] + _PADE13[3] * a2[i, j]
            )
        u[i, i] += _PADE13[1]
    _mm(sc, u.copy(), u)
    for i in range(d):
        for j in range(d):
            tmp[i, j] = (
                _PADE13[12] * a6[i, j] + _PADE13[10] * a4[i, j] + _PADE13[8] * a2[i, j]
            )
    _mm(a6, tmp, v)
    for i in range(d):
        for j in range(d):
            v[i, j] += (
                _PADE13[6] * a6[i, j] + _PADE13[4] * a4[i, j] + _PADE13[2] * a2[i, j]
            )
        v[i, i] += _PADE13[0]
    w = np.empty((d, d))
    r = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            w[i, j] = v[i, j] - u[i, j]
            r[i, j] = v[i, j] + u[i, j]
    _gauss_jordan(w, r)
    for _ in range(s):
        r = _mm(r, r, np.empty((d, d)))
    return r


def _expm_many_loop_impl(ms):
    out = np.empty_like(ms)
    for k in range(ms.shape[0]):
        out[k] = _expm_single_impl(ms[k])
    return out


def _expm_many_numpy(ms):
    """Vectorized scaling-and-squaring over a (K, d, d) stack."""
    ms = np.asarray(ms, dtype=np.float64)
    k, d, _ = ms.shape
    if k == 0:
        return ms.copy()
    norms = np.abs(ms).sum(axis=1).max(axis=1)
    s = np.zeros(k, dtype=np.int64)
    big = norms > _THETA13
    s[big] = np.ceil(np.log2(norms[big] / _THETA13)).astype(np.int64)
    sc = ms / (2.0 ** s)[:, None, None]
    a2 = sc @ sc
    a4 = a2 @ a2
    a6 = a2 @ a4
    ident = np.broadcast_to(np.eye(d), ms.shape)
    u = sc @ (
        a6 @ (_PADE13[13] * a6 + _PADE13[11] * a4 + _PADE13[9] * a2)
        + _PADE13[7] * a6
        + _PADE13[5] * a4
        + _PADE13[3] * a2
        + _PADE13[1] * ident
    )
    v = (
        a6 @ (_PADE13[12] * a6 + _PADE13[10] * a4 + _PADE13[8] * a2)
        + _PADE13[6] * a6
        + _PADE13[4] * a4
        + _PADE13[2] * a2
        + _PADE13[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)
    for step in range(int(s.max())):
        mask = step < s
        r[mask] = r[mask] @ r[mask]
    return r


# ---------------------------------------------------------------------------
# expression-table evaluation and RK4 sweeps
# ---------------------------------------------------------------------------


def _rhs_impl(x, u, out, coeff, comp, field, expon, trig_kind, trig_lin,
              trig_off, has_exp, exp_lin, exp_off):
    n = x.shape[0]
    for j in range(out.shape[0]):
        out[j] = 0.0
    for k in range(coeff.shape[0]):
        v = coeff[k]
        for l in range(n):
            e = expon[k, l]
            if e == 1:
                v *= x[l]
            elif e > 1:
                v *= x[l] ** e
        tk = trig_kind[k]
        if tk > 0:
            arg = trig_off[k]
            for l in range(n):
                arg += trig_lin[k, l] * x[l]
            v *= math.sin(arg) if tk == 1 else math.cos(arg)
        if has_exp[k] == 1:
            arg = exp_off[k]
            for l in range(n):
                arg += exp_lin[k, l] * x[l]
            v *= math.exp(arg)
        fi = field[k]
        if fi > 0:
            v *= u[fi - 1]
        out[comp[k]] += v
    return out


def _rk4_const_batch_impl(x0s, us, dt, steps, coeff, comp, field, expon,
                          trig_kind, trig_lin, trig_off, has_exp, exp_lin,
                          exp_off):
    count, n = x0s.shape
    out = np.empty_like(x0s)
    for t in _prange(count):
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        xs = np.empty(n)
        x = x0s[t].copy()
        u = us[t]
        for _ in range(steps):
            _rhs_impl(x, u, k1, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k1[l]
            _rhs_impl(xs, u, k2, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k2[l]
            _rhs_impl(xs, u, k3, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + dt * k3[l]
            _rhs_impl(xs, u, k4, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                x[l] += dt * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]) / 6.0
        out[t] = x
    return out


def _rk4_record_impl(x0, seg_values, seg_steps, seg_dts, coeff, comp, field,
                     expon, trig_kind, trig_lin, trig_off, has_exp, exp_lin,
                     exp_off):
    n = x0.shape[0]
    total = 0
    for si in range(seg_steps.shape[0]):
        total += seg_steps[si]
    states = np.empty((total + 1, n))
    states[0] = x0
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xs = np.empty(n)
    x = x0.copy()
    row = 1
    for si in range(seg_steps.shape[0]):
        u = seg_values[si]
        dt = seg_dts[si]
        for _ in range(seg_steps[si]):
            _rhs_impl(x, u, k1, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k1[l]
            _rhs_impl(xs, u, k2, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k2[l]
            _rhs_impl(xs, u, k3, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                xs[l] = x[l] + dt * k3[l]
            _rhs_impl(xs, u, k4, coeff, comp, field, expon, trig_kind,
                      trig_lin, trig_off, has_exp, exp_lin, exp_off)
            for l in range(n):
                x[l] += dt * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]) / 6.0
            states[row] = x
            row += 1
    return states


def _closed_loop_impl(x0, dt, steps, b_stack, d_stack, p_mat, k_gain,
                      sys_tab, lift_tab):
    n = x0.shape[0]
    r = p_mat.shape[0]
    m = b_stack.shape[0]
    states = np.empty((steps + 1, n))
    vseries = np.empty(steps + 1)
    z = np.empty(r)
    u = np.empty(m)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xs = np.empty(n)

    def feedback(xloc, zbuf, ubuf):
        _rhs_impl(xloc, ubuf, zbuf, *lift_tab)  # lift table ignores u
        pz = p_mat @ zbuf
        for i in range(m):
            si = b_stack[i] @ zbuf + d_stack[i]
            acc = 0.0
            for j in range(r):
                acc += si[j] * pz[j]
            ubuf[i] = acc
        ub = k_gain @ ubuf[:m]
        for i in range(m):
            ubuf[i] = -ub[i]

    states[0] = x0
    x = x0.copy()
    feedback(x, z, u)
    acc = 0.0
    pz = p_mat @ z
    for j in range(r):
        acc += z[j] * pz[j]
    vseries[0] = acc
    ok = True
    for step in range(steps):
        if ok:
            feedback(x, z, u)
            _rhs_impl(x, u, k1, *sys_tab)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k1[l]
            feedback(xs, z, u)
            _rhs_impl(xs, u, k2, *sys_tab)
            for l in range(n):
                xs[l] = x[l] + 0.5 * dt * k2[l]
            feedback(xs, z, u)
            _rhs_impl(xs, u, k3, *sys_tab)
            for l in range(n):
                xs[l] = x[l] + dt * k3[l]
            feedback(xs, z, u)
            _rhs_impl(xs, u, k4, *sys_tab)
            for l in range(n):
                x[l] += dt * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]) / 6.0
            bound = 0.0
            for l in range(n):
                bound = max(bound, abs(x[l]))
            if not np.isfinite(bound) or bound > 1e12:
                ok = False
        states[step + 1] = x if ok else np.full(n, np.nan)
        if ok:
            feedback(x, z, u)
            acc = 0.0
            pz = p_mat @ z
            for j in range(r):
                acc += z[j] * pz[j]
            vseries[step + 1] = acc
        else:
            vseries[step + 1] = np.nan
    return states, vseries


# ---------------------------------------------------------------------------
# vectorized numpy fallbacks for batch work
# ---------------------------------------------------------------------------


def eval_table_batch(xs, us, table) -> np.ndarray:
    """Evaluate a table at a batch of points, vectorized over the batch."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    count = xs.shape[0]
    (coeff, comp, field, expon, trig_kind, trig_lin, trig_off, has_exp,
     exp_lin, exp_off) = table.arrays()
    out = np.zeros((count, table.n_out))
    for k in range(coeff.shape[0]):
        v = np.full(count, coeff[k])
        for l in range(table.n):
            e = expon[k, l]
            if e:
                v = v * xs[:, l] ** e
        tk = trig_kind[k]
        if tk:
            arg = xs @ trig_lin[k] + trig_off[k]
            v = v * (np.sin(arg) if tk == 1 else np.cos(arg))
        if has_exp[k]:
            v = v * np.exp(xs @ exp_lin[k] + exp_off[k])
        if field[k] > 0:
            v = v * np.asarray(us)[:, field[k] - 1]
        out[:, comp[k]] += v
    return out


def _rk4_const_batch_numpy(x0s, us, dt, steps, table):
    x = np.array(x0s, dtype=float)
    for _ in range(steps):
        k1 = eval_table_batch(x, us, table)
        k2 = eval_table_batch(x + 0.5 * dt * k1, us, table)
        k3 = eval_table_batch(x + 0.5 * dt * k2, us, table)
        k4 = eval_table_batch(x + dt * k3, us, table)
        x = x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return x


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if USE_NUMBA:
    _njit = numba.njit(cache=True)
    # shadow the scalar sources so jitted callers resolve the jitted callees
    _mm = _njit(_mm)
    _gauss_jordan = _njit(_gauss_jordan)
    _rhs_impl = _njit(_rhs_impl)
    _expm_single_impl = _njit(_expm_single_impl)
    _expm_many_loop_impl = _njit(_expm_many_loop_impl)
    _rk4_const_batch_impl = numba.njit(cache=True, parallel=True)(_rk4_const_batch_impl)
    _rk4_record_impl = _njit(_rk4_record_impl)
    _closed_loop_impl = _njit(_closed_loop_impl)


def expm_many(ms) -> np.ndarray:
    """exp of every matrix in a (K, d, d) stack."""
    ms = np.ascontiguousarray(np.asarray(ms, dtype=np.float64))
    if USE_NUMBA:
        return _expm_many_loop_impl(ms)
    return _expm_many_numpy(ms)


def expm_core(m) -> np.ndarray:
    """exp of a single square matrix (no validation)."""
    m = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
    if USE_NUMBA:
        return _expm_single_impl(m)
    return _expm_many_numpy(m[None])[0]


def rk4_const_batch(x0s, us, dt: float, steps: int, table) -> np.ndarray:
    """Endpoints of RK4 runs for a batch of (initial state, constant control)."""
    x0s = np.ascontiguousarray(np.atleast_2d(np.asarray(x0s, dtype=float)))
    us = np.ascontiguousarray(
        np.asarray(us, dtype=float).reshape(x0s.shape[0], table.n_controls)
    )
    if USE_NUMBA:
        return _rk4_const_batch_impl(x0s, us, float(dt), int(steps), *table.arrays())
    return _rk4_const_batch_numpy(x0s, us, float(dt), int(steps), table)


def rk4_record(x0, seg_values, seg_steps, seg_dts, table) -> np.ndarray:
    """One RK4 trajectory across schedule segments, every step recorded."""
    x0 = np.ascontiguousarray(np.asarray(x0, dtype=float))
    seg_values = np.ascontiguousarray(
        np.asarray(seg_values, dtype=float).reshape(len(seg_steps), table.n_controls)
    )
    seg_steps = np.ascontiguousarray(np.asarray(seg_steps, dtype=np.int64))
    seg_dts = np.ascontiguousarray(np.asarray(seg_dts, dtype=float))
    return _rk4_record_impl(x0, seg_values, seg_steps, seg_dts, *table.arrays())


def closed_loop_rk4(x0, dt, steps, b_stack, d_stack, p_mat, k_gain,
                    sys_table, lift_table):
    """RK4 under quadratic-Lyapunov feedback; returns (states, V series)."""
    return _closed_loop_impl(
        np.ascontiguousarray(np.asarray(x0, dtype=float)),
        float(dt),
        int(steps),
        np.ascontiguousarray(b_stack, dtype=float),
        np.ascontiguousarray(d_stack, dtype=float),
        np.ascontiguousarray(p_mat, dtype=float),
        np.ascontiguousarray(k_gain, dtype=float),
        sys_table.arrays(),
        lift_table.arrays(),
    )
