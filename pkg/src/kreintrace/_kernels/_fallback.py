"""Pure-numpy path kernels (fallback when the compiled core is unavailable).

Signatures mirror the compiled module exactly: state arrays hold the active
(compacted) paths and are mutated in place; output arrays are full-size and
indexed by `pid`.  Within a block every recurrence is an exact left-to-right
scan, so the update order (and hence rounding) matches the scalar compiled
loops; the streams are the counter-based ones from `kreintrace.rng`.
"""

from __future__ import annotations

import numpy as np

from .. import rng

BACKEND = "python"

_BLOCK = 256


def rates(y, piece_l, piece_r, piece_kind, piece_c, piece_b, piece_e,
          piece_p, atom_y, atom_rate, atom_delta):
    """Mass rate a(y) plus occupation-window atom rates, vectorized."""
    out = np.zeros_like(y)
    for i in range(len(piece_l)):
        mask = (y >= piece_l[i]) & (y < piece_r[i])
        if not mask.any():
            continue
        if piece_kind[i] == 0:
            out[mask] += piece_c[i]
        else:
            if piece_kind[i] == 1:
                base = piece_b[i] + piece_e[i] * y[mask]
            else:
                base = piece_b[i] ** 2 - (piece_e[i] * y[mask]) ** 2
            if piece_p[i] == -2.0:
                out[mask] += piece_c[i] / (base * base)
            else:
                out[mask] += piece_c[i] * base ** piece_p[i]
    for i in range(len(atom_y)):
        out += np.where(np.abs(y - atom_y[i]) < atom_delta[i],
                        atom_rate[i], 0.0)
    return out


def _normals(keys, step0, k):
    ctrs = np.uint64(step0) + np.arange(k, dtype=np.uint64)
    return rng.ndtri_np(rng.unit_np(rng.raw_u64_np(keys[:, None],
                                                   ctrs[None, :])))


def trace_advance(keys, pid, step0, nsteps, dt,
                  piece_l, piece_r, piece_kind, piece_c, piece_b, piece_e,
                  piece_p, atom_y, atom_rate, atom_delta, levels, kill_r,
                  W, M, A, next_lev, out_a, out_l, reached, killed, done):
    if len(keys) == 0:
        return
    rate_args = (piece_l, piece_r, piece_kind, piece_c, piece_b, piece_e,
                 piece_p, atom_y, atom_rate, atom_delta)
    sdt = np.sqrt(dt)
    nlev = len(levels)
    for off in range(0, nsteps, _BLOCK):
        k = min(_BLOCK, nsteps - off)
        idx = np.nonzero(done[pid] == 0)[0]
        if len(idx) == 0:
            return
        z = _normals(keys[idx], step0 + off, k)
        w_scan = np.empty((len(idx), k + 1))
        w_scan[:, 0] = W[idx]
        w_scan[:, 1:] = sdt * z
        np.cumsum(w_scan, axis=1, out=w_scan)
        m_scan = np.empty_like(w_scan)
        m_scan[:, 0] = M[idx]
        np.minimum(w_scan[:, 1:], M[idx][:, None], out=m_scan[:, 1:])
        np.minimum.accumulate(m_scan, axis=1, out=m_scan)
        y_block = w_scan[:, 1:] - m_scan[:, 1:]
        y_prev = np.empty_like(y_block)
        y_prev[:, 0] = W[idx] - M[idx]
        y_prev[:, 1:] = y_block[:, :-1]
        a_scan = np.empty((len(idx), k + 1))
        a_scan[:, 0] = A[idx]
        a_scan[:, 1:] = rates(y_prev.reshape(-1), *rate_args).reshape(
            y_prev.shape) * dt
        np.cumsum(a_scan, axis=1, out=a_scan)
        a_block = a_scan[:, 1:]
        l_block = -m_scan[:, 1:]

        if np.isfinite(kill_r):
            hit_kill = y_block >= kill_r
            kill_col = np.where(hit_kill.any(axis=1),
                                hit_kill.argmax(axis=1), k)
        else:
            kill_col = np.full(len(idx), k)

        ids = pid[idx]
        for lev_i in range(nlev):
            todo = next_lev[idx] == lev_i
            if not todo.any():
                continue
            crossed = l_block > levels[lev_i]
            col = np.where(crossed.any(axis=1), crossed.argmax(axis=1), k)
            rec = todo & (col < kill_col)
            rows = np.nonzero(rec)[0]
            out_a[ids[rows], lev_i] = a_block[rows, col[rows]]
            out_l[ids[rows], lev_i] = l_block[rows, col[rows]]
            reached[ids[rows], lev_i] = 1
            next_lev[idx[rows]] += 1

        finished = next_lev[idx] >= nlev
        died = (kill_col < k) & ~finished
        killed[ids[died]] = 1
        done[ids[died | finished]] = 1
        W[idx] = w_scan[:, -1]
        M[idx] = m_scan[:, -1]
        A[idx] = a_block[:, -1]


def hit_advance(keys, pid, step0, nsteps, dt,
                piece_l, piece_r, piece_kind, piece_c, piece_b, piece_e,
                piece_p, atom_y, atom_rate, atom_delta, kill_r,
                Y, A, out_a, hit, killed, done):
    if len(keys) == 0:
        return
    rate_args = (piece_l, piece_r, piece_kind, piece_c, piece_b, piece_e,
                 piece_p, atom_y, atom_rate, atom_delta)
    sdt = np.sqrt(dt)
    for off in range(0, nsteps, _BLOCK):
        k = min(_BLOCK, nsteps - off)
        idx = np.nonzero(done[pid] == 0)[0]
        if len(idx) == 0:
            return
        z = _normals(keys[idx], step0 + off, k)
        y_scan = np.empty((len(idx), k + 1))
        y_scan[:, 0] = Y[idx]
        y_scan[:, 1:] = sdt * z
        np.cumsum(y_scan, axis=1, out=y_scan)
        y_block = y_scan[:, 1:]
        y_prev = np.empty_like(y_block)
        y_prev[:, 0] = Y[idx]
        y_prev[:, 1:] = y_block[:, :-1]
        a_scan = np.empty((len(idx), k + 1))
        a_scan[:, 0] = A[idx]
        a_scan[:, 1:] = rates(np.maximum(y_prev, 0.0).reshape(-1),
                              *rate_args).reshape(y_prev.shape) * dt
        np.cumsum(a_scan, axis=1, out=a_scan)
        a_block = a_scan[:, 1:]

        crossed = y_block <= 0.0
        col = np.where(crossed.any(axis=1), crossed.argmax(axis=1), k)
        if np.isfinite(kill_r):
            hit_kill = y_block >= kill_r
            kill_col = np.where(hit_kill.any(axis=1),
                                hit_kill.argmax(axis=1), k)
        else:
            kill_col = np.full(len(idx), k)

        ids = pid[idx]
        ok = (col < k) & (col <= kill_col)
        rows = np.nonzero(ok)[0]
        out_a[ids[rows]] = a_block[rows, col[rows]]
        hit[ids[rows]] = 1
        died = (kill_col < col) & (kill_col < k)
        killed[ids[died]] = 1
        done[ids[ok | died]] = 1
        Y[idx] = y_block[:, -1]
        A[idx] = a_block[:, -1]


def bessel_advance(keys, pid, step0, nsteps, dt, drift_dt, eps, delta,
                   occ_thresh, Y, OCC, out_t, reached, bad, done):
    """Reflected Euler steps of the fractional-dimension radial diffusion.

    Sequential in the step direction (the drift feeds back), vectorized
    across paths; the drift denominator is floored at eps only.
    """
    if len(keys) == 0:
        return
    sdt = np.sqrt(dt)
    act = np.nonzero(done[pid] == 0)[0]
    if len(act) == 0:
        return
    y = Y[act].copy()
    occ = OCC[act].copy()
    live_keys = keys[act]
    for j in range(nsteps):
        z = rng.ndtri_np(rng.unit_np(rng.raw_u64_np(live_keys,
                                                    np.uint64(step0 + j))))
        y = np.abs(y + sdt * z + drift_dt / np.maximum(y, eps))
        occ = occ + dt * (y < delta)
        fin = np.isfinite(y)
        stop = (occ > occ_thresh) | ~fin
        if stop.any():
            ids = pid[act[stop]]
            good = fin[stop]
            out_t[ids[good]] = (step0 + j + 1) * dt
            reached[ids[good]] = 1
            bad[ids[~good]] = 1
            done[ids] = 1
            keep = ~stop
            Y[act[stop]] = y[stop]
            OCC[act[stop]] = occ[stop]
            act = act[keep]
            y = y[keep]
            occ = occ[keep]
            live_keys = live_keys[keep]
            if len(act) == 0:
                return
    Y[act] = y
    OCC[act] = occ


def walk_advance(keys, pid, step0, nsteps, d, X, Y, out_x, hit, done):
    """Nearest-neighbour walk on Z^d x Z_{>=0}; stops at the first Y = 0."""
    if len(keys) == 0:
        return
    act = np.nonzero(done[pid] == 0)[0]
    for off in range(0, nsteps, _BLOCK):
        k = min(_BLOCK, nsteps - off)
        if len(act) == 0:
            return
        ctrs = np.uint64(step0 + off) + np.arange(k, dtype=np.uint64)
        r = rng.raw_u64_np(keys[act][:, None], ctrs[None, :])
        sign = np.where((r & np.uint64(1)) != 0, 1, -1).astype(np.int64)
        axis = ((r >> np.uint64(1)) % np.uint64(d + 1)).astype(np.int64)
        vert = np.where(axis == d, sign, 0)
        y_path = Y[act][:, None] + np.cumsum(vert, axis=1)
        at0 = y_path == 0
        col = np.where(at0.any(axis=1), at0.argmax(axis=1), k)
        ids = pid[act]
        rows = np.nonzero(col < k)[0]
        for ax in range(d):
            horiz = np.where(axis == ax, sign, 0)
            x_path = X[act, ax][:, None] + np.cumsum(horiz, axis=1)
            out_x[ids[rows], ax] = x_path[rows, col[rows]]
            X[act, ax] = x_path[:, -1]
        hit[ids[rows]] = 1
        done[ids[rows]] = 1
        Y[act] = y_path[:, -1]
        act = act[col >= k]
