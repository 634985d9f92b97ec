"""Pure-Python/numpy event loop; same contract and arithmetic as ``_core``."""
import numpy as np

BACKEND = "python"


def wrap(y, L):
    y = y - L * np.floor(y / L)
    y = np.where(y < 0.0, y + L, y)
    return np.where(y >= L, y - L, y)


def _flight(x, v, dt, L, periodic):
    y = x + v * dt
    return wrap(y, L) if periodic else y


def sq_dist_from(x, i, L, periodic):
    acc = np.zeros(x.shape[0])
    for c in range(x.shape[1]):
        dx = np.abs(x[:, c] - x[i, c])
        if periodic:
            dx = np.minimum(dx, L - dx)
        acc = acc + dx * dx
    return acc


def pick_rank(cum_w, u):
    """0-based rank index with ``cum_w[s-1] <= u*total < cum_w[s]``."""
    s = int(np.searchsorted(cum_w, u * cum_w[-1], side="right"))
    return min(s, len(cum_w) - 1)


def select_ranked(x, i, rank0, L, periodic):
    """Index of the particle holding 0-based rank ``rank0`` around ``i``."""
    d2 = sq_dist_from(x, i, L, periodic)
    d2[i] = -1.0
    order = np.argsort(d2, kind="stable")
    return int(order[rank0 + 1])


def simulate_segment(x, v, L, periodic, t0, event_times, chooser_u, partner_u,
                     cum_w, snap_times, t_end):
    """Play a pre-drawn event sequence on (x, v) in place.

    Returns ``(choosers, partners, snap_x, snap_v)``; positions end at ``t_end``.
    """
    N, d = x.shape
    n_ev = len(event_times)
    n_snap = len(snap_times)
    choosers = np.empty(n_ev, dtype=np.int64)
    partners = np.empty(n_ev, dtype=np.int64)
    snap_x = np.empty((n_snap, N, d))
    snap_v = np.empty((n_snap, N, d))
    t_cur = t0
    k = 0
    for e in range(n_ev):
        te = event_times[e]
        while k < n_snap and snap_times[k] < te:
            snap_x[k] = _flight(x, v, snap_times[k] - t_cur, L, periodic)
            snap_v[k] = v
            k += 1
        x[:] = _flight(x, v, te - t_cur, L, periodic)
        t_cur = te
        i = min(int(chooser_u[e] * N), N - 1)
        j = select_ranked(x, i, pick_rank(cum_w, partner_u[e]), L, periodic)
        v[i] = v[j]
        choosers[e] = i
        partners[e] = j
    while k < n_snap:
        snap_x[k] = _flight(x, v, snap_times[k] - t_cur, L, periodic)
        snap_v[k] = v
        k += 1
    x[:] = _flight(x, v, t_end - t_cur, L, periodic)
    return choosers, partners, snap_x, snap_v
