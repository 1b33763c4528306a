"""Independent reference implementations used to derive expected values.

Nothing here imports the package's numerical routines; each function is a
deliberately naive loop version of the quantity it checks.
"""
import itertools
import math

import numpy as np


def loop_partial_trace(op, dims, keep):
    """Partial trace by explicit index loops."""
    op = np.asarray(op, dtype=complex)
    keep = sorted(keep)
    n = len(dims)
    traced = [s for s in range(n) if s not in keep]
    dk = int(np.prod([dims[s] for s in keep])) if keep else 1
    out = np.zeros((dk, dk), dtype=complex)

    def flat(idx):
        v = 0
        for s in range(n):
            v = v * dims[s] + idx[s]
        return v

    def flat_keep(idx):
        v = 0
        for s in keep:
            v = v * dims[s] + idx[s]
        return v

    for row in itertools.product(*(range(d) for d in dims)):
        for col in itertools.product(*(range(d) for d in dims)):
            if any(row[s] != col[s] for s in traced):
                continue
            out[flat_keep(row), flat_keep(col)] += op[flat(row), flat(col)]
    return out


def brute_chi2_conditional(table):
    """χ² for X−Y−Z on a (dX, dY, dZ) array, straight from E_ijk = N_ij N_jk / N_j."""
    dx, dy, dz = table.shape
    stat = 0.0
    for j in range(dy):
        n_j = sum(table[i, j, k] for i in range(dx) for k in range(dz))
        for i in range(dx):
            n_ij = sum(table[i, j, k] for k in range(dz))
            for k in range(dz):
                n_jk = sum(table[a, j, k] for a in range(dx))
                if n_j == 0:
                    continue
                e = n_ij * n_jk / n_j
                if e > 0:
                    stat += (table[i, j, k] - e) ** 2 / e
    return stat, (dx - 1) * dy * (dz - 1)


def brute_chi2_independence(table):
    dx, dz = table.shape
    n = table.sum()
    stat = 0.0
    for i in range(dx):
        for k in range(dz):
            e = table[i, :].sum() * table[:, k].sum() / n
            if e > 0:
                stat += (table[i, k] - e) ** 2 / e
    return stat, (dx - 1) * (dz - 1)


def bloch_overlap(n, m):
    """``Tr[(I+n·σ)/2 (I+m·σ)/2] = (1 + n·m)/2`` for unit vectors."""
    return (1.0 + float(np.dot(n, m))) / 2.0


def bloch(theta_deg, phi_deg):
    t, p = math.radians(theta_deg), math.radians(phi_deg)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


def phi_plus_correlator(a, b):
    """``⟨a·σ ⊗ b·σ⟩`` on |Φ+⟩."""
    return a[0] * b[0] - a[1] * b[1] + a[2] * b[2]


def brute_chsh(e):
    best = 0.0
    for c in itertools.product((1, -1), repeat=4):
        if c[0] * c[1] * c[2] * c[3] != -1:
            continue
        s = c[0] * e[0][0] + c[1] * e[0][1] + c[2] * e[1][0] + c[3] * e[1][1]
        best = max(best, abs(s))
    return best


def brute_ci_deviation(probs, x, y, z):
    """max |P(x,z|y) − P(x|y)P(z|y)| by summing over cells in Python loops."""
    shape = probs.shape
    cells = list(itertools.product(*(range(n) for n in shape)))

    def key(cell, axes):
        return tuple(cell[a] for a in axes)

    p_y, p_xy, p_yz, p_xyz = {}, {}, {}, {}
    for cell in cells:
        v = probs[cell]
        ky, kx, kz = key(cell, y), key(cell, x), key(cell, z)
        p_y[ky] = p_y.get(ky, 0.0) + v
        p_xy[(kx, ky)] = p_xy.get((kx, ky), 0.0) + v
        p_yz[(ky, kz)] = p_yz.get((ky, kz), 0.0) + v
        p_xyz[(kx, ky, kz)] = p_xyz.get((kx, ky, kz), 0.0) + v
    worst = 0.0
    for (kx, ky, kz), v in p_xyz.items():
        if p_y[ky] <= 0:
            continue
        lhs = v / p_y[ky]
        rhs = p_xy[(kx, ky)] / p_y[ky] * p_yz[(ky, kz)] / p_y[ky]
        worst = max(worst, abs(lhs - rhs))
    return worst


def kron_born(w, alice_chois, bob_chois):
    """``Tr[W (A ⊗ B)]`` for every instrument pair by explicit Kronecker products."""
    out = {}
    for ka, a in alice_chois.items():
        for kb, b in bob_chois.items():
            out[ka + kb] = np.trace(w @ np.kron(a, b)).real
    return out


def loop_group(table, x, y, z):
    """Marginalize a 4-d table onto groups ``(x, y, z)`` by visiting every cell."""
    shape = table.shape

    def size(axes):
        n = 1
        for a in axes:
            n *= shape[a]
        return n

    def flat(cell, axes):
        v = 0
        for a in axes:
            v = v * shape[a] + cell[a]
        return v

    out = np.zeros((size(x), size(y), size(z)))
    for cell in itertools.product(*(range(n) for n in shape)):
        out[flat(cell, x), flat(cell, y), flat(cell, z)] += table[cell]
    return out
