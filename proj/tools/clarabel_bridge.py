#!/usr/bin/env python3
"""Solve a peakbound conic program dump with Clarabel.

usage: clarabel_bridge.py program.json solution.json [feas_tol gap_tol]

The dump maximizes objective.y subject to equalities, <= inequalities and
PSD blocks given as upper-triangle entry lists. Clarabel minimizes q.x with
A x + s = b, s in K, so every PSD block enters as s = svec(F(y)).
"""
import json
import math
import sys

import clarabel
import numpy as np
import scipy.sparse as sp


def form_rows(rows, start, data, ri, ci, sign=1.0):
    for k, r in enumerate(rows):
        for v, c in zip(r["vars"], r["coefs"]):
            data.append(sign * c)
            ri.append(start + k)
            ci.append(v)


def main():
    src, dst = sys.argv[1], sys.argv[2]
    feas = float(sys.argv[3]) if len(sys.argv) > 3 else 1e-8
    gap = float(sys.argv[4]) if len(sys.argv) > 4 else 1e-8
    with open(src) as fh:
        prog = json.load(fh)
    n = prog["num_scalars"]
    q = np.zeros(n)
    for v, c in zip(prog["objective"]["vars"], prog["objective"]["coefs"]):
        q[v] -= c

    data, ri, ci, b = [], [], [], []
    eqs, ineqs = prog["equalities"], prog["inequalities"]
    form_rows(eqs, 0, data, ri, ci)
    b += [e["rhs"] for e in eqs]
    form_rows(ineqs, len(eqs), data, ri, ci)
    b += [e["rhs"] for e in ineqs]
    row = len(eqs) + len(ineqs)
    cones = []
    if eqs:
        cones.append(clarabel.ZeroConeT(len(eqs)))
    if ineqs:
        cones.append(clarabel.NonnegativeConeT(len(ineqs)))
    r2 = math.sqrt(2.0)
    psd_rows = []
    for blk in prog["psd_blocks"]:
        side = blk["side"]
        tri = side * (side + 1) // 2
        for r, c, vs, cs in blk["entries"]:
            k = c * (c + 1) // 2 + r
            scale = 1.0 if r == c else r2
            for v, coef in zip(vs, cs):
                data.append(-scale * coef)
                ri.append(row + k)
                ci.append(v)
        psd_rows.append((row, side))
        b += [0.0] * tri
        row += tri
        cones.append(clarabel.PSDTriangleConeT(side))

    A = sp.csc_matrix((data, (ri, ci)), shape=(row, n))
    P = sp.csc_matrix((n, n))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = feas
    settings.tol_gap_abs = gap
    settings.tol_gap_rel = gap
    settings.max_iter = 300
    solver = clarabel.DefaultSolver(P, q, A, np.array(b), cones, settings)
    sol = solver.solve()

    x = np.array(sol.x)
    z = np.array(sol.z)
    psd = []
    for start, side in psd_rows:
        Z = np.zeros((side, side))
        for c in range(side):
            for r in range(c + 1):
                val = z[start + c * (c + 1) // 2 + r]
                if r == c:
                    Z[r, c] = val
                else:
                    Z[r, c] = Z[c, r] = val / r2
        psd.append(Z.ravel().tolist())
    out = {
        "status": str(sol.status),
        "x": x.tolist(),
        "z_eq": z[: len(eqs)].tolist(),
        "z_ineq": z[len(eqs): len(eqs) + len(ineqs)].tolist(),
        "psd": psd,
        "iterations": int(sol.iterations),
        "solve_time": float(sol.solve_time),
    }
    with open(dst, "w") as fh:
        json.dump(out, fh)


if __name__ == "__main__":
    main()
