#!/usr/bin/env python3
"""Regenerate the shipped problem files in problems/ from symbolic definitions.

usage: make_problems.py [output_dir]
"""
import json
import math
import os
import sys

import sympy as sp

t = sp.Symbol("t")


def syms(prefix, n):
    return [sp.Symbol(f"{prefix}{i + 1}") for i in range(n)]


class Problem:
    def __init__(self, name, mode, nx, nth=0, nw=0, horizon=1.0):
        self.name, self.mode, self.horizon = name, mode, horizon
        self.nx, self.nth, self.nw = nx, nth, nw
        self.x, self.th, self.w = syms("x", nx), syms("th", nth), syms("w", nw)
        self.sets = {"X": [], "X0": [], "Theta": [], "W": []}
        self.subsystems = []
        self.objectives = []
        self.objective_mode = "max"
        self.options = {}

    def poly(self, expr):
        gens = [t] + self.x + self.th + self.w
        p = sp.Poly(sp.expand(expr), *gens)
        terms = []
        for mon, c in sorted(p.terms(), key=lambda mc: (sum(mc[0]), [-e for e in mc[0]])):
            e = {}
            if mon[0]:
                e["t"] = mon[0]
            blocks = [("x", 1, self.nx), ("th", 1 + self.nx, self.nth), ("w", 1 + self.nx + self.nth, self.nw)]
            for key, off, n in blocks:
                v = list(mon[off:off + n])
                if any(v):
                    e[key] = v
            term = {"c": float(c)}
            if e:
                term["e"] = e
            terms.append(term)
        return terms

    def to_json(self):
        return {
            "schema": "peakbound/1",
            "name": self.name,
            "mode": self.mode,
            "dims": {"nx": self.nx, "ntheta": self.nth, "nw": self.nw},
            "horizon": self.horizon,
            "sets": {k: [self.poly(g) for g in v] for k, v in self.sets.items()},
            "subsystems": [{"f": [self.poly(fi) for fi in f], "region": [self.poly(g) for g in reg]}
                           for f, reg in self.subsystems],
            "objectives": [self.poly(p) for p in self.objectives],
            "objective_mode": self.objective_mode,
            "options": self.options,
        }


def box(vars_, lo, hi):
    return [(v - a) * (b - v) for v, a, b in zip(vars_, lo, hi)]


def ball(vars_, center, r2):
    return [r2 - sum((v - c) ** 2 for v, c in zip(vars_, center))]


def flow(name, theta_half):
    nth = 1 if theta_half > 0 else 0
    P = Problem(name, "continuous", 2, nth, 1, 10.0)
    x1, x2 = P.x
    w = P.w[0]
    th = P.th[0] if nth else 0
    P.sets["X"] = box(P.x, [-3, -3], [3, 3])
    P.sets["X0"] = ball(P.x, [-1, -1], 0.25)
    P.sets["W"] = box(P.w, [-0.2], [0.2])
    if nth:
        P.sets["Theta"] = box(P.th, [-theta_half], [theta_half])
    P.subsystems = [([-0.5 * x1 - (0.5 + w) * x2 + 0.5, -0.5 * x2 + 1 + th], [])]
    P.objectives = [x1]
    P.options = {"order": 4, "scale": [[-3, 3], [-3, 3]], "seed": 1, "samples": 2000}
    return P


def three_wave(name, uncertain):
    P = Problem(name, "continuous", 3, 1 if uncertain else 0, 0, 5.0)
    x1, x2, x3 = P.x
    lo, hi = [-4, 0.5, 0], [3, 3.6, 4]
    P.sets["X"] = box(P.x, lo, hi)
    P.sets["X0"] = ball(P.x, [1, 1, 1], 0.16)

    def field(A, B, G):
        return [A * x1 + B * x2 + x3 - 2 * x2 ** 2, -B * x1 + A * x2 + 2 * x1 * x2, -G * x3 - 2 * x1 * x3]

    if uncertain:
        P.sets["Theta"] = box(P.th, [-0.1], [0.1])
        G = 2 + P.th[0]
        P.subsystems = [(field(A, B, G), []) for A in (0.5, 1.5) for B in (0.25, 0.75)]
    else:
        P.subsystems = [(field(1, 0.5, 2), [])]
    P.objectives = [x2]
    P.options = {"order": 3, "scale": [list(r) for r in zip(lo, hi)], "seed": 1, "samples": 2000}
    return P


def attitude(name, uncertain, horizon, phi_max, rate_max):
    P = Problem(name, "continuous", 2, 1 if uncertain else 0, 0, horizon)
    phi, rate = P.x
    deg = math.pi / 180
    inertia = 27500.0 * (2 if uncertain else 1)
    gain = (1 + P.th[0]) / inertia if uncertain else 1 / inertia
    L = 380.0
    kx = 1000 * (2.475 * phi + 19.8 * rate)
    P.sets["X"] = box(P.x, [-phi_max, -rate_max], [phi_max, rate_max])
    P.sets["X0"] = box(P.x, [-15 * deg, -3 * deg], [15 * deg, 3 * deg])
    if uncertain:
        P.sets["Theta"] = box(P.th, [-0.5], [0.5])
    P.subsystems = [
        ([rate, -gain * kx], [(L - kx) / L, (L + kx) / L]),
        ([rate, -gain * L], [(kx - L) / L]),
        ([rate, gain * L], [(-kx - L) / L]),
    ]
    P.objectives = [phi ** 2]
    P.options = {"order": 5, "scale": [[-phi_max, phi_max], [-rate_max, rate_max]], "sqrt_report": True,
                 "unit": "deg", "seed": 1, "samples": 2000}
    return P


def discrete(name, w_half):
    P = Problem(name, "discrete", 2, 0, 1 if w_half > 0 else 0, 50)
    x1, x2 = P.x
    w = P.w[0] if w_half > 0 else 0
    P.sets["X"] = box(P.x, [-3, -3], [3, 3])
    P.sets["X0"] = ball(P.x, [-1.5, 0], 0.16)
    if w_half > 0:
        P.sets["W"] = box(P.w, [-w_half], [w_half])
    f1 = [-0.3 * x1 + 0.8 * x2 + 0.1 * x1 * x2, -0.75 * x1 - 0.3 * x2 + w]
    f2 = [0.8 * x1 + 0.5 * x2 - 0.01 * x1 ** 2, -0.5 * x1 + 0.8 * x2 - 0.01 * x1 * x2 + w]
    P.subsystems = [(f1, []), (f2, [x1 / 3])]
    P.objectives = [-x2]
    P.options = {"order": 4, "scale": [[-3, 3], [-3, 3]], "seed": 1, "samples": 2000}
    return P


def half_circle(name, w_range, horizon, xbox, p2_sign):
    nw = 0 if w_range is None else 1
    P = Problem(name, "continuous", 2, 0, nw, horizon)
    x1, x2 = P.x
    w = 1 if w_range is None else P.w[0]
    P.sets["X"] = box(P.x, [-xbox, -xbox], [xbox, xbox])
    P.sets["X0"] = ball(P.x, [1.5, 0], 0.16)
    if nw:
        P.sets["W"] = box(P.w, [w_range[0]], [w_range[1]])
    P.subsystems = [([x2, -x1 + w / 3 * x1 ** 3 - x2], [])]
    P.objectives = [0.25 - x1 ** 2 - (x2 + 0.5) ** 2, p2_sign * math.sqrt(2) / 2 * (x1 + x2 + 0.5)]
    P.objective_mode = "maximin"
    P.options = {"order": 5, "scale": [[-xbox, xbox], [-xbox, xbox]], "seed": 1, "samples": 2000}
    return P


def stationary(name):
    P = Problem(name, "continuous", 1, 0, 0, 1.0)
    P.sets["X"] = box(P.x, [-1], [1])
    P.sets["X0"] = box(P.x, [0.5], [0.5])
    P.subsystems = [([sp.Integer(0)], [])]
    P.objectives = [P.x[0]]
    P.options = {"order": 2, "seed": 1, "samples": 100}
    return P


def unsafe_stationary(name):
    P = Problem(name, "continuous", 2, 0, 0, 1.0)
    x1, x2 = P.x
    P.sets["X"] = box(P.x, [-1, -1], [1, 1])
    P.sets["X0"] = ball(P.x, [0, 0], 0.01)
    P.subsystems = [([sp.Integer(0), sp.Integer(0)], [])]
    P.objectives = [0.25 - x1 ** 2 - x2 ** 2, x1 + 0.5]
    P.objective_mode = "maximin"
    P.options = {"order": 2, "seed": 1, "samples": 200}
    return P


PROBLEMS = [
    flow("flow_theta0", 0.0),
    flow("flow_theta", 0.5),
    three_wave("threewave", False),
    three_wave("threewave_unc", True),
    attitude("attitude", False, 40.0, 0.5, 0.1),
    attitude("attitude_unc", True, 80.0, 1.2, 0.2),
    discrete("discrete_w0", 0.0),
    discrete("discrete_w", 0.2),
    half_circle("halfcircle", None, 5.0, 2.5, -1),
    half_circle("halfcircle_tv", (0.5, 1.5), 5.0, 2.5, -1),
    stationary("stationary"),
    unsafe_stationary("unsafe_stationary"),
]


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "problems")
    os.makedirs(out, exist_ok=True)
    for P in PROBLEMS:
        with open(os.path.join(out, P.name + ".json"), "w") as fh:
            json.dump(P.to_json(), fh, indent=1)
            fh.write("\n")


if __name__ == "__main__":
    main()
