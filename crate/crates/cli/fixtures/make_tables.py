#!/usr/bin/env python3
"""Writes tables_d{2,3,5}.csv from the closed-form entries of the surgery
tables (k = l = 0, eps = 1/10). Kept independent of the Rust ledger so the
fixtures act as an oracle: `python3 make_tables.py` in this directory."""
from fractions import Fraction as Q
import sys

STAR = None


def fmt(v):
    if v is STAR:
        return "*"
    v = Q(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def tables(d, k, l, eps):
    init_rows = ["F", "G", "E", "E11", "H"]
    init = [
        [2 * d],
        [2 * d, 2 * d],
        [k, d - k, STAR],
        [l, d - l, 0, STAR],
        [1, 1, STAR, STAR, 0],
    ]
    init_area = [2 + 2 * d, 2 + 2 * d, 1, 1, 2]
    mid_rows = ["Fhat", "Ghat", "E", "E11", "Hhat", "{calE_i}", "{Hhat_i}"]
    s1 = [
        [0],
        [0, 0],
        [k, d - k, STAR],
        [l, d - l, 0, STAR],
        [1, 1, STAR, STAR, 0],
        [2 * d, 2 * d, 0, 0, 0, -1],
        [0, 0, d, d, 0, 1, -1],
    ]
    s1_area = [2 + 2 * d - 2 * d * eps, 2 + 2 * d - 2 * d * eps, 1, 1, 2, eps, 2 - eps]
    s2_area = [2 + 2 * d - 2 * d * eps, 2 + 2 * d - 2 * d * eps, 1 + d * d, 1 + d * d, 2 + 2 * d, eps + 2 * d, 2 - eps]
    s3_area = [2 + 2 * d, 2 + 2 * d, 1 + d * d, 1 + d * d, 2 + 2 * d, 2 * d, 2]
    last_rows = ["Fhat", "Ghat", "E^X", "E11^X", "Hhat", "{calH_i}"]
    s4 = [
        [0],
        [0, 0],
        [k, d - k, STAR],
        [l, d - l, 0, STAR],
        [1, 1, STAR, STAR, 0],
        [2 * d, 2 * d, d, d, 0, 0],
    ]
    s4_area = [2 + 2 * d, 2 + 2 * d, 1 + d * d + 2 * d, 1 + d * d + 2 * d, 2 + 2 * d, 2 + 2 * d]
    return [
        ("initial_intersections", init_rows, init),
        ("initial_areas", init_rows, init_area),
        ("step1_intersections", mid_rows, s1),
        ("step1_areas", mid_rows, s1_area),
        ("step2_areas", mid_rows, s2_area),
        ("step3_areas", mid_rows, s3_area),
        ("step4_intersections", last_rows, s4),
        ("step4_areas", last_rows, s4_area),
    ]


def csv(d, k=0, l=0, eps=Q(1, 10)):
    out = ["table,row,col,value"]
    for tid, rows, cells in tables(d, k, l, eps):
        for i, row in enumerate(rows):
            if tid.endswith("areas"):
                out.append(f"{tid},{row},area,{fmt(cells[i])}")
            else:
                for j, v in enumerate(cells[i]):
                    out.append(f"{tid},{row},{rows[j]},{fmt(v)}")
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    for d in (2, 3, 5):
        with open(f"tables_d{d}.csv", "w", newline="\n") as fh:
            fh.write(csv(d))
    sys.exit(0)
