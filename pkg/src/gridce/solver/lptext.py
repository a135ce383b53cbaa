"""Debug dump of a LinearProgram in CPLEX LP text format.

Useful for cross-checking a model against an external solver; not used on
any solve path.
"""
from __future__ import annotations

from .model import INF, LinearProgram

_REL = {"<=": "<=", ">=": ">=", "==": "="}


def _term(coeff: float, name: str, first: bool) -> str:
    sign = "-" if coeff < 0 else ("" if first else "+")
    mag = abs(coeff)
    body = name if mag == 1 else f"{mag:.12g} {name}"
    return f"{sign} {body}".strip() if not first else f"{sign}{body}"


def _expr(coeffs: dict[int, float], names: list[str]) -> str:
    parts = []
    for j in sorted(coeffs):
        parts.append(_term(coeffs[j], names[j], first=not parts))
    return " ".join(parts) if parts else "0 " + (names[0] if names else "x0")


def dump_lp(lp: LinearProgram) -> str:
    names = lp.var_names
    out = [f"\\ {lp.name}", "Minimize", f" obj: {_expr(lp.obj, names)}",
           "Subject To"]
    for i, (coeffs, rel, rhs, rname) in enumerate(lp.rows):
        label = rname or f"r{i}"
        out.append(f" {label}: {_expr(coeffs, names)} {_REL[rel]} {rhs:.12g}")
    for k, (a, b) in enumerate(lp.comp_pairs):
        out.append(f"\\ sos1 pair {k}: {names[a]} _|_ {names[b]}")
    out.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == hi:
            out.append(f" {name} = {lo:.12g}")
        else:
            lo_s = "-inf" if lo == -INF else f"{lo:.12g}"
            hi_s = "+inf" if hi == INF else f"{hi:.12g}"
            out.append(f" {lo_s} <= {name} <= {hi_s}")
    ints = [names[j] for j, flag in enumerate(lp.integer) if flag]
    if ints:
        out.append("General")
        out.append(" " + " ".join(ints))
    out.append("End")
    return "\n".join(out) + "\n"
