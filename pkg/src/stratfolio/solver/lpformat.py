"""Debug dump of models in the CPLEX LP text format."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import EQ, MAXIMIZE, LinearProgram, MixedIntegerProgram

_REL = {"<=": "<=", ">=": ">=", EQ: "="}


def _terms(coeffs: dict[int, float]) -> str:
    if not coeffs:
        return "0 x0"
    parts = []
    for i, v in coeffs.items():
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.17g} x{i}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def dump_lp(model: LinearProgram | MixedIntegerProgram) -> str:
    """Render ``model`` as CPLEX LP text; variables are named ``x0, x1, ...``."""
    binary: frozenset[int] = frozenset()
    if isinstance(model, MixedIntegerProgram):
        binary = model.binary
        model = model.base
    lines = ["Maximize" if model.sense == MAXIMIZE else "Minimize"]
    obj = {i: v for i, v in enumerate(model.objective) if v != 0.0}
    lines.append(f" obj: {_terms(obj)}")
    lines.append("Subject To")
    A = model.A.tocsr()
    for r in range(model.num_constraints):
        start, end = A.indptr[r], A.indptr[r + 1]
        row = dict(zip(A.indices[start:end].tolist(), A.data[start:end].tolist()))
        lines.append(f" c{r}: {_terms(row)} {_REL[model.relations[r]]} "
                     f"{model.rhs[r]:.17g}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(zip(model.lower, model.upper)):
        if j in binary:
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" x{j} free")
            continue
        lo_s = "-inf" if not np.isfinite(lo) else f"{lo:.17g}"
        hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.17g}"
        lines.append(f" {lo_s} <= x{j} <= {hi_s}")
    if binary:
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{j}" for j in sorted(binary)))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: LinearProgram | MixedIntegerProgram, path: str | Path) -> None:
    Path(path).write_text(dump_lp(model))
