"""Mixed-integer linear model container and LP-format text interchange.

The model is generic: continuous and binary variables, linear objective,
linear inequality (<=) and equality rows.  Construction happens in
:mod:`partcc.problems`; solving in :mod:`partcc.solver`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class MilpModel:
    """min c'v  s.t.  A_ub v <= b_ub,  A_eq v = b_eq,  lb <= v <= ub.

    ``binary`` marks which variables are 0/1.  Bounds of binaries may be
    tightened to fix them (e.g. greedy cover selection).
    """

    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray          # bool mask
    names: list[str]
    meta: dict = field(default_factory=dict)

    @property
    def num_vars(self) -> int:
        return len(self.c)

    @property
    def num_binaries(self) -> int:
        return int(self.binary.sum())

    def free_binary_indices(self) -> np.ndarray:
        """Binaries not already fixed by their bounds."""
        idx = np.flatnonzero(self.binary)
        return idx[self.lb[idx] < self.ub[idx]]


class ModelBuilder:
    """Incremental construction of a MilpModel with named variables."""

    def __init__(self):
        self._names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._binary: list[bool] = []
        self._obj: dict[int, float] = {}
        self._ub_rows: list[tuple[list[int], list[float], float]] = []
        self._eq_rows: list[tuple[list[int], list[float], float]] = []
        self.meta: dict = {}

    def add_var(self, name: str, lb: float = -np.inf, ub: float = np.inf,
                binary: bool = False, obj: float = 0.0) -> int:
        idx = len(self._names)
        self._names.append(name)
        self._lb.append(0.0 if binary and not np.isfinite(lb) else lb)
        self._ub.append(1.0 if binary and not np.isfinite(ub) else ub)
        self._binary.append(binary)
        if obj:
            self._obj[idx] = obj
        return idx

    def add_le(self, idx: list[int], coef: list[float], rhs: float) -> None:
        self._ub_rows.append((list(idx), list(coef), float(rhs)))

    def add_eq(self, idx: list[int], coef: list[float], rhs: float) -> None:
        self._eq_rows.append((list(idx), list(coef), float(rhs)))

    def set_obj(self, idx: int, coef: float) -> None:
        self._obj[idx] = coef

    def build(self) -> MilpModel:
        n = len(self._names)
        c = np.zeros(n)
        for i, v in self._obj.items():
            c[i] = v

        def stack(rows):
            data, ri, ci, rhs = [], [], [], []
            for k, (idx, coef, b) in enumerate(rows):
                ri.extend([k] * len(idx))
                ci.extend(idx)
                data.extend(coef)
                rhs.append(b)
            A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
            return A, np.array(rhs, dtype=float)

        A_ub, b_ub = stack(self._ub_rows)
        A_eq, b_eq = stack(self._eq_rows)
        return MilpModel(
            c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            lb=np.array(self._lb, dtype=float), ub=np.array(self._ub, dtype=float),
            binary=np.array(self._binary, dtype=bool), names=list(self._names),
            meta=dict(self.meta),
        )


def _term_str(coef: float, name: str) -> str:
    sign = "+" if coef >= 0 else "-"
    return f"{sign} {abs(coef):.17g} {name}"


def write_lp(model: MilpModel, path: str) -> None:
    """Write the model as CPLEX-LP-format text (minimize sense)."""
    lines = ["Minimize", " obj:"]
    terms = [_term_str(model.c[i], model.names[i])
             for i in range(model.num_vars) if model.c[i] != 0.0]
    lines.append("  " + (" ".join(terms) if terms else "0 " + model.names[0]))
    lines.append("Subject To")
    A = model.A_ub.tocoo()
    rows_ub: dict[int, list[str]] = {}
    for r, cidx, v in zip(A.row, A.col, A.data):
        rows_ub.setdefault(int(r), []).append(_term_str(v, model.names[cidx]))
    for r in range(model.A_ub.shape[0]):
        body = " ".join(rows_ub.get(r, ["+ 0 " + model.names[0]]))
        lines.append(f" c{r}: {body} <= {model.b_ub[r]:.17g}")
    E = model.A_eq.tocoo()
    rows_eq: dict[int, list[str]] = {}
    for r, cidx, v in zip(E.row, E.col, E.data):
        rows_eq.setdefault(int(r), []).append(_term_str(v, model.names[cidx]))
    for r in range(model.A_eq.shape[0]):
        body = " ".join(rows_eq.get(r, ["+ 0 " + model.names[0]]))
        lines.append(f" e{r}: {body} = {model.b_eq[r]:.17g}")
    lines.append("Bounds")
    for i, name in enumerate(model.names):
        lo, hi = model.lb[i], model.ub[i]
        lo_s = f"{lo:.17g}" if np.isfinite(lo) else "-inf"
        hi_s = f"{hi:.17g}" if np.isfinite(hi) else "+inf"
        lines.append(f" {lo_s} <= {name} <= {hi_s}")
    bins = [model.names[i] for i in np.flatnonzero(model.binary)]
    if bins:
        lines.append("Binary")
        for b in bins:
            lines.append(f" {b}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


_TERM_RE = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+(\S+)")


def read_lp(path: str) -> MilpModel:
    """Parse LP-format text produced by :func:`write_lp`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    section = None
    obj_terms: list[tuple[str, float]] = []
    cons: list[tuple[dict[str, float], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    for ln in lines:
        low = ln.lower()
        if low in ("minimize", "maximize"):
            section = "obj"
            continue
        if low == "subject to":
            section = "cons"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "binary":
            section = "bin"
            continue
        if low == "end":
            break
        if section == "obj":
            body = ln.split(":", 1)[-1]
            for sign, val, name in _TERM_RE.findall(body):
                obj_terms.append((name, float(sign + val)))
        elif section == "cons":
            body = ln.split(":", 1)[-1]
            if "<=" in body:
                lhs, rhs = body.split("<=")
                sense = "<="
            else:
                lhs, rhs = body.split("=")
                sense = "="
            coefs: dict[str, float] = {}
            for sign, val, name in _TERM_RE.findall(lhs):
                coefs[name] = coefs.get(name, 0.0) + float(sign + val)
            cons.append((coefs, sense, float(rhs)))
        elif section == "bounds":
            lo_s, rest = ln.split("<=", 1)
            name, hi_s = rest.split("<=")
            lo = -np.inf if "inf" in lo_s else float(lo_s)
            hi = np.inf if "inf" in hi_s else float(hi_s)
            bounds[name.strip()] = (lo, hi)
        elif section == "bin":
            binaries.add(ln)

    names: list[str] = []
    seen: dict[str, int] = {}

    def vid(name: str) -> int:
        if name not in seen:
            seen[name] = len(names)
            names.append(name)
        return seen[name]

    for name, _ in obj_terms:
        vid(name)
    for coefs, _, _ in cons:
        for name in coefs:
            vid(name)
    for name in bounds:
        vid(name)

    n = len(names)
    c = np.zeros(n)
    for name, v in obj_terms:
        c[seen[name]] += v
    ub_rows = [(cf, rhs) for cf, s, rhs in cons if s == "<="]
    eq_rows = [(cf, rhs) for cf, s, rhs in cons if s == "="]

    def stack(rows):
        data, ri, ci, rhs = [], [], [], []
        for k, (cf, b) in enumerate(rows):
            for name, v in cf.items():
                ri.append(k)
                ci.append(seen[name])
                data.append(v)
            rhs.append(b)
        return (sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n)),
                np.array(rhs, dtype=float))

    A_ub, b_ub = stack(ub_rows)
    A_eq, b_eq = stack(eq_rows)
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    for name, (lo, hi) in bounds.items():
        lb[seen[name]] = lo
        ub[seen[name]] = hi
    binary = np.array([name in binaries for name in names], dtype=bool)
    return MilpModel(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                     lb=lb, ub=ub, binary=binary, names=names)
