"""
Sequence ordering problem instances.

Elements are numbered ``0 .. n-1`` (row/column index in the TSPLIB matrix).
Sets of elements are carried around as integer bitmasks throughout the
package; ``1 << e`` is the singleton ``{e}``.
"""

from __future__ import annotations

import graphlib
import io
import os
from dataclasses import dataclass, field

import numpy as np

#: Marker for a transition that is not allowed (TSPLIB writes it as -1).
INFEASIBLE = -1


class SopFormatError(ValueError):
    """Raised when a TSPLIB SOP file cannot be parsed or is invalid."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True, eq=False)
class SopInstance:
    """Transition costs plus a precedence relation.

    ``cost[i][j]`` is the cost of following element ``i`` directly with
    element ``j`` or :data:`INFEASIBLE`.  ``precedence`` holds the direct
    pairs ``(i, j)`` meaning *i must come before j*.
    """

    cost: tuple
    precedence: frozenset
    name: str = "unnamed"
    comment: str = ""
    n: int = field(init=False)
    first_element: int | None = field(init=False)
    last_element: int | None = field(init=False)
    # transitive closure as bitmasks, indexed by element
    pred_mask: tuple = field(init=False, repr=False)
    succ_mask: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cost = tuple(tuple(int(c) for c in row) for row in self.cost)
        n = len(cost)
        if any(len(row) != n for row in cost):
            raise ValueError("cost matrix is not square")
        for i, row in enumerate(cost):
            for j, c in enumerate(row):
                if c < 0 and c != INFEASIBLE:
                    raise ValueError(f"negative cost {c} at ({i}, {j})")
            if row[i] not in (0, INFEASIBLE):
                raise ValueError(f"diagonal entry ({i}, {i}) must be 0 or INFEASIBLE")
        precedence = frozenset((int(i), int(j)) for i, j in self.precedence)
        for i, j in precedence:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad precedence pair ({i}, {j})")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "precedence", precedence)
        object.__setattr__(self, "n", n)

        order = topological_order(n, precedence)
        direct_pred = [0] * n
        for i, j in precedence:
            direct_pred[j] |= 1 << i
        pred = [0] * n
        for e in order:
            acc = direct_pred[e]
            for p in _bits(direct_pred[e]):
                acc |= pred[p]
            pred[e] = acc
        succ = [0] * n
        for e in range(n):
            for p in _bits(pred[e]):
                succ[p] |= 1 << e
        object.__setattr__(self, "pred_mask", tuple(pred))
        object.__setattr__(self, "succ_mask", tuple(succ))

        full = (1 << n) - 1
        first = last = None
        for e in range(n):
            others = full & ~(1 << e)
            if n > 1 and succ[e] == others:
                first = e
            if n > 1 and pred[e] == others:
                last = e
        object.__setattr__(self, "first_element", first)
        object.__setattr__(self, "last_element", last)

    def __eq__(self, other):
        if not isinstance(other, SopInstance):
            return NotImplemented
        return self.cost == other.cost and self.precedence == other.precedence

    def __hash__(self):
        return hash((self.cost, self.precedence))

    @property
    def full_mask(self):
        return (1 << self.n) - 1

    def cost_matrix(self):
        """Costs as an ``int64`` array; infeasible entries hold ``INFEASIBLE``."""
        return np.array(self.cost, dtype=np.int64).reshape(self.n, self.n)

    def sequence_cost(self, seq):
        """Sum of transition costs along ``seq`` (``None`` if a step is infeasible)."""
        total = 0
        for a, b in zip(seq, seq[1:]):
            c = self.cost[a][b]
            if c == INFEASIBLE:
                return None
            total += c
        return total

    def is_feasible(self, seq):
        """True if ``seq`` is a permutation of all elements respecting precedence
        and every transition is allowed."""
        if len(seq) != self.n or sorted(seq) != list(range(self.n)):
            return False
        seen = 0
        for e in seq:
            if self.pred_mask[e] & ~seen:
                return False
            seen |= 1 << e
        return self.sequence_cost(seq) is not None


def topological_order(n, pairs):
    """Topological order of ``0..n-1`` under ``pairs``; raises ``ValueError`` on a cycle."""
    sorter = graphlib.TopologicalSorter({e: () for e in range(n)})
    for i, j in pairs:
        sorter.add(j, i)
    try:
        return list(sorter.static_order())
    except graphlib.CycleError as exc:
        raise ValueError(f"precedence relation has a cycle: {exc.args[1]}") from None


def must_precede(instance, i, j):
    """True iff ``(i, j)`` is one of the instance's direct precedence pairs."""
    n = instance.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"element out of range 0..{n - 1}: ({i}, {j})")
    return (i, j) in instance.precedence


def from_matrix(matrix, name="unnamed", comment=""):
    """Build an instance from a TSPLIB-style matrix.

    An entry ``-1`` at ``(i, j)`` (off the diagonal) means *j must precede i*.
    """
    rows = [[int(c) for c in row] for row in matrix]
    pairs = set()
    for i, row in enumerate(rows):
        for j, c in enumerate(row):
            if c == -1 and i != j:
                pairs.add((j, i))
    return SopInstance(cost=rows, precedence=pairs, name=name, comment=comment)


def parse_tsplib_sop(text, name=None):
    """Parse the text of a TSPLIB ``.sop`` file (FULL_MATRIX only)."""
    if not isinstance(text, str):
        text = text.read()
    header = {}
    tokens = []  # (value, line number)
    in_section = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if in_section:
            if line.startswith("EOF"):
                break
            for tok in line.split():
                tokens.append((tok, lineno))
            continue
        if line.startswith("EOF"):
            break
        if line.startswith("EDGE_WEIGHT_SECTION"):
            in_section = True
            rest = line[len("EDGE_WEIGHT_SECTION"):].lstrip(" :")
            tokens.extend((tok, lineno) for tok in rest.split())
            continue
        if ":" not in line:
            raise SopFormatError(f"expected 'KEY: VALUE', got {line!r}", lineno)
        key, value = line.split(":", 1)
        header[key.strip().upper()] = (value.strip(), lineno)

    if "DIMENSION" not in header:
        raise SopFormatError("missing DIMENSION header")
    dim_text, dim_line = header["DIMENSION"]
    try:
        n = int(dim_text)
    except ValueError:
        raise SopFormatError(f"DIMENSION is not an integer: {dim_text!r}", dim_line) from None
    if n < 1:
        raise SopFormatError(f"DIMENSION must be positive, got {n}", dim_line)
    if "TYPE" in header and header["TYPE"][0].split()[0].upper() not in ("SOP", "ATSP", "TSP"):
        raise SopFormatError(f"unsupported TYPE {header['TYPE'][0]!r}", header["TYPE"][1])
    fmt = header.get("EDGE_WEIGHT_FORMAT")
    if fmt is not None and fmt[0].upper() != "FULL_MATRIX":
        raise SopFormatError(f"unsupported EDGE_WEIGHT_FORMAT {fmt[0]!r}", fmt[1])
    if not in_section:
        raise SopFormatError("missing EDGE_WEIGHT_SECTION")

    values = []
    for tok, lineno in tokens:
        try:
            values.append((int(tok), lineno))
        except ValueError:
            raise SopFormatError(f"non-integer matrix entry {tok!r}", lineno) from None
    # SOP files repeat the dimension as the first token of the section
    if len(values) == n * n + 1:
        if values[0][0] != n:
            raise SopFormatError(
                f"section starts with {values[0][0]} but DIMENSION is {n}", values[0][1]
            )
        values = values[1:]
    if len(values) != n * n:
        last = values[-1][1] if values else dim_line
        raise SopFormatError(f"expected {n}x{n} = {n * n} matrix entries, found {len(values)}", last)

    matrix = [[values[i * n + j][0] for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if matrix[i][j] < -1:
                raise SopFormatError(f"negative cost {matrix[i][j]} at row {i}", values[i * n + j][1])
    if name is None:
        name = header.get("NAME", ("unnamed", 0))[0]
        if name.lower().endswith(".sop"):
            name = name[:-4]
    comment = header.get("COMMENT", ("", 0))[0]
    try:
        return from_matrix(matrix, name=name, comment=comment)
    except ValueError as exc:
        raise SopFormatError(str(exc)) from None


def load_sop(path):
    """Read and parse a ``.sop`` file."""
    with open(path) as fh:
        text = fh.read()
    name = os.path.basename(path)
    if name.lower().endswith(".sop"):
        name = name[:-4]
    return parse_tsplib_sop(text, name=name)


def format_tsplib_sop(instance):
    """Serialize back to TSPLIB SOP text.

    Precedence pairs become ``-1`` at ``(j, i)``; a pair whose mirrored entry
    is not already ``-1`` overrides that cost.
    """
    n = instance.n
    rows = [list(r) for r in instance.cost]
    for i, j in instance.precedence:
        rows[j][i] = -1
    out = [
        f"NAME: {instance.name}.sop",
        "TYPE: SOP",
    ]
    if instance.comment:
        out.append(f"COMMENT: {instance.comment}")
    out += [
        f"DIMENSION: {n}",
        "EDGE_WEIGHT_TYPE: EXPLICIT",
        "EDGE_WEIGHT_FORMAT: FULL_MATRIX",
        "EDGE_WEIGHT_SECTION",
        str(n),
    ]
    out += [" ".join(str(c) for c in row) for row in rows]
    out.append("EOF")
    return "\n".join(out) + "\n"


def random_instance(n, density=0.2, seed=None, max_cost=100, fixed_endpoints=False, name=None):
    """Small random instance for tests and demos.

    Precedence pairs are drawn along a hidden random permutation, so the
    relation is always acyclic.  With ``fixed_endpoints`` the first and last
    elements are pinned the way TSPLIB SOP files do it.
    """
    rng = np.random.default_rng(seed)
    matrix = rng.integers(0, max_cost + 1, size=(n, n)).tolist()
    for i in range(n):
        matrix[i][i] = 0
    if fixed_endpoints and n >= 2:
        inner = list(range(1, n - 1))
        perm = [inner[k] for k in rng.permutation(len(inner))]
    else:
        perm = [int(k) for k in rng.permutation(n)]
    for a in range(len(perm)):
        for b in range(a + 1, len(perm)):
            if rng.random() < density:
                # perm[a] before perm[b]  ->  -1 at (perm[b], perm[a])
                matrix[perm[b]][perm[a]] = -1
    if fixed_endpoints and n >= 2:
        for j in range(1, n):
            matrix[j][0] = -1
        for j in range(n - 1):
            matrix[n - 1][j] = -1
    if name is None:
        name = f"rand{n}_d{int(round(density * 100))}_s{seed}"
    return from_matrix(matrix, name=name)
