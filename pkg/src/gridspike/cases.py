"""Grid case handling: MATPOWER-subset and native JSON parsing, the DC
measurement matrix, and the base-case DC power flow.

Conventions fixed here and relied on everywhere else:

* Measurements are ordered forward line flows (branch order), then reverse
  line flows, then nodal injections for every bus including the reference,
  so M = 2 * (in-service branches) + buses.
* The state is the vector of non-reference bus angles (radians), dimension
  n = buses - 1; the reference angle is identically zero.
* Out-of-service branches are kept in the case but contribute neither
  measurement rows nor susceptance.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

import numpy as np

from .numerics import NumericsError, solve_spd

logger = logging.getLogger(__name__)

__all__ = [
    "Branch",
    "Bus",
    "CaseError",
    "GridCase",
    "MeasurementMatrix",
    "build_measurement_matrix",
    "dc_power_flow",
    "load_case",
    "parse_matpower_case",
    "parse_native_case",
    "serialize_native_case",
    "synthetic_case",
]


class CaseError(ValueError):
    """Raised for malformed or physically invalid case input."""


@dataclass(frozen=True)
class Bus:
    id: int
    load_mw: float = 0.0
    gen_mw: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    reactance_x: float
    in_service: bool = True


@dataclass(frozen=True)
class GridCase:
    """Validated bus/branch topology with per-unit reactances.

    Construction enforces the structural invariants: unique bus ids,
    branch endpoints present, positive reactance on in-service branches,
    reference bus present, and a connected in-service graph.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_mva: float
    reference_bus: int
    name: str = "case"

    def __post_init__(self) -> None:
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise CaseError(f"duplicate bus id(s): {dup}")
        if self.reference_bus not in set(ids):
            raise CaseError(f"reference bus {self.reference_bus} not in bus set")
        if self.base_mva <= 0.0:
            raise CaseError(f"base_mva must be positive, got {self.base_mva}")
        id_set = set(ids)
        for k, br in enumerate(self.branches):
            if br.from_bus not in id_set or br.to_bus not in id_set:
                raise CaseError(
                    f"branch {k} endpoints ({br.from_bus}, {br.to_bus}) not in bus set"
                )
            if br.in_service and br.reactance_x <= 0.0:
                raise CaseError(
                    f"nonpositive reactance x={br.reactance_x} on in-service "
                    f"branch {k} ({br.from_bus}-{br.to_bus})"
                )
        self._check_connected()

    def _check_connected(self) -> None:
        index = {b.id: i for i, b in enumerate(self.buses)}
        parent = list(range(len(self.buses)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for br in self.branches:
            if br.in_service:
                ra, rb = find(index[br.from_bus]), find(index[br.to_bus])
                if ra != rb:
                    parent[rb] = ra
        roots = {find(i) for i in range(len(self.buses))}
        if len(roots) > 1:
            raise CaseError(
                f"graph not connected: in-service branches span {len(roots)} components"
            )

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def in_service_branches(self) -> list[Branch]:
        return [br for br in self.branches if br.in_service]

    @property
    def n_state(self) -> int:
        """State dimension: bus count minus the reference."""
        return len(self.buses) - 1

    @property
    def n_measurements(self) -> int:
        return 2 * len(self.in_service_branches) + len(self.buses)

    def net_injections(self) -> np.ndarray:
        """Per-unit net injection (gen - load)/base for every bus, bus order."""
        return np.array([(b.gen_mw - b.load_mw) / self.base_mva for b in self.buses])


@dataclass(frozen=True)
class MeasurementMatrix:
    """Dense M x n DC measurement matrix with labelled rows.

    ``row_labels[i]`` is (kind, element) with kind one of ``flow_fwd``,
    ``flow_rev``, ``injection``; element is the branch position or bus id.
    Columns follow bus order with the reference column removed.
    """

    h: np.ndarray
    row_labels: tuple[tuple[str, int], ...]
    bus_ids: tuple[int, ...]
    reference_bus: int

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def state_bus_ids(self) -> tuple[int, ...]:
        return tuple(b for b in self.bus_ids if b != self.reference_bus)


def build_measurement_matrix(case: GridCase) -> MeasurementMatrix:
    """Assemble the forward-flow / reverse-flow / injection matrix.

    The forward-flow row of branch (i -> j, reactance x) carries +1/x in
    bus i's column and -1/x in bus j's column (reference column dropped);
    reverse rows are the negated forward rows; each injection row is the
    signed sum of the flow rows incident to that bus.
    """
    buses = case.bus_ids
    col = {bid: k for k, bid in enumerate(b for b in buses if b != case.reference_bus)}
    branches = case.in_service_branches
    n = case.n_state
    m = case.n_measurements

    h = np.zeros((m, n))
    labels: list[tuple[str, int]] = []
    n_br = len(branches)
    for k, br in enumerate(branches):
        susceptance = 1.0 / br.reactance_x
        if br.from_bus != case.reference_bus:
            h[k, col[br.from_bus]] = susceptance
        if br.to_bus != case.reference_bus:
            h[k, col[br.to_bus]] = -susceptance
        labels.append(("flow_fwd", k))
    h[n_br : 2 * n_br] = -h[:n_br]
    labels.extend(("flow_rev", k) for k in range(n_br))
    for i, bid in enumerate(buses):
        row = 2 * n_br + i
        for k, br in enumerate(branches):
            if br.from_bus == bid:
                h[row] += h[k]
            elif br.to_bus == bid:
                h[row] -= h[k]
        labels.append(("injection", bid))

    return MeasurementMatrix(
        h=h,
        row_labels=tuple(labels),
        bus_ids=tuple(buses),
        reference_bus=case.reference_bus,
    )


def _reduced_susceptance(case: GridCase) -> np.ndarray:
    ids = [b for b in case.bus_ids if b != case.reference_bus]
    col = {bid: k for k, bid in enumerate(ids)}
    b_mat = np.zeros((len(ids), len(ids)))
    for br in case.in_service_branches:
        y = 1.0 / br.reactance_x
        i = col.get(br.from_bus)
        j = col.get(br.to_bus)
        if i is not None:
            b_mat[i, i] += y
        if j is not None:
            b_mat[j, j] += y
        if i is not None and j is not None:
            b_mat[i, j] -= y
            b_mat[j, i] -= y
    return b_mat


def dc_power_flow(case: GridCase) -> np.ndarray:
    """Base-case DC angles (radians) for the non-reference buses.

    Net injections are shifted so the system balances, with the imbalance
    absorbed at the reference bus; the reduced susceptance system
    B theta = p is then solved directly.
    """
    p = case.net_injections()
    imbalance = p.sum()
    if abs(imbalance) > 0.0:
        ref_pos = case.bus_ids.index(case.reference_bus)
        p[ref_pos] -= imbalance
    p_reduced = np.array(
        [p[i] for i, b in enumerate(case.buses) if b.id != case.reference_bus]
    )
    b_mat = _reduced_susceptance(case)
    try:
        return solve_spd(b_mat, p_reduced)
    except NumericsError as exc:
        raise CaseError(
            "singular reduced susceptance matrix (grid disconnected?)"
        ) from exc


# ---------------------------------------------------------------------------
# MATPOWER-subset parser
# ---------------------------------------------------------------------------

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[", re.MULTILINE)

# columns we consume from each block (0-based)
_BUS_ID, _BUS_TYPE, _BUS_PD = 0, 1, 2
_GEN_BUS, _GEN_PG = 0, 1
_BR_FROM, _BR_TO, _BR_X, _BR_STATUS = 0, 1, 3, 10


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_matrix(name: str, body: str, start_line: int) -> list[list[float]]:
    rows: list[list[float]] = []
    for k, raw in enumerate(re.split(r"[;\n]", body)):
        stripped = raw.strip()
        if not stripped:
            continue
        try:
            rows.append([float(tok) for tok in stripped.split()])
        except ValueError as exc:
            raise CaseError(
                f"syntax error in mpc.{name} near line {start_line + k}: "
                f"cannot parse row {stripped!r}"
            ) from exc
    width = {len(r) for r in rows}
    if len(width) > 1:
        raise CaseError(f"ragged rows in mpc.{name}: widths {sorted(width)}")
    return rows


def parse_matpower_case(text: str, name: str = "case") -> GridCase:
    """Parse the baseMVA/bus/gen/branch subset of a MATPOWER .m case.

    Other mpc fields are ignored with a warning.  Raises CaseError with the
    offending block and line for syntax problems, and for semantic problems
    (missing block, no type-3 bus, duplicate ids, nonpositive reactance).
    """
    clean = _strip_comments(text)

    base_match = re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;", clean)
    if base_match is None:
        raise CaseError("missing block: mpc.baseMVA")
    base_mva = float(base_match.group(1))

    blocks: dict[str, list[list[float]]] = {}
    for match in _MATRIX_RE.finditer(clean):
        blk = match.group(1)
        end = clean.find("]", match.end())
        if end < 0:
            line = clean.count("\n", 0, match.start()) + 1
            raise CaseError(f"syntax error: unterminated mpc.{blk} block opened at line {line}")
        start_line = clean.count("\n", 0, match.end()) + 1
        if blk in ("bus", "gen", "branch"):
            blocks[blk] = _parse_matrix(blk, clean[match.end() : end], start_line)
        else:
            logger.warning("ignoring unsupported MATPOWER field mpc.%s", blk)

    for required in ("bus", "gen", "branch"):
        if required not in blocks:
            raise CaseError(f"missing block: mpc.{required}")

    reference = None
    buses = []
    loads: dict[int, float] = {}
    for row in blocks["bus"]:
        bid = int(row[_BUS_ID])
        loads[bid] = row[_BUS_PD]
        if int(row[_BUS_TYPE]) == 3:
            reference = bid
        buses.append(bid)
    if reference is None:
        raise CaseError("no type-3 (reference) bus in mpc.bus")

    gen_mw: dict[int, float] = {b: 0.0 for b in buses}
    for row in blocks["gen"]:
        bid = int(row[_GEN_BUS])
        if bid in gen_mw:
            gen_mw[bid] += row[_GEN_PG]

    branches = []
    for row in blocks["branch"]:
        status = True if len(row) <= _BR_STATUS else bool(int(row[_BR_STATUS]))
        branches.append(
            Branch(
                from_bus=int(row[_BR_FROM]),
                to_bus=int(row[_BR_TO]),
                reactance_x=row[_BR_X],
                in_service=status,
            )
        )

    return GridCase(
        buses=tuple(Bus(id=b, load_mw=loads[b], gen_mw=gen_mw[b]) for b in buses),
        branches=tuple(branches),
        base_mva=base_mva,
        reference_bus=reference,
        name=name,
    )


# ---------------------------------------------------------------------------
# native JSON format
# ---------------------------------------------------------------------------

def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise CaseError(f"schema violation at {path}: missing key {key!r}")
    value = obj[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise CaseError(f"schema violation at {path}/{key}: expected number")
        return float(value)
    if kind is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise CaseError(f"schema violation at {path}/{key}: expected integer")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise CaseError(f"schema violation at {path}/{key}: expected array")
        return value
    raise AssertionError(kind)


def parse_native_case(text: str, name: str = "case") -> GridCase:
    """Parse the native JSON case format (see serialize_native_case)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"schema violation at /: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CaseError("schema violation at /: expected object")

    base_mva = _require(doc, "base_mva", float, "")
    reference = _require(doc, "reference_bus", int, "")
    buses = []
    for i, entry in enumerate(_require(doc, "buses", list, "")):
        if not isinstance(entry, dict):
            raise CaseError(f"schema violation at /buses/{i}: expected object")
        buses.append(
            Bus(
                id=_require(entry, "id", int, f"/buses/{i}"),
                load_mw=_require(entry, "load_mw", float, f"/buses/{i}"),
                gen_mw=_require(entry, "gen_mw", float, f"/buses/{i}"),
            )
        )
    branches = []
    for i, entry in enumerate(_require(doc, "branches", list, "")):
        if not isinstance(entry, dict):
            raise CaseError(f"schema violation at /branches/{i}: expected object")
        status = _require(entry, "status", int, f"/branches/{i}")
        if status not in (0, 1):
            raise CaseError(f"schema violation at /branches/{i}/status: expected 0 or 1")
        branches.append(
            Branch(
                from_bus=_require(entry, "from", int, f"/branches/{i}"),
                to_bus=_require(entry, "to", int, f"/branches/{i}"),
                reactance_x=_require(entry, "x", float, f"/branches/{i}"),
                in_service=bool(status),
            )
        )
    return GridCase(
        buses=tuple(buses),
        branches=tuple(branches),
        base_mva=base_mva,
        reference_bus=reference,
        name=name,
    )


def serialize_native_case(case: GridCase) -> str:
    """Emit the native JSON format; parse_native_case round-trips it."""
    doc = {
        "base_mva": case.base_mva,
        "reference_bus": case.reference_bus,
        "buses": [
            {"id": b.id, "load_mw": b.load_mw, "gen_mw": b.gen_mw} for b in case.buses
        ],
        "branches": [
            {
                "from": br.from_bus,
                "to": br.to_bus,
                "x": br.reactance_x,
                "status": 1 if br.in_service else 0,
            }
            for br in case.branches
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_case(path: str, fmt: str = "auto", name: str | None = None) -> GridCase:
    """Read a case file; format by extension unless given explicitly."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "auto":
        fmt = "native" if str(path).endswith(".json") else "matpower"
    case_name = name if name is not None else str(path)
    if fmt == "matpower":
        return parse_matpower_case(text, name=case_name)
    if fmt == "native":
        return parse_native_case(text, name=case_name)
    raise ValueError(f"unknown case format {fmt!r}")


# ---------------------------------------------------------------------------
# synthetic large cases
# ---------------------------------------------------------------------------

def synthetic_case(
    n_buses: int,
    n_branches: int,
    seed: int = 0,
    x_range: tuple[float, float] = (0.01, 1.5),
    load_range_mw: tuple[float, float] = (0.0, 40.0),
) -> GridCase:
    """Deterministic random connected case for large-system scaling runs.

    A random spanning tree guarantees connectivity; the remaining branches
    close random loops (no duplicate pairs, no self-loops).  Reactances are
    log-uniform in ``x_range`` per unit -- real transmission grids mix short
    ties with long/weak corridors, and that heterogeneity is what produces
    a wide spike spectrum -- loads uniform in ``load_range_mw``, matched by
    a large generator at the reference plus a few distributed ones so the
    base-case flows are nontrivial.
    """
    if n_branches < n_buses - 1:
        raise CaseError("need at least n_buses - 1 branches for connectivity")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    ids = list(range(1, n_buses + 1))

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    attached = [ids[0]]
    for bid in ids[1:]:
        other = attached[int(rng.integers(len(attached)))]
        edge = (min(bid, other), max(bid, other))
        edges.append(edge)
        seen.add(edge)
        attached.append(bid)
    max_edges = n_buses * (n_buses - 1) // 2
    if n_branches > max_edges:
        raise CaseError(f"cannot place {n_branches} distinct branches on {n_buses} buses")
    while len(edges) < n_branches:
        i, j = rng.integers(1, n_buses + 1, size=2)
        if i == j:
            continue
        edge = (int(min(i, j)), int(max(i, j)))
        if edge in seen:
            continue
        edges.append(edge)
        seen.add(edge)

    loads = rng.uniform(*load_range_mw, size=n_buses)
    gen_buses = list(rng.choice(ids[1:], size=max(1, n_buses // 10), replace=False))
    total_load = float(loads.sum())
    gen = {b: 0.0 for b in ids}
    for b in gen_buses:
        gen[int(b)] = total_load / (2 * len(gen_buses))
    gen[ids[0]] = total_load / 2.0

    xs = np.exp(rng.uniform(np.log(x_range[0]), np.log(x_range[1]), size=n_branches))
    return GridCase(
        buses=tuple(Bus(id=b, load_mw=float(loads[k]), gen_mw=gen[b]) for k, b in enumerate(ids)),
        branches=tuple(
            Branch(from_bus=e[0], to_bus=e[1], reactance_x=float(xs[k]))
            for k, e in enumerate(edges)
        ),
        base_mva=100.0,
        reference_bus=ids[0],
        name=f"synthetic-{n_buses}bus",
    )
