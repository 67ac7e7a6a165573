"""Verification sessions and dataplane queries.

A session freezes the affected classes of one update (or the whole header
space), the per-port forwarding vectors derived from longest-prefix match,
and the per-router ACL/rewrite structures. Queries propagate a state vector
hop by hop: filter, then rewrite, then project onto the outgoing port, and
fold the per-path results into reachability, loop, blackhole, or policy
answers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

from .dataset import NetworkSpec, UpdateEvent
from .errors import (DimensionMismatch, InconsistentTable, NotFound,
                     PbrProtected, UnknownLink, UnknownRouter)
from .prefixes import ROOT, Prefix
from .trie import AffectedSets, HeaderTrie, UpdateOutcome
from .vectors import (FilterVector, ForwardingVector, StateVector,
                      TransformMatrix, apply_transform)


@dataclass
class Topology:
    nodes: set[str]
    edges: list[tuple[str, int, str, int]]
    port_link: dict[tuple[str, int], tuple[str, int]] = field(default_factory=dict)

    @classmethod
    def from_spec(cls, spec: NetworkSpec) -> "Topology":
        topo = cls(nodes=set(spec.routers), edges=list(spec.edges))
        for a, pa, b, pb in topo.edges:
            topo.port_link[(a, pa)] = (b, pb)
            topo.port_link[(b, pb)] = (a, pa)
        return topo

    def find_edge(self, a: str, pa: int, b: str, pb: int):
        for edge in self.edges:
            if edge == (a, pa, b, pb) or edge == (b, pb, a, pa):
                return edge
        raise UnknownLink(f"no link {a}:{pa}-{b}:{pb}")

    def remove_edge(self, edge: tuple[str, int, str, int]) -> None:
        a, pa, b, pb = edge
        self.edges.remove(edge)
        del self.port_link[(a, pa)]
        del self.port_link[(b, pb)]


# ----------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class PathResult:
    path: tuple[str, ...]
    b_final: StateVector
    per_hop_errors: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class ReachabilityReport:
    reachable: frozenset[Prefix]
    per_path: tuple[PathResult, ...]
    total_paths: int
    paths_explored: int
    truncated: bool
    reachable_vector: StateVector


@dataclass(frozen=True)
class LoopReport:
    cycle: tuple[str, ...] | None
    headers: frozenset[Prefix]

    @property
    def found(self) -> bool:
        return self.cycle is not None


@dataclass(frozen=True)
class BlackholeReport:
    router: str
    headers: frozenset[Prefix]


@dataclass(frozen=True)
class PolicyViolation:
    path: tuple[str, ...]
    constraint: str


@dataclass(frozen=True)
class PolicyReport:
    violations: tuple[PolicyViolation, ...]


@dataclass(frozen=True)
class WhatIfResult:
    triggered_deletions: int
    report: ReachabilityReport


# ----------------------------------------------------------------------
# session

class VerificationSession:
    """Immutable query context over one affected-set computation."""

    def __init__(self, affected: AffectedSets, topology: Topology,
                 masks: dict[tuple[str, int], int],
                 filter_bits: dict[str, int],
                 transforms: dict[str, TransformMatrix]):
        self.affected = affected
        self.topology = topology
        self.m = affected.m
        self.classes = affected.classes
        self._masks = masks
        self.filter_bits = filter_bits
        self.transforms = transforms
        self.has_transforms = bool(transforms)
        # group (port, mask) per router; mask insertion order is the
        # deterministic class-then-router resolution order
        ports: dict[str, list[tuple[int, int]]] = {}
        for (r, p), mask in masks.items():
            lst = ports.get(r)
            if lst is None:
                ports[r] = [(p, mask)]
            else:
                lst.append((p, mask))
        self.ports_by_router = ports
        self.touched: set[tuple[str, int]] = set()
        self._fwd_vectors: dict[tuple[str, int], ForwardingVector] | None = None
        self._filters: dict[str, FilterVector] | None = None
        self._union_masks: dict[str, int] = {}

    @property
    def fwd_vectors(self) -> dict[tuple[str, int], ForwardingVector]:
        if self._fwd_vectors is None:
            self._fwd_vectors = {
                (r, p): ForwardingVector(mask, self.m, (r, p))
                for (r, p), mask in self._masks.items()
            }
        return self._fwd_vectors

    @property
    def filters(self) -> dict[str, FilterVector]:
        if self._filters is None:
            self._filters = {r: FilterVector(bits, self.m, r)
                             for r, bits in self.filter_bits.items()}
        return self._filters

    def union_mask(self, router: str) -> int:
        mask = self._union_masks.get(router)
        if mask is None:
            mask = 0
            for _, pmask in self.ports_by_router.get(router, ()):
                mask |= pmask
            self._union_masks[router] = mask
        return mask

    def all_ones(self) -> StateVector:
        return StateVector.ones(self.m)

    def query_vector(self, prefixes) -> StateVector:
        """b_init restricted to classes contained in any of `prefixes`."""
        bits = 0
        for j, c in enumerate(self.classes):
            if any(p.contains(c) for p in prefixes):
                bits |= 1 << j
        return StateVector(bits, self.m)

    def decode(self, bits: int) -> frozenset[Prefix]:
        out = set()
        rest = bits
        while rest:
            low = rest & -rest
            out.add(self.classes[low.bit_length() - 1])
            rest ^= low
        return frozenset(out)


def build_session(affected: AffectedSets, topology: Topology,
                  tables: dict[str, dict[Prefix, int]] | None = None) -> VerificationSession:
    """Materialize per-port forwarding vectors, filters, and rewrites.

    The longest-prefix winners were resolved during the affected-set
    traversal, so this is a single pass over the per-class resolution maps.
    `tables`, when given, is validated against the topology.
    """
    if tables is not None:
        for r in tables:
            if r not in topology.nodes:
                raise InconsistentTable(f"rules reference unknown router {r!r}")
    m = affected.m
    masks: dict[tuple[str, int], int] = {}
    for j, fwd in enumerate(affected.fwd_resolution):
        bit = 1 << j
        for r, p in fwd.items():
            key = (r, p)
            prev = masks.get(key)
            masks[key] = bit if prev is None else prev | bit

    filter_bits: dict[str, int] = {}
    full = (1 << m) - 1
    for j, acl in enumerate(affected.acl_resolution):
        for r, permit in acl.items():
            if r not in filter_bits:
                filter_bits[r] = full
            if not permit:
                filter_bits[r] &= ~(1 << j)

    transforms: dict[str, TransformMatrix] = {}
    starts = [lo for lo, _ in affected.class_ranges]
    columns: dict[str, dict[int, int]] = {}
    for j, xmap in enumerate(affected.xform_resolution):
        if not xmap:
            continue
        lo, hi = affected.class_ranges[j]
        for r, (match_lo, out) in xmap.items():
            img_lo = (out.value << (affected.width - out.length)) + (lo - match_lo)
            img_hi = img_lo + (hi - lo)
            row = 0
            i = bisect.bisect_left(starts, img_lo)
            while i < m and starts[i] <= img_hi:
                if affected.class_ranges[i][1] <= img_hi:
                    row |= 1 << i
                i += 1
            columns.setdefault(r, {})[j] = row
    for r, cols in columns.items():
        transforms[r] = TransformMatrix(m, cols)
    return VerificationSession(affected, topology, masks, filter_bits, transforms)


# ----------------------------------------------------------------------
# traversals

def verify_reachability(session: VerificationSession, src: str, dst: str,
                        b_init: StateVector | None = None, *,
                        max_paths: int | None = None,
                        max_hops: int | None = None) -> ReachabilityReport:
    """Depth-first reachability over the affected ports.

    Paths are simple (no router revisited); when rewrites are active the
    pruning key is the (router, vector) pair instead, since a rewrite can
    legitimately route changed traffic back through an earlier router.
    """
    topo = session.topology
    for r in (src, dst):
        if r not in topo.nodes:
            raise UnknownRouter(r)
    m = session.m
    if b_init is None:
        b_init = StateVector.ones(m)
    if b_init.width != m:
        raise DimensionMismatch(f"b_init width {b_init.width} != {m}")

    if src == dst:
        path = PathResult((src,), b_init, ())
        return ReachabilityReport(
            reachable=session.decode(b_init.bits), per_path=(path,),
            total_paths=1, paths_explored=1, truncated=False,
            reachable_vector=b_init)

    masks_by_router = session.ports_by_router
    fbits = session.filter_bits
    transforms = session.transforms
    link = topo.port_link
    touched = session.touched
    by_state = session.has_transforms

    per_path: list[PathResult] = []
    truncated = False
    explored = 0
    # entries: router, incoming bits, path so far, per-hop errors, visited states
    stack = [(src, b_init.bits, (), (), ())]
    while stack:
        r, bits, path, errs, states = stack.pop()
        explored += 1
        if r == dst:
            per_path.append(PathResult(path + (r,), StateVector(bits, m), errs))
            if max_paths is not None and len(per_path) >= max_paths:
                truncated = True
                break
            continue
        if max_hops is not None and len(path) >= max_hops:
            truncated = True
            continue
        g = fbits.get(r)
        b1 = bits & g if g is not None else bits
        t = transforms.get(r)
        if t is not None:
            b1 = apply_transform(t, StateVector(b1, m)).bits
        if b1 == 0:
            continue
        new_path = path + (r,)
        new_states = states + ((r, bits),) if by_state else ()
        for port, vmask in masks_by_router.get(r, ()):
            touched.add((r, port))
            out = vmask & b1
            if out == 0:
                continue
            peer = link.get((r, port))
            if peer is None:
                continue                        # host-facing: exits here
            nr = peer[0]
            if by_state:
                if (nr, out) in new_states:
                    continue
            elif nr in new_path:
                continue
            err = (r, math.sqrt((b1 ^ out).bit_count()))
            stack.append((nr, out, new_path, errs + (err,), new_states))

    union = 0
    for res in per_path:
        union |= res.b_final.bits
    return ReachabilityReport(
        reachable=session.decode(union),
        per_path=tuple(per_path),
        total_paths=len(per_path),
        paths_explored=explored,
        truncated=truncated,
        reachable_vector=StateVector(union, m),
    )


def detect_loop(session: VerificationSession, src: str,
                b_init: StateVector | None = None) -> LoopReport:
    """First confirmed forwarding cycle reachable from `src`, if any.

    A cycle is confirmed when the next hop already lies on the current path
    and the projected vector is still non-zero; the live classes at that
    point are the looping headers.
    """
    topo = session.topology
    if src not in topo.nodes:
        raise UnknownRouter(src)
    m = session.m
    if b_init is None:
        b_init = StateVector.ones(m)
    if b_init.width != m:
        raise DimensionMismatch(f"b_init width {b_init.width} != {m}")

    fbits = session.filter_bits
    transforms = session.transforms
    link = topo.port_link
    stack = [(src, b_init.bits, ())]
    while stack:
        r, bits, path = stack.pop()
        g = fbits.get(r)
        b1 = bits & g if g is not None else bits
        t = transforms.get(r)
        if t is not None:
            b1 = apply_transform(t, StateVector(b1, m)).bits
        if b1 == 0:
            continue
        new_path = path + (r,)
        for port, vmask in session.ports_by_router.get(r, ()):
            session.touched.add((r, port))
            out = vmask & b1
            if out == 0:
                continue
            peer = link.get((r, port))
            if peer is None:
                continue
            nr = peer[0]
            if nr in new_path:
                cycle = new_path[new_path.index(nr):]
                return LoopReport(cycle=cycle, headers=session.decode(out))
            stack.append((nr, out, new_path))
    return LoopReport(cycle=None, headers=frozenset())


def detect_blackhole(session: VerificationSession, src: str,
                     b_init: StateVector | None = None) -> list[BlackholeReport]:
    """Routers that drop traffic for lack of a matching rule.

    Explores the reachable (router, vector) state space from `src`
    (memoized, so cyclic networks terminate) and reports, per router, the
    classes that arrive but match no forwarding rule there.
    """
    topo = session.topology
    if src not in topo.nodes:
        raise UnknownRouter(src)
    m = session.m
    if b_init is None:
        b_init = StateVector.ones(m)
    if b_init.width != m:
        raise DimensionMismatch(f"b_init width {b_init.width} != {m}")

    fbits = session.filter_bits
    transforms = session.transforms
    link = topo.port_link
    holes: dict[str, int] = {}
    seen = {(src, b_init.bits)}
    stack = [(src, b_init.bits)]
    while stack:
        r, bits = stack.pop()
        g = fbits.get(r)
        b1 = bits & g if g is not None else bits
        t = transforms.get(r)
        if t is not None:
            b1 = apply_transform(t, StateVector(b1, m)).bits
        if b1 == 0:
            continue
        residual = b1 & ~session.union_mask(r)
        if residual:
            holes[r] = holes.get(r, 0) | residual
        for port, vmask in session.ports_by_router.get(r, ()):
            session.touched.add((r, port))
            out = vmask & b1
            if out == 0:
                continue
            peer = link.get((r, port))
            if peer is None:
                continue
            state = (peer[0], out)
            if state not in seen:
                seen.add(state)
                stack.append(state)
    return [BlackholeReport(router=r, headers=session.decode(bits))
            for r, bits in sorted(holes.items())]


def check_policy(report: ReachabilityReport, max_path_len: int | None = None,
                 waypoints: set[str] | None = None) -> PolicyReport:
    """Path-length and waypoint constraints over a reachability report.

    PBR protection is not checked here: protected prefixes reject non-PBR
    updates at insertion time (see NetworkState.apply_update).
    """
    violations: list[PolicyViolation] = []
    for res in report.per_path:
        if max_path_len is not None and len(res.path) > max_path_len:
            violations.append(PolicyViolation(
                res.path, f"path length {len(res.path)} exceeds {max_path_len}"))
        for w in sorted(waypoints or ()):
            if w not in res.path:
                violations.append(PolicyViolation(res.path, f"missing waypoint {w}"))
    return PolicyReport(violations=tuple(violations))


# ----------------------------------------------------------------------
# network state (trie + tables + topology)

class NetworkState:
    """Mutable network model backing incremental verification.

    Single-writer: updates require exclusive access. Sessions built from it
    are immutable snapshots and may be queried concurrently.
    """

    def __init__(self, spec: NetworkSpec, trie: HeaderTrie, topology: Topology):
        self.spec = spec
        self.trie = trie
        self.topology = topology
        self.protected = spec.protected_prefixes()
        self.homes: dict[Prefix, str] = {}
        self._rebuild_homes()

    @property
    def tables(self) -> dict[str, dict[Prefix, int]]:
        return self.spec.rules

    @classmethod
    def from_spec(cls, spec: NetworkSpec, copy: bool = True) -> "NetworkState":
        spec = spec.copy() if copy else spec
        topology = Topology.from_spec(spec)
        trie = HeaderTrie(spec.width)
        by_prefix: dict[Prefix, dict[str, int]] = {}
        for r in spec.routers:
            for pfx, port in spec.rules[r].items():
                owners = by_prefix.get(pfx)
                if owners is None:
                    by_prefix[pfx] = {r: port}
                else:
                    owners[r] = port
        for pfx, owners in by_prefix.items():
            trie.insert_owners(pfx, owners, materialize=False)
        for r, acl in spec.acls.items():
            for pfx, permit in acl.items():
                trie.insert_acl(pfx, r, permit, materialize=False)
        for r, table in spec.transforms.items():
            for match, out in table.items():
                trie.insert_transform(match, r, out, materialize=False)
                trie.insert_marker(out, materialize=False)
        trie.materialize_iatomic()
        state = cls(spec, trie, topology)
        state._align_transforms()
        return state

    def _rebuild_homes(self) -> None:
        self.homes.clear()
        link = self.topology.port_link
        for r in self.spec.routers:
            for pfx, port in self.spec.rules.get(r, {}).items():
                if (r, port) not in link and pfx not in self.homes:
                    self.homes[pfx] = r

    def home_of(self, prefix: Prefix) -> str | None:
        """Router delivering `prefix` (or its closest covering prefix) locally."""
        value, length = prefix.value, prefix.length
        while length >= 0:
            home = self.homes.get(Prefix(value, length))
            if home is not None:
                return home
            value >>= 1
            length -= 1
        return None

    def _align_transforms(self) -> None:
        """Mirror match-side class boundaries into rewrite targets.

        Guarantees that the rewritten image of every class is an exact union
        of classes, so the class-level rewrite matrix loses no precision.
        Iterates to a fixpoint because mirroring under one target can
        fragment another rule's match subtree.
        """
        rules = [(match, out)
                 for table in self.spec.transforms.values()
                 for match, out in table.items()]
        if not rules:
            return
        trie = self.trie
        for _ in range(64):
            changed = False
            for match, out in rules:
                path = trie._walk(match)
                if path is None:
                    continue
                top = path[-1]
                suffixes: list[tuple[int, int]] = []
                stack = [(top, 0, 0)]
                while stack:
                    node, rel_val, rel_len = stack.pop()
                    if node.zero is None and node.one is None:
                        if rel_len:
                            suffixes.append((rel_val, rel_len))
                        continue
                    for bit, child in ((0, node.zero), (1, node.one)):
                        if child is not None:
                            stack.append((child, (rel_val << 1) | bit, rel_len + 1))
                for rel_val, rel_len in suffixes:
                    target = Prefix((out.value << rel_len) | rel_val,
                                    out.length + rel_len)
                    existing = trie._walk(target)
                    if existing is None or not existing[-1].marker:
                        trie.insert_marker(target, materialize=False)
                        changed = True
            if not changed:
                break
        else:
            raise RuntimeError("transform class alignment did not converge")
        trie.materialize_iatomic()

    def apply_update(self, event: UpdateEvent, *, pbr: bool = False) -> UpdateOutcome:
        if event.router not in self.spec.rules:
            raise UnknownRouter(event.router)
        if not pbr and event.prefix in self.protected:
            raise PbrProtected(f"{event.prefix} is PBR-protected")
        table = self.spec.rules[event.router]
        if event.op == "insert":
            outcome = self.trie.insert_header(event.prefix, (event.router, event.port))
            table[event.prefix] = event.port
            if (event.router, event.port) not in self.topology.port_link:
                self.homes.setdefault(event.prefix, event.router)
        elif event.op == "delete":
            if table.get(event.prefix) != event.port:
                raise NotFound(f"no rule ({event.prefix}, {event.port}) at {event.router}")
            outcome = self.trie.delete_header(event.prefix, (event.router, event.port))
            del table[event.prefix]
        else:
            raise ValueError(f"unknown op {event.op!r}")
        if self.spec.transforms:
            self._align_transforms()
        return outcome

    def affected_for(self, prefix: Prefix) -> AffectedSets:
        return self.trie.compute_affected(prefix, clamp=True)

    def session(self, update_prefix: Prefix | None = None,
                affected: AffectedSets | None = None) -> VerificationSession:
        if affected is None:
            affected = self.trie.compute_affected(update_prefix or ROOT, clamp=True)
        return build_session(affected, self.topology)


# ----------------------------------------------------------------------
# batch and what-if queries

def merge_affected(sets: list[AffectedSets]) -> AffectedSets:
    """Union of affected-set computations taken on one trie state."""
    if len(sets) == 1:
        return sets[0]
    width = sets[0].width
    by_id: dict[int, tuple] = {}
    for a in sets:
        for i, cid in enumerate(a.s_affected):
            if cid not in by_id:
                by_id[cid] = (a.class_ranges[i][0], cid, a.classes[i],
                              a.class_ranges[i], a.fwd_resolution[i],
                              a.acl_resolution[i], a.xform_resolution[i])
    entries = sorted(by_id.values())
    ids = tuple(e[1] for e in entries)
    classes = tuple(e[2] for e in entries)
    return AffectedSets(
        s_affected=ids,
        p_affected=frozenset((r, p) for e in entries for r, p in e[4].items()),
        id_to_prefix=dict(zip(ids, classes)),
        classes=classes,
        class_ranges=tuple(e[3] for e in entries),
        width=width,
        fwd_resolution=tuple(e[4] for e in entries),
        acl_resolution=tuple(e[5] for e in entries),
        xform_resolution=tuple(e[6] for e in entries),
    )


def batch_update(state: NetworkState, updates: list[UpdateEvent], src: str,
                 dst: str, b_init: StateVector | None = None
                 ) -> tuple[ReachabilityReport, AffectedSets]:
    """Apply a batch, then answer one verification over the union of the
    per-update affected sets. Returns the report and the merged sets."""
    for ev in updates:
        state.apply_update(ev)
    if updates:
        affected = merge_affected([state.affected_for(ev.prefix) for ev in updates])
    else:
        affected = state.affected_for(ROOT)
    session = state.session(affected=affected)
    report = verify_reachability(session, src, dst, b_init)
    return report, affected


def whatif_link_down(state: NetworkState, link: tuple[str, int, str, int],
                     src: str, dst: str) -> WhatIfResult:
    """Fail a link: drop the edge, delete the rules that forwarded over it,
    and verify reachability as one batch."""
    edge = state.topology.find_edge(*link)
    a, pa, b, pb = edge
    deletions: list[UpdateEvent] = []
    seq = 0
    for router, port in ((a, pa), (b, pb)):
        for pfx, rule_port in sorted(state.tables.get(router, {}).items(),
                                     key=lambda kv: (kv[0].value, kv[0].length)):
            if rule_port == port:
                deletions.append(UpdateEvent("delete", router, pfx, port, seq))
                seq += 1
    state.topology.remove_edge(edge)
    state.spec.edges.remove(edge)
    report, _ = batch_update(state, deletions, src, dst)
    return WhatIfResult(triggered_deletions=len(deletions), report=report)
