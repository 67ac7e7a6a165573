"""Network-wide binary tree over rule headers.

Every rule header (forwarding, ACL, transform, or plain boundary marker)
terminates a root-to-node path. Leaves are the non-overlapping header
classes: a rule header ending at a leaf is *atomic*, a rule header ending at
an interior node is a *supernet*, and *iatomic* leaves are synthesized so the
leaf set exactly partitions every supernet's range. Updating a rule
re-derives labels and iatomic leaves locally, and `compute_affected` reports
the classes and (router, port) owners whose behavior the update may have
changed.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import IntEnum

from .errors import NodeMissing, NotFound, PrefixTooLong
from .prefixes import Prefix


class Label(IntEnum):
    NONE = 0
    SUPERNET = 1
    ATOMIC = 2
    IATOMIC = 3


# packed (depth, port) resolution entries; ports must fit in _PORT_BITS
_PORT_BITS = 24
_PORT_MASK = (1 << _PORT_BITS) - 1


class TrieNode:
    __slots__ = ("zero", "one", "owners", "acl", "xform", "marker",
                 "label", "leaf_id", "value", "depth", "listed")

    def __init__(self, value: int, depth: int):
        self.zero: TrieNode | None = None
        self.one: TrieNode | None = None
        self.owners: dict[str, int] = {}        # router -> port (one action per router)
        self.acl: dict[str, bool] = {}          # router -> permit
        self.xform: dict[str, Prefix] = {}      # router -> rewrite target
        self.marker = False
        self.label = Label.NONE
        self.leaf_id: int | None = None
        self.value = value                      # path bits as an integer
        self.depth = depth
        self.listed = False                     # present in the trie's leaf list

    @property
    def is_leaf(self) -> bool:
        return self.zero is None and self.one is None

    @property
    def is_rule(self) -> bool:
        return bool(self.owners or self.acl or self.xform or self.marker)

    def prefix(self) -> Prefix:
        return Prefix(self.value, self.depth)


@dataclass(frozen=True, slots=True)
class UpdateOutcome:
    created_nodes: int
    new_leaf: bool


@dataclass(frozen=True)
class AffectedSets:
    """Classes and ports whose behavior a rule update may change.

    Coordinate j of every session vector corresponds to ``s_affected[j]``;
    classes are ordered by range start (in-order leaf position). The
    per-class resolution maps carry the longest-prefix winners gathered
    during the affected-set traversal, so verification sessions can be built
    without another pass over the trie.
    """

    s_affected: tuple[int, ...]
    p_affected: frozenset[tuple[str, int]]
    id_to_prefix: dict[int, Prefix]
    classes: tuple[Prefix, ...]
    class_ranges: tuple[tuple[int, int], ...]
    width: int
    fwd_resolution: tuple[dict[str, int], ...] = field(repr=False)
    acl_resolution: tuple[dict[str, bool], ...] = field(repr=False)
    xform_resolution: tuple[dict[str, tuple[int, Prefix]], ...] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.s_affected)


class HeaderTrie:
    """Binary tree over all rule headers for a fixed header width."""

    def __init__(self, width: int):
        if width < 1:
            raise ValueError("header width must be >= 1")
        self.width = width
        self.root = TrieNode(0, 0)
        self._leaf_keys: list[int] = []          # range starts, sorted
        self._leaf_nodes: list[TrieNode] = []
        self._ids_dirty = False
        self.last_affected_visits = 0

    # ------------------------------------------------------------------
    # leaf bookkeeping

    def _leaf_key(self, node: TrieNode) -> int:
        return node.value << (self.width - node.depth)

    def _leaf_add(self, node: TrieNode) -> None:
        key = self._leaf_key(node)
        i = bisect.bisect_left(self._leaf_keys, key)
        self._leaf_keys.insert(i, key)
        self._leaf_nodes.insert(i, node)
        node.listed = True
        self._ids_dirty = True

    def _leaf_remove(self, node: TrieNode) -> None:
        key = self._leaf_key(node)
        i = bisect.bisect_left(self._leaf_keys, key)
        while self._leaf_nodes[i] is not node:    # leaf range starts are unique
            i += 1
        del self._leaf_keys[i]
        del self._leaf_nodes[i]
        node.listed = False
        self._ids_dirty = True

    def _renumber_if_dirty(self) -> None:
        if self._ids_dirty:
            for i, node in enumerate(self._leaf_nodes):
                node.leaf_id = i
            self._ids_dirty = False

    def leaf_entries(self) -> list[tuple[Prefix, Label, int]]:
        """All classes in coordinate (range-start) order."""
        self._renumber_if_dirty()
        return [(n.prefix(), Label(n.label), n.leaf_id) for n in self._leaf_nodes]

    @property
    def num_leaves(self) -> int:
        return len(self._leaf_nodes)

    @property
    def iatomic_count(self) -> int:
        return sum(1 for n in self._leaf_nodes if n.label == Label.IATOMIC)

    # ------------------------------------------------------------------
    # structural helpers

    def _relabel(self, node: TrieNode) -> None:
        if node.is_leaf:
            node.label = Label.ATOMIC if node.is_rule else Label.IATOMIC
        else:
            node.label = Label.SUPERNET if node.is_rule else Label.NONE

    def _new_child(self, parent: TrieNode, bit: int) -> TrieNode:
        child = TrieNode((parent.value << 1) | bit, parent.depth + 1)
        if bit:
            parent.one = child
        else:
            parent.zero = child
        return child

    def _unlink(self, parent: TrieNode, child: TrieNode) -> None:
        if parent.zero is child:
            parent.zero = None
        else:
            parent.one = None

    def _walk(self, prefix: Prefix) -> list[TrieNode] | None:
        node = self.root
        path = [node]
        for i in range(prefix.length):
            node = node.one if prefix.bit(i) else node.zero
            if node is None:
                return None
            path.append(node)
        return path

    def _complete(self, top: TrieNode, covered: bool) -> int:
        """Create iatomic siblings for single-child nodes under supernets."""
        created = 0
        stack = [(top, covered)]
        while stack:
            node, cov = stack.pop()
            cov = cov or node.label == Label.SUPERNET
            zero, one = node.zero, node.one
            if cov and (zero is None) != (one is None):
                sib = self._new_child(node, 0 if zero is None else 1)
                sib.label = Label.IATOMIC
                self._leaf_add(sib)
                created += 1
            for child in (node.zero, node.one):
                if child is not None and not child.is_leaf:
                    stack.append((child, cov))
        return created

    @staticmethod
    def _nearest_supernet(path: list[TrieNode]) -> TrieNode | None:
        for node in reversed(path):
            if node.label == Label.SUPERNET:
                return node
        return None

    # ------------------------------------------------------------------
    # mutations

    def _apply_insert(self, prefix: Prefix, mark, materialize: bool) -> UpdateOutcome:
        """Shared insert flow: ensure the node, apply `mark`, re-derive locally."""
        if prefix.length > self.width:
            raise PrefixTooLong(f"{prefix} exceeds width {self.width}")
        node = self.root
        path = [node]
        created = 0
        branch = None        # deepest pre-existing node that gained a child
        for i in range(prefix.length):
            bit = prefix.bit(i)
            nxt = node.one if bit else node.zero
            if nxt is None:
                if branch is None:
                    branch = node
                    if node.listed:
                        self._leaf_remove(node)   # leaf becomes interior
                nxt = self._new_child(node, bit)
                created += 1
            node = nxt
            path.append(node)
        was_supernet = node.label == Label.SUPERNET
        mark(node)
        if created:
            node.label = Label.ATOMIC
            self._leaf_add(node)
            self._relabel(branch)
        self._relabel(node)
        new_leaf = created > 0
        if materialize:
            if created:
                scope = self._nearest_supernet(path[:-1])
                if scope is not None:
                    created += self._complete(scope, covered=True)
            elif node.label == Label.SUPERNET and not was_supernet:
                created += self._complete(node, covered=True)
        return UpdateOutcome(created_nodes=created, new_leaf=new_leaf)

    def insert_header(self, prefix: Prefix, owner: tuple[str, int], *,
                      materialize: bool = True) -> UpdateOutcome:
        """Insert a forwarding rule header owned by (router, port).

        Re-inserting the same (prefix, router) replaces the port: a class
        resolves to at most one port per router under longest-prefix match.
        """
        router, port = owner

        def mark(node):
            node.owners[router] = port

        return self._apply_insert(prefix, mark, materialize)

    def insert_owners(self, prefix: Prefix, owners: dict[str, int], *,
                      materialize: bool = True) -> UpdateOutcome:
        """Bulk variant of insert_header: one walk, many owners."""
        def mark(node):
            node.owners.update(owners)

        return self._apply_insert(prefix, mark, materialize)

    def insert_acl(self, prefix: Prefix, router: str, permit: bool, *,
                   materialize: bool = True) -> UpdateOutcome:
        def mark(node):
            node.acl[router] = permit

        return self._apply_insert(prefix, mark, materialize)

    def insert_transform(self, match: Prefix, router: str, out: Prefix, *,
                         materialize: bool = True) -> UpdateOutcome:
        def mark(node):
            node.xform[router] = out

        return self._apply_insert(match, mark, materialize)

    def insert_marker(self, prefix: Prefix, *, materialize: bool = True) -> UpdateOutcome:
        def mark(node):
            node.marker = True

        return self._apply_insert(prefix, mark, materialize)

    def delete_header(self, prefix: Prefix, owner: tuple[str, int]) -> UpdateOutcome:
        """Remove a forwarding rule; prunes and re-derives the affected region."""
        router, port = owner
        path = self._walk(prefix)
        if path is None:
            raise NotFound(f"no node for {prefix}")
        node = path[-1]
        if router not in node.owners or node.owners[router] != port:
            raise NotFound(f"({prefix}, {(router, port)}) not present")
        del node.owners[router]
        if node.is_rule:
            return UpdateOutcome(0, False)       # other rules keep the node alive
        self._relabel(node)
        created = 0
        scope = self._nearest_supernet(path[:-1])
        if scope is not None:
            created = self._rederive(scope, covered=True)
        elif not node.is_leaf:
            created = self._rederive(node, covered=False)
            self._prune_upward(path)
        else:
            if node.listed:
                self._leaf_remove(node)
            if len(path) > 1:
                self._unlink(path[-2], node)
                self._prune_upward(path[:-1])
        return UpdateOutcome(created_nodes=created, new_leaf=False)

    def _prune_upward(self, path: list[TrieNode]) -> None:
        """Drop trailing chain nodes that carry no rule and no children."""
        for i in range(len(path) - 1, 0, -1):
            node = path[i]
            if node.is_rule or not node.is_leaf:
                break
            if node.listed:
                self._leaf_remove(node)
            self._unlink(path[i - 1], node)

    def _rederive(self, top: TrieNode, covered: bool) -> int:
        """Re-derive labels and iatomic leaves for the subtree under `top`."""
        self._prune_subtree(top)
        self._relabel(top)
        if top.is_leaf:
            if top.is_rule and not top.listed:
                self._leaf_add(top)
            return 0
        return self._complete(top, covered)

    def _prune_subtree(self, top: TrieNode) -> None:
        """Remove iatomic leaves and empty chains below `top` (post-order)."""
        def prune(node: TrieNode) -> bool:
            for attr in ("zero", "one"):
                child = getattr(node, attr)
                if child is not None and prune(child):
                    if child.listed:
                        self._leaf_remove(child)
                    setattr(node, attr, None)
            if node is top:
                return False
            if node.is_leaf:
                if node.is_rule:
                    self._relabel(node)
                    if not node.listed:
                        self._leaf_add(node)
                    return False
                return True
            self._relabel(node)
            return False

        prune(top)

    def materialize_iatomic(self) -> int:
        """Complete every single-child chain under a supernet, tree-wide.

        Inserts re-derive eagerly, so this returns 0 on an up-to-date trie;
        it exists for bulk loads performed with ``materialize=False``.
        """
        return self._complete(self.root, covered=False)

    # ------------------------------------------------------------------
    # affected sets

    def compute_affected(self, prefix: Prefix, *, clamp: bool = False) -> AffectedSets:
        """Classes and ports possibly affected by an update at `prefix`.

        Walks the root path, then the update node's subtree, resolving the
        longest-prefix winners (forwarding, ACL, transform) per class along
        the way. With ``clamp=True`` a missing node clamps to the deepest
        existing ancestor (used after deletions); otherwise it is an error.
        """
        self._renumber_if_dirty()
        width = self.width
        visits = 1
        # packed resolution entries: depth << SHIFT | payload (port / permit)
        fwd: dict[str, int] = {}
        acl: dict[str, int] = {}
        xf: dict[str, tuple[int, int, Prefix]] = {}
        node = self.root
        self._collect_path(node, fwd, acl, xf)
        for i in range(prefix.length):
            nxt = node.one if prefix.bit(i) else node.zero
            if nxt is None:
                if clamp:
                    break
                raise NodeMissing(f"no node for {prefix}")
            node = nxt
            visits += 1
            self._collect_path(node, fwd, acl, xf)

        classes: list[TrieNode] = []
        snapshots: list[tuple[dict, dict, dict]] = []
        mask = _PORT_MASK

        def descend(n: TrieNode) -> None:
            nonlocal visits
            if n.zero is None and n.one is None:
                snapshots.append((
                    {r: v & mask for r, v in fwd.items()},
                    {r: bool(v & 1) for r, v in acl.items()},
                    {r: (v << (width - d), out) for r, (d, v, out) in xf.items()},
                ))
                classes.append(n)
                return
            for child in (n.zero, n.one):
                if child is None:
                    continue
                visits += 1
                undo = self._collect(child, fwd, acl, xf)
                descend(child)
                self._restore(undo, fwd, acl, xf)

        descend(node)
        self.last_affected_visits = visits

        prefixes = tuple(n.prefix() for n in classes)
        ranges = tuple(p.range(width) for p in prefixes)
        ids = tuple(n.leaf_id for n in classes)
        p_aff = frozenset((r, p) for snap, _, _ in snapshots for r, p in snap.items())
        return AffectedSets(
            s_affected=ids,
            p_affected=p_aff,
            id_to_prefix={i: pfx for i, pfx in zip(ids, prefixes)},
            classes=prefixes,
            class_ranges=ranges,
            width=width,
            fwd_resolution=tuple(s[0] for s in snapshots),
            acl_resolution=tuple(s[1] for s in snapshots),
            xform_resolution=tuple(s[2] for s in snapshots),
        )

    @staticmethod
    def _collect_path(node, fwd, acl, xf):
        """Resolution update for root-path nodes (descending, so no undo)."""
        dp = node.depth << _PORT_BITS
        if node.owners:
            for r, p in node.owners.items():
                fwd[r] = dp | p
        if node.acl:
            da = node.depth << 1
            for r, a in node.acl.items():
                acl[r] = da | a
        if node.xform:
            for r, out in node.xform.items():
                xf[r] = (node.depth, node.value, out)

    @staticmethod
    def _collect(node, fwd, acl, xf):
        undo = []
        dp = node.depth << _PORT_BITS
        if node.owners:
            for r, p in node.owners.items():
                undo.append((0, r, fwd.get(r)))
                fwd[r] = dp | p
        if node.acl:
            da = node.depth << 1
            for r, a in node.acl.items():
                undo.append((1, r, acl.get(r)))
                acl[r] = da | a
        if node.xform:
            for r, out in node.xform.items():
                undo.append((2, r, xf.get(r)))
                xf[r] = (node.depth, node.value, out)
        return undo

    @staticmethod
    def _restore(undo, fwd, acl, xf):
        for kind, r, prev in reversed(undo):
            table = (fwd, acl, xf)[kind]
            if prev is None:
                del table[r]
            else:
                table[r] = prev

    # ------------------------------------------------------------------
    # introspection

    def snapshot(self):
        """Canonical structural dump (for equality checks in tests)."""
        def dump(node):
            if node is None:
                return None
            return (
                int(node.label),
                tuple(sorted(node.owners.items())),
                tuple(sorted(node.acl.items())),
                tuple(sorted((r, (out.value, out.length)) for r, out in node.xform.items())),
                node.marker,
                dump(node.zero),
                dump(node.one),
            )
        return dump(self.root)
