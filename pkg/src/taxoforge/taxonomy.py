"""Topic tree: parsing the partial hierarchy, keyword sets, serialization."""

import json
from dataclasses import dataclass, field

from .corpus import Corpus
from .vmf import VmfParams


class UnknownTopicNameError(ValueError):
    pass


class MalformedHierarchyError(ValueError):
    pass


class AmbiguousKeywordError(ValueError):
    pass


class CenterTermCollisionError(ValueError):
    pass


@dataclass
class TopicNode:
    id: int
    center_term: int | None          # None only for the root
    children: list = field(default_factory=list)
    terms: set = field(default_factory=set)
    docs: set = field(default_factory=set)
    is_novel: bool = False
    vmf: VmfParams | None = None
    term_scores: dict | None = None  # term id -> significance, set by the pipeline
    parent: int | None = None


class Taxonomy:
    """Tree of topic nodes; single root, single parent per node."""

    def __init__(self):
        self.nodes = {}
        self.root = None
        self._next_id = 0

    def add_node(self, center_term, parent=None, is_novel=False) -> TopicNode:
        node = TopicNode(id=self._next_id, center_term=center_term,
                         is_novel=is_novel, parent=parent)
        self._next_id += 1
        self.nodes[node.id] = node
        if parent is None:
            if self.root is not None:
                raise MalformedHierarchyError("taxonomy already has a root")
            self.root = node.id
        else:
            self.nodes[parent].children.append(node.id)
        return node

    def depth(self, node_id) -> int:
        d = 0
        while self.nodes[node_id].parent is not None:
            node_id = self.nodes[node_id].parent
            d += 1
        return d

    def max_depth(self) -> int:
        return max(self.depth(nid) for nid in self.nodes)

    def subtree_ids(self, node_id):
        out = [node_id]
        for c in self.nodes[node_id].children:
            out.extend(self.subtree_ids(c))
        return out


def normalize_name(name: str) -> str:
    return name.strip().lower().replace(" ", "_")


def parse_hierarchy(text: str, corpus: Corpus) -> Taxonomy:
    """Parse a tab-indented outline of topic names into a taxonomy.

    Tab depth equals tree depth; the root is implicit. Names are lower-cased
    and space->underscore normalized before vocabulary lookup.
    """
    tax = Taxonomy()
    root = tax.add_node(center_term=None)
    stack = [root.id]  # stack[d] = last node at depth d (root at 0)
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        depth = len(raw) - len(raw.lstrip("\t"))
        name = normalize_name(raw.lstrip("\t"))
        if depth + 1 > len(stack):
            raise MalformedHierarchyError(
                f"line {lineno}: indentation jumps more than one level")
        tid = corpus.index.get(name)
        if tid is None:
            unknown.append(name)
            continue
        parent = stack[depth]
        node = tax.add_node(center_term=tid, parent=parent)
        node.terms = {tid}
        del stack[depth + 1:]
        stack.append(node.id)
    if unknown:
        raise UnknownTopicNameError(
            "topic names not in vocabulary: " + ", ".join(unknown))
    return tax


def subtree_keywords(tax: Taxonomy, node_id: int) -> dict:
    """Per child of node_id: center terms of the whole sub-tree under it."""
    node = tax.nodes[node_id]
    out = {}
    seen = {}
    for child in node.children:
        kws = set()
        for nid in tax.subtree_ids(child):
            ct = tax.nodes[nid].center_term
            if ct is not None:
                kws.add(ct)
        for t in kws:
            if t in seen:
                raise AmbiguousKeywordError(
                    f"center term {t} appears under two sibling sub-trees")
            seen[t] = child
        out[child] = kws
    return out


def insert_children(tax: Taxonomy, parent: int, results) -> list:
    """Apply one node's clustering output to the tree.

    results: iterable of (center_term, term_set, doc_set, is_novel, vmf).
    Known entries update the matching existing child in place; novel ones are
    appended as new nodes.
    """
    pnode = tax.nodes[parent]
    by_center = {tax.nodes[c].center_term: c for c in pnode.children}
    new_ids = []
    for center, terms, docs, is_novel, vmf in results:
        if not is_novel:
            if center not in by_center:
                raise CenterTermCollisionError(
                    f"known sub-topic center {center} has no matching child")
            node = tax.nodes[by_center[center]]
            node.terms = set(terms)
            node.docs = set(docs)
            node.vmf = vmf
        else:
            if center in by_center:
                raise CenterTermCollisionError(
                    f"novel center term {center} collides with an existing child")
            node = tax.add_node(center_term=center, parent=parent, is_novel=True)
            node.terms = set(terms)
            node.docs = set(docs)
            node.vmf = vmf
            by_center[center] = node.id
            new_ids.append(node.id)
    return new_ids


def serialize(tax: Taxonomy, corpus: Corpus, top_k: int) -> str:
    """JSON dump of the tree; top_k terms per node by significance descending."""

    def ranked_terms(node: TopicNode):
        terms = list(node.terms)
        if node.term_scores:
            terms.sort(key=lambda t: (-node.term_scores.get(t, 0.0), t))
        else:
            terms.sort()
        if node.center_term is not None and node.center_term in node.terms:
            terms.remove(node.center_term)
            terms.insert(0, node.center_term)
        return [corpus.term(t) for t in terms[:top_k]]

    def encode(node_id):
        node = tax.nodes[node_id]
        return {
            "name": corpus.term(node.center_term) if node.center_term is not None else "root",
            "is_novel": node.is_novel,
            "terms": ranked_terms(node),
            "doc_ids": sorted(int(d) for d in node.docs),
            "kappa": float(node.vmf.kappa) if node.vmf is not None else None,
            "children": [encode(c) for c in node.children],
        }

    return json.dumps(encode(tax.root), indent=2)
