"""
Treebank ingestion: bracketed constituency trees and CoNLL-U dependency trees.

Trees are produced upstream (CoreNLP or any other parser); this module only
reads them into token-aligned, immutable structures and answers the two
questions the extraction layer asks:

  1. Which phrase categories sit above a word, nearest first (`path_to_root`).
  2. Which words depend on a word, in sentence order (`dependents_of`).
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from sest_errors import ArgumentError, ParseError, StructuralError

ROOT = -1  # head sentinel for the root token of a dependency tree


# ============================================================================
# TOKENS
# ============================================================================

@dataclass(frozen=True)
class Token:
    index: int
    text: str
    pos: str = ""


def check_tokens(tokens: Sequence[Token]) -> None:
    for position, token in enumerate(tokens):
        if token.index != position:
            raise StructuralError(f"token indices must be contiguous from 0, got {token.index} at position {position}")
        if not token.text:
            raise StructuralError(f"token {position} has empty text")


# ============================================================================
# CONSTITUENCY TREES
# ============================================================================

@dataclass(frozen=True)
class TreeNode:
    """Internal node (label + children) or leaf word (token_index set, no children)."""

    label: str
    children: Tuple["TreeNode", ...] = ()
    token_index: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.token_index is not None

    @property
    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and self.children[0].is_leaf


@dataclass(frozen=True)
class ConstituencyTree:
    root: TreeNode
    tokens: Tuple[Token, ...]
    # ancestors[i]: labels above leaf i, nearest first, preterminal included
    ancestors: Tuple[Tuple[str, ...], ...] = field(repr=False, compare=False)

    @classmethod
    def from_root(cls, root: TreeNode) -> "ConstituencyTree":
        tokens: List[Token] = []
        ancestors: List[Tuple[str, ...]] = []
        # iterative pre-order walk keeps deep trees off the recursion limit
        stack: List[Tuple[TreeNode, Tuple[str, ...]]] = [(root, ())]
        while stack:
            node, above = stack.pop()
            if node.is_leaf:
                if node.token_index != len(tokens):
                    raise StructuralError("leaf indices out of sentence order")
                tokens.append(Token(index=node.token_index, text=node.label, pos=above[0] if above else ""))
                ancestors.append(above)
                continue
            if not node.children:
                raise StructuralError(f"internal node {node.label} has no children")
            chain = (node.label,) + above
            for child in reversed(node.children):
                stack.append((child, chain))
        return cls(root=root, tokens=tuple(tokens), ancestors=tuple(ancestors))

    @property
    def leaves(self) -> Tuple[Token, ...]:
        return self.tokens

    def __len__(self) -> int:
        return len(self.tokens)


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def _lex(text: str) -> Iterator[Tuple[str, int]]:
    """Yields (piece, char_index) for '(', ')' and whitespace-free atoms."""
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "()":
                i += 1
            yield text[start:i], start


def _parse_trees(text: str) -> List[TreeNode]:
    roots: List[TreeNode] = []
    # each frame: [label or None, children list, open char index]
    stack: List[list] = []
    expect_label = False

    for piece, at in _lex(text):
        if piece == "(":
            stack.append([None, [], at])
            expect_label = True
            continue
        if piece == ")":
            if not stack:
                raise ParseError("unbalanced parentheses: unexpected ')'", offset=_byte_offset(text, at))
            label, children, opened = stack.pop()
            expect_label = False
            if label is None:
                # PTB-style unlabeled wrapper "( (S ...) )"
                if len(children) != 1 or children[0].is_leaf:
                    raise ParseError("unlabeled bracket must wrap exactly one tree", offset=_byte_offset(text, opened))
                node = children[0]
            elif not children:
                raise ParseError(f"node {label} has no children", offset=_byte_offset(text, opened))
            else:
                if any(child.is_leaf for child in children) and len(children) != 1:
                    raise ParseError(f"leaf under {label} has no preterminal label", offset=_byte_offset(text, opened))
                node = TreeNode(label=label, children=tuple(children))
            if stack:
                stack[-1][1].append(node)
            else:
                roots.append(node)
            continue
        # atom
        if not stack:
            raise ParseError(f"text outside brackets: {piece!r}", offset=_byte_offset(text, at))
        frame = stack[-1]
        if expect_label and frame[0] is None and not frame[1]:
            frame[0] = piece
        else:
            frame[1].append(TreeNode(label=piece, token_index=-1))
        expect_label = False

    if stack:
        raise ParseError("unbalanced parentheses: missing ')'", offset=_byte_offset(text, len(text)))
    return [_number_leaves(root) for root in roots]


def _number_leaves(root: TreeNode) -> TreeNode:
    counter = [0]

    def renumber(node: TreeNode) -> TreeNode:
        if node.is_leaf:
            index = counter[0]
            counter[0] += 1
            return TreeNode(label=node.label, token_index=index)
        return TreeNode(label=node.label, children=tuple(renumber(child) for child in node.children))

    return renumber(root)


def parse_constituency(text: str) -> ConstituencyTree:
    """Parses exactly one labeled bracketing into a ConstituencyTree."""
    if not text or not text.strip():
        raise ParseError("empty input", offset=0)
    roots = _parse_trees(text)
    if len(roots) != 1:
        raise ParseError(f"expected one tree, found {len(roots)}", offset=0)
    return ConstituencyTree.from_root(roots[0])


def parse_constituency_many(text: str) -> List[ConstituencyTree]:
    """One tree per line or whitespace-concatenated trees."""
    if not text.strip():
        return []
    return [ConstituencyTree.from_root(root) for root in _parse_trees(text)]


def serialize_constituency(tree: ConstituencyTree) -> str:
    """Canonical bracketing: '(LABEL child child)', leaves as '(POS word)'."""

    def render(node: TreeNode) -> str:
        if node.is_leaf:
            return node.label
        return "(" + node.label + " " + " ".join(render(child) for child in node.children) + ")"

    return render(tree.root)


def path_to_root(tree: ConstituencyTree, token_index: int) -> List[str]:
    """Phrase-category ancestors of a leaf, nearest first, preterminal excluded."""
    if not 0 <= token_index < len(tree.tokens):
        raise ArgumentError(f"token index {token_index} out of range for {len(tree.tokens)} leaves")
    return list(tree.ancestors[token_index][1:])


def constituent_spans(tree: ConstituencyTree) -> List[Tuple[str, int, int]]:
    """(label, begin, end) for every internal node, pre-order; end is inclusive."""
    spans: List[Tuple[str, int, int]] = []

    def visit(node: TreeNode) -> Tuple[int, int]:
        if node.is_leaf:
            return node.token_index, node.token_index
        slot = len(spans)
        spans.append((node.label, -1, -1))
        bounds = [visit(child) for child in node.children]
        begin, end = bounds[0][0], bounds[-1][1]
        spans[slot] = (node.label, begin, end)
        return begin, end

    visit(tree.root)
    return spans


def span_label(tree: ConstituencyTree, begin: int, end: int) -> Optional[str]:
    """Label of the highest constituent covering exactly [begin, end], else None."""
    for label, span_begin, span_end in constituent_spans(tree):
        if span_begin == begin and span_end == end:
            return label
    return None


# ============================================================================
# DEPENDENCY TREES
# ============================================================================

@dataclass(frozen=True)
class Arc:
    head: int        # 0-based token index, or ROOT
    dependent: int   # 0-based token index
    label: str


@dataclass(frozen=True)
class DependencyTree:
    tokens: Tuple[Token, ...]
    arcs: Tuple[Arc, ...]
    _dependents: Dict[int, Tuple[Tuple[int, str], ...]] = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_arcs(cls, tokens: Sequence[Token], arcs: Sequence[Arc]) -> "DependencyTree":
        tokens = tuple(tokens)
        check_tokens(tokens)
        n = len(tokens)
        heads: Dict[int, int] = {}
        roots = 0
        for arc in arcs:
            if not 0 <= arc.dependent < n:
                raise StructuralError(f"arc dependent {arc.dependent} out of range")
            if arc.head != ROOT and not 0 <= arc.head < n:
                raise StructuralError(f"arc head {arc.head} out of range")
            if arc.dependent in heads:
                raise StructuralError(f"token {arc.dependent} has more than one head")
            heads[arc.dependent] = arc.head
            if arc.head == ROOT:
                roots += 1
        missing = [i for i in range(n) if i not in heads]
        if missing:
            raise StructuralError(f"tokens without a head: {missing}")
        if n and roots != 1:
            raise StructuralError(f"expected exactly one root arc, found {roots}")
        _check_acyclic(heads)

        grouped: Dict[int, List[Tuple[int, str]]] = {}
        for arc in arcs:
            if arc.head != ROOT:
                grouped.setdefault(arc.head, []).append((arc.dependent, arc.label))
        dependents = {head: tuple(sorted(items)) for head, items in grouped.items()}
        return cls(tokens=tokens, arcs=tuple(arcs), _dependents=dependents)

    @property
    def root_index(self) -> Optional[int]:
        for arc in self.arcs:
            if arc.head == ROOT:
                return arc.dependent
        return None

    def head_of(self, token_index: int) -> int:
        for arc in self.arcs:
            if arc.dependent == token_index:
                return arc.head
        raise ArgumentError(f"token index {token_index} has no arc")

    def __len__(self) -> int:
        return len(self.tokens)


def _check_acyclic(heads: Dict[int, int]) -> None:
    state: Dict[int, int] = {}  # 1 = on current walk, 2 = reaches root
    for start in heads:
        walk = []
        node = start
        while node != ROOT and state.get(node) != 2:
            if state.get(node) == 1:
                raise StructuralError(f"cycle through token {node}")
            state[node] = 1
            walk.append(node)
            node = heads[node]
        for visited in walk:
            state[visited] = 2


def dependents_of(tree: DependencyTree, token_index: int) -> List[Tuple[int, str]]:
    """(dependent_index, label) pairs headed by token_index, ascending by position."""
    if not 0 <= token_index < len(tree.tokens):
        raise ArgumentError(f"token index {token_index} out of range for {len(tree.tokens)} tokens")
    return list(tree._dependents.get(token_index, ()))


def parse_conllu(text: str) -> List[DependencyTree]:
    """
    Reads CoNLL-U v2 (ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC).

    Multiword ranges ("1-2") and empty nodes ("1.1") are skipped. The PTB tag
    in XPOS is preferred for Token.pos; UPOS is used when XPOS is "_".
    """
    trees: List[DependencyTree] = []
    rows: List[Tuple[int, List[str]]] = []

    def flush() -> None:
        if not rows:
            return
        tokens: List[Token] = []
        arcs: List[Arc] = []
        for expected, (line_no, cols) in enumerate(rows, start=1):
            try:
                token_id = int(cols[0])
            except ValueError:
                raise ParseError(f"bad ID column {cols[0]!r}", line=line_no)
            if token_id != expected:
                raise ParseError(f"token ids must be contiguous, expected {expected} got {token_id}", line=line_no)
            head_col, deprel = cols[6], cols[7]
            if head_col in ("", "_") or deprel in ("", "_"):
                raise ParseError("missing HEAD/DEPREL column", line=line_no)
            try:
                head = int(head_col)
            except ValueError:
                raise ParseError(f"bad HEAD column {head_col!r}", line=line_no)
            pos = cols[4] if cols[4] != "_" else cols[3]
            tokens.append(Token(index=token_id - 1, text=cols[1], pos="" if pos == "_" else pos))
            arcs.append(Arc(head=ROOT if head == 0 else head - 1, dependent=token_id - 1, label=deprel))
        trees.append(DependencyTree.from_arcs(tokens, arcs))
        rows.clear()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if "-" in cols[0] or "." in cols[0]:
            continue
        if len(cols) < 8:
            raise ParseError("missing HEAD/DEPREL column", line=line_no)
        rows.append((line_no, cols))
    flush()
    return trees
