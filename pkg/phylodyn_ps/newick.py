import math
import logging

from typing import Iterator

from phylodyn_ps.exceptions import NewickParseError

logger = logging.getLogger(__name__)

# Define constants
DELIMITERS: str = "(),:;["
QUOTE: str = "'"

class Node:
    """
    A node of a rooted tree.

    Args:
        label (str, optional): Tip or internal label. Defaults to None.
        branch_length (float, optional): Length of the edge to the parent. Defaults to None.
        offset (int, optional): Character offset in the Newick text it was parsed from. Defaults to None.
    """

    def __init__(self, label: str = None, branch_length: float = None, offset: int = None) -> None:
        self.label = label
        self.branch_length = branch_length
        self.offset = offset
        self.children: list["Node"] = []
        self.parent: "Node" = None
        self.depth: float = None

    def add_child(self, child: "Node") -> "Node":
        child.parent = self
        self.children.append(child)
        return child

    @property
    def is_tip(self) -> bool:
        return len(self.children) == 0

    def __repr__(self) -> str:
        return f"Node(label={self.label!r}, branch_length={self.branch_length!r}, depth={self.depth!r})"

class Tree:
    """A rooted tree; `depth` of every node is the sum of branch lengths from the root."""

    def __init__(self, root: Node) -> None:
        self.root = root
        self.set_depths()

    def preorder(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def postorder(self) -> Iterator[Node]:
        stack = [(self.root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded or node.is_tip:
                yield node
                continue
            stack.append((node, True))
            stack.extend((child, False) for child in reversed(node.children))

    def tips(self) -> list[Node]:
        return [node for node in self.preorder() if node.is_tip]

    def internal_nodes(self) -> list[Node]:
        return [node for node in self.preorder() if not node.is_tip]

    def set_depths(self) -> None:
        for node in self.preorder():
            if node.parent is None:
                node.depth = 0.0
            else:
                node.depth = node.parent.depth + node.branch_length

def parse_newick(text: str) -> Tree:
    """Parses a single rooted binary Newick tree with branch lengths on every non-root edge.

    Bracketed comments (`[&rate=...]`) are skipped, quoted labels are supported,
    and a branch length on the root is accepted but ignored.

    Args:
        text (str): The Newick string, terminated by `;`.

    Raises:
        NewickParseError: On empty input, unbalanced parentheses, missing or invalid branch
            lengths, duplicate labels or lengths, polytomies or unary nodes. The message carries the character offset.

    Returns:
        Tree: The parsed tree with node depths set.
    """
    if not isinstance(text, str):
        raise TypeError(f"Newick text must be a str, got {type(text)}.")
    if not text.strip():
        raise NewickParseError("Empty Newick input", offset = 0)

    root = Node(offset = 0)
    node = root
    i = 0
    size = len(text)
    terminated = False

    while i < size:
        char = text[i]

        if char.isspace():
            i += 1

        elif char == "[":
            # skip comment
            end = text.find("]", i)
            if end < 0:
                raise NewickParseError("Unterminated comment", offset = i)
            i = end + 1

        elif char == "(":
            if node.children or node.label is not None:
                raise NewickParseError("Unexpected '('", offset = i)
            node.offset = i
            node = node.add_child(Node(offset = i + 1))
            i += 1

        elif char == ",":
            if node.parent is None:
                raise NewickParseError("Unexpected ',' outside parentheses", offset = i)
            node = node.parent
            if len(node.children) == 2:
                raise NewickParseError("Polytomy (node with more than 2 children)", offset = node.offset)
            node = node.add_child(Node(offset = i + 1))
            i += 1

        elif char == ")":
            if node.parent is None:
                raise NewickParseError("Unbalanced parentheses: unexpected ')'", offset = i)
            node = node.parent
            if len(node.children) < 2:
                raise NewickParseError("Unary node (a single child)", offset = node.offset)
            i += 1

        elif char == ":":
            if node.branch_length is not None:
                raise NewickParseError("Duplicate branch length", offset = i)
            start = i + 1
            i = start
            while i < size and text[i] not in DELIMITERS and not text[i].isspace():
                i += 1
            token = text[start:i]
            # annotations may sit between ':' and the number
            while not token and i < size and text[i] in " \t\r\n[":
                if text[i] == "[":
                    end = text.find("]", i)
                    if end < 0:
                        raise NewickParseError("Unterminated comment", offset = i)
                    i = end + 1
                else:
                    i += 1
                start = i
                while i < size and text[i] not in DELIMITERS and not text[i].isspace():
                    i += 1
                token = text[start:i]
            try:
                length = float(token)
            except ValueError:
                raise NewickParseError(f"Invalid branch length {token!r}", offset = start)
            if not math.isfinite(length) or length < 0:
                raise NewickParseError(f"Branch length must be finite and non-negative, got {token!r}", offset = start)
            node.branch_length = length

        elif char == ";":
            if node is not root:
                raise NewickParseError("Unbalanced parentheses: missing ')'", offset = i)
            rest = text[i + 1:].strip()
            if rest:
                raise NewickParseError("Unexpected text after ';'", offset = i + 1)
            terminated = True
            break

        elif char == QUOTE:
            if node.label is not None:
                raise NewickParseError("Duplicate label", offset = i)
            label, i = _read_quoted(text, i)
            node.label = label

        else:
            if node.label is not None:
                raise NewickParseError("Duplicate label", offset = i)
            start = i
            while i < size and text[i] not in DELIMITERS and not text[i].isspace():
                i += 1
            node.label = text[start:i]

    if not terminated:
        raise NewickParseError("Missing terminating ';'", offset = size)

    # every non-root edge needs a length
    stack = [root]
    while stack:
        current = stack.pop()
        if current is not root and current.branch_length is None:
            raise NewickParseError(f"Missing branch length for node {current.label or '(internal)'}", offset = current.offset)
        stack.extend(current.children)

    tree = Tree(root)
    logger.debug(f"Parsed Newick tree with {len(tree.tips())} tips")
    return tree

def _read_quoted(text: str, i: int) -> tuple[str, int]:
    """Reads a single-quoted label starting at `i`; doubled quotes escape a quote."""
    start = i
    i += 1
    chars = []
    while i < len(text):
        if text[i] == QUOTE:
            if i + 1 < len(text) and text[i + 1] == QUOTE:
                chars.append(QUOTE)
                i += 2
                continue
            return "".join(chars), i + 1
        chars.append(text[i])
        i += 1
    raise NewickParseError("Unterminated quoted label", offset = start)

def format_label(label: str|None) -> str:
    if not label:
        return ""
    if any(c in label for c in DELIMITERS + "] '") or any(c.isspace() for c in label):
        return QUOTE + label.replace(QUOTE, QUOTE * 2) + QUOTE
    return label

def serialize_newick(tree: Tree, precision: int = 12) -> str:
    """Writes a tree as Newick text with branch lengths at the given significant digits."""
    rendered: dict[int, str] = {}
    for node in tree.postorder():
        text = ""
        if not node.is_tip:
            text = "(" + ",".join(rendered.pop(id(child)) for child in node.children) + ")"
        text += format_label(node.label)
        if node is not tree.root and node.branch_length is not None:
            text += f":{node.branch_length:.{precision}g}"
        rendered[id(node)] = text
    return rendered[id(tree.root)] + ";"

def read_newick(path: str) -> Tree:
    """Reads a single-tree Newick file."""
    with open(path) as fp:
        return parse_newick(fp.read())
