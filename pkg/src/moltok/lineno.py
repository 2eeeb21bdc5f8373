"""SMILES-subset parser, serializer, and line-notation utilities.

The supported grammar (documented as EBNF in docs/formats.md):

* bare organic-subset atoms  B C N O F P S Cl Br I  and aromatic  b c n o p s
* bracket atoms  [<element><Hcount?><charge?>]  (no isotopes, no stereo)
* bond symbols  - = # :
* branches  ( ... )
* ring closures  1-9 and %nn

Implicit hydrogens (and bracket H counts) are expanded to explicit atoms,
each inserted as a *synthetic* atom token immediately after its heavy atom.
Synthetic tokens carry empty surface text so that re-serializing a parsed
sequence reproduces the source string byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import MoltokError, ParseError
from .molgraph import Atom, Bond, BondOrder, Molecule, atom
from .periodic import (
    AROMATIC_SUBSET,
    ATOMIC_NUMBERS,
    DEFAULT_VALENCES,
    ORGANIC_SUBSET,
)


class TokenKind(Enum):
    ATOM = "atom"
    NON_ATOM = "non_atom"


@dataclass(frozen=True)
class LineToken:
    """One token of the line notation.

    ``atom_index`` is set exactly for atom tokens and equals the token's rank
    among atom tokens (the k-th atom token describes atom k).  Synthetic
    tokens are expansion-inserted hydrogens; their surface text is empty.
    """

    kind: TokenKind
    text: str
    atom_index: Optional[int] = None
    synthetic: bool = False
    offset: Optional[int] = None

    def __post_init__(self):
        if (self.kind == TokenKind.ATOM) != (self.atom_index is not None):
            raise MoltokError("atom_index must be set exactly for atom tokens")


@dataclass(frozen=True)
class LineSequence:
    tokens: tuple[LineToken, ...]
    source_text: str

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def atom_tokens(self) -> tuple[LineToken, ...]:
        return tuple(t for t in self.tokens if t.kind == TokenKind.ATOM)

    @property
    def n_atoms(self) -> int:
        return sum(1 for t in self.tokens if t.kind == TokenKind.ATOM)


def token_symbol(tok: LineToken) -> str:
    """Vocabulary symbol of a token: its surface text, or "H" for synthetic
    hydrogens."""
    return tok.text if tok.text else "H"


def serialize(seq: LineSequence) -> str:
    """Concatenate token texts; inverse of parsing for parser-produced input."""
    return "".join(t.text for t in seq.tokens)


# ---------------------------------------------------------------------------
# scanner
# ---------------------------------------------------------------------------

_BOND_SYMBOLS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE,
                 "#": BondOrder.TRIPLE, ":": BondOrder.AROMATIC}

_AROMATIC_TO_ELEMENT = {s: s.upper() for s in AROMATIC_SUBSET}


@dataclass
class _AtomSpec:
    element: str
    aromatic: bool
    charge: int
    bracket_h: Optional[int]  # None outside brackets
    offset: int
    text: str


def _scan_bracket(text: str, start: int) -> tuple[_AtomSpec, int]:
    """Scan a bracket atom beginning at ``start`` (which points at '[')."""
    i = start + 1
    n = len(text)
    if i < n and text[i].isdigit():
        raise ParseError("isotope labels are not supported", offset=i)
    # element symbol: one uppercase + optional lowercase, or aromatic lowercase
    if i >= n:
        raise ParseError("unterminated bracket atom", offset=start)
    aromatic = False
    if text[i] in AROMATIC_SUBSET:
        elem = _AROMATIC_TO_ELEMENT[text[i]]
        aromatic = True
        i += 1
    elif text[i].isupper():
        sym = text[i]
        if i + 1 < n and text[i + 1].islower() and sym + text[i + 1] in ATOMIC_NUMBERS:
            sym = sym + text[i + 1]
            i += 1
        if sym not in ATOMIC_NUMBERS:
            raise ParseError(f"unknown element {sym!r} in bracket atom", offset=i)
        elem = sym
        i += 1
    else:
        raise ParseError(f"unexpected character {text[i]!r} in bracket atom", offset=i)

    h_count = 0
    if i < n and text[i] == "H":
        i += 1
        digits = ""
        while i < n and text[i].isdigit():
            digits += text[i]
            i += 1
        h_count = int(digits) if digits else 1

    charge = 0
    if i < n and text[i] in "+-":
        sign = 1 if text[i] == "+" else -1
        symch = text[i]
        i += 1
        digits = ""
        while i < n and text[i].isdigit():
            digits += text[i]
            i += 1
        if digits:
            charge = sign * int(digits)
        else:
            charge = sign
            while i < n and text[i] == symch:
                charge += sign
                i += 1

    if i >= n or text[i] != "]":
        bad = text[i] if i < n else "end of input"
        raise ParseError(f"expected ']' in bracket atom, found {bad!r}", offset=i)
    i += 1
    return (
        _AtomSpec(elem, aromatic, charge, h_count, start, text[start:i]),
        i,
    )


def _scan(text: str):
    """Tokenize into (kind, payload, offset, surface) events."""
    events = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            spec, j = _scan_bracket(text, i)
            events.append(("atom", spec, i, spec.text))
            i = j
        elif text[i : i + 2] in ("Cl", "Br"):
            sym = text[i : i + 2]
            events.append(("atom", _AtomSpec(sym, False, 0, None, i, sym), i, sym))
            i += 2
        elif ch in ORGANIC_SUBSET:
            events.append(("atom", _AtomSpec(ch, False, 0, None, i, ch), i, ch))
            i += 1
        elif ch in AROMATIC_SUBSET:
            spec = _AtomSpec(_AROMATIC_TO_ELEMENT[ch], True, 0, None, i, ch)
            events.append(("atom", spec, i, ch))
            i += 1
        elif ch in _BOND_SYMBOLS:
            events.append(("bond", _BOND_SYMBOLS[ch], i, ch))
            i += 1
        elif ch == "(":
            events.append(("open", None, i, ch))
            i += 1
        elif ch == ")":
            events.append(("close", None, i, ch))
            i += 1
        elif ch.isdigit():
            events.append(("ring", int(ch), i, ch))
            i += 1
        elif ch == "%":
            digits = text[i + 1 : i + 3]
            if len(digits) < 2 or not digits.isdigit():
                raise ParseError("'%' must be followed by two digits", offset=i)
            events.append(("ring", int(digits), i, text[i : i + 3]))
            i += 3
        elif ch == ".":
            raise ParseError(
                "fragment separator '.' is not supported (single-fragment policy)",
                offset=i,
            )
        elif ch in "@/\\":
            raise ParseError(f"stereo descriptor {ch!r} is not supported", offset=i)
        else:
            raise ParseError(f"unknown symbol {ch!r}", offset=i)
    return events


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------


@dataclass
class _ProvBond:
    a: int
    b: int
    order: Optional[BondOrder]  # None = default, decided after aromatic check


def _build_graph(events):
    """Stack-based assembly of the provisional heavy-atom graph."""
    specs: list[_AtomSpec] = []
    bonds: list[_ProvBond] = []
    bond_keys = set()
    stack: list[int] = []
    open_offsets: list[int] = []
    prev: Optional[int] = None
    pending: Optional[tuple[BondOrder, int]] = None
    rings: dict[int, tuple[int, Optional[BondOrder], int]] = {}

    def add_bond(a, b, order, offset):
        key = (min(a, b), max(a, b))
        if a == b:
            raise ParseError("ring bond connects an atom to itself", offset=offset)
        if key in bond_keys:
            raise ParseError("duplicate bond between the same atoms", offset=offset)
        bond_keys.add(key)
        bonds.append(_ProvBond(key[0], key[1], order))

    for kind, payload, offset, surface in events:
        if kind == "atom":
            idx = len(specs)
            specs.append(payload)
            if prev is not None:
                order = pending[0] if pending is not None else None
                add_bond(prev, idx, order, offset)
            elif pending is not None:
                raise ParseError("bond symbol with no preceding atom", offset=pending[1])
            pending = None
            prev = idx
        elif kind == "bond":
            if pending is not None:
                raise ParseError("two consecutive bond symbols", offset=offset)
            if prev is None:
                raise ParseError("bond symbol with no preceding atom", offset=offset)
            pending = (payload, offset)
        elif kind == "open":
            if prev is None:
                raise ParseError("branch opened before any atom", offset=offset)
            if pending is not None:
                raise ParseError("bond symbol before '('", offset=pending[1])
            stack.append(prev)
            open_offsets.append(offset)
        elif kind == "close":
            if not stack:
                raise ParseError("unbalanced ')'", offset=offset)
            if pending is not None:
                raise ParseError("dangling bond symbol before ')'", offset=pending[1])
            prev = stack.pop()
            open_offsets.pop()
        elif kind == "ring":
            if prev is None:
                raise ParseError("ring closure before any atom", offset=offset)
            num = payload
            if num in rings:
                other, other_order, other_off = rings.pop(num)
                order = pending[0] if pending is not None else None
                pending = None
                if order is not None and other_order is not None and order != other_order:
                    raise ParseError(
                        f"conflicting bond orders on ring closure {num}", offset=offset
                    )
                add_bond(other, prev, order if order is not None else other_order, offset)
            else:
                order = pending[0] if pending is not None else None
                pending = None
                rings[num] = (prev, order, offset)

    if stack:
        raise ParseError("unbalanced '('", offset=open_offsets[-1])
    if pending is not None:
        raise ParseError("dangling bond symbol at end of input", offset=pending[1])
    if rings:
        num, (_, _, offset) = sorted(rings.items())[0]
        raise ParseError(f'unclosed ring bond "{num}"', offset=offset)
    if not specs:
        raise ParseError("input contains no atoms", offset=0)
    return specs, bonds


def _kekulize(specs, bonds):
    """Resolve aromatic atoms/bonds to alternating single/double bonds.

    Each aromatic atom needing a pi bond (default valence minus explicit
    connections >= 1) must be matched along an aromatic bond; a failed
    perfect matching is a parse error.
    """
    arom_atoms = [k for k, s in enumerate(specs) if s.aromatic]
    if not arom_atoms:
        for b in bonds:
            if b.order is None:
                b.order = BondOrder.SINGLE
        return

    for b in bonds:
        if b.order is None:
            if specs[b.a].aromatic and specs[b.b].aromatic:
                b.order = BondOrder.AROMATIC
            else:
                b.order = BondOrder.SINGLE

    degree = [0] * len(specs)
    for b in bonds:
        degree[b.a] += 1
        degree[b.b] += 1

    def needs_pi(k):
        s = specs[k]
        base = DEFAULT_VALENCES.get(s.element)
        if base is None:
            raise ParseError(
                f"aromatic atom {s.element!r} has no default valence",
                offset=s.offset,
            )
        target = base[0] + s.charge  # [nH+] gains a slot, [c-] loses one
        occupied = degree[k] + (s.bracket_h or 0)
        return target - occupied >= 1

    need = {k for k in arom_atoms if needs_pi(k)}
    arom_adj = {k: [] for k in arom_atoms}
    arom_bond_index = {}
    for bi, b in enumerate(bonds):
        if b.order == BondOrder.AROMATIC:
            arom_adj.setdefault(b.a, []).append(b.b)
            arom_adj.setdefault(b.b, []).append(b.a)
            arom_bond_index[(b.a, b.b)] = bi

    # exact perfect matching on the pi-needing atoms via backtracking;
    # aromatic systems are small so this is cheap
    matched: dict[int, int] = {}

    def backtrack(pool):
        if not pool:
            return True
        k = min(pool)
        for w in sorted(arom_adj.get(k, ())):
            if w in pool:
                matched[k] = w
                matched[w] = k
                if backtrack(pool - {k, w}):
                    return True
                del matched[k]
                del matched[w]
        return False

    if not backtrack(frozenset(need)):
        raise ParseError(
            "cannot kekulize aromatic system", offset=specs[min(need)].offset
        )

    for b in bonds:
        if b.order == BondOrder.AROMATIC and specs[b.a].aromatic and specs[b.b].aromatic:
            if matched.get(b.a) == b.b:
                b.order = BondOrder.DOUBLE
            else:
                b.order = BondOrder.SINGLE
    for s in specs:
        s.aromatic = False


_ORDER_WEIGHT = {
    BondOrder.SINGLE: 1,
    BondOrder.DOUBLE: 2,
    BondOrder.TRIPLE: 3,
    BondOrder.AROMATIC: 1,  # only reachable via explicit ':' between uppercase atoms
}


def _implicit_h_counts(specs, bonds):
    """Default-valence hydrogen counts for bare atoms; bracket counts as given."""
    bondsum = [0] * len(specs)
    for b in bonds:
        w = _ORDER_WEIGHT[b.order]
        bondsum[b.a] += w
        bondsum[b.b] += w
    counts = []
    for k, s in enumerate(specs):
        if s.bracket_h is not None:
            counts.append(s.bracket_h)
            continue
        valences = DEFAULT_VALENCES[s.element]
        for v in valences:
            if v >= bondsum[k]:
                counts.append(v - bondsum[k])
                break
        else:
            raise ParseError(
                f"valence overflow on {s.element}: {bondsum[k]} bonds exceed "
                f"allowed valences {valences}",
                offset=s.offset,
            )
    return counts


def parse_smiles(text: str, expand_h: bool = True) -> tuple[Molecule, LineSequence]:
    """Parse a SMILES-subset string into a molecular graph and token sequence.

    With ``expand_h`` (the default) every implicit or bracket-counted hydrogen
    becomes an explicit atom, inserted immediately after its heavy atom both
    in the atom numbering and in the token stream.
    """
    events = _scan(text)
    specs, prov_bonds = _build_graph(events)
    _kekulize(specs, prov_bonds)
    h_counts = _implicit_h_counts(specs, prov_bonds) if expand_h else [0] * len(specs)

    # final numbering: heavy atom k goes to new_index[k], its hydrogens follow
    new_index = []
    total = 0
    for k in range(len(specs)):
        new_index.append(total)
        total += 1 + h_counts[k]

    atoms: list[Atom] = [None] * total  # type: ignore[list-item]
    bonds: list[Bond] = []
    for k, s in enumerate(specs):
        atoms[new_index[k]] = atom(s.element, s.charge)
        for h in range(h_counts[k]):
            hi = new_index[k] + 1 + h
            atoms[hi] = atom("H")
            bonds.append(Bond(new_index[k], hi, BondOrder.SINGLE))
    for b in prov_bonds:
        bonds.append(Bond(new_index[b.a], new_index[b.b], b.order))

    # token stream: source tokens in order, synthetic H tokens inserted after
    # each heavy atom token
    tokens: list[LineToken] = []
    spec_counter = 0
    for kind, payload, offset, surface in events:
        if kind == "atom":
            k = spec_counter
            spec_counter += 1
            tokens.append(
                LineToken(TokenKind.ATOM, surface, atom_index=new_index[k], offset=offset)
            )
            for h in range(h_counts[k]):
                tokens.append(
                    LineToken(
                        TokenKind.ATOM,
                        "",
                        atom_index=new_index[k] + 1 + h,
                        synthetic=True,
                    )
                )
        else:
            tokens.append(LineToken(TokenKind.NON_ATOM, surface, offset=offset))

    mol = Molecule(tuple(atoms), tuple(bonds), None)
    seq = LineSequence(tuple(tokens), text)
    return mol, seq


# ---------------------------------------------------------------------------
# atom ordering
# ---------------------------------------------------------------------------


def identity_order(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def canonical_atom_order(
    mol: Molecule, seq: LineSequence, mapping=None
) -> np.ndarray:
    """Permutation taking line-notation positions to graph atom indices.

    ``order[k]`` is the graph index of the k-th atom token.  Parser-produced
    pairs are already aligned and yield the identity.  For externally matched
    pairs an explicit mapping must be supplied and is validated.
    """
    n = seq.n_atoms
    if n != mol.n_atoms:
        raise MoltokError(
            f"sequence has {n} atom tokens but molecule has {mol.n_atoms} atoms"
        )
    if mapping is None:
        return identity_order(n)
    order = np.asarray(mapping, dtype=np.int64)
    if order.shape != (n,) or sorted(order.tolist()) != list(range(n)):
        raise MoltokError("mapping is not a permutation of the atom indices")
    for pos, tok in enumerate(seq.atom_tokens):
        want = _token_element(tok)
        have = mol.atoms[order[pos]].element_symbol
        if want != have:
            raise MoltokError(
                f"mapping sends token {pos} ({want}) to a {have} atom"
            )
    return order


def _token_element(tok: LineToken) -> str:
    sym = token_symbol(tok)
    if sym.startswith("["):
        spec, _ = _scan_bracket(sym, 0)
        return spec.element
    if sym in _AROMATIC_TO_ELEMENT:
        return _AROMATIC_TO_ELEMENT[sym]
    return sym


# ---------------------------------------------------------------------------
# graph -> line notation (for MOL/XYZ inputs)
# ---------------------------------------------------------------------------

_ORDER_SYMBOL = {
    BondOrder.SINGLE: "",
    BondOrder.DOUBLE: "=",
    BondOrder.TRIPLE: "#",
    BondOrder.AROMATIC: ":",
}


def write_smiles(mol: Molecule) -> tuple[str, np.ndarray]:
    """Emit an explicit bracket-atom SMILES for an arbitrary connected graph.

    Every atom is written in bracket form with its formal charge and no
    hydrogen count, so re-parsing reproduces the graph exactly (hydrogens in
    the input graph are themselves emitted as [H] atoms).  Returns the string
    and the DFS visit order (``visit[k]`` = original index of the k-th
    emitted atom).
    """
    mol.require_connected()
    adj = mol.adjacency()
    orders = mol.bond_order_map()
    n = mol.n_atoms

    visit: list[int] = []
    position = [-1] * n
    tree_children: list[list[int]] = [[] for _ in range(n)]
    back_edges: list[tuple[int, int]] = []
    seen_edges = set()

    stack = [(0, -1)]
    seen = [False] * n
    while stack:
        v, parent = stack.pop()
        if seen[v]:
            continue
        seen[v] = True
        position[v] = len(visit)
        visit.append(v)
        if parent >= 0:
            tree_children[parent].append(v)
        for w in reversed(adj[v]):
            if w == parent:
                continue
            edge = (min(v, w), max(v, w))
            if seen[w]:
                if edge not in seen_edges:
                    seen_edges.add(edge)
                    back_edges.append((w, v))  # w visited earlier
            else:
                stack.append((w, v))
    # DFS with a stack may re-push: drop tree children that were reached
    # through another branch first
    for v in range(n):
        tree_children[v] = [w for w in tree_children[v] if position[w] > position[v]]

    ring_digit: dict[tuple[int, int], int] = {}
    ring_open_at: dict[int, list[tuple[int, int]]] = {}
    ring_close_at: dict[int, list[tuple[int, int]]] = {}
    free_digits = list(range(1, 100))
    active: dict[tuple[int, int], int] = {}
    for a, b in sorted(back_edges, key=lambda e: (position[e[0]], position[e[1]])):
        ring_open_at.setdefault(a, []).append((a, b))
        ring_close_at.setdefault(b, []).append((a, b))

    def atom_text(v):
        a = mol.atoms[v]
        chg = a.formal_charge
        if chg == 0:
            suffix = ""
        elif chg == 1:
            suffix = "+"
        elif chg == -1:
            suffix = "-"
        elif chg > 0:
            suffix = f"+{chg}"
        else:
            suffix = str(chg)
        return f"[{a.element_symbol}{suffix}]"

    def bond_text(a, b):
        return _ORDER_SYMBOL[orders[(min(a, b), max(a, b))]]

    out: list[str] = []

    def digit_text(d):
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(v):
        out.append(atom_text(v))
        for edge in ring_open_at.get(v, ()):
            d = free_digits.pop(0)
            active[edge] = d
            out.append(bond_text(*edge) + digit_text(d))
        for edge in ring_close_at.get(v, ()):
            d = active.pop(edge)
            free_digits.insert(0, d)
            free_digits.sort()
            out.append(digit_text(d))
        kids = tree_children[v]
        for w in kids[:-1]:
            out.append("(" + bond_text(v, w))
            emit(w)
            out.append(")")
        for w in kids[-1:]:
            out.append(bond_text(v, w))
            emit(w)

    emit(visit[0])
    return "".join(out), np.asarray(visit, dtype=np.int64)


def mol_to_line(mol: Molecule) -> tuple[Molecule, LineSequence, np.ndarray]:
    """Re-express an explicit molecule (from MOL/XYZ) in line-notation order.

    Returns the line-ordered molecule (conformer permuted accordingly), its
    token sequence, and the permutation ``order[k] = original index``.
    """
    text, order = write_smiles(mol)
    line_mol, seq = parse_smiles(text, expand_h=True)
    if line_mol.n_atoms != mol.n_atoms:
        raise MoltokError("line-notation round trip changed the atom count")
    for k in range(mol.n_atoms):
        if line_mol.atoms[k] != mol.atoms[order[k]]:
            raise MoltokError("line-notation round trip changed an atom")
    # verify bond sets agree under the permutation
    pos = np.empty(mol.n_atoms, dtype=np.int64)
    pos[order] = np.arange(mol.n_atoms)
    orig = {(min(pos[b.i], pos[b.j]), max(pos[b.i], pos[b.j])) for b in mol.bonds}
    new = {(b.i, b.j) for b in line_mol.bonds}
    if orig != new:
        raise MoltokError("line-notation round trip changed the bond set")
    if mol.conformer is not None:
        line_mol = line_mol.with_conformer(mol.conformer.coords[order])
    return line_mol, seq, order
