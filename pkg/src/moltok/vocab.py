"""Structure-aware vocabulary and token-sequence codecs.

Atom tokens pair an atom symbol with a structural code from the quantizer
(``<C 32>`` style); non-atom tokens carry the reserved code -1.  Ids are laid
out atoms-major/code-minor, then non-atom symbols, then the condition digit
alphabet, then BOS/EOS/PAD.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import CodecError, MoltokError
from .frames import FrameStrategy, decode_molecule
from .lineno import LineSequence, TokenKind, parse_smiles, token_symbol
from .molgraph import Molecule
from .descriptors import molecule_descriptors, split_descriptor
from . import vq

NON_ATOM_CODE = -1

CONDITION_ALPHABET = tuple("0123456789") + (".", "-")
SPECIALS = ("<bos>", "<eos>", "<pad>")


@dataclass(frozen=True)
class Vocab:
    """Bijective id table over (symbol, code) pairs plus digits and specials."""

    atom_symbols: tuple[str, ...]
    structural_size: int
    non_atom_symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "atom_symbols", tuple(self.atom_symbols))
        object.__setattr__(self, "non_atom_symbols", tuple(self.non_atom_symbols))
        if not self.atom_symbols or not self.non_atom_symbols:
            raise MoltokError("atom and non-atom symbol sets must be non-empty")
        if self.structural_size < 1:
            raise MoltokError("structural vocabulary size must be >= 1")
        for group in (self.atom_symbols, self.non_atom_symbols):
            if len(set(group)) != len(group):
                raise MoltokError("duplicate symbols within a symbol set")
        if set(self.atom_symbols) & set(self.non_atom_symbols):
            raise MoltokError("atom and non-atom symbol sets overlap")
        object.__setattr__(
            self, "_atom_base", {s: k * self.structural_size for k, s in enumerate(self.atom_symbols)}
        )
        object.__setattr__(
            self, "_non_atom_id", {
                s: len(self.atom_symbols) * self.structural_size + k
                for k, s in enumerate(self.non_atom_symbols)
            }
        )
        digit_base = len(self.atom_symbols) * self.structural_size + len(self.non_atom_symbols)
        object.__setattr__(
            self, "_digit_id", {s: digit_base + k for k, s in enumerate(CONDITION_ALPHABET)}
        )
        object.__setattr__(self, "_special_base", digit_base + len(CONDITION_ALPHABET))

    @property
    def size(self) -> int:
        return (
            len(self.atom_symbols) * self.structural_size
            + len(self.non_atom_symbols)
            + len(CONDITION_ALPHABET)
            + len(SPECIALS)
        )

    @property
    def bos_id(self) -> int:
        return self._special_base + 0

    @property
    def eos_id(self) -> int:
        return self._special_base + 1

    @property
    def pad_id(self) -> int:
        return self._special_base + 2

    def id_of_atom(self, symbol: str, code: int) -> int:
        if symbol not in self._atom_base:
            raise CodecError(f"atom symbol {symbol!r} not in vocabulary")
        if not 0 <= code < self.structural_size:
            raise CodecError(
                f"structural code {code} out of range [0, {self.structural_size})"
            )
        return self._atom_base[symbol] + code

    def id_of_non_atom(self, symbol: str) -> int:
        if symbol not in self._non_atom_id:
            raise CodecError(f"non-atom symbol {symbol!r} not in vocabulary")
        return self._non_atom_id[symbol]

    def id_of_digit(self, ch: str) -> int:
        if ch not in self._digit_id:
            raise CodecError(f"condition character {ch!r} not in vocabulary")
        return self._digit_id[ch]

    def lookup(self, token_id: int) -> tuple[str, str, int]:
        """(kind, symbol, code) for an id; kind in {atom, non_atom, digit, special}."""
        if not 0 <= token_id < self.size:
            raise CodecError(f"token id {token_id} out of vocabulary")
        n_atom_ids = len(self.atom_symbols) * self.structural_size
        if token_id < n_atom_ids:
            sym = self.atom_symbols[token_id // self.structural_size]
            return "atom", sym, token_id % self.structural_size
        token_id -= n_atom_ids
        if token_id < len(self.non_atom_symbols):
            return "non_atom", self.non_atom_symbols[token_id], NON_ATOM_CODE
        token_id -= len(self.non_atom_symbols)
        if token_id < len(CONDITION_ALPHABET):
            return "digit", CONDITION_ALPHABET[token_id], NON_ATOM_CODE
        return "special", SPECIALS[token_id - len(CONDITION_ALPHABET)], NON_ATOM_CODE


def build_vocab(atom_symbols, structural_size: int, non_atom_symbols) -> Vocab:
    return Vocab(tuple(atom_symbols), int(structural_size), tuple(non_atom_symbols))


def collect_symbols(seqs) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Deterministic symbol inventory (sorted) from token sequences."""
    atoms, others = set(), set()
    for seq in seqs:
        for tok in seq.tokens:
            if tok.kind == TokenKind.ATOM:
                atoms.add(token_symbol(tok))
            else:
                others.add(tok.text)
    return tuple(sorted(atoms)), tuple(sorted(others))


# ---------------------------------------------------------------------------
# structural sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructEntry:
    symbol: str
    code: int  # >= 0 for atoms, NON_ATOM_CODE for everything else


@dataclass(frozen=True)
class StructSequence:
    entries: tuple[StructEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def struct_sequence(seq: LineSequence, codes) -> StructSequence:
    """Interleave per-atom structural codes with the token stream."""
    codes = list(codes)
    if len(codes) != seq.n_atoms:
        raise MoltokError(
            f"got {len(codes)} codes for {seq.n_atoms} atom tokens"
        )
    entries = []
    it = iter(codes)
    for tok in seq.tokens:
        if tok.kind == TokenKind.ATOM:
            entries.append(StructEntry(token_symbol(tok), int(next(it))))
        else:
            entries.append(StructEntry(tok.text, NON_ATOM_CODE))
    return StructSequence(tuple(entries))


def structure_to_sequence(
    mol: Molecule,
    seq: LineSequence,
    params: vq.MlpParams,
    codebook: vq.Codebook,
    strategy: FrameStrategy = FrameStrategy.TOPO2D,
) -> StructSequence:
    """Quantize a line-ordered molecule with conformer into a StructSequence."""
    Z = molecule_descriptors(mol, None, strategy)
    codes = vq.encode_atoms(params, codebook, Z)
    return struct_sequence(seq, codes)


def entries_to_structure(
    entries,
    params: vq.MlpParams,
    codebook: vq.Codebook,
    strategy: FrameStrategy = FrameStrategy.TOPO2D,
    use_sign_head: bool = True,
) -> Molecule:
    """Rebuild graph + conformer from (symbol, code) entries.

    The line string is re-parsed (synthetic hydrogens re-expand in place), the
    per-atom codes are decoded to generation descriptors, and the conformer is
    reconstructed by sequential placement.  Topology is lossless; coordinates
    carry the quantizer's reconstruction error.
    """
    entries = list(entries)
    text = "".join(
        e.symbol for e in entries if not (e.code != NON_ATOM_CODE and e.symbol == "H")
    )
    mol, seq = parse_smiles(text, expand_h=True)
    atom_entries = [e for e in entries if e.code != NON_ATOM_CODE]
    toks = seq.atom_tokens
    if len(toks) != len(atom_entries):
        raise CodecError(
            f"decoded line string has {len(toks)} atoms, sequence carries "
            f"{len(atom_entries)}"
        )
    for tok, e in zip(toks, atom_entries):
        if token_symbol(tok) != e.symbol:
            raise CodecError(
                f"atom symbol mismatch after reparse: {token_symbol(tok)!r} "
                f"vs {e.symbol!r}"
            )
    codes = [e.code for e in atom_entries]
    decoded = vq.decode_codes(params, codebook, codes, use_sign_head=use_sign_head)
    coords = [split_descriptor(row)[0].to_spherical() for row in decoded]
    conformer = decode_molecule(mol, None, coords, strategy)
    return mol.with_conformer(conformer.coords)


# ---------------------------------------------------------------------------
# id codec
# ---------------------------------------------------------------------------


def encode_sequence(seq: LineSequence, codes, vocab: Vocab) -> list[int]:
    """BOS + per-token ids + EOS."""
    entries = struct_sequence(seq, codes)
    return encode_entries(entries, vocab)


def encode_entries(entries: StructSequence, vocab: Vocab) -> list[int]:
    ids = [vocab.bos_id]
    for e in entries:
        if e.code == NON_ATOM_CODE:
            ids.append(vocab.id_of_non_atom(e.symbol))
        else:
            ids.append(vocab.id_of_atom(e.symbol, e.code))
    ids.append(vocab.eos_id)
    return ids


def decode_sequence(ids, vocab: Vocab) -> StructSequence:
    """Inverse of :func:`encode_sequence`; validates BOS/EOS framing."""
    ids = list(ids)
    if len(ids) < 2 or ids[0] != vocab.bos_id or ids[-1] != vocab.eos_id:
        raise CodecError("sequence must be framed by BOS ... EOS")
    entries = []
    for token_id in ids[1:-1]:
        kind, symbol, code = vocab.lookup(token_id)
        if kind == "atom":
            entries.append(StructEntry(symbol, code))
        elif kind == "non_atom":
            entries.append(StructEntry(symbol, NON_ATOM_CODE))
        else:
            raise CodecError(f"unexpected {kind} token inside the sequence")
    return StructSequence(tuple(entries))


def sequence_to_structure(
    ids,
    vocab: Vocab,
    params: vq.MlpParams,
    codebook: vq.Codebook,
    strategy: FrameStrategy = FrameStrategy.TOPO2D,
    use_sign_head: bool = True,
) -> Molecule:
    """Id list -> molecule with conformer (graph lossless, coords quantized)."""
    entries = decode_sequence(ids, vocab)
    return entries_to_structure(
        entries, params, codebook, strategy, use_sign_head=use_sign_head
    )


# ---------------------------------------------------------------------------
# condition scalars
# ---------------------------------------------------------------------------


def tokenize_condition(c: float, decimals: int = 2) -> tuple[str, ...]:
    """Character tokens of the fixed-precision decimal rendering of a scalar."""
    if not math.isfinite(c):
        raise MoltokError(f"condition must be finite, got {c}")
    return tuple(f"{c:.{decimals}f}")


def condition_ids(c: float, vocab: Vocab, decimals: int = 2) -> list[int]:
    return [vocab.id_of_digit(ch) for ch in tokenize_condition(c, decimals)]


# ---------------------------------------------------------------------------
# text format: one molecule per line, whitespace-separated symbol:code fields
# ---------------------------------------------------------------------------


def entries_to_text(entries: StructSequence, condition: float | None = None) -> str:
    fields = []
    if condition is not None:
        fields.append(f"cond={condition:.2f}")
    for e in entries:
        fields.append(f"{e.symbol}:{e.code}")
    return " ".join(fields)


def parse_entries_text(line: str) -> tuple[StructSequence, float | None]:
    fields = line.split()
    condition = None
    entries = []
    for k, f in enumerate(fields):
        if k == 0 and f.startswith("cond="):
            condition = float(f[5:])
            continue
        sym, _, code = f.rpartition(":")
        if not sym:
            raise CodecError(f"malformed token field {f!r}")
        try:
            entries.append(StructEntry(sym, int(code)))
        except ValueError:
            raise CodecError(f"malformed code in field {f!r}") from None
    return StructSequence(tuple(entries)), condition


# ---------------------------------------------------------------------------
# vocabulary (de)serialization
# ---------------------------------------------------------------------------


def vocab_to_json(vocab: Vocab) -> str:
    table = {}
    for sym in vocab.atom_symbols:
        for code in range(vocab.structural_size):
            table[f"{sym}:{code}"] = vocab.id_of_atom(sym, code)
    for sym in vocab.non_atom_symbols:
        table[f"{sym}:{NON_ATOM_CODE}"] = vocab.id_of_non_atom(sym)
    for ch in CONDITION_ALPHABET:
        table[f"digit {ch}"] = vocab.id_of_digit(ch)
    for k, sp in enumerate(SPECIALS):
        table[sp] = vocab.size - len(SPECIALS) + k
    doc = {
        "atom_symbols": list(vocab.atom_symbols),
        "structural_size": vocab.structural_size,
        "non_atom_symbols": list(vocab.non_atom_symbols),
        "size": vocab.size,
        "ids": table,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def vocab_from_json(text: str) -> Vocab:
    doc = json.loads(text)
    return build_vocab(
        doc["atom_symbols"], doc["structural_size"], doc["non_atom_symbols"]
    )
