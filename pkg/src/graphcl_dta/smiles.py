"""SMILES subset parser producing heavy-atom molecular graphs.

Supported grammar is documented in ``docs/smiles_grammar.md``.  Hydrogens are
never graph nodes: they are folded into per-atom counts which feed the atom
features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# feature scheme: all column layout constants live here
FEATURE_ELEMENTS = ("C", "N", "O", "S", "F", "P", "Cl", "Br", "I", "B")  # + "other"
MAX_DEGREE = 6
FEATURE_CHARGES = (-2, -1, 0, 1, 2)
MAX_H = 5
N_ELEMENT = len(FEATURE_ELEMENTS) + 1
N_DEGREE = MAX_DEGREE + 1
N_CHARGE = len(FEATURE_CHARGES)
N_H = MAX_H + 1
NUM_ATOM_FEATURES = N_ELEMENT + N_DEGREE + N_CHARGE + 1 + N_H  # 30

ELEMENTS = frozenset(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn Ga Ge As Se Br Kr "
    "Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm "
    "Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No "
    "Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og".split()
)
ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")
VALENCES = {
    "B": (3,), "C": (4,), "N": (3,), "O": (2,), "P": (3, 5), "S": (2, 4, 6),
    "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}
BOND_ORDER = {"-": 1, "=": 2, "#": 3, ":": 1}


class ParseError(ValueError):
    """Raised for SMILES outside the supported grammar."""

    def __init__(self, smiles: str, offset: int, construct: str):
        self.smiles = smiles
        self.offset = offset
        self.construct = construct
        super().__init__(f"{construct} at offset {offset} in {smiles!r}")


@dataclass
class Atom:
    symbol: str
    aromatic: bool = False
    charge: int = 0
    explicit_h: int = 0
    bracket: bool = False
    offset: int = 0
    degree: int = 0
    implicit_h: int = 0

    @property
    def total_h(self) -> int:
        return self.explicit_h + self.implicit_h


@dataclass
class MolecularGraph:
    atom_features: np.ndarray  # (n, NUM_ATOM_FEATURES)
    adjacency: np.ndarray  # (n, n) uint8, symmetric, zero diagonal
    smiles_source: str
    atoms: list[Atom] = field(default_factory=list, repr=False)
    bonds: dict[tuple[int, int], str] = field(default_factory=dict, repr=False)
    _norm_adj: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def atom_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def bond_count(self) -> int:
        return int(self.adjacency.sum()) // 2


class _Parser:
    def __init__(self, smiles: str):
        self.s = smiles
        self.i = 0
        self.atoms: list[Atom] = []
        self.bonds: dict[tuple[int, int], str] = {}
        self.stereo = False

    def fail(self, construct: str, offset: int | None = None):
        raise ParseError(self.s, self.i if offset is None else offset, construct)

    def add_bond(self, a: int, b: int, sym: str | None, offset: int):
        if a == b:
            self.fail("ring bond to itself", offset)
        key = (min(a, b), max(a, b))
        if key in self.bonds:
            self.fail("duplicate bond", offset)
        if sym is None:
            sym = ":" if self.atoms[a].aromatic and self.atoms[b].aromatic else "-"
        self.bonds[key] = sym

    def parse(self) -> None:
        s = self.s
        prev: int | None = None
        pending: tuple[str, int] | None = None
        branches: list[tuple[int, int]] = []
        rings: dict[int, tuple[int, str | None, int]] = {}
        while self.i < len(s):
            ch = s[self.i]
            start = self.i
            if ch == "(":
                if prev is None:
                    self.fail("branch before any atom")
                if pending is not None:
                    self.fail("bond symbol before branch")
                branches.append((prev, start))
                self.i += 1
            elif ch == ")":
                if not branches:
                    self.fail("unmatched ')'")
                if pending is not None:
                    self.fail("dangling bond symbol")
                prev = branches.pop()[0]
                self.i += 1
            elif ch in BOND_ORDER:
                if pending is not None:
                    self.fail("consecutive bond symbols")
                if prev is None:
                    self.fail("bond symbol before any atom")
                pending = (ch, start)
                self.i += 1
            elif ch in "/\\":
                self.stereo = True
                self.i += 1
            elif ch == "$":
                self.fail("quadruple bond unsupported")
            elif ch == ".":
                self.fail("dot-disconnected fragments unsupported")
            elif ch.isdigit() or ch == "%":
                if prev is None:
                    self.fail("ring closure before any atom")
                if ch == "%":
                    digits = s[self.i + 1:self.i + 3]
                    if len(digits) != 2 or not digits.isdigit():
                        self.fail("malformed %nn ring closure")
                    num = int(digits)
                    self.i += 3
                else:
                    num = int(ch)
                    self.i += 1
                sym = pending[0] if pending else None
                pending = None
                if num in rings:
                    other, osym, _ = rings.pop(num)
                    if sym is not None and osym is not None and sym != osym:
                        self.fail("conflicting ring bond symbols", start)
                    self.add_bond(other, prev, sym or osym, start)
                else:
                    rings[num] = (prev, sym, start)
            else:
                idx = self.read_atom()
                if prev is not None:
                    self.add_bond(prev, idx, pending[0] if pending else None, start)
                pending = None
                prev = idx
        if branches:
            self.fail("unmatched '('", branches[-1][1])
        if rings:
            num, (_, _, off) = next(iter(rings.items()))
            self.fail(f"unmatched ring bond {num}", off)
        if pending is not None:
            self.fail("dangling bond symbol", pending[1])
        if not self.atoms:
            self.fail("no atoms", 0)

    def read_atom(self) -> int:
        s, start = self.s, self.i
        ch = s[start]
        if ch == "[":
            end = s.find("]", start)
            if end < 0:
                self.fail("unmatched '['")
            atom = self.read_bracket(s[start + 1:end], start)
            self.i = end + 1
        else:
            for sym in ORGANIC:
                if s.startswith(sym, start):
                    atom = Atom(sym, offset=start)
                    break
            else:
                if ch in AROMATIC_ORGANIC:
                    atom = Atom(ch.upper(), aromatic=True, offset=start)
                    sym = ch
                elif ch == "*":
                    self.fail("wildcard atom unsupported")
                elif ch.isalpha():
                    self.fail(f"unknown element '{ch}'")
                else:
                    self.fail(f"unsupported character '{ch}'")
            self.i = start + len(sym)
        self.atoms.append(atom)
        return len(self.atoms) - 1

    def read_bracket(self, body: str, start: int) -> Atom:
        j = 0
        while j < len(body) and body[j].isdigit():  # isotope, discarded
            j += 1
        sym = None
        aromatic = False
        for cand in (body[j:j + 2], body[j:j + 1]):
            if len(cand) and cand in ELEMENTS:
                sym = cand
                break
        for cand in AROMATIC_BRACKET:
            if sym is None and body.startswith(cand, j):
                sym, aromatic = cand[0].upper() + cand[1:], True
                break
        if sym is None:
            if body[j:j + 1] == "*":
                self.fail("wildcard atom unsupported", start + 1 + j)
            self.fail(f"unknown element in bracket atom '[{body}]'", start + 1 + j)
        j += len(sym)
        if body[j:j + 1] == "@":
            self.stereo = True
            j += 1
            if body[j:j + 1] == "@":
                j += 1
            elif body[j:j + 2] in ("TH", "AL", "SP", "TB", "OH"):
                j += 2
                while j < len(body) and body[j].isdigit():
                    j += 1
        hcount = 0
        if body[j:j + 1] == "H":
            j += 1
            hcount = 1
            k = j
            while j < len(body) and body[j].isdigit():
                j += 1
            if j > k:
                hcount = int(body[k:j])
        charge = 0
        if body[j:j + 1] in ("+", "-"):
            sign = 1 if body[j] == "+" else -1
            k = j
            while j < len(body) and body[j] == body[k]:
                j += 1
            reps = j - k
            m = j
            while j < len(body) and body[j].isdigit():
                j += 1
            if j > m:
                if reps > 1:
                    self.fail("malformed charge", start + 1 + k)
                charge = sign * int(body[m:j])
            else:
                charge = sign * reps
            if not -4 <= charge <= 4:
                self.fail(f"charge {charge} out of range", start + 1 + k)
        if body[j:j + 1] == ":":  # atom class, discarded
            j += 1
            k = j
            while j < len(body) and body[j].isdigit():
                j += 1
            if j == k:
                self.fail("malformed atom class", start + 1 + k)
        if j != len(body):
            self.fail(f"unsupported construct in bracket atom '[{body}]'", start + 1 + j)
        return Atom(sym, aromatic=aromatic, charge=charge, explicit_h=hcount, bracket=True, offset=start)


def _fold_hydrogens(p: _Parser) -> None:
    """Remove explicit [H] nodes, crediting them to their heavy neighbour."""
    hs = [i for i, a in enumerate(p.atoms) if a.symbol == "H"]
    if not hs:
        return
    if len(hs) == len(p.atoms):
        p.fail("hydrogen-only structure", p.atoms[0].offset)
    nbrs: dict[int, list[int]] = {i: [] for i in range(len(p.atoms))}
    for a, b in p.bonds:
        nbrs[a].append(b)
        nbrs[b].append(a)
    for h in hs:
        if len(nbrs[h]) != 1 or p.atoms[nbrs[h][0]].symbol == "H":
            p.fail("bridging or isolated hydrogen unsupported", p.atoms[h].offset)
        heavy = nbrs[h][0]
        if p.bonds[(min(h, heavy), max(h, heavy))] != "-":
            p.fail("non-single bond to hydrogen", p.atoms[h].offset)
        p.atoms[heavy].explicit_h += 1 + p.atoms[h].explicit_h
    keep = [i for i in range(len(p.atoms)) if p.atoms[i].symbol != "H"]
    remap = {old: new for new, old in enumerate(keep)}
    p.atoms = [p.atoms[i] for i in keep]
    p.bonds = {(remap[a], remap[b]): sym for (a, b), sym in p.bonds.items() if a in remap and b in remap}


def _assign_hydrogens(atoms: list[Atom], bonds: dict[tuple[int, int], str]) -> None:
    order_sum = [0] * len(atoms)
    for (a, b), sym in bonds.items():
        atoms[a].degree += 1
        atoms[b].degree += 1
        order_sum[a] += BOND_ORDER[sym]
        order_sum[b] += BOND_ORDER[sym]
    for atom, used in zip(atoms, order_sum):
        if atom.bracket or atom.symbol not in VALENCES:
            continue
        used += atom.explicit_h
        if atom.aromatic:
            atom.implicit_h = max(0, VALENCES[atom.symbol][0] - used - 1)
            continue
        for v in VALENCES[atom.symbol]:
            if v >= used:
                atom.implicit_h = v - used
                break


def featurize_atoms(atoms: list[Atom]) -> np.ndarray:
    """One-hot atom features: element(11) | degree(7) | charge(5) | aromatic(1) | total H(6)."""
    x = np.zeros((len(atoms), NUM_ATOM_FEATURES))
    deg0 = N_ELEMENT
    chg0 = deg0 + N_DEGREE
    aro = chg0 + N_CHARGE
    h0 = aro + 1
    for r, atom in enumerate(atoms):
        sym = atom.symbol
        x[r, FEATURE_ELEMENTS.index(sym) if sym in FEATURE_ELEMENTS else N_ELEMENT - 1] = 1
        x[r, deg0 + min(atom.degree, MAX_DEGREE)] = 1
        charge = min(max(atom.charge, FEATURE_CHARGES[0]), FEATURE_CHARGES[-1])
        x[r, chg0 + FEATURE_CHARGES.index(charge)] = 1
        x[r, aro] = float(atom.aromatic)
        x[r, h0 + min(atom.total_h, MAX_H)] = 1
    return x


def parse_smiles(smiles: str) -> MolecularGraph:
    """Parse ``smiles`` into a :class:`MolecularGraph`.

    Raises :class:`ParseError` (with byte offset and construct name) for
    anything outside the supported subset.
    """
    if not isinstance(smiles, str) or not smiles.strip():
        raise ParseError(str(smiles), 0, "empty SMILES")
    smiles = smiles.strip()
    p = _Parser(smiles)
    p.parse()
    if p.stereo:
        logger.warning("stereo markers ignored in %s", smiles)
    _fold_hydrogens(p)
    _assign_hydrogens(p.atoms, p.bonds)
    n = len(p.atoms)
    adj = np.zeros((n, n), dtype=np.uint8)
    for a, b in p.bonds:
        adj[a, b] = adj[b, a] = 1
    return MolecularGraph(
        atom_features=featurize_atoms(p.atoms),
        adjacency=adj,
        smiles_source=smiles,
        atoms=p.atoms,
        bonds=p.bonds,
    )
