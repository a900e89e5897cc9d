"""Core data model: terms, atoms, conjunctive queries, mapping rules and schema mappings.

Rules are source-to-target dependencies with a conjunctive body over the source
schema and a conjunctive head over the target schema. Head variables are either
universally quantified (bound in the body) or existential. All model values are
immutable after construction; every operation on them is a pure function.

Text format (one rule per line)::

    Doctor($n,$s) & Hospital($p,$l) -> Institution($p,?i)

Variables are prefixed ``$``, existentials ``?``, constants are single-quoted.
Queries use the same atom syntax without existentials.
"""

from __future__ import annotations

import hashlib
import itertools
import re
from dataclasses import dataclass, field

PeerId = int
MappingId = str

CONSTANT = "constant"
VARIABLE = "variable"

_NULL_PREFIX = "~n"


class ModelError(ValueError):
    """Malformed model value or unparsable text."""


@dataclass(frozen=True)
class Term:
    """A constant value or a variable; the two namespaces are disjoint."""

    kind: str
    name: str

    def __post_init__(self):
        if self.kind not in (CONSTANT, VARIABLE):
            raise ModelError(f"bad term kind: {self.kind!r}")

    @property
    def is_variable(self) -> bool:
        return self.kind == VARIABLE

    @property
    def is_constant(self) -> bool:
        return self.kind == CONSTANT

    def render(self) -> str:
        return f"'{self.name}'" if self.kind == CONSTANT else f"${self.name}"


def var(name: str) -> Term:
    return Term(VARIABLE, name)


def const(value: str) -> Term:
    return Term(CONSTANT, value)


def fresh_null(counter: int) -> Term:
    """Labeled null used by the chase; compares like any other constant."""
    return Term(CONSTANT, f"{_NULL_PREFIX}{counter}")


def is_null(term: Term) -> bool:
    return term.is_constant and term.name.startswith(_NULL_PREFIX)


@dataclass(frozen=True)
class Atom:
    """A predicate label applied to an ordered list of terms."""

    label: str
    params: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.params)

    def variables(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.params if t.is_variable)

    def render(self, existentials: frozenset[str] = frozenset()) -> str:
        parts = []
        for t in self.params:
            if t.is_variable and t.name in existentials:
                parts.append(f"?{t.name}")
            else:
                parts.append(t.render())
        return f"{self.label}({','.join(parts)})"


@dataclass(frozen=True)
class ConjunctiveQuery:
    """Non-empty conjunction of atoms plus the hop counter carried by envelopes."""

    atoms: tuple[Atom, ...]
    query_hops: int = 0

    def __post_init__(self):
        if not self.atoms:
            raise ModelError("conjunctive query needs at least one atom")
        if self.query_hops < 0:
            raise ModelError("query_hops must be non-negative")

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.atoms:
            for name in a.variables():
                seen.setdefault(name)
        return tuple(seen)

    def with_hops(self, hops: int) -> "ConjunctiveQuery":
        return ConjunctiveQuery(self.atoms, hops)

    def render(self) -> str:
        return " & ".join(a.render() for a in self.atoms)


@dataclass(frozen=True)
class MappingRule:
    """One source-to-target dependency: body atoms imply head atoms.

    Body parameters are universally quantified variables; head parameters are
    body variables or existentials. A label appears at most once per side.
    """

    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    existentials: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.body or not self.head:
            raise ModelError("rule body and head must be non-empty")
        body_vars = set()
        for a in self.body:
            for t in a.params:
                if not t.is_variable:
                    raise ModelError(f"constant {t.render()} in rule body")
                body_vars.add(t.name)
        for side in (self.body, self.head):
            labels = [a.label for a in side]
            if len(labels) != len(set(labels)):
                raise ModelError("a label may appear only once per rule side")
        for a in self.head:
            for t in a.params:
                if not t.is_variable:
                    raise ModelError(f"constant {t.render()} in rule head")
                if t.name not in body_vars and t.name not in self.existentials:
                    raise ModelError(f"head variable ${t.name} is neither universal nor existential")
        if self.existentials & body_vars:
            raise ModelError("existential names must not appear in the body")

    def universals(self) -> frozenset[str]:
        return frozenset(n for a in self.body for n in a.variables())

    def render(self) -> str:
        body = " & ".join(a.render() for a in self.body)
        head = " & ".join(a.render(self.existentials) for a in self.head)
        return f"{body} -> {head}"

    def canonical_text(self) -> str:
        return canonical_rule_text(self)

    @property
    def signature(self) -> str:
        return rule_signature(self)


@dataclass(frozen=True)
class SchemaMapping:
    """A set of rules between one source peer and one target peer."""

    source_peer: PeerId
    target_peer: PeerId
    rules: tuple[MappingRule, ...]

    def __post_init__(self):
        if not self.rules:
            raise ModelError("schema mapping needs at least one rule")

    @property
    def id(self) -> MappingId:
        return mapping_id(self.rules)


@dataclass(frozen=True)
class Instance:
    """A set of ground facts; only used by the chase-based test oracle."""

    facts: frozenset[Atom]

    def __post_init__(self):
        for f in self.facts:
            if any(t.is_variable for t in f.params):
                raise ModelError(f"instance fact {f.render()} is not ground")

    def by_label(self, label: str) -> list[Atom]:
        return [f for f in self.facts if f.label == label]


@dataclass(frozen=True)
class Schema:
    """Relational schema of one peer: table name to attribute names."""

    tables: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tables", dict(self.tables))

    def arity(self, label: str) -> int:
        return len(self.tables[label])

    def fingerprint(self) -> str:
        text = ";".join(f"{t}({','.join(attrs)})" for t, attrs in sorted(self.tables.items()))
        return hashlib.sha1(text.encode()).hexdigest()


# -- canonical forms and signatures -----------------------------------------

def _canonical_atoms(atoms: tuple[Atom, ...], rename: dict[str, str], prefix: str,
                     existentials: frozenset[str] = frozenset(),
                     ex_rename: dict[str, str] | None = None) -> list[str]:
    rendered = []
    for a in sorted(atoms, key=lambda a: (a.label, a.arity)):
        parts = []
        for t in a.params:
            if t.is_constant:
                parts.append(t.render())
            elif t.name in existentials:
                assert ex_rename is not None
                parts.append("?" + ex_rename.setdefault(t.name, f"e{len(ex_rename)}"))
            else:
                parts.append("$" + rename.setdefault(t.name, f"{prefix}{len(rename)}"))
        rendered.append(f"{a.label}({','.join(parts)})")
    return rendered


def canonical_rule_text(rule: MappingRule) -> str:
    """Canonical text: atoms sorted per side, variables renamed positionally.

    Two rules that differ only in variable names or atom order share one
    canonical text, and therefore one signature.
    """
    rename: dict[str, str] = {}
    ex_rename: dict[str, str] = {}
    body = _canonical_atoms(rule.body, rename, "u")
    head = _canonical_atoms(rule.head, rename, "u", rule.existentials, ex_rename)
    return " & ".join(body) + " -> " + " & ".join(head)


def rule_signature(rule: MappingRule) -> MappingId:
    return hashlib.sha1(canonical_rule_text(rule).encode()).hexdigest()


def mapping_id(rules: tuple[MappingRule, ...]) -> MappingId:
    joined = "\n".join(sorted(rule_signature(r) for r in rules))
    return hashlib.sha1(joined.encode()).hexdigest()


def canonical_query_text(cq: ConjunctiveQuery) -> str:
    """Canonical text of a query, ignoring hop count.

    Queries may repeat labels, so ties are broken by trying every ordering of
    the tied atoms and keeping the lexicographically least rendering. Queries
    here have at most a handful of atoms, which keeps this exact and cheap.
    """
    groups: dict[tuple, list[Atom]] = {}
    for a in cq.atoms:
        key = (a.label, a.arity, tuple(t.name if t.is_constant else None for t in a.params))
        groups.setdefault(key, []).append(a)

    def render_order(atoms: list[Atom]) -> str:
        rename: dict[str, str] = {}
        out = []
        for a in atoms:
            parts = []
            for t in a.params:
                if t.is_constant:
                    parts.append(t.render())
                else:
                    parts.append("$" + rename.setdefault(t.name, f"v{len(rename)}"))
            out.append(f"{a.label}({','.join(parts)})")
        return " & ".join(out)

    best = None
    ordered_groups = [groups[k] for k in sorted(groups)]
    for perm_lists in itertools.product(*(itertools.permutations(g) for g in ordered_groups)):
        candidate = render_order([a for g in perm_lists for a in g])
        if best is None or candidate < best:
            best = candidate
    assert best is not None
    return best


# -- parsing -----------------------------------------------------------------

_ATOM_RE = re.compile(r"\s*([A-Za-z_]\w*)\s*\(([^()]*)\)\s*")
_TERM_RE = re.compile(r"^(?:\$(\w+)|\?(\w+)|'([^']*)')$")


def _parse_terms(text: str) -> tuple[list[Term], set[str]]:
    terms: list[Term] = []
    existentials: set[str] = set()
    for raw in text.split(","):
        raw = raw.strip()
        m = _TERM_RE.match(raw)
        if not m:
            raise ModelError(f"bad term: {raw!r}")
        v, ex, c = m.groups()
        if v is not None:
            terms.append(var(v))
        elif ex is not None:
            terms.append(var(ex))
            existentials.add(ex)
        else:
            terms.append(const(c))
    return terms, existentials


def parse_atoms(text: str) -> tuple[tuple[Atom, ...], set[str]]:
    atoms: list[Atom] = []
    existentials: set[str] = set()
    for chunk in text.split("&"):
        m = _ATOM_RE.fullmatch(chunk)
        if not m:
            raise ModelError(f"bad atom: {chunk.strip()!r}")
        label, params = m.group(1), m.group(2)
        if not params.strip():
            raise ModelError(f"atom {label} has no parameters")
        terms, exs = _parse_terms(params)
        atoms.append(Atom(label, tuple(terms)))
        existentials |= exs
    return tuple(atoms), existentials


def parse_rule(line: str) -> MappingRule:
    if "->" not in line:
        raise ModelError(f"rule line lacks '->': {line!r}")
    body_text, head_text = line.split("->", 1)
    body, body_ex = parse_atoms(body_text)
    if body_ex:
        raise ModelError("existentials are not allowed in a rule body")
    head, head_ex = parse_atoms(head_text)
    return MappingRule(body, head, frozenset(head_ex))


def parse_query(line: str, query_hops: int = 0) -> ConjunctiveQuery:
    atoms, existentials = parse_atoms(line)
    if existentials:
        raise ModelError("existentials are not allowed in a query")
    return ConjunctiveQuery(atoms, query_hops)
