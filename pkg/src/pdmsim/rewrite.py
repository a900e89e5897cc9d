"""Atom unification, query/rule relevance and bidirectional query translation.

Forward translation rewrites a query along a rule (body schema to head schema)
by substituting the unified bindings into the head; backward translation
unfolds the rule like a view, from head to body. The chase and the conjunctive
query evaluator at the bottom exist to check translations against materialized
instances in tests.
"""

from __future__ import annotations

from .model import (
    Atom,
    ConjunctiveQuery,
    Instance,
    MappingRule,
    SchemaMapping,
    Term,
    fresh_null,
    var,
)

FORWARD = "forward"
BACKWARD = "backward"

Substitution = dict[str, Term]


class TranslationError(Exception):
    """Base class for translation failures."""


class NotRelevant(TranslationError):
    """Translation requested along a rule the query is not relevant to."""


class ConflictingBindings(TranslationError):
    """One rule variable would have to equal two distinct constants."""


def unify_atom(query_atom: Atom, rule_atom: Atom) -> Substitution | None:
    """Match a query atom against a rule atom positionally.

    Returns the substitution mapping rule variables to the query terms at the
    same positions, or None if labels, arities or positions do not match.
    """
    if query_atom.label != rule_atom.label or query_atom.arity != rule_atom.arity:
        return None
    subst: Substitution = {}
    for q, r in zip(query_atom.params, rule_atom.params):
        if r.is_variable:
            bound = subst.get(r.name)
            if bound is not None and bound != q:
                return None
            subst[r.name] = q
        else:
            if not (q.is_constant and q.name == r.name):
                return None
    return subst


def universal_head_atoms(rule: MappingRule) -> tuple[Atom, ...]:
    """Head atoms usable for backward matching: no existential parameters."""
    return tuple(
        a for a in rule.head
        if not any(t.is_variable and t.name in rule.existentials for t in a.params)
    )


def relevant_forward(q: ConjunctiveQuery, m: MappingRule) -> bool:
    """Every query atom unifies with some body atom of the rule."""
    return all(any(unify_atom(a, b) is not None for b in m.body) for a in q.atoms)


def relevant_backward(q: ConjunctiveQuery, m: MappingRule) -> bool:
    """Every query atom unifies with some all-universal head atom."""
    candidates = universal_head_atoms(m)
    return bool(candidates) and all(
        any(unify_atom(a, h) is not None for h in candidates) for a in q.atoms
    )


def mapping_relevant(q: ConjunctiveQuery, mapping: SchemaMapping) -> bool:
    """At least one rule of the mapping is forward- or backward-relevant."""
    return any(relevant_forward(q, m) or relevant_backward(q, m) for m in mapping.rules)


def _merge_binding(subst: Substitution, name: str, term: Term) -> None:
    bound = subst.get(name)
    if bound is None:
        subst[name] = term
        return
    if bound == term:
        return
    if bound.is_constant and term.is_constant:
        raise ConflictingBindings(f"${name} bound to both {bound.render()} and {term.render()}")
    # Constant beats variable; two distinct variables keep the first binding.
    if term.is_constant:
        subst[name] = term


def translate(q: ConjunctiveQuery, m: MappingRule, direction: str) -> ConjunctiveQuery:
    """Rewrite q along (forward) or against (backward) the rule m.

    The composed substitution from matching every query atom is applied to the
    opposite side; rule variables left unbound (projected-out universals and,
    forward, the existentials) become fresh query variables. The hop counter
    is copied unchanged.
    """
    if direction == FORWARD:
        if not relevant_forward(q, m):
            raise NotRelevant("query is not forward-relevant to this rule")
        in_side, out_side = m.body, m.head
    elif direction == BACKWARD:
        if not relevant_backward(q, m):
            raise NotRelevant("query is not backward-relevant to this rule")
        in_side, out_side = universal_head_atoms(m), m.body
    else:
        raise ValueError(f"bad direction: {direction!r}")

    subst: Substitution = {}
    for a in q.atoms:
        for candidate in in_side:
            local = unify_atom(a, candidate)
            if local is not None:
                for name, term in local.items():
                    _merge_binding(subst, name, term)
                break

    used = {t.name for t in subst.values() if t.is_variable}
    used.update(q.variables())
    fresh: Substitution = {}
    counter = 0

    def fresh_for(name: str) -> Term:
        nonlocal counter
        if name not in fresh:
            while f"f{counter}" in used:
                counter += 1
            fresh[name] = var(f"f{counter}")
            counter += 1
        return fresh[name]

    out_atoms: list[Atom] = []
    for a in out_side:
        params = []
        for t in a.params:
            if t.is_constant:
                params.append(t)
            elif t.name in subst:
                params.append(subst[t.name])
            else:
                params.append(fresh_for(t.name))
        atom = Atom(a.label, tuple(params))
        if atom not in out_atoms:
            out_atoms.append(atom)
    return ConjunctiveQuery(tuple(out_atoms), q.query_hops)


# -- chase and evaluation (test oracle) --------------------------------------

def _match_atoms(atoms: tuple[Atom, ...], instance: Instance,
                 subst: Substitution) -> list[Substitution]:
    """All extensions of subst mapping every atom onto a fact, by backtracking."""
    if not atoms:
        return [dict(subst)]
    first, rest = atoms[0], atoms[1:]
    results: list[Substitution] = []
    for fact in instance.by_label(first.label):
        if fact.arity != first.arity:
            continue
        trial = dict(subst)
        ok = True
        for pattern, value in zip(first.params, fact.params):
            if pattern.is_constant:
                if pattern != value:
                    ok = False
                    break
            else:
                bound = trial.get(pattern.name)
                if bound is None:
                    trial[pattern.name] = value
                elif bound != value:
                    ok = False
                    break
        if ok:
            results.extend(_match_atoms(rest, instance, trial))
    return results


def chase(mapping: SchemaMapping, instance: Instance) -> Instance:
    """Canonical universal solution: fire every rule on every body match.

    Existential positions receive fresh labeled nulls, one set per body match.
    Terminates because rules are source-to-target.
    """
    facts = set()
    counter = 0
    for rule in mapping.rules:
        for match in _match_atoms(rule.body, instance, {}):
            assignment = dict(match)
            for name in sorted(rule.existentials):
                counter += 1
                assignment[name] = fresh_null(counter)
            for a in rule.head:
                params = tuple(t if t.is_constant else assignment[t.name] for t in a.params)
                facts.add(Atom(a.label, params))
    return Instance(frozenset(facts))


def evaluate(q: ConjunctiveQuery, instance: Instance,
             answer_vars: tuple[str, ...] | None = None) -> set[tuple[str, ...]]:
    """Evaluate a conjunctive query over an instance.

    Answers are tuples of constant names projected onto answer_vars (default:
    the query's variables in sorted order). Set semantics.
    """
    if answer_vars is None:
        answer_vars = tuple(sorted(q.variables()))
    answers = set()
    for match in _match_atoms(q.atoms, instance, {}):
        answers.add(tuple(match[v].name for v in answer_vars))
    return answers
