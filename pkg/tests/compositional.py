"""Shared harness checking the compositional-transition property of heap
automata: running an automaton through a body with abstract call states must
agree with running it directly on the fully replaced heap."""

import itertools
import random

from slrobust.heaps import NIL, PointsTo, PredCall, mk_heap, pure_atom, replace_call


def def4_agrees(automaton, body, parts) -> bool:
    """The compositionality biconditional for one (body, replacement) pair:
    the set of states assigned through the abstraction equals the set of
    states assigned to the replaced heap."""
    pools = [automaton.targets(t, ()) for t in parts]
    via_states = set()
    for combo in itertools.product(*pools):
        via_states.update(automaton.targets(body, list(combo)))
    whole = body
    for i in reversed(range(len(parts))):
        whole = replace_call(whole, i, parts[i])
    direct = set(automaton.targets(whole, ()))
    return via_states == direct


def random_reduced_with_arity(rng: random.Random, arity: int, max_bound=2,
                              max_cells=2, max_targets=2, max_pure=3):
    bound = rng.randint(0, max_bound)
    vars_ = [NIL, *range(1, arity + 1), *(-k for k in range(1, bound + 1))]
    spatial = []
    for _ in range(rng.randint(0, max_cells)):
        candidates = [v for v in vars_ if v != NIL]
        if not candidates:
            break
        src = rng.choice(candidates)
        spatial.append(PointsTo(src, tuple(rng.choice(vars_)
                                           for _ in range(rng.randint(1, max_targets)))))
    pure = {pure_atom(rng.choice(vars_), rng.random() < 0.6, rng.choice(vars_))
            for _ in range(rng.randint(0, max_pure))}
    return mk_heap(arity, bound, spatial, (), pure)


def random_body_with_calls(rng: random.Random, alpha: int, max_calls=2):
    """A rule body over <= alpha free variables with up to max_calls calls of
    random arities <= alpha."""
    free = rng.randint(0, alpha)
    bound = rng.randint(0, 2)
    vars_ = [NIL, *range(1, free + 1), *(-k for k in range(1, bound + 1))]
    spatial = []
    for _ in range(rng.randint(0, 2)):
        candidates = [v for v in vars_ if v != NIL]
        if not candidates:
            break
        src = rng.choice(candidates)
        spatial.append(PointsTo(src, tuple(rng.choice(vars_)
                                           for _ in range(rng.randint(1, 2)))))
    calls = []
    for i in range(rng.randint(0, max_calls)):
        arity = rng.randint(0, alpha)
        calls.append(PredCall(f"C{i}", tuple(rng.choice(vars_) for _ in range(arity))))
    pure = {pure_atom(rng.choice(vars_), rng.random() < 0.6, rng.choice(vars_))
            for _ in range(rng.randint(0, 2))}
    return mk_heap(free, bound, spatial, calls, pure)


def fuzz_automaton(automaton_for_alpha, n_instances: int, seed: int,
                   alpha: int = 3, max_calls=2) -> int:
    """Run ``n_instances`` random compositionality checks; returns the number
    of failures (0 expected).  ``automaton_for_alpha`` maps alpha to the
    automaton under test, so width-sensitive automata fit the generated
    bodies."""
    rng = random.Random(seed)
    failures = 0
    automaton = automaton_for_alpha(alpha)
    for _ in range(n_instances):
        body = random_body_with_calls(rng, alpha, max_calls)
        parts = [random_reduced_with_arity(rng, len(c.args)) for c in body.calls]
        if not def4_agrees(automaton, body, parts):
            failures += 1
    return failures
