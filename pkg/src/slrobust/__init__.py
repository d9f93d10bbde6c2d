"""Robustness analysis, SID refinement and entailment checking for the
symbolic-heap fragment of separation logic with inductive predicates."""

from .heaps import (NIL, ArityError, Diagnostic, MalformedTreeError, OracleCapExceeded,
                    PointsTo, PredCall, PureAtom, Sid, SymbolicHeap, UnfoldingTree,
                    canonical, emp, enumerate_unfoldings, mk_heap, mk_sid,
                    nonempty_predicates, pure_atom, replace_call, unfold, validate_sid)
from .definite import DefiniteInfo, complete, definitely_reaches
from .models import (Model, entails_reduced, generic_tight_model, mk_model,
                     sat_reduced, tight_models_bounded)

__all__ = [
    "NIL", "ArityError", "Diagnostic", "MalformedTreeError", "OracleCapExceeded",
    "PointsTo", "PredCall", "PureAtom", "Sid", "SymbolicHeap", "UnfoldingTree",
    "canonical", "emp", "enumerate_unfoldings", "mk_heap", "mk_sid",
    "nonempty_predicates", "pure_atom", "replace_call", "unfold", "validate_sid",
    "DefiniteInfo", "complete", "definitely_reaches",
    "Model", "entails_reduced", "generic_tight_model", "mk_model",
    "sat_reduced", "tight_models_bounded",
]
