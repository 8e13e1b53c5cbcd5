"""Dominance act utilitarian obligations on weighted stit automata.

Parse DAU formulas, model-check obligations, permissions and missions on
stit automata, and cross-check them against brute-force semantics on
explicit stit trees.
"""
from .automaton import Discounted, Min, StitAutomaton, Transition, load_automaton, make_automaton, prime
from .checker import CheckerError, Verdict, check_conditional_ought, check_ought, check_permission, check_query
from .formula import Formula, FormulaError, parse_formula, to_text
from .oracle import ExplicitStitModel, Index, load_model, unroll

__all__ = [
    "CheckerError", "Discounted", "ExplicitStitModel", "Formula", "FormulaError", "Index", "Min",
    "StitAutomaton", "Transition", "Verdict", "check_conditional_ought", "check_ought",
    "check_permission", "check_query", "load_automaton", "load_model", "make_automaton",
    "parse_formula", "prime", "to_text", "unroll",
]
