"""Compare a fixpointed analysis graph with the program's ``pred`` assertions.

Every verdict is recomputed from the graph; statuses written in the source
are ignored. Calls are checked per predicate (some precondition must hold
for each reachable call pattern), success per assertion (the postcondition
must hold on success of calls compatible with that assertion's precondition).
"""

from __future__ import annotations

from dataclasses import dataclass

from .chc import ChcProgram, pred_str
from .domains import NO, YES, Subst, abstract_props, entails_props, glb, leq, lub, render
from .engine import AnalysisGraph, key_order
from .spans import Diagnostic, Span
from .syntax import AssertionDecl, term_vars

CHECKED, FALSE, CHECK = "checked", "false", "check"
SEVERITY = {CHECKED: "verified", FALSE: "error", CHECK: "warning"}


@dataclass(frozen=True)
class AssertionVerdict:
    span: Span
    pred: tuple
    part: str  # "calls" or "success"
    status: str
    message: str
    witness: str | None = None

    def __post_init__(self) -> None:
        if self.status == FALSE and self.witness is None:
            raise ValueError("a false verdict needs a witness")

    def render(self) -> str:
        s = self.span
        return f"{s.file_id}:{s.start_line}:{s.start_col}: [{self.status}] {pred_str(self.pred)} ({self.part}): {self.message}"

    def to_diagnostic(self) -> Diagnostic:
        return Diagnostic(
            self.span, SEVERITY[self.status], f"assrt.{self.status}",
            f"{pred_str(self.pred)} ({self.part}): {self.message}",
        )


def head_names(a: AssertionDecl) -> tuple:
    return tuple(v.name for v in a.head.args) if a.pred[1] else ()


def _prop_vars(conj) -> list:
    acc: list = []
    for lit in conj:
        term_vars(lit, acc)
    return acc


def _witness(a: Subst, focus) -> str:
    # Only shapes can clash (groundness meets never fail), so the shape part
    # of the property's variables is the offending value.
    return render(a.types_part(), focus)


def _reached(graph: AnalysisGraph, pred) -> list:
    return sorted((n for n in graph.nodes_of(pred) if n.key[1] is not None), key=lambda n: key_order(n.key))


def check_calls(graph: AnalysisGraph, pred, assertions) -> AssertionVerdict:
    first = assertions[0]
    names = head_names(first)
    pres = [abstract_props(a.pre, head_names(a), graph.domain) for a in assertions]
    pres = [Subst(graph.domain, names, p.abs.payload) for p in pres], [p.exact for p in pres]
    nodes = _reached(graph, pred)
    if not nodes:
        return AssertionVerdict(first.span, pred, "calls", CHECKED, "no calls reachable (vacuously true)")
    covered = []
    clashing = []
    for n in nodes:
        call = Subst(graph.domain, names, n.key[1])
        covered.append(any(ex and leq(call, p) for p, ex in zip(*pres)))
        clashing.append(all(glb(call, p).is_bottom for p in pres[0]))
    joined = Subst.bottom(graph.domain, names)
    for n in nodes:
        joined = lub(joined, Subst(graph.domain, names, n.key[1]))
    if all(covered):
        return AssertionVerdict(
            first.span, pred, "calls", CHECKED,
            f"precondition holds for all {len(nodes)} reachable call pattern(s)",
        )
    if all(clashing):
        focus = _prop_vars(a for asr in assertions for a in asr.pre) or None
        witness = _witness(joined, focus)
        return AssertionVerdict(
            first.span, pred, "calls", FALSE,
            f"no reachable call satisfies a precondition ({witness}); calls have {render(joined)}", witness,
        )
    bad = [Subst(graph.domain, names, n.key[1]) for n, c in zip(nodes, covered) if not c]
    listed = "; ".join(render(b) for b in bad[:3]) + ("; ..." if len(bad) > 3 else "")
    if any(clashing):
        msg = (f"{sum(clashing)} of {len(nodes)} call patterns violate every precondition, "
               f"{sum(covered)} satisfy one; unproved: {listed}")
    else:
        msg = f"precondition not proved for {len(bad)} of {len(nodes)} call pattern(s): {listed}"
    return AssertionVerdict(first.span, pred, "calls", CHECK, msg)


def check_success(graph: AnalysisGraph, assertion: AssertionDecl) -> AssertionVerdict:
    pred = assertion.pred
    names = head_names(assertion)
    pre = abstract_props(assertion.pre, names, graph.domain)
    post = abstract_props(assertion.post, names, graph.domain)
    compatible = 0
    s = Subst.bottom(graph.domain, names)
    for n in _reached(graph, pred):
        call = Subst(graph.domain, names, n.key[1])
        if glb(call, pre.abs).is_bottom:
            continue
        compatible += 1
        s = lub(s, glb(Subst(graph.domain, names, n.success), pre.abs))
    span = assertion.span
    if not compatible:
        return AssertionVerdict(span, pred, "success", CHECKED, "no compatible calls reachable (vacuously true)")
    if s.is_bottom:
        return AssertionVerdict(span, pred, "success", CHECKED, "never succeeds for compatible calls (vacuously true)")
    outcome = entails_props(s, post)
    if outcome == YES:
        return AssertionVerdict(span, pred, "success", CHECKED, f"postcondition holds; success has {render(s)}")
    if outcome == NO:
        witness = _witness(s, _prop_vars(assertion.post) or None)
        return AssertionVerdict(span, pred, "success", FALSE, f"postcondition violated ({witness}); success has {render(s)}", witness)
    note = "" if post.exact else " (postcondition not expressible in the domain)"
    return AssertionVerdict(span, pred, "success", CHECK, f"postcondition not proved{note}; success has {render(s)}")


def assertion_problems(program: ChcProgram, domain: str) -> tuple[list, list]:
    """Split assertions into checkable ones and diagnostics for invalid ones."""
    ok = []
    diags = []
    for a in program.assertions:
        names = head_names(a)
        problems = list(abstract_props(a.pre, names, domain).problems)
        problems += abstract_props(a.post, names, domain).problems
        if problems:
            for msg in problems:
                diags.append(Diagnostic(a.span, "error", "assrt.invalid", msg))
        else:
            ok.append(a)
    return ok, diags


def check_all(graph: AnalysisGraph, program: ChcProgram) -> list[AssertionVerdict]:
    valid, _ = assertion_problems(program, graph.domain)
    by_pred: dict = {}
    for a in valid:
        by_pred.setdefault(a.pred, []).append(a)
    out = [check_calls(graph, pred, group) for pred, group in by_pred.items()]
    out += [check_success(graph, a) for a in valid]

    def order(v: AssertionVerdict):
        s = v.span
        return (s.file_id, s.start_line, s.start_col, s.end_line, s.end_col, v.part != "calls", v.pred)

    return sorted(out, key=order)
