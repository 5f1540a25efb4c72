"""Bidirectional type checker for the dependent layer.

Judgmental equality is untyped weak-head normalization plus type-directed
eta (for Pi, Sigma and extension types), with three tope-sensitive rules:

  * boundary computation: applying a neutral of extension type reduces to
    the partial section whenever the context topes entail the subtope at
    the argument,
  * disjunction splitting: equality under a disjunctive tope constraint is
    checked in both strengthened contexts,
  * collapse: under an inconsistent tope context any two terms of the same
    type are equal.

Checking is pure per module; a shared solver memo table is the only cross
module state.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Union

from . import topes
from .diagnostics import Diagnostic
from .printer import print_term, print_tope
from .syntax import (
    App, Cube0, Cube1, CubeSort, CubeStar, Declaration, Extension, Fst,
    IdType, Interval, JElim, Join, Lam, Meet, Pair, Pi, RecBot, RecOr, Refl,
    ShapeTy, Sigma, Snd, SourceModule, Term, Tope, TopeAnd, TopeBinder,
    TopeBot, TopeOr, TopeTop, TypedBinder, Universe, Var, free_vars,
    fresh_name, subst,
)

sys.setrecursionlimit(100_000)

BOT = TopeBot()
TOP = TopeTop()


class KernelError(Exception):
    def __init__(self, code: str, message: str, span: Optional[tuple[int, int]] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.span = span


class CannotSynth(Exception):
    """A neutral term's type cannot be reconstructed (non-fatal)."""


# ---------------------------------------------------------------------------
# contexts


@dataclass(frozen=True)
class Ctx:
    """Interleaved telescope of cube variables, tope constraints and typed
    variables."""

    entries: tuple = ()

    def bind_var(self, name: str, ty: Optional[Term]) -> "Ctx":
        return Ctx(self.entries + (("var", name, ty),))

    def bind_cube(self, name: str, sort: CubeSort) -> "Ctx":
        return Ctx(self.entries + (("cube", name, sort),))

    def constrain(self, tope: Tope) -> "Ctx":
        return Ctx(self.entries + (("tope", tope),))

    def lookup(self, name: str):
        for e in reversed(self.entries):
            if e[0] in ("var", "cube") and e[1] == name:
                return e
        return None

    def names(self) -> set[str]:
        return {e[1] for e in self.entries if e[0] in ("var", "cube")}

    def cube_context(self) -> tuple[tuple[str, CubeSort], ...]:
        return tuple((e[1], e[2]) for e in self.entries if e[0] == "cube")

    def hyps(self) -> Tope:
        conj: Optional[Tope] = None
        for e in self.entries:
            if e[0] == "tope":
                conj = e[1] if conj is None else TopeAnd(conj, e[1])
        return conj if conj is not None else TOP

    def split(self) -> Optional[tuple["Ctx", "Ctx"]]:
        """Split the first disjunctive tope constraint, if any."""
        for i, e in enumerate(self.entries):
            if e[0] != "tope":
                continue
            parts = _split_tope(e[1])
            if parts is not None:
                left = Ctx(self.entries[:i] + (("tope", parts[0]),) + self.entries[i + 1:])
                right = Ctx(self.entries[:i] + (("tope", parts[1]),) + self.entries[i + 1:])
                return left, right
        return None


def _split_tope(t: Tope) -> Optional[tuple[Tope, Tope]]:
    match t:
        case TopeOr(l, r):
            return l, r
        case TopeAnd(l, r):
            sub = _split_tope(l)
            if sub is not None:
                return TopeAnd(sub[0], r), TopeAnd(sub[1], r)
            sub = _split_tope(r)
            if sub is not None:
                return TopeAnd(l, sub[0]), TopeAnd(l, sub[1])
    return None


@dataclass(eq=False)
class EnvEntry:
    name: str
    type: Term
    value: Optional[Term]
    kind: str  # "definition" | "postulate"
    module: str


@dataclass(eq=False)
class CheckReport:
    module: str
    status: str  # "ok" | "failed"
    diagnostics: list[Diagnostic] = field(default_factory=list)
    declarations_checked: int = 0
    solver_queries: int = 0
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        return {
            "module": self.module,
            "status": self.status,
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "stats": {
                "declarations_checked": self.declarations_checked,
                "solver_queries": self.solver_queries,
            },
        }


# ---------------------------------------------------------------------------
# the checker


class Checker:
    def __init__(
        self,
        env: dict[str, EnvEntry],
        solver: Optional[topes.Solver] = None,
        module: Optional[SourceModule] = None,
        strategy: str = "leftmost",
    ):
        self.env = env
        self.solver = solver if solver is not None else topes.Solver()
        self.module = module
        self.strategy = strategy
        self.queries = 0
        self._span_stack: list[tuple[int, int]] = []

    # -- spans ----------------------------------------------------------------

    def _push_span(self, node) -> bool:
        if self.module is not None:
            sp = self.module.span_of(node)
            if sp is not None:
                self._span_stack.append(sp)
                return True
        return False

    def current_span(self) -> Optional[tuple[int, int]]:
        return self._span_stack[-1] if self._span_stack else None

    def fail(self, code: str, message: str) -> KernelError:
        raise KernelError(code, message, self.current_span())

    # -- solver bridge ---------------------------------------------------------

    def entails(self, ctx: Ctx, hyps: Tope, goal: Tope) -> bool:
        self.queries += 1
        try:
            return self.solver.entails(ctx.cube_context(), hyps, goal)
        except topes.SortError as e:
            raise KernelError("SORT", str(e), self.current_span())
        except topes.CapacityError as e:
            raise KernelError("CAPACITY", str(e), self.current_span())

    def inconsistent(self, ctx: Ctx) -> bool:
        return self.entails(ctx, ctx.hyps(), BOT)

    def cube_equal(self, ctx: Ctx, a: Term, b: Term) -> bool:
        self.queries += 1
        try:
            return self.solver.cube_equal(ctx.cube_context(), ctx.hyps(), a, b)
        except topes.SortError as e:
            raise KernelError("SORT", str(e), self.current_span())
        except topes.CapacityError as e:
            raise KernelError("CAPACITY", str(e), self.current_span())

    def check_sorted(self, ctx: Ctx, tope: Tope) -> None:
        try:
            topes._Flattener(ctx.cube_context()).formula(tope)
        except topes.SortError as e:
            raise KernelError("SORT", str(e), self.current_span())

    # -- cube reading -----------------------------------------------------------

    def read_cube(self, ctx: Ctx, t: Term) -> Term:
        """Normalize a term into pure cube syntax; SORT error otherwise."""
        t = self.whnf(ctx, t)
        match t:
            case Var(n):
                e = ctx.lookup(n)
                if e is None or e[0] != "cube":
                    raise KernelError(
                        "SORT", f"{n} is not a cube variable", self.current_span())
                return t
            case Cube0() | Cube1() | CubeStar():
                return t
            case Meet(a, b):
                return Meet(self.read_cube(ctx, a), self.read_cube(ctx, b))
            case Join(a, b):
                return Join(self.read_cube(ctx, a), self.read_cube(ctx, b))
            case Pair(a, b):
                return Pair(self.read_cube(ctx, a), self.read_cube(ctx, b))
            case Fst(p):
                return Fst(self.read_cube(ctx, p))
            case Snd(p):
                return Snd(self.read_cube(ctx, p))
        raise KernelError(
            "SORT", f"expected a cube term, found {print_term(t)}", self.current_span())

    def cube_sort_of(self, ctx: Ctx, t: Term) -> CubeSort:
        try:
            return topes._Flattener(ctx.cube_context()).sort_of(t)
        except topes.SortError as e:
            raise KernelError("SORT", str(e), self.current_span())

    def read_tope(self, ctx: Ctx, tope: Tope) -> Tope:
        """Normalize the cube terms inside a tope (unfolding definitions)."""
        match tope:
            case TopeAnd(l, r):
                return TopeAnd(self.read_tope(ctx, l), self.read_tope(ctx, r))
            case TopeOr(l, r):
                return TopeOr(self.read_tope(ctx, l), self.read_tope(ctx, r))
            case topes.TopeEq(l, r):
                return topes.TopeEq(self.read_cube(ctx, l), self.read_cube(ctx, r))
            case topes.TopeLeq(l, r):
                return topes.TopeLeq(self.read_cube(ctx, l), self.read_cube(ctx, r))
        return tope

    # -- shapes ------------------------------------------------------------------

    def resolve_shape(self, ctx: Ctx, dom: Term) -> ShapeTy:
        d = self.whnf(ctx, dom)
        if isinstance(d, ShapeTy):
            return d
        raise KernelError(
            "CHECK", f"expected a shape, found {print_term(d)}", self.current_span())

    def open_binder(self, ctx: Ctx, name: str, pieces: list) -> tuple[str, list]:
        """Freshen a binder whose name is already bound, keeping contexts
        duplicate-free for the solver."""
        if name in ctx.names() or name in self.env:
            name2 = fresh_name(name)
            return name2, [subst(p, name, Var(name2)) for p in pieces]
        return name, pieces

    # -- weak-head normalization ---------------------------------------------------

    def whnf(self, ctx: Ctx, t: Term) -> Term:
        while True:
            match t:
                case App(f, a):
                    fw = self.whnf(ctx, f)
                    if self.strategy == "innermost":
                        a = self.whnf(ctx, a)
                    if isinstance(fw, Lam):
                        t = subst(fw.body, fw.binder, a)
                        continue
                    red = self._boundary_reduce(ctx, fw, a)
                    if red is not None:
                        t = red
                        continue
                    return App(fw, a)
                case Fst(p):
                    pw = self.whnf(ctx, p)
                    if isinstance(pw, Pair):
                        t = pw.fst
                        continue
                    return Fst(pw)
                case Snd(p):
                    pw = self.whnf(ctx, p)
                    if isinstance(pw, Pair):
                        t = pw.snd
                        continue
                    return Snd(pw)
                case JElim(c, d, p):
                    pw = self.whnf(ctx, p)
                    if isinstance(pw, Refl):
                        t = d
                        continue
                    return JElim(c, d, pw)
                case Var(n):
                    if ctx.lookup(n) is not None:
                        return t
                    entry = self.env.get(n)
                    if entry is not None and entry.value is not None:
                        t = entry.value
                        continue
                    return t
                case RecOr(lt, rt, l, r):
                    hyps = ctx.hyps()
                    if self.entails(ctx, hyps, self.read_tope(ctx, lt)):
                        t = l
                        continue
                    if self.entails(ctx, hyps, self.read_tope(ctx, rt)):
                        t = r
                        continue
                    return t
                case Pi(x, dom, cod):
                    dw = self.whnf(ctx, dom)
                    if isinstance(dw, ShapeTy):
                        return Extension(x, dw, BOT, cod, RecBot())
                    return t
                case _:
                    return t

    def _boundary_reduce(self, ctx: Ctx, neutral: Term, arg: Term) -> Optional[Term]:
        """ext_app on a neutral head: reduce to the partial section when the
        context topes entail the subtope at the argument."""
        try:
            ty = self.whnf(ctx, self.neutral_type(ctx, neutral))
        except CannotSynth:
            return None
        if not isinstance(ty, Extension):
            return None
        if isinstance(ty.subtope, TopeBot):
            return None
        try:
            ca = self.read_cube(ctx, arg)
            phi = self.read_tope(ctx, subst(ty.subtope, ty.binder, ca))
            if self.entails(ctx, ctx.hyps(), phi):
                return subst(ty.partial, ty.binder, arg)
        except KernelError:
            return None
        return None

    def neutral_type(self, ctx: Ctx, t: Term) -> Term:
        match t:
            case Var(n):
                e = ctx.lookup(n)
                if e is not None:
                    if e[0] == "cube":
                        x = fresh_name("t")
                        return ShapeTy(x, e[2], TOP)
                    if e[2] is not None:
                        return e[2]
                    raise CannotSynth
                entry = self.env.get(n)
                if entry is not None:
                    return entry.type
                raise CannotSynth
            case App(f, a):
                fty = self.whnf(ctx, self.neutral_type(ctx, f))
                match fty:
                    case Pi(x, _, cod):
                        return subst(cod, x, a)
                    case Extension(x, _, _, fam, _):
                        return subst(fam, x, a)
                raise CannotSynth
            case Fst(p):
                pty = self.whnf(ctx, self.neutral_type(ctx, p))
                if isinstance(pty, Sigma):
                    return pty.fst_type
                raise CannotSynth
            case Snd(p):
                pty = self.whnf(ctx, self.neutral_type(ctx, p))
                if isinstance(pty, Sigma):
                    return subst(pty.snd_type, pty.binder, Fst(p))
                raise CannotSynth
            case JElim(c, _, p):
                pty = self.whnf(ctx, self.neutral_type(ctx, p))
                if isinstance(pty, IdType):
                    return App(App(c, pty.rhs), p)
                raise CannotSynth
        raise CannotSynth

    # -- definitional equality ------------------------------------------------------

    def def_equal(self, ctx: Ctx, ty: Optional[Term], a: Term, b: Term) -> bool:
        sp = ctx.split()
        if sp is not None:
            return self.def_equal(sp[0], ty, a, b) and self.def_equal(sp[1], ty, a, b)
        if self.inconsistent(ctx):
            return True
        if ty is not None:
            tyw = self.whnf(ctx, ty)
            match tyw:
                case Pi(x, dom, cod):
                    x2, [cod2] = self.open_binder(ctx, x, [cod])
                    ctx2 = ctx.bind_var(x2, dom)
                    return self.def_equal(ctx2, cod2, App(a, Var(x2)), App(b, Var(x2)))
                case Extension(x, dom, _, fam, _):
                    sh = self.resolve_shape(ctx, dom)
                    x2, [fam2] = self.open_binder(ctx, x, [fam])
                    ctx2 = ctx.bind_cube(x2, sh.sort).constrain(
                        subst(sh.tope, sh.binder, Var(x2)))
                    return self.def_equal(ctx2, fam2, App(a, Var(x2)), App(b, Var(x2)))
                case Sigma(x, dom, cod):
                    if not self.def_equal(ctx, dom, Fst(a), Fst(b)):
                        return False
                    return self.def_equal(ctx, subst(cod, x, Fst(a)), Snd(a), Snd(b))
                case ShapeTy(x, _, _):
                    try:
                        return self.cube_equal(ctx, self.read_cube(ctx, a),
                                               self.read_cube(ctx, b))
                    except KernelError:
                        return False
        aw = self.whnf(ctx, a)
        bw = self.whnf(ctx, b)
        # stuck disjunction glue: split along the eliminator's topes
        for side, other in ((aw, bw), (bw, aw)):
            if isinstance(side, RecOr):
                lt = self.read_tope(ctx, side.left_tope)
                rt = self.read_tope(ctx, side.right_tope)
                return (
                    self.def_equal(ctx.constrain(lt), ty, side, other)
                    and self.def_equal(ctx.constrain(rt), ty, side, other)
                )
        return self._struct_equal(ctx, aw, bw)

    def _struct_equal(self, ctx: Ctx, a: Term, b: Term) -> bool:
        # cube-layer terms compare through the solver
        if _cube_former(a) or _cube_former(b):
            try:
                return self.cube_equal(ctx, self.read_cube(ctx, a),
                                       self.read_cube(ctx, b))
            except KernelError:
                return False
        match a, b:
            case Universe(l1), Universe(l2):
                return l1 == l2
            case Pi(x, d1, c1), Pi(y, d2, c2):
                if not self.def_equal(ctx, None, d1, d2):
                    return False
                x2, [c1b] = self.open_binder(ctx, x, [c1])
                c2b = subst(c2, y, Var(x2))
                return self.def_equal(ctx.bind_var(x2, d1), None, c1b, c2b)
            case Sigma(x, d1, c1), Sigma(y, d2, c2):
                if not self.def_equal(ctx, None, d1, d2):
                    return False
                x2, [c1b] = self.open_binder(ctx, x, [c1])
                c2b = subst(c2, y, Var(x2))
                return self.def_equal(ctx.bind_var(x2, d1), None, c1b, c2b)
            case Lam(x, b1), Lam(y, b2):
                x2, [b1b] = self.open_binder(ctx, x, [b1])
                b2b = subst(b2, y, Var(x2))
                return self.def_equal(ctx.bind_var(x2, None), None, b1b, b2b)
            case (Lam(x, b1), _) if _neutralish(b):
                x2, [b1b] = self.open_binder(ctx, x, [b1])
                return self.def_equal(ctx.bind_var(x2, None), None, b1b, App(b, Var(x2)))
            case (_, Lam(y, b2)) if _neutralish(a):
                y2, [b2b] = self.open_binder(ctx, y, [b2])
                return self.def_equal(ctx.bind_var(y2, None), None, App(a, Var(y2)), b2b)
            case Pair(f1, s1), Pair(f2, s2):
                return (self.def_equal(ctx, None, f1, f2)
                        and self.def_equal(ctx, None, s1, s2))
            case (Pair(f1, s1), _) if _neutralish(b):
                return (self.def_equal(ctx, None, f1, Fst(b))
                        and self.def_equal(ctx, None, s1, Snd(b)))
            case (_, Pair(f2, s2)) if _neutralish(a):
                return (self.def_equal(ctx, None, Fst(a), f2)
                        and self.def_equal(ctx, None, Snd(a), s2))
            case IdType(m1, l1, r1), IdType(m2, l2, r2):
                return (self.def_equal(ctx, None, m1, m2)
                        and self.def_equal(ctx, m1, l1, l2)
                        and self.def_equal(ctx, m1, r1, r2))
            case Refl(a1), Refl(a2):
                return self.def_equal(ctx, None, a1, a2)
            case ShapeTy(x, s1, t1), ShapeTy(y, s2, t2):
                if topes._sort_key(s1) != topes._sort_key(s2):
                    return False
                x2, [t1b] = self.open_binder(ctx, x, [t1])
                t2b = subst(t2, y, Var(x2))
                ctx2 = ctx.bind_cube(x2, s1)
                return self._tope_iff(ctx2, t1b, t2b)
            case Extension(x, d1, p1, f1, a1), Extension(y, d2, p2, f2, a2):
                sh1 = self.resolve_shape(ctx, d1)
                sh2 = self.resolve_shape(ctx, d2)
                if topes._sort_key(sh1.sort) != topes._sort_key(sh2.sort):
                    return False
                x2, [p1b, f1b, a1b] = self.open_binder(ctx, x, [p1, f1, a1])
                p2b, f2b, a2b = (subst(p, y, Var(x2)) for p in (p2, f2, a2))
                st1 = subst(sh1.tope, sh1.binder, Var(x2))
                st2 = subst(sh2.tope, sh2.binder, Var(x2))
                ctx_cube = ctx.bind_cube(x2, sh1.sort)
                if not self._tope_iff(ctx_cube, st1, st2):
                    return False
                ctx_sh = ctx_cube.constrain(st1)
                if not self._tope_iff(ctx_sh, p1b, p2b):
                    return False
                if not self.def_equal(ctx_sh, None, f1b, f2b):
                    return False
                ctx_part = ctx_sh.constrain(self.read_tope(ctx_sh, p1b))
                return self.def_equal(ctx_part, f1b, a1b, a2b)
            case RecBot(), RecBot():
                return True
            case _:
                res = self._eq_neutral(ctx, a, b)
                return res is not False

    def _tope_iff(self, ctx: Ctx, t1: Tope, t2: Tope) -> bool:
        r1 = self.read_tope(ctx, t1)
        r2 = self.read_tope(ctx, t2)
        hyps = ctx.hyps()
        return (self.entails(ctx, TopeAnd(hyps, r1), r2)
                and self.entails(ctx, TopeAnd(hyps, r2), r1))

    def _eq_neutral(self, ctx: Ctx, a: Term, b: Term):
        """Spine comparison; returns False or (True-ish) the synthesized type
        of both sides (None when unknown)."""
        match a, b:
            case Var(n1), Var(n2):
                if n1 != n2:
                    return False
                try:
                    return self.neutral_type(ctx, a)
                except CannotSynth:
                    return None
            case App(f1, a1), App(f2, a2):
                head = self._eq_neutral(ctx, f1, f2)
                if head is False:
                    return False
                fty = self.whnf(ctx, head) if head is not None else None
                match fty:
                    case Pi(x, dom, cod):
                        if not self.def_equal(ctx, dom, a1, a2):
                            return False
                        return subst(cod, x, a1)
                    case Extension(x, _, _, fam, _):
                        try:
                            if not self.cube_equal(
                                ctx, self.read_cube(ctx, a1), self.read_cube(ctx, a2)
                            ):
                                return False
                        except KernelError:
                            # binders opened without a type (untyped eta)
                            # cannot be read as cube terms; fall back
                            if not self.def_equal(ctx, None, a1, a2):
                                return False
                        return subst(fam, x, a1)
                    case _:
                        if not self.def_equal(ctx, None, a1, a2):
                            return False
                        return None
            case Fst(p1), Fst(p2):
                head = self._eq_neutral(ctx, p1, p2)
                if head is False:
                    return False
                hty = self.whnf(ctx, head) if head is not None else None
                if isinstance(hty, Sigma):
                    return hty.fst_type
                return None
            case Snd(p1), Snd(p2):
                head = self._eq_neutral(ctx, p1, p2)
                if head is False:
                    return False
                hty = self.whnf(ctx, head) if head is not None else None
                if isinstance(hty, Sigma):
                    return subst(hty.snd_type, hty.binder, Fst(p1))
                return None
            case JElim(c1, d1, p1), JElim(c2, d2, p2):
                if not (self.def_equal(ctx, None, c1, c2)
                        and self.def_equal(ctx, None, d1, d2)
                        and self.def_equal(ctx, None, p1, p2)):
                    return False
                try:
                    return self.neutral_type(ctx, a)
                except CannotSynth:
                    return None
            case _:
                return False

    # -- boundary check (exposed for tests) -------------------------------------------

    def check_boundary(
        self, ctx: Ctx, domain: Term, phi: Tope, body: Term, partial: Term
    ) -> bool:
        """body and partial are sections over the shape; compare them under
        the subtope constraint."""
        sh = self.resolve_shape(ctx, domain)
        x = fresh_name(sh.binder)
        ctx2 = (
            ctx.bind_cube(x, sh.sort)
            .constrain(subst(sh.tope, sh.binder, Var(x)))
            .constrain(subst(phi, sh.binder, Var(x)))
        )
        return self.def_equal(ctx2, None, App(body, Var(x)), App(partial, Var(x)))

    # -- checking and inference ---------------------------------------------------------

    def infer_universe(self, ctx: Ctx, t: Term) -> int:
        ty = self.whnf(ctx, self.infer(ctx, t))
        if isinstance(ty, Universe):
            return ty.level
        raise self.fail("CHECK", f"expected a type, found a term of type {print_term(ty)}")

    def infer(self, ctx: Ctx, t: Term) -> Term:
        pushed = self._push_span(t)
        try:
            return self._infer(ctx, t)
        finally:
            if pushed:
                self._span_stack.pop()

    def _infer(self, ctx: Ctx, t: Term) -> Term:
        match t:
            case Var(n):
                e = ctx.lookup(n)
                if e is not None:
                    if e[0] == "cube":
                        return ShapeTy(fresh_name("t"), e[2], TOP)
                    if e[2] is None:
                        raise self.fail("INFER", f"cannot infer the type of {n}")
                    return e[2]
                entry = self.env.get(n)
                if entry is not None:
                    return entry.type
                raise self.fail("CHECK", f"unknown identifier {n!r}")
            case Universe(l):
                return Universe(l + 1)
            case Pi(x, dom, cod):
                dw = self.whnf(ctx, dom)
                if isinstance(dw, ShapeTy):
                    x2, [cod2] = self.open_binder(ctx, x, [cod])
                    ctx2 = ctx.bind_cube(x2, dw.sort).constrain(
                        subst(dw.tope, dw.binder, Var(x2)))
                    return Universe(self.infer_universe(ctx2, cod2))
                lu = self.infer_universe(ctx, dom)
                x2, [cod2] = self.open_binder(ctx, x, [cod])
                lv = self.infer_universe(ctx.bind_var(x2, dom), cod2)
                return Universe(max(lu, lv))
            case Sigma(x, dom, cod):
                dw = self.whnf(ctx, dom)
                if isinstance(dw, ShapeTy):
                    raise self.fail("INFER", "Sigma over a shape is not supported")
                lu = self.infer_universe(ctx, dom)
                x2, [cod2] = self.open_binder(ctx, x, [cod])
                lv = self.infer_universe(ctx.bind_var(x2, dom), cod2)
                return Universe(max(lu, lv))
            case Lam(_, _):
                raise self.fail("INFER", "cannot infer the type of an unannotated lambda")
            case App(f, a):
                fty = self.whnf(ctx, self.infer(ctx, f))
                match fty:
                    case Pi(x, dom, cod):
                        self.check(ctx, a, dom)
                        return subst(cod, x, a)
                    case Extension(x, dom, _, fam, _):
                        sh = self.resolve_shape(ctx, dom)
                        ca = self.read_cube(ctx, a)
                        got = self.cube_sort_of(ctx, ca)
                        if topes._sort_key(got) != topes._sort_key(sh.sort):
                            raise self.fail(
                                "SORT",
                                f"cube argument has sort {got}, expected {sh.sort}")
                        tope = self.read_tope(ctx, subst(sh.tope, sh.binder, ca))
                        if not self.entails(ctx, ctx.hyps(), tope):
                            raise self.fail(
                                "CHECK",
                                f"cube argument {print_term(ca)} is not inside the "
                                f"shape {{{sh.binder} : {topes._sort_key(sh.sort)} | "
                                f"{print_tope(sh.tope)}}}")
                        return subst(fam, x, a)
                raise self.fail(
                    "INFER", f"cannot apply a term of type {print_term(fty)}")
            case Pair(_, _):
                raise self.fail("INFER", "cannot infer the type of a bare pair")
            case Fst(p):
                pty = self.whnf(ctx, self.infer(ctx, p))
                if isinstance(pty, Sigma):
                    return pty.fst_type
                raise self.fail("INFER", f"fst of a non-pair type {print_term(pty)}")
            case Snd(p):
                pty = self.whnf(ctx, self.infer(ctx, p))
                if isinstance(pty, Sigma):
                    return subst(pty.snd_type, pty.binder, Fst(p))
                raise self.fail("INFER", f"snd of a non-pair type {print_term(pty)}")
            case IdType(amb, l, r):
                lu = self.infer_universe(ctx, amb)
                self.check(ctx, l, amb)
                self.check(ctx, r, amb)
                return Universe(lu)
            case Refl(x):
                ty = self.infer(ctx, x)
                return IdType(ty, x, x)
            case JElim(c, d, p):
                pty = self.whnf(ctx, self.infer(ctx, p))
                if not isinstance(pty, IdType):
                    raise self.fail(
                        "INFER", f"idJ expects a path, found {print_term(pty)}")
                amb, lhs = pty.ambient, pty.lhs
                y = fresh_name("y")
                q = fresh_name("q")
                motive_ty = Pi(y, amb, Pi(q, IdType(amb, lhs, Var(y)), Universe(0)))
                self.check(ctx, c, motive_ty)
                self.check(ctx, d, App(App(c, lhs), Refl(lhs)))
                return App(App(c, pty.rhs), p)
            case ShapeTy(x, sort, tope):
                x2, [tope2] = self.open_binder(ctx, x, [tope])
                ctx2 = ctx.bind_cube(x2, sort)
                self.check_sorted(ctx2, self.read_tope(ctx2, tope2))
                return Universe(0)
            case Extension(x, dom, phi, fam, part):
                sh = self.resolve_shape(ctx, dom)
                x2, [phi2, fam2, part2] = self.open_binder(ctx, x, [phi, fam, part])
                stope = subst(sh.tope, sh.binder, Var(x2))
                ctx_sh = ctx.bind_cube(x2, sh.sort).constrain(stope)
                rphi = self.read_tope(ctx_sh, phi2)
                self.check_sorted(ctx_sh, rphi)
                ctx_phi_only = ctx.bind_cube(x2, sh.sort).constrain(rphi)
                if not self.entails(
                    ctx_phi_only, ctx_phi_only.hyps(), self.read_tope(ctx_sh, stope)
                ):
                    raise self.fail(
                        "CHECK",
                        f"subtope {print_tope(rphi)} is not included in the shape "
                        f"tope {print_tope(stope)}")
                lu = self.infer_universe(ctx_sh, fam2)
                ctx_part = ctx_sh.constrain(rphi)
                self.check(ctx_part, part2, fam2)
                return Universe(lu)
            case RecOr(_, _, _, _):
                raise self.fail("INFER", "recOR is checked against a type")
            case RecBot():
                raise self.fail("INFER", "recBOT is checked against a type")
            case Cube0() | Cube1():
                return ShapeTy(fresh_name("t"), Interval(), TOP)
            case CubeStar():
                return ShapeTy(fresh_name("t"), topes.UnitCube(), TOP)
            case Meet(_, _) | Join(_, _):
                ca = self.read_cube(ctx, t)
                got = self.cube_sort_of(ctx, ca)
                if topes._sort_key(got) != "I":
                    raise self.fail("SORT", "connections apply to interval terms only")
                return ShapeTy(fresh_name("t"), Interval(), TOP)
        raise self.fail("INFER", f"no inference rule for {type(t).__name__}")

    def check(self, ctx: Ctx, t: Term, ty: Term) -> None:
        pushed = self._push_span(t)
        try:
            self._check(ctx, t, ty)
        finally:
            if pushed:
                self._span_stack.pop()

    def _check(self, ctx: Ctx, t: Term, ty: Term) -> None:
        tyw = self.whnf(ctx, ty)
        match t, tyw:
            case Lam(x, body), Pi(y, dom, cod):
                x2, [body2] = self.open_binder(ctx, x, [body])
                ctx2 = ctx.bind_var(x2, dom)
                self.check(ctx2, body2, subst(cod, y, Var(x2)))
                return
            case Lam(x, body), Extension(y, dom, phi, fam, part):
                sh = self.resolve_shape(ctx, dom)
                x2, [body2] = self.open_binder(ctx, x, [body])
                stope = subst(sh.tope, sh.binder, Var(x2))
                ctx2 = ctx.bind_cube(x2, sh.sort).constrain(stope)
                fam2 = subst(fam, y, Var(x2))
                self.check(ctx2, body2, fam2)
                phi2 = self.read_tope(ctx2, subst(phi, y, Var(x2)))
                ctx3 = ctx2.constrain(phi2)
                part2 = subst(part, y, Var(x2))
                if not self.def_equal(ctx3, fam2, body2, part2):
                    raise self.fail(
                        "CHECK",
                        "boundary mismatch: the body does not restrict to the "
                        f"partial section on {print_tope(phi2)}")
                return
            case Pair(a, b), Sigma(y, dom, cod):
                self.check(ctx, a, dom)
                self.check(ctx, b, subst(cod, y, a))
                return
            case Refl(x), IdType(amb, lhs, rhs):
                self.check(ctx, x, amb)
                if not (self.def_equal(ctx, amb, x, lhs)
                        and self.def_equal(ctx, amb, x, rhs)):
                    raise self.fail(
                        "CHECK",
                        f"refl {print_term(x)} does not prove "
                        f"{print_term(lhs)} = {print_term(rhs)}")
                return
            case RecOr(lt, rt, l, r), _:
                rlt = self.read_tope(ctx, lt)
                rrt = self.read_tope(ctx, rt)
                self.check_sorted(ctx, rlt)
                self.check_sorted(ctx, rrt)
                if not self.entails(ctx, ctx.hyps(), TopeOr(rlt, rrt)):
                    raise self.fail(
                        "CHECK",
                        f"recOR requires {print_tope(TopeOr(rlt, rrt))} to hold here")
                self.check(ctx.constrain(rlt), l, tyw)
                self.check(ctx.constrain(rrt), r, tyw)
                if not self.def_equal(ctx.constrain(TopeAnd(rlt, rrt)), tyw, l, r):
                    raise self.fail(
                        "CHECK", "recOR branches disagree on the overlap")
                return
            case RecBot(), _:
                if not self.inconsistent(ctx):
                    raise self.fail(
                        "CHECK", "recBOT requires an inconsistent tope context")
                return
            case Lam(_, _), _:
                raise self.fail(
                    "CHECK", f"lambda checked against {print_term(tyw)}")
            case Pair(_, _), _:
                raise self.fail(
                    "CHECK", f"pair checked against {print_term(tyw)}")
            case _, ShapeTy(y, sort, tope):
                ca = self.read_cube(ctx, t)
                got = self.cube_sort_of(ctx, ca)
                if topes._sort_key(got) != topes._sort_key(sort):
                    raise self.fail(
                        "SORT", f"cube term has sort {got}, expected {sort}")
                rtope = self.read_tope(ctx, subst(tope, y, ca))
                if not self.entails(ctx, ctx.hyps(), rtope):
                    raise self.fail(
                        "CHECK",
                        f"cube term {print_term(ca)} does not satisfy "
                        f"{print_tope(rtope)}")
                return
            case _, _:
                inferred = self.infer(ctx, t)
                if not self.def_equal(ctx, None, inferred, tyw):
                    raise self.fail(
                        "CHECK",
                        f"expected {print_term(tyw)}, inferred {print_term(inferred)}")
                return

    # -- declarations ----------------------------------------------------------------

    def check_declaration(self, decl: Declaration, check_bodies: bool = True) -> EnvEntry:
        if decl.name in self.env:
            raise KernelError(
                "IMPORT",
                f"{decl.name!r} is already declared in module "
                f"{self.env[decl.name].module!r}",
                decl.name_span)
        ctx = Ctx()
        binfos: list[tuple] = []  # ("cube", x, sort, tope) | ("var", x, ty)
        for b in decl.telescope:
            match b:
                case TypedBinder(x, bty):
                    if x in ctx.names() or x in self.env:
                        raise KernelError(
                            "CHECK", f"telescope rebinds {x!r}", decl.span)
                    dw = self.whnf(ctx, bty)
                    if isinstance(dw, ShapeTy):
                        stope = subst(dw.tope, dw.binder, Var(x))
                        ctx = ctx.bind_cube(x, dw.sort).constrain(stope)
                        binfos.append(["cube", x, dw.sort, stope])
                    else:
                        if check_bodies:
                            self.infer_universe(ctx, bty)
                        ctx = ctx.bind_var(x, bty)
                        binfos.append(["var", x, bty])
                case TopeBinder(tope):
                    rtope = self.read_tope(ctx, tope)
                    self.check_sorted(ctx, rtope)
                    target = next(
                        (bi for bi in reversed(binfos) if bi[0] == "cube"), None)
                    if target is None:
                        raise KernelError(
                            "CHECK",
                            "tope binder without a preceding cube binder",
                            decl.span)
                    target[3] = TopeAnd(target[3], rtope)
                    ctx = ctx.constrain(rtope)
        if check_bodies:
            self.infer_universe(ctx, decl.stated_type)
        if decl.body is not None:
            if decl.name in free_vars(decl.body):
                raise KernelError(
                    "CHECK",
                    f"{decl.name!r} mentions itself; recursive definitions "
                    "are rejected",
                    decl.name_span)
            if check_bodies:
                self.check(ctx, decl.body, decl.stated_type)
        closed_ty = decl.stated_type
        closed_val = decl.body
        for bi in reversed(binfos):
            if bi[0] == "cube":
                _, x, sort, stope = bi
                closed_ty = Pi(x, ShapeTy(x, sort, stope), closed_ty)
            else:
                _, x, bty = bi
                closed_ty = Pi(x, bty, closed_ty)
            if closed_val is not None:
                closed_val = Lam(bi[1], closed_val)
        return EnvEntry(
            name=decl.name,
            type=closed_ty,
            value=closed_val,
            kind=decl.kind,
            module=self.module.name if self.module else "<none>",
        )


def check_module(
    module: SourceModule,
    env: dict[str, EnvEntry],
    solver: Optional[topes.Solver] = None,
    parse_diagnostics: Optional[list[Diagnostic]] = None,
    allowed_postulates: Optional[frozenset[str]] = None,
    strategy: str = "leftmost",
) -> tuple[CheckReport, dict[str, EnvEntry]]:
    """Fold declaration checking over a module.

    ``env`` is the merged environment of checked imports; the returned dict
    extends it with this module's declarations.  Deterministic given the
    module and environment.
    """
    solver = solver if solver is not None else topes.Solver()
    start = time.perf_counter()
    checker = Checker(dict(env), solver=solver, module=module)
    report = CheckReport(module=module.name, status="ok")
    if parse_diagnostics:
        report.diagnostics.extend(parse_diagnostics)
    tier = (module.directives.get("tier") or [None])[0]
    for decl in module.declarations:
        if (
            tier == "T1"
            and decl.kind == "postulate"
            and decl.name not in (allowed_postulates or frozenset())
        ):
            report.diagnostics.append(Diagnostic(
                "error", "TIER",
                f"postulate {decl.name!r} is not in the axiom manifest but "
                f"appears in a T1 unit",
                module.path, decl.name_span))
            continue
        try:
            entry = checker.check_declaration(decl)
        except KernelError as e:
            span = e.span if e.span is not None else decl.span
            report.diagnostics.append(Diagnostic(
                "error", e.code, f"in {decl.name!r}: {e.message}",
                module.path, span))
            continue
        checker.env[decl.name] = entry
        report.declarations_checked += 1
    if any(d.severity == "error" for d in report.diagnostics):
        report.status = "failed"
    report.solver_queries = checker.queries
    report.wall_time = time.perf_counter() - start
    return report, checker.env


def build_env(
    module: SourceModule,
    env: dict[str, EnvEntry],
    solver: Optional[topes.Solver] = None,
) -> dict[str, EnvEntry]:
    """Extend ``env`` with this module's declarations without re-checking
    bodies.  Used to replay a cache hit: the content hash guarantees the
    module checked before."""
    checker = Checker(dict(env), solver=solver or topes.Solver(), module=module)
    for decl in module.declarations:
        try:
            entry = checker.check_declaration(decl, check_bodies=False)
        except KernelError:
            continue
        checker.env[decl.name] = entry
    return checker.env


def _cube_former(t: Term) -> bool:
    return isinstance(t, (Cube0, Cube1, CubeStar, Meet, Join))


def _neutralish(t: Term) -> bool:
    return isinstance(t, (Var, App, Fst, Snd, JElim))
