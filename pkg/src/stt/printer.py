"""Render terms and topes back to concrete syntax.

Output always reparses to an alpha-equivalent AST: internal fresh names
(which carry a '$') are renamed to printable identifiers, and parentheses
are inserted exactly where the grammar demands them.
"""

from __future__ import annotations

from .syntax import (
    App, Cube0, Cube1, CubeSort, CubeStar, Extension, Fst, IdType, Interval,
    JElim, Join, Lam, Meet, Pair, Pi, ProdCube, RecBot, RecOr, Refl, ShapeTy,
    Sigma, Snd, Term, Tope, TopeAnd, TopeBot, TopeEq, TopeLeq, TopeOr,
    TopeTop, Universe, UnitCube, Var, base_name, free_vars,
)

# precedence levels: 0 arrow/lambda/sigma-binder, 1 product, 2 join, 3 meet,
# 4 application, 5 atom
_ARROW, _PROD, _JOIN, _MEET, _APP, _ATOM = range(6)


def print_term(t: Term) -> str:
    """Pretty-print a term with minimal parentheses."""
    return _Printer().term(t, _ARROW)


def print_tope(t: Tope) -> str:
    return _Printer().tope(t, 0)


def print_sort(s: CubeSort) -> str:
    match s:
        case Interval():
            return "I"
        case UnitCube():
            return "1"
        case ProdCube(l, r):
            left = print_sort(l)
            if isinstance(l, ProdCube):
                left = f"({left})"
            return f"{left} * {print_sort(r)}"
    raise AssertionError(s)


def print_cube_context(ctx) -> str:
    return ", ".join(f"{n} : {print_sort(s)}" for n, s in ctx)


class _Printer:
    def __init__(self) -> None:
        self.rename: dict[str, str] = {}
        self.used: set[str] = set()

    def bind(self, name: str, body_fvs: set[str]) -> tuple[str, dict[str, str]]:
        printable = base_name(name)
        while printable in self.used or (printable != name and printable in body_fvs):
            printable += "'"
        saved = dict(self.rename)
        self.rename[name] = printable
        self.used.add(printable)
        return printable, saved

    def var(self, name: str) -> str:
        return self.rename.get(name, base_name(name) if "$" in name else name)

    def term(self, t: Term, prec: int) -> str:
        match t:
            case Var(n):
                return self.var(n)
            case Universe(level):
                return "U" if level == 0 else f"U{level}"
            case Pi(x, dom, cod):
                if x not in free_vars(cod):
                    s = f"{self.term(dom, _PROD)} -> {self.term(cod, _ARROW)}"
                else:
                    d = self.term(dom, _ARROW)  # domain scopes outside x
                    px, saved = self.bind(x, free_vars(cod))
                    s = f"({px} : {d}) -> {self.term(cod, _ARROW)}"
                    self.rename = saved
                return _wrap(s, prec > _ARROW)
            case Sigma(x, dom, cod):
                if x not in free_vars(cod):
                    s = f"{self.term(dom, _JOIN)} * {self.term(cod, _PROD)}"
                    return _wrap(s, prec > _PROD)
                d = self.term(dom, _ARROW)  # domain scopes outside x
                px, saved = self.bind(x, free_vars(cod))
                s = f"Sigma ({px} : {d}) . {self.term(cod, _ARROW)}"
                self.rename = saved
                return _wrap(s, prec > _ARROW)
            case Lam(x, body):
                px, saved = self.bind(x, free_vars(body))
                s = f"\\{px} . {self.term(body, _ARROW)}"
                self.rename = saved
                return _wrap(s, prec > _ARROW)
            case App(f, a):
                s = f"{self.term(f, _APP)} {self.term(a, _ATOM)}"
                return _wrap(s, prec > _APP)
            case Pair(a, b):
                return f"({self.term(a, _ARROW)} , {self.term(b, _ARROW)})"
            case Fst(p):
                return f"fst {self.term(p, _ATOM)}"
            case Snd(p):
                return f"snd {self.term(p, _ATOM)}"
            case IdType(amb, l, r):
                return (f"Id {self.term(amb, _ATOM)} {self.term(l, _ATOM)} "
                        f"{self.term(r, _ATOM)}")
            case Refl(a):
                return f"refl {self.term(a, _ATOM)}"
            case JElim(c, d, p):
                return (f"idJ {self.term(c, _ATOM)} {self.term(d, _ATOM)} "
                        f"{self.term(p, _ATOM)}")
            case ShapeTy(x, sort, tope):
                px, saved = self.bind(x, free_vars(tope))
                s = f"{{{px} : {print_sort(sort)} | {self.tope(tope, 0)}}}"
                self.rename = saved
                return s
            case Extension(x, dom, phi, fam, part):
                d = self.term(dom, _ARROW)
                fvs = free_vars(phi) | free_vars(fam) | free_vars(part)
                px, saved = self.bind(x, fvs)
                s = (f"<Pi ({px} : {d}) -> {self.term(fam, _ARROW)} | "
                     f"{self.tope(phi, 0)} |-> {self.term(part, _ARROW)}>")
                self.rename = saved
                return s
            case RecOr(lt, rt, l, r):
                return (f"recOR ({self.tope(lt, 0)} |-> {self.term(l, _ARROW)} , "
                        f"{self.tope(rt, 0)} |-> {self.term(r, _ARROW)})")
            case RecBot():
                return "recBOT"
            case Cube0():
                return "0"
            case Cube1():
                return "1"
            case CubeStar():
                return "unitpt"
            case Meet(a, b):
                s = f"{self.term(a, _APP)} /\\ {self.term(b, _APP)}"
                return _wrap(s, prec > _MEET)
            case Join(a, b):
                s = f"{self.term(a, _MEET)} \\/ {self.term(b, _MEET)}"
                return _wrap(s, prec > _JOIN)
        raise AssertionError(f"unprintable term {type(t).__name__}")

    # tope precedence: 0 or, 1 and, 2 atom
    def tope(self, t: Tope, prec: int) -> str:
        match t:
            case TopeTop():
                return "TOP"
            case TopeBot():
                return "BOT"
            case TopeEq(l, r):
                return f"{self.term(l, _ATOM)} == {self.term(r, _ATOM)}"
            case TopeLeq(l, r):
                return f"{self.term(l, _ATOM)} <= {self.term(r, _ATOM)}"
            case TopeAnd(l, r):
                s = f"{self.tope(l, 2)} /\\ {self.tope(r, 2)}"
                return _wrap(s, prec > 1)
            case TopeOr(l, r):
                s = f"{self.tope(l, 1)} \\/ {self.tope(r, 1)}"
                return _wrap(s, prec > 0)
        raise AssertionError(f"unprintable tope {type(t).__name__}")


def _wrap(s: str, needed: bool) -> str:
    return f"({s})" if needed else s
