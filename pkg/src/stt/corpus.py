"""The shipped formalization corpus and its verification harness.

Units are `.stt` files under `corpus/`, one per topic, tiered:

  * T1: fully proved, using no postulates beyond the axiom manifest,
  * T2: statements elaborated as types (`def ... : U`), not proved,
  * P:  the axiom manifest itself (`AXIOMS.stt`).

Each file carries structured header comments parsed here: `--@tier`,
`--@thm <label>` (one per named statement the unit covers).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import Diagnostic
from .kernel import CheckReport, check_module
from .parser import parse_module
from .topes import Solver

# the global axiom manifest: the only postulates T1 proofs may depend on.
# `relfunext` packages relative function extensionality at the inclusions
# the corpus uses; the walking bi-invertible arrow is postulated with its
# universal property, its endpoint inclusions pinned by two evaluation
# identities.
ALLOWED_POSTULATES = frozenset({
    "relfunext",
    "walking_biinv",
    "walking_biinv_ump",
    "walking_biinv_i0",
    "walking_biinv_i1",
    "walking_biinv_ev0",
    "walking_biinv_ev1",
})

AXIOM_FILE = "AXIOMS"


@dataclass(eq=False)
class CorpusUnit:
    file: str
    name: str
    tier: str  # "T1" | "T2" | "P"
    anchors: list[str] = field(default_factory=list)
    depends_on: list[str] = field(default_factory=list)


_UNIT_ORDER = [
    "prelude", "shapes", "hom", "segal_rezk", "AXIOMS", "ext_laws",
    "orthogonality", "lari_appendix", "lari", "inner", "mates_appendix",
    "cocart", "covariant", "yoneda",
]


def corpus_root(base: Optional[str] = None) -> str:
    """Locate the corpus directory: explicit base, $STT_CORPUS, or the
    repository copy next to the installed package."""
    if base is not None:
        return base
    env = os.environ.get("STT_CORPUS")
    if env:
        return env
    here = os.path.dirname(os.path.abspath(__file__))
    for candidate in (
        os.path.join(os.getcwd(), "corpus"),
        os.path.normpath(os.path.join(here, "..", "..", "corpus")),
    ):
        if os.path.isdir(candidate):
            return candidate
    raise FileNotFoundError("corpus directory not found")


def corpus_manifest(base: Optional[str] = None) -> list[CorpusUnit]:
    """The fixed unit list, in dependency order, read from the shipped files."""
    root = corpus_root(base)
    units = []
    for name in _UNIT_ORDER:
        path = os.path.join(root, name + ".stt")
        with open(path, "r", encoding="utf-8") as fh:
            source = fh.read()
        mod, _ = parse_module(source, path, name=name)
        tier = (mod.directives.get("tier") or ["T2"])[0]
        units.append(CorpusUnit(
            file=path,
            name=name,
            tier=tier,
            anchors=mod.directives.get("thm", []),
            depends_on=[imp for imp, _ in mod.imports],
        ))
    return units


def verify_corpus(
    units: list[CorpusUnit],
    solver: Optional[Solver] = None,
) -> CheckReport:
    """Check every unit in dependency order, enforcing the tier rules, and
    aggregate one report."""
    solver = solver if solver is not None else Solver()
    total = CheckReport(module="corpus", status="ok")
    order = _toposort(units)
    envs: dict[str, dict] = {}
    checked: set[str] = set()
    for unit in order:
        with open(unit.file, "r", encoding="utf-8") as fh:
            source = fh.read()
        mod, diags = parse_module(source, unit.file, name=unit.name)
        missing = [d for d in unit.depends_on if d not in checked]
        if missing:
            total.diagnostics.append(Diagnostic(
                "error", "IMPORT",
                f"unit {unit.name!r} depends on unchecked or failed "
                f"unit(s): {', '.join(missing)}",
                unit.file, (0, 0)))
            continue
        env: dict = {}
        for dep in unit.depends_on:
            env.update(envs[dep])
        if unit.tier == "T1":
            for decl in mod.declarations:
                if decl.kind == "postulate" and decl.name not in ALLOWED_POSTULATES:
                    total.diagnostics.append(Diagnostic(
                        "error", "TIER",
                        f"T1 unit {unit.name!r} postulates {decl.name!r} "
                        "outside the axiom manifest",
                        unit.file, decl.name_span))
        if unit.name == AXIOM_FILE:
            declared = {d.name for d in mod.declarations if d.kind == "postulate"}
            extra = declared - ALLOWED_POSTULATES
            if extra:
                total.diagnostics.append(Diagnostic(
                    "error", "TIER",
                    f"axiom manifest declares unexpected postulates: "
                    f"{', '.join(sorted(extra))}",
                    unit.file, (0, 0)))
        report, env_out = check_module(
            mod, env, solver, parse_diagnostics=diags,
            allowed_postulates=ALLOWED_POSTULATES)
        total.diagnostics.extend(report.diagnostics)
        total.declarations_checked += report.declarations_checked
        total.solver_queries += report.solver_queries
        total.wall_time += report.wall_time
        if report.status == "ok" and not any(
            d.severity == "error" and d.file == unit.file
            for d in total.diagnostics
        ):
            envs[unit.name] = env_out
            checked.add(unit.name)
    if any(d.severity == "error" for d in total.diagnostics):
        total.status = "failed"
    return total


def _toposort(units: list[CorpusUnit]) -> list[CorpusUnit]:
    by_name = {u.name: u for u in units}
    order: list[CorpusUnit] = []
    state: dict[str, int] = {}

    def visit(u: CorpusUnit) -> None:
        if state.get(u.name) == 2:
            return
        if state.get(u.name) == 1:
            raise ValueError(f"corpus dependency cycle through {u.name!r}")
        state[u.name] = 1
        for dep in u.depends_on:
            if dep in by_name:
                visit(by_name[dep])
        state[u.name] = 2
        order.append(u)

    for u in units:
        visit(u)
    return order
