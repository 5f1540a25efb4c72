"""Command-line driver: resolve imports, check modules, report diagnostics.

Exit codes: 0 all modules check, 1 check errors, 2 usage/IO/resolution
errors.  With ``--json`` one JSON object per module is emitted, ordered by
module name; human output is likewise flushed in module-name order so runs
are byte-stable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Optional

from . import corpus as corpus_mod
from .cache import Cache, module_key
from .diagnostics import Diagnostic, render
from .kernel import CheckReport, build_env, check_module
from .parser import parse_module
from .syntax import SourceModule
from .topes import Solver


@dataclass
class RunConfig:
    targets: list[str]
    search_paths: list[str] = field(default_factory=list)
    json_output: bool = False
    trace_tope: bool = False
    jobs: int = 1
    capacity: int = 8
    no_cache: bool = False
    cache_dir: str = ".stt-cache"

    def __post_init__(self) -> None:
        if self.jobs < 1 or self.capacity < 1:
            raise ValueError("jobs and capacity must be positive")


@dataclass(eq=False)
class ResolvedModule:
    name: str
    path: str
    module: SourceModule
    parse_diagnostics: list[Diagnostic]
    imports: list[str]
    source: str


class ResolveError(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def _find_module(name: str, search_paths: list[str]) -> Optional[str]:
    for d in search_paths:
        candidate = os.path.join(d, name + ".stt")
        if os.path.isfile(candidate):
            return candidate
    return None


def resolve(targets: list[str], search_paths: list[str]) -> dict[str, ResolvedModule]:
    """Load targets and their transitive imports into an acyclic module graph."""
    modules: dict[str, ResolvedModule] = {}
    queue: list[tuple[str, str]] = []
    for t in targets:
        if not os.path.isfile(t):
            raise ResolveError(f"no such file: {t}")
        queue.append((os.path.abspath(t), ""))
    while queue:
        path, wanted = queue.pop()
        name = os.path.splitext(os.path.basename(path))[0]
        if wanted and name != wanted:
            raise ResolveError(f"module {wanted!r} resolved to a file named {name!r}")
        if name in modules:
            if os.path.abspath(modules[name].path) != os.path.abspath(path):
                raise ResolveError(
                    f"module {name!r} found at both {modules[name].path} and {path}")
            continue
        try:
            with open(path, "r", encoding="utf-8") as fh:
                source = fh.read()
        except OSError as e:
            raise ResolveError(f"cannot read {path}: {e}") from e
        mod, diags = parse_module(source, path, name=name)
        resolved = ResolvedModule(
            name=name, path=path, module=mod, parse_diagnostics=diags,
            imports=[imp for imp, _ in mod.imports], source=source)
        modules[name] = resolved
        local_paths = [os.path.dirname(path)] + search_paths
        for imp, span in mod.imports:
            found = _find_module(imp, local_paths)
            if found is None:
                raise ResolveError(
                    f"{path}: cannot resolve import {imp!r} on the search path")
            queue.append((os.path.abspath(found), imp))
    _check_acyclic(modules)
    return modules


def _check_acyclic(modules: dict[str, ResolvedModule]) -> None:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(name: str) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = " -> ".join(stack[stack.index(name):] + [name])
            raise ResolveError(f"import cycle: {cycle}")
        state[name] = 1
        stack.append(name)
        for imp in modules[name].imports:
            if imp in modules:
                visit(imp)
        stack.pop()
        state[name] = 2

    for name in sorted(modules):
        visit(name)


def _topo_order(modules: dict[str, ResolvedModule]) -> list[str]:
    order: list[str] = []
    seen: set[str] = set()

    def visit(name: str) -> None:
        if name in seen:
            return
        seen.add(name)
        for imp in sorted(modules[name].imports):
            if imp in modules:
                visit(imp)
        order.append(name)

    for name in sorted(modules):
        visit(name)
    return order


def run(config: RunConfig) -> int:
    """Check the target modules; return the process exit code."""
    out = sys.stdout
    try:
        modules = resolve(config.targets, config.search_paths)
    except ResolveError as e:
        print(f"error[IMPORT]: {e.message}", file=sys.stderr)
        return 2

    solver = Solver(capacity=config.capacity)
    trace_lines: list[str] = []
    if config.trace_tope:
        solver.trace = trace_lines.append

    cache = None if config.no_cache else Cache(config.cache_dir)
    keys: dict[str, str] = {}
    for name in _topo_order(modules):
        keys[name] = module_key(
            modules[name].source.encode(),
            [keys[i] for i in modules[name].imports if i in keys],
            config.capacity)

    reports: dict[str, CheckReport] = {}
    envs: dict[str, dict] = {}
    warnings: list[str] = []

    def check_one(name: str) -> tuple[str, CheckReport, dict]:
        resolved = modules[name]
        failed_imports = sorted(
            imp for imp in resolved.imports
            if imp in reports and reports[imp].status != "ok")
        if failed_imports:
            gated = CheckReport(module=name, status="failed")
            gated.diagnostics.append(Diagnostic(
                "error", "IMPORT",
                f"imports failed to check: {', '.join(failed_imports)}",
                resolved.path, (0, 0)))
            return name, gated, {}
        env: dict = {}
        for imp in resolved.imports:
            env.update(envs.get(imp, {}))
        if cache is not None:
            cached = cache.load(keys[name], resolved.path)
            if getattr(cache, "corrupt", False):
                warnings.append(
                    f"warning: corrupt cache entry for {name}; rechecking")
                cache.corrupt = False
            if cached is not None:
                env_out = (
                    build_env(resolved.module, env, solver)
                    if cached.status == "ok" else {}
                )
                return name, cached, env_out
        report, env_out = check_module(
            resolved.module, env, solver,
            parse_diagnostics=resolved.parse_diagnostics,
            allowed_postulates=corpus_mod.ALLOWED_POSTULATES)
        if cache is not None:
            cache.store(keys[name], report)
        return name, report, env_out

    pending = set(modules)
    deps = {n: {i for i in modules[n].imports if i in modules} for n in modules}

    if config.jobs == 1:
        for name in _topo_order(modules):
            _, report, env_out = check_one(name)
            reports[name] = report
            envs[name] = env_out
    else:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            running = {}
            while pending or running:
                ready = [n for n in sorted(pending) if deps[n] <= set(reports)]
                for n in ready:
                    pending.discard(n)
                    running[pool.submit(check_one, n)] = n
                if not running:
                    break
                done, _ = wait(running, return_when=FIRST_COMPLETED)
                for fut in done:
                    running.pop(fut)
                    name, report, env_out = fut.result()
                    reports[name] = report
                    envs[name] = env_out

    for w in warnings:
        print(w, file=sys.stderr)
    failed = False
    for name in sorted(reports):
        report = reports[name]
        if report.status != "ok":
            failed = True
        if config.json_output:
            print(json.dumps(report.to_json(), sort_keys=True), file=out)
        else:
            for d in report.diagnostics:
                src = modules[name].source if name in modules else None
                print(render(d, src), file=out)
            print(
                f"{name}: {report.status} "
                f"({report.declarations_checked} declarations, "
                f"{report.solver_queries} solver queries)",
                file=out)
    for line in trace_lines:
        print(line, file=out)
    return 1 if failed else 0


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "check":
        argv = argv[1:]
    ap = argparse.ArgumentParser(
        prog="stt", description="Check .stt proof modules.")
    ap.add_argument("targets", nargs="+", help="source files to check")
    ap.add_argument("--json", action="store_true", dest="json_output",
                    help="emit one JSON object per module")
    ap.add_argument("--trace-tope", action="store_true",
                    help="log every tope entailment query")
    ap.add_argument("--jobs", type=int, default=1, metavar="N")
    ap.add_argument("--capacity", type=int, default=8, metavar="N",
                    help="interval-variable bound for the tope solver")
    ap.add_argument("--no-cache", action="store_true")
    ap.add_argument("--cache-dir", default=".stt-cache")
    ap.add_argument("--path", action="append", default=[], metavar="DIR",
                    help="additional module search directory (repeatable)")
    try:
        args = ap.parse_args(argv)
    except SystemExit:
        return 2
    search = list(args.path)
    env_path = os.environ.get("STT_PATH")
    if env_path:
        search.extend(p for p in env_path.split(os.pathsep) if p)
    try:
        config = RunConfig(
            targets=args.targets,
            search_paths=search,
            json_output=args.json_output,
            trace_tope=args.trace_tope,
            jobs=args.jobs,
            capacity=args.capacity,
            no_cache=args.no_cache,
            cache_dir=args.cache_dir,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
