"""Command-line front ends: the ``tg`` debugger session and ``tg-synth``.

``tg`` reads mdb-flavoured commands, either ``::cmd ARGS`` or
``ADDR::cmd ARGS``, from a terminal, a script file or standard input.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from typing import Callable, TextIO

from . import analyzers
from .dumpio import DumpError, load_dump_file
from .typecat import CatalogError, load_catalog_file
from .typegraph import GraphError, TypeGraph, render_reach, render_stats, whattype

USAGE = """commands:
  ::typegraph                 build the graph and run all passes
  ADDR::whattype              describe the object containing ADDR
  ADDR::istype TYPE           pin the object at ADDR to TYPE and reprocess
  ::findlocks                 list held locks in identified objects
  ::findfalse [GRANULARITY]   list lock-bearing arrays prone to false sharing
  ::stats                     repeat the statistics of the last run
  ::reach [ADDR]              greatest-reach unknown node, or the reach of ADDR
  ::conflicts                 list objects with conflicting inferences
  ::eval [TRUTH]              score the graph against a synthesizer sidecar
  ::quit                      leave"""

_ANSI = {"error": "\033[31m", "prompt": "\033[1m"}


class CommandError(Exception):
    pass


def _hex(s: str) -> int:
    try:
        return int(s[2:] if s.lower().startswith("0x") else s, 16)
    except ValueError:
        raise CommandError(f"bad address {s!r}") from None


def load_cache_table(path) -> list[tuple[str, str]]:
    """Accepts ``{"cache": "type", ...}`` or ``[{"name": ..., "type": ...}, ...]``."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if isinstance(doc, dict):
        return list(doc.items())
    return [(e["name"], e["type"]) for e in doc]


class Session:
    """One loaded dump plus the graph built from it."""

    def __init__(self, image, catalog, table=(), *, out: TextIO | None = None, granularity: int = 64,
                 lock_model: analyzers.LockModel | None = None, timing: bool = True, color: bool = False,
                 truth_path: str | None = None) -> None:
        self.image = image
        self.catalog = catalog
        self.table = list(table)
        self.out = out or sys.stdout
        self.granularity = granularity
        self.lock_model = lock_model
        self.timing = timing
        self.color = color
        self.truth_path = truth_path
        self.graph: TypeGraph | None = None
        self.stats = []
        self._commands: dict[str, Callable] = {
            "typegraph": self.cmd_typegraph, "whattype": self.cmd_whattype, "istype": self.cmd_istype,
            "findlocks": self.cmd_findlocks, "findfalse": self.cmd_findfalse, "stats": self.cmd_stats,
            "reach": self.cmd_reach, "conflicts": self.cmd_conflicts, "eval": self.cmd_eval,
        }

    def emit(self, text: str) -> None:
        if text:
            self.out.write(text + "\n")

    def error(self, text: str) -> None:
        if self.color:
            text = f"{_ANSI['error']}{text}\033[0m"
        self.out.write(text + "\n")

    def _need_graph(self) -> TypeGraph:
        if self.graph is None:
            raise CommandError("run ::typegraph first")
        return self.graph

    # commands

    def cmd_typegraph(self, addr, args):
        self.graph = TypeGraph(self.image, self.catalog, self.table)
        self.stats = self.graph.run()
        self.emit(render_stats(self.stats, timing=self.timing))
        self.emit(render_reach(self.graph))

    def cmd_whattype(self, addr, args):
        g = self._need_graph()
        if addr is None:
            if not args:
                raise CommandError("usage: ADDR::whattype")
            addr, args = _hex(args[0]), args[1:]
        self.emit(whattype(g, addr).render())

    def cmd_istype(self, addr, args):
        g = self._need_graph()
        if addr is None:
            if len(args) < 2:
                raise CommandError("usage: ADDR::istype TYPE")
            addr, args = _hex(args[0]), args[1:]
        if not args:
            raise CommandError("usage: ADDR::istype TYPE")
        try:
            self.stats = g.istype(addr, " ".join(args))
        except (KeyError, GraphError) as e:
            raise CommandError(e.args[0] if e.args else str(e)) from None
        self.emit(render_stats(self.stats[-1], timing=self.timing))
        self.emit(render_reach(g))

    def cmd_findlocks(self, addr, args):
        g = self._need_graph()
        self.emit(analyzers.render_findlocks(analyzers.findlocks(g, self.image, self.lock_model)))

    def cmd_findfalse(self, addr, args):
        g = self._need_graph()
        gran = int(args[0], 0) if args else self.granularity
        try:
            recs = analyzers.findfalse(g, self.catalog, gran)
        except ValueError as e:
            raise CommandError(str(e)) from None
        self.emit(analyzers.render_findfalse(recs))

    def cmd_stats(self, addr, args):
        self._need_graph()
        self.emit(render_stats(self.stats, timing=self.timing))

    def cmd_reach(self, addr, args):
        g = self._need_graph()
        if addr is None and args:
            addr = _hex(args[0])
        if addr is None:
            self.emit(render_reach(g))
            return
        hit = g.node_at(addr)
        if hit is None:
            raise CommandError(f"{addr:x} is not in a known object")
        n = hit[0]
        self.emit(f"typegraph: node {n.base:x} has reach {g.reach(n.id)}")

    def cmd_conflicts(self, addr, args):
        g = self._need_graph()
        self.emit(analyzers.render_conflicts(analyzers.conflicts(g)))

    def cmd_eval(self, addr, args):
        from .synth import GroundTruth, evaluate

        g = self._need_graph()
        path = args[0] if args else self.truth_path
        if path is None:
            raise CommandError("usage: ::eval TRUTH")
        try:
            truth = GroundTruth.load(path)
        except OSError as e:
            raise CommandError(f"cannot read {path}: {e.strerror}") from None
        rep = evaluate(g, truth)
        self.emit(rep.render())
        return rep

    # dispatch

    def execute(self, line: str) -> bool:
        """Run one command line; returns False when the session should end."""
        line = line.strip()
        if not line or line.startswith("#"):
            return True
        head, _, rest = line.partition(" ")
        if "::" not in head:
            self.error(f"unknown command {head!r}")
            self.emit(USAGE)
            return True
        pre, _, name = head.partition("::")
        if name == "quit":
            return False
        fn = self._commands.get(name)
        if fn is None:
            self.error(f"unknown command ::{name}")
            self.emit(USAGE)
            return True
        try:
            addr = _hex(pre) if pre else None
            fn(addr, shlex.split(rest))
        except CommandError as e:
            self.error(str(e))
        return True

    def repl(self, stream: TextIO, *, prompt: bool = False) -> int:
        while True:
            if prompt:
                p = "> "
                self.out.write(f"{_ANSI['prompt']}{p}\033[0m" if self.color else p)
                self.out.flush()
            line = stream.readline()
            if not line:
                if prompt:
                    self.out.write("\n")
                return 0
            if not self.execute(line):
                return 0


def _use_color(out: TextIO) -> bool:
    mode = os.environ.get("TG_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(out, "isatty") and out.isatty()


def tg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tg", description="Postmortem type identification over a memory dump.")
    p.add_argument("dump", help="dump document")
    p.add_argument("--catalog", required=True, help="type catalog document")
    p.add_argument("--cache-table", help="cache name to type table")
    p.add_argument("--coherence", type=int, default=analyzers.DEFAULT_GRANULARITY,
                   help="coherence granularity in bytes for ::findfalse (default 64)")
    p.add_argument("--eval", metavar="TRUTH", help="run ::typegraph, score against TRUTH and exit")
    p.add_argument("--script", help="replay commands from a file and exit")
    p.add_argument("--lock-type", action="append", help="lock type name for ::findlocks (repeatable)")
    p.add_argument("--no-timing", action="store_true", help="omit elapsed-time lines from statistics")
    return p


def main(argv: list[str] | None = None, *, stdin: TextIO | None = None, stdout: TextIO | None = None) -> int:
    args = tg_parser().parse_args(argv)
    stdin = stdin or sys.stdin
    out = stdout or sys.stdout
    try:
        catalog = load_catalog_file(args.catalog)
        image = load_dump_file(args.dump, catalog)
        table = load_cache_table(args.cache_table) if args.cache_table else []
        model = None
        if args.lock_type:
            model = analyzers.LockModel(frozenset(args.lock_type))
            model.validate(catalog)
    except OSError as e:
        print(f"tg: cannot read {e.filename}: {e.strerror}", file=sys.stderr)
        return 1
    except (CatalogError, DumpError, KeyError, ValueError) as e:
        print(f"tg: {e}", file=sys.stderr)
        return 1
    session = Session(image, catalog, table, out=out, granularity=args.coherence, lock_model=model,
                      timing=not args.no_timing, color=_use_color(out), truth_path=args.eval)
    try:
        if args.eval:
            try:
                session.cmd_typegraph(None, [])
            except GraphError as e:
                print(f"tg: {e}", file=sys.stderr)
                return 1
            try:
                rep = session.cmd_eval(None, [])
            except CommandError as e:
                print(f"tg: {e}", file=sys.stderr)
                return 1
            return 1 if rep.misidentification_rate > 0 else 0
        if args.script:
            with open(args.script, encoding="utf-8") as f:
                return session.repl(f)
        return session.repl(stdin, prompt=stdin.isatty())
    except OSError as e:
        print(f"tg: {e}", file=sys.stderr)
        return 1


def synth_parser() -> argparse.ArgumentParser:
    from .synth import corpora

    p = argparse.ArgumentParser(prog="tg-synth", description="Generate a synthetic dump with ground truth.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="scenario spec document")
    src.add_argument("--corpus", choices=sorted(corpora.CORPORA), help="built-in scenario corpus")
    p.add_argument("out", help="output dump path; the sidecar goes to OUT.truth")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--catalog-out", help="also write the catalog document here")
    p.add_argument("--cache-table-out", help="also write the cache table here")
    return p


def synth_main(argv: list[str] | None = None) -> int:
    from .synth import SpecError, SynthSpec, corpora, generate, write_dump

    args = synth_parser().parse_args(argv)
    try:
        spec = SynthSpec.from_file(args.spec) if args.spec else corpora.CORPORA[args.corpus]()
        if args.seed is not None:
            spec.seed = args.seed
        doc, truth = generate(spec)
        write_dump(doc, truth, args.out)
        if args.catalog_out:
            with open(args.catalog_out, "w", encoding="utf-8") as f:
                json.dump(spec.catalog, f, indent=1)
        if args.cache_table_out:
            with open(args.cache_table_out, "w", encoding="utf-8") as f:
                json.dump({c["name"]: c["type"] for c in spec.typed_caches}, f, indent=1)
    except OSError as e:
        print(f"tg-synth: {e}", file=sys.stderr)
        return 1
    except (SpecError, CatalogError, KeyError, ValueError) as e:
        print(f"tg-synth: {e}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({len(truth.objects)} heap objects) and {args.out}.truth")
    return 0


if __name__ == "__main__":
    sys.exit(main())
