"""Command line: ``percolab run|preset|list-presets|validate``."""

import argparse
import json
import sys

from . import config as CFG
from . import presets, runner
from .errors import InputError


def _report(res, stream):
    state = "ok" if res.passed else f"exit {res.status}"
    print(f"{state}: {res.out_dir}" if res.out_dir else state, file=stream)
    for k, v in sorted(res.manifest.get("checks", {}).items()):
        print(f"  {'PASS' if v else 'FAIL'} {k}", file=stream)
    for k, v in sorted(res.manifest.get("summary", {}).items()):
        print(f"  {k} = {v}", file=stream)
    if res.error:
        print(f"error: {res.error}", file=sys.stderr)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="percolab", description="Percolation and cellular automaton experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides config and PERCOLAB_OUTPUT_DIR)")
    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name")
    p_pre.add_argument("--out")
    p_pre.add_argument("--print", action="store_true", help="print the config instead of running it")
    sub.add_parser("list-presets", help="list preset names with their criteria")
    p_val = sub.add_parser("validate", help="schema-check a config")
    p_val.add_argument("config")
    a = ap.parse_args(argv)

    try:
        if a.cmd == "list-presets":
            for n in presets.names():
                c = presets.preset(n)
                print(f"{n}\tcriterion {c['criterion']}\t{c['experiment']}")
            return 0
        if a.cmd == "validate":
            CFG.validate(CFG.load(a.config))
            print("valid")
            return 0
        if a.cmd == "preset":
            cfg = presets.preset(a.name)
            if a.print:
                print(json.dumps(cfg, indent=1, sort_keys=True))
                return 0
        else:
            cfg = CFG.load(a.config)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return runner.EXIT_INPUT
    res = runner.run(cfg, a.out)
    _report(res, sys.stdout)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
