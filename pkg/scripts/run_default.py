"""Optimise consumption on a shipped scenario and write every artefact to one directory.

    python3 scripts/run_default.py [--scenario default] [--out runs/default]
"""
import argparse
import sys

from nlramsey import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--scenario", default="default")
    ap.add_argument("--out", default="runs/default")
    args = ap.parse_args()
    for command in (["solve"], ["optimize"], ["compare-local"], ["check"]):
        out = [] if command == ["check"] else ["--out", f"{args.out}/{command[0]}"]
        code = cli.main(command + [args.scenario] + out)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
