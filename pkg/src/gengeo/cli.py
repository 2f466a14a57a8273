"""Command-line interface.

``gengeo run`` executes a scenario file (or a bundled example by name) and
prints the report; ``gengeo list-examples`` shows what ships with the
package; ``gengeo serve`` starts the HTTP service.  Exit codes: 0 when every
check passed, 1 when the run completed but a check failed, 2 for usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .scenario import (
    ScenarioError,
    apply_overrides,
    example_names,
    load_example,
    load_scenario,
    run_scenario,
)

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gengeo",
        description="Exact checks and flow identification for generalized "
        "complex structures on polynomial charts.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run", help="execute a scenario file or bundled example and report"
    )
    run.add_argument(
        "scenario",
        help="path to a scenario JSON file, or the name of a bundled example",
    )
    run.add_argument(
        "--format",
        choices=("json", "text"),
        default="json",
        help="report rendering (default: json)",
    )
    run.add_argument("--steps", type=int, help="override integrator step count")
    run.add_argument("--tol", type=float, help="override identification tolerance")
    run.add_argument("--seed", type=int, help="override the sampling seed")
    run.add_argument(
        "--output", type=Path, help="write the report to this file instead of stdout"
    )

    sub.add_parser("list-examples", help="list bundled scenario names")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _load(reference: str):
    path = Path(reference)
    if path.is_file():
        try:
            return load_scenario(path.read_text())
        except OSError as err:
            raise ScenarioError(f"cannot read {reference!r}: {err}") from err
    if path.suffix == ".json" and not path.exists() and "/" in reference:
        raise ScenarioError(f"no such file: {reference!r}")
    return load_example(reference)


def _cmd_run(args) -> int:
    try:
        scenario = _load(args.scenario)
        scenario = apply_overrides(
            scenario, steps=args.steps, tol=args.tol, seed=args.seed
        )
        report = run_scenario(scenario)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    rendered = report.to_json() if args.format == "json" else report.to_text()
    if args.output is not None:
        args.output.write_text(rendered + "\n")
    else:
        print(rendered)
    return EXIT_PASSED if report.passed else EXIT_FAILED


def _cmd_list_examples() -> int:
    for name in example_names():
        scenario = load_example(name)
        label = scenario.description or scenario.task
        print(f"{name:24s} {label}")
    return EXIT_PASSED


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_PASSED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list-examples":
        return _cmd_list_examples()
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
