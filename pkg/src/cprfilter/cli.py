"""Command line front end: ``solve run``, ``solve sweep`` and ``solve check-presets``.

Any configuration key can be overridden as ``--key value`` (or
``--key=value``); precedence is preset < ``--config`` file < flags.

Exit codes: 0 success, 2 usage error, 3 blow-up, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from cprfilter.config import (
    CONVERTERS,
    PRESETS,
    ExperimentConfig,
    check_presets,
    read_config_file,
    resolve_config,
)
from cprfilter.errors import ConfigError
from cprfilter.experiments import execute, sweep

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BLOWUP = 3
EXIT_IO = 4

logger = logging.getLogger("cprfilter")


_CANONICAL_KEYS = {k.lower(): k for k in CONVERTERS}


def _key_value_pairs(tokens: Sequence[str]) -> dict[str, str]:
    """Turn ``--key value`` / ``--key=value`` tokens into a dict."""
    out: dict[str, str] = {}
    it = iter(tokens)
    for token in it:
        if not token.startswith("--"):
            raise ConfigError(f"unexpected argument {token!r}")
        key, sep, value = token[2:].partition("=")
        if not sep:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{key}") from None
        key = key.replace("-", "_")
        key = _CANONICAL_KEYS.get(key.lower(), key)
        if key not in CONVERTERS:
            raise ConfigError(f"unknown option --{key}")
        out[key] = value
    return out


def _parse_list(text: str, kind: type) -> list:
    try:
        return [kind(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solve",
        allow_abbrev=False,
        description="1D CPR solver with modal filtering: run advection and Burgers experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "run a single experiment"),
                            ("sweep", "run a grid over epsilon and s")):
        p = sub.add_parser(
            name,
            help=help_text,
            allow_abbrev=False,
            epilog="Further --key value pairs override configuration keys: "
                   + ", ".join(sorted(CONVERTERS)),
        )
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", help="flat 'key = value' configuration file")
        p.add_argument("--out", required=True, help="output directory")
        if name == "sweep":
            p.add_argument("--epsilon", required=True, help="comma separated strengths")
            p.add_argument("--s", dest="orders", default="1", help="comma separated orders")

    sub.add_parser("check-presets", help="compare the built-in presets with reference values")
    return parser


def _resolve(args: argparse.Namespace, extra: Sequence[str]) -> ExperimentConfig:
    overrides = _key_value_pairs(extra)
    file_values = read_config_file(args.config) if args.config else {}
    return resolve_config(args.preset, file_values, overrides)


def _check_presets() -> int:
    rows = check_presets()
    width = max(len(r[0]) for r in rows)
    bad = 0
    for name, key, expected, actual, ok in rows:
        bad += not ok
        print(f"{name:<{width}}  {key:<12} expected={expected!r:<14} "
              f"actual={actual!r:<14} {'ok' if ok else 'MISMATCH'}")
    print(f"{len(rows) - bad}/{len(rows)} preset values match")
    return EXIT_OK if bad == 0 else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "check-presets":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        return _check_presets()

    try:
        config = _resolve(args, extra)
        if args.command == "run":
            result = execute(config, args.out)
            print(f"wrote {result.out_dir} ({result.record.steps} steps"
                  f"{', blew up' if result.blew_up else ''})")
            return EXIT_BLOWUP if result.blew_up else EXIT_OK

        epsilons = _parse_list(args.epsilon, float)
        orders = _parse_list(args.orders, int)
        if not epsilons or not orders:
            raise ConfigError("sweep needs at least one epsilon and one order")
        rows = sweep(config, epsilons, orders, args.out)
        for row in rows:
            print("eps={:g} s={} final_energy={:.10g} min_u={:.6g} max_u={:.6g} blew_up={}"
                  .format(*row))
        return EXIT_OK

    except ConfigError as exc:
        print(f"solve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"solve: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
