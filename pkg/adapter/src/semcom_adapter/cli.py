"""`semcom-adapter serve` — start the provider service.

`--echo` serves the deterministic conformance handlers without loading any
model; `--config file.json` loads an AdapterConfig (model identifiers per
op). Startup failures (bad config, unloadable models) exit nonzero with a
diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig, ConfigError
from .models import ModelLoadError
from .server import serve_forever


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semcom-adapter")
    sub = parser.add_subparsers(dest="command", required=True)
    p_serve = sub.add_parser("serve", help="run the provider service")
    p_serve.add_argument("--config", default=None, help="AdapterConfig JSON file")
    p_serve.add_argument("--echo", action="store_true",
                         help="serve the deterministic echo handlers")
    p_serve.add_argument("--listen", default=None, help="host:port override")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = AdapterConfig.from_file(args.config)
        elif args.echo:
            config = AdapterConfig()
        else:
            print("serve needs --config or --echo", file=sys.stderr)
            return 2
        if args.listen:
            config = AdapterConfig(listen=args.listen, models=config.models,
                                   device=config.device,
                                   max_payload_bytes=config.max_payload_bytes)
        config.validate()
        serve_forever(config)
    except (ConfigError, ModelLoadError) as exc:
        print(f"startup failure: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
