"""``python -m tkg_agent.environments``: serve MicroLab over the wire protocol."""

from __future__ import annotations

import argparse
import sys

from tkg_agent.environments.base import TextEnv
from tkg_agent.environments.microlab import MicroLab, WorldDef
from tkg_agent.environments.wire import EnvServer, serve_stdio
from tkg_agent.environments.worlds import default_world


def main(argv: list[str] | None = None) -> int:
    """Serve MicroLab over TCP (``--port``) or stdin/stdout (``--stdio``)."""
    parser = argparse.ArgumentParser(prog="python -m tkg_agent.environments")
    parser.add_argument("--world", help="world definition JSON (default: built-in MicroLab)")
    parser.add_argument("--task", help="task served until a reset names another")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--stdio", action="store_true", help="speak the protocol on stdin/stdout")
    args = parser.parse_args(argv)
    world = WorldDef.load(args.world) if args.world else default_world()
    default_task = args.task or next(iter(world.tasks))

    def factory(task: str | None) -> TextEnv:
        return MicroLab(world, task or default_task)

    if args.stdio:
        serve_stdio(factory, args.task)
        return 0
    server = EnvServer(factory, args.host, args.port, args.task)
    print(f"serving MicroLab on {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
