"""Umbrella command: ``hybridsync {relay,peer,sim} ...``."""

from __future__ import annotations

import sys


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(
            "usage: hybridsync {relay,peer,sim} [options]\n\n"
            "  relay   run the session relay service\n"
            "  peer    run a headless participant\n"
            "  sim     run a scripted multi-peer simulation\n\n"
            "See 'hybridsync <command> --help' for command options."
        )
        return 0 if argv else 2
    command, rest = argv[0], argv[1:]
    if command == "relay":
        from hybridsync.relay_server import main as relay_main

        return relay_main(rest)
    if command == "peer":
        from hybridsync.client import main as peer_main

        return peer_main(rest)
    if command == "sim":
        from hybridsync.sim.cli import main as sim_main

        return sim_main(rest)
    print(f"unknown command {command!r}; expected relay, peer, or sim", file=sys.stderr)
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
