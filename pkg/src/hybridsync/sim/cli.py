"""The ``sim`` command: run a scenario in virtual or real time."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from hybridsync.geometry import load_mesh_path, make_reference_mesh
from hybridsync.sim.scenario import ScenarioError
from hybridsync.sim.topology import LatencySpec, TopologyConfig
from hybridsync.sim.virtual import SimulationError, VirtualSim

logger = logging.getLogger(__name__)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sim", description="Scenario-driven session simulator")
    parser.add_argument("--peers", type=int, required=True)
    parser.add_argument("--groups", required=True, help="group layout, e.g. 4x4 or 2,3,11")
    parser.add_argument("--latency-ms", type=float, default=50.0, help="peer-relay link mean")
    parser.add_argument("--jitter-ms", type=float, default=20.0, help="peer-relay link jitter")
    parser.add_argument("--intra-latency-ms", type=float, default=5.0)
    parser.add_argument("--intra-jitter-ms", type=float, default=2.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenario", required=True, help="scenario script path")
    parser.add_argument("--model", help="mesh file (.stl/.obj); default: built-in model")
    parser.add_argument("--metrics", help="write the metrics CSV here")
    parser.add_argument("--realtime", action="store_true", help="drive real sockets on loopback")
    parser.add_argument("--log", default=os.environ.get("HYBRIDSYNC_LOG", "warning"))
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    mesh = load_mesh_path(args.model) if args.model else make_reference_mesh()
    try:
        topology = TopologyConfig.build(
            args.peers,
            args.groups,
            relay_link=LatencySpec(args.latency_ms, args.jitter_ms),
            intra_link=LatencySpec(args.intra_latency_ms, args.intra_jitter_ms),
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))

    with open(args.scenario) as fh:
        script = fh.read()

    try:
        if args.realtime:
            from hybridsync.sim.realtime import run_scenario_realtime

            result = run_scenario_realtime(topology, script, mesh)
        else:
            result = VirtualSim(topology, script, mesh).run()
    except (ScenarioError, SimulationError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 1

    report = result.report
    csv = report.to_csv()
    if args.metrics:
        with open(args.metrics, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    print(
        f"{len(report.rows)} messages; p50={report.p50_ms:.1f} ms "
        f"p95={report.p95_ms:.1f} ms p99={report.p99_ms:.1f} ms; "
        f"{report.total_bytes} bytes delivered; "
        f"converged {report.convergence_ms:.1f} ms after the last action; "
        f"{len(result.barriers)} barrier(s) passed",
        file=sys.stderr,
    )
    for err in result.errors:
        print(f"warning: {err}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
