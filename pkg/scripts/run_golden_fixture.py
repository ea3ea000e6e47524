#!/usr/bin/env python3
"""Run the end-to-end reference journey and print the resulting segments.

The scenario (virtual time, milliseconds of wall clock): commission a unit
at the production site, store it in Silo A at ~15 degC / 35 %RH, truck it
at ~18 degC / 55 %RH, and receive it at retail. Two device agents stream
the sensor data over the real channel protocol.

--journey-out writes the exact JSON payload GET /v1/trace/{epc} returns,
which the web frontend's tests consume as their golden fixture.
"""

from __future__ import annotations

import argparse
import json
import sys

from pmaas.demo import run_reference_scenario
from pmaas.gateway import build_app


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--granularity", type=float, default=60.0)
    parser.add_argument("--journey-out", type=str, default=None)
    args = parser.parse_args()

    result = run_reference_scenario(granularity_s=args.granularity)
    journey = result.journey_json

    print(f"unit: {journey['unit_id']}")
    print(f"product: {journey['product']['name']} ({journey['product']['origin']})")
    print(f"segments: {len(journey['segments'])}")
    for segment in journey["segments"]:
        check_out = segment["check_out"] or "(open)"
        print(f"  {segment['location_type']:9s} {segment['location']}")
        print(f"            {segment['check_in']} .. {check_out}")
        print(f"            devices={segment['device_count']}", end="")
        for parameter, stats in segment["stats"].items():
            print(
                f"  {parameter}: mean={stats['mean']} min={stats['min']} max={stats['max']}",
                end="",
            )
        print()
        if segment["violations"]:
            print(f"            violations: {segment['violations']}")

    if args.journey_out:
        # fetch through the REST API so the file is byte-for-byte what a
        # frontend would receive
        from fastapi.testclient import TestClient

        client = TestClient(build_app(result.platform))
        response = client.get(
            f"/v1/trace/{result.unit.raw}",
            params={"granularity": args.granularity},
            headers={"X-Auth-Token": result.end_user_token},
        )
        response.raise_for_status()
        with open(args.journey_out, "wb") as fh:
            fh.write(response.content)
        print(f"wrote REST journey payload to {args.journey_out}")
        if json.loads(response.content) != journey:
            print("warning: REST payload diverged from the in-process journey", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
