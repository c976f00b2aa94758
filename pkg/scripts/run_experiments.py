#!/usr/bin/env python3
"""Run the full experiment suite against the repo fixture calibration.

Writes bench/lift/selfcheck reports (YAML + CSV tables) into results/
and prints the per-encoding summaries.  Equivalent to the `fishrope
bench|lift|selfcheck` subcommands with default settings.
"""

from __future__ import annotations

import pathlib
import sys

from fishrope import experiments, fixtures, formats

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results"


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    camera = fixtures.wide_camera()

    bench = experiments.retrieval_bench(
        experiments.RetrievalBenchConfig(camera=camera)
    )
    formats.write_report_yaml(RESULTS / "bench.yaml", bench.as_dict())
    header, rows = bench.csv_rows()
    formats.write_csv_table(RESULTS / "bench.csv", header, rows)
    for s in bench.scores:
        print(
            f"bench[{s.encoding}] top1={s.top1_accuracy:.4f} "
            f"periphery={s.periphery_accuracy:.4f} ({s.runtime_s:.2f}s)"
        )

    lift = experiments.bev_roundtrip(
        camera,
        fixtures.scene_extrinsics(),
        fixtures.scene_pattern(),
        experiments.LiftConfig(),
    )
    formats.write_report_yaml(RESULTS / "lift.yaml", lift.as_dict())
    header, rows = lift.csv_rows()
    formats.write_csv_table(RESULTS / "lift.csv", header, rows)
    for s in lift.scores:
        print(
            f"lift[{s.encoding}] overall={s.overall_accuracy:.4f} "
            f"peripheral={s.peripheral_accuracy:.4f} ({s.runtime_s:.2f}s)"
        )

    check = experiments.selfcheck()
    formats.write_report_yaml(RESULTS / "selfcheck.yaml", check.as_dict())
    failures = [r for r in check.results if not r.passed]
    print(f"selfcheck: {len(check.results) - len(failures)}/{len(check.results)} passed")
    for r in failures:
        print("  " + r.line())
    return 0 if check.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
