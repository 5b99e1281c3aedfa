#!/usr/bin/env python3
"""End-to-end demo on the bundled four-node scenario: simulate June 2016,
archive it, then run the full analysis workflow and print a one-screen
summary. Outputs land under the run config's output_dir.

Usage: python3 scripts/run_redhook_week.py [--config qc.yaml] [--interval 60]
"""

import argparse
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from qcsense import analytics, fieldkit
from qcsense.cli import load_run_config
from qcsense.nodesim import simulate_node
from qcsense.records import format_ts
from qcsense.scenario import load_scenario
from qcsense.store import RecordStore

REPO = Path(__file__).resolve().parents[1]


def ts(day, hour=0):
    return datetime(2016, 6, day, hour, tzinfo=timezone.utc)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(REPO / "qc.yaml"))
    ap.add_argument("--interval", type=int, default=60,
                    help="sampling interval override in seconds (60 keeps the demo fast)")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    scenario = load_scenario(cfg.scenario_path)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    store = RecordStore(out / "archive")

    t_sim = time.time()
    fleet = [replace(n, sampling_interval_s=args.interval) for n in cfg.fleet]
    for node in fleet:
        records = simulate_node(node, scenario, ts(1), ts(18))
        result = store.append(records)
        print(f"simulated {node.node_id:12s} {len(records):7d} records "
              f"({result.added} new)")
    print(f"simulation + archive: {time.time() - t_sim:.1f} s\n")

    # humidity -> dust regression on pooled hourly means; the pre-event
    # window, so the June 17 spike doesn't act as a leverage point
    xs, ys = [], []
    for node in fleet:
        recs = store.query([node.node_id], ts(1), ts(15))
        hum = analytics.hourly_aggregate(recs, "humidity_pct").as_dict()
        dust = analytics.hourly_aggregate(recs, "dust_p001cf").as_dict()
        for hour in sorted(set(hum) & set(dust)):
            xs.append(hum[hour])
            ys.append(dust[hour])
    fit = analytics.ols(xs, ys)
    print(f"humidity->dust: slope {fit.slope:.1f} per %RH, r^2 {fit.r_squared:.3f}, "
          f"p {fit.p_value:.2e} (n={fit.n})")

    # rooftop vs. street temperature differential
    diff = analytics.differential_distribution(
        store.query(["rhi-roof"], ts(1), ts(18)),
        store.query(["rhi-ground"], ts(1), ts(18)),
        "temperature_c",
        day_window=cfg.analysis.day_window,
        evening_window=cfg.analysis.evening_window,
        tz=cfg.analysis.timezone,
        bin_width=cfg.analysis.bin_width_c,
    )
    print(f"roof-ground temperature: day max {diff.day_stats.maximum:.1f} C, "
          f"evening median {diff.evening_stats.median:+.2f} C")

    # dust anomalies on June 17 against two weeks of baseline
    events_by_node = {}
    for node in fleet:
        train = store.query([node.node_id], ts(1), ts(15))
        sig = analytics.build_signature(train, "dust_p001cf")
        detect = store.query([node.node_id], ts(17), ts(18))
        events = analytics.detect_anomalies(detect, sig, k=cfg.analysis.k).events
        events_by_node[node.node_id] = list(events)
        for ev in events:
            print(f"anomaly {node.node_id:12s} {format_ts(ev.start)} .. "
                  f"{format_ts(ev.end)} peak z {ev.peak_z:8.1f} "
                  f"value {ev.peak_value:9.0f}")
    for scoped in analytics.classify_scope(
        events_by_node, "dust_p001cf", [n.node_id for n in fleet],
        quorum=cfg.analysis.quorum,
    ):
        print(f"scope: {scoped.scope} across {sorted(scoped.node_ids)}")

    # citizen-science walk: align, export, calibrate
    walk = fieldkit.load_session(REPO / "scenarios" / "walk_team_red.yaml")
    ref = fieldkit.load_session(REPO / "scenarios" / "walk_reference.yaml")
    aligned = fieldkit.align(walk)
    fieldkit.write_geojson(fieldkit.export_geojson([aligned]), out / "walk.geojson")
    model = fieldkit.fit_calibration(walk.samples, ref.samples, "dust_p001cf")
    print(f"\nwalk {walk.team_id}: {len(aligned.points)} aligned samples, "
          f"{aligned.dropped_before + aligned.dropped_after} outside GPS envelope")
    print(f"calibration vs. reference: gain {model.gain:.3f}, "
          f"offset {model.offset:+.1f} (r^2 {model.fit_r_squared:.4f})")
    print(f"\noutputs in {out}")


if __name__ == "__main__":
    main()
