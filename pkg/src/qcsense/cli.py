"""``qc`` command line: simulate fleets, serve/feed the gateway, run the
analysis suite, and process citizen-science walk sessions.

Exit codes: 0 ok, 2 usage, 3 data error, 4 I/O error.
All timestamps on the command line are ISO-8601 UTC; bare
``YYYY-MM-DDTHH:MM:SSZ`` is accepted and widened to millisecond precision.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import click
import yaml

from . import analytics, fieldkit
from .config import Location, NodeConfig, SensorSuiteSpec
from .errors import NoData, QcError, ValidationError
from .gateway import Gateway, NodeRegistration, create_app
from .nodesim import simulate_node
from .records import format_ts, parse_when, record_to_dict
from .scenario import load_scenario
from .store import RecordStore

EXIT_DATA = 3
EXIT_IO = 4


@dataclass(frozen=True)
class AnalysisParams:
    k: float = 3.5
    quorum: float = 0.75
    day_window: tuple = (8, 18)
    evening_window: tuple = (20, 6)
    timezone: str = "UTC"
    bin_width_c: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    archive_root: Path
    scenario_path: Path
    output_dir: Path
    fleet: tuple
    analysis: AnalysisParams = field(default_factory=AnalysisParams)
    gateway_host: str = "127.0.0.1"
    gateway_port: int = 8080


def load_run_config(path) -> RunConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise ValidationError("config", f"{path} is not a mapping")
    base = path.parent
    fleet = []
    for nd in raw.get("fleet", ()):
        fleet.append(
            NodeConfig(
                node_id=str(nd["node_id"]),
                location=Location(
                    lat=float(nd["lat"]),
                    lon=float(nd["lon"]),
                    elevation_m=float(nd.get("elevation_m", 0.0)),
                ),
                placement=nd.get("placement", "ground"),
                suite=SensorSuiteSpec(**nd.get("suite", {})),
                sampling_interval_s=int(nd.get("sampling_interval_s", 5)),
                mcu_count=int(nd.get("mcu_count", 2)),
                enclosure=nd.get("enclosure", "acrylic_top"),
                rng_seed=int(nd.get("rng_seed", 0)),
            )
        )
    analysis = raw.get("analysis", {})
    gw = raw.get("gateway", {})
    return RunConfig(
        archive_root=base / raw.get("archive_root", "archive"),
        scenario_path=base / raw["scenario"],
        output_dir=base / raw.get("output_dir", "out"),
        fleet=tuple(fleet),
        analysis=AnalysisParams(
            k=float(analysis.get("k", 3.5)),
            quorum=float(analysis.get("quorum", 0.75)),
            day_window=tuple(analysis.get("day_window", (8, 18))),
            evening_window=tuple(analysis.get("evening_window", (20, 6))),
            timezone=analysis.get("timezone", "UTC"),
            bin_width_c=float(analysis.get("bin_width_c", 1.0)),
        ),
        gateway_host=gw.get("host", "127.0.0.1"),
        gateway_port=int(gw.get("port", 8080)),
    )


def _ts(value: str) -> datetime:
    try:
        return parse_when(value)
    except ValueError as e:
        raise click.BadParameter(str(e))


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NoData as e:
            click.echo(f"error [{e.code}]: {e}", err=True)
            sys.exit(EXIT_DATA)
        except QcError as e:
            click.echo(f"error [{e.code}]: {e}", err=True)
            sys.exit(EXIT_DATA)
        except OSError as e:
            click.echo(f"I/O error: {e}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


def _select_fleet(cfg: RunConfig, nodes: str | None):
    if not nodes:
        return cfg.fleet
    wanted = nodes.split(",")
    by_id = {n.node_id: n for n in cfg.fleet}
    missing = [w for w in wanted if w not in by_id]
    if missing:
        raise ValidationError("nodes", f"unknown nodes {missing}")
    return tuple(by_id[w] for w in wanted)


def _write_json(path: Path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load_window(cfg: RunConfig, nodes, t0, t1):
    store = RecordStore(cfg.archive_root)
    node_ids = [n.node_id for n in nodes] if nodes else None
    records = store.query(node_ids, t0, t1)
    if not records:
        raise NoData(f"no records in [{format_ts(t0)}, {format_ts(t1)})")
    return records


def _by_node(records):
    out = {}
    for rec in records:
        out.setdefault(rec.node_id, []).append(rec)
    return out


@click.group()
def main():
    """Quantified-community sensing pipeline."""


# ---------------------------------------------------------------------------
# simulate


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--from", "t0", required=True)
@click.option("--to", "t1", required=True)
@click.option("--out", "out", type=click.Path(), default=None, help="archive root override")
@click.option("--seed", type=int, default=None, help="override node seeds (seed + index)")
@click.option("--nodes", default=None, help="comma-separated node ids (default: all)")
@handle_errors
def simulate(config_path, t0, t1, out, seed, nodes):
    """Simulate the configured fleet and append to the archive."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    scenario = load_scenario(cfg.scenario_path)
    store = RecordStore(out or cfg.archive_root)
    fleet = _select_fleet(cfg, nodes)
    for i, node in enumerate(fleet):
        if seed is not None:
            node = NodeConfig(
                node_id=node.node_id,
                location=node.location,
                placement=node.placement,
                suite=node.suite,
                sampling_interval_s=node.sampling_interval_s,
                mcu_count=node.mcu_count,
                enclosure=node.enclosure,
                rng_seed=seed + i,
            )
        records = simulate_node(node, scenario, t0, t1)
        result = store.append(records)
        click.echo(
            f"{node.node_id}: {len(records)} records "
            f"({result.added} added, {result.duplicates} duplicate)"
        )


# ---------------------------------------------------------------------------
# serve / ingest


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=None)
@handle_errors
def serve(config_path, port):
    """Run the ingestion/query gateway over the configured archive."""
    import uvicorn

    cfg = load_run_config(config_path)
    gateway = Gateway(RecordStore(cfg.archive_root))
    for node in cfg.fleet:
        gateway.register_node(
            NodeRegistration(
                node_id=node.node_id,
                lat=node.location.lat,
                lon=node.location.lon,
                placement=node.placement,
                elevation_m=node.location.elevation_m,
            )
        )
    app = create_app(gateway)
    uvicorn.run(app, host=cfg.gateway_host, port=port or cfg.gateway_port)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--gateway", "gateway_url", required=True)
@click.option("--from", "t0", required=True)
@click.option("--to", "t1", required=True)
@click.option("--nodes", default=None)
@click.option("--batch-size", type=int, default=5000)
@handle_errors
def ingest(config_path, gateway_url, t0, t1, nodes, batch_size):
    """Replay archive records into a running gateway in idempotent batches."""
    import httpx

    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    fleet = _select_fleet(cfg, nodes)
    records = _load_window(cfg, fleet, t0, t1)
    with httpx.Client(base_url=gateway_url, timeout=60.0) as client:
        for node in fleet:
            client.post(
                "/v1/nodes",
                json={
                    "node_id": node.node_id,
                    "lat": node.location.lat,
                    "lon": node.location.lon,
                    "placement": node.placement,
                },
            )  # 409 on re-registration is fine
        for node_id, recs in _by_node(records).items():
            accepted = duplicates = 0
            for i in range(0, len(recs), batch_size):
                chunk = recs[i : i + batch_size]
                resp = client.post(
                    "/v1/records",
                    json={"node_id": node_id, "records": [record_to_dict(r) for r in chunk]},
                )
                resp.raise_for_status()
                body = resp.json()
                accepted += body["accepted"]
                duplicates += body["duplicates"]
            click.echo(f"{node_id}: accepted {accepted}, duplicates {duplicates}")


# ---------------------------------------------------------------------------
# analyze


@main.group()
def analyze():
    """Archive analyses; each subcommand writes plot-ready CSV/JSON."""


def _analyze_common(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path(exists=True))(fn)
    fn = click.option("--from", "t0", required=True)(fn)
    fn = click.option("--to", "t1", required=True)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None)(fn)
    fn = click.option("--nodes", default=None)(fn)
    return fn


@analyze.command()
@_analyze_common
@click.option("--metric", default="dust_p001cf")
@click.option("--stat", default="mean", type=click.Choice(["mean", "median"]))
@handle_errors
def hourly(config_path, t0, t1, out_dir, nodes, metric, stat):
    """Per-node hourly averages of one metric."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    fleet = _select_fleet(cfg, nodes)
    records = _load_window(cfg, fleet, t0, t1)
    summary = {}
    for node_id, recs in _by_node(records).items():
        series = analytics.hourly_aggregate(recs, metric, stat)
        _write_csv(
            out / f"hourly_{metric}_{node_id}.csv",
            ("hour_start", "value", "n"),
            [(format_ts(e.hour_start), e.value, e.n) for e in series.entries],
        )
        summary[node_id] = len(series.entries)
    _write_json(out / f"hourly_{metric}.json", {"metric": metric, "stat": stat, "hours": summary})
    click.echo(f"wrote hourly {metric} series for {len(summary)} nodes to {out}")


@analyze.command()
@_analyze_common
@handle_errors
def regress(config_path, t0, t1, out_dir, nodes):
    """Humidity (independent) vs. dust (dependent) regression on hourly means."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    records = _load_window(cfg, _select_fleet(cfg, nodes), t0, t1)
    xs, ys, rows = [], [], []
    for node_id, recs in _by_node(records).items():
        hum = analytics.hourly_aggregate(recs, "humidity_pct").as_dict()
        dust = analytics.hourly_aggregate(recs, "dust_p001cf").as_dict()
        for hour in sorted(set(hum) & set(dust)):
            xs.append(hum[hour])
            ys.append(dust[hour])
            rows.append((node_id, format_ts(hour), hum[hour], dust[hour]))
    fit = analytics.ols(xs, ys)
    _write_csv(
        out / "regression_pairs.csv",
        ("node_id", "hour_start", "humidity_pct", "dust_p001cf"),
        rows,
    )
    _write_json(
        out / "regression.json",
        {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r": fit.r,
            "r_squared": fit.r_squared,
            "t_stat": fit.t_stat,
            "p_value": fit.p_value,
            "n": fit.n,
        },
    )
    click.echo(f"slope {fit.slope:.4g}, r {fit.r:.3f}, p {fit.p_value:.3g} (n={fit.n})")


@analyze.command()
@_analyze_common
@click.option("--node-a", required=True)
@click.option("--node-b", required=True)
@click.option("--metric", default="temperature_c")
@handle_errors
def diff(config_path, t0, t1, out_dir, nodes, node_a, node_b, metric):
    """Paired hourly differentials between two nodes (A minus B)."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    store = RecordStore(cfg.archive_root)
    result = analytics.differential_distribution(
        store.query([node_a], t0, t1),
        store.query([node_b], t0, t1),
        metric,
        day_window=cfg.analysis.day_window,
        evening_window=cfg.analysis.evening_window,
        tz=cfg.analysis.timezone,
        bin_width=cfg.analysis.bin_width_c,
    )
    _write_csv(
        out / f"diff_{metric}_{node_a}_{node_b}.csv",
        ("hour_start", "diff"),
        [(format_ts(h), d) for h, d in result.diffs],
    )
    _write_csv(
        out / f"diff_{metric}_{node_a}_{node_b}_hist.csv",
        ("bin_left", "count"),
        list(result.histogram),
    )

    def stats_dict(s):
        return (
            None
            if s is None
            else {"min": s.minimum, "max": s.maximum, "median": s.median, "n": s.n}
        )

    _write_json(
        out / f"diff_{metric}_{node_a}_{node_b}.json",
        {
            "metric": metric,
            "node_a": node_a,
            "node_b": node_b,
            "day": stats_dict(result.day_stats),
            "evening": stats_dict(result.evening_stats),
            "bin_width": result.bin_width,
        },
    )
    day = result.day_stats
    click.echo(
        f"{len(result.diffs)} common hours; day max {day.maximum:.2f}" if day else "no day hours"
    )


def _signature_options(fn):
    fn = click.option("--train-from", "train_t0", required=True)(fn)
    fn = click.option("--train-to", "train_t1", required=True)(fn)
    fn = click.option("--metric", default="dust_p001cf")(fn)
    return fn


def _build_signatures(cfg, fleet, metric, train_t0, train_t1):
    records = _load_window(cfg, fleet, train_t0, train_t1)
    return {
        node_id: analytics.build_signature(recs, metric)
        for node_id, recs in _by_node(records).items()
    }


def _signature_rows(sig):
    return [
        (b, sig.buckets[b].median, sig.buckets[b].mad, sig.buckets[b].n, sig.buckets[b].low_confidence)
        for b in sorted(sig.buckets)
    ]


@analyze.command()
@_analyze_common
@click.option("--metric", default="dust_p001cf")
@handle_errors
def signature(config_path, t0, t1, out_dir, nodes, metric):
    """Hour-of-week median/MAD baseline per node."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    sigs = _build_signatures(cfg, _select_fleet(cfg, nodes), metric, t0, t1)
    for node_id, sig in sigs.items():
        _write_csv(
            out / f"signature_{metric}_{node_id}.csv",
            ("hour_of_week", "median", "mad", "n", "low_confidence"),
            _signature_rows(sig),
        )
    click.echo(f"wrote {len(sigs)} signatures to {out}")


def _event_dict(ev):
    return {
        "node_id": ev.node_id,
        "metric": ev.metric,
        "start": format_ts(ev.start),
        "end": format_ts(ev.end),
        "peak_z": ev.peak_z,
        "peak_value": ev.peak_value,
        "direction": ev.direction,
    }


@analyze.command()
@_analyze_common
@_signature_options
@click.option("-k", "k", type=float, default=None)
@handle_errors
def anomaly(config_path, t0, t1, out_dir, nodes, train_t0, train_t1, metric, k):
    """Detect per-node anomalies against signatures trained on another window."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    k = k if k is not None else cfg.analysis.k
    fleet = _select_fleet(cfg, nodes)
    sigs = _build_signatures(cfg, fleet, metric, _ts(train_t0), _ts(train_t1))
    records = _load_window(cfg, fleet, t0, t1)
    all_events = []
    for node_id, recs in _by_node(records).items():
        if node_id not in sigs:
            continue
        detection = analytics.detect_anomalies(recs, sigs[node_id], k=k)
        all_events.extend(detection.events)
    _write_csv(
        out / f"anomalies_{metric}.csv",
        ("node_id", "start", "end", "peak_z", "peak_value", "direction"),
        [
            (e.node_id, format_ts(e.start), format_ts(e.end), e.peak_z, e.peak_value, e.direction)
            for e in all_events
        ],
    )
    _write_json(
        out / f"anomalies_{metric}.json",
        {"metric": metric, "k": k, "events": [_event_dict(e) for e in all_events]},
    )
    click.echo(f"{len(all_events)} events at k={k}")


@analyze.command()
@_analyze_common
@_signature_options
@click.option("-k", "k", type=float, default=None)
@click.option("--quorum", type=float, default=None)
@handle_errors
def scope(config_path, t0, t1, out_dir, nodes, train_t0, train_t1, metric, k, quorum):
    """Classify fleet anomalies as network-wide or localized."""
    cfg = load_run_config(config_path)
    t0, t1 = _ts(t0), _ts(t1)
    out = Path(out_dir) if out_dir else cfg.output_dir
    k = k if k is not None else cfg.analysis.k
    quorum = quorum if quorum is not None else cfg.analysis.quorum
    fleet = _select_fleet(cfg, nodes)
    sigs = _build_signatures(cfg, fleet, metric, _ts(train_t0), _ts(train_t1))
    records = _load_window(cfg, fleet, t0, t1)
    events_by_node = {}
    for node_id, recs in _by_node(records).items():
        if node_id in sigs:
            events_by_node[node_id] = analytics.detect_anomalies(recs, sigs[node_id], k=k).events
    scoped = analytics.classify_scope(
        events_by_node, metric, [n.node_id for n in fleet], quorum=quorum
    )
    _write_json(
        out / f"scope_{metric}.json",
        {
            "metric": metric,
            "k": k,
            "quorum": quorum,
            "fleet": [n.node_id for n in fleet],
            "anomalies": [
                {
                    "start": format_ts(s.start),
                    "end": format_ts(s.end),
                    "nodes": list(s.node_ids),
                    "scope": s.scope,
                }
                for s in scoped
            ],
        },
    )
    for s in scoped:
        click.echo(f"{s.scope}: {format_ts(s.start)}..{format_ts(s.end)} nodes={list(s.node_ids)}")
    if not scoped:
        click.echo("no anomalies")


# ---------------------------------------------------------------------------
# walk


@main.group()
def walk():
    """Citizen-science walk session processing."""


@walk.command("align")
@click.option("--session", "session_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@handle_errors
def walk_align(session_path, out_dir):
    """Geo-reference a session's samples; writes aligned CSV + coverage JSON."""
    trace = fieldkit.load_session(session_path)
    aligned = fieldkit.align(trace)
    out = Path(out_dir)
    _write_csv(
        out / f"aligned_{trace.team_id}.csv",
        ("ts", "lat", "lon", "annotations"),
        [
            (format_ts(p.ts), p.lat, p.lon, ";".join(a.label for a in p.annotations))
            for p in aligned.points
        ],
    )
    _write_json(
        out / f"aligned_{trace.team_id}_coverage.json",
        {
            "team_id": trace.team_id,
            "aligned": len(aligned.points),
            "dropped_before": aligned.dropped_before,
            "dropped_after": aligned.dropped_after,
        },
    )
    click.echo(
        f"{trace.team_id}: {len(aligned.points)} aligned, "
        f"{aligned.dropped_before + aligned.dropped_after} dropped"
    )


@walk.command("geojson")
@click.option("--session", "session_paths", required=True, multiple=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def walk_geojson(session_paths, out_path):
    """Export team trajectories and annotations as a GeoJSON document."""
    aligned = [fieldkit.align(fieldkit.load_session(p)) for p in session_paths]
    doc = fieldkit.export_geojson(aligned)
    fieldkit.write_geojson(doc, out_path)
    click.echo(f"wrote {len(doc['features'])} features to {out_path}")


@walk.command("series")
@click.option("--session", "session_path", required=True, type=click.Path(exists=True))
@click.option("--metric", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def walk_series(session_path, metric, out_path):
    """Per-team time-from-start series for one metric."""
    trace = fieldkit.load_session(session_path)
    series = fieldkit.team_series(trace, metric)
    _write_csv(Path(out_path), ("elapsed_s", metric), series)
    click.echo(f"{trace.team_id}: {len(series)} points")


@walk.command("calibrate")
@click.option("--session", "session_path", required=True, type=click.Path(exists=True))
@click.option("--reference", "reference_path", required=True, type=click.Path(exists=True))
@click.option("--metric", required=True)
@click.option("--tolerance", type=float, default=10.0)
@click.option("--out", "out_path", type=click.Path(), default=None)
@handle_errors
def walk_calibrate(session_path, reference_path, metric, tolerance, out_path):
    """Fit an affine correction against a compliance-grade reference session."""
    low = fieldkit.load_session(session_path)
    ref = fieldkit.load_session(reference_path)
    model = fieldkit.fit_calibration(
        low.samples, ref.samples, metric, pairing_tolerance_s=tolerance
    )
    payload = {
        "metric": model.metric,
        "gain": model.gain,
        "offset": model.offset,
        "r_squared": model.fit_r_squared,
        "n_pairs": model.n_pairs,
        "pairing_tolerance_s": model.pairing_tolerance_s,
    }
    if out_path:
        _write_json(Path(out_path), payload)
    click.echo(json.dumps(payload))


if __name__ == "__main__":
    main()
