"""Artifact files: trace/bank CSVs, partition and report JSON, run manifests."""

import csv
import datetime as _dt
import hashlib
import json
import os
from importlib import metadata

import numpy as np

from .explorer import SampleBank
from .mh import ChainTrace
from .partitioner import partition_from_dict

FLOAT_FMT = "%.17g"


def fmt(v):
    """17 significant digits: enough for every double to round-trip."""
    return FLOAT_FMT % v


def _header(d):
    return ["chain_id", "region_id", "step"] + [f"x{j}" for j in range(d)] + ["accepted"]


def write_traces(path, traces):
    """All traces in one CSV, ordered by chain then step."""
    traces = list(traces)
    d = traces[0].states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(d))
        for t in traces:
            rid = "" if t.region_id is None else str(t.region_id)
            acc = t.accepted if t.accepted is not None else np.zeros(len(t.states), dtype=bool)
            for s, (x, a) in enumerate(zip(t.states, acc)):
                w.writerow([t.chain_id, rid, s] + [fmt(v) for v in x] + [int(a)])


def read_traces(path):
    rows = list(_read_rows(path))
    out, order = {}, []
    for chain_id, region_id, step, x, acc in rows:
        if chain_id not in out:
            out[chain_id] = (region_id, [], [])
            order.append(chain_id)
        out[chain_id][1].append(x)
        out[chain_id][2].append(bool(acc) if acc is not None else False)
    traces = []
    for cid in order:
        rid, xs, acc = out[cid]
        acc = np.array(acc)
        traces.append(ChainTrace(np.array(xs), cid, rid, int(acc[1:].sum()), 0, acc))
    return traces


def write_bank(path, bank):
    """Same schema as traces; chain_id holds the source tag, region_id and accepted are empty."""
    d = bank.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(d))
        for s, (x, tag) in enumerate(zip(bank.points, bank.source_tags)):
            w.writerow([int(tag), "", s] + [fmt(v) for v in x] + [""])


def read_bank(path):
    rows = list(_read_rows(path))
    return SampleBank(np.array([r[3] for r in rows]), np.array([r[0] for r in rows], dtype=int))


def _read_rows(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        xs = [i for i, h in enumerate(header) if h.startswith("x")]
        for row in r:
            yield (int(row[0]), int(row[1]) if row[1] else None, int(row[2]),
                   [float(row[i]) for i in xs], int(row[-1]) if row[-1] else None)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_partition(path, model):
    write_json(path, model.to_dict())


def load_partition(path):
    return partition_from_dict(read_json(path))


def write_table(path, header, rows):
    """CSV with floats at 17 significant digits and ``None`` as an empty field."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else fmt(v) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def package_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def sha256_file(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(out_dir, command, config_hash, seed, artifacts, started, extra=None):
    """manifest.json listing every artifact (paths relative to ``out_dir``)."""
    missing = [p for p in artifacts.values() if not os.path.exists(os.path.join(out_dir, p))]
    if missing:
        raise FileNotFoundError(f"manifest lists missing artifacts: {missing}")
    manifest = {
        "command": command,
        "version": package_version(),
        "config_sha256": config_hash,
        "seed": seed,
        "artifacts": artifacts,
        "started": started,
        "finished": now(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, manifest)
    return path
