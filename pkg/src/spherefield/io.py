"""Tables, hashes and run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os


class IntegrityError(RuntimeError):
    """An output file no longer matches its manifest."""


def text_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(x):
    """Round-trippable text for a number."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    try:
        return repr(float(x))
    except (TypeError, ValueError):
        return str(x)


def csv_text(header, rows, manifest_hash=None):
    buf = io.StringIO()
    if manifest_hash:
        buf.write(f"# manifest={manifest_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows, manifest_hash=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows, manifest_hash))


def read_csv(path):
    """(header, rows as lists of str), skipping comment lines."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not serializable: {type(o)}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, manifest_hash, seed, version, outputs, started):
    """Record output files with their digests; returns the manifest path."""
    record = {
        "manifest_hash": manifest_hash,
        "master_seed": seed,
        "library_version": version,
        "started": started,
        "finished": now(),
        "outputs": {os.path.basename(p): file_sha256(p) for p in outputs},
    }
    path = os.path.join(out_dir, "manifest.json")
    write_json(path, record)
    return path


def verify_manifest(path):
    """Raise IntegrityError if any listed file changed or lost its hash line."""
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    for name, digest in record["outputs"].items():
        target = os.path.join(base, name)
        if not os.path.exists(target):
            raise IntegrityError(f"{name}: missing")
        if file_sha256(target) != digest:
            raise IntegrityError(f"{name}: content does not match manifest")
    return record
