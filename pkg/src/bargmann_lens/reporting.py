"""Deterministic report, table, and manifest writers.

Reports are sorted-key JSON; data tables are CSV with a header row and
repr-formatted floats (shortest round-trip form, locale independent).
Identical configurations and seeds therefore produce byte-identical
artifacts regardless of worker count.
"""

import hashlib
import json
import os


def _default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def dump_json(payload):
    return json.dumps(payload, sort_keys=True, indent=2, default=_default) + "\n"


def write_report(payload, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dump_json(payload))
    return path


def format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return f"{value.real!r}+{value.imag!r}j"
    return str(value)


def write_csv(columns, rows, path):
    """Comma-separated table with a header row."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row[c]) for c in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, artifacts, config_hash, seed, threads):
    """Manifest of all artifacts with their hashes and the config hash.

    The thread count is execution metadata recorded only here, so reports
    and tables stay byte-identical across worker counts.
    """
    entries = [
        {"path": os.path.basename(p), "sha256": file_sha256(p)} for p in sorted(artifacts)
    ]
    payload = {
        "artifacts": entries,
        "config_sha256": config_hash,
        "seed": seed,
        "threads": threads,
    }
    return write_report(payload, os.path.join(out_dir, "manifest.json"))


def collect_reports(directory):
    """All report payloads under a directory tree (for the merge command)."""
    found = []
    for root, _dirs, files in sorted(os.walk(directory)):
        for fname in sorted(files):
            if fname == "report.json":
                with open(os.path.join(root, fname)) as fh:
                    found.append((os.path.join(root, fname), json.load(fh)))
    return found
