"""
Output helpers: CSV / JSON tables, reproducible .npz archives, the run
manifest and click-record input.
"""
import csv
import hashlib
import json
import logging
import os
import platform
import zipfile
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .errors import RecordParseError, StorageError

logger = logging.getLogger(__name__)

# fixed zip timestamps keep archive checksums reproducible
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create {path}: {e}") from e
    return path


def write_csv(path, rows, fieldnames):
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=fieldnames)
            w.writeheader()
            for r in rows:
                w.writerow({k: _cell(r.get(k)) for k in fieldnames})
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return "" if v is None else v


def write_json(path, obj):
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2, sort_keys=True, default=_json_default)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_npz(path, arrays):
    try:
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name in sorted(arrays):
                info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                with zf.open(info, "w", force_zip64=True) as f:
                    np.lib.format.write_array(f, np.asanyarray(arrays[name]), allow_pickle=False)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config_dict):
    blob = json.dumps(config_dict, sort_keys=True, default=_json_default).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    run_dir: str
    config_hash: str
    seed: int
    code_version: str = __version__
    wall_clock: float = 0.0
    outputs: dict = field(default_factory=dict)  # relative path -> sha256

    def add(self, path):
        rel = os.path.relpath(path, self.run_dir).replace("\\", "/")
        self.outputs[rel] = sha256_file(path)
        return path

    def checksums(self):
        return dict(sorted(self.outputs.items()))

    def write(self):
        data = {"config_hash": self.config_hash, "code_version": self.code_version, "seed": self.seed,
                "wall_clock_s": round(self.wall_clock, 3), "outputs": self.checksums()}
        return write_json(os.path.join(self.run_dir, "manifest.json"), data)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        return cls(os.path.dirname(path), d["config_hash"], d["seed"], d["code_version"], d["wall_clock_s"],
                   d["outputs"])


def write_meta(run_dir, run_id):
    meta = {"RUN_ID": run_id, "qzeno_version": __version__, "numpy_version": np.__version__,
            "scipy_version": scipy.__version__, "python_version": platform.python_version()}
    return write_json(os.path.join(run_dir, "_meta.json"), meta)


def write_config(run_dir, config):
    """Resolved config (SI units) next to the outputs."""
    return write_json(os.path.join(run_dir, "config.json"), config.to_dict())


# ---------------- tables ----------------
def histogram_to_csv(hist, path):
    rows = [{"bin_left_rad": a, "bin_right_rad": b, "value_s_per_rad": v, "sigma_s_per_rad": s, "count": c}
            for a, b, v, s, c in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.values, hist.sigma,
                                     hist.counts)]
    return write_csv(path, rows, ["bin_left_rad", "bin_right_rad", "value_s_per_rad", "sigma_s_per_rad", "count"])


def store_to_csv(store, path):
    """Long table (trajectory_id, window_index, outcome, theta_snapshot); θ is taken at the window end."""
    if store.outcomes is None:
        raise StorageError("store has no per-trajectory records to export")
    n, w = store.outcomes.shape
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            wr = csv.writer(f)
            wr.writerow(["trajectory_id", "window_index", "outcome", "theta_snapshot_rad"])
            for i in range(n):
                for k in range(w):
                    th = store.theta[i, k + 1]
                    wr.writerow([i, k, int(store.outcomes[i, k]), "" if np.isnan(th) else repr(float(th))])
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e
    return path


def read_records_csv(path):
    """
    Click records with header 'label,outcome' (outcome 0/1), grouped by label in
    file order -> OrderedDict label -> bool array.
    """
    groups = OrderedDict()
    try:
        f = open(path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise RecordParseError(f"cannot open {path}: {e}") from e
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise RecordParseError(f"{path} is empty")
        if [h.strip().lower() for h in header] != ["label", "outcome"]:
            raise RecordParseError(f"expected header 'label,outcome', got {','.join(header)!r}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise RecordParseError(f"expected 2 columns, got {len(row)}", line=line)
            try:
                label = float(row[0])
            except ValueError:
                raise RecordParseError(f"label {row[0]!r} is not a number", line=line) from None
            if row[1].strip() not in ("0", "1"):
                raise RecordParseError(f"outcome {row[1]!r} is not 0 or 1", line=line)
            groups.setdefault(label, []).append(row[1].strip() == "1")
    if not groups:
        raise RecordParseError(f"{path} contains no records")
    return OrderedDict((k, np.array(v, dtype=bool)) for k, v in groups.items())
