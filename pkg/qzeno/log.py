"""
Console logging in the "[tag] message" style used by the batch scripts.

Library modules only call logging.getLogger(__name__); handlers are attached
once by the CLI (or by a script) through setup_logging().
"""
import logging
import sys

BANNER = "=" * 80


def setup_logging(level=logging.INFO, log_file=None):
    root = logging.getLogger("qzeno")
    root.setLevel(level)
    for h in list(root.handlers):
        root.removeHandler(h)
    out = logging.StreamHandler(sys.stdout)
    out.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(out)
    if log_file:
        fh = logging.FileHandler(log_file, encoding="utf-8")
        fh.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
        root.addHandler(fh)
    root.propagate = False
    return root


def progress(logger, done, total):
    pct = round(done * 100.0 / max(total, 1), 1)
    logger.info(f"[prog] {done}/{total} ({pct}%)")
