"""
Run one qzeno CLI verb with env-driven defaults.

Env:
  RUN_ID          : run tag, default run_YYYYmmdd_HHMM
  QZENO_OUT_ROOT  : output root (default outputs)
  QZENO_CONFIG    : INI config passed as --config (optional)

Usage:
  python scripts/run_pipeline.py simulate --n-traj 1000
"""
import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, ROOT)

from qzeno.pipeline_cli import main  # noqa: E402


def build_argv(argv):
    argv = list(argv)
    cfg = os.getenv("QZENO_CONFIG")
    if cfg and "--config" not in argv and argv:
        argv += ["--config", cfg]
    return argv


if __name__ == "__main__":
    sys.exit(main(build_argv(sys.argv[1:])))
