"""
simulate + extract for several seeds, one run directory per seed.

Env:
  RUN_ID          : run tag, default run_YYYYmmdd_HHMM (per seed: <RUN_ID>_s<seed>)
  SEEDS           : comma-separated ints (e.g. "101,202,303")
  QZENO_CONFIG    : INI config (optional)
  QZENO_OUT_ROOT  : output root (default: config output_dir, else outputs)

Output:
  <out root>/<RUN_ID>_s<seed>/   (see qzeno.pipeline_cli)
  eval/extract_reports/<RUN_ID>/<seed>.json
"""
import datetime
import os
import shutil
import sys
import time

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, ROOT)

from qzeno.config import env_defaults, load_config  # noqa: E402
from qzeno.pipeline_cli import main, resolve_out_root  # noqa: E402

ENV = env_defaults()
RUN_ID = os.getenv("RUN_ID") or datetime.datetime.now().strftime("run_%Y%m%d_%H%M")
SEEDS = ENV["seeds"] or [101, 202, 303]
CONFIG = os.getenv("QZENO_CONFIG")
REPORT_DIR = os.path.join(ROOT, "eval", "extract_reports", RUN_ID)


def run_seed(seed):
    os.environ["RUN_ID"] = f"{RUN_ID}_s{seed}"
    common = ["--seed", str(seed)] + (["--config", CONFIG] if CONFIG else [])
    code = main(["simulate"] + common)
    if code != 0:
        return code
    code = main(["extract"] + common)
    run_dir = os.path.join(resolve_out_root(None, load_config(CONFIG)), os.environ["RUN_ID"])
    src = os.path.join(run_dir, "extraction.json")
    if os.path.isfile(src):
        shutil.copyfile(src, os.path.join(REPORT_DIR, f"{seed}.json"))
    else:
        print(f"[warn] seed={seed} | no extraction.json in {run_dir}")
    return code


def main_sweep():
    start_ts = time.time()
    os.makedirs(REPORT_DIR, exist_ok=True)
    print("=" * 80)
    print(f"[cfg] RUN_ID = {RUN_ID}")
    print(f"[cfg] SEEDS  = {SEEDS}")
    print(f"[cfg] CONFIG = {CONFIG}")
    print("=" * 80)
    failed = []
    for i, seed in enumerate(SEEDS, 1):
        try:
            if run_seed(seed) != 0:
                failed.append(seed)
        except Exception as e:
            print(f"[ERR] seed={seed} | {e}")
            failed.append(seed)
        finally:
            print(f"[prog] {i}/{len(SEEDS)} ({round(i * 100.0 / len(SEEDS), 1)}%)")
    print("=" * 80)
    print(f"[done] seeds ok: {len(SEEDS) - len(failed)}/{len(SEEDS)} failed: {failed}")
    print(f"[time] Elapsed: {round(time.time() - start_ts, 1)}s")
    print("=" * 80)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main_sweep())
