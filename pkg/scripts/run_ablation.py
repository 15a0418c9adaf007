"""Generate the reference dataset (if absent) and compare the three learning objectives on it.

    python scripts/run_ablation.py --work runs/ablation --seeds 0,1,2
"""
import argparse
import sys
from pathlib import Path

from orientkit.cli import main

REF = Path(__file__).resolve().parents[1] / "configs" / "reference.yaml"


def run(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--work", default="runs/ablation")
    p.add_argument("--config", default=str(REF))
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--split-mode", choices=("object", "view"), default=None)
    a = p.parse_args(argv)
    work = Path(a.work)
    data = work / "data"
    if not (data / "manifest.jsonl").exists():
        gen = ["gen", "--config", a.config, "--out", str(data)]
        if a.split_mode:
            gen += ["--split-mode", a.split_mode]
        if (rc := main(gen)) != 0:
            return rc
    cmd = ["ablate", "--config", a.config, "--data", str(data), "--seeds", a.seeds, "--json", str(work / "ablation.json")]
    if a.steps is not None:
        cmd += ["--steps", str(a.steps)]
    return main(cmd)


if __name__ == "__main__":
    sys.exit(run())
