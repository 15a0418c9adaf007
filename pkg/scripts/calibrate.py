"""Train one objective on a dataset and print the validation curve and final report.

Used to pick the frozen learnability threshold and step budget.

    python scripts/calibrate.py --data runs/ablation/data --objective fitting --steps 3000
"""
import argparse
import time

from orientkit.config import load_config
from orientkit.evaluation import render_report
from orientkit.train import load_split, train, validation_report


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--objective", default="fitting", choices=("fitting", "classification", "regression"))
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=500)
    a = p.parse_args(argv)
    rc = load_config(a.config, {"objective": a.objective, "steps": a.steps, "seed": a.seed, "eval_every": a.eval_every})
    data, val = load_split(a.data, "train"), load_split(a.data, "val")
    cfg = rc.train_config(*data.images.shape[1:3])

    def log(step, loss=None, report=None):
        if report is not None:
            print(f"step {step:>6}  azimuth Acc@22.5 {report.azimuth.acc[22.5]:6.2f}")

    t0 = time.perf_counter()
    res = train(cfg, data, val, callback=log)
    print(f"trained {cfg.steps} steps in {time.perf_counter() - t0:.0f}s")
    print(render_report(validation_report(res.params, val), a.objective))


if __name__ == "__main__":
    run()
