"""Train a randomized and a fixed policy side by side, then compare survival.

Small by default (a few minutes); raise EPOCHS/STEPS/TRIALS for a closer
look. Both trainers share each epoch's batch of rollouts.

    python demos/train_compare.py
"""
import time

from quadgait import (ARSConfig, ARSTrainer, D2Distribution, EvalCampaignSpec, World, bucket_report,
                      run_eval_campaign, train_lockstep)

EPOCHS, STEPS, TRIALS, TRIAL_STEPS = 10, 500, 20, 2000

world, dist = World(), D2Distribution()
cfg = ARSConfig(episode_steps=STEPS)
trainers = [ARSTrainer(cfg, dist, mode, 0, world) for mode in ("randomized", "fixed")]
start = time.perf_counter()


def progress(epoch, ts):
    rets = "  ".join(f"{t.mode} {t.log.epochs[-1].mean_return:+.3f}" for t in ts)
    print(f"epoch {epoch:3d}  {rets}  {time.perf_counter() - start:6.1f} s", flush=True)


train_lockstep(trainers, EPOCHS, progress)

spec = dict(trials=TRIALS, max_steps=TRIAL_STEPS, master_seed=1000)
reports = [run_eval_campaign(EvalCampaignSpec(source="matrix", **spec), dist, world, theta=t.theta)
           for t in trainers]
reports.append(run_eval_campaign(EvalCampaignSpec(source="open-loop", **spec), dist, world))
text, _ = bucket_report(reports, ["randomized", "fixed", "open-loop"])
print(text)
