"""Driver for the full-scale policy training run."""

import sys

sys.path.insert(0, "/root/pkg/src")

from microplan.rl.model_io import save_model
from microplan.rl.train import TrainConfig, evaluate, train

cfg = TrainConfig(seed=0, total_steps=1_000_000)
net, history, best = train(
    cfg,
    log_path="/root/pkg/models/full_train_log.jsonl",
    progress=lambda r: print(r, flush=True),
)
save_model(best, "/root/pkg/models/full_policy.qnet", seed=0)
print("saved /root/pkg/models/full_policy.qnet", flush=True)
report = evaluate(best, seed=31337, n_episodes=200)
print("final eval of best:", report, flush=True)
