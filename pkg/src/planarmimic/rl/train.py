"""Training loop, evaluation and the learning-curve log."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..nets import Checkpoint, GaussianPolicy, InputNormalizer, MomentumSGD, Mlp, ValueNet
from ..physics import SimulationDiverged
from .config import TrainConfig
from .ppo import UpdateAborted, ppo_update
from .rollout import collect_rollouts, run_episode

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("iteration", "samples", "mean_NR", "std_NR", "clip_fraction", "mean_ratio",
                 "policy_loss", "value_loss", "wall_seconds")

PROTOCOL_SETTINGS = {
    # (initial-state mode, early termination)
    "paper-eval": ("rsi", True),
    "ablation-eval": ("fixed", False),
}


def normalized_return(rewards, horizon_steps: int, max_step_reward: float = 1.0) -> float:
    """Episode return divided by the largest achievable return over the horizon."""
    if horizon_steps <= 0 or max_step_reward <= 0:
        raise ValueError("horizon_steps and max_step_reward must be positive")
    return float(np.sum(rewards)) / (horizon_steps * max_step_reward)


def build_agent(obs_dim: int, action_dim: int, config: TrainConfig, rng: np.random.Generator):
    """Fresh policy, value network and their optimizers."""
    normalizer = InputNormalizer(obs_dim) if config.normalize_inputs else None
    pnet = Mlp(obs_dim, config.policy_hidden, action_dim, rng, output_scale=config.policy_output_scale)
    vnet = Mlp(obs_dim, config.value_hidden, 1, rng)
    policy = GaussianPolicy(pnet, config.action_sigma, normalizer)
    value = ValueNet(vnet, config.value_output_scale, normalizer)
    popt = MomentumSGD(pnet.params, config.policy_lr, config.momentum)
    vopt = MomentumSGD(vnet.params, config.value_lr, config.momentum)
    return policy, value, popt, vopt


def evaluate(env, policy, n_episodes: int, protocol: str, rng: np.random.Generator,
             deterministic: bool = True) -> np.ndarray:
    """Normalized returns of ``n_episodes`` episodes under an evaluation protocol.

    ``paper-eval`` starts from random reference states with early termination;
    ``ablation-eval`` starts from the clip's first frame with early
    termination disabled.
    """
    if protocol not in PROTOCOL_SETTINGS:
        raise ValueError(f"unknown evaluation protocol '{protocol}'")
    mode, et = PROTOCOL_SETTINGS[protocol]
    out = np.empty(n_episodes)
    for i in range(n_episodes):
        try:
            ep = run_episode(env, policy, rng, mode, et, deterministic=deterministic)
            out[i] = normalized_return(ep.rewards, env.horizon_steps, env.max_step_reward)
        except SimulationDiverged as exc:
            log.warning("evaluation episode %d diverged (%s); scored 0", i, exc)
            out[i] = 0.0
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def curve_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CURVE_COLUMNS])
    return buf.getvalue()


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    curve: list = field(default_factory=list)
    diverged_episodes: int = 0


def train(env, config: TrainConfig, eval_env=None, curve_path: Optional[Path] = None,
          checkpoint_path: Optional[Path] = None, run_config: Optional[dict] = None,
          progress: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Alternate rollout collection and PPO updates until ``config.sample_budget`` samples.

    An evaluation row is logged before the first update (iteration 0), every
    ``config.eval_interval`` iterations and after the final update; other
    iterations log blank NR fields. The CSV is rewritten after every row, so it is complete even if a
    run is interrupted.
    """
    from ..nets import save_checkpoint

    eval_env = eval_env if eval_env is not None else env.clone()
    seq = np.random.SeedSequence(config.seed)
    init_ss, collect_ss, update_ss, eval_ss = seq.spawn(4)
    policy, value, popt, vopt = build_agent(env.obs_dim, env.action_dim, config,
                                            np.random.default_rng(init_ss))
    collect_rng = np.random.default_rng(collect_ss)
    update_rng = np.random.default_rng(update_ss)
    eval_seed = int(np.random.default_rng(eval_ss).integers(2 ** 63 - 1))
    t_start = time.perf_counter()
    rows = []
    samples = 0
    diverged = 0

    def log_row(it, stats):
        row = {"iteration": it, "samples": samples}
        if stats is not None:
            row.update({k: stats[k] for k in ("clip_fraction", "mean_ratio", "policy_loss", "value_loss")})
        if it % config.eval_interval == 0 or samples >= config.sample_budget:
            nr = evaluate(eval_env, policy, config.eval_episodes, config.eval_protocol,
                          np.random.default_rng(eval_seed), config.deterministic_eval)
            row["mean_NR"] = float(nr.mean())
            row["std_NR"] = float(nr.std())
        if config.log_wall_time:
            row["wall_seconds"] = time.perf_counter() - t_start
        rows.append(row)
        if curve_path is not None:
            Path(curve_path).write_text(curve_to_csv(rows))
        if progress is not None:
            progress(row)

    log_row(0, None)
    it = 0
    while samples < config.sample_budget:
        it += 1
        batch = collect_rollouts(env, policy, config, collect_rng)
        diverged += batch.diverged
        samples += batch.n_steps
        try:
            stats = ppo_update(batch, policy, value, popt, vopt, config, update_rng)
        except UpdateAborted as exc:
            raise RuntimeError(f"iteration {it}: {exc}") from exc
        if policy.normalizer is not None:
            policy.normalizer.update(batch.concat("obs"))
        log_row(it, stats)

    ck = Checkpoint(policy, value, popt, vopt, config=run_config or {"train": config.to_dict()},
                    meta={"iterations": it, "samples": samples})
    if checkpoint_path is not None:
        save_checkpoint(ck, checkpoint_path)
    return TrainResult(ck, rows, diverged)
