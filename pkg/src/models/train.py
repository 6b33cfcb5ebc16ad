"""
Actor-critic training loop for flow-map policies.

One iteration: sample a batch, update the double critic on the TD loss,
weight the batch by advantages from the updated critic, update the actor on
consistency + lambda_flow * flow (+ the linear Q term in that ablation), then
move the EMA copies.
"""

import json
import logging
import os
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.data.dataset import OfflineDataset, TransitionBatch
from src.data.preprocess import sample_batch
from src.dynamics.sampler import SamplerConfig, sample_actions
from src.dynamics.timegrid import make_time_grid
from src.models.checkpoint import load_checkpoint, save_checkpoint
from src.models.critic import DoubleCritic
from src.models.evaluate import evaluate_policy
from src.models.flowmap import FlowMapNet
from src.models.losses import (
    AdvantageConfig,
    LossBreakdown,
    actor_total,
    advantage_weight,
    consistency_loss,
    critic_loss,
    flow_loss,
    linear_q_actor_loss,
)
from src.models.optim import adam_step, clip_grad_norm, ema_update, grad_norm
from src.models.schedule import sample_time_triples, step_schedule
from src.models.train_state import TrainState, init_train_state
from src.serving.inference import GTPPolicy
from src.utils.config import TrainConfig
from src.utils.errors import ConfigError, DivergenceError, NumericError
from src.utils.tracking import RunTracker
from src.utils.utils import EVAL_STREAM, ensure_finite, make_rng

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "iteration", "critic", "consistency", "flow", "total_actor", "mean_weight",
    "grad_norm_actor", "grad_norm_critic", "linear_q", "eval_return", "eval_hit_rate",
]
FLUSH_EVERY = 100


def compute_advantages(
    critic: DoubleCritic,
    ema_actor: FlowMapNet,
    batch: TransitionBatch,
    cfg: AdvantageConfig,
    rng: np.random.Generator,
    sampler: SamplerConfig = SamplerConfig(),
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-row advantages and weights.

    Q(s, a) is the smaller of the two online critics; V(s) averages the same
    quantity over `n_value_samples` EMA-actor draws. With eta = 0 the critic
    is not queried, no randomness is consumed and every weight is 1.

    Returns:
        (A, w)
    """
    n = batch.states.shape[0]
    if n == 0:
        raise ConfigError("compute_advantages needs a non-empty batch")
    if cfg.eta == 0:
        return np.zeros(n), np.ones(n)

    m = cfg.n_value_samples
    q_sa = critic.min_q(batch.states, batch.actions)
    s_rep = np.repeat(batch.states, m, axis=0)
    a_rep = sample_actions(ema_actor, s_rep, rng=rng, use_ema=True, **sampler.kwargs())
    v_s = critic.min_q(s_rep, a_rep).reshape(n, m).mean(axis=1)
    adv = q_sa - v_s
    return adv, advantage_weight(q_sa, v_s, float(np.std(adv)), cfg)


def _diverged(what: str, k: int, batch: TransitionBatch) -> DivergenceError:
    return DivergenceError(
        f"{what} at iteration {k}", iteration=k, batch_indices=batch.indices.tolist()
    )


def train_step(state: TrainState, dataset: OfflineDataset, config: TrainConfig):
    """
    Runs one iteration in place.

    Returns:
        (state, LossBreakdown, grad norms dict)

    Raises:
        DivergenceError: a loss or gradient became non-finite; the state is
            left at the previous iteration.
    """
    rng = state.rng
    k = state.iteration
    sampler = config.train_sampler

    # === 1. BATCH ===
    batch = sample_batch(dataset, min(config.batch_size, len(dataset)), rng)
    n = batch.states.shape[0]

    try:
        # === 2. CRITIC ===
        cl = critic_loss(
            state.critic, state.actor, batch, config.gamma, rng, sampler,
            max_q_backup=config.max_q_backup, n_backup_samples=config.n_backup_samples,
        )
        ensure_finite(cl.loss, "critic loss")
        g_critic = ensure_finite(np.concatenate([cl.grad_q1, cl.grad_q2]), "critic gradient")
        gn_critic = grad_norm(g_critic)
        g_critic, _ = clip_grad_norm(g_critic, config.grad_norm_max)
        n1 = cl.grad_q1.size
        adam_q1, q1 = adam_step(state.adam_q1, state.critic.q1, g_critic[:n1])
        adam_q2, q2 = adam_step(state.adam_q2, state.critic.q2, g_critic[n1:])
        critic = state.critic.with_params(q1=q1, q2=q2)

        # === 3. ADVANTAGE WEIGHTS (after this iteration's critic update) ===
        _, w = compute_advantages(critic, state.actor, batch, config.advantage, rng, sampler)

        # === 4-5. TIME GRID, TRIPLES, NOISE ===
        schedule = config.schedule
        n_points = step_schedule(schedule, min(k, schedule.K_total - 1))
        grid = make_time_grid(config.T, config.t_min, n_points, config.rho)
        triple = sample_time_triples(grid, n, rng)
        z = rng.standard_normal((n, state.actor.action_dim))

        # === 6. ACTOR ===
        actor = state.actor
        cons, g_cons = consistency_loss(
            actor, batch.states, batch.actions, triple, z, w,
            teacher=config.teacher, teacher_scheme=config.teacher_scheme,
            teacher_steps=config.teacher_steps,
        )
        flow, g_flow = flow_loss(actor, batch.states, batch.actions, triple.t, z, w)
        total = actor_total(cons, flow, config.lambda_flow)
        g_actor = g_cons + config.lambda_flow * g_flow

        lin_q = 0.0
        if config.ablation == "linear_q":
            lin_q, g_lq = linear_q_actor_loss(actor, critic, batch.states, config.lambda_q, rng, sampler)
            g_actor = g_actor + g_lq
        ensure_finite(np.array([total, lin_q]), "actor loss")
        ensure_finite(g_actor, "actor gradient")

        gn_actor = grad_norm(g_actor)
        g_actor, _ = clip_grad_norm(g_actor, config.grad_norm_max)
        adam_actor, theta = adam_step(state.adam_actor, actor.params, g_actor)
    except DivergenceError:
        raise
    except NumericError as e:
        raise _diverged(str(e), k, batch) from e

    # === 7. EMA ===
    state.actor = actor.with_params(
        params=theta, ema_params=ema_update(actor.ema_params, theta, config.ema_rate)
    )
    state.critic = critic.with_params(
        q1_target=ema_update(critic.q1_target, q1, config.ema_rate),
        q2_target=ema_update(critic.q2_target, q2, config.ema_rate),
    )
    state.adam_actor, state.adam_q1, state.adam_q2 = adam_actor, adam_q1, adam_q2

    # === 8. ITERATION ===
    state.iteration = k + 1

    breakdown = LossBreakdown(
        consistency=cons, flow=flow, total_actor=total, critic=cl.loss,
        mean_weight=float(np.mean(w)), linear_q=lin_q,
    )
    return state, breakdown, {"grad_norm_actor": gn_actor, "grad_norm_critic": gn_critic}


# === METRICS FILE ===

def _prepare_metrics(path: str, start_iteration: int) -> None:
    """Fresh header, or on resume keep only rows before the resume point."""
    if start_iteration > 0 and os.path.exists(path):
        df = pd.read_csv(path, float_precision="round_trip")
        df = df[df["iteration"] < start_iteration]
        df.to_csv(path, index=False, lineterminator="\n")
    else:
        pd.DataFrame(columns=METRIC_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def _flush(path: str, rows: List[dict]) -> None:
    if rows:
        pd.DataFrame(rows, columns=METRIC_COLUMNS).to_csv(
            path, mode="a", header=False, index=False, lineterminator="\n"
        )
        rows.clear()


def _dump_divergence(out_dir: str, err: DivergenceError, dataset: OfflineDataset) -> str:
    path = os.path.join(out_dir, f"divergence_{err.iteration}.json")
    idx = err.batch_indices
    payload = {
        "iteration": err.iteration,
        "message": str(err),
        "batch_indices": idx,
        "transitions": dataset.to_matrix()[idx].tolist() if idx else [],
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
    return path


def evaluate_state(config: TrainConfig, state: TrainState, dataset: OfflineDataset):
    """Evaluation on a stream derived from (seed, iteration); never touches the training rng."""
    policy = GTPPolicy(
        state.actor, dataset.state_mean, dataset.state_std,
        sampler=config.eval_sampler(), use_ema=config.eval_use_ema,
    )
    rng = make_rng(config.seed, EVAL_STREAM, state.iteration)
    return evaluate_policy(
        dataset.env_spec, policy, config.eval_episodes, config.n_sample_steps_eval, rng
    )


def run(
    config: TrainConfig,
    dataset: OfflineDataset,
    out_dir: str,
    resume_from: Optional[str] = None,
    stop_at: Optional[int] = None,
    tracker: Optional[RunTracker] = None,
    progress: bool = False,
) -> str:
    """
    Trains for config.K_total iterations.

    Writes metrics.csv, ckpt_<k>.ckpt every checkpoint_interval iterations
    and final.ckpt at the end. With `stop_at` the run halts at that
    iteration and returns the path of ckpt_<stop_at>.ckpt instead;
    passing that file as `resume_from` continues bit-identically.

    Returns:
        str: Path of the last checkpoint written.

    Raises:
        DivergenceError: with `dump_path` pointing at divergence_<k>.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    tracker = tracker or RunTracker(None)

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.config != config:
            logger.warning("resuming with the configuration stored in %s", resume_from)
        config = ckpt.config
        if ckpt.env_spec != dataset.env_spec:
            raise ConfigError("checkpoint and dataset were built for different environments")
        state = ckpt.state
        logger.info("resumed from %s at iteration %d", resume_from, state.iteration)
    else:
        state = init_train_state(config, dataset.state_dim, dataset.action_dim)

    def checkpoint(name: str) -> str:
        return save_checkpoint(
            os.path.join(out_dir, name), config, state, dataset.env_spec,
            dataset.state_mean, dataset.state_std,
        )

    metrics_path = os.path.join(out_dir, "metrics.csv")
    _prepare_metrics(metrics_path, state.iteration)
    rows: List[dict] = []
    end = config.K_total if stop_at is None else min(stop_at, config.K_total)

    tracker.log_params(config.model_dump())
    logger.info(
        "training %d -> %d (eta=%g, lambda_flow=%g, ablation=%s, teacher=%s)",
        state.iteration, end, config.eta, config.lambda_flow, config.ablation, config.teacher,
    )

    try:
        for _ in tqdm(range(state.iteration, end), disable=not progress, desc="train"):
            k = state.iteration
            state, losses, norms = train_step(state, dataset, config)
            row = {"iteration": k, **losses.model_dump(), **norms,
                   "eval_return": np.nan, "eval_hit_rate": np.nan}

            if state.iteration % config.eval_interval == 0:
                report = evaluate_state(config, state, dataset)
                row["eval_return"] = report.mean_return
                row["eval_hit_rate"] = report.goal_hit_rate
                logger.info(
                    "iteration %d: critic=%.5f actor=%.5f eval_return=%.3f hit_rate=%.3f",
                    state.iteration, losses.critic, losses.total_actor,
                    report.mean_return, report.goal_hit_rate,
                )
            rows.append(row)

            if k % FLUSH_EVERY == 0 or not np.isnan(row["eval_return"]):
                tracker.log_metrics({c: row[c] for c in METRIC_COLUMNS[1:]}, step=k)
            if len(rows) >= FLUSH_EVERY:
                _flush(metrics_path, rows)
            if state.iteration % config.checkpoint_interval == 0:
                _flush(metrics_path, rows)
                checkpoint(f"ckpt_{state.iteration:06d}.ckpt")
    except DivergenceError as err:
        _flush(metrics_path, rows)
        err.dump_path = _dump_divergence(out_dir, err, dataset)
        logger.error("%s; diagnostic dump at %s", err, err.dump_path)
        raise

    _flush(metrics_path, rows)
    if state.iteration < config.K_total:
        path = os.path.join(out_dir, f"ckpt_{state.iteration:06d}.ckpt")
        if not os.path.exists(path):
            checkpoint(os.path.basename(path))
        logger.info("stopped at iteration %d -> %s", state.iteration, path)
        return path

    path = checkpoint("final.ckpt")
    tracker.log_artifact(path)
    logger.info("training finished at iteration %d -> %s", state.iteration, path)
    return path
