"""Command-line front end.

Commands: ``train``, ``eval``, ``ablate``, ``perturb``, ``plot`` and ``rollout``.
Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import rewards as R
from .charmodel import CharacterModel, build_biped, build_hopper, build_pendulum, load_character
from .envs import ImitationEnv, PendulumSwingUpEnv, PointMassEnv
from .motion import MotionClip, load_clip
from .nets import CheckpointError, load_checkpoint
from .physics import SimConfig, SimulationDiverged, apply_perturbation
from .rl import TrainConfig, evaluate, train
from .rl.rollout import run_episode
from .rl.train import PROTOCOL_SETTINGS

log = logging.getLogger("planarmimic")

DATA_DIR = Path(__file__).parent / "data"
ENV_KINDS = ("imitation", "point_mass", "pendulum_swingup")
BUILTIN_CHARACTERS = {"hopper": build_hopper, "biped": build_biped, "pendulum": build_pendulum}
ABLATION_MODES = {
    # label: (reference state initialization, early termination)
    "RSI+ET": (True, True),
    "ET": (False, True),
    "RSI": (True, False),
    "none": (False, False),
}
CHECKPOINT_NAME = "checkpoint.pmck"
CURVE_NAME = "curve.csv"
CONFIG_NAME = "config.json"


class UsageError(Exception):
    """Bad command line or configuration; exit code 1."""


# ----------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    env: str = "imitation"
    character: str = "hopper"
    clips: tuple = ("hop",)
    task: Optional[str] = None
    skill_selector: bool = False
    action_mode: str = "offset"
    train: TrainConfig = field(default_factory=TrainConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    rewards: R.RewardWeights = field(default_factory=R.RewardWeights)
    out: str = "runs/default"
    seed: int = 0

    def __post_init__(self):
        if self.env not in ENV_KINDS:
            raise ValueError(f"env must be one of {ENV_KINDS}, got '{self.env}'")
        if self.env == "imitation" and not self.clips:
            raise ValueError("an imitation run needs at least one clip")
        object.__setattr__(self, "clips", tuple(self.clips))
        # the run seed drives everything; keep the training config consistent with it
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "character": self.character,
            "clips": list(self.clips),
            "task": self.task,
            "skill_selector": self.skill_selector,
            "action_mode": self.action_mode,
            "train": {k: v for k, v in self.train.to_dict().items() if k != "seed"},
            "sim": asdict(self.sim),
            "rewards": self.rewards.to_dict(),
            "out": self.out,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValueError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown configuration keys {sorted(unknown)}")
        kw = dict(doc)
        for key, typ in (("env", str), ("character", str), ("action_mode", str), ("out", str)):
            if key in kw and not isinstance(kw[key], typ):
                raise ValueError(f"'{key}' must be a string")
        if "seed" in kw and (isinstance(kw["seed"], bool) or not isinstance(kw["seed"], int)):
            raise ValueError("'seed' must be an integer")
        if "skill_selector" in kw and not isinstance(kw["skill_selector"], bool):
            raise ValueError("'skill_selector' must be a boolean")
        if "task" in kw and kw["task"] is not None and not isinstance(kw["task"], str):
            raise ValueError("'task' must be a string or null")
        if "clips" in kw:
            if not isinstance(kw["clips"], list) or not all(isinstance(c, str) for c in kw["clips"]):
                raise ValueError("'clips' must be a list of strings")
            kw["clips"] = tuple(kw["clips"])
        train_doc = dict(kw.get("train", {}))
        if "seed" in train_doc:
            raise ValueError("set the seed at the top level, not inside 'train'")
        kw["train"] = TrainConfig.from_dict(train_doc)
        kw["sim"] = _sim_from_dict(kw.get("sim", {}))
        kw["rewards"] = R.RewardWeights.from_dict(kw.get("rewards", {}))
        return cls(**kw)


def _sim_from_dict(doc: dict) -> SimConfig:
    known = {f.name: f for f in fields(SimConfig)}
    unknown = set(doc) - set(known)
    if unknown:
        raise ValueError(f"unknown simulation keys {sorted(unknown)}")
    kw = {}
    for k, v in doc.items():
        if isinstance(known[k].default, int) and not isinstance(known[k].default, bool):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError(f"'{k}' must be an integer")
            kw[k] = v
        else:
            kw[k] = float(v)
    return SimConfig(**kw)


def load_run_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"configuration file not found: {p}")
    try:
        doc = json.loads(p.read_text())
        return RunConfig.from_dict(doc)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}: invalid JSON ({exc})") from exc
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{p}: {exc}") from exc


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------------
# building environments


def _resolve(name: str, kind: str) -> Path:
    p = Path(name)
    if p.suffix == ".json" and p.is_file():
        return p
    bundled = DATA_DIR / kind / f"{name}.json"
    if bundled.is_file():
        return bundled
    raise UsageError(f"no {kind[:-1]} named '{name}' (neither a file nor a bundled {kind[:-1]})")


def resolve_character(name: str) -> CharacterModel:
    p = Path(name)
    if p.suffix == ".json" and p.is_file():
        return load_character(p)
    bundled = DATA_DIR / "characters" / f"{name}.json"
    if bundled.is_file():
        return load_character(bundled)
    if name in BUILTIN_CHARACTERS:
        return BUILTIN_CHARACTERS[name]()
    raise UsageError(f"no character named '{name}'")


def resolve_clip(name: str) -> MotionClip:
    return load_clip(_resolve(name, "clips"))


def build_env(cfg: RunConfig):
    horizon = cfg.train.horizon
    if cfg.env == "point_mass":
        return PointMassEnv(horizon=horizon)
    if cfg.env == "pendulum_swingup":
        return PendulumSwingUpEnv(horizon=horizon, sim_config=cfg.sim)
    model = resolve_character(cfg.character)
    clips = [resolve_clip(c) for c in cfg.clips]
    return ImitationEnv(model, clips, sim_config=cfg.sim, weights=cfg.rewards, horizon=horizon,
                        task=cfg.task, action_mode=cfg.action_mode, skill_selector=cfg.skill_selector)


def _config_from_checkpoint(ck) -> RunConfig:
    doc = ck.config.get("run")
    if doc is None:
        raise UsageError("checkpoint carries no run configuration; pass --config")
    return RunConfig.from_dict(doc)


# ----------------------------------------------------------------------------
# commands


def _effective(args, cfg: RunConfig) -> RunConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["out"] = str(args.out)
    if updates:
        cfg = replace(cfg, **updates)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, workers=args.workers))
    if getattr(args, "protocol", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, eval_protocol=args.protocol))
    return cfg


def _progress(row):
    if row.get("mean_NR") is not None:
        log.info("iteration %d  samples %d  NR %.4f", row["iteration"], row["samples"], row["mean_NR"])


def cmd_train(args) -> int:
    cfg = _effective(args, load_run_config(args.config))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / CONFIG_NAME, cfg.to_dict())
    env = build_env(cfg)
    res = train(env, cfg.train, curve_path=out / CURVE_NAME, checkpoint_path=out / CHECKPOINT_NAME,
                run_config={"run": cfg.to_dict()}, progress=_progress)
    last = [r for r in res.curve if r.get("mean_NR") is not None][-1]
    print(f"trained {res.checkpoint.meta['samples']} samples; final mean NR {last['mean_NR']:.4f}")
    print(f"wrote {out / CHECKPOINT_NAME} and {out / CURVE_NAME}")
    return 0


def _load(args):
    ck = load_checkpoint(args.checkpoint)
    cfg = load_run_config(args.config) if args.config else _config_from_checkpoint(ck)
    return ck, _effective(args, cfg)


def cmd_eval(args) -> int:
    ck, cfg = _load(args)
    protocol = args.protocol or "paper-eval"
    env = build_env(cfg)
    nr = evaluate(env, ck.policy, args.episodes, protocol, np.random.default_rng(cfg.seed),
                  deterministic=args.deterministic)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode", "NR"])
    for i, v in enumerate(nr):
        w.writerow([i, repr(float(v))])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(buf.getvalue())
    print(f"protocol {protocol}  episodes {args.episodes}  mean NR {nr.mean():.6f}  std {nr.std():.6f}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _effective(args, load_run_config(args.config))
    modes = args.modes.split(",") if args.modes else list(ABLATION_MODES)
    for m in modes:
        if m not in ABLATION_MODES:
            raise UsageError(f"unknown ablation mode '{m}'; choose from {list(ABLATION_MODES)}")
    seeds = [cfg.seed + k for k in range(args.seeds)]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / CONFIG_NAME, cfg.to_dict())
    env = build_env(cfg)
    rows = []
    for m in modes:
        rsi, et = ABLATION_MODES[m]
        for s in seeds:
            tc = replace(cfg.train, rsi=rsi, early_termination=et, seed=s, eval_protocol="ablation-eval")
            tag = m.replace("+", "_")
            res = train(env, tc, curve_path=out / f"curve_{tag}_seed{s}.csv", progress=_progress)
            final = [r for r in res.curve if r.get("mean_NR") is not None][-1]["mean_NR"]
            rows.append((m, s, final))
            log.info("mode %s seed %d final NR %.4f", m, s, final)
    table = ablation_table(rows)
    (out / "ablation.csv").write_text(table)
    print(table, end="")
    return 0


def ablation_table(rows) -> str:
    """Per-run final NR plus a per-mode mean row (``seed`` column ``mean``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "seed", "final_NR"])
    by_mode = {}
    for m, s, v in rows:
        w.writerow([m, s, repr(float(v))])
        by_mode.setdefault(m, []).append(v)
    for m, vals in by_mode.items():
        w.writerow([m, "mean", repr(float(np.mean(vals)))])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# perturbation harness

PUSH_DIRECTIONS = {"forward": 1.0, "backward": -1.0}


def push_trial(env: ImitationEnv, policy, magnitude: float, direction: float, duration: float = 0.2,
               warmup_cycles: int = 1, settle_cycles: int = 2) -> bool:
    """Whether the character survives one horizontal push.

    The episode starts from the clip's first frame and runs the mean action.
    After ``warmup_cycles`` full cycles the push is applied at the middle of the
    next cycle. The trial succeeds if no termination link touches the ground
    before ``settle_cycles`` further cycles have elapsed; a diverged simulation
    counts as a fall.
    """
    rng = np.random.default_rng(0)
    obs = env.reset(rng, "fixed")
    T = env.clip.cycle_duration
    dt = env.sim_config.control_dt
    push_time = (warmup_cycles + 0.5) * T
    steps = int(math.ceil((warmup_cycles + 1 + settle_cycles) * T / dt - 1e-9))
    pushed = False
    try:
        for _ in range(steps):
            if not pushed and env.state.time >= push_time - 0.5 * dt:
                if magnitude > 0.0:
                    apply_perturbation(env.state, (direction * magnitude, 0.0), duration, env.state.time)
                pushed = True
            obs, _, fell, _, _ = env.step(policy.forward_mean(obs))
            if fell:
                return False
    except SimulationDiverged:
        return False
    return True


def max_tolerated_force(env: ImitationEnv, policy, direction: float, step: float = 10.0,
                        duration: float = 0.2, max_force: float = 1000.0):
    """Raise the push in ``step`` increments until the first fall.

    Returns the last surviving magnitude and the list of ``(magnitude, survived)``
    trials. If the unpushed baseline already falls the result is ``None``.
    """
    trials = []
    mag = 0.0
    last = None
    while mag <= max_force + 1e-9:
        ok = push_trial(env, policy, mag, direction, duration)
        trials.append((mag, ok))
        if not ok:
            break
        last = mag
        mag = round(mag + step, 9)
    return last, trials


def cmd_perturb(args) -> int:
    ck, cfg = _load(args)
    if cfg.env != "imitation":
        raise UsageError("perturbation tests need an imitation run")
    env = build_env(cfg)
    directions = args.directions.split(",")
    for d in directions:
        if d not in PUSH_DIRECTIONS:
            raise UsageError(f"unknown direction '{d}'; choose from {list(PUSH_DIRECTIONS)}")
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = io.StringIO()
    ws = csv.writer(summary, lineterminator="\n")
    ws.writerow(["skill", "direction", "max_force_N"])
    trials_buf = io.StringIO()
    wt = csv.writer(trials_buf, lineterminator="\n")
    wt.writerow(["direction", "force_N", "survived"])
    for d in directions:
        best, trials = max_tolerated_force(env, ck.policy, PUSH_DIRECTIONS[d], args.step,
                                           args.duration, args.max_force)
        ws.writerow([env.clip.name, d, "" if best is None else repr(float(best))])
        for mag, ok in trials:
            wt.writerow([d, repr(float(mag)), int(ok)])
    (out / "perturb.csv").write_text(summary.getvalue())
    (out / "perturb_trials.csv").write_text(trials_buf.getvalue())
    print(summary.getvalue(), end="")
    return 0


# ----------------------------------------------------------------------------
# rollout trace


def rollout_rows(env, policy, rng, protocol: str, deterministic: bool):
    """Header and per-step rows of one recorded episode."""
    mode, et = PROTOCOL_SETTINGS[protocol]
    ep, infos = run_episode(env, policy, rng, mode, et, deterministic=deterministic, record_info=True)
    imitation = isinstance(env, ImitationEnv)
    has_task = imitation and env.task is not None
    header = ["step", "time"]
    if imitation:
        nq = env.model.n_joints + 3
        header += [f"q{i}" for i in range(nq)] + [f"qd{i}" for i in range(nq)]
        header += ["pose", "velocity", "end_effector", "com", "imitation"]
        if has_task:
            header.append("task")
        header += ["reward", "phase", "clip"]
    else:
        header += ["reward"]
    rows = []
    dt = 1.0 / (env.sim_config.control_rate if hasattr(env, "sim_config") else env.control_rate)
    for t, info in enumerate(infos):
        row = [t, repr((t + 1) * dt)]
        if imitation:
            row += [repr(float(v)) for v in info["q"]] + [repr(float(v)) for v in info["qd"]]
            row += [repr(float(v)) for v in info["terms"]] + [repr(float(info["imitation"]))]
            if has_task:
                row.append(repr(float(info["task"])))
            row += [repr(float(ep.rewards[t])), repr(float(info["phase"])), int(info["clip"])]
        else:
            row.append(repr(float(ep.rewards[t])))
        rows.append(row)
    return header, rows


def cmd_rollout(args) -> int:
    ck, cfg = _load(args)
    env = build_env(cfg)
    if not args.out:
        raise UsageError("rollout needs --out")
    header, rows = rollout_rows(env, ck.policy, np.random.default_rng(cfg.seed),
                                args.protocol or "paper-eval", args.deterministic)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(buf.getvalue())
    print(f"wrote {len(rows)} steps to {args.out}")
    return 0


# ----------------------------------------------------------------------------
# plotting


class CsvFormatError(ValueError):
    pass


X_COLUMNS = ("samples", "time", "episode", "force_N")
Y_COLUMNS = ("mean_NR", "imitation", "reward", "NR", "final_NR", "survived", "max_force_N")


def read_series(path, x_candidates=X_COLUMNS, y_candidates=Y_COLUMNS):
    """``(x label, y label, xs, ys)`` from any CSV the commands write.

    Tables without a numeric x column (ablation, perturbation summaries) are
    plotted against the row number. Rows with a blank y value are skipped. A
    row with the wrong number of fields or a non-numeric entry raises
    :class:`CsvFormatError` naming the line number.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        xs_name = next((c for c in x_candidates if c in header), None)
        ys_name = next((c for c in y_candidates if c in header), None)
        if ys_name is None:
            raise CsvFormatError(f"{path}: line 1: no plottable columns in header {header}")
        ix = header.index(xs_name) if xs_name is not None else None
        iy = header.index(ys_name)
        xs, ys = [], []
        for k, row in enumerate(reader):
            line = reader.line_num
            if len(row) != len(header):
                raise CsvFormatError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            if row[iy] == "":
                continue
            try:
                xs.append(float(row[ix]) if ix is not None else float(k))
                ys.append(float(row[iy]))
            except ValueError:
                raise CsvFormatError(f"{path}: line {line}: non-numeric value") from None
    return xs_name or "row", ys_name, xs, ys


AXIS_TITLES = {"samples": "samples", "time": "time (s)", "episode": "episode", "force_N": "push force (N)",
               "row": "row", "mean_NR": "normalized return", "NR": "normalized return",
               "final_NR": "normalized return", "imitation": "imitation reward", "reward": "reward",
               "survived": "survived", "max_force_N": "max force (N)"}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def render_svg(series, width: int = 640, height: int = 400, x_label: str = "samples",
               y_label: str = "normalized return") -> str:
    """Line chart of ``[(label, xs, ys), ...]``; a legend is drawn for more than one series."""
    left, right, top, bottom = 70, 20, 20, 50
    allx = [x for _, xs, _ in series for x in xs] or [0.0, 1.0]
    ally = [y for _, _, ys in series for y in ys] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(min(ally), 0.0), max(max(ally), 1.0) if y_label == "normalized return" else max(ally)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<g class="axes" stroke="black" stroke-width="1">'
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>']
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        out.append(f'<text class="tick" x="{sx(fx):.2f}" y="{top + ph + 16}" font-size="10" '
                   f'text-anchor="middle">{fx:.4g}</text>')
        out.append(f'<text class="tick" x="{left - 6}" y="{sy(fy) + 3:.2f}" font-size="10" '
                   f'text-anchor="end">{fy:.3g}</text>')
    out.append(f'<text class="xlabel" x="{left + pw / 2:.2f}" y="{height - 10}" font-size="12" '
               f'text-anchor="middle">{_esc(x_label)}</text>')
    out.append(f'<text class="ylabel" x="15" y="{top + ph / 2:.2f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.2f})">{_esc(y_label)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline class="series" data-label="{_esc(label)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts}"/>')
    if len(series) > 1:
        out.append('<g class="legend">')
        for i, (label, _, _) in enumerate(series):
            y = top + 12 + 16 * i
            color = PALETTE[i % len(PALETTE)]
            out.append(f'<line x1="{left + 10}" y1="{y}" x2="{left + 30}" y2="{y}" stroke="{color}" '
                       f'stroke-width="2"/><text x="{left + 35}" y="{y + 4}" font-size="11">{_esc(label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_plot(args) -> int:
    if not args.csv:
        raise UsageError("plot needs at least one CSV path")
    series = []
    xl = yl = None
    for p in args.csv:
        if not Path(p).is_file():
            raise UsageError(f"CSV file not found: {p}")
        xl, yl, xs, ys = read_series(p)
        series.append((Path(p).stem, xs, ys))
    svg = render_svg(series, x_label=AXIS_TITLES.get(xl, xl), y_label=AXIS_TITLES.get(yl, yl))
    out = Path(args.out or "plot.svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return 0


# ----------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="planarmimic", description="Train and evaluate planar motion-imitation policies.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, config_required=False, checkpoint=False):
        sp.add_argument("--config", required=config_required, help="run configuration (JSON)")
        if checkpoint:
            sp.add_argument("--checkpoint", required=True, help="checkpoint file")
        sp.add_argument("--out", help="output directory or file")
        sp.add_argument("--seed", type=int, help="override the configured seed")

    sp = sub.add_parser("train", help="train a policy")
    common(sp, config_required=True)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--protocol", choices=list(PROTOCOL_SETTINGS))
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="normalized-return statistics of a checkpoint")
    common(sp, checkpoint=True)
    sp.add_argument("--episodes", type=int, default=32)
    sp.add_argument("--protocol", choices=list(PROTOCOL_SETTINGS))
    sp.add_argument("--deterministic", action="store_true", help="use the mean action")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", help="train under each initialization/termination mode")
    common(sp, config_required=True)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--modes", help="comma-separated subset of RSI+ET,ET,RSI,none")
    sp.add_argument("--seeds", type=int, default=3, help="number of consecutive seeds per mode")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("perturb", help="largest tolerated push per direction")
    common(sp, checkpoint=True)
    sp.add_argument("--directions", default="forward,backward")
    sp.add_argument("--step", type=float, default=10.0, help="force increment (N)")
    sp.add_argument("--duration", type=float, default=0.2, help="push duration (s)")
    sp.add_argument("--max-force", type=float, default=1000.0)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("plot", help="SVG learning curves or trajectory traces")
    sp.add_argument("csv", nargs="*")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("rollout", help="per-step trace of one episode")
    common(sp, checkpoint=True)
    sp.add_argument("--protocol", choices=list(PROTOCOL_SETTINGS))
    sp.add_argument("--deterministic", action="store_true")
    sp.set_defaults(func=cmd_rollout)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        for name in ("workers", "episodes", "seeds"):
            v = getattr(args, name, None)
            if v is not None and v < 1:
                raise UsageError(f"--{name} must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"planarmimic: error: {exc}", file=sys.stderr)
        return 1
    except (SimulationDiverged, CheckpointError, CsvFormatError, OSError, RuntimeError, ValueError) as exc:
        print(f"planarmimic: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
