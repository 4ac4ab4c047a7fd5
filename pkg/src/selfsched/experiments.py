"""Factorial campaign runner: workloads x systems x methods x chunk modes.

A campaign is described by a line-oriented ``key = value`` config with
``[workload.NAME]``, ``[system.NAME]``, ``[campaign]`` and optional ``[rl]``
sections.  Each cell runs `repetitions` times on seeds base_seed + r; the
summary reports the median total loop time, the oracle total on the same
seeds, and the degradation percentage relative to the oracle.
"""

from __future__ import annotations

import dataclasses
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .core import SystemModel
from .schedulers import ALL_KINDS, kind_from_name
from .selection import (
    CHUNK_MODES,
    ConstantProvider,
    ExhaustiveSel,
    ExpertSel,
    RLConfig,
    RLProvider,
    RandomSel,
    SelectionLogEntry,
    build_selection_log,
    oracle_select,
    resolve_chunk_param,
    write_selection_log,
)
from .simulator import dump_chunk_trace, run_timesteps
from .workloads import WorkloadSpec, build_workload

__all__ = [
    "Campaign",
    "ConfigError",
    "parse_config",
    "dump_config",
    "run_campaign",
    "make_provider",
    "emit_selection_summary",
    "write_selection_summary",
    "SUMMARY_HEADER",
    "SELECTION_METHODS",
    "RL_METHODS",
]

SUMMARY_HEADER = "workload,system,method,chunk_mode,reward,median_total,oracle_total,degradation_pct"

RL_METHODS = ("qlearn", "sarsa")
SELECTION_METHODS = ("randomsel", "exhaustivesel", "expertsel") + RL_METHODS
_KIND_METHODS = tuple(k.value for k in ALL_KINDS)
KNOWN_METHODS = _KIND_METHODS + SELECTION_METHODS + ("oracle",)


class ConfigError(ValueError):
    """Config problem; the message carries file and line context."""


@dataclass
class Campaign:
    workloads: dict[str, WorkloadSpec]
    systems: dict[str, SystemModel]
    methods: tuple[str, ...]
    chunk_modes: tuple[str, ...] = ("default",)
    rewards: tuple[str, ...] = ("lt",)
    repetitions: int = 5
    base_seed: int = 0
    record_chunks: bool = False
    rl: RLConfig = field(default_factory=RLConfig)

    def cells(self) -> list[tuple[str, str, str, str, str]]:
        """(workload, system, method, chunk_mode, reward) for every cell."""
        out = []
        for wname in self.workloads:
            for sname in self.systems:
                for method in self.methods:
                    rewards = self.rewards if method in RL_METHODS else ("-",)
                    for mode in self.chunk_modes:
                        for rw in rewards:
                            out.append((wname, sname, method, mode, rw))
        return out


# ---------------------------------------------------------------------------
# Config parsing


def _read_sections(path) -> list[tuple[str, int, dict[str, tuple[str, int]]]]:
    sections: list[tuple[str, int, dict[str, tuple[str, int]]]] = []
    current: dict[str, tuple[str, int]] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith(";"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = {}
                sections.append((line[1:-1].strip(), lineno, current))
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value' or a [section]")
            if current is None:
                raise ConfigError(f"{path}: line {lineno}: key outside any section")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key in current:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            current[key] = (value.strip(), lineno)
    return sections


def _take(section: dict, key: str, default=None):
    return section.pop(key, (default, None))


def _parse_number(path, key, raw, lineno, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{path}: line {lineno}: {key} must be a {kind.__name__}: {raw!r}") from None


def _parse_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _reject_unknown(path, name, section):
    for key, (_, lineno) in section.items():
        raise ConfigError(f"{path}: line {lineno}: unknown key {key!r} in [{name}]")


def _parse_workload(path, name, section) -> WorkloadSpec:
    kind_raw, kind_line = _take(section, "kind")
    if kind_raw is None:
        raise ConfigError(f"{path}: [workload.{name}] is missing 'kind'")
    params = {}
    for pkey in ("cost", "sigma", "amplitude", "exponent"):
        raw, lineno = _take(section, pkey)
        if raw is not None:
            params[pkey] = _parse_number(path, pkey, raw, lineno)
    n_raw, n_line = _take(section, "n", 0)
    t_raw, t_line = _take(section, "t", 0)
    seed_raw, seed_line = _take(section, "seed", 0)
    path_raw, _ = _take(section, "path")
    if path_raw is not None and not Path(path_raw).is_absolute():
        path_raw = str(Path(path).parent / path_raw)
    _reject_unknown(path, f"workload.{name}", section)
    spec = WorkloadSpec(
        kind=kind_raw.lower(),
        n=_parse_number(path, "n", n_raw, n_line, int) if n_line else 0,
        t=_parse_number(path, "t", t_raw, t_line, int) if t_line else 0,
        params=params,
        seed=_parse_number(path, "seed", seed_raw, seed_line, int) if seed_line else 0,
        path=path_raw,
    )
    try:
        spec.validate()
    except ValueError as err:
        raise ConfigError(f"{path}: [workload.{name}] (line {kind_line}): {err}") from None
    return spec


def _parse_system(path, name, section) -> SystemModel:
    p_raw, p_line = _take(section, "p")
    if p_raw is None:
        raise ConfigError(f"{path}: [system.{name}] is missing 'p'")
    p = _parse_number(path, "p", p_raw, p_line, int)
    kwargs = {"p": p}
    h_raw, h_line = _take(section, "h")
    if h_raw is not None:
        kwargs["h"] = _parse_number(path, "h", h_raw, h_line)
    ns_raw, ns_line = _take(section, "noise_sigma")
    if ns_raw is not None:
        kwargs["noise_sigma"] = _parse_number(path, "noise_sigma", ns_raw, ns_line)
    seed_raw, seed_line = _take(section, "seed")
    if seed_raw is not None:
        kwargs["seed"] = _parse_number(path, "seed", seed_raw, seed_line, int)
    for key, attr in (("speeds", "speed"), ("offsets", "start_offset")):
        raw, lineno = _take(section, key)
        if raw is not None:
            values = [_parse_number(path, key, v, lineno) for v in _parse_list(raw)]
            if len(values) == 1:
                values = values * p
            kwargs[attr] = tuple(values)
    _reject_unknown(path, f"system.{name}", section)
    try:
        return SystemModel(**kwargs)
    except ValueError as err:
        raise ConfigError(f"{path}: [system.{name}] (line {p_line}): {err}") from None


_RL_KEYS = ("alpha", "gamma", "alpha_decay", "r_pos", "r_neutral", "r_neg")


def _parse_rl(path, section) -> RLConfig:
    kwargs = {}
    lines = {}
    for key in _RL_KEYS:
        raw, lineno = _take(section, key)
        if raw is not None:
            kwargs[key] = _parse_number(path, key, raw, lineno)
            lines[key] = lineno
    _reject_unknown(path, "rl", section)
    for key in ("alpha", "gamma"):
        if key in kwargs and not 0.0 <= kwargs[key] <= 1.0:
            raise ConfigError(f"{path}: line {lines[key]}: {key} must be within [0, 1]")
    if "alpha_decay" in kwargs and kwargs["alpha_decay"] < 0:
        raise ConfigError(f"{path}: line {lines['alpha_decay']}: alpha_decay must be >= 0")
    try:
        return RLConfig(**kwargs)
    except ValueError as err:
        anywhere = min(lines.values()) if lines else 0
        raise ConfigError(f"{path}: line {anywhere}: {err}") from None


def parse_config(path) -> Campaign:
    """Parse and validate a campaign config, rejecting unknown keys."""
    sections = _read_sections(path)
    workloads: dict[str, WorkloadSpec] = {}
    systems: dict[str, SystemModel] = {}
    campaign_section = None
    rl = RLConfig()
    for name, lineno, body in sections:
        if name.startswith("workload."):
            workloads[name[len("workload."):]] = _parse_workload(path, name[len("workload."):], body)
        elif name.startswith("system."):
            systems[name[len("system."):]] = _parse_system(path, name[len("system."):], body)
        elif name == "campaign":
            campaign_section = (lineno, body)
        elif name == "rl":
            rl = _parse_rl(path, body)
        else:
            raise ConfigError(f"{path}: line {lineno}: unknown section [{name}]")
    if not workloads:
        raise ConfigError(f"{path}: no [workload.NAME] section")
    if not systems:
        raise ConfigError(f"{path}: no [system.NAME] section")
    if campaign_section is None:
        raise ConfigError(f"{path}: missing [campaign] section")
    lineno, body = campaign_section

    methods_raw, m_line = _take(body, "methods")
    if methods_raw is None:
        raise ConfigError(f"{path}: [campaign] (line {lineno}) is missing 'methods'")
    methods = tuple(m.lower() for m in _parse_list(methods_raw))
    for m in methods:
        if m not in KNOWN_METHODS:
            raise ConfigError(
                f"{path}: line {m_line}: unknown method {m!r} (known: {', '.join(KNOWN_METHODS)})"
            )
    modes_raw, modes_line = _take(body, "chunk_modes", "default")
    modes = tuple(m.lower() for m in _parse_list(modes_raw))
    for m in modes:
        if m not in CHUNK_MODES:
            raise ConfigError(f"{path}: line {modes_line}: unknown chunk mode {m!r}")
    rewards_raw, rewards_line = _take(body, "rewards", "lt")
    rewards = tuple(r.lower() for r in _parse_list(rewards_raw))
    for r in rewards:
        if r not in ("lt", "lib"):
            raise ConfigError(f"{path}: line {rewards_line}: unknown reward {r!r} (use lt or lib)")
    reps_raw, reps_line = _take(body, "repetitions", "5")
    reps = _parse_number(path, "repetitions", reps_raw, reps_line, int)
    if reps < 1:
        raise ConfigError(f"{path}: line {reps_line or lineno}: repetitions must be >= 1")
    seed_raw, seed_line = _take(body, "seed", "0")
    seed = _parse_number(path, "seed", seed_raw, seed_line, int)
    chunks_raw, chunks_line = _take(body, "record_chunks", "false")
    if chunks_raw.lower() in ("true", "1", "yes"):
        record_chunks = True
    elif chunks_raw.lower() in ("false", "0", "no"):
        record_chunks = False
    else:
        raise ConfigError(f"{path}: line {chunks_line}: record_chunks must be true or false")
    _reject_unknown(path, "campaign", body)

    return Campaign(
        workloads=workloads,
        systems=systems,
        methods=methods,
        chunk_modes=modes,
        rewards=rewards,
        repetitions=reps,
        base_seed=seed,
        record_chunks=record_chunks,
        rl=rl,
    )


def dump_config(campaign: Campaign, path) -> None:
    """Write a config that parses back to an equal campaign."""
    lines = []
    for name, spec in campaign.workloads.items():
        lines.append(f"[workload.{name}]")
        lines.append(f"kind = {spec.kind}")
        if spec.kind == "trace":
            lines.append(f"path = {spec.path}")
        else:
            lines.append(f"n = {spec.n}")
            lines.append(f"t = {spec.t}")
            lines.append(f"seed = {spec.seed}")
            for key, value in spec.params.items():
                lines.append(f"{key} = {value!r}")
        lines.append("")
    for name, system in campaign.systems.items():
        lines.append(f"[system.{name}]")
        lines.append(f"p = {system.p}")
        lines.append(f"h = {system.h!r}")
        lines.append(f"speeds = {','.join(repr(s) for s in system.speed)}")
        lines.append(f"offsets = {','.join(repr(o) for o in system.start_offset)}")
        lines.append(f"noise_sigma = {system.noise_sigma!r}")
        lines.append(f"seed = {system.seed}")
        lines.append("")
    lines.append("[campaign]")
    lines.append(f"methods = {','.join(campaign.methods)}")
    lines.append(f"chunk_modes = {','.join(campaign.chunk_modes)}")
    lines.append(f"rewards = {','.join(campaign.rewards)}")
    lines.append(f"repetitions = {campaign.repetitions}")
    lines.append(f"seed = {campaign.base_seed}")
    lines.append(f"record_chunks = {'true' if campaign.record_chunks else 'false'}")
    lines.append("")
    lines.append("[rl]")
    rl = campaign.rl
    lines.append(f"alpha = {rl.alpha!r}")
    lines.append(f"gamma = {rl.gamma!r}")
    lines.append(f"alpha_decay = {rl.alpha_decay!r}")
    lines.append(f"r_pos = {rl.r_pos!r}")
    lines.append(f"r_neutral = {rl.r_neutral!r}")
    lines.append(f"r_neg = {rl.r_neg!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Providers and campaign execution


def make_provider(method: str, n: int, p: int, chunk_mode: str, reward: str, rl: RLConfig, seed: int):
    """Provider instance for one (cell, repetition)."""
    chunk_param = resolve_chunk_param(chunk_mode, n, p)
    if method in _KIND_METHODS:
        return ConstantProvider(kind_from_name(method), chunk_param)
    if method == "randomsel":
        return RandomSel(chunk_param, seed=seed)
    if method == "exhaustivesel":
        return ExhaustiveSel(chunk_param)
    if method == "expertsel":
        return ExpertSel(chunk_param)
    if method in RL_METHODS:
        cfg = dataclasses.replace(rl, reward_kind=reward)
        return RLProvider(method, cfg, chunk_param)
    raise ValueError(f"unknown method {method!r}")


def _cell_dir_name(wname, sname, method, mode, reward) -> str:
    parts = [wname, sname, method, mode]
    if reward != "-":
        parts.append(reward)
    return "__".join(parts)


def run_campaign(campaign: Campaign, outdir) -> list[dict]:
    """Execute every cell; write summary.csv plus per-cell selection logs.

    Repetition r runs on seed base_seed + r.  The oracle baseline is computed
    once per (workload, system, chunk_mode, repetition) and shared across
    methods; degradation is (median_total - oracle_total) / oracle_total * 100.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    loops = {name: build_workload(spec) for name, spec in campaign.workloads.items()}
    oracle_cache: dict[tuple, object] = {}

    def oracle_for(wname, sname, mode, rep):
        key = (wname, sname, mode, rep)
        if key not in oracle_cache:
            oracle_cache[key] = oracle_select(
                loops[wname], campaign.systems[sname], chunk_mode=mode,
                seed=campaign.base_seed + rep,
            )
        return oracle_cache[key]

    rows = []
    for wname, sname, method, mode, reward in campaign.cells():
        workload = loops[wname]
        system = campaign.systems[sname]
        cell_dir = outdir / _cell_dir_name(wname, sname, method, mode, reward)
        cell_dir.mkdir(parents=True, exist_ok=True)
        totals = []
        oracle_totals = []
        for rep in range(campaign.repetitions):
            seed = campaign.base_seed + rep
            oracle = oracle_for(wname, sname, mode, rep)
            oracle_totals.append(oracle.total)
            if method == "oracle":
                totals.append(oracle.total)
                entries = [
                    SelectionLogEntry(t, "oracle", kind, chunk, "stable",
                                      oracle.step_times[t], oracle.step_libs[t])
                    for t, (kind, chunk) in enumerate(oracle.choices)
                ]
            else:
                provider = make_provider(
                    method, workload.n_iterations, system.p, mode, reward, campaign.rl, seed
                )
                records = run_timesteps(
                    workload, system, provider, seed, record_chunks=campaign.record_chunks
                )
                totals.append(sum(r.t_par for r in records))
                entries = build_selection_log(method, provider, records)
                if campaign.record_chunks and rep == 0:
                    dump_chunk_trace(records, cell_dir / "chunks.csv")
            name = "selection.csv" if rep == 0 else f"selection_rep{rep}.csv"
            write_selection_log(entries, cell_dir / name)
        median_total = statistics.median(totals)
        oracle_total = statistics.median(oracle_totals)
        degradation = (median_total - oracle_total) / oracle_total * 100.0
        rows.append(
            {
                "workload": wname,
                "system": sname,
                "method": method,
                "chunk_mode": mode,
                "reward": reward,
                "median_total": median_total,
                "oracle_total": oracle_total,
                "degradation_pct": degradation,
            }
        )
    rows.sort(key=lambda r: (r["workload"], r["system"], r["method"], r["chunk_mode"], r["reward"]))
    _write_summary(rows, outdir / "summary.csv")
    return rows


def _write_summary(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r['workload']},{r['system']},{r['method']},{r['chunk_mode']},{r['reward']},"
                f"{r['median_total']:.6f},{r['oracle_total']:.6f},{r['degradation_pct']:.4f}\n"
            )


# ---------------------------------------------------------------------------
# Selection-share summaries


def emit_selection_summary(entries: Iterable[SelectionLogEntry], fold_below: float = 0.02) -> dict:
    """Per-method selection shares, rare kinds folded under 'others'.

    Returns {method: {"shares": {kind_name: fraction}, "learning_share": f}}.
    Shares are fractions of all time-steps (they sum to 1); kinds selected on
    fewer than ``fold_below`` of the steps aggregate under ``others``.  The
    learning share counts steps tagged with the learning phase.
    """
    by_method: dict[str, list[SelectionLogEntry]] = {}
    for e in entries:
        by_method.setdefault(e.method, []).append(e)
    summary = {}
    for method, items in sorted(by_method.items()):
        total = len(items)
        counts: dict[str, int] = {}
        learning = 0
        for e in items:
            counts[e.kind.value] = counts.get(e.kind.value, 0) + 1
            if e.phase == "learning":
                learning += 1
        shares: dict[str, float] = {}
        others = 0.0
        for kind_name, count in sorted(counts.items()):
            share = count / total
            if share < fold_below:
                others += share
            else:
                shares[kind_name] = share
        if others > 0:
            shares["others"] = others
        summary[method] = {"shares": shares, "learning_share": learning / total}
    return summary


def write_selection_summary(summary: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,kind,share\n")
        for method, info in summary.items():
            for kind_name, share in info["shares"].items():
                fh.write(f"{method},{kind_name},{share:.6f}\n")
            fh.write(f"{method},(learning),{info['learning_share']:.6f}\n")
