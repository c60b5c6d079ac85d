"""Command-line front end: synthesize, filter, control, sweep, verify.

Exit codes: 0 when every reported check passes, 1 when any summary line says
FAIL, 2 on configuration or synthesis errors.
"""

from __future__ import annotations

import argparse
import sys as _sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .control import ControlConfig, closed_loop_sim, empirical_cost
from .filtering import FilterConfig, run_filter_comparison
from .linalg import NotStableError
from .noise import GENERATOR_ID, DisturbanceSource
from .records import write_csv
from .synthesis import (
    beta_for_control,
    beta_for_filter,
    control_factorization,
    dare_residual,
    filter_factorization,
    solve_dare,
)
from .verify import run_verification


def _mat_str(mat) -> str:
    return np.array2string(np.asarray(mat), precision=12, suppress_small=False,
                           separator=", ", max_line_width=120)


def _resolve_beta(config: ExperimentConfig, gains, kind: str) -> tuple[float, str]:
    if config.beta is not None:
        return config.beta, "explicit"
    if kind == "filter":
        return beta_for_filter(config.system, gains, config.window, config.eps), "derived"
    return beta_for_control(config.system, gains, config.window, config.eps), "derived"


def cmd_synthesize(config: ExperimentConfig) -> int:
    sys_ = config.system
    gains = config.resolve_gains()
    print(f"gains ({gains.provenance})")
    print(f"L = {_mat_str(gains.estimator_gain)}")
    pred_cov = solve_dare(sys_.trans.T, sys_.obs_map.T, sys_.w_cov, sys_.v_cov)
    print(f"filter riccati residual = {dare_residual(sys_.trans.T, sys_.obs_map.T, sys_.w_cov, sys_.v_cov, pred_cov):.3e}")
    if gains.has_feedback:
        print(f"K = {_mat_str(gains.feedback_gain)}")
        ctrl_cov = solve_dare(sys_.trans, sys_.input_map, config.cost.state_weight,
                              config.cost.control_weight)
        print(f"control riccati residual = {dare_residual(sys_.trans, sys_.input_map, config.cost.state_weight, config.cost.control_weight, ctrl_cov):.3e}")
    fact = filter_factorization(sys_, gains)
    print(f"filter factorization: contraction norm = {fact.contraction_norm:.12g}, "
          f"conditioning = {fact.conditioning:.12g}")
    beta_f = beta_for_filter(sys_, gains, config.window, config.eps)
    print(f"beta (filter, window {config.window}, eps {config.eps:g}) = {beta_f:.12g}")
    if gains.has_feedback:
        cfact = control_factorization(sys_, gains)
        print(f"control factorization: contraction norm = {cfact.contraction_norm:.12g}, "
              f"conditioning = {cfact.conditioning:.12g}")
        beta_c = beta_for_control(sys_, gains, config.window, config.eps)
        print(f"beta (control, window {config.window}, eps {config.eps:g}) = {beta_c:.12g}")
    return 0


def cmd_filter(config: ExperimentConfig) -> int:
    gains = config.resolve_gains()
    beta, source = _resolve_beta(config, gains, "filter")
    filter_cfg = FilterConfig(gains=gains, window=config.window, beta=beta, mode=config.mode)
    noise = DisturbanceSource(config.system, config.noise, config.seed)
    record = run_filter_comparison(config.system, filter_cfg, config.horizon, noise)
    record.metadata["eps"] = config.eps
    record.metadata["beta_source"] = source
    if config.preset:
        record.metadata["preset"] = config.preset
    out = config.out or "filter.csv"
    record.to_csv(out)
    ok = record.sup_error <= config.eps
    print(f"filter: sup estimate error {record.sup_error:.6e} vs eps {config.eps:g} "
          f"(beta {beta:.6g} {source}) -> {'PASS' if ok else 'FAIL'} [{out}]")
    return 0 if ok else 1


def cmd_control(config: ExperimentConfig) -> int:
    if config.system.m == 0:
        raise ConfigError("the control command needs an actuated system (m >= 1)")
    gains = config.resolve_gains()
    if not gains.has_feedback:
        raise ConfigError("the control command needs a feedback gain; "
                          "user gain mode must supply K")
    beta, source = _resolve_beta(config, gains, "control")
    control_cfg = ControlConfig(gains=gains, cost=config.cost, window=config.window,
                                beta=beta, mode=config.mode)
    noise = DisturbanceSource(config.system, config.noise, config.seed)
    record = closed_loop_sim(config.system, control_cfg, config.horizon, noise)
    record.metadata["eps"] = config.eps
    record.metadata["beta_source"] = source
    if config.preset:
        record.metadata["preset"] = config.preset
    out = config.out or "control.csv"
    record.to_csv(out)
    ok = record.sup_state_error <= config.eps
    cost_tf = float(record.metadata["cost_transformer"])
    cost_ref = float(record.metadata["cost_lqg"])
    print(f"control: sup state error {record.sup_state_error:.6e} vs eps {config.eps:g} "
          f"(beta {beta:.6g} {source}), cost {cost_tf:.6f} vs lqg {cost_ref:.6f} "
          f"-> {'PASS' if ok else 'FAIL'} [{out}]")
    return 0 if ok else 1


def cmd_sweep(config: ExperimentConfig) -> int:
    if config.system.m == 0:
        raise ConfigError("sweep needs an actuated system (m >= 1)")
    if config.beta_grid is None and config.eps_grid is None:
        raise ConfigError("sweep needs beta_grid or eps_grid in the config")
    gains = config.resolve_gains()
    rows = []
    grid = config.beta_grid if config.beta_grid is not None else config.eps_grid
    for point in grid:
        if config.beta_grid is not None:
            beta = float(point)
        else:
            # one shared temperature satisfying both tracking bounds
            beta = max(beta_for_filter(config.system, gains, config.window, float(point)),
                       beta_for_control(config.system, gains, config.window, float(point)))
        filter_cfg = FilterConfig(gains=gains, window=config.window, beta=beta,
                                  mode=config.mode)
        control_cfg = ControlConfig(gains=gains, cost=config.cost, window=config.window,
                                    beta=beta, mode=config.mode)
        fnoise = DisturbanceSource(config.system, config.noise, config.seed)
        frecord = run_filter_comparison(config.system, filter_cfg, config.horizon, fnoise)
        cnoise = DisturbanceSource(config.system, config.noise, config.seed)
        crecord = closed_loop_sim(config.system, control_cfg, config.horizon, cnoise)
        gap = abs(empirical_cost(crecord, config.cost, "transformer")
                  - empirical_cost(crecord, config.cost, "lqg"))
        rows.append([beta, frecord.sup_error, crecord.sup_state_error, gap])
    metadata = {
        "kind": "sweep",
        "seed": config.seed,
        "generator": GENERATOR_ID,
        "grid": "beta" if config.beta_grid is not None else "eps",
        "window": config.window,
        "horizon": config.horizon,
        "noise_kind": config.noise.kind,
        "noise_scale": config.noise.scale,
        "noise_clip": config.noise.clip,
    }
    out = config.out or "sweep.csv"
    write_csv(out, metadata, ["beta", "sup_filter_error", "sup_state_error", "cost_gap"], rows)
    print(f"sweep: {len(rows)} grid points [{out}]")
    return 0


def cmd_verify(config: ExperimentConfig) -> int:
    results = run_verification(config)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


_COMMANDS = {
    "synthesize": cmd_synthesize,
    "filter": cmd_filter,
    "control": cmd_control,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfilter",
        description="Softmax-attention filtering/control experiments against "
                    "optimal linear references.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synthesize": "synthesize gains and report certificates and temperatures",
        "filter": "paired filtering run; CSV trajectory plus a PASS/FAIL summary",
        "control": "paired closed-loop run; CSV trajectory plus a PASS/FAIL summary",
        "sweep": "temperature or accuracy sweep; one CSV row per grid point",
        "verify": "run the built-in verification checks, one PASS/FAIL line each",
    }
    for name in _COMMANDS:
        cmd = sub.add_parser(name, help=helps[name])
        cmd.add_argument("--config", default=None, help="JSON experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
        cmd.add_argument("--out", default=None, help="output CSV path")
        cmd.add_argument("--beta", type=float, default=None, help="explicit temperature")
        cmd.add_argument("--eps", type=float, default=None, help="tracking accuracy target")
        cmd.add_argument("--horizon", type=int, default=None, help="number of steps")
        cmd.add_argument("--window", type=int, default=None, help="attention window length")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed, beta=args.beta, eps=args.eps,
                             horizon=args.horizon, window=args.window, out=args.out)
        return _COMMANDS[args.command](config)
    except (ConfigError, NotStableError, OverflowError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
