"""Command line front end: boundary tables, stream monitoring, simulations.

Subcommands share a --config option naming a JSON file whose keys mirror the
long flag names; explicitly passed flags win over file values. All output is
deterministic for fixed inputs: numbers use the period as decimal separator,
CSV values carry 12 significant digits, and no timing information is printed.

Exit codes: 0 success, 1 selftest invariant failure, 2 invalid configuration,
3 malformed input line, 4 simulation acceptance failure.
"""

from __future__ import annotations

import itertools
import json
import math
import sys

import click
import numpy as np

from . import confseq, core_bounds, validation
from .confseq import ConfSeqConfig, monitor_update, new_state
from .core_bounds import CgfEnvelope, StitchingFunctions, dual_inverse
from .errors import DivseqError
from .estimators import (
    CostSpec,
    KernelSpec,
    kl_finite,
    ks_one_sample,
    log_G_k_t,
    mmd_v,
    tv_finite,
    w1_1d,
)
from .validation import SimReport, leave_one_out_audit, run_scenario, scenario_names

_ONE_SAMPLE = ("dkw", "tv", "kl", "mean")
_TWO_SAMPLE = ("ks", "mmd", "ot")
_KINDS = _ONE_SAMPLE + _TWO_SAMPLE


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{float(v):.12g}"


def _bad(flag: str, msg: str) -> click.UsageError:
    return click.UsageError(f"{flag}: {msg}")


def _load_file_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _bad("--config", f"cannot read JSON config: {exc}")
    if not isinstance(data, dict):
        raise _bad("--config", "config file must hold a JSON object")
    return data


def _pick(flag_value, file_cfg, key, default=None):
    if flag_value is not None:
        return flag_value
    return file_cfg.get(key, default)


def _parse_range(text: str, flag: str):
    try:
        if ".." in text:
            lo_s, hi_s = text.split("..", 1)
            lo, hi = int(lo_s), int(hi_s)
            if lo < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        value = int(text)
        if value < 1:
            raise ValueError
        return [value]
    except ValueError:
        raise _bad(flag, f"expected a positive integer or A..B range, got {text!r}")


def _parse_floats(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
    except ValueError:
        raise _bad(flag, f"expected comma-separated numbers, got {text!r}")


def _parse_cost(text: str, flag: str):
    try:
        rows = [
            [float(tok) for tok in row.split(",")]
            for row in text.split(";")
        ]
        return CostSpec.matrix(rows)
    except ValueError as exc:
        raise _bad(flag, f"expected rows like '0,1;1,0': {exc}")


def _check_delta(delta, flag="--delta") -> float:
    try:
        delta = float(delta)
    except (TypeError, ValueError):
        raise _bad(flag, "a numeric error budget is required")
    if not 0.0 < delta < 1.0:
        raise _bad(flag, f"must lie strictly between 0 and 1, got {delta}")
    return delta


@click.group()
def main():
    """Anytime-valid confidence sequences for streamed divergences."""


# --- boundary ---------------------------------------------------------------

@main.command()
@click.option("--kind", default=None, help=f"one of {', '.join(_KINDS)}")
@click.option("--delta", default=None, help="error budget in (0, 1)")
@click.option("--t", "t_spec", default=None, help="time index or range A..B")
@click.option("--s", "s_spec", default=None, help="second-stream index or range")
@click.option("--mode", default=None, help="as-stated or derivation-consistent")
@click.option("--B", "kernel_bound", default=None, help="kernel sup bound (mmd)")
@click.option("--cost-bound", default=None, help="ground cost bound (ot)")
@click.option("--alphabet-size", default=None, help="category count (tv, ot bias)")
@click.option("--ref", default=None, help="reference probabilities (kl)")
@click.option("--kl-factor", default=None, help="1 or 2 (kl)")
@click.option("--dimension", default=None, help="coordinate count (mean)")
@click.option("--gamma-cov", default=None, help="direction-net radius (mean, d>=2)")
@click.option("--config", "config_path", default=None, help="JSON defaults file")
def boundary(kind, delta, t_spec, s_spec, mode, kernel_bound, cost_bound,
             alphabet_size, ref, kl_factor, dimension, gamma_cov, config_path):
    """Print a CSV table of band radii: t,s,gamma,kappa."""
    fc = _load_file_config(config_path)
    kind = _pick(kind, fc, "kind")
    if kind not in _KINDS:
        raise _bad("--kind", f"must be one of {', '.join(_KINDS)}, got {kind!r}")
    delta = _check_delta(_pick(delta, fc, "delta", 0.05))
    mode = _pick(mode, fc, "mode")
    if mode is not None and mode not in (confseq.MODE_AS_STATED, confseq.MODE_DERIVATION):
        raise _bad("--mode", f"must be {confseq.MODE_AS_STATED} or "
                             f"{confseq.MODE_DERIVATION}, got {mode!r}")
    t_spec = _pick(t_spec, fc, "t")
    if t_spec is None:
        raise _bad("--t", "a time index or range is required")
    ts = _parse_range(str(t_spec), "--t")
    s_spec = _pick(s_spec, fc, "s")

    st = StitchingFunctions.default()
    two_sample = kind in _TWO_SAMPLE
    if not two_sample and s_spec is not None:
        raise _bad("--s", f"kind {kind} monitors a single stream")
    if two_sample:
        if s_spec is None:
            raise _bad("--s", f"kind {kind} compares two streams")
        ss = _parse_range(str(s_spec), "--s")
        if len(ss) == 1:
            ss = ss * len(ts)
        elif len(ts) == 1:
            ts = ts * len(ss)
        elif len(ss) != len(ts):
            raise _bad("--s", "range length must match --t")

    def _positive(raw, flag, default, cast=float):
        value = _pick(raw, fc, flag.lstrip("-").replace("-", "_"), default)
        try:
            value = cast(value)
        except (TypeError, ValueError):
            raise _bad(flag, f"expected a number, got {value!r}")
        if value <= 0:
            raise _bad(flag, "must be positive")
        return value

    rows = []
    if kind == "dkw":
        for t in ts:
            rows.append((t, None, confseq.dkw_boundary(t, delta, st),
                         confseq.kappa_upper(t, delta, st)))
    elif kind == "tv":
        k = int(_positive(alphabet_size, "--alphabet-size", 2, int))
        eff = mode or confseq.MODE_AS_STATED
        for t in ts:
            rows.append((t, None,
                         confseq.tv_finite_boundary(t, delta, st, alphabet_size=k, mode=eff),
                         confseq.kappa_upper(t, delta, st)))
    elif kind == "kl":
        ref = _pick(ref, fc, "ref")
        if ref is None:
            raise _bad("--ref", "kind kl needs reference probabilities")
        p = _parse_floats(str(ref), "--ref")
        factor = int(_positive(kl_factor, "--kl-factor", 2, int))
        try:
            curve = confseq.kl_gamma_curve(max(ts), delta, st, p=p, factor=factor)
        except DivseqError as exc:
            raise _bad("--ref", str(exc))
        except ValueError as exc:
            raise _bad("--ref", str(exc))
        for t in ts:
            rows.append((t, None, float(curve[t - 1]), math.inf))
    elif kind == "mean":
        d = int(_positive(dimension, "--dimension", 1, int))
        gcov = float(_positive(gamma_cov, "--gamma-cov", 0.5))
        if d >= 2 and not gcov < 1.0:
            raise _bad("--gamma-cov", "must lie in (0, 1)")
        for t in ts:
            g = confseq.mean_boundary(t, delta, st, d=d, gamma_cov=gcov)
            rows.append((t, None, g, g))
    elif kind == "ks":
        eff = mode or confseq.MODE_DERIVATION
        for t, s in zip(ts, ss):
            pair = confseq.ks_two_sample_boundary(t, s, delta, st, eff)
            rows.append((t, s, pair.gamma, pair.kappa))
    elif kind == "mmd":
        b = _positive(kernel_bound, "--B", 1.0)
        eff = mode or confseq.MODE_AS_STATED
        for t, s in zip(ts, ss):
            pair = confseq.mmd_boundary(t, s, delta, st, kernel_bound=b, mode=eff)
            rows.append((t, s, pair.gamma, pair.kappa))
    else:
        d_cost = _positive(cost_bound, "--cost-bound", 1.0)
        k = int(_positive(alphabet_size, "--alphabet-size", 2, int))
        bias = confseq._ot_default_bias(d_cost, k)
        eff = mode or confseq.MODE_DERIVATION
        for t, s in zip(ts, ss):
            pair = confseq.ot_boundary(t, s, delta, st, cost_bound=d_cost,
                                       bias_bound=bias, mode=eff)
            rows.append((t, s, pair.gamma, pair.kappa))

    click.echo("t,s,gamma,kappa")
    for t, s, g, kap in rows:
        s_txt = "" if s is None else str(s)
        click.echo(f"{t},{s_txt},{_fmt(g)},{_fmt(kap)}")


# --- monitor ----------------------------------------------------------------

_FIELD_FLAGS = (
    ("kernel", "--bandwidth"),
    ("cost", "--cost"),
    ("reference", "--ref"),
    ("kl_factor", "--kl-factor"),
    ("dimension", "--dimension"),
    ("gamma_cov", "--gamma-cov"),
    ("mode", "--mode"),
    ("delta", "--delta"),
    ("kind", "--kind"),
)


def _flag_for(message: str) -> str:
    for field, flag in _FIELD_FLAGS:
        if field in message:
            return flag
    return "--kind"


def _coerce_line(cfg: ConfSeqConfig, tokens):
    if cfg.kind in ("tv", "kl", "ot"):
        if len(tokens) != 1:
            raise ValueError("categorical kinds take a single integer category")
        return int(tokens[0])
    if cfg.kind == "mean" and cfg.dimension > 1:
        if len(tokens) != cfg.dimension:
            raise ValueError(f"expected {cfg.dimension} coordinates")
        return np.array([float(tok) for tok in tokens], dtype=np.float64)
    if len(tokens) != 1:
        raise ValueError("expected a single numeric value")
    return float(tokens[0])


@main.command()
@click.option("--kind", default=None, help=f"one of {', '.join(_KINDS)}")
@click.option("--delta", default=None, help="error budget in (0, 1)")
@click.option("--mode", default=None, help="as-stated or derivation-consistent")
@click.option("--ref", default=None, help="reference probabilities (tv, kl)")
@click.option("--bandwidth", default=None, help="Gaussian kernel bandwidth (mmd)")
@click.option("--cost", default=None, help="cost matrix rows '0,1;1,0' (ot)")
@click.option("--dimension", default=None, help="coordinate count (mean)")
@click.option("--gamma-cov", default=None, help="direction-net radius (mean, d>=2)")
@click.option("--mean-target", default=None, help="hypothesized mean (mean)")
@click.option("--kl-factor", default=None, help="1 or 2 (kl)")
@click.option("--config", "config_path", default=None, help="JSON defaults file")
@click.option("--input", "input_path", default="-", help="lines 'stream,value'; - for stdin")
def monitor(kind, delta, mode, ref, bandwidth, cost, dimension, gamma_cov,
            mean_target, kl_factor, config_path, input_path):
    """Stream observations and emit one JSON record per line.

    Input lines read 'x,VALUE' or 'y,VALUE'; vector values pass extra
    comma-separated coordinates. Records carry t, s, estimate, lower,
    upper, reject and are flushed as they are produced. A malformed line
    stops processing with exit code 3 and leaves the state as it was
    before that line.
    """
    fc = _load_file_config(config_path)
    kind = _pick(kind, fc, "kind")
    if kind not in _KINDS:
        raise _bad("--kind", f"must be one of {', '.join(_KINDS)}, got {kind!r}")
    delta = _check_delta(_pick(delta, fc, "delta", 0.05))
    mode = _pick(mode, fc, "mode")
    ref = _pick(ref, fc, "ref")
    bandwidth = _pick(bandwidth, fc, "bandwidth", 1.0 if kind == "mmd" else None)
    cost = _pick(cost, fc, "cost")
    dimension = int(_pick(dimension, fc, "dimension", 1))
    gamma_cov = float(_pick(gamma_cov, fc, "gamma_cov", 0.5))
    mean_target = _pick(mean_target, fc, "mean_target")
    kl_factor = int(_pick(kl_factor, fc, "kl_factor", 2))

    kernel = None
    if kind == "mmd":
        try:
            kernel = KernelSpec.gaussian_rbf(float(bandwidth))
        except ValueError as exc:
            raise _bad("--bandwidth", str(exc))
    cost_spec = _parse_cost(str(cost), "--cost") if cost is not None else None
    reference = _parse_floats(str(ref), "--ref") if ref is not None else None
    target = (
        _parse_floats(str(mean_target), "--mean-target")
        if mean_target is not None
        else None
    )

    cfg = ConfSeqConfig(
        kind=kind,
        delta=delta,
        mode=mode,
        kernel=kernel,
        cost=cost_spec,
        reference=reference,
        dimension=dimension,
        gamma_cov=gamma_cov,
        mean_target=target,
        kl_factor=kl_factor,
    )
    try:
        state = new_state(cfg)
    except (DivseqError, ValueError) as exc:
        raise _bad(_flag_for(str(exc)), str(exc))

    source = sys.stdin if input_path == "-" else open(input_path, "r", encoding="utf-8")
    try:
        for lineno, raw in enumerate(source, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split(",")
            stream = tokens[0].strip()
            try:
                if stream not in ("x", "y"):
                    raise ValueError(f"stream must be x or y, got {stream!r}")
                value = _coerce_line(cfg, [tok.strip() for tok in tokens[1:]])
                record = monitor_update(state, value, stream)
            except (DivseqError, ValueError) as exc:
                click.echo(f"line {lineno}: {exc}", err=True)
                sys.exit(3)
            payload = {
                "t": record.t,
                "s": record.s,
                "estimate": record.estimate,
                "lower": record.lower,
                "upper": record.upper,
                "reject": record.reject_null,
            }
            click.echo(json.dumps(payload))
            sys.stdout.flush()
    finally:
        if source is not sys.stdin:
            source.close()


# --- simulate -----------------------------------------------------------------

@main.command()
@click.option("--scenario", default=None, help=f"one of {', '.join(scenario_names())}")
@click.option("--T", "--horizon", "horizon", default=None, type=int,
              help="stream length per replicate")
@click.option("--R", "--replications", "replications", default=None, type=int,
              help="replicate count; 1 skips the pass gate")
@click.option("--delta", default=None, help="error budget in (0, 1)")
@click.option("--seed", default=0, type=int, help="root seed")
@click.option("--config", "config_path", default=None, help="JSON defaults file")
def simulate(scenario, horizon, replications, delta, seed, config_path):
    """Run a named validation scenario and print its one-line report.

    Exits 0 when the scenario's acceptance predicate holds, 4 when it
    fails. A single-replicate run prints its report without judging it,
    since one trajectory carries no usable error bar.
    """
    fc = _load_file_config(config_path)
    scenario = _pick(scenario, fc, "scenario")
    if scenario not in scenario_names():
        raise _bad("--scenario",
                   f"must be one of {', '.join(scenario_names())}, got {scenario!r}")
    horizon = _pick(horizon, fc, "horizon")
    replications = _pick(replications, fc, "replications")
    delta = _pick(delta, fc, "delta")
    if delta is not None:
        delta = _check_delta(delta)
    if horizon is not None and int(horizon) < 1:
        raise _bad("--T", "must be a positive integer")
    if replications is not None and int(replications) < 1:
        raise _bad("--R", "must be a positive integer")
    try:
        report, passed = run_scenario(
            scenario, horizon=horizon, replications=replications,
            delta=delta, seed=int(seed),
        )
    except (DivseqError, ValueError) as exc:
        raise _bad("--scenario", str(exc))
    click.echo(report.to_line())
    if isinstance(report, SimReport) and report.replications == 1:
        return
    if not passed:
        sys.exit(4)


# --- selftest --------------------------------------------------------------------

def _check_stitching_budgets():
    for alpha in (1.5, 2.0):
        one, two = validation.stitching_budgets(alpha, kmax=100_000)
        if one > 1.0 + 1e-10:
            return f"one-stream budget sums to {one!r} at alpha={alpha}"
        if two > 1.0 + 1e-10:
            return f"two-stream budget sums to {two!r} at alpha={alpha}"
    return None


def _check_dual_closed_forms():
    env = CgfEnvelope.subgaussian(0.0, 2.0)
    for y in (0.1, 1.0, 5.0):
        want = math.sqrt(2.0 * y * 2.0)
        if abs(dual_inverse(env, y) - want) > 1e-12:
            return f"sub-Gaussian dual inverse off at level {y}"
    env = CgfEnvelope.subexponential(0.0, 1.5, 0.7)
    for y in (0.5, 1.0, 3.0, 8.0):
        if y < 1.5 / (2.0 * 0.7 * 0.7):
            want = math.sqrt(2.0 * 1.5 * y)
        else:
            want = 0.7 * y + 1.5 / (2.0 * 0.7)
        if abs(dual_inverse(env, y) - want) > 1e-12:
            return f"sub-exponential dual inverse off at level {y}"
    return None


def _check_estimator_oracles():
    rng = np.random.default_rng(12345)
    x = rng.uniform(size=8)
    y = rng.uniform(size=8)
    kernel = KernelSpec.gaussian_rbf(0.8)
    sxx = syy = sxy = 0.0
    for i in range(8):
        for j in range(8):
            sxx += float(kernel.gram([x[i]], [x[j]])[0, 0])
            syy += float(kernel.gram([y[i]], [y[j]])[0, 0])
            sxy += float(kernel.gram([x[i]], [y[j]])[0, 0])
    want = math.sqrt(max(0.0, (sxx + syy - 2.0 * sxy) / 64.0))
    if abs(mmd_v(x, y, kernel) - want) > 1e-12:
        return "kernel discrepancy disagrees with the explicit double loop"
    pair = float(np.mean(np.abs(np.sort(x) - np.sort(y))))
    if abs(w1_1d(x, y) - pair) > 1e-12:
        return "line transport disagrees with sorted pairing"
    if abs(tv_finite(np.array([1, 3]), np.array([0.25, 0.75]))) > 1e-15:
        return "half-L1 of a matching histogram is not zero"
    want_kl = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    if abs(kl_finite(np.array([3, 1]), np.array([0.5, 0.5])) - want_kl) > 1e-12:
        return "relative entropy disagrees with the hand value"
    ks = ks_one_sample(np.array([0.2, 0.6]), lambda q: np.clip(q, 0.0, 1.0))
    if abs(ks - 0.4) > 1e-15:
        return "sup-distance disagrees with the hand value"
    return None


def _check_tilt_normalizer():
    p = np.array([0.3, 0.7])
    for lam in (0.3, 1.0):
        for t in range(1, 6):
            total = 0.0
            for c in range(t + 1):
                term = (lam * c / t + (1.0 - lam) * p[0]) ** c
                term *= (lam * (t - c) / t + (1.0 - lam) * p[1]) ** (t - c)
                total += math.comb(t, c) * term
            if abs(log_G_k_t(lam, p, t) - math.log(total)) > 1e-12:
                return f"tilt normalizer off at t={t}, lambda={lam}"
    return None


def _check_scanner_parity():
    from . import _slowpath

    try:
        from . import _fastpath
    except ImportError:
        return None  # pure backend only; nothing to compare
    rng = np.random.default_rng(77)
    u = rng.uniform(size=800)
    gamma = 1.1 / np.sqrt(np.arange(1, 801))
    if _fastpath.ks1_first_crossing(u, gamma) != _slowpath.ks1_first_crossing(u, gamma):
        return "one-sample crossing scanners disagree"
    xu = rng.uniform(size=300)
    yu = rng.uniform(size=300)
    steps = np.arange(1, 601)
    g2 = 1.3 / np.sqrt(np.maximum(steps // 2, 1))
    if _fastpath.ks2_first_crossing(xu, yu, g2) != _slowpath.ks2_first_crossing(
        xu, yu, g2
    ):
        return "two-sample crossing scanners disagree"
    return None


def _check_removal_averaging():
    for kind in ("tv", "ks", "mmd_u"):
        if not leave_one_out_audit(kind, alphabet_size=2, t_max=3).passed:
            return f"removal averaging violated for {kind}"
    return None


_SELFTEST_CHECKS = (
    ("stitching-budget-sum", _check_stitching_budgets),
    ("dual-inverse-closed-forms", _check_dual_closed_forms),
    ("estimator-oracles", _check_estimator_oracles),
    ("tilt-normalizer-enumeration", _check_tilt_normalizer),
    ("crossing-scanner-parity", _check_scanner_parity),
    ("removal-averaging", _check_removal_averaging),
)


@main.command()
@click.option("--corrupt-zeta", is_flag=True, hidden=True,
              help="fault hook: poison the zeta table before checking")
def selftest(corrupt_zeta):
    """Run the fast invariant suite; exit 1 on the first broken invariant."""
    restore = None
    if corrupt_zeta:
        original = core_bounds._zeta
        core_bounds._zeta = lambda alpha: 0.999 * original(alpha)
        restore = original
    try:
        failures = 0
        for name, check in _SELFTEST_CHECKS:
            detail = check()
            if detail is None:
                click.echo(f"ok {name}")
            else:
                failures += 1
                click.echo(f"FAIL {name}: {detail}")
        click.echo(
            f"selftest: {len(_SELFTEST_CHECKS) - failures}/{len(_SELFTEST_CHECKS)} "
            "checks passed"
        )
        if failures:
            sys.exit(1)
    finally:
        if restore is not None:
            core_bounds._zeta = restore


if __name__ == "__main__":
    main()
