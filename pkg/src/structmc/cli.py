"""Command-line interface.

Subcommands: gen, observe, estimate, rates, packing, bench. All output is
canonical JSON (sorted keys, 2-space indent) or CSV, so identical inputs and
seeds produce byte-identical bytes (bench timing defaults to the "zero"
mode; opt into wall-clock seconds with --timing wall). Exit codes: 0
success, 2 configuration error, 3 budget refusal.
"""

from __future__ import annotations

import json
import sys

import click

from .bench import BudgetError, bench_config_from_obj, rows_to_csv, run_experiment, summarize
from .core import (
    ParameterError,
    ShapeError,
    assemble,
    dumps_canonical,
    factorization_to_obj,
    load_json,
    matrix_from_obj,
    matrix_to_obj,
    observation_from_obj,
    observation_to_obj,
    spec_from_obj,
    spec_to_obj,
)
from .estimators import (
    EnumerationRefusal,
    SolverConfig,
    adaptive_penalized,
    block_coordinate_ls,
    exact_least_squares,
    hard_threshold,
)
from .packing import (
    ConstructionError,
    build_t_b,
    build_t_z,
    sign_embedding,
    sparse_binary_packing,
)
from .rates import (
    covering_bounds,
    covering_min_bound,
    critical_radius,
    family_rate,
    penalty,
    rate_components,
)
from .simulate import ModelFamily, NoiseKind, generate, observe, sample_mask, sample_noise

__all__ = ["main"]

_FAMILIES = ("mixture", "dictionary", "sbm", "mixed_membership", "biclustering", "generic")


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _parse_ints(csv_text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in csv_text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated integers, got {csv_text!r}") from exc


def _build_family(name: str, args_csv: str | None, spec_file: str | None) -> ModelFamily:
    if name == "generic":
        if not spec_file:
            raise ParameterError("generic family needs --spec")
        return ModelFamily.generic(spec_from_obj(load_json(spec_file)))
    if not args_csv:
        raise ParameterError(f"family {name!r} needs --args (constructor integers)")
    return getattr(ModelFamily, name)(*_parse_ints(args_csv))


def _build_noise(kind: str, sigma: float, scale: float, b: float | None) -> NoiseKind:
    if kind == "none":
        return NoiseKind.none()
    if kind == "gaussian":
        return NoiseKind.gaussian(sigma)
    if kind == "rademacher":
        return NoiseKind.rademacher(scale)
    if kind == "uniform":
        if b is None:
            raise ParameterError("uniform noise needs --b")
        return NoiseKind.uniform_bounded(b)
    if kind == "truncated_gaussian":
        if b is None:
            raise ParameterError("truncated_gaussian noise needs --b")
        return NoiseKind.truncated_gaussian(sigma, b)
    raise ParameterError(f"unknown noise kind {kind!r}")


@click.group()
def cli():
    """Structured matrix estimation and completion toolkit."""


@cli.command("gen")
@click.option("--family", required=True, type=click.Choice(_FAMILIES))
@click.option("--args", "args_csv", default=None, help="comma-separated family parameters")
@click.option("--spec", "spec_file", default=None, help="spec JSON file (generic family)")
@click.option("--seed", default=0, type=int)
@click.option("--out-theta", default=None, help="write the ground truth matrix here")
@click.option("--out-factorization", default=None, help="write the (X, B, Z) triple here")
@click.option("--out-spec", default=None, help="write the class description here")
def gen_cmd(family, args_csv, spec_file, seed, out_theta, out_factorization, out_spec):
    """Draw a ground-truth factorization from a model family."""
    fam = _build_family(family, args_csv, spec_file)
    fact, spec = generate(fam, seed)
    theta = assemble(fact)
    wrote = False
    if out_theta:
        _emit(dumps_canonical(matrix_to_obj(theta)), out_theta)
        wrote = True
    if out_factorization:
        _emit(dumps_canonical(factorization_to_obj(fact)), out_factorization)
        wrote = True
    if out_spec:
        _emit(dumps_canonical(spec_to_obj(spec)), out_spec)
        wrote = True
    if not wrote:
        _emit(dumps_canonical({"spec": spec_to_obj(spec), "theta": matrix_to_obj(theta)}), None)


@cli.command("observe")
@click.option("--theta", "theta_file", required=True, help="ground truth matrix JSON")
@click.option("--p", required=True, type=float, help="Bernoulli sampling probability")
@click.option("--noise", "noise_kind", default="none",
              type=click.Choice(["none", "gaussian", "rademacher", "uniform", "truncated_gaussian"]))
@click.option("--sigma", default=0.0, type=float)
@click.option("--scale", default=0.0, type=float)
@click.option("--b", default=None, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
def observe_cmd(theta_file, p, noise_kind, sigma, scale, b, seed, out):
    """Mask and corrupt a ground-truth matrix."""
    theta = matrix_from_obj(load_json(theta_file))
    kind = _build_noise(noise_kind, sigma, scale, b)
    n, m = theta.shape
    mask = sample_mask(n, m, p, seed)
    noise = sample_noise(kind, n, m, seed)
    obs = observe(theta, mask, noise, p, sigma=kind.proxy_sigma, b=kind.bound)
    _emit(dumps_canonical(observation_to_obj(obs)), out)


@cli.command("estimate")
@click.option("--method", required=True, type=click.Choice(["exact", "bcd", "svt", "adaptive"]))
@click.option("--obs", "obs_file", required=True)
@click.option("--spec", "spec_file", required=True)
@click.option("--lambda", "lam", default=None, type=float, help="threshold (svt) or penalty weight (adaptive)")
@click.option("--restarts", default=5, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
def estimate_cmd(method, obs_file, spec_file, lam, restarts, seed, out):
    """Run an estimator on an observation file."""
    obs = observation_from_obj(load_json(obs_file))
    spec = spec_from_obj(load_json(spec_file))
    cfg = SolverConfig(restarts=restarts)
    if method == "exact":
        res = exact_least_squares(obs, spec, cfg)
    elif method == "bcd":
        res = block_coordinate_ls(obs, spec, cfg, seed)
    elif method == "svt":
        if lam is None:
            raise ParameterError("svt needs --lambda")
        res = hard_threshold(obs, lam)
    else:
        if lam is None:
            raise ParameterError("adaptive needs --lambda")
        res = adaptive_penalized(obs, spec, lam, cfg, seed)
    payload = {
        "theta_hat": matrix_to_obj(res.theta_hat),
        "objective": res.objective,
        "selected_s": list(res.selected_s) if res.selected_s is not None else None,
        "iterations": res.iterations,
    }
    _emit(dumps_canonical(payload), out)


@cli.command("rates")
@click.option("--spec", "spec_file", required=True)
@click.option("--family", "family_name", default=None, type=click.Choice(_FAMILIES[:-1]))
@click.option("--args", "args_csv", default=None, help="family parameters for --family")
@click.option("--sigma", default=None, type=float)
@click.option("--p", default=None, type=float)
@click.option("--penalty", "penalty_s", default=None, help="s_n,s_m for the selection penalty")
@click.option("--epsilon0", is_flag=True, default=False, help="solve for the critical radius")
@click.option("--u", default=1.0, type=float, help="sup-norm radius for covering bounds")
@click.option("--out", default=None)
def rates_cmd(spec_file, family_name, args_csv, sigma, p, penalty_s, epsilon0, u, out):
    """Report rate components, closed-form family rates, penalties, and
    covering / critical-radius quantities for a class."""
    spec = spec_from_obj(load_json(spec_file))
    report = rate_components(spec, sigma=sigma, p=p)
    payload = {
        "components": {
            "r_x": report.r_x, "r_b": report.r_b, "r_z": report.r_z,
            "total": report.total,
            "frobenius_lower": report.frobenius_lower,
            "spectral_lower": report.spectral_lower,
        }
    }
    if family_name:
        fam = _build_family(family_name, args_csv, None)
        payload["family_rate"] = family_rate(fam)
    if penalty_s:
        s_n, s_m = _parse_ints(penalty_s)
        payload["penalty"] = {"s_n": s_n, "s_m": s_m, "value": penalty(s_n, s_m, spec)}
    if epsilon0:
        eps0 = critical_radius(spec.n * spec.m, covering_min_bound(spec, u))
        cov = covering_bounds(spec, u, eps0)
        payload["covering"] = {
            "r1": cov.r1, "r2": cov.r2, "r3": cov.r3, "r4": cov.r4,
            "epsilon": cov.epsilon, "u": cov.u, "epsilon0": eps0,
            "min_bound": cov.min_bound,
        }
    _emit(dumps_canonical(payload), out)


@cli.command("packing")
@click.option("--kind", required=True, type=click.Choice(["tz", "tb", "code", "embed"]))
@click.option("--spec", "spec_file", default=None, help="spec JSON (tz/tb)")
@click.option("--sigma", default=1.0, type=float)
@click.option("--p", default=1.0, type=float)
@click.option("--c0", default=1.0, type=float)
@click.option("--cap", default=64, type=int)
@click.option("--k", default=None, type=int, help="ambient dimension (code)")
@click.option("--s", default=None, type=int, help="codeword weight (code)")
@click.option("--r", default=None, type=int, help="embedding rows (embed)")
@click.option("--vectors", "vectors_file", default=None, help="matrix JSON of vectors to embed")
@click.option("--max-resamples", default=100, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None)
def packing_cmd(kind, spec_file, sigma, p, c0, cap, k, s, r, vectors_file, max_resamples, seed, out):
    """Build packings, sign embeddings, or certified hypothesis sets."""
    if kind == "code":
        if k is None or s is None:
            raise ParameterError("--kind code needs --k and --s")
        pk = sparse_binary_packing(k, s, seed=seed)
        payload = {
            "kind": "code", "k": pk.k, "s": pk.s,
            "constants": list(pk.constants),
            "codewords": matrix_to_obj(pk.codewords),
            "seed": seed,
        }
    elif kind == "embed":
        if r is None or not vectors_file:
            raise ParameterError("--kind embed needs --r and --vectors")
        vectors = matrix_from_obj(load_json(vectors_file))
        q = sign_embedding(r, vectors, seed=seed, max_resamples=max_resamples)
        payload = {"kind": "embed", "r": r, "q": matrix_to_obj(q), "seed": seed}
    else:
        if not spec_file:
            raise ParameterError(f"--kind {kind} needs --spec")
        spec = spec_from_obj(load_json(spec_file))
        build = build_t_z if kind == "tz" else build_t_b
        hs = build(spec, sigma, p, c0, seed=seed, cap=cap)
        payload = {
            "kind": hs.kind, "delta": hs.delta,
            "min_sq_distance": hs.min_sq_distance, "max_kl": hs.max_kl,
            "sigma": sigma, "p": p, "c0": c0, "seed": seed,
            "thetas": [matrix_to_obj(t) for t in hs.thetas],
        }
    _emit(dumps_canonical(payload), out)


@cli.command("bench")
@click.option("--config", "config_file", required=True)
@click.option("--out", default=None, help="CSV path (overrides the config's)")
@click.option("--timing", default=None, type=click.Choice(["zero", "wall"]),
              help="seconds column mode (overrides the config's)")
def bench_cmd(config_file, out, timing):
    """Run a Monte Carlo experiment from a JSON config."""
    obj = load_json(config_file)
    if out is not None:
        obj["out"] = out
    if timing is not None:
        obj["timing"] = timing
    cfg = bench_config_from_obj(obj)
    rows = run_experiment(cfg)
    if cfg.out:
        if any(r.status == "ok" for r in rows):
            click.echo(str(summarize(rows)))
        else:
            click.echo("all rows failed; no summary", err=True)
    else:
        click.echo(rows_to_csv(rows), nl=False)


def main(argv=None) -> int:
    """Entry point; returns 0 on success, 2 on config errors, 3 on refusals."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 2
    except (EnumerationRefusal, BudgetError, ConstructionError) as exc:
        click.echo(f"refused: {exc}", err=True)
        return 3
    except (ParameterError, ShapeError, ValueError, KeyError, TypeError,
            OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
