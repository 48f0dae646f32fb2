"""simplex-drift command line: extract, simulate, fit, predict, select, diagnose.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as cfgmod
from .baselines import HomogeneousFit, fit_homogeneous
from .diagnostics import UndefinedMeanError, circular_summary, recovery_report, rhat
from .em_init import EmConfig, run_em
from .geometry import extract_direction, reconstruct_endpoint
from .io import (DataError, read_chain_archive, read_directions_csv, read_json, read_pairs_csv,
                 spec_hash, write_chain_archive, write_directions_csv, write_json)
from .model import Dataset, component_factors, prepare_dataset
from .sampler import run_chain, tune_step_size
from .selection import PredictiveReport, SpatialFit, predictive_from_fit, select_model
from .simulate import GroundTruth, endpoints, generate

log = logging.getLogger("simplex_drift")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SIMPLEX_DRIFT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise cfgmod.ConfigError(f"SIMPLEX_DRIFT_THREADS must be an integer, got {env!r}") from exc
    return 1


def _load(args):
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.RunConfig()
    seed = cfg.seed if args.seed is None else args.seed
    return cfg, seed


def _out(args, name):
    return os.path.join(args.output, name)


def _need(value, what):
    if not value:
        raise cfgmod.ConfigError(f"missing {what}")
    return value


def _dataset(path):
    ids, locs, theta2, dirs = read_directions_csv(path)
    try:
        data, counts = prepare_dataset(locs, dirs, degenerate=theta2 <= 0.0)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return data, counts


# ---------------------------------------------------------------------------
# extract

def cmd_extract(args):
    pairs = args.input or _load(args)[0].paths.pairs
    ids, start, end = read_pairs_csv(_need(pairs, "--input pairs file"))
    out_path = _out(args, "directions.csv")
    try:
        rows, seen = [], set()
        n_deg = n_dup = 0
        for i, row_id in enumerate(ids):
            try:
                obs = extract_direction(start[i], end[i])
            except ValueError as exc:
                raise DataError(f"{pairs}:{i + 2}: {exc}") from exc
            if obs.degenerate:
                n_deg += 1
                continue
            key = tuple(np.round(np.concatenate([obs.start, obs.direction]), 12))
            if key in seen:
                n_dup += 1
                continue
            seen.add(key)
            rows.append((row_id, obs, end[i]))
        write_directions_csv(out_path, [r[0] for r in rows],
                             np.array([r[1].start for r in rows]).reshape(-1, start.shape[1]),
                             np.array([r[1].theta2 for r in rows]),
                             np.array([r[1].direction for r in rows]).reshape(len(rows), -1))
        report = {"input_rows": len(ids), "written": len(rows), "degenerate": n_deg, "duplicate": n_dup}
        if args.check_roundtrip:
            err = 0.0
            for _, obs, q in rows:
                back = reconstruct_endpoint(obs.start, obs.theta2, obs.direction)
                err = max(err, float(np.max(np.abs(back - q / q.sum()))))
            report["max_roundtrip_error"] = err
        write_json(_out(args, "extract_report.json"), report)
    except Exception:
        if os.path.exists(out_path):
            os.remove(out_path)
        raise
    print(f"wrote {len(rows)} directions ({n_deg} degenerate, {n_dup} duplicate dropped)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _truth_dict(t):
    return {"scenario": t.scenario, "D": t.D, "labels": t.labels, "mean_units": t.mean_units,
            "rho": t.rho, "mix": t.mix, "nu": t.nu}


def truth_from_dict(d):
    return GroundTruth(d["scenario"], d["D"], np.asarray(d["labels"], np.int64),
                       np.asarray(d["mean_units"], float), np.asarray(d["rho"], float),
                       np.asarray(d["mix"], float),
                       None, None if d.get("nu") is None else np.asarray(d["nu"], float))


def cmd_simulate(args):
    cfg, seed = _load(args)
    sc = cfgmod.scenario_config(cfg, seed)
    train, test, (t_train, t_test) = generate(sc, np.random.default_rng(seed))
    for name, data in (("train", train), ("test", test)):
        ids = [f"{name}-{i}" for i in range(data.N)]
        write_directions_csv(_out(args, f"{name}.csv"), ids, data.locations, sc.theta2, data.angles)
    write_json(_out(args, "truth.json"), {"config": sc.to_dict(), "train": _truth_dict(t_train),
                                           "test": _truth_dict(t_test)})
    print(f"simulated {sc.scenario} (D={sc.D}): {train.N} train, {test.N} test")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def _spatial_chain(job):
    spec, data, init, scfg, seq, eps = job
    ch = run_chain(spec, data, init, scfg, np.random.default_rng(seq), step_size=eps)
    ch.timing = {}
    return ch


def _homog_chain(job):
    hspec, obs, scfg, seq = job
    return fit_homogeneous(hspec, obs, scfg.iterations, scfg.burn_in, scfg.thin,
                           np.random.default_rng(seq))


def _map(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


def fit_model(cfg, seed, data, threads=1):
    """Run EM and all chains; returns (header, chains, extra)."""
    scfg = cfgmod.sampler_config(cfg, seed)
    root = np.random.SeedSequence(seed)
    init_seq, tune_seq, *chain_seqs = root.spawn(2 + scfg.chains)
    kind = cfg.model.type
    header = {"model": kind, "seed": seed, "D": data.D, "N": data.N,
              "spec_hash": spec_hash({"model": cfg.model.model_dump(), "sampler": cfg.sampler.model_dump(),
                                      "D": data.D, "N": data.N})}
    extra = {}
    if kind in ("iV", "iVM"):
        hspec = cfgmod.homogeneous_spec(cfg, data.D)
        chains = _map(_homog_chain, [(hspec, data.obs, scfg, s) for s in chain_seqs], threads)
        return header, chains, extra
    spec = cfgmod.model_spec(cfg, data.D)
    em, init = run_em(spec, data, rng=np.random.default_rng(init_seq),
                      config=EmConfig(restarts=cfg.sampler.em_restarts, max_iters=cfg.sampler.em_max_iters))
    spec = spec.with_lam(em.lam)
    extra["em_lambda"] = em.lam
    extra["em_objective"] = em.history[-1] if em.history else None
    eps = scfg.hmc_step_size
    if cfg.sampler.tune_step_size:
        eps = tune_step_size(spec, data, init, cfg.sampler.target_accept,
                             np.random.default_rng(tune_seq), scfg)
    extra["hmc_step_size"] = eps
    header["lam"] = spec.lam
    chains = _map(_spatial_chain, [(spec, data, init, scfg, s, eps) for s in chain_seqs], threads)
    return header, chains, extra


def cmd_fit(args):
    cfg, seed = _load(args)
    path = args.data or cfg.paths.data
    data, counts = _dataset(_need(path, "training data (--data or paths.data)"))
    header, chains, extra = fit_model(cfg, seed, data, _threads(args))
    header["dropped"] = counts
    header.update({k: v for k, v in extra.items()})
    write_chain_archive(_out(args, "chains.jsonl"), chains, header)
    stats = [getattr(c, "acceptance_stats", {}) for c in chains]
    write_json(_out(args, "fit_stats.json"), {"chains": stats, **extra})
    print(f"fitted {header['model']} with {len(chains)} chain(s) of {len(chains[0])} draws")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict / select

def _fit_object(cfg, header, chains, train):
    if header["model"] in ("iV", "iVM"):
        from .baselines import HomogeneousChain
        merged = HomogeneousChain(*(np.concatenate([getattr(c, f) for c in chains])
                                    for f in ("w", "varphi", "lam", "zeta")))
        return HomogeneousFit(cfgmod.homogeneous_spec(cfg, header["D"]), merged)
    from .sampler import PosteriorChain
    merged = PosteriorChain(*(np.concatenate([getattr(c, f) for c in chains])
                              for f in ("z", "varphi", "nu", "zeta", "lam")))
    spec = cfgmod.model_spec(cfg, header["D"]).with_lam(header["lam"])
    return SpatialFit(spec, merged, train)


def _thin_index(n, max_draws):
    if max_draws is None or max_draws >= n:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, max_draws).round().astype(int))


def cmd_predict(args):
    cfg, seed = _load(args)
    header, chains = read_chain_archive(_need(args.archive or cfg.paths.archive, "--archive"))
    train, _ = _dataset(_need(args.data or cfg.paths.data, "training data"))
    held, _ = _dataset(_need(args.test or cfg.paths.test, "held-out data (--test)"))
    if header.get("N") != train.N:
        raise DataError("training data does not match the archive")
    fit = _fit_object(cfg, header, chains, train)
    idx = _thin_index(len(fit), cfg.predict.max_draws)
    rep = predictive_from_fit(fit, held, cfg.predict.M, np.random.default_rng(seed), idx)
    label = args.label or cfg.label or header["model"]
    write_json(_out(args, "predictive.json"), {
        "label": label, "log_predictive": rep.log_predictive, "per_point_log": rep.per_point_log,
        "M": rep.M, "I": rep.I, "seed": seed, "spec_hash": header["spec_hash"]})
    print(f"{label}: log posterior predictive {rep.log_predictive:.6f}")
    return EXIT_OK


def cmd_select(args):
    cfg, _ = _load(args)
    paths = args.reports or cfg.paths.reports
    reports = []
    for p in _need(paths, "--reports"):
        d = read_json(p)
        reports.append((d["label"], PredictiveReport(d["log_predictive"], np.asarray(d["per_point_log"]),
                                                     d["M"], d["I"])))
    best = select_model(reports)
    ranking = sorted(((r.log_predictive, i, lab) for i, (lab, r) in enumerate(reports)),
                     key=lambda t: (-t[0], t[1]))
    write_json(_out(args, "selection.json"), {
        "selected": best, "ranking": [{"label": lab, "log_predictive": v} for v, _, lab in ranking]})
    print(best)
    return EXIT_OK


# ---------------------------------------------------------------------------
# diagnose

def cmd_diagnose(args):
    cfg, _ = _load(args)
    header, chains = read_chain_archive(_need(args.archive or cfg.paths.archive, "--archive"))
    out = {"model": header["model"], "seed": header["seed"], "n_chains": len(chains),
           "draws_per_chain": len(chains[0]),
           "note": "location averages of circular means use resultant vectors"}
    if header["model"] in ("iV", "iVM"):
        out["rhat_varphi"] = [rhat([c.varphi[:, k] for c in chains]) if len(chains) > 1 else None
                              for k in range(chains[0].varphi.shape[1])]
        out["lambda_mean"] = np.concatenate([c.lam for c in chains]).mean(axis=0)
        out["rho_mean"] = np.exp(np.concatenate([c.varphi for c in chains])).mean(axis=0)
    else:
        K = chains[0].nu.shape[1]
        if len(chains) > 1:
            out["rhat_nu"] = [rhat([c.nu[:, k] for c in chains]) for k in range(K)]
            zr = [rhat([c.z[:, k, d, n] for c in chains]) for k in range(K)
                  for d in range(chains[0].z.shape[2]) for n in range(chains[0].z.shape[3])]
            out["rhat_z_max"] = float(np.max(zr))
        z = np.concatenate([c.z for c in chains])
        out["rho_bar"] = np.exp(np.concatenate([c.varphi for c in chains])).mean(axis=(0, 2))
        out["lambda_mean"] = np.concatenate([c.lam for c in chains]).mean(axis=0)
        if header["D"] == 2:
            ang = np.mod(np.arctan2(z[:, :, 1], z[:, :, 0]), 2 * np.pi)
            rows = []
            for k in range(K):
                for n in range(ang.shape[2]):
                    try:
                        s = circular_summary(ang[:, k, n])
                        rows.append({"component": k + 1, "location": n, "mean": s.mean,
                                     "ci_low": s.ci_low, "ci_high": s.ci_high,
                                     "resultant_length": s.resultant_length})
                    except UndefinedMeanError:
                        rows.append({"component": k + 1, "location": n, "mean": None})
            out["locations"] = rows
        truth_path = args.truth or cfg.paths.truth
        if truth_path:
            truth = truth_from_dict(read_json(truth_path)["train"])
            out["recovery"] = recovery_report(chains, truth).to_dict()
    write_json(_out(args, "diagnostics.json"), out)
    if "recovery" in out:
        print(f"coverage {out['recovery']['coverage']:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help="worker processes (default $SIMPLEX_DRIFT_THREADS or 1)")
    common.add_argument("--output", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="simplex-drift", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("extract", parents=[common], help="raw proportion pairs -> directions")
    s.add_argument("--input", help="pairs CSV: location_id, p_*, q_*")
    s.add_argument("--check-roundtrip", action="store_true",
                   help="reconstruct end points and report the worst error")
    s.set_defaults(func=cmd_extract)
    s = sub.add_parser("simulate", parents=[common], help="simulate a scenario")
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("fit", parents=[common], help="EM start plus MCMC chains")
    s.add_argument("--data", help="directions CSV")
    s.set_defaults(func=cmd_fit)
    s = sub.add_parser("predict", parents=[common], help="log posterior predictive on held-out data")
    s.add_argument("--archive")
    s.add_argument("--data")
    s.add_argument("--test")
    s.add_argument("--label")
    s.set_defaults(func=cmd_predict)
    s = sub.add_parser("select", parents=[common], help="pick the best predictive report")
    s.add_argument("--reports", nargs="+")
    s.set_defaults(func=cmd_select)
    s = sub.add_parser("diagnose", parents=[common], help="summaries, R-hat, recovery")
    s.add_argument("--archive")
    s.add_argument("--truth")
    s.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
