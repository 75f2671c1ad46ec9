"""Command-line surface: simulation, fitting, baselines and evaluation.

Subcommands: simulate, simulate-components, fit, glasso, stability, cv,
evaluate. Exit codes: 0 success, 1 numeric or data failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (CohortData, ingest_cohort, read_matrix_tsv, write_cohort,
                   write_matrix_tsv, write_run_manifest)
from .errors import DimensionError, MixednetError
from .estimator import MnsConfig, MnsResult, fit_path, penalty_max
from .glasso import (GlassoProblem, penalty_upper_bound, pooled_covariance,
                     sample_covariance, solve_glasso)
from .graphs import NodeSet, read_edge_tsv, write_edge_tsv
from .simulate import (SimConfig, gen_component_cohort, sample_cohort_data,
                       simulate_cohort)
from .stability import StabilityConfig, run_stability
from .tuning import (AlphaLambda, cross_validate, make_lambda_grid,
                     roc_from_networks, score_roc, to_penalties, tpr_fpr)


def _add_common(sub, out_required=True):
    sub.add_argument("--out-dir", required=out_required, help="output directory")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=1)


def _build_parser():
    parser = argparse.ArgumentParser(prog="mixednet", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="generate a synthetic cohort with ground truth")
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--subjects", type=int, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--e-ran", type=int, required=True)
    sim.add_argument("--tau", type=float, required=True)
    sim.add_argument("--r", type=float, default=1.0)
    sim.add_argument("--ba-m", type=int, default=2)
    _add_common(sim)

    simc = subs.add_parser("simulate-components",
                           help="block-structured 3-subject cohort of 10 sub-networks")
    simc.add_argument("--p", type=int, required=True)
    simc.add_argument("--n", type=int, required=True)
    simc.add_argument("--r", type=float, default=1.0)
    simc.add_argument("--ba-m", type=int, default=1)
    _add_common(simc)

    fit = subs.add_parser("fit", help="mixed-effects network fit over a penalty grid")
    fit.add_argument("--cohort", required=True)
    fit.add_argument("--alpha", type=float, default=0.25)
    fit.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="single overall penalty (skips the grid)")
    fit.add_argument("--lambda-grid", type=int, default=25)
    fit.add_argument("--lambda-min-ratio", type=float, default=0.01)
    fit.add_argument("--rule", choices=["and", "or"], default="and")
    fit.add_argument("--em-tol", type=float, default=1e-4)
    fit.add_argument("--em-max-iter", type=int, default=200)
    _add_common(fit)

    gl = subs.add_parser("glasso", help="graphical-lasso baseline (pooled or per subject)")
    gl.add_argument("--cohort", required=True)
    gl.add_argument("--mode", choices=["pooled", "per-subject"], default="pooled")
    gl.add_argument("--lambda", dest="lam", type=float, default=None)
    gl.add_argument("--lambda-grid", type=int, default=25)
    gl.add_argument("--lambda-min-ratio", type=float, default=0.01)
    _add_common(gl)

    st = subs.add_parser("stability", help="bootstrap stability baseline")
    st.add_argument("--cohort", required=True)
    st.add_argument("--bootstrap", type=int, default=200, help="bootstrap count B")
    st.add_argument("--c", type=float, default=0.25, help="penalty randomization amplitude")
    st.add_argument("--stars-beta", type=float, default=0.05)
    st.add_argument("--stars-subsamples", type=int, default=20)
    st.add_argument("--stars-grid", type=int, default=30)
    _add_common(st)

    cv = subs.add_parser("cv", help="cross-validate the overall penalty and refit")
    cv.add_argument("--cohort", required=True)
    cv.add_argument("--alpha", type=float, default=0.25)
    cv.add_argument("--lambda-grid", type=int, default=25)
    cv.add_argument("--lambda-min-ratio", type=float, default=0.01)
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--rule", choices=["and", "or"], default="and")
    _add_common(cv)

    ev = subs.add_parser("evaluate", help="score result files against cohort ground truth")
    ev.add_argument("--results", required=True)
    ev.add_argument("--truth", required=True, help="cohort directory with truth TSVs")
    _add_common(ev)
    return parser


def _json_dump(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_truth(out_dir: Path, truth, node_set: NodeSet):
    write_edge_tsv(out_dir / "truth_population.tsv", truth.e_pop, node_set,
                   truth.theta_pop.weights)
    write_edge_tsv(out_dir / "truth_variable.tsv", truth.e_tilde, node_set)
    for i in range(truth.n_subjects):
        write_edge_tsv(out_dir / f"truth_subject_{i:02d}.tsv",
                       truth.subject_full_edges(i), node_set)


def cmd_simulate(args) -> int:
    cfg = SimConfig(p=args.p, N=args.subjects, n=args.n, e_ran=args.e_ran,
                    tau=args.tau, r=args.r, ba_m=args.ba_m, seed=args.seed)
    truth, data = simulate_cohort(cfg)
    out = Path(args.out_dir)
    node_set = NodeSet.default(cfg.p)
    ids = [f"{i:02d}" for i in range(cfg.N)]
    write_cohort(out, node_set, data, ids, extra_manifest={
        "sim_config": {"p": cfg.p, "N": cfg.N, "n": cfg.n, "e_ran": cfg.e_ran,
                       "tau": cfg.tau, "r": cfg.r, "ba_m": cfg.ba_m, "seed": cfg.seed}})
    _write_truth(out, truth, node_set)
    write_run_manifest(out, "simulate", vars(args), args.seed)
    print(f"wrote cohort of {cfg.N} subjects to {out}")
    return 0


def cmd_simulate_components(args) -> int:
    truth = gen_component_cohort(args.p, seed=args.seed, ba_m=args.ba_m, r=args.r)
    data = sample_cohort_data(truth, args.n, args.seed)
    out = Path(args.out_dir)
    node_set = NodeSet.default(args.p)
    ids = [f"{i:02d}" for i in range(3)]
    write_cohort(out, node_set, data, ids, extra_manifest={
        "sim_config": {"p": args.p, "N": 3, "n": args.n, "r": args.r,
                       "ba_m": args.ba_m, "seed": args.seed, "components": 10}})
    _write_truth(out, truth, node_set)
    write_run_manifest(out, "simulate-components", vars(args), args.seed)
    print(f"wrote component cohort to {out}")
    return 0


def _dump_mns_result(out: Path, res: MnsResult, cohort: CohortData, meta: dict):
    out.mkdir(parents=True, exist_ok=True)
    ns = cohort.node_set
    write_edge_tsv(out / "population_edges.tsv", res.population, ns)
    write_edge_tsv(out / "variance_edges.tsv", res.variance_net, ns)
    networks = {"population": "population_edges.tsv", "variance": "variance_edges.tsv",
                "subjects": {}}
    for i, sid in enumerate(cohort.subject_ids):
        fname = f"subject_{sid}_edges.tsv"
        write_edge_tsv(out / fname, res.subject_nets[i], ns)
        networks["subjects"][sid] = fname
    node_fits = []
    for fit in res.node_fits:
        node_fits.append({
            "node": ns.labels[fit.node],
            "beta": fit.beta.tolist(),
            "sigma_re": fit.sigma_re.tolist(),
            "sigma2": fit.sigma2,
            "em_iterations": fit.em_iterations,
            "converged": fit.converged,
        })
    _json_dump(out / "result.json",
               {"kind": "mns", **meta, "rule": res.rule,
                "nodes": list(ns.labels), "networks": networks,
                "node_fits": node_fits})


def _fit_grid(args, cohort):
    if args.lam is not None:
        return [float(args.lam)]
    lam_max = penalty_max(cohort) / max(args.alpha, 0.05)
    return list(make_lambda_grid(lam_max, args.lambda_grid, args.lambda_min_ratio))


def cmd_fit(args) -> int:
    cohort = ingest_cohort(args.cohort)
    lams = _fit_grid(args, cohort)
    pairs = [to_penalties(AlphaLambda(args.alpha, l)) for l in lams]
    cfg = MnsConfig(pairs[0][0], pairs[0][1], em_tol=args.em_tol,
                    em_max_iter=args.em_max_iter, rule=args.rule)
    results = fit_path(cohort, pairs, cfg, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for k, (lam, res) in enumerate(zip(lams, results)):
        sub = out / f"lambda_{k:03d}"
        lam1, lam2 = pairs[k]
        _dump_mns_result(sub, res, cohort,
                         {"alpha": args.alpha, "lambda": lam,
                          "lambda1": lam1, "lambda2": lam2})
        runs.append({"dir": sub.name, "lambda": lam})
    _json_dump(out / "result.json",
               {"kind": "mns_sweep", "alpha": args.alpha,
                "subject_ids": list(cohort.subject_ids), "runs": runs})
    write_run_manifest(out, "fit", vars(args), args.seed,
                       [Path(args.cohort) / "manifest.json"])
    print(f"wrote {len(runs)} result set(s) to {out}")
    return 0


def cmd_glasso(args) -> int:
    cohort = ingest_cohort(args.cohort)
    ns = cohort.node_set
    if args.mode == "pooled":
        covs = [pooled_covariance(cohort)]
        names = ["pooled"]
    else:
        covs = [sample_covariance(x) for x in cohort.subjects]
        names = list(cohort.subject_ids)
    if args.lam is not None:
        lams = [float(args.lam)]
    else:
        lam_max = max(penalty_upper_bound(S) for S in covs)
        lams = list(make_lambda_grid(lam_max, args.lambda_grid, args.lambda_min_ratio))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for k, lam in enumerate(lams):
        sub = out / f"lambda_{k:03d}"
        sub.mkdir(parents=True, exist_ok=True)
        files = {}
        for name, S in zip(names, covs):
            sol = solve_glasso(GlassoProblem(S, lam))
            fname = f"{'pooled' if args.mode == 'pooled' else 'subject_' + name}_edges.tsv"
            write_edge_tsv(sub / fname, sol.support(), ns)
            files[name] = fname
        _json_dump(sub / "result.json",
                   {"kind": "glasso", "mode": args.mode, "lambda": lam, "files": files})
        runs.append({"dir": sub.name, "lambda": lam})
    _json_dump(out / "result.json",
               {"kind": "glasso_sweep", "mode": args.mode,
                "subject_ids": list(cohort.subject_ids), "runs": runs})
    write_run_manifest(out, "glasso", vars(args), args.seed,
                       [Path(args.cohort) / "manifest.json"])
    print(f"wrote {len(runs)} glasso result set(s) to {out}")
    return 0


def cmd_stability(args) -> int:
    cohort = ingest_cohort(args.cohort)
    cfg = StabilityConfig(B=args.bootstrap, c=args.c, stars_beta=args.stars_beta,
                          stars_subsamples=args.stars_subsamples,
                          stars_grid_size=args.stars_grid, seed=args.seed)
    res = run_stability(cohort, cfg, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = list(cohort.node_set.labels)
    write_matrix_tsv(out / "mu_pop.tsv", res.mu_pop, labels)
    write_matrix_tsv(out / "rho_pop.tsv", res.rho_pop, labels)
    iu = np.triu_indices(cohort.p, k=1)
    degenerate = [[labels[a], labels[b]] for a, b in zip(*iu) if res.degenerate[a, b]]
    _json_dump(out / "result.json",
               {"kind": "stability",
                "lambdas": {sid: lam for sid, lam in zip(cohort.subject_ids, res.lambdas)},
                "skipped": {sid: s for sid, s in zip(cohort.subject_ids, res.skipped)},
                "degenerate_edges": degenerate,
                "config": {"B": cfg.B, "c": cfg.c, "stars_beta": cfg.stars_beta,
                           "stars_subsamples": cfg.stars_subsamples,
                           "stars_grid_size": cfg.stars_grid_size, "seed": cfg.seed},
                "files": {"mu_pop": "mu_pop.tsv", "rho_pop": "rho_pop.tsv"}})
    write_run_manifest(out, "stability", vars(args), args.seed,
                       [Path(args.cohort) / "manifest.json"])
    print(f"wrote stability result to {out}")
    return 0


def cmd_cv(args) -> int:
    cohort = ingest_cohort(args.cohort)
    lam_max = penalty_max(cohort) / max(args.alpha, 0.05)
    lams = make_lambda_grid(lam_max, args.lambda_grid, args.lambda_min_ratio)
    grid = [AlphaLambda(args.alpha, float(l)) for l in lams]
    cfg = MnsConfig(1.0, 1.0, rule=args.rule)
    report = cross_validate(cohort, grid, args.folds, cfg, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _json_dump(out / "cv_report.json",
               {"grid": [{"alpha": g.alpha, "lambda": g.lam} for g in report.grid],
                "mse": report.mse.tolist(),
                "best": {"alpha": report.best.alpha, "lambda": report.best.lam}})
    lam1, lam2 = to_penalties(report.best)
    best = fit_path(cohort, [(lam1, lam2)],
                    MnsConfig(lam1, lam2, rule=args.rule), threads=args.threads)[0]
    _dump_mns_result(out / "best_fit", best, cohort,
                     {"alpha": report.best.alpha, "lambda": report.best.lam,
                      "lambda1": lam1, "lambda2": lam2})
    write_run_manifest(out, "cv", vars(args), args.seed,
                       [Path(args.cohort) / "manifest.json"])
    print(f"best lambda {report.best.lam:.6g} (alpha {report.best.alpha}); "
          f"report in {out}")
    return 0


def _load_truth(truth_dir: Path):
    with open(truth_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    ns = NodeSet(tuple(manifest["nodes"]))
    population, _ = read_edge_tsv(truth_dir / "truth_population.tsv", ns)
    variable, _ = read_edge_tsv(truth_dir / "truth_variable.tsv", ns)
    subjects = []
    for entry in manifest["subjects"]:
        path = truth_dir / f"truth_subject_{entry['id']}.tsv"
        if path.exists():
            subjects.append(read_edge_tsv(path, ns)[0])
    return ns, population, variable, subjects


def _roc_rows(grid, curves_points):
    rows = []
    for lam, (fpr, tpr) in zip(grid, curves_points):
        rows.append((lam, fpr, tpr))
    return rows


def _write_roc_tsv(path, rows, header):
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def _eval_mns_sweep(results_dir: Path, doc, ns, population, variable, subjects, out: Path):
    lams, pop_nets, var_nets, subj_nets = [], [], [], []
    for run in doc["runs"]:
        sub = results_dir / run["dir"]
        with open(sub / "result.json") as fh:
            rdoc = json.load(fh)
        lams.append(run["lambda"])
        pop, _ = read_edge_tsv(sub / rdoc["networks"]["population"], ns)
        var, _ = read_edge_tsv(sub / rdoc["networks"]["variance"], ns)
        pop_nets.append(pop)
        var_nets.append(var)
        subj = []
        for sid, fname in rdoc["networks"]["subjects"].items():
            es, _ = read_edge_tsv(sub / fname, ns)
            subj.append(pop.union(es))
        subj_nets.append(subj)
    report = {}
    for kind, nets, truth in (("population", pop_nets, population),
                              ("variance", var_nets, variable)):
        pts = [tuple(reversed(tpr_fpr(net, truth))) for net in nets]
        curve = roc_from_networks(nets, truth)
        _write_roc_tsv(out / f"roc_{kind}.tsv", _roc_rows(lams, pts),
                       ("lambda", "fpr", "tpr"))
        report[kind] = {"auc": curve.auc}
    if subjects:
        curve = roc_from_networks(subj_nets, subjects)
        pts = [p for p in curve.points]
        _write_roc_tsv(out / "roc_subject.tsv",
                       [(f, t) for f, t in pts], ("fpr", "tpr"))
        report["subject"] = {"auc": curve.auc}
    return report


def _eval_glasso_sweep(results_dir: Path, doc, ns, population, subjects, out: Path):
    lams, nets = [], []
    for run in doc["runs"]:
        sub = results_dir / run["dir"]
        with open(sub / "result.json") as fh:
            rdoc = json.load(fh)
        lams.append(run["lambda"])
        loaded = {name: read_edge_tsv(sub / fname, ns)[0]
                  for name, fname in rdoc["files"].items()}
        nets.append(loaded)
    report = {}
    if doc["mode"] == "pooled":
        pooled = [d["pooled"] for d in nets]
        pts = [tuple(reversed(tpr_fpr(net, population))) for net in pooled]
        curve = roc_from_networks(pooled, population)
        _write_roc_tsv(out / "roc_population.tsv", _roc_rows(lams, pts),
                       ("lambda", "fpr", "tpr"))
        report["population"] = {"auc": curve.auc}
    elif subjects:
        ordered = [[d[name] for name in doc["subject_ids"]] for d in nets]
        curve = roc_from_networks(ordered, subjects)
        _write_roc_tsv(out / "roc_subject.tsv", list(curve.points), ("fpr", "tpr"))
        report["subject"] = {"auc": curve.auc}
    return report


def _eval_stability(results_dir: Path, ns, population, variable, out: Path):
    _, mu = read_matrix_tsv(results_dir / "mu_pop.tsv")
    _, rho = read_matrix_tsv(results_dir / "rho_pop.tsv")
    if mu.shape != (ns.p, ns.p):
        raise DimensionError("stability matrices do not match the truth node set")
    report = {}
    mu_curve = score_roc(mu, population)
    rho_curve = score_roc(rho, variable)
    _write_roc_tsv(out / "roc_population.tsv", list(mu_curve.points), ("fpr", "tpr"))
    _write_roc_tsv(out / "roc_variance.tsv", list(rho_curve.points), ("fpr", "tpr"))
    report["population"] = {"auc": mu_curve.auc}
    report["variance"] = {"auc": rho_curve.auc}
    return report


def cmd_evaluate(args) -> int:
    results_dir = Path(args.results)
    truth_dir = Path(args.truth)
    ns, population, variable, subjects = _load_truth(truth_dir)
    with open(results_dir / "result.json") as fh:
        doc = json.load(fh)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = doc.get("kind")
    if kind == "mns_sweep":
        report = _eval_mns_sweep(results_dir, doc, ns, population, variable, subjects, out)
    elif kind == "glasso_sweep":
        report = _eval_glasso_sweep(results_dir, doc, ns, population, subjects, out)
    elif kind == "stability":
        report = _eval_stability(results_dir, ns, population, variable, out)
    elif kind == "mns":
        pop, _ = read_edge_tsv(results_dir / doc["networks"]["population"], ns)
        var, _ = read_edge_tsv(results_dir / doc["networks"]["variance"], ns)
        ptp, pfp = tpr_fpr(pop, population)
        vtp, vfp = tpr_fpr(var, variable)
        report = {"population": {"tpr": ptp, "fpr": pfp},
                  "variance": {"tpr": vtp, "fpr": vfp}}
    else:
        raise MixednetError(f"unrecognized result kind {kind!r} in {results_dir}")
    _json_dump(out / "evaluate.json", report)
    write_run_manifest(out, "evaluate", vars(args), args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "simulate-components": cmd_simulate_components,
    "fit": cmd_fit,
    "glasso": cmd_glasso,
    "stability": cmd_stability,
    "cv": cmd_cv,
    "evaluate": cmd_evaluate,
}


def _validate(parser, args):
    if args.command == "simulate":
        if not 0.0 <= args.tau <= 1.0:
            parser.error("--tau must lie in [0, 1]")
        if args.p < 2 or args.subjects < 1 or args.n < 2:
            parser.error("--p >= 2, --subjects >= 1 and --n >= 2 required")
        if args.e_ran < 0 or args.e_ran > args.p * (args.p - 1) // 2:
            parser.error("--e-ran outside 0..p(p-1)/2")
        if args.ba_m < 1 or args.ba_m >= args.p:
            parser.error("--ba-m must satisfy 1 <= ba_m < p")
    if args.command == "simulate-components" and args.p % 10 != 0:
        parser.error("--p must be divisible by 10")
    if args.command in ("fit", "cv") and not 0.0 <= args.alpha <= 1.0:
        parser.error("--alpha must lie in [0, 1]")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return _HANDLERS[args.command](args)
    except (MixednetError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
