"""Command line entry point: ``supplyrisk <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 invalid input data,
3 runtime failure. Progress goes to standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .banks import fsri_all
from .io import (ConfigError, IngestError, RunConfig, adjusted_pd_table, bank_risk_table,
                 emit_reports, esri_table, fsri_rank_table, ingest, load_config,
                 loss_histogram_table, read_adjusted_pd, save_config, write_dataset,
                 write_report)
from .network import DataValidationError, StructuralError, validate_layers
from .production import calibrate_glpf, esri_all
from .stress import (adjusted_pd, critical_sets, pd_adjusted_stress, run_stress,
                     sample_scenarios)
from .synth import preset_dataset, preset_names

logger = logging.getLogger("supplyrisk")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _common(p):
    g = p.add_argument_group("data and model")
    g.add_argument("--config", help="INI file with a [run] section; flags override it")
    g.add_argument("--data", dest="data_dir", help="directory with firms/edges/loans/banks CSVs")
    g.add_argument("--preset", choices=preset_names(), help="use a synthetic economy")
    g.add_argument("--out", default=".", help="output directory (default: current)")
    g.add_argument("--eps", type=float, help="convergence threshold (default 1e-6)")
    g.add_argument("--max-iter", type=_positive_int, help="iteration cap (default 1000)")
    g.add_argument("--tol", type=float, help="approximate cascade: smaller changes stop spreading (default 0, exact)")
    g.add_argument("--floor-share", type=float, help="non-essential floor share b")
    g.add_argument("--lgd", type=float, help="loss given default (default 1)")
    g.add_argument("--workers", type=_positive_int, help="parallel threads")
    g.add_argument("-v", "--verbose", action="store_true")


def _stress_args(p):
    p.add_argument("--n", dest="n_scenarios", type=_positive_int,
                   help="number of scenarios (default 10000)")
    p.add_argument("--q", type=float, help="VaR/ES level (default 0.95)")
    p.add_argument("--seed", type=int, help="scenario seed")
    p.add_argument("--client-threshold", dest="bank_client_threshold", type=int,
                   help="banks with fewer clients are left out of ratio averages")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="supplyrisk",
                     description="Supply chain contagion and systemic risk for banks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="load and cross-check the input data")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic economy as CSV files")
    p.add_argument("--preset", choices=preset_names(), default="core-periphery")
    p.add_argument("--n-firms", type=_positive_int)
    p.add_argument("--n-banks", type=_positive_int)
    p.add_argument("--avg-degree", type=float)
    p.add_argument("--loan-coverage", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="directory to write into")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("esri", help="economic systemic risk of every firm")
    _common(p)
    p = sub.add_parser("fsri", help="financial systemic risk of every firm")
    _common(p)
    p = sub.add_parser("stress", help="Monte Carlo loss distributions per bank")
    _common(p)
    _stress_args(p)
    p.add_argument("--pd", dest="pd_file",
                   help="adjusted_pd.csv; adds a run with these default probabilities")
    p = sub.add_parser("pd-adjust", help="contagion-adjusted default probabilities")
    _common(p)
    p = sub.add_parser("report", help="fsri, pd-adjust and stress in one go")
    _common(p)
    _stress_args(p)
    return parser


_CONFIG_FLAGS = ("preset", "data_dir", "eps", "max_iter", "tol", "floor_share", "lgd", "workers",
                 "n_scenarios", "q", "seed", "bank_client_threshold")


def _config(args) -> RunConfig:
    over = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    if over.get("data_dir"):
        over["preset"] = None
    cfg = load_config(args.config, over)
    if args.data_dir and cfg.preset:
        cfg.preset = None
    if not cfg.preset and not cfg.data_dir and not cfg.firms:
        raise ConfigError("no data source: pass --data, --preset or --config")
    return cfg


def _load(cfg: RunConfig):
    t = time.perf_counter()
    if cfg.preset:
        ds = preset_dataset(cfg.preset)
        report = validate_layers(ds.network, ds.financials, ds.banks)
    else:
        ds, report = ingest(cfg.data_paths())
    for w in report.warnings:
        logger.warning(w)
    logger.info("loaded %d firms, %d links, %d banks, %d loans in %.1fs", report.n_firms,
                report.n_edges, report.n_banks, report.n_loans, time.perf_counter() - t)
    return ds, report


def _params(cfg, ds):
    params = calibrate_glpf(ds.network, ds.essentiality, cfg.floor_share)
    if params.missing_essential:
        logger.info("%d essential input class(es) without inflow treated as absent",
                    params.missing_essential)
    return params


def _warn_nonconverged(what, converged):
    bad = int(np.count_nonzero(~np.asarray(converged)))
    if bad:
        logger.warning("%s: %d scenario(s) hit max_iter before converging", what, bad)
    return bad


def _fsri(cfg, ds, params):
    t = time.perf_counter()
    res = fsri_all(params, ds.financials, ds.banks, eps=cfg.eps, max_iter=cfg.max_iter,
                   lgd=cfg.lgd, workers=cfg.workers, tol=cfg.tol)
    logger.info("single-firm sweep over %d firms in %.1fs", len(res), time.perf_counter() - t)
    _warn_nonconverged("sweep", res.converged)
    return res


def _stress(cfg, ds, params):
    t = time.perf_counter()
    sc = sample_scenarios(ds.financials.pd, cfg.n_scenarios, cfg.seed)
    dist = run_stress(sc, params, ds.financials, ds.banks, eps=cfg.eps, max_iter=cfg.max_iter,
                      lgd=cfg.lgd, workers=cfg.workers, tol=cfg.tol)
    logger.info("stress run with %d scenarios in %.1fs", dist.count, time.perf_counter() - t)
    _warn_nonconverged("stress", dist.converged)
    return dist


def _pd_stress(cfg, ds, q):
    # same seed as the direct run: common random numbers for the comparison
    return pd_adjusted_stress(q, cfg.n_scenarios, cfg.seed, ds.financials, ds.banks,
                              lgd=cfg.lgd, workers=cfg.workers)


def _adjusted(fsri_res, ds):
    crit = critical_sets(fsri_res.sweep, ds.network.n)
    return adjusted_pd(crit, ds.financials.pd)


def cmd_validate(args):
    cfg = _config(args)
    _, report = _load(cfg)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))


def cmd_synth(args):
    over = {k: v for k, v in dict(n_firms=args.n_firms, n_banks=args.n_banks,
                                  avg_degree=args.avg_degree, loan_coverage=args.loan_coverage,
                                  seed=args.seed).items() if v is not None}
    ds = preset_dataset(args.preset, **over)
    out = Path(args.out)
    files = write_dataset(ds, out)
    save_config(RunConfig(data_dir="."), out / "run.cfg")
    logger.info("preset %s %s written to %s", args.preset, over or "", out)
    for path in files.values():
        print(path)


def cmd_esri(args):
    cfg = _config(args)
    ds, _ = _load(cfg)
    params = _params(cfg, ds)
    res = esri_all(params, eps=cfg.eps, max_iter=cfg.max_iter, workers=cfg.workers, tol=cfg.tol)
    bad = _warn_nonconverged("sweep", res.converged)
    firms = np.arange(params.n)
    print(write_report(esri_table(res, firms, params.s_out), Path(args.out) / "esri.csv", cfg,
                       "esri", {"nonconverged": bad}))


def cmd_fsri(args):
    cfg = _config(args)
    ds, _ = _load(cfg)
    params = _params(cfg, ds)
    res = _fsri(cfg, ds, params)
    table = fsri_rank_table(res, params.s_out, ds.banks.loan_total())
    print(write_report(table, Path(args.out) / "fsri_rank.csv", cfg, "fsri_rank",
                       {"nonconverged": int(np.count_nonzero(~res.converged))}))


def cmd_stress(args):
    cfg = _config(args)
    ds, _ = _load(cfg)
    params = _params(cfg, ds)
    q = read_adjusted_pd(args.pd_file, ds.network.n) if args.pd_file else None
    dist = _stress(cfg, ds, params)
    pd_dist = _pd_stress(cfg, ds, q) if q is not None else None
    clients = ds.banks.clients_per_bank()
    extra = {"nonconverged": dist.nonconverged}
    out = Path(args.out)
    print(write_report(bank_risk_table(dist, cfg.q, clients, pd_dist, cfg.bank_client_threshold),
                       out / "bank_risk.csv", cfg, "bank_risk", extra))
    print(write_report(loss_histogram_table({"idiosyncratic": dist, "pd_adjusted": pd_dist},
                                            cfg.histogram_bins),
                       out / "loss_histograms.csv", cfg, "loss_histograms", extra))


def cmd_pd_adjust(args):
    cfg = _config(args)
    ds, _ = _load(cfg)
    params = _params(cfg, ds)
    adj = _adjusted(_fsri(cfg, ds, params), ds)
    print(write_report(adjusted_pd_table(adj), Path(args.out) / "adjusted_pd.csv", cfg,
                       "adjusted_pd"))


def cmd_report(args):
    cfg = _config(args)
    ds, _ = _load(cfg)
    params = _params(cfg, ds)
    res = _fsri(cfg, ds, params)
    adj = _adjusted(res, ds)
    dist = _stress(cfg, ds, params)
    pd_dist = _pd_stress(cfg, ds, adj.q)
    extra = {"nonconverged_sweep": int(np.count_nonzero(~res.converged)),
             "nonconverged_stress": dist.nonconverged}
    files = emit_reports(args.out, cfg, fsri=res, params=params, banks=ds.banks, dist=dist,
                         pd_dist=pd_dist, adjusted=adj, extra=extra)
    for path in files.values():
        print(path)


COMMANDS = {"validate": cmd_validate, "synth": cmd_synth, "esri": cmd_esri, "fsri": cmd_fsri,
            "stress": cmd_stress, "pd-adjust": cmd_pd_adjust, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING, force=True)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"supplyrisk: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, DataValidationError, StructuralError) as exc:
        print(f"supplyrisk: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        logger.debug("failure", exc_info=True)
        print(f"supplyrisk: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
