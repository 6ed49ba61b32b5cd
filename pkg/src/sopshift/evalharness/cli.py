"""Command-line entry point: ``sopshift <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import dataprep as dp, featurizer as fz, hpo, tracesim as ts
from ..models.persist import load_model
from . import experiment as ex
from .report import emit_report, load_reports

log = logging.getLogger("sopshift")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    p.add_argument("--quick", action="store_true", help="desk-scale budgets")


def cmd_gen(a) -> int:
    traces = ts.generate_corpus(ts.make_shift_pair(a.shift, a.seed), n_samples_per_event=a.samples, seed=a.seed)
    a.out.mkdir(parents=True, exist_ok=True)
    for t in traces:
        ts.save_trace(t, a.out / f"{t.name}.trace")
        log.info("wrote %s (%d samples)", t.name, len(t.i1))
    return 0


def cmd_featurize(a) -> int:
    paths = sorted(Path(a.input).glob("*.trace"))
    if not paths:
        raise SystemExit(f"no .trace files in {a.input}")
    a.out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        sig = fz.featurize_trace(ts.load_trace(path))
        fz.save_signature(sig, a.out / f"{sig.name}.features")
        log.info("%s: %d rows", sig.name, sig.rows)
    return 0


def cmd_prep(a) -> int:
    sigs = [fz.load_signature(p) for p in sorted(Path(a.input).glob("*.features"))]
    if not sigs:
        raise SystemExit(f"no .features files in {a.input}")
    ds, man = ex.prepare(sigs, a.quantile, dp.DEFAULT_RATIOS, a.seed)
    ex.save_prep(ds, man, a.out)
    for key, n in sorted(ds.strata().items()):
        log.info("class %d system %d: %d rows", key[0], key[1] + 1, n)
    return 0


def _cfg(a) -> ex.ExperimentConfig:
    cfg = ex.quick_config(a.seed) if a.quick else ex.ExperimentConfig(seed=a.seed)
    overrides = {k: getattr(a, k) for k in ("max_epochs", "patience") if getattr(a, k, None) is not None}
    if getattr(a, "trials", None) is not None:
        overrides["hpo_trials"] = a.trials
    return ex.ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})


def cmd_train(a) -> int:
    if a.preset not in ex.PRESET_KEYS:
        raise SystemExit(f"unknown preset {a.preset!r}; choose from {sorted(ex.PRESET_KEYS)}")
    ds, man, stats = ex.load_prep(a.data)
    cfg = _cfg(a)
    key = ex.PRESET_KEYS[a.preset]
    meta = ex.train_key(key, ds, man, stats, cfg, a.out)
    if key == "vae_cmb":
        meta["phase2"] = ex.train_heads(load_model(a.out / "vae_cmb.ckpt")[0], ds, man, stats, cfg, a.out)
    print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


def cmd_hpo(a) -> int:
    domains = {"1": [0], "2": [1], "both": [0, 1]}[a.system]
    if (a.model == "vae-cmb") != (a.system == "both"):
        raise SystemExit("vae-cmb searches use --system both; dnn and vae-sgl use one system")
    ds, man, stats = ex.load_prep(a.data)
    data = ex.study_data(ds, man, stats, domains)
    name = f"{a.model}_sys{a.system}"
    epochs = a.max_epochs or (20 if a.quick else 150)
    record = hpo.study(a.model, data, a.trials, a.seed, epochs, a.patience or 20, out_dir=a.out, name=name,
                       log=log.info)
    print(json.dumps(record.summary(), indent=2, sort_keys=True))
    return 0


def cmd_eval(a) -> int:
    ds, man, stats = ex.load_prep(a.data)
    reports = ex.evaluate_all(a.models, ds, man, stats)
    if not reports:
        raise SystemExit(f"no checkpoints found in {a.models}")
    emit_report(reports, a.out, ex.shift_diagnostic(ds, man, a.seed))
    for r in reports:
        print(f"{r.model:8s} {r.scenario}  {100 * r.accuracy:6.2f}%")
    return 0


def cmd_report(a) -> int:
    emit_report(load_reports(a.metrics), a.out)
    return 0


def cmd_run_experiment(a) -> int:
    if a.config is not None:
        cfg = ex.ExperimentConfig.load(a.config)
    else:
        cfg = _cfg(a)
    manifest = ex.run_experiment(cfg, a.out, log=log.info)
    for key, acc in sorted(manifest["accuracy"].items()):
        print(f"{key:12s} {100 * acc:6.2f}%")
    return 0


def cmd_gradcheck(a) -> int:
    from ..nn.gradcheck import run_suite

    worst = run_suite(a.instances, a.seed)
    bad = 0
    for name, err in worst.items():
        limit = 1e-4 if name in ("dense_bn_act", "vae_graph") else 1e-5
        ok = err < limit
        bad += not ok
        print(f"{name:18s} {err:.3e}  {'ok' if ok else 'FAIL'} (< {limit:g})")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sopshift", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a six-trace synthetic corpus")
    p.add_argument("--shift", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=ts.samples_for_rows(500), help="samples per (system, event)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("featurize", help="traces -> per-segment power spectra")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("prep", help="activity filter, stratified split, z-score stats")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train one preset model")
    p.add_argument("--preset", required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hpo", help="random search with median pruning")
    p.add_argument("--model", choices=sorted(hpo.FAMILIES), required=True)
    p.add_argument("--system", choices=("1", "2", "both"), required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("eval", help="evaluate saved checkpoints on S1-S4 and write reports")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="re-render figures from metrics.json")
    p.add_argument("--metrics", type=Path, required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run-experiment", help="full pipeline from one JSON config")
    p.add_argument("--config", type=Path)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("gradcheck", help="finite-difference checks of every layer and loss")
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    for p in sub.choices.values():
        _common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
