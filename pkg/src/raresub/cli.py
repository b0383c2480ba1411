"""Command-line entry point: ``raresub <command> [options]``.

Every command creates a fresh timestamped directory under ``--out`` (or
``$RARESUB_OUT``, else ``./runs``) and writes ``manifest.json`` next to its
outputs. Exit codes: 0 ok, 1 other failure, 2 config/usage, 3 data, 4 numeric.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .clustering import scan_k
from .config import PipelineConfig
from .data_ingest import filter_class, load_matrix, validate
from .diffexpr import de_cluster_vs_rest, select_markers
from .errors import ConfigError, MissingFile, RaresubError
from .pipeline import analyze_within, embed, run_pan
from .report import (
    FIGURES,
    RunManifest,
    emit_figures,
    make_run_dir,
    render_all,
    write_json,
    write_pan_outputs,
    write_within_outputs,
)
from .stability import discovery_scan, final_refit
from .synth import SyntheticSpec, generate

log = logging.getLogger("raresub")

EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output root (default: $RARESUB_OUT or ./runs)")
    p.add_argument("--seed", type=int, help="k-means / stability base seed")
    p.add_argument("--ae-seed", type=int, dest="ae_seed", help="autoencoder seed")
    p.add_argument("-v", "--verbose", action="store_true")
    if data:
        p.add_argument("--data", required=True, help="expression CSV (samples x genes)")
        p.add_argument("--labels", help="labels CSV with a Class column")
        p.add_argument("--class", dest="class_name", help="restrict to one class")
        p.add_argument("--k-min", type=int, dest="k_min")
        p.add_argument("--k-max", type=int, dest="k_max")
        p.add_argument("--runs", type=int, help="stability runs R")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="raresub", description="Rare-subtype discovery in expression data.")
    parser.add_argument("--version", action="version", version=f"raresub {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load, join and validate a cohort")
    _common(p)

    p = sub.add_parser("synth", help="generate a synthetic cohort with a planted rare subtype")
    _common(p, data=False)
    p.add_argument("--spec", help="JSON generator spec")
    p.add_argument("--class", dest="class_name", default="SYN", help="class label to write")

    p = sub.add_parser("pan", help="pan-cancer negative control")
    _common(p)
    p.add_argument("--k", type=int, help="fix k instead of the silhouette maximum")

    p = sub.add_parser("within", help="full within-class discovery pipeline")
    _common(p)
    p.add_argument("--k", type=int, help="skip discovery and use this k")
    p.add_argument("--cluster", type=int, help="cluster of interest (with --k)")

    p = sub.add_parser("scan-k", help="silhouette / DBI scan over k")
    _common(p)

    p = sub.add_parser("stability", help="multi-seed stability and discovery scan")
    _common(p)

    p = sub.add_parser("de", help="cluster-vs-rest differential expression")
    _common(p)
    p.add_argument("--k", type=int, help="k of the partition (default: discovery choice)")
    p.add_argument("--cluster", type=int, help="cluster to test (default: discovery choice)")

    p = sub.add_parser("report", help="re-render figures from a previous run's CSV twins")
    _common(p, data=False)
    p.add_argument("--run", required=True, help="directory of a previous run")
    return parser


# ---------------------------------------------------------------- helpers

def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    over = {}
    for name in ("seed", "ae_seed", "k_min", "k_max", "runs", "class_name", "k", "cluster"):
        if getattr(args, name, None) is not None:
            over[name] = getattr(args, name)
    return cfg.override(**over)


def _load(args, cfg: PipelineConfig, need_labels: bool = False):
    if need_labels and not args.labels:
        raise ConfigError("--labels is required for this command")
    m = load_matrix(args.data, args.labels)
    if cfg.class_name is not None:
        m = filter_class(m, cfg.class_name)
    return m


def _inputs(args) -> dict:
    out = {}
    for key in ("data", "labels", "config", "spec"):
        path = getattr(args, key, None)
        if path:
            out[key] = str(path)
    return out


def _start(args, cfg_dict: dict, argv) -> tuple[Path, RunManifest]:
    out = make_run_dir(args.out, args.command)
    manifest = RunManifest(args.command, list(argv), cfg_dict, _inputs(args))
    return out, manifest


def _finish(out: Path, manifest: RunManifest, **extra) -> Path:
    manifest.extra.update(extra)
    manifest.write(out)
    print(out)
    return out


# ---------------------------------------------------------------- commands

def cmd_ingest(args, argv):
    cfg = _config(args)
    out, man = _start(args, cfg.to_dict(), argv)
    m, report = load_matrix(args.data, args.labels, return_report=True)
    if cfg.class_name is not None:
        m = filter_class(m, cfg.class_name)
    write_json(out / "ingest.json", {
        "n_samples": m.shape[0],
        "n_genes": m.shape[1],
        "class_counts": m.class_counts() if m.class_labels is not None else None,
        "validation": validate(m).as_dict(),
        "load": report.as_dict() if hasattr(report, "as_dict") else vars(report),
    })
    return _finish(out, man)


def cmd_synth(args, argv):
    spec_d = {}
    if args.spec:
        try:
            spec_d = json.loads(Path(args.spec).read_text())
        except FileNotFoundError:
            raise ConfigError(f"spec file not found: {args.spec}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.spec}: invalid JSON ({exc})") from None
    known = {f.name for f in fields(SyntheticSpec)}
    unknown = set(spec_d) - known
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    if args.seed is not None:
        spec_d["seed"] = args.seed
    spec = SyntheticSpec(**spec_d)
    out, man = _start(args, {"spec": vars(spec)}, argv)
    cohort = generate(spec)
    paths = cohort.write(out, class_name=args.class_name)
    return _finish(out, man, outputs={k: p.name for k, p in paths.items()})


def cmd_pan(args, argv):
    cfg = _config(args)
    out, man = _start(args, cfg.to_dict(), argv)
    m = _load(args, cfg, need_labels=True)
    res = run_pan(m, cfg)
    summary = write_pan_outputs(out, res, cfg)
    return _finish(out, man, summary_keys=sorted(summary))


def cmd_within(args, argv):
    cfg = _config(args)
    if cfg.cluster is not None and cfg.k is None:
        raise ConfigError("--cluster needs --k")
    out, man = _start(args, cfg.to_dict(), argv)
    m = _load(args, cfg)
    res = analyze_within(embed(m, cfg), cfg, cfg.k, cfg.cluster)
    write_within_outputs(out, res, cfg)
    return _finish(out, man)


def cmd_scan_k(args, argv):
    cfg = _config(args)
    out, man = _start(args, cfg.to_dict(), argv)
    emb = embed(_load(args, cfg), cfg)
    kscan = scan_k(emb.latent, cfg.k_range, cfg.n_init, cfg.seed)
    kscan.to_csv(out / "kscan.csv")
    emb.history.to_csv(out / "training_history.csv")
    figs = emit_figures(out, kscan=kscan, history=emb.history)
    write_json(out / "summary.json", {"best_silhouette_k": kscan.best_silhouette_k(), "figures": figs})
    return _finish(out, man)


def cmd_stability(args, argv):
    cfg = _config(args)
    out, man = _start(args, cfg.to_dict(), argv)
    emb = embed(_load(args, cfg), cfg)
    rep = discovery_scan(emb.latent, cfg.k_range, cfg.runs, cfg.seed, cfg.stability_n_init,
                         cfg.rare_threshold, cfg.stable_threshold)
    rep.to_csv(out / "stability.csv")
    write_json(out / "discovery.json", rep.to_json())
    return _finish(out, man)


def cmd_de(args, argv):
    cfg = _config(args)
    out, man = _start(args, cfg.to_dict(), argv)
    emb = embed(_load(args, cfg), cfg)
    k, cluster, ref = cfg.k, cfg.cluster, None
    if k is None:
        rep = discovery_scan(emb.latent, cfg.k_range, cfg.runs, cfg.seed, cfg.stability_n_init,
                             cfg.rare_threshold, cfg.stable_threshold)
        if rep.chosen is None:
            raise ConfigError("no rare-and-stable cluster found; pass --k and --cluster")
        k, chosen_cluster = rep.chosen
        ref = rep.reference_labels[k]
        cluster = chosen_cluster if cluster is None else cluster
    if cluster is None:
        raise ConfigError("--cluster is required together with --k")
    sol = final_refit(emb.latent, k, cfg.final_n_init, cfg.seed, reference_labels=ref)
    de = de_cluster_vs_rest(emb.scaled, sol.labels, cluster)
    markers = select_markers(de, cfg.fdr_threshold, cfg.n_markers)
    de.to_csv(out / f"de_c{cluster}.csv")
    write_json(out / "markers.json", {
        "k": k, "cluster": cluster, "top_up": markers.top_up, "top_down": markers.top_down,
        "fdr_threshold": markers.fdr_threshold, "shortfall": markers.shortfall,
    })
    return _finish(out, man)


def cmd_report(args, argv):
    src = Path(args.run) / "figures"
    if not src.is_dir():
        raise MissingFile(f"no figures/ directory under {args.run}")
    out, man = _start(args, {"run": str(args.run)}, argv)
    dst = out / "figures"
    dst.mkdir()
    for name in (*FIGURES, "heatmap_samples"):
        twin = src / f"{name}.csv"
        if twin.exists():
            shutil.copyfile(twin, dst / twin.name)
    done = render_all(dst)
    return _finish(out, man, figures=done)


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "pan": cmd_pan,
    "within": cmd_within,
    "scan-k": cmd_scan_k,
    "stability": cmd_stability,
    "de": cmd_de,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args, argv)
    except RaresubError as exc:
        print(f"raresub: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"raresub: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
