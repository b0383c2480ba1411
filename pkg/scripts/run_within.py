"""Within-class discovery across several autoencoder seeds.

    python scripts/run_within.py --data data/uci/data.csv --labels data/uci/labels.csv --class KIRC
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from raresub.config import PipelineConfig
from raresub.data_ingest import filter_class, load_matrix
from raresub.pipeline import analyze_within, embed
from raresub.report import write_within_outputs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", required=True)
    ap.add_argument("--labels", required=True)
    ap.add_argument("--class", dest="class_name", default="KIRC")
    ap.add_argument("--out", default="runs/within")
    ap.add_argument("--ae-seeds", type=int, default=3)
    args = ap.parse_args()

    m = filter_class(load_matrix(args.data, args.labels), args.class_name)
    out = Path(args.out)
    rows = []
    for seed in range(args.ae_seeds):
        cfg = PipelineConfig(ae_seed=seed, class_name=args.class_name)
        res = analyze_within(embed(m, cfg), cfg)
        run_dir = out / f"ae{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        summary = write_within_outputs(run_dir, res, cfg)
        scan = {r.k: r for r in res.kscan.rows}
        row = {
            "ae_seed": seed,
            "silhouette_k2": scan[2].silhouette if 2 in scan else None,
            "dbi_k5": scan[5].dbi if 5 in scan else None,
            "hits": res.discovery.hits,
            "chosen": res.discovery.chosen,
            "prevalence": summary.get("prevalence"),
            "jaccard": summary.get("jaccard"),
            "top_gene": summary.get("top_gene"),
            "top_gene_effect": summary.get("top_gene_effect"),
        }
        rows.append(row)
        print(json.dumps(row))
    (out / "seeds.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
