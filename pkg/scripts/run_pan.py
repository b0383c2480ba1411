"""Pan-cancer negative control on the UCI cohort.

    python scripts/run_pan.py --data data/uci/data.csv --labels data/uci/labels.csv
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from raresub.config import PipelineConfig
from raresub.data_ingest import load_matrix
from raresub.pipeline import run_pan
from raresub.report import write_pan_outputs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", required=True)
    ap.add_argument("--labels", required=True)
    ap.add_argument("--out", default="runs/pan")
    ap.add_argument("--k-min", type=int, default=5)
    ap.add_argument("--k-max", type=int, default=7)
    ap.add_argument("--ae-seed", type=int, default=0)
    args = ap.parse_args()

    cfg = PipelineConfig(k_min=args.k_min, k_max=args.k_max, ae_seed=args.ae_seed)
    res = run_pan(load_matrix(args.data, args.labels), cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = write_pan_outputs(out, res, cfg)
    chi = res.chi
    print(json.dumps({
        "k": res.k, "p_value": chi.p_value, "p_underflow": chi.p_underflow,
        "cramers_v": chi.cramers_v, "cramers_v_full": chi.cramers_v_full,
        "modal_capture": res.table.modal_capture(),
    }, indent=2))
    print(f"outputs in {out} ({len(summary)} summary fields)")


if __name__ == "__main__":
    main()
