import json
from pathlib import Path

import pytest

from raresub.cli import main

SMALL_SPEC = dict(n_samples=90, n_genes=600, n_marker_genes=30, background_genes_per_cluster=100,
                  rare_fraction=0.08, seed=3)
FAST = dict(top_n=300, latent_dim=16, max_epochs=40, patience=10, runs=5, k_max=6,
            stability_n_init=3, n_init=3, final_n_init=5)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()
    return code, Path(out[-1]) if code == 0 and out else None


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(json.dumps(SMALL_SPEC))
    (root / "fast.json").write_text(json.dumps(FAST))
    assert main(["synth", "--spec", str(root / "spec.json"), "--out", str(root / "runs")]) == 0
    synth_dir = next((root / "runs").glob("synth-*"))
    return root, synth_dir


def _args(cohort, *extra):
    root, sd = cohort
    return ["--data", sd / "data.csv", "--labels", sd / "labels.csv", "--config", root / "fast.json",
            "--out", root / "runs", *extra]


def test_synth_outputs(cohort):
    _, sd = cohort
    for name in ("data.csv", "labels.csv", "ground_truth.json", "manifest.json"):
        assert (sd / name).exists()
    truth = json.loads((sd / "ground_truth.json").read_text())
    assert len(truth["member_ids"]) == 7


def test_config_error_exit_2(cohort, capsys):
    root, _ = cohort
    bad = root / "bad.json"
    bad.write_text('{"nope": 1}')
    assert main(["scan-k", *map(str, _args(cohort)), "--config", str(bad)]) == 2


def test_missing_data_exit_3(cohort, capsys):
    root, _ = cohort
    code = main(["ingest", "--data", str(root / "absent.csv"), "--labels", str(root / "absent2.csv"),
                 "--out", str(root / "runs")])
    assert code == 3


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["within"])
    assert info.value.code == 2


def test_cluster_without_k(cohort, capsys):
    assert main(["within", *map(str, _args(cohort)), "--cluster", "1"]) == 2


def test_ingest(cohort, capsys):
    code, out = run(["ingest", *_args(cohort)], capsys)
    assert code == 0
    d = json.loads((out / "ingest.json").read_text())
    assert d["n_samples"] == 90 and d["class_counts"] == {"SYN": 90}


@pytest.fixture(scope="module")
def within_runs(cohort):
    root, _ = cohort
    dirs = []
    for _ in range(2):
        before = set((root / "runs").iterdir())
        assert main(["within", *map(str, _args(cohort))]) == 0
        dirs.append(next(iter(set((root / "runs").iterdir()) - before)))
    return dirs


def test_within_outputs(within_runs, cohort):
    out = within_runs[0]
    for name in ("kscan.csv", "stability.csv", "discovery.json", "summary.json", "manifest.json",
                 "labels.csv", "latent.csv", "training_history.csv"):
        assert (out / name).exists(), name
    disc = json.loads((out / "discovery.json").read_text())
    assert disc["chosen"] is not None
    summary = json.loads((out / "summary.json").read_text())
    assert {"k_chosen", "rare_cluster", "prevalence", "jaccard", "top_gene", "figures"} <= set(summary)
    assert list(out.glob("de_c*.csv"))
    figs = out / "figures"
    assert (figs / "volcano.svg").exists() and (figs / "volcano.csv").exists()
    truth = json.loads((cohort[1] / "ground_truth.json").read_text())
    members = {r.split(",")[0] for r in (out / "labels.csv").read_text().splitlines()[1:]
               if r.split(",")[1] == str(summary["rare_cluster"])}
    assert len(members & set(truth["member_ids"])) / len(members | set(truth["member_ids"])) >= 0.8


def test_within_rerun_is_byte_identical(within_runs):
    a, b = within_runs
    for name in ("kscan.csv", "stability.csv", "labels.csv", "latent.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    for f in a.glob("de_c*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_report_rerenders(within_runs, cohort, capsys):
    root, _ = cohort
    code, out = run(["report", "--run", within_runs[0], "--out", root / "runs"], capsys)
    assert code == 0
    assert (out / "figures" / "silhouette.svg").read_bytes() == \
        (within_runs[0] / "figures" / "silhouette.svg").read_bytes()


def test_report_missing_figures(cohort, capsys):
    root, _ = cohort
    assert main(["report", "--run", str(root), "--out", str(root / "runs")]) == 3


def test_scan_k_and_de(cohort, capsys):
    code, out = run(["scan-k", *_args(cohort)], capsys)
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["best_silhouette_k"] in range(2, 7)
    code, out = run(["de", *_args(cohort)], capsys)
    assert code == 0
    markers = json.loads((out / "markers.json").read_text())
    assert markers["top_up"] or markers["top_down"]


def test_pan_on_labelled_cohort(tmp_path, capsys):
    from raresub.data_ingest import ExpressionMatrix, save_matrix
    from raresub.synth import SyntheticSpec, generate

    c = generate(SyntheticSpec(**SMALL_SPEC))
    names = [f"T{g}" for g in c.ground_truth]
    m = c.matrix
    save_matrix(ExpressionMatrix(m.sample_ids, m.gene_ids, m.values, names), tmp_path / "d.csv", tmp_path / "l.csv")
    (tmp_path / "fast.json").write_text(json.dumps(FAST))
    code, out = run(["pan", "--data", tmp_path / "d.csv", "--labels", tmp_path / "l.csv",
                     "--config", tmp_path / "fast.json", "--out", tmp_path / "runs", "--k", 4], capsys)
    assert code == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["k"] == 4 and s["dof"] == 9
    assert (out / "contingency.csv").read_text().splitlines()[0] == "class,0,1,2,3"
