import json
from collections import Counter
from pathlib import Path

import pytest

from tracelens.cli import RunManifest, build_parser, main
from tracelens.synthgen import load_truth, truth_path
from tracelens.trace_model import read_spans


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus(tmp_path, small_template, capsys):
    (tmp_path / "t.json").write_text(small_template.to_json())
    out = tmp_path / "corpus"
    code, _, _ = run(capsys, "gen", "--template", tmp_path / "t.json", "--count", 8,
                     "--experiment-count", 6, "--noise", 0.0, "--seed", 3,
                     "--fault-types", "throw_exception", "-o", out)
    assert code == 0
    return out


def tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_gen_is_reproducible(tmp_path, small_template, capsys):
    (tmp_path / "t.json").write_text(small_template.to_json())
    for d in ("a", "b"):
        assert run(capsys, "gen", "--template", tmp_path / "t.json", "--count", 5,
                   "--experiment-count", 4, "--seed", 9, "-o", tmp_path / d)[0] == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b
    assert sum(k.startswith("training/") and k.endswith(".jsonl") for k in a) == 5
    assert sum(k.startswith("experiments/") and k.endswith(".truth.json") for k in a) == 4


def recount_contexts(seqs, d):
    seen = set()
    for s in seqs:
        for i in range(len(s)):
            for k in range(min(d, i) + 1):
                seen.add(tuple(s[i - k:i]))
    return len(seen)


def test_train_writes_model_and_counts_contexts(corpus, capsys):
    code, out, _ = run(capsys, "train", "--manifest", corpus / "manifest.json", "--order", 3)
    assert code == 0 and "order 3 (override)" in out
    meta = json.loads((corpus / "model" / "meta.json").read_text())
    assert meta["order"] == 3 and meta["order_source"] == "override"
    seqs = []
    for p in sorted((corpus / "training").glob("*.jsonl")):
        pairs = [(e.sender, e.service) for e in read_spans(p)]
        seqs.append([x for x in pairs if x != ("bg", "tick")])
    assert meta["contexts"] == recount_contexts(seqs, 3)
    assert json.loads((corpus / "model" / "background.json").read_text()) == [["bg", "tick"]]


def test_train_without_idle_warns(corpus, tmp_path, capsys, caplog):
    code, _, _ = run(capsys, "train", "--training", corpus / "training", "-o", tmp_path / "m")
    assert code == 0
    assert "no idle traces" in caplog.text
    bg = json.loads((tmp_path / "m" / "background.json").read_text())
    assert bg == []
    meta = json.loads((tmp_path / "m" / "meta.json").read_text())
    assert meta["order_source"] == "estimated"


def test_analyze_fault_free_input_has_no_anomalies(corpus, capsys):
    run(capsys, "train", "--manifest", corpus / "manifest.json")
    first = sorted((corpus / "training").glob("*.jsonl"))[0]
    code, out, _ = run(capsys, "analyze", "--model", corpus / "model", first)
    assert code == 0
    assert "# anomalies 0 " in out
    assert all(l.startswith(("#", "=")) for l in out.splitlines())


def test_analyze_truncation_matches_ground_truth(corpus, tmp_path, capsys):
    run(capsys, "train", "--manifest", corpus / "manifest.json")
    code, out, _ = run(capsys, "analyze", "--model", corpus / "model", "--format", "json",
                       "-o", tmp_path / "reports", corpus / "experiments")
    assert code == 0 and len(out.splitlines()) == 6
    for path in sorted((corpus / "experiments").glob("*.jsonl")):
        truth = load_truth(truth_path(path))
        report = json.loads((tmp_path / "reports" / f"{path.stem}.report.json").read_text())
        missing = Counter(r["name"] for r in report["records"] if r["label"] == "missing")
        assert missing == Counter(f"{s}:{v}" for _, (s, v) in truth.missing)


def test_render_saved_report(corpus, tmp_path, capsys):
    run(capsys, "train", "--manifest", corpus / "manifest.json")
    run(capsys, "analyze", "--model", corpus / "model", "--format", "json",
        "-o", tmp_path / "r", corpus / "experiments")
    report = sorted((tmp_path / "r").glob("*.report.json"))[0]
    code, out, _ = run(capsys, "render", report, "--format", "text")
    assert code == 0 and out.startswith("# experiment")
    code, _, _ = run(capsys, "render", report, "--format", "svg", "-o", tmp_path / "x.svg")
    assert code == 0 and (tmp_path / "x.svg").read_text().startswith("<?xml")


def test_missing_file_exit_code_names_path(corpus, capsys):
    run(capsys, "train", "--manifest", corpus / "manifest.json")
    code, _, err = run(capsys, "analyze", "--model", corpus / "model", "/no/such/trace.jsonl")
    assert code == 6 and "/no/such/trace.jsonl" in err
    code, _, err = run(capsys, "train", "--training", "/no/such/dir")
    assert code != 0 and "/no/such/dir" in err


def test_eval_fp_rows(tmp_path, capsys):
    code, out, _ = run(capsys, "eval-fp", "--preset", "sto", "--n-values", "2,4", "--m", 2,
                       "--repetitions", 2, "--corpus-size", 10, "-o", tmp_path)
    assert code == 0
    rows = (tmp_path / "fp.csv").read_text().splitlines()
    assert [tuple(r.split(",")[:2]) for r in rows[1:]] == [
        ("2", "lcs"), ("2", "vmm"), ("4", "lcs"), ("4", "vmm")]
    assert isinstance(json.loads((tmp_path / "uncertain.json").read_text()), list)


def test_bench_axes_monotone(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--preset", "sto", "--training-counts", "2,4",
                       "--experiment-counts", "2,4", "--length-factors", "1,2",
                       "--repeats", 1, "--order", 5, "-o", tmp_path)
    assert code == 0 and "R^2" in out
    rows = [r.split(",") for r in (tmp_path / "bench.csv").read_text().splitlines()[1:]]
    for axis in ("training", "experiments", "events"):
        xs = [float(r[1]) for r in rows if r[0] == axis]
        assert len(xs) == 2 and xs == sorted(xs)


def test_flags_override_manifest(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps(
        {"eps_spurious": 0.3, "order": 4, "training": ["tr"], "model": "mod"}))
    args = build_parser().parse_args(["analyze", "--manifest", str(tmp_path / "m.json"),
                                      "--eps-spurious", "0.1"])
    man = RunManifest.load(args.manifest).override(args)
    assert man.eps_spurious == 0.1 and man.order == 4
    assert man.training == [str(tmp_path / "tr")] and man.model == str(tmp_path / "mod")


def test_bad_manifest_and_thresholds(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "train", "--manifest", tmp_path / "m.json")[0] == 4
    assert run(capsys, "gen", "--eps-spurious", "1.5", "-o", tmp_path / "g")[0] == 4
    assert run(capsys, "gen", "--eps-missing", "-0.2", "-o", tmp_path / "g")[0] == 4
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--mode", "bogus"])
    assert exc.value.code == 2
