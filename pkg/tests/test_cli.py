import json

import pytest

from docscribe.acoustic_io import toy_acoustic_model, write_logits
from docscribe.cli import main
from docscribe.corpus import load_manifest
from docscribe.ngram_lm import read_arpa
from docscribe.orthography import Alphabet, normalize

ALPHABET = "<blank>\n<space>\nA\nB\nC\nD\nE\n"


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "alphabet.txt").write_text(ALPHABET, encoding="utf-8")
    (tmp_path / "corpus.txt").write_text("AB CD\nAB\nCD AB\n", encoding="utf-8")
    manifest = "\n".join(
        json.dumps({"id": f"u{i}", "text": t, "duration_s": 2.0, "difficulty": -float(i)})
        for i, t in enumerate(["AB CD", "AB", "CD", "AB AB", "CD AB"])
    )
    (tmp_path / "train.jsonl").write_text(manifest + "\n", encoding="utf-8")
    return tmp_path


def test_lm_train_and_perplexity(workdir, capsys):
    arpa = workdir / "lm.arpa"
    main(["lm-train", "--corpus", str(workdir / "corpus.txt"),
          "--arpa", str(arpa), "--order", "2"])
    assert arpa.exists()
    model = read_arpa(arpa)
    assert model.order == 2
    main(["lm-perplexity", "--arpa", str(arpa), "--corpus", str(workdir / "corpus.txt")])
    out = capsys.readouterr().out
    assert "perplexity:" in out


def test_decode_and_rescore(workdir, capsys):
    ab = Alphabet(graphemes=("A", "B", "C", "D", "E"))
    t = normalize("AB CD", ab)
    sample = toy_acoustic_model(t, ab, frames_per_grapheme=2, noise_sigma=0.0)
    ctcl = workdir / "utt.ctcl"
    write_logits(sample.logits, ctcl)
    arpa = workdir / "lm.arpa"
    main(["lm-train", "--corpus", str(workdir / "corpus.txt"), "--arpa", str(arpa)])
    capsys.readouterr()

    main(["decode", "--logits", str(ctcl), "--alphabet", str(workdir / "alphabet.txt"),
          "--greedy"])
    assert capsys.readouterr().out.strip() == "AB CD"

    nbest_path = workdir / "nbest.json"
    main(["decode", "--logits", str(ctcl), "--alphabet", str(workdir / "alphabet.txt"),
          "--arpa", str(arpa), "--nbest", "4", "--out", str(nbest_path)])
    assert capsys.readouterr().out.strip() == "AB CD"
    doc = json.loads(nbest_path.read_text())
    assert doc["entries"][0]["text"] == "AB CD"

    rescored = workdir / "rescored.json"
    main(["rescore", "--nbest", str(nbest_path), "--arpa", str(arpa),
          "--alphabet", str(workdir / "alphabet.txt"), "--alpha", "1.0",
          "--out", str(rescored)])
    out_doc = json.loads(rescored.read_text())
    assert out_doc["entries"][0]["text"] == "AB CD"


def test_evaluate(workdir, capsys):
    (workdir / "ref.tsv").write_text("u1\tAB CD\nu2\tAB\n", encoding="utf-8")
    (workdir / "hyp.tsv").write_text("u1\tAB CE\nu2\tAB\n", encoding="utf-8")
    main(["evaluate", "--ref", str(workdir / "ref.tsv"), "--hyp", str(workdir / "hyp.tsv"),
          "--alphabet", str(workdir / "alphabet.txt"),
          "--train-manifest", str(workdir / "train.jsonl"), "--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    assert doc["wer"]["all"] == pytest.approx(100.0 / 3)


def test_split_subset_augment_stats(workdir, capsys):
    main(["split", "--manifest", str(workdir / "train.jsonl"),
          "--test-fraction", "0.2",
          "--train-out", str(workdir / "tr.jsonl"), "--test-out", str(workdir / "te.jsonl")])
    tr = load_manifest(workdir / "tr.jsonl")
    te = load_manifest(workdir / "te.jsonl")
    assert len(tr) + len(te) == 5 and len(te) == 1

    main(["subset", "--manifest", str(workdir / "train.jsonl"),
          "--budget-s", "4.5", "--seed", "3", "--out", str(workdir / "sub.jsonl")])
    sub = load_manifest(workdir / "sub.jsonl")
    assert sub.total_duration_s <= 4.5

    synth = "\n".join(
        json.dumps({"id": f"s{i}", "text": "EE", "duration_s": 1800.0,
                    "metrics": {"mos": 4.0}})
        for i in range(4)
    )
    (workdir / "synth.jsonl").write_text(synth + "\n", encoding="utf-8")
    main(["augment", "--real", str(workdir / "train.jsonl"),
          "--synth", str(workdir / "synth.jsonl"), "--budget-h", "0.5",
          "--out", str(workdir / "aug.jsonl")])
    aug = load_manifest(workdir / "aug.jsonl")
    assert len(aug) == 5 + 1  # one 1800 s record fits in half an hour

    capsys.readouterr()
    main(["stats", "--manifest", str(workdir / "aug.jsonl")])
    doc = json.loads(capsys.readouterr().out)
    assert doc["n_utts"] == 6
