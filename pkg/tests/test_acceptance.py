"""Acceptance suite: one test per release criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per
criterion is printed by the conftest reporting hook.
"""

import concurrent.futures
import json
import math
import random
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

import ctc_oracle
import kn_oracle
from conftest import KN_FIXTURE_CORPUS
from docscribe.acoustic_io import (
    LogitFormatError,
    logits_from_bytes,
    logits_to_bytes,
    toy_acoustic_model,
)
from docscribe.corpus import Manifest, Utterance, load_manifest, save_manifest
from docscribe.ctc_decoder import (
    DecodeConfig,
    LogitMatrix,
    VocabMismatch,
    beam_search,
    greedy_decode,
)
from docscribe.augmentation import SynthRecord, augmentation_schedule
from docscribe.evaluation import categorized_wer, edit_counts, filtered_report
from docscribe.nbest import Hypothesis, NBestList
from docscribe.ngram_lm import LmQueryState, read_arpa, train, write_arpa
from docscribe.orthography import Alphabet, normalize, transcript_from_ids
from docscribe.rescoring import rescore
from docscribe.service import ServiceConfig, create_app

DATA = Path(__file__).parent / "data"

# ----------------------------------------------------------- shared state


def _normalized(rows):
    m = rows.max(axis=1, keepdims=True)
    return rows - (m + np.log(np.exp(rows - m).sum(axis=1, keepdims=True)))


@pytest.fixture(scope="module")
def ctc_instances():
    """200 random normalized logit matrices (T <= 6, V <= 4) with their
    exhaustive per-string exact posteriors."""
    rng = np.random.default_rng(20240809)
    alphabets = {
        2: Alphabet(graphemes=()),
        3: Alphabet(graphemes=("A",)),
        4: Alphabet(graphemes=("A", "B")),
    }
    instances = []
    for _ in range(200):
        V = int(rng.choice([2, 3, 4], p=[0.15, 0.25, 0.6]))
        T = int(rng.integers(1, 7))
        matrix = LogitMatrix(
            frames=_normalized(rng.normal(0.0, 2.0, size=(T, V))),
            frame_hop_ms=10.0,
            alphabet=alphabets[V],
        )
        instances.append((matrix, ctc_oracle.enumerate_strings(matrix)))
    return instances


class ToyLanguage:
    """30-word toy language with a frequency-skewed sentence generator."""

    def __init__(self):
        self.alphabet = Alphabet(graphemes=tuple("ABCDEFGH"))
        rng = random.Random(2024)
        words = set()
        while len(words) < 30:
            words.add("".join(rng.choice("ABCDEFGH") for _ in range(rng.randint(2, 4))))
        self.words = sorted(words)
        self.weights = [1.0 / (i + 1) for i in range(len(self.words))]
        self.train_sentences = [self.sentence(rng) for _ in range(400)]
        self.lm = train(self.train_sentences, order=4)
        self.train_vocab = {w for s in self.train_sentences for w in s}
        test_rng = random.Random(777)
        self.test_texts = [" ".join(self.sentence(test_rng)) for _ in range(200)]

    def sentence(self, rng):
        return [
            rng.choices(self.words, weights=self.weights)[0]
            for _ in range(rng.randint(2, 5))
        ]


@pytest.fixture(scope="module")
def toy():
    return ToyLanguage()


# -------------------------------------------------------------- criteria


def test_criterion_ctc_exactness(ctc_instances):
    """Exhaustive-width beam search equals brute-force posterior argmax on
    200 random instances; exact transcript match, 100% of cases."""
    for matrix, scores in ctc_instances:
        ab = matrix.alphabet
        best = min(
            scores,
            key=lambda s: (-scores[s], transcript_from_ids(s, ab).text),
        )
        want = transcript_from_ids(best, ab).text
        nb = beam_search(matrix, DecodeConfig(beam_width=1200, alpha=0.0, beta=0.0))
        assert nb.top.transcript.text == want


def test_criterion_ctc_conservation(ctc_instances):
    """Sum of exp(ctc_forward) over all feasible label strings = 1 +- 1e-6."""
    for matrix, scores in ctc_instances:
        total = sum(math.exp(lp) for lp in scores.values())
        assert total == pytest.approx(1.0, abs=1e-6)


def test_criterion_kn_correctness(tmp_path):
    """Fixture-corpus conditionals match the brute-force modified-KN oracle
    within 1e-6; every context sums to 1 +- 1e-6; ARPA round trip is
    query-equivalent within 1e-6; external-toolkit-style ARPA loads."""
    model = train(KN_FIXTURE_CORPUS, order=2)
    vocab = sorted(model.vocab)
    contexts = [()] + [(w,) for w in vocab] + [(a, b) for a in vocab[:3] for b in vocab[:3]]
    for ctx in contexts:
        total = 0.0
        for w in vocab:
            lp, _ = model.score_word(LmQueryState(context=ctx), w)
            p = 10.0 ** lp
            want = kn_oracle.probability(KN_FIXTURE_CORPUS, 2, ctx, w)
            assert p == pytest.approx(want, abs=1e-6), (ctx, w)
            total += p
        assert total == pytest.approx(1.0, abs=1e-6), ctx

    path = tmp_path / "fixture.arpa"
    write_arpa(model, path)
    back = read_arpa(path)
    for gram in model.table:
        state = LmQueryState(context=gram[:-1])
        a, _ = model.score_word(state, gram[-1])
        b, _ = back.score_word(state, gram[-1])
        assert b == pytest.approx(a, abs=1e-6)

    external = read_arpa(DATA / "kenlm_style.arpa")
    assert external.order == 2
    assert math.isfinite(external.score_sequence(["A", "B"]))


def test_criterion_wer_cer_oracle():
    """Alignment cost equals the reference DP on 1000 random pairs
    (length <= 20), 100% agreement; per-category error counts always sum
    to the overall count."""
    from test_evaluation import reference_edit_distance

    rng = np.random.default_rng(424242)
    vocab = list("ABCDEFG")
    ab = Alphabet(graphemes=tuple(vocab))
    train_vocab = {"A", "B", "C"}
    for _ in range(1000):
        ref = [vocab[i] for i in rng.integers(0, len(vocab), size=rng.integers(1, 21))]
        hyp = [vocab[i] for i in rng.integers(0, len(vocab), size=rng.integers(0, 21))]
        s, d, i = edit_counts(ref, hyp)
        assert s + d + i == reference_edit_distance(ref, hyp)
        rep = categorized_wer(
            [(normalize(" ".join(ref), ab), normalize(" ".join(hyp), ab))],
            train_vocab,
        )
        assert rep.seen.errors + rep.unseen.errors == s + d + i


def test_criterion_toy_end_to_end(toy):
    """Fused 4-gram decoding (alpha=0.5, beta=1.0) strictly beats alpha=0
    on 200 sigma=1.5 toy utterances; sigma=0 gives WER = CER = 0."""
    plain_pairs, fused_pairs, clean_pairs = [], [], []
    fused_cfg = DecodeConfig(beam_width=8, alpha=0.5, beta=1.0, lm=toy.lm)
    plain_cfg = DecodeConfig(beam_width=8, alpha=0.0, beta=0.0)
    for i, text in enumerate(toy.test_texts):
        ref = normalize(text, toy.alphabet)
        noisy = toy_acoustic_model(
            ref, toy.alphabet, frames_per_grapheme=2, noise_sigma=1.5,
            seed=10_000 + i, peak_mass=0.9,
        )
        plain_pairs.append((ref, beam_search(noisy.logits, plain_cfg).top.transcript))
        fused_pairs.append((ref, beam_search(noisy.logits, fused_cfg).top.transcript))
        clean = toy_acoustic_model(
            ref, toy.alphabet, frames_per_grapheme=2, noise_sigma=0.0, peak_mass=0.9
        )
        clean_pairs.append((ref, greedy_decode(clean.logits).transcript))

    plain = categorized_wer(plain_pairs, toy.train_vocab)
    fused = categorized_wer(fused_pairs, toy.train_vocab)
    clean = categorized_wer(clean_pairs, toy.train_vocab)
    assert fused.wer_all < plain.wer_all
    assert clean.wer_all == 0.0
    assert clean.cer == 0.0


def test_criterion_cedilla_filter():
    """A batch whose only ref/hyp differences are cedillas scores WER > 0
    unfiltered and exactly 0 filtered."""
    ab = Alphabet(graphemes=("C", "Ç", "S", "E", "N", "T", "Ţ"))
    items = [
        ("SÇEN TE", "SCEN TE"),       # missing cedilla
        ("SET EN", "SEŢ EN"),          # extraneous cedilla
        ("ÇEN ÇT", "ÇEN CŢ"),  # one dropped, one added
    ]
    pairs = [(normalize(r, ab), normalize(h, ab)) for r, h in items]
    vocab = {w for r, _ in pairs for w in r.words}
    rep = filtered_report(pairs, vocab, ab)
    assert rep.wer_all > 0.0
    assert rep.filtered.wer_all == 0.0


def test_criterion_augmentation_monotonicity():
    """Nested 4-step schedule: OOV vs a fixed test set is non-increasing
    and ends exactly at the hand-computed final value."""
    real = Manifest(
        name="real",
        utterances=(
            Utterance(id="r1", text="AB CD", duration_s=60.0),
            Utterance(id="r2", text="CD", duration_s=60.0),
        ),
    )
    test_m = Manifest(
        name="test",
        utterances=(Utterance(id="t1", text="AB EF GH IJ", duration_s=2.0),),
    )
    synth = [
        SynthRecord(id="s1", text="EF EF", audio_path=None, duration_s=3600.0),
        SynthRecord(id="s2", text="GH", audio_path=None, duration_s=3600.0),
        SynthRecord(id="s3", text="KL", audio_path=None, duration_s=3600.0),
        SynthRecord(id="s4", text="MN KL", audio_path=None, duration_s=3600.0),
    ]
    sched = augmentation_schedule(real, synth, [1, 2, 3, 4], test_m, seed=11)
    rates = [oov for _, _, oov in sched]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    # hand count at the final step: all four records included, so the
    # training vocabulary is {AB, CD, EF, GH, KL, MN}; of the four test
    # types only IJ stays unseen -> 1/4
    assert rates[-1] == 0.25
    assert sched[0][1].ids() <= sched[-1][1].ids()


def test_criterion_rescoring(toy):
    """alpha=0 preserves order on 100 random n-best fixtures; the
    constructed flip fixture reorders exactly as the oracle computes."""
    ab = Alphabet(graphemes=("A", "B", "C"))
    lm = train(KN_FIXTURE_CORPUS, order=2)
    rng = np.random.default_rng(5150)
    texts = ["A B", "B A", "A C", "C", "B", "A A"]
    for _ in range(100):
        k = int(rng.integers(1, len(texts) + 1))
        chosen = list(rng.permutation(texts)[:k])
        ams = sorted(rng.normal(-8, 2, size=k), reverse=True)
        entries = []
        for text, am in zip(chosen, ams):
            t = normalize(text, ab)
            entries.append(
                Hypothesis(transcript=t, acoustic_logp=float(am),
                           combined=float(am), word_count=len(t.words))
            )
        nb = NBestList(utterance_id="u", entries=tuple(entries), source="fx")
        out = rescore(nb, lm, alpha=0.0, gamma_len=0.0)
        assert [h.transcript.text for h in out] == [h.transcript.text for h in nb]

    # flip fixture: equal acoustic scores; the oracle's sequence scores
    # decide the expected order and the exact combined values
    t_good = normalize("A B", ab)
    t_bad = normalize("C C C", ab)
    nb = NBestList(
        utterance_id="u",
        entries=(
            Hypothesis(transcript=t_bad, acoustic_logp=-5.0, combined=-5.0),
            Hypothesis(transcript=t_good, acoustic_logp=-5.0, combined=-5.0),
        ),
        source="fx",
    )
    lg_good = kn_oracle.sequence_log10(KN_FIXTURE_CORPUS, 2, ["A", "B"])
    lg_bad = kn_oracle.sequence_log10(KN_FIXTURE_CORPUS, 2, ["C", "C", "C"])
    assert lg_good > lg_bad
    out = rescore(nb, lm, alpha=1.0)
    assert [h.transcript.text for h in out] == ["A B", "C C C"]
    assert out.entries[0].combined == pytest.approx(
        -5.0 + math.log(10) * lg_good, abs=1e-6
    )
    assert out.entries[1].combined == pytest.approx(
        -5.0 + math.log(10) * lg_bad, abs=1e-6
    )


def test_criterion_formats(tmp_path):
    """CTCL and manifest round trips are bit-exact; 10,000 header fuzz
    iterations always raise a typed error, never crash."""
    ab = Alphabet(graphemes=("A", "B", "C"))
    rng = np.random.default_rng(31337)
    matrix = LogitMatrix(
        frames=_normalized(rng.normal(0.0, 1.5, size=(7, ab.size))),
        frame_hop_ms=20.0,
        alphabet=ab,
    )
    blob = logits_to_bytes(matrix)
    assert logits_to_bytes(logits_from_bytes(blob)) == blob

    m = Manifest(
        name="m",
        utterances=(
            Utterance(id="u1", text="AB", duration_s=1.25, audio_path="a.wav",
                      difficulty=-2.5, extra={"k": [1, "x"]}),
            Utterance(id="u2", text="C BA", duration_s=3.0, speaker="spk"),
        ),
    )
    p1, p2 = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
    save_manifest(m, p1)
    save_manifest(load_manifest(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()

    fuzzable = list(range(0, 16)) + list(range(20, 24))  # magic/version/T/V/vocab_bytes
    for _ in range(10_000):
        pos = int(rng.choice(fuzzable))
        new = int(rng.integers(0, 256))
        if new == blob[pos]:
            new = (new + 1) % 256
        corrupted = blob[:pos] + bytes([new]) + blob[pos + 1 :]
        with pytest.raises((LogitFormatError, VocabMismatch)):
            logits_from_bytes(corrupted)


def test_criterion_service(tmp_path):
    """HTTP transcription of a sigma=0 toy fixture returns the exact
    transcript; 32 concurrent flag POSTs persist 32 records that survive
    a service restart."""
    alphabet_path = tmp_path / "alphabet.txt"
    alphabet_path.write_text("<blank>\n<space>\nA\nB\nC\nD\nE\nF\nG\nH\n")
    cfg = ServiceConfig(alphabet_path=str(alphabet_path), data_dir=str(tmp_path / "data"))
    ab = Alphabet(graphemes=tuple("ABCDEFGH"))
    t = normalize("ABC DE FGH", ab)
    sample = toy_acoustic_model(t, ab, frames_per_grapheme=2, noise_sigma=0.0)
    blob = logits_to_bytes(sample.logits)

    app = create_app(cfg)
    client = TestClient(app)
    resp = client.post("/v1/transcribe", files={"logits": ("f.ctcl", blob)})
    assert resp.status_code == 200
    assert resp.json()["text"] == "ABC DE FGH"

    def post_one(i):
        with TestClient(app) as c:
            r = c.post("/v1/flags", json={"audio_ref": f"a{i}", "transcription": f"t{i}"})
            assert r.status_code == 200
            return r.json()["flag_id"]

    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        ids = set(pool.map(post_one, range(32)))
    assert len(ids) == 32

    restarted = TestClient(create_app(cfg))
    listed = restarted.get("/v1/flags").json()
    assert len(listed) == 32
    assert {r["flag_id"] for r in listed} == ids
