"""Toy corpus generation: determinism, structure, speaker separation."""

import numpy as np
import pytest

from vclab.corpus import (CorpusError, CorpusManifest, make_toy_corpus,
                          speaker_voices)
from vclab.dsp import analyze
from vclab.wavio import read_wav


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    manifest = make_toy_corpus(out, seed=7, n_speakers=3, train_utts=3,
                               test_utts=2, utt_seconds=0.7)
    return manifest


def test_same_seed_gives_byte_identical_corpus(tmp_path):
    m1 = make_toy_corpus(tmp_path / "a", seed=11, n_speakers=2, train_utts=2,
                         test_utts=1, utt_seconds=0.5)
    m2 = make_toy_corpus(tmp_path / "b", seed=11, n_speakers=2, train_utts=2,
                         test_utts=1, utt_seconds=0.5)
    assert [e[:2] for e in m1.entries] == [e[:2] for e in m2.entries]
    for (s1, sp1, r1), (s2, sp2, r2) in zip(m1.entries, m2.entries):
        assert (m1.root / r1).read_bytes() == (m2.root / r2).read_bytes()
    assert (m1.root / "manifest.txt").read_text() == (m2.root / "manifest.txt").read_text()


def test_different_seed_changes_audio(tmp_path):
    m1 = make_toy_corpus(tmp_path / "a", seed=1, n_speakers=2, train_utts=1,
                         test_utts=1, utt_seconds=0.5)
    m2 = make_toy_corpus(tmp_path / "b", seed=2, n_speakers=2, train_utts=1,
                         test_utts=1, utt_seconds=0.5)
    w1 = (m1.root / m1.entries[0][2]).read_bytes()
    w2 = (m2.root / m2.entries[0][2]).read_bytes()
    assert w1 != w2


def test_speaker_log_f0_means_are_separated(small_corpus):
    means = []
    for spk in small_corpus.speakers:
        vals = []
        for path in small_corpus.utterances(spk, "train"):
            track, _ = analyze(read_wav(path))
            vals.append(track.log_f0[track.voiced])
        means.append(np.mean(np.concatenate(vals)))
    means = np.array(means)
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            assert abs(means[i] - means[j]) > 0.1


def test_utterances_are_mostly_voiced(small_corpus):
    for spk in small_corpus.speakers:
        for path in small_corpus.utterances(spk, "train"):
            track, _ = analyze(read_wav(path))
            assert np.mean(track.voiced) >= 0.5, path


def test_manifest_round_trip(small_corpus):
    loaded = CorpusManifest.load(small_corpus.root / "manifest.txt")
    assert loaded.speakers == small_corpus.speakers
    assert loaded.entries == small_corpus.entries


def test_splits_are_disjoint(small_corpus):
    train = {r for _, s, r in small_corpus.entries if s == "train"}
    test = {r for _, s, r in small_corpus.entries if s == "test"}
    assert not train & test
    assert len(train) == 3 * 3 and len(test) == 3 * 2


def test_single_speaker_rejected():
    with pytest.raises(CorpusError):
        speaker_voices(0, 1)


def test_content_is_parallel_but_voices_differ(small_corpus):
    # same utterance index across speakers: comparable length, different audio
    paths = [small_corpus.utterances(s, "train")[0] for s in small_corpus.speakers]
    waves = [read_wav(p) for p in paths]
    lens = np.array([len(w) for w in waves])
    assert lens.max() <= lens.min() * 1.6
    assert not np.array_equal(waves[0].samples, waves[1].samples)
