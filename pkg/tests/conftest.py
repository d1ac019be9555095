"""Session-scoped artifacts shared across the suite.

One toy corpus is generated and analyzed once; the VAE and the WaveNet
variants derived from it back both the module tests and the acceptance
suite, so the expensive training runs happen a single time per session.
"""

import numpy as np
import pytest

from vclab.corpus import make_toy_corpus
from vclab.dsp import DspConfig, analyze
from vclab.vae import VaeConfig, train_vae
from vclab.wavio import read_wav

SEED = 7
N_SPEAKERS = 4
TRAIN_UTTS = 6
TEST_UTTS = 3
UTT_SECONDS = 0.8
RATE = 16000


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("toycorpus")
    return make_toy_corpus(out, seed=SEED, n_speakers=N_SPEAKERS,
                           train_utts=TRAIN_UTTS, test_utts=TEST_UTTS,
                           utt_seconds=UTT_SECONDS, sample_rate=RATE)


@pytest.fixture(scope="session")
def dsp_config():
    return DspConfig()


@pytest.fixture(scope="session")
def analyzed_corpus(toy_corpus, dsp_config):
    """{(speaker, split): [(wave, natural track), ...]} for every utterance."""
    out = {}
    for spk in toy_corpus.speakers:
        for split in ("train", "test"):
            pairs = []
            for path in toy_corpus.utterances(spk, split):
                wave = read_wav(path)
                track, _ = analyze(wave, dsp_config)
                pairs.append((wave, track))
            out[(spk, split)] = pairs
    return out


@pytest.fixture(scope="session")
def vae_train_corpus(toy_corpus, analyzed_corpus):
    corpus = []
    for spk in toy_corpus.speakers:
        for _, track in analyzed_corpus[(spk, "train")]:
            corpus.append((track, spk))
    return corpus


@pytest.fixture(scope="session")
def trained_vae(toy_corpus, vae_train_corpus):
    model, history = train_vae(vae_train_corpus, toy_corpus.speakers,
                               VaeConfig(steps=2000), seed=SEED)
    return model, history


@pytest.fixture(scope="session")
def vae_model(trained_vae):
    return trained_vae[0]
