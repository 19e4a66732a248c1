import numpy as np
import pytest
from scipy.io import wavfile

SR = 8000


def write_tone(path, freq, seconds, sr=SR, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    wave = amp * np.sin(2 * np.pi * freq * t)
    wavfile.write(path, sr, (wave * 32767).astype(np.int16))
    return path


@pytest.fixture
def tone_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write_tone(corpus / "trackA.wav", 220.0, 2.5)
    write_tone(corpus / "trackB.wav", 330.0, 1.0)
    write_tone(corpus / "trackC.wav", 440.0, 1.5)
    return corpus
