import numpy as np
import pytest

from parmi.eeg import (
    IDLE,
    DegenerateEpochError,
    EegStream,
    Epoch,
    StreamingEpocher,
    bandpass,
    covariance,
    design_bandpass,
    epoch_stream,
)

from oracles import sos_amplitude_gain


def sine_stream(freq, fs=256.0, seconds=4.0, channels=2):
    t = np.arange(int(seconds * fs)) / fs
    wave = np.sin(2 * np.pi * freq * t)
    return EegStream(fs, np.tile(wave, (channels, 1)))


def measured_gain(stream, out, fs, settle_seconds=1.0):
    lo = int(settle_seconds * fs)
    hi = stream.n_samples - lo
    return np.max(np.abs(out.samples[0, lo:hi])) / np.max(np.abs(stream.samples[0, lo:hi]))


@pytest.mark.parametrize("fs", [256.0, 250.0])
def test_passband_sine_survives(fs):
    stream = sine_stream(20.0, fs=fs)
    out = bandpass(stream, 8.0, 30.0, order=4)
    gain = measured_gain(stream, out, fs)
    # filtfilt applies |H| twice; compare against the analytic response
    sos = design_bandpass(8.0, 30.0, 4, fs)
    expected = sos_amplitude_gain(sos, 20.0, fs) ** 2
    assert gain == pytest.approx(expected, abs=0.01)
    assert gain >= 0.95


def test_stopband_sine_attenuated():
    fs = 256.0
    stream = sine_stream(50.0, fs=fs)
    out = bandpass(stream, 8.0, 30.0, order=4)
    gain = measured_gain(stream, out, fs)
    sos = design_bandpass(8.0, 30.0, 4, fs)
    expected = sos_amplitude_gain(sos, 50.0, fs) ** 2
    assert gain <= expected * 1.5
    assert 20 * np.log10(1.0 / gain) >= 20.0


def test_filter_zero_stream_stays_zero():
    stream = EegStream(256.0, np.zeros((3, 512)))
    out = bandpass(stream, 8.0, 30.0)
    assert np.all(out.samples == 0.0)


def test_filter_rejects_band_outside_nyquist():
    stream = sine_stream(20.0, fs=100.0)
    with pytest.raises(ValueError, match="band"):
        bandpass(stream, 8.0, 60.0)


def test_filter_passband_idempotence():
    fs = 256.0
    stream = sine_stream(15.0, fs=fs, seconds=6.0)
    once = bandpass(stream, 8.0, 30.0)
    twice = bandpass(once, 8.0, 30.0)
    g1 = measured_gain(stream, once, fs)
    g2 = measured_gain(stream, twice, fs)
    assert abs(1.0 - g2) <= abs(1.0 - g1) * 2.5  # second pass deviates ~squared
    assert abs(1.0 - g2) < 0.02


@pytest.mark.parametrize(
    "fs,expected_epochs,expected_len,expected_step",
    [(256.0, 7, 128, 64), (250.0, 7, 125, 62)],
)
def test_epoch_counts(fs, expected_epochs, expected_len, expected_step):
    stream = EegStream(fs, np.random.default_rng(0).normal(size=(2, int(2 * fs))))
    epochs = epoch_stream(stream, 0.5, 0.5)
    assert len(epochs) == expected_epochs
    assert epochs[0].n_samples == expected_len
    assert epochs[1].start_time == pytest.approx(expected_step / fs)


def test_epoch_short_stream_empty():
    stream = EegStream(256.0, np.zeros((2, int(0.4 * 256))))
    assert epoch_stream(stream, 0.5, 0.5) == []


def test_epoch_windows_are_exact_slices():
    fs = 256.0
    rng = np.random.default_rng(1)
    stream = EegStream(fs, rng.normal(size=(2, 600)))
    epochs = epoch_stream(stream, 0.5, 0.5)
    for k, ep in enumerate(epochs):
        start = k * 64
        np.testing.assert_array_equal(ep.data, stream.samples[:, start : start + 128])


def test_epoch_majority_label_and_tie():
    fs = 10.0
    samples = np.zeros((1, 10))
    labels = np.array(["a"] * 6 + ["b"] * 4, dtype=object)
    stream = EegStream(fs, samples, label_track=labels)
    (ep,) = epoch_stream(stream, 1.0, 0.0)
    assert ep.label == "a"
    tied = EegStream(fs, samples, label_track=np.array(["a"] * 5 + ["b"] * 5, dtype=object))
    (ep,) = epoch_stream(tied, 1.0, 0.0)
    assert ep.label == IDLE


def test_streaming_epocher_matches_batch():
    fs = 250.0
    rng = np.random.default_rng(2)
    samples = rng.normal(size=(3, 1000))
    labels = np.array([["x", "y", IDLE][i % 3] for i in range(1000)], dtype=object)
    stream = EegStream(fs, samples, label_track=labels)
    batch = epoch_stream(stream, 0.5, 0.5)

    inc = StreamingEpocher(fs, 0.5, 0.5)
    streamed = []
    cut = 0
    for size in (1, 7, 130, 250, 400, 212):
        streamed.extend(inc.push(samples[:, cut : cut + size], labels[cut : cut + size]))
        cut += size
    assert len(streamed) == len(batch)
    for a, b in zip(streamed, batch):
        np.testing.assert_array_equal(a.data, b.data)
        assert a.start_time == b.start_time
        assert a.label == b.label


def test_covariance_of_white_noise_near_identity():
    rng = np.random.default_rng(123)
    data = rng.normal(size=(8, 1024))
    cov = covariance(Epoch(data, 0.0), shrinkage=0.0)
    c = cov.entries
    off = c[~np.eye(8, dtype=bool)]
    assert np.max(np.abs(off)) < 0.15
    assert np.allclose(np.diag(c), 1.0, atol=0.2)


def test_covariance_shrinkage_rescues_rank_deficiency():
    row = np.sin(np.arange(64) / 3.0)
    data = np.tile(row, (4, 1))  # all channels identical -> rank 1
    cov = covariance(Epoch(data, 0.0), shrinkage=0.1)
    assert np.all(np.linalg.eigvalsh(cov.entries) > 0)


def test_covariance_flat_epoch_is_degenerate():
    with pytest.raises(DegenerateEpochError, match="degenerate epoch"):
        covariance(Epoch(np.zeros((4, 64)), 0.0))


def test_covariance_offset_invariant():
    rng = np.random.default_rng(9)
    data = rng.normal(size=(4, 256))
    shifted = data + np.array([[10.0], [-3.0], [0.5], [100.0]])
    c1 = covariance(Epoch(data, 0.0), 0.1).entries
    c2 = covariance(Epoch(shifted, 0.0), 0.1).entries
    np.testing.assert_allclose(c1, c2, atol=1e-9)


def test_covariance_full_shrinkage_is_scaled_identity():
    rng = np.random.default_rng(10)
    data = rng.normal(size=(4, 256))
    cov = covariance(Epoch(data, 0.0), shrinkage=1.0).entries
    xc = data - data.mean(axis=1, keepdims=True)
    trace = np.trace(xc @ xc.T / 255)
    np.testing.assert_array_equal(cov, (trace / 4) * np.eye(4))
