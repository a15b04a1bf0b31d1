import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidforensics.errors import CapabilityError, DimensionError
from vidforensics.simulate import (
    DEFAULT_SYNTHESIS_KERNEL,
    AutoencoderSim,
    CameraModel,
    ToyCodec,
    block_dct_quantize,
    derive_seed,
    external_encode,
    find_encoder,
    make_pairs,
    phase_weighted_kernel,
    psnr,
    sim_autoencode,
    synth_clip,
    toy_compress,
)
from vidforensics.spectral import GaussianDenoiser, nyquist_locations, peak_to_median, power_spectra
from vidforensics.videoio import Clip

DEN = GaussianDenoiser()


def nyquist_ratios(clip):
    s = power_spectra([clip], DEN).s_yx
    return peak_to_median(s, nyquist_locations(*s.shape))


@pytest.mark.parametrize("style", ["noise", "gradients+shapes", "textured"])
def test_synth_is_deterministic_and_bounded(style):
    a = synth_clip(3, 6, 32, 32, style)
    b = synth_clip(3, 6, 32, 32, style)
    np.testing.assert_array_equal(a.data, b.data)
    assert a.shape == (6, 32, 32)
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0
    assert not np.array_equal(a.data, synth_clip(4, 6, 32, 32, style).data)


def test_noise_style_frame_means():
    clip = synth_clip(0, 16, 128, 128, "noise")
    means = clip.data.mean(axis=(1, 2))
    assert np.all((means >= 0.45) & (means <= 0.55))


def test_scene_drifts_between_frames():
    clip = synth_clip(5, 32, 32, 32, "textured")
    diffs = [np.abs(clip.data[t + 1] - clip.data[t]).mean() for t in range(31)]
    assert max(diffs) > 0.01


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_clip(0, 4, 32, 32, "fractal")
    with pytest.raises(DimensionError):
        synth_clip(0, 4, 8, 32)


def test_camera_keeps_constant_scene():
    frames = np.full((2, 10, 10), 0.4)
    out = CameraModel(blur=0.22, noise_sigma=0.0)(frames, np.random.default_rng(0))
    np.testing.assert_allclose(out, 0.4)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)


def test_box_kernel_preserves_constant():
    clip = Clip(np.full((2, 16, 16), 0.3))
    out = sim_autoencode(clip, AutoencoderSim(synthesis_kernel=((1, 1), (1, 1))))
    np.testing.assert_allclose(out.data, 0.3, atol=1e-6)


def test_kernel_normalization():
    k = AutoencoderSim(synthesis_kernel=(1, 3, 3, 1)).kernel()
    assert k.shape == (4, 4) and k.sum() == pytest.approx(4.0)
    assert AutoencoderSim().kernel().sum() == pytest.approx(4.0)


def test_phase_weighted_kernel_polyphase_sums():
    k = np.array(phase_weighted_kernel(vertical=0.1))
    # rows of opposite parity get gains 1.1 and 0.9
    assert k[0::2].sum() / k[1::2].sum() == pytest.approx(1.1 / 0.9)
    np.testing.assert_allclose(phase_weighted_kernel(), np.outer([1, 3, 3, 1], [1, 3, 3, 1]))


def test_autoencoder_validation():
    with pytest.raises(ValueError):
        AutoencoderSim(factor=3)
    with pytest.raises(ValueError):
        AutoencoderSim(synthesis_kernel=(0, 0))
    with pytest.raises(DimensionError):
        sim_autoencode(Clip(np.zeros((1, 15, 16))))


def test_latent_noise_is_seeded():
    clip = synth_clip(1, 2, 32, 32)
    ae = AutoencoderSim(latent_noise=0.05)
    a, b = sim_autoencode(clip, ae, seed=1), sim_autoencode(clip, ae, seed=1)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, sim_autoencode(clip, ae, seed=2).data)


def test_white_noise_shows_nyquist_peaks():
    clip = synth_clip(0, 16, 64, 64, "noise")
    ratios = nyquist_ratios(sim_autoencode(clip))
    assert np.all(ratios >= 3.0)


def test_peaks_survive_second_pass():
    once = sim_autoencode(synth_clip(1, 16, 64, 64, "textured"))
    assert np.all(nyquist_ratios(sim_autoencode(once)) >= 3.0)


def test_fingerprint_on_scene_clips():
    for seed in range(4):
        style = ("gradients+shapes", "textured")[seed % 2]
        real = synth_clip(seed, 16, 64, 64, style)
        fake = sim_autoencode(synth_clip(seed + 100, 16, 64, 64, style))
        assert np.all(nyquist_ratios(fake) >= 3.0)
        assert np.all(nyquist_ratios(real) < 1.5)


def test_compression_lowers_fingerprint_peaks():
    for seed in range(4):
        fake = sim_autoencode(synth_clip(seed, 16, 64, 64, "textured"))
        assert np.all(nyquist_ratios(toy_compress(fake)) < nyquist_ratios(fake))


def test_tiny_quant_step_is_transparent():
    clip = synth_clip(2, 4, 32, 32)
    out = toy_compress(clip, ToyCodec(quant_step=1e-6))
    assert np.max(np.abs(out.data - clip.data)) < 1e-4


def test_psnr_falls_with_quant_step():
    clip = synth_clip(3, 4, 64, 64, "textured")
    values = [psnr(clip.data, toy_compress(clip, ToyCodec(quant_step=q)).data) for q in (0.01, 0.05, 0.1, 0.2)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_psnr_edge_cases():
    assert psnr(np.zeros(4), np.zeros(4)) == float("inf")
    assert psnr(np.zeros(4), np.full(4, 0.1)) == pytest.approx(20.0)


def test_temporal_smoothing_recursion():
    clip = synth_clip(4, 5, 16, 16)
    lam = 0.4
    base = np.clip(block_dct_quantize(clip.data, 8, 0.05), 0, 1)
    out = toy_compress(clip, ToyCodec(8, 0.05, lam)).data
    y = block_dct_quantize(clip.data, 8, 0.05)
    for t in range(1, 5):
        y[t] = (1 - lam) * y[t] + lam * y[t - 1]
    np.testing.assert_allclose(out, np.clip(y, 0, 1), atol=1e-6)
    assert not np.allclose(out, base)


def test_codec_validation():
    with pytest.raises(ValueError):
        ToyCodec(quant_step=0)
    with pytest.raises(ValueError):
        ToyCodec(temporal_smoothing=1.0)
    with pytest.raises(DimensionError):
        toy_compress(Clip(np.zeros((1, 12, 16))))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**16), st.floats(0.01, 0.5))
def test_quantizer_output_is_on_lattice(seed, q):
    x = np.random.default_rng(seed).random((1, 8, 8))
    from scipy.fft import dctn

    coef = dctn(block_dct_quantize(x, 8, q)[0], norm="ortho")
    np.testing.assert_allclose(coef / q, np.round(coef / q), atol=1e-6)


@pytest.mark.xfail(strict=True, reason="zero-mean block errors add no coherent grid lines; see decisions ledger")
def test_noise_blockiness_lines():
    clip = synth_clip(0, 16, 64, 64, "noise")
    s = power_spectra([toy_compress(clip, ToyCodec(quant_step=1.0))], DEN).s_yx
    lines = np.zeros(s.shape, bool)
    lines[::8, :] = True
    lines[:, ::8] = True
    assert s[lines].mean() >= 2.0 * s[~lines].mean()


@pytest.mark.xfail(strict=True, reason="an averaging autoencoder removes mid-high energy; see decisions ledger")
def test_diagonal_region_survives_compression():
    codec = ToyCodec()
    m = 64
    region = np.zeros((m, m), bool)
    region[m // 8 : 3 * m // 8 + 1, m // 8 : 3 * m // 8 + 1] = True
    ratios = []
    for seed in range(4):
        real = synth_clip(seed, 16, m, m, "textured")
        fake = sim_autoencode(real)
        sr = power_spectra([toy_compress(real, codec)], DEN).s_yx
        sf = power_spectra([toy_compress(fake, codec)], DEN).s_yx
        ratios.append(sf[region].mean() / sr[region].mean())
    assert min(ratios) >= 1.5


def test_make_pairs_structure():
    pairs = make_pairs(3, seed=5, frames=4, height=32, width=32)
    assert len(pairs.reals) == len(pairs.fakes) == 3
    assert pairs.pair_ids == ["5-00000", "5-00001", "5-00002"]
    assert pairs.styles == ["gradients+shapes", "textured", "gradients+shapes"]
    again = make_pairs(3, seed=5, frames=4, height=32, width=32)
    for a, b in zip(pairs.fakes, again.fakes):
        np.testing.assert_array_equal(a.data, b.data)


def test_default_kernel_has_weak_diagonal_term():
    k = np.array(DEFAULT_SYNTHESIS_KERNEL)
    base = np.outer([1, 3, 3, 1], [1, 3, 3, 1])
    gain = k / base
    assert gain[0, 0] > gain[1, 1]


def test_missing_encoder_is_capability_error():
    with pytest.raises(CapabilityError):
        find_encoder("/definitely/not/here/ffmpeg")
    with pytest.raises(CapabilityError):
        external_encode(Clip(np.zeros((1, 16, 16))), encoder_path="/definitely/not/here/ffmpeg")


needs_ffmpeg = pytest.mark.skipif(shutil.which("ffmpeg") is None, reason="ffmpeg not installed")


@needs_ffmpeg
def test_external_lossless_roundtrip():
    clip = synth_clip(0, 4, 64, 64)
    assert psnr(clip.data, external_encode(clip, crf=0).data) >= 50.0


@needs_ffmpeg
def test_external_crf_ordering():
    clip = synth_clip(0, 8, 64, 64, "textured")
    assert psnr(clip.data, external_encode(clip, 30).data) < psnr(clip.data, external_encode(clip, 16).data)
