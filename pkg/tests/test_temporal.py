from __future__ import annotations

import math

import pytest
import torch
import torch.nn.functional as F

from gradcheck import max_relative_error
from videoqa_adapter.errors import ContractError
from videoqa_adapter.temporal import (
    AlignedVideo,
    TemporalDecoder,
    TemporalEncoder,
    autoregress,
    causal_mask,
    feature_psnr,
    reconstruction_loss,
    sinusoidal_positions,
)


def small_encoder(dtype=torch.float64, seed=0) -> TemporalEncoder:
    torch.manual_seed(seed)
    return TemporalEncoder(embed_dim=8, num_heads=2).to(dtype)


def small_decoder(dtype=torch.float64, seed=1) -> TemporalDecoder:
    torch.manual_seed(seed)
    return TemporalDecoder(embed_dim=8, num_heads=2).to(dtype)


def test_encoder_shape_preservation():
    encoder = small_encoder()
    for frames in (1, 4, 9):
        video = torch.randn(frames, 8, dtype=torch.float64)
        out = encoder(video)
        assert out.refined.shape == (frames, 8)
        assert out.pooled.shape == (8,)
        assert torch.isfinite(out.refined).all()


def test_single_frame_pooled_equals_row():
    encoder = small_encoder()
    out = encoder(torch.randn(1, 8, dtype=torch.float64))
    assert torch.allclose(out.pooled, out.refined[0])


def test_pooled_is_frame_mean():
    encoder = small_encoder()
    out = encoder(torch.randn(6, 8, dtype=torch.float64))
    assert torch.allclose(out.pooled, out.refined.mean(dim=0))


def test_large_input_shape_contract():
    torch.manual_seed(0)
    encoder = TemporalEncoder(embed_dim=512, num_heads=16)
    out = encoder(torch.randn(128, 512))
    assert out.refined.shape == (128, 512)
    assert torch.isfinite(out.refined).all()


def _zero_residual_sublayers(module: torch.nn.Module) -> None:
    # Zeroing each sublayer's output projection makes every residual branch
    # contribute exactly nothing.
    for layer in module.layers:
        torch.nn.init.zeros_(layer.self_attn.out_proj.weight)
        torch.nn.init.zeros_(layer.self_attn.out_proj.bias)
        torch.nn.init.zeros_(layer.linear2.weight)
        torch.nn.init.zeros_(layer.linear2.bias)


def test_identical_frames_differ_only_via_positions():
    # With residual sublayers zeroed, the encoder reduces to two layer norms
    # over (frame + position); rows are then an independent hand computation.
    encoder = small_encoder()
    with torch.no_grad():
        _zero_residual_sublayers(encoder.encoder)
    frame = torch.randn(8, dtype=torch.float64)
    video = frame.expand(4, 8).clone()
    out = encoder(video).refined
    positions = sinusoidal_positions(4, 8, torch.float64, video.device)
    for t in range(4):
        x = frame + positions[t]
        expected = F.layer_norm(F.layer_norm(x, (8,), eps=1e-5), (8,), eps=1e-5)
        assert torch.allclose(out[t], expected, atol=1e-12)


def test_causal_mask_shape():
    mask = causal_mask(4, torch.device("cpu"))
    assert mask.tolist() == [
        [False, True, True, True],
        [False, False, True, True],
        [False, False, False, True],
        [False, False, False, False],
    ]


def test_causality_perturbation():
    # With the memory held fixed, predicted rows 0..j never move when raw
    # frame j is perturbed.
    decoder = small_decoder()
    torch.manual_seed(7)
    video = torch.randn(5, 8, dtype=torch.float64)
    memory = torch.randn(5, 8, dtype=torch.float64)
    base = decoder(video, memory)
    for j in range(5):
        bumped = video.clone()
        bumped[j] += torch.randn(8, dtype=torch.float64)
        out = decoder(bumped, memory)
        deviation = (out[: j + 1] - base[: j + 1]).abs().max().item()
        assert deviation == 0.0, f"rows <= {j} moved by {deviation}"
        if j < 4:
            assert (out[j + 1 :] - base[j + 1 :]).abs().max().item() > 0


def test_row_zero_depends_only_on_start_token_and_memory():
    decoder = small_decoder()
    memory = torch.randn(4, 8, dtype=torch.float64)
    a = decoder(torch.randn(4, 8, dtype=torch.float64), memory)
    b = decoder(torch.randn(4, 8, dtype=torch.float64), memory)
    assert torch.equal(a[0], b[0])


def test_autoregress_fuses_memory_additively():
    decoder = small_decoder()
    encoder_out = AlignedVideo(
        refined=torch.randn(4, 8, dtype=torch.float64),
        pooled=torch.zeros(8, dtype=torch.float64),
    )
    guidance = torch.randn(8, dtype=torch.float64)
    video = torch.randn(4, 8, dtype=torch.float64)
    direct = decoder(video, encoder_out.refined + guidance)
    assert torch.allclose(autoregress(video, guidance, encoder_out, decoder), direct)


def test_autoregress_zero_memory_is_well_defined():
    decoder = small_decoder()
    encoded = AlignedVideo(
        refined=torch.zeros(4, 8, dtype=torch.float64),
        pooled=torch.zeros(8, dtype=torch.float64),
    )
    out = autoregress(
        torch.randn(4, 8, dtype=torch.float64),
        torch.zeros(8, dtype=torch.float64),
        encoded,
        decoder,
    )
    assert torch.isfinite(out).all()


def test_decoder_call_counter():
    decoder = small_decoder()
    assert decoder.calls == 0
    decoder(torch.randn(3, 8, dtype=torch.float64), torch.randn(3, 8, dtype=torch.float64))
    assert decoder.calls == 1


def test_reconstruction_loss_zero_iff_equal():
    x = torch.randn(5, 8, dtype=torch.float64)
    assert reconstruction_loss(x, x).item() == 0.0
    y = x.clone()
    y[2, 3] += 1e-3
    assert reconstruction_loss(y, x).item() > 0.0


def test_reconstruction_loss_all_ones_vs_zero():
    predicted = torch.ones(6, 7)
    target = torch.zeros(6, 7)
    assert reconstruction_loss(predicted, target).item() == pytest.approx(42.0)


def test_reconstruction_loss_matches_brute_force_oracle():
    torch.manual_seed(11)
    for _ in range(100):
        frames = int(torch.randint(1, 7, ()))
        dim = int(torch.randint(1, 9, ()))
        predicted = torch.randn(frames, dim, dtype=torch.float64)
        target = torch.randn(frames, dim, dtype=torch.float64)
        expected = 0.0
        for i in range(frames):
            for c in range(dim):
                expected += (predicted[i, c].item() - target[i, c].item()) ** 2
        assert reconstruction_loss(predicted, target).item() == pytest.approx(expected, abs=1e-6)


def test_reconstruction_loss_shape_mismatch():
    with pytest.raises(ContractError):
        reconstruction_loss(torch.zeros(3, 4), torch.zeros(4, 3))


def test_feature_psnr_equal_is_infinite():
    x = torch.randn(4, 4, dtype=torch.float64)
    assert feature_psnr(x, x) == math.inf


def test_feature_psnr_closed_form():
    target = torch.zeros(5, 4, dtype=torch.float64)
    target[0, 0] = 1.0
    predicted = target + 0.1
    assert feature_psnr(predicted, target) == pytest.approx(20.0, abs=1e-9)


def test_feature_psnr_shape_mismatch():
    with pytest.raises(ContractError):
        feature_psnr(torch.zeros(2, 2), torch.zeros(3, 2))


def test_reconstruction_gradients_match_finite_differences():
    encoder = small_encoder(seed=3)
    decoder = small_decoder(seed=4)
    torch.manual_seed(5)
    video = torch.randn(4, 8, dtype=torch.float64)
    guidance = torch.randn(8, dtype=torch.float64)

    def loss():
        encoded = encoder(video)
        return reconstruction_loss(autoregress(video, guidance, encoded, decoder), video)

    params = list(encoder.parameters()) + list(decoder.parameters())
    assert max_relative_error(loss, params) < 1e-4
