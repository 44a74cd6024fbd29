from __future__ import annotations

import itertools

import pytest
import torch

from gradcheck import max_relative_error
from videoqa_adapter.errors import ConfigError, ContractError
from videoqa_adapter.semantic import SemanticAligner


def small_aligner(dtype=torch.float64, seed=0) -> SemanticAligner:
    torch.manual_seed(seed)
    return SemanticAligner(embed_dim=8, latent_dim=4, num_heads=2).to(dtype)


def test_zero_gate_is_exact_identity():
    aligner = small_aligner(torch.float32)
    assert torch.all(aligner.gate == 0)
    text = torch.randn(8)
    video = torch.randn(5, 8)
    out = aligner(text, video)
    assert (out - text).abs().max().item() == 0.0


def test_zero_gate_identity_batched():
    aligner = small_aligner(torch.float32)
    text = torch.randn(3, 8)
    video = torch.randn(3, 5, 8)
    out = aligner(text, video)
    assert (out - text).abs().max().item() == 0.0


def test_shape_preservation():
    aligner = small_aligner()
    out = aligner(torch.randn(8, dtype=torch.float64), torch.randn(4, 8, dtype=torch.float64))
    assert out.shape == (8,)
    out = aligner(torch.randn(6, 8, dtype=torch.float64), torch.randn(6, 3, 8, dtype=torch.float64))
    assert out.shape == (6, 8)


def test_residual_branch_bound():
    # With gate g, |out - text| is exactly |g * branch|; recover the branch by
    # running with a unit gate and check the elementwise bound.
    aligner = small_aligner()
    text = torch.randn(8, dtype=torch.float64)
    video = text.clone().unsqueeze(0)
    with torch.no_grad():
        aligner.gate.copy_(0.05 * torch.randn(8, dtype=torch.float64))
    out = aligner(text, video)
    gate = aligner.gate.detach().clone()
    with torch.no_grad():
        aligner.gate.fill_(1.0)
    branch = aligner(text, video) - text
    diff = (out - text).abs()
    bound = (gate.abs() * branch.abs()) + 1e-12
    assert torch.all(diff <= bound)


def test_memory_permutation_invariance():
    # No positional encoding on the memory: frames act as a set.
    aligner = small_aligner()
    with torch.no_grad():
        aligner.gate.copy_(torch.randn(8, dtype=torch.float64))
    text = torch.randn(8, dtype=torch.float64)
    video = torch.randn(3, 8, dtype=torch.float64)
    base = aligner(text, video)
    for perm in itertools.permutations(range(3)):
        out = aligner(text, video[list(perm)])
        assert torch.allclose(out, base, atol=1e-10)


def test_batch_matches_itemwise():
    aligner = small_aligner()
    with torch.no_grad():
        aligner.gate.copy_(torch.randn(8, dtype=torch.float64))
    texts = torch.randn(4, 8, dtype=torch.float64)
    videos = torch.randn(4, 3, 8, dtype=torch.float64)
    batched = aligner(texts, videos)
    for i in range(4):
        single = aligner(texts[i], videos[i])
        assert torch.allclose(batched[i], single, atol=1e-10)


def test_gradients_match_finite_differences():
    aligner = small_aligner(seed=5)
    with torch.no_grad():
        aligner.gate.copy_(0.3 * torch.randn(8, dtype=torch.float64))
    text = torch.randn(8, dtype=torch.float64)
    video = torch.randn(3, 8, dtype=torch.float64)
    probe = torch.randn(8, dtype=torch.float64)

    def loss():
        return (aligner(text, video) * probe).sum()

    params = list(aligner.parameters())
    assert max_relative_error(loss, params) < 1e-4


def test_width_mismatch_is_contract_error():
    aligner = small_aligner()
    with pytest.raises(ContractError):
        aligner(torch.randn(7, dtype=torch.float64), torch.randn(3, 8, dtype=torch.float64))
    with pytest.raises(ContractError):
        aligner(torch.randn(8, dtype=torch.float64), torch.randn(3, 7, dtype=torch.float64))
    with pytest.raises(ContractError):
        aligner(torch.randn(2, 8, dtype=torch.float64), torch.randn(3, 3, 8, dtype=torch.float64))


def test_heads_must_divide_latent_dim():
    with pytest.raises(ConfigError):
        SemanticAligner(embed_dim=8, latent_dim=6, num_heads=4)
