"""Central finite-difference checks of every analytic gradient.

Inputs are 8x8 double-precision tensors kept away from absolute-value kinks
(|a - b| > 1e-4 elementwise). The discriminator-dependent checks run at its
minimum viable 48x48 input.
"""

import numpy as np
import torch

from makeuptransfer.dataio import CosmeticRegionSet
from makeuptransfer.losses import (
    LossWeights,
    adversarial_loss_d,
    adversarial_loss_g,
    attention_loss,
    imr_loss,
    kl_loss,
    makeup_loss,
    perceptual_loss,
    random_feature_extractor,
    reconstruction_loss,
    tv_loss,
)
from makeuptransfer.nets import ArchitectureSpec, MakeupTransferNet

REL_TOL = 1e-3
KINK_GAP = 1e-4


def away_from(base, seed, gap=5e-3):
    """Tensor like base whose entries all sit at least `gap` from base's."""
    g = torch.Generator().manual_seed(seed)
    sign = torch.where(torch.rand(base.shape, generator=g) < 0.5, -1.0, 1.0).double()
    offset = gap + 0.1 * torch.rand(base.shape, generator=g).double()
    return (base + sign * offset).clamp(0.0, 1.0)


def central_difference(fn, x, eps=1e-6):
    grad = torch.zeros_like(x)
    flat = x.view(-1)
    out = grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = fn().item()
        flat[i] = orig - eps
        lo = fn().item()
        flat[i] = orig
        out[i] = (hi - lo) / (2 * eps)
    return grad


def check_input_grad(fn, x):
    x.requires_grad_(True)
    if x.grad is not None:
        x.grad = None
    value = fn()
    value.backward()
    analytic = x.grad.detach().clone()
    x.requires_grad_(False)
    numeric = central_difference(fn, x)
    scale = max(analytic.norm().item(), numeric.norm().item(), 1e-12)
    rel = (analytic - numeric).norm().item() / scale
    assert rel < REL_TOL, f"relative gradient error {rel:.2e}"
    return rel


def _pair(seed):
    g = torch.Generator().manual_seed(seed)
    a = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64) * 0.8 + 0.1
    b = away_from(a, seed + 1)
    assert (a - b).abs().min() > KINK_GAP
    return a, b


class TestLossInputGradients:
    def test_reconstruction(self):
        x, x_r = _pair(0)
        check_input_grad(lambda: reconstruction_loss(x, x_r), x_r)

    def test_perceptual(self):
        extractor = random_feature_extractor(3).to(torch.float64)
        x, x_s = _pair(1)
        check_input_grad(lambda: perceptual_loss(x, x_s, extractor), x_s)

    def test_makeup(self):
        face = np.zeros((8, 8), np.uint8)
        face[1:5, 1:5] = 1
        lip = np.zeros((8, 8), np.uint8)
        lip[6:8, 2:6] = 1
        regions = CosmeticRegionSet(face=face, brow=np.zeros_like(face), eye=np.zeros_like(face), lip=lip)
        w = LossWeights()
        x_s, x_y = _pair(2)
        check_input_grad(lambda: makeup_loss(x_s, x_y, regions, w), x_s)

    def test_imr(self):
        g = torch.Generator().manual_seed(3)
        i_x = torch.rand(1, 8, 2, 2, generator=g, dtype=torch.float64)
        i_x_s = away_from(i_x, 4)
        m_y = torch.rand(1, 8, generator=g, dtype=torch.float64)
        m_x_s = away_from(m_y, 5)
        w = LossWeights()
        check_input_grad(lambda: imr_loss(i_x, i_x_s, m_y, m_x_s, w), i_x_s)
        check_input_grad(lambda: imr_loss(i_x, i_x_s, m_y, m_x_s, w), m_x_s)

    def test_attention(self):
        mask, related = _pair(6)
        mask = mask[:, :1]
        related = (related[:, :1] > 0.5).double()
        assert (mask - related).abs().min() > KINK_GAP
        check_input_grad(lambda: attention_loss(mask, related), mask)

    def test_adversarial_d(self):
        g = torch.Generator().manual_seed(7)
        real = torch.rand(1, 1, 2, 2, generator=g, dtype=torch.float64)
        fake_s = torch.rand(1, 1, 2, 2, generator=g, dtype=torch.float64)
        fake_f = torch.rand(1, 1, 2, 2, generator=g, dtype=torch.float64)
        for t in (real, fake_s, fake_f):
            check_input_grad(lambda: adversarial_loss_d(real, fake_s, fake_f), t)

    def test_adversarial_g(self):
        g = torch.Generator().manual_seed(8)
        fake_s = torch.rand(1, 1, 2, 2, generator=g, dtype=torch.float64)
        fake_f = torch.rand(1, 1, 2, 2, generator=g, dtype=torch.float64)
        for t in (fake_s, fake_f):
            check_input_grad(lambda: adversarial_loss_g(fake_s, fake_f), t)

    def test_kl(self):
        g = torch.Generator().manual_seed(9)
        m_x = torch.randn(1, 8, generator=g, dtype=torch.float64)
        m_y = torch.randn(1, 8, generator=g, dtype=torch.float64)
        check_input_grad(lambda: kl_loss(m_x, m_y), m_x)
        check_input_grad(lambda: kl_loss(m_x, m_y), m_y)

    def test_tv(self):
        g = torch.Generator().manual_seed(10)
        # strictly increasing values keep every neighbor difference off the kink
        base = torch.linspace(0, 1, 64, dtype=torch.float64).view(1, 1, 8, 8)
        mask = base + 0.001 * torch.rand(1, 1, 8, 8, generator=g, dtype=torch.float64)
        check_input_grad(lambda: tv_loss(mask), mask)


def tiny_double_model(seed=0, makeup_dim=4):
    torch.manual_seed(seed)
    arch = ArchitectureSpec(
        image_size=48,
        base_channels=4,
        identity_res_blocks=1,
        decoder_res_blocks=1,
        makeup_dim=makeup_dim,
        mlp_hidden=8,
    )
    return MakeupTransferNet(arch).double()


def check_param_grads(loss_fn, params, n_coords=6, eps=1e-6, seed=0):
    """Spot-check analytic parameter gradients against central differences."""
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    rng = np.random.default_rng(seed)
    checked = 0
    for p in params:
        flat = p.detach().view(-1)
        grad = p.grad.view(-1) if p.grad is not None else torch.zeros_like(flat)
        for i in rng.choice(flat.numel(), size=min(n_coords, flat.numel()), replace=False):
            orig = flat[i].item()
            with torch.no_grad():
                flat[i] = orig + eps
                hi = loss_fn().item()
                flat[i] = orig - eps
                lo = loss_fn().item()
                flat[i] = orig
            numeric = (hi - lo) / (2 * eps)
            analytic = grad[i].item()
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
            assert err < REL_TOL, f"param grad rel err {err:.2e} (analytic {analytic}, fd {numeric})"
            checked += 1
    assert checked > 0


class TestNetworkParameterGradients:
    """End-to-end differentiability: losses through the full networks."""

    def test_generator_side_losses(self):
        model = tiny_double_model(0)
        g = torch.Generator().manual_seed(1)
        x = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64)
        y = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64)
        face = np.zeros((8, 8), np.uint8)
        face[2:6, 2:6] = 1
        regions = CosmeticRegionSet(face=face, brow=np.zeros_like(face), eye=np.zeros_like(face), lip=np.zeros_like(face))
        related = (torch.rand(1, 1, 8, 8, generator=g, dtype=torch.float64) > 0.5).double()
        x_y = torch.rand(1, 3, 8, 8, generator=g, dtype=torch.float64)
        extractor = random_feature_extractor(2).to(torch.float64)
        w = LossWeights()

        def graph():
            i_x = model.encode_identity(x)
            m_x = model.encode_makeup(x)
            m_y = model.encode_makeup(y)
            out_r = model.decode(i_x, m_x, x)
            out_s = model.decode(i_x, m_y, x)
            i_x_s = model.encode_identity(out_s.composed)
            m_x_s = model.encode_makeup(out_s.composed)
            return (
                w.rec * reconstruction_loss(x, out_r.composed)
                + w.per * perceptual_loss(x, out_s.composed, extractor)
                + makeup_loss(out_s.composed, x_y, regions, w)
                + imr_loss(i_x, i_x_s, m_y, m_x_s, w)
                + w.attention * attention_loss(out_s.mask, related)
                + w.kl * kl_loss(m_x, m_y)
                + w.tv * tv_loss(out_s.mask)
            )

        params = [
            next(model.identity_encoder.parameters()),
            next(model.makeup_encoder.parameters()),
            next(model.generator.mlp.parameters()),
            model.generator.head_face.weight,
            model.generator.head_mask.weight,
        ]
        check_param_grads(graph, params, n_coords=4)

    def test_discriminator_losses(self):
        model = tiny_double_model(3)
        g = torch.Generator().manual_seed(4)
        real = torch.rand(1, 3, 48, 48, generator=g, dtype=torch.float64)
        fake = torch.rand(1, 3, 48, 48, generator=g, dtype=torch.float64)

        def d_loss():
            return adversarial_loss_d(
                model.discriminate(real), model.discriminate(fake), model.discriminate(fake * 0.9)
            )

        params = [model.discriminator.net[0].weight, model.discriminator.net[-1].weight]
        check_param_grads(d_loss, params, n_coords=4)

    def test_adversarial_through_generator(self):
        model = tiny_double_model(5)
        g = torch.Generator().manual_seed(6)
        x = torch.rand(1, 3, 48, 48, generator=g, dtype=torch.float64)
        code = torch.randn(1, 4, generator=g, dtype=torch.float64)

        def g_loss():
            out = model.decode(model.encode_identity(x), code, x)
            scores = model.discriminate(out.composed)
            return adversarial_loss_g(scores, scores)

        params = [model.generator.up1.weight, model.generator.head_face.weight]
        check_param_grads(g_loss, params, n_coords=3)
