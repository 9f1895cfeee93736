import numpy as np
import pytest
import torch

from makeuptransfer import transfer
from makeuptransfer.nets import to_tensor
from makeuptransfer.transfer import (
    decode_with_code,
    hybrid,
    interpolate_identity,
    interpolated,
    pairwise,
    pairwise_case,
    reconstruct,
    residual,
    sample_multimodal,
)


def rand_pixels(seed, size=48):
    return np.random.default_rng(seed).random((size, size, 3))


class TestPairwise:
    def test_self_reference_equals_reconstruction(self, tiny_model):
        x = rand_pixels(0)
        a = pairwise(tiny_model, x, x)
        b = reconstruct(tiny_model, x)
        assert torch.equal(a.composed, b.composed)
        assert torch.equal(a.mask, b.mask)

    def test_role_swap_differs(self, tiny_model):
        x, y = rand_pixels(1), rand_pixels(2)
        assert not torch.equal(pairwise(tiny_model, x, y).composed, pairwise(tiny_model, y, x).composed)

    def test_output_range_and_shape(self, tiny_model):
        x, y = rand_pixels(3), rand_pixels(4)
        out = pairwise(tiny_model, x, y)
        assert out.composed.shape == (1, 3, 48, 48)
        assert 0 <= out.composed.min() and out.composed.max() <= 1

    def test_table_cases(self, face_pair):
        x, y, _, _ = face_pair
        case, has_makeup = pairwise_case(x, y)
        assert case == "add makeup" and has_makeup
        case, has_makeup = pairwise_case(y, x)
        assert case == "remove makeup" and not has_makeup


class TestInterpolated:
    def test_alpha_zero_is_reconstruction(self, tiny_model):
        x, y = rand_pixels(5), rand_pixels(6)
        assert torch.equal(
            interpolated(tiny_model, x, y, 0.0).composed, reconstruct(tiny_model, x).composed
        )

    def test_alpha_one_is_pairwise(self, tiny_model):
        x, y = rand_pixels(7), rand_pixels(8)
        assert torch.equal(
            interpolated(tiny_model, x, y, 1.0).composed, pairwise(tiny_model, x, y).composed
        )

    def test_alpha_half_code_is_mean(self, tiny_model):
        x, y = rand_pixels(9), rand_pixels(10)
        m_x = tiny_model.encode_makeup(to_tensor(x))
        m_y = tiny_model.encode_makeup(to_tensor(y))
        mid = (1.0 - 0.5) * m_x + 0.5 * m_y
        assert torch.equal(
            interpolated(tiny_model, x, y, 0.5).composed,
            decode_with_code(tiny_model, x, mid.squeeze(0)).composed,
        )

    def test_alpha_out_of_range(self, tiny_model):
        x, y = rand_pixels(11), rand_pixels(12)
        with pytest.raises(ValueError, match="alpha"):
            interpolated(tiny_model, x, y, 1.2)
        out = interpolated(tiny_model, x, y, 1.2, extrapolate=True)
        assert out.composed.shape == (1, 3, 48, 48)


class TestHybrid:
    def test_single_reference_is_pairwise(self, tiny_model):
        x, y = rand_pixels(13), rand_pixels(14)
        assert torch.equal(
            hybrid(tiny_model, x, [y], [1.0]).composed, pairwise(tiny_model, x, y).composed
        )

    def test_duplicate_references_half_half(self, tiny_model):
        x, y = rand_pixels(15), rand_pixels(16)
        out = hybrid(tiny_model, x, [y, y], [0.5, 0.5])
        expected = pairwise(tiny_model, x, y)
        assert torch.allclose(out.composed, expected.composed, atol=1e-6)

    def test_code_is_weighted_sum(self, tiny_model):
        x, y1, y2 = rand_pixels(17), rand_pixels(18), rand_pixels(19)
        m1 = tiny_model.encode_makeup(to_tensor(y1))
        m2 = tiny_model.encode_makeup(to_tensor(y2))
        blended = 0.3 * m1 + 0.7 * m2
        assert torch.equal(
            hybrid(tiny_model, x, [y1, y2], [0.3, 0.7]).composed,
            decode_with_code(tiny_model, x, blended.squeeze(0)).composed,
        )

    def test_bad_weights_rejected(self, tiny_model):
        x, y = rand_pixels(20), rand_pixels(21)
        with pytest.raises(ValueError, match="sum to 1"):
            hybrid(tiny_model, x, [y, y], [0.5, 0.6])
        with pytest.raises(ValueError, match="nonnegative"):
            hybrid(tiny_model, x, [y, y], [1.5, -0.5])
        with pytest.raises(ValueError, match="at least one"):
            hybrid(tiny_model, x, [], [])
        with pytest.raises(ValueError, match="weights"):
            hybrid(tiny_model, x, [y], [0.5, 0.5])


class TestMultimodal:
    def test_seed_reproducible(self, tiny_model):
        x = rand_pixels(22)
        a = sample_multimodal(tiny_model, x, 3, 99)
        b = sample_multimodal(tiny_model, x, 3, 99)
        for out_a, out_b in zip(a, b):
            assert torch.equal(out_a.composed, out_b.composed)

    def test_different_draws_differ(self, tiny_model):
        x = rand_pixels(23)
        outs = sample_multimodal(tiny_model, x, 2, 7)
        assert not torch.equal(outs[0].composed, outs[1].composed)

    def test_zero_code_is_valid(self, tiny_model):
        x = rand_pixels(24)
        out = decode_with_code(tiny_model, x, np.zeros(8))
        assert out.composed.shape == (1, 3, 48, 48)

    def test_n_must_be_positive(self, tiny_model):
        with pytest.raises(ValueError):
            sample_multimodal(tiny_model, rand_pixels(25), 0, 1)


class TestResidual:
    def test_identity_zero(self):
        x = rand_pixels(26)
        assert residual(x, x.copy()).max() == 0.0

    def test_unit_gap(self):
        x = np.zeros((8, 8, 3))
        assert residual(x, np.ones_like(x)).min() == 1.0

    def test_symmetry(self):
        a, b = rand_pixels(27), rand_pixels(28)
        assert np.array_equal(residual(a, b), residual(b, a))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            residual(np.zeros((4, 4, 3)), np.zeros((5, 5, 3)))


class TestSizes:
    def test_offsize_input_resized_back(self, tiny_model):
        x = rand_pixels(29, size=96)  # divisible by 4, not the trained size
        out = reconstruct(tiny_model, x)
        assert out.composed.shape == (1, 3, 96, 96)
        assert out.mask.shape == (1, 1, 96, 96)

    def test_indivisible_input_rejected(self, tiny_model):
        with pytest.raises(ValueError, match="divisible by 4"):
            reconstruct(tiny_model, np.zeros((50, 50, 3)))

    def test_mask_gates_every_change(self, tiny_model):
        # Eq.-15 consequence at native size: |out - x| <= mask, elementwise
        x = rand_pixels(30)
        out = reconstruct(tiny_model, x)
        gap = (out.composed - to_tensor(x)).abs()
        assert bool((gap <= out.mask + 1e-7).all())


class TestIdentityInterpolation:
    def test_shapes_only(self, tiny_model):
        x, y = rand_pixels(31), rand_pixels(32)
        out = interpolate_identity(tiny_model, x, y, 0.5)
        assert out.composed.shape == (1, 3, 48, 48)
