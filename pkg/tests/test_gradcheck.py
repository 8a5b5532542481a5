import numpy as np
import pytest

from utils import autodiff as ad
from utils.autodiff import Tensor
from utils.gradcheck import grad_check


def wrong_square(a: Tensor) -> Tensor:
    """Squares its input but reports half the true derivative"""
    return ad._emit('wrong_square', (a,), a.values ** 2, lambda g: (g * a.values,))


class TestGradCheck:
    def test_passes_on_correct_gradient(self, rng):
        x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        report = grad_check(lambda a, b: ad.sum(ad.softmax(a @ b) * ad.softmax(a @ b)), [x, w])
        assert report.passed
        assert report.coordinates == 6 + 8
        assert report.max_rel_error < 1e-4

    def test_flags_wrong_gradient(self, rng):
        x = Tensor(rng.uniform(0.5, 2.0, size=4), requires_grad=True)
        report = grad_check(lambda a: ad.sum(wrong_square(a)), [x])
        assert not report.passed
        assert report.failures == 4
        assert 'FAIL' in report.summary()

    def test_inputs_are_restored(self, rng):
        values = rng.normal(size=5)
        x = Tensor(values.copy(), requires_grad=True)
        grad_check(lambda a: ad.sum(a * a), [x])
        np.testing.assert_array_equal(x.values, values)

    @pytest.mark.parametrize('h', [1e-8, 1e-3])
    def test_step_range(self, h):
        with pytest.raises(ValueError):
            grad_check(lambda a: ad.sum(a), [Tensor([1.0], requires_grad=True)], h=h)

    def test_tiny_wrong_gradient_still_fails(self):
        x = Tensor([1e-9], requires_grad=True)
        report = grad_check(lambda a: ad.sum(wrong_square(a)), [x])
        assert not report.passed
        assert report.max_rel_error == pytest.approx(0.1, rel=1e-3)

    def test_zero_gradient_passes(self):
        x = Tensor([0.3, -0.2], requires_grad=True)
        report = grad_check(lambda a: ad.sum(ad.sub(a, a)), [x])
        assert report.passed
        assert report.max_rel_error == 0.0
