import math

import numpy as np
import pytest

from pmcv import fd


def f(u):
    x, y = u[..., 0], u[..., 1]
    return np.stack([np.sin(x) * np.exp(y), x**3 * y], axis=-1)


class TestStencils:
    def test_gradient_shape_and_values(self):
        u = np.array([[0.3, 0.2], [1.0, -0.5], [0.0, 0.1]])
        g = fd.gradient(f, u, 1e-5)
        assert g.shape == (3, 2, 2)
        x, y = u[:, 0], u[:, 1]
        np.testing.assert_allclose(g[:, 0, 0], np.cos(x) * np.exp(y), atol=1e-9)
        np.testing.assert_allclose(g[:, 1, 1], x**3, atol=1e-9)

    def test_hessian_shapes_with_batch(self):
        u = np.zeros((4, 3, 2)) + 0.3
        f0, g, h = fd.hessian(f, u, 1e-3)
        assert f0.shape == (4, 3, 2)
        assert g.shape == (4, 3, 2, 2)
        assert h.shape == (4, 3, 2, 2, 2)

    def test_hessian_values(self):
        u = np.array([[0.4, -0.2]])
        _, _, h = fd.hessian(f, u, 1e-4)
        x, y = 0.4, -0.2
        exact = np.array([[-math.sin(x) * math.exp(y), math.cos(x) * math.exp(y)],
                          [math.cos(x) * math.exp(y), math.sin(x) * math.exp(y)]])
        np.testing.assert_allclose(h[0, :, :, 0], exact, atol=1e-6)
        np.testing.assert_array_equal(h, np.swapaxes(h, 1, 2))

    def test_quadratics_are_exact(self):
        q = lambda u: (u[..., 0] ** 2 + 3 * u[..., 0] * u[..., 1])[..., None]
        _, g, h = fd.hessian(q, np.array([[1.0, 2.0]]), 0.5)
        np.testing.assert_allclose(g[0, :, 0], [8.0, 3.0], rtol=1e-14)
        np.testing.assert_allclose(h[0, :, :, 0], [[2.0, 3.0], [3.0, 0.0]], rtol=1e-14)

    def test_nesting(self):
        # second derivative by differentiating a difference quotient
        u = np.array([[0.7, 0.1]])
        dd = fd.gradient(lambda p: fd.gradient(f, p, 1e-3), u, 1e-3)
        _, _, h = fd.hessian(f, u, 1e-3)
        np.testing.assert_allclose(dd, h, atol=1e-5)


class TestConvergence:
    def test_second_order(self):
        u = np.array([[0.7, 0.1]])
        exact = math.cos(0.7) * math.exp(0.1)
        e1 = abs(fd.gradient(f, u, 1e-2)[0, 0, 0] - exact)
        e2 = abs(fd.gradient(f, u, 5e-3)[0, 0, 0] - exact)
        assert fd.observed_order(e1, e2) == pytest.approx(2.0, abs=0.05)

    def test_richardson_raises_order(self):
        u = np.array([[0.7, 0.1]])
        exact = math.cos(0.7) * math.exp(0.1)
        c, fine = fd.gradient(f, u, 1e-2), fd.gradient(f, u, 5e-3)
        assert abs(fd.richardson(c, fine)[0, 0, 0] - exact) < 1e-3 * abs(fine[0, 0, 0] - exact)

    def test_order_undefined(self):
        assert math.isnan(fd.observed_order(0.0, 1.0))
        assert math.isnan(fd.observed_order(1.0, 0.0))
