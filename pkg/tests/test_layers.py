import numpy as np
import pytest

from lesionxfer.errors import ShapeError
from lesionxfer.nn import Concat, Conv2D, Dense, Dropout, Flatten, GlobalAvgPool2D, MaxPool2D, Rng
from lesionxfer.nn.gradcheck import LAYER_KINDS, check_layer, check_variant, random_cases


def test_dense_zero_sigmoid_gives_half():
    layer = Dense(1, "sigmoid")
    p = {"kernel": np.zeros((4, 1)), "bias": np.zeros(1)}
    y, _ = layer.forward(p, np.random.default_rng(0).normal(size=(3, 4)))
    assert np.all(y == 0.5)


def test_global_average_pool_of_small_map():
    y, _ = GlobalAvgPool2D().forward({}, np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2, 1))
    assert y.tolist() == [[2.5]]


def test_one_by_one_conv_is_a_scalar_product():
    layer = Conv2D(1, (1, 1), activation="none")
    p = {"kernel": np.full((1, 1, 1, 1), 2.0), "bias": np.zeros(1)}
    y, _ = layer.forward(p, np.full((1, 1, 1, 1), 3.0))
    assert y.item() == 6.0


def test_conv_matches_direct_loops():
    gen = np.random.default_rng(1)
    x = gen.normal(size=(2, 5, 6, 3))
    layer = Conv2D(4, (3, 2), stride=2, padding="valid", activation="none")
    p = {"kernel": gen.normal(size=(3, 2, 3, 4)), "bias": gen.normal(size=4)}
    y, _ = layer.forward(p, x)
    ho, wo, _ = layer.output_shape((5, 6, 3))
    ref = np.zeros((2, ho, wo, 4))
    for n in range(2):
        for i in range(ho):
            for j in range(wo):
                patch = x[n, 2 * i:2 * i + 3, 2 * j:2 * j + 2, :]
                ref[n, i, j] = np.tensordot(patch, p["kernel"], axes=3) + p["bias"]
    assert np.allclose(y, ref)


def test_same_padding_keeps_size_at_stride_one_and_ceil_at_stride_two():
    assert Conv2D(2, (3, 3)).output_shape((7, 5, 1)) == (7, 5, 2)
    assert Conv2D(2, (3, 3), stride=2).output_shape((7, 5, 1)) == (4, 3, 2)


def test_maxpool_first_maximum_receives_gradient():
    x = np.array([[5.0, 5.0], [1.0, 5.0]]).reshape(1, 2, 2, 1)
    pool = MaxPool2D(2)
    y, cache = pool.forward({}, x)
    dx, _ = pool.backward({}, cache, np.ones_like(y))
    assert y.item() == 5.0
    assert dx.reshape(-1).tolist() == [1.0, 0.0, 0.0, 0.0]


def test_shape_errors_name_the_problem():
    with pytest.raises(ShapeError):
        Conv2D(2, (5, 5), padding="valid").output_shape((3, 3, 1))
    with pytest.raises(ShapeError):
        MaxPool2D(4).output_shape((2, 2, 1))
    with pytest.raises(ShapeError):
        Dense(3).output_shape((2, 2, 1))
    with pytest.raises(ShapeError):
        Concat().output_shape([(2,), (2, 2)])


def test_bad_layer_configuration_rejected():
    with pytest.raises(ValueError):
        Conv2D(1, activation="tanh")
    with pytest.raises(ValueError):
        Dropout(1.0)
    with pytest.raises(ValueError):
        Conv2D(1, padding="full")


def test_dropout_eval_mode_is_identity():
    x = np.random.default_rng(2).normal(size=(3, 4))
    y, _ = Dropout(0.5).forward({}, x, train=False)
    assert y is x


def test_dropout_train_needs_rng():
    with pytest.raises(ValueError):
        Dropout(0.3).forward({}, np.ones((2, 2)), train=True)


def test_dropout_expectation_equals_eval_output():
    rate = 0.3
    x = np.ones((1, 20_000))
    y, _ = Dropout(rate).forward({}, x, train=True, rng=Rng(4))
    # each element is 0 or 1/(1-rate); the sample mean has std sqrt(rate/(1-rate)/n)
    sigma = np.sqrt(rate / (1 - rate) / x.size)
    assert abs(y.mean() - 1.0) < 3 * sigma


def test_flatten_and_concat_round_trip_gradients():
    x = np.arange(12.0).reshape(1, 2, 3, 2)
    y, cache = Flatten().forward({}, x)
    dx, _ = Flatten().backward({}, cache, y)
    assert np.array_equal(dx, x)
    parts = [np.ones((2, 2)), np.zeros((2, 3))]
    y, cache = Concat().forward({}, parts)
    back, _ = Concat().backward({}, cache, y)
    assert [b.shape for b in back] == [(2, 2), (2, 3)]


@pytest.mark.parametrize("kind", LAYER_KINDS)
def test_every_variant_matches_finite_differences(kind):
    assert check_variant(kind, count=20, seed=1) < 1e-4


def test_random_cases_cover_activations_strides_and_padding():
    convs = [layer for layer, *_ in random_cases("Conv2D", 20, 0)]
    assert {c.activation for c in convs} == {"relu", "sigmoid", "none"}
    assert {c.padding for c in convs} == {"same", "valid"}
    assert {c.stride for c in convs} == {1, 2}


def test_gradient_check_detects_a_wrong_backward():
    class Broken(Dense):
        def backward(self, p, cache, dy, need_dx=True):
            dx, grads = super().backward(p, cache, dy, need_dx)
            return dx * 1.01, grads

    assert check_layer(Broken(3), (4,), Rng(0)) > 1e-3
