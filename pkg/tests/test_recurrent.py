import numpy as np
import pytest

from staticbert.engine import BiLSTM, GRU, LSTM, ForwardContext, ShapeError, Tensor, forward


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_reference(x, Wx, Wh, b):
    """Plain-numpy unroll of the cell equations (gate order i, f, g, o)."""
    B, T, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    states = []
    for t in range(T):
        z = x[:, t, :] @ Wx + h @ Wh + b
        i, f = sigmoid(z[:, :H]), sigmoid(z[:, H:2 * H])
        g, o = np.tanh(z[:, 2 * H:3 * H]), sigmoid(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        states.append(h)
    return np.stack(states, axis=1)


def gru_reference(x, Wx, Wh, b):
    """Plain-numpy unroll (gate order z, r, n; reset applied pre-matmul)."""
    B, T, _ = x.shape
    H = Wh.shape[0]
    h = np.zeros((B, H))
    states = []
    for t in range(T):
        xz = x[:, t, :] @ Wx
        z = sigmoid(xz[:, :H] + h @ Wh[:, :H] + b[:H])
        r = sigmoid(xz[:, H:2 * H] + h @ Wh[:, H:2 * H] + b[H:2 * H])
        n = np.tanh(xz[:, 2 * H:] + (r * h) @ Wh[:, 2 * H:] + b[2 * H:])
        h = z * h + (1.0 - z) * n
        states.append(h)
    return np.stack(states, axis=1)


class TestLSTM:
    def test_zero_weights_give_zero_states(self):
        layer = LSTM(3, 4, return_sequences=True)
        for _, p in layer.params():
            p.data[:] = 0.0
        x = Tensor(np.random.default_rng(0).standard_normal((2, 5, 3)))
        out = forward(layer, x)
        np.testing.assert_array_equal(out.data, np.zeros((2, 5, 4)))

    def test_matches_reference_equations(self):
        rng = np.random.default_rng(1)
        layer = LSTM(3, 4, return_sequences=True, rng=rng)
        x = rng.standard_normal((2, 6, 3))
        out = forward(layer, Tensor(x)).data
        expected = lstm_reference(x, layer.Wx.data, layer.Wh.data, layer.b.data)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_final_state_is_last_sequence_state(self):
        rng = np.random.default_rng(2)
        seq_layer = LSTM(3, 4, return_sequences=True, rng=np.random.default_rng(2))
        fin_layer = LSTM(3, 4, return_sequences=False, rng=np.random.default_rng(2))
        x = rng.standard_normal((2, 5, 3))
        seq = forward(seq_layer, Tensor(x)).data
        fin = forward(fin_layer, Tensor(x)).data
        np.testing.assert_allclose(fin, seq[:, -1, :], atol=1e-12)

    def test_forget_bias_initialized_to_one(self):
        layer = LSTM(3, 4)
        H = 4
        np.testing.assert_array_equal(layer.b.data[H:2 * H], np.ones(H))
        np.testing.assert_array_equal(layer.b.data[:H], np.zeros(H))

    def test_padded_steps_do_not_change_state(self):
        rng = np.random.default_rng(3)
        layer = LSTM(2, 3, rng=rng)
        tokens = rng.standard_normal((1, 3, 2))
        padded = np.concatenate([tokens, rng.standard_normal((1, 2, 2))], axis=1)
        mask = np.array([[1.0, 1.0, 1.0, 0.0, 0.0]])
        unpadded_out = layer(Tensor(tokens), ForwardContext(mask=np.ones((1, 3))))
        padded_out = layer(Tensor(padded), ForwardContext(mask=mask))
        np.testing.assert_allclose(padded_out.data, unpadded_out.data, atol=1e-12)

    def test_shape_error(self):
        with pytest.raises(ShapeError, match="lstm"):
            forward(LSTM(3, 4), Tensor(np.zeros((2, 5, 7))))


class TestGRU:
    def test_matches_reference_equations(self):
        rng = np.random.default_rng(4)
        layer = GRU(3, 5, return_sequences=True, rng=rng)
        x = rng.standard_normal((2, 6, 3))
        out = forward(layer, Tensor(x)).data
        expected = gru_reference(x, layer.Wx.data, layer.Wh.data, layer.b.data)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zero_weights_give_zero_states(self):
        layer = GRU(3, 4)
        for _, p in layer.params():
            p.data[:] = 0.0
        out = forward(layer, Tensor(np.random.default_rng(5).standard_normal((1, 4, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((1, 4)))

    def test_padded_steps_do_not_change_state(self):
        rng = np.random.default_rng(6)
        layer = GRU(2, 3, rng=rng)
        tokens = rng.standard_normal((1, 2, 2))
        padded = np.concatenate([tokens, rng.standard_normal((1, 3, 2))], axis=1)
        unpadded_out = layer(Tensor(tokens), ForwardContext(mask=np.ones((1, 2))))
        padded_out = layer(Tensor(padded), ForwardContext(mask=np.array([[1, 1, 0, 0, 0.0]])))
        np.testing.assert_allclose(padded_out.data, unpadded_out.data, atol=1e-12)


class TestBiLSTM:
    def test_equals_two_independent_lstm_runs(self):
        # construction check: forward half over x, backward half over
        # reversed x (re-reversed), concatenated
        rng = np.random.default_rng(7)
        layer = BiLSTM(3, 4, return_sequences=True, rng=rng)
        x = rng.standard_normal((2, 5, 3))
        out = forward(layer, Tensor(x)).data

        fwd = lstm_reference(x, layer.forward_cell.Wx.data,
                             layer.forward_cell.Wh.data, layer.forward_cell.b.data)
        bwd = lstm_reference(x[:, ::-1, :], layer.backward_cell.Wx.data,
                             layer.backward_cell.Wh.data, layer.backward_cell.b.data)
        expected = np.concatenate([fwd, bwd[:, ::-1, :]], axis=2)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_final_state_concatenates_directions(self):
        rng = np.random.default_rng(8)
        layer = BiLSTM(3, 4, return_sequences=False, rng=rng)
        x = rng.standard_normal((2, 5, 3))
        out = forward(layer, Tensor(x)).data
        assert out.shape == (2, 8)
        fwd = lstm_reference(x, layer.forward_cell.Wx.data,
                             layer.forward_cell.Wh.data, layer.forward_cell.b.data)
        bwd = lstm_reference(x[:, ::-1, :], layer.backward_cell.Wx.data,
                             layer.backward_cell.Wh.data, layer.backward_cell.b.data)
        np.testing.assert_allclose(out[:, :4], fwd[:, -1, :], atol=1e-12)
        np.testing.assert_allclose(out[:, 4:], bwd[:, -1, :], atol=1e-12)

    def test_two_directions_have_distinct_weights(self):
        layer = BiLSTM(3, 4, rng=np.random.default_rng(9))
        assert not np.array_equal(layer.forward_cell.Wx.data, layer.backward_cell.Wx.data)

    def test_padded_steps_do_not_change_state(self):
        rng = np.random.default_rng(10)
        layer = BiLSTM(2, 3, rng=rng)
        tokens = rng.standard_normal((1, 3, 2))
        padded = np.concatenate([tokens, rng.standard_normal((1, 2, 2))], axis=1)
        unpadded_out = layer(Tensor(tokens), ForwardContext(mask=np.ones((1, 3))))
        padded_out = layer(Tensor(padded), ForwardContext(mask=np.array([[1, 1, 1, 0, 0.0]])))
        np.testing.assert_allclose(padded_out.data, unpadded_out.data, atol=1e-12)


def test_recurrent_kernels_are_orthogonal():
    layer = LSTM(3, 6, rng=np.random.default_rng(11))
    for k in range(4):
        block = layer.Wh.data[:, 6 * k:6 * (k + 1)]
        np.testing.assert_allclose(block @ block.T, np.eye(6), atol=1e-10)
