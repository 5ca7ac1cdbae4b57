"""Reference numpy implementation of the hot training kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and semantics. This module is the fallback when the extension is
not built, and the oracle the compiled kernels are tested against.
"""

import numpy as np

LINEAR, TANH, RELU, SIGMOID, SOFTPLUS = range(5)
HEAD_SIGMOID, HEAD_SOFTPLUS = 0, 1
LOSS_MSE, LOSS_MAE = 0, 1


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _activate(z, act):
    if act == LINEAR:
        return z.copy()
    if act == TANH:
        return np.tanh(z)
    if act == RELU:
        return np.maximum(z, 0.0)
    if act == SIGMOID:
        return sigmoid(z)
    if act == SOFTPLUS:
        return softplus(z)
    raise ValueError(f"unknown activation code {act}")


def _activation_grad(z, act):
    if act == LINEAR:
        return np.ones_like(z)
    if act == TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    if act == RELU:
        return (z > 0.0).astype(np.float64)
    if act == SIGMOID:
        s = sigmoid(z)
        return s * (1.0 - s)
    if act == SOFTPLUS:
        return sigmoid(z)
    raise ValueError(f"unknown activation code {act}")


def forward_pass(weights, biases, acts, x, masks):
    """Run a dense network on a batch.

    ``masks[l]`` is either None or an array already scaled by 1/(1-p).
    Returns ``(pres, posts)`` with ``posts[0] is x`` and
    ``posts[l + 1] = act(pres[l]) * masks[l]``.
    """
    pres = []
    posts = [x]
    a = x
    for w, b, act, mask in zip(weights, biases, acts, masks):
        z = a @ w.T + b
        h = _activate(z, act)
        if mask is not None:
            h = h * mask
        pres.append(z)
        posts.append(h)
        a = h
    return pres, posts


def backward_pass(weights, acts, pres, posts, masks, grad_out, at_preactivation):
    """Gradients of ``sum(output * grad_out)`` w.r.t. all weights and biases.

    With ``at_preactivation`` the incoming gradient refers to the last
    layer's pre-activation instead of its output.
    """
    n_layers = len(weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    g = grad_out
    for layer in range(n_layers - 1, -1, -1):
        if layer == n_layers - 1 and at_preactivation:
            dz = g
        else:
            mask = masks[layer]
            if mask is not None:
                g = g * mask
            dz = g * _activation_grad(pres[layer], acts[layer])
        d_weights[layer] = dz.T @ posts[layer]
        d_biases[layer] = dz.sum(axis=0)
        if layer > 0:
            g = dz @ weights[layer]
    return d_weights, d_biases


def nesterov_update(params, grads, velocities, lr, momentum):
    """In-place Nesterov step on lookahead-point parameters.

    v <- m*v - lr*g;  p <- p + m*v - lr*g
    """
    for p, g, v in zip(params, grads, velocities):
        v *= momentum
        v -= lr * g
        p += momentum * v - lr * g


def joint_loss_batch(head, loss_kind, y, y_r, xi, lam):
    """Per-sample joint loss and its partial derivatives.

    Returns ``(value, d_yr, d_xi, f)`` where ``d_yr`` already includes the
    ``f(z)`` factor.
    """
    r = y - y_r
    if loss_kind == LOSS_MSE:
        big_l = r * r
        dl_dyr = -2.0 * r
    else:
        big_l = np.abs(r)
        dl_dyr = -np.sign(r)
    if head == HEAD_SIGMOID:
        f = softplus(xi)
        g = softplus(-xi)
        df = sigmoid(xi)
        dg = -sigmoid(-xi)
    else:
        z = softplus(xi)
        f = z
        g = -np.log(z)
        df = sigmoid(xi)
        dg = -df / z
    value = big_l * f + lam * g
    return value, dl_dyr * f, big_l * df + lam * dg, f


def regressor_loss_batch(loss_kind, y, y_r):
    r = y - y_r
    if loss_kind == LOSS_MSE:
        return r * r, -2.0 * r
    return np.abs(r), -np.sign(r)
