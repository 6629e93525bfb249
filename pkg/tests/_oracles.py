"""Independent test oracles for gradient checking.

Both functions compute centered difference quotients of the network loss with
respect to every parameter. The plain version perturbs one parameter at a
time and calls the public loss; the fast version evaluates the same quotients
but batches the single-entry perturbations of one layer through the remaining
layers as matrix rows (it is validated against the plain version on small
networks before being trusted on large ones).
"""

import numpy as np


def loss_of(net, X, y):
    return net.loss(X, y)


def finite_diff_grads(net, X, y, eps=1e-5):
    """Per-parameter central differences; returns (gW_list, gb_list)."""
    gW, gb = [], []
    for W in net.weights:
        g = np.zeros_like(W)
        it = np.nditer(W, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = W[idx]
            W[idx] = old + eps
            up = loss_of(net, X, y)
            W[idx] = old - eps
            down = loss_of(net, X, y)
            W[idx] = old
            g[idx] = (up - down) / (2 * eps)
        gW.append(g)
    for b in net.biases:
        g = np.zeros_like(b)
        for i in range(len(b)):
            old = b[i]
            b[i] = old + eps
            up = loss_of(net, X, y)
            b[i] = old - eps
            down = loss_of(net, X, y)
            b[i] = old
            g[i] = (up - down) / (2 * eps)
        gb.append(g)
    return gW, gb


def _row_losses(net, start_layer, acts_rows):
    """Forward a stack of layer-(start_layer) pre-activations to per-row losses.

    ``acts_rows`` has one perturbed pre-activation vector per row; the single
    training sample's loss is evaluated independently for every row.
    """
    a = np.maximum(acts_rows, 0.0) if start_layer < len(net.weights) else acts_rows
    for k in range(start_layer, len(net.weights) - 1):
        a = np.maximum(a @ net.weights[k] + net.biases[k], 0.0)
    z = (a @ net.weights[-1] + net.biases[-1])[:, 0]
    return z


def finite_diff_grads_fast(net, X, y, eps=1e-5):
    """Batched central differences for a single-sample batch (len(y) == 1)."""
    assert len(np.atleast_1d(y)) == 1, "fast oracle assumes batch size 1"
    X = np.asarray(X, dtype=np.float64).reshape(1, -1)
    y_val = float(np.atleast_1d(y)[0])

    if net.spec.head == "sigmoid":
        def head_loss(z):
            return np.logaddexp(0.0, z) - y_val * z
    else:
        def head_loss(z):
            return (np.maximum(z, 0.0) - y_val) ** 2

    # activations entering each layer, and each layer's base pre-activation
    acts = [X]
    a = X
    pre = []
    for W, b in zip(net.weights, net.biases):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)

    gW, gb = [], []
    n_layers = len(net.weights)
    for layer in range(n_layers):
        fan_in, width = net.weights[layer].shape
        a_in = acts[layer][0]
        z_base = pre[layer][0]
        gW_l = np.zeros((fan_in, width))
        last = layer == n_layers - 1

        def losses_from(z_rows):
            if last:
                return head_loss(z_rows[:, 0])
            z_final = _row_losses(net, layer + 1, z_rows)
            return head_loss(z_final)

        diag = np.arange(width)
        for i in range(fan_in):
            bump = eps * a_in[i]
            z_plus = np.tile(z_base, (width, 1))
            z_plus[diag, diag] += bump
            z_minus = np.tile(z_base, (width, 1))
            z_minus[diag, diag] -= bump
            gW_l[i] = (losses_from(z_plus) - losses_from(z_minus)) / (2 * eps)
        gW.append(gW_l)

        z_plus = np.tile(z_base, (width, 1))
        z_plus[diag, diag] += eps
        z_minus = np.tile(z_base, (width, 1))
        z_minus[diag, diag] -= eps
        gb.append((losses_from(z_plus) - losses_from(z_minus)) / (2 * eps))
    return gW, gb


def max_relative_error(analytic_W, analytic_b, fd_W, fd_b, floor=1e-8):
    worst = 0.0
    for a, f in list(zip(analytic_W, fd_W)) + list(zip(analytic_b, fd_b)):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def min_abs_preactivation(net, X):
    """Smallest |pre-activation| anywhere; a margin against ReLU kinks."""
    a = np.asarray(X, dtype=np.float64)
    worst = np.inf
    for W, b in zip(net.weights, net.biases):
        z = a @ W + b
        worst = min(worst, float(np.min(np.abs(z))))
        a = np.maximum(z, 0.0)
    return worst
