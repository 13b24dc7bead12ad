import numpy as np
import pytest

from fairtab import data, datasets, nn


def finite_difference_grads(params, x, loss_fn, h=1e-5):
    """Central-difference gradient of loss_fn(params, x) for every parameter.

    Returns a list of (numeric, analytic) pairs of arrays, one per layer
    parameter, where analytic comes from the caller's loss_fn gradient.
    """
    pairs = []
    for layer in params.layers:
        for arr in (layer.weights, layer.bias):
            numeric = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss_fn(params, x)
                arr[idx] = orig - h
                down = loss_fn(params, x)
                arr[idx] = orig
                numeric[idx] = (up - down) / (2 * h)
            pairs.append(numeric)
    return pairs


def max_relative_error(numeric, analytic, abs_floor=1e-6):
    """Worst relative disagreement; tiny gradients compared absolutely."""
    worst = 0.0
    for num, ana in zip(numeric, analytic):
        num = np.asarray(num)
        ana = np.asarray(ana)
        scale = np.maximum(np.abs(num), np.abs(ana))
        rel = np.abs(num - ana) / np.where(scale > abs_floor, scale, 1.0)
        worst = max(worst, float(rel.max()))
    return worst


def flatten_grads(grads):
    out = []
    for w, b in zip(grads.weight_grads, grads.bias_grads):
        out.append(w)
        out.append(b)
    return out


def random_small_net(rng, max_layers=3, max_units=16, softmax_head=None):
    """Random net + input, redrawn until no relu pre-activation hugs zero
    (finite differences across the kink would be meaningless)."""
    for _ in range(50):
        n_layers = int(rng.integers(1, max_layers + 1))
        sizes = [int(rng.integers(2, max_units + 1)) for _ in range(n_layers + 1)]
        acts = [str(rng.choice(["identity", "relu", "tanh", "sigmoid"])) for _ in range(n_layers)]
        if softmax_head is None:
            use_softmax = bool(rng.integers(0, 2))
        else:
            use_softmax = softmax_head
        if use_softmax:
            acts[-1] = "softmax"
        params = nn.init_params(sizes, acts, int(rng.integers(2**31)))
        x = rng.normal(0.0, 1.0, (int(rng.integers(2, 7)), sizes[0]))
        a = x
        safe = True
        for layer in params.layers:
            z = a @ layer.weights.T + layer.bias
            if layer.activation == "relu" and np.any(np.abs(z) < 1e-3):
                safe = False
                break
            a = nn._activate(z, layer.activation)
        if safe:
            return params, x, acts
    raise AssertionError("could not draw a kink-free random network")


@pytest.fixture(scope="session")
def planted_table():
    return datasets.make_planted_copy(n_rows=1000, seed=42)


@pytest.fixture(scope="session")
def planted_dataset(planted_table, tmp_path_factory):
    header, rows = planted_table
    path = tmp_path_factory.mktemp("planted") / "planted.csv"
    data.write_csv(path, header, rows)
    ds = data.load_csv(path, "group")
    return data.split(ds, 0.2, seed=7)


def noise_column_mse(dataset, y):
    """Mean squared reconstruction error over the marginally independent
    columns, in z-scored units."""
    err = (y - dataset.x) ** 2
    blocks = [
        (start, stop)
        for col, start, stop in dataset.schema.encoded_blocks()
        if col.name in datasets.PLANTED_NOISE_COLUMNS
    ]
    return float(np.mean([err[:, s:e].mean() for s, e in blocks]))
