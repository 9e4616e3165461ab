"""A small feed-forward regressor predicting cost from a configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from imagecl.errors import InsufficientDataError
from imagecl.tuning import EXACT_COUNT_LIMIT, Configuration, TuningSpace, iter_valid_tables, sample

MIN_SAMPLES = 10
HIDDEN = 16
EPOCHS = 500
STEP = 0.01
DECAY = 0.99
BATCH = 8
SUBSAMPLE = 100_000


@dataclass(frozen=True)
class Feature:
    """How one parameter becomes one input column."""

    pid: str
    kind: str  # "binary" or "log2"
    lo: float
    hi: float

    def encode(self, col: np.ndarray) -> np.ndarray:
        col = np.asarray(col, dtype=np.float64)
        if self.kind == "binary":
            return (col == self.hi).astype(np.float64)
        if self.hi == self.lo:
            return np.zeros_like(col)
        return (np.log2(col) - self.lo) / (self.hi - self.lo)


@dataclass
class Encoding:
    features: list[Feature]

    @classmethod
    def for_space(cls, space: TuningSpace) -> "Encoding":
        feats = []
        for p in space.params:
            dom = sorted(p.domain)
            if len(dom) == 2 and min(dom) == 0:
                feats.append(Feature(p.id, "binary", 0.0, float(dom[1])))
            else:
                feats.append(Feature(p.id, "log2", float(np.log2(dom[0])), float(np.log2(dom[-1]))))
        return cls(feats)

    @property
    def ids(self) -> list[str]:
        return [f.pid for f in self.features]

    def encode_table(self, table: np.ndarray) -> np.ndarray:
        """Encode an int matrix whose columns follow ``self.ids``."""
        table = np.asarray(table)
        if table.ndim != 2 or table.shape[1] != len(self.features):
            raise ValueError(f"expected a matrix with {len(self.features)} columns")
        if not self.features:
            return np.zeros((len(table), 0))
        return np.stack([f.encode(table[:, i]) for i, f in enumerate(self.features)], axis=1)

    def table(self, configs) -> np.ndarray:
        return np.array([[cfg[pid] for pid in self.ids] for cfg in configs], dtype=np.int64).reshape(
            -1, len(self.features)
        )


@dataclass
class Surrogate:
    encoding: Encoding
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    y_mean: float
    y_std: float
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def features(self, table: np.ndarray) -> np.ndarray:
        x = self.encoding.encode_table(table)
        if self.x_mean is not None:
            x = (x - self.x_mean) / self.x_std
        return x

    def predict_table(self, table: np.ndarray) -> np.ndarray:
        """Predicted cost (original units) for each row of ``table``."""
        z = _forward(self.features(table), self.w1, self.b1, self.w2, self.b2)[0]
        return np.exp(z * self.y_std + self.y_mean)

    def predict(self, cfg) -> float:
        return float(self.predict_table(self.encoding.table([cfg]))[0])


def _forward(x, w1, b1, w2, b2):
    a = x @ w1 + b1
    # softplus hidden units
    h = np.logaddexp(0.0, a)
    return h @ w2 + b2, h, a


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def train_surrogate(measurements, encoding: Encoding, seed: int = 0, hidden: int = HIDDEN,
                    epochs: int = EPOCHS) -> Surrogate:
    """Fit log cost from ok measurements (objects with ``cfg`` and ``value``).

    Training data is put in canonical order first so that the fit depends
    only on the data and the seed, not on the order it arrived in.
    """
    data = sorted(measurements, key=lambda m: (m.cfg.dumps(), m.value))
    if len(data) < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} ok measurements, got {len(data)}")
    values = np.array([m.value for m in data], dtype=np.float64)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError("measured values must be positive and finite")
    x = encoding.encode_table(encoding.table([m.cfg for m in data]))
    # standardized inputs; constant columns are only centered
    x_mean = x.mean(axis=0)
    x_std = x.std(axis=0)
    x_std[x_std == 0] = 1.0
    x = (x - x_mean) / x_std
    y = np.log(values)
    y_mean = float(y.mean())
    y_std = float(y.std()) or 1.0
    t = (y - y_mean) / y_std

    rng = np.random.default_rng(seed)
    n_in = x.shape[1]
    params = [
        rng.standard_normal((n_in, hidden)) / np.sqrt(max(n_in, 1)),
        rng.standard_normal(hidden) / np.sqrt(max(n_in, 1)),
        rng.standard_normal(hidden) / np.sqrt(hidden),
        np.zeros(()),
    ]
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n = len(t)
    for epoch in range(epochs):
        lr = STEP * DECAY**epoch
        order = rng.permutation(n)
        for start in range(0, n, BATCH):
            idx = order[start:start + BATCH]
            xb, tb = x[idx], t[idx]
            pred, h, a = _forward(xb, *params)
            err = (pred - tb) * (2.0 / len(idx))
            gw2 = h.T @ err
            gb2 = err.sum()
            dh = np.outer(err, params[2]) * _sigmoid(a)
            grads = [xb.T @ dh, dh.sum(axis=0), gw2, np.asarray(gb2)]
            step += 1
            for i, g in enumerate(grads):
                m1[i] = beta1 * m1[i] + (1 - beta1) * g
                m2[i] = beta2 * m2[i] + (1 - beta2) * g * g
                mh = m1[i] / (1 - beta1**step)
                vh = m2[i] / (1 - beta2**step)
                params[i] = params[i] - lr * mh / (np.sqrt(vh) + eps)
    final = float(np.mean((_forward(x, *params)[0] - t) ** 2))
    meta = {"seed": seed, "epochs": epochs, "hidden": hidden, "samples": n, "finalLoss": final}
    return Surrogate(encoding, params[0], params[1], params[2], float(params[3]), y_mean, y_std,
                     x_mean, x_std, meta)


def _lex_order(table: np.ndarray) -> np.ndarray:
    if table.shape[1] == 0:
        return np.arange(len(table))
    return np.lexsort(table.T[::-1])


def rank_table(model: Surrogate, table: np.ndarray):
    """Rows sorted by ascending prediction, ties in lexicographic order."""
    table = table[_lex_order(table)]
    pred = model.predict_table(table)
    order = np.argsort(pred, kind="stable")
    return table[order], pred[order]


def candidate_tables(space: TuningSpace, seed: int = 0, cap: int = EXACT_COUNT_LIMIT):
    """The configurations prediction runs over, as chunks of int rows.

    Every valid configuration when the product fits under ``cap``,
    otherwise a seeded random subsample.
    """
    if space.product_size <= cap:
        yield from iter_valid_tables(space)
        return
    cfgs = sample(space, SUBSAMPLE, seed)
    yield np.array([[c[pid] for pid in space.ids] for c in cfgs], dtype=np.int64)


def predict_all(model: Surrogate, space: TuningSpace, cap: int = EXACT_COUNT_LIMIT, seed: int = 0):
    """Ranked list of (Configuration, predicted value) over the space."""
    parts = list(candidate_tables(space, seed, cap))
    table = np.concatenate(parts) if parts else np.zeros((0, len(space.ids)), dtype=np.int64)
    table, pred = rank_table(model, table)
    return [(Configuration(dict(zip(space.ids, row))), float(v)) for row, v in zip(table.tolist(), pred)]


def best_unmeasured(model: Surrogate, space: TuningSpace, k: int, exclude, seed: int = 0,
                    cap: int = EXACT_COUNT_LIMIT) -> list[Configuration]:
    """The ``k`` best-predicted configurations not in ``exclude``.

    Streams over chunks, keeping a running shortlist so the full valid
    table never has to be held in memory.
    """
    exclude = set(exclude)
    keep_n = k + len(exclude)
    best_rows = np.zeros((0, len(space.ids)), dtype=np.int64)
    best_pred = np.zeros(0)
    for chunk in candidate_tables(space, seed, cap):
        if not len(chunk):
            continue
        pred = model.predict_table(chunk)
        rows = np.concatenate([best_rows, chunk])
        preds = np.concatenate([best_pred, pred])
        if len(rows) > keep_n:
            # keep everything tied with the cut-off so tie-breaking stays exact
            cut = np.partition(preds, keep_n - 1)[keep_n - 1]
            sel = preds <= cut
            rows, preds = rows[sel], preds[sel]
        best_rows, best_pred = rows, preds
    table, pred = rank_table(model, best_rows) if len(best_rows) else (best_rows, best_pred)
    out = []
    for row in table.tolist():
        cfg = Configuration(dict(zip(space.ids, row)))
        if cfg not in exclude:
            out.append(cfg)
            if len(out) == k:
                break
    return out
