"""Classifier over persistence images and fixed features, plus the
differentiable map from wavelet coefficients to persistence images."""

from __future__ import annotations

import json

import numpy as np

from . import autodiff as ad
from . import sidecar
from .graphs import Graph
from .persistence import diagram_gradient, extended_persistence
from .vectorize import AffineRescale, vectorise_diagram

CNN_OUT = 22 * 22
DROPOUT = 0.5


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Classifier:
    """Two CNN branches (optimisable and static images), an MLP on features,
    and an affine head producing one logit per graph."""

    def __init__(self, n_features: int, rng: np.random.Generator):
        self.n_features = n_features
        self.params: dict[str, ad.Tensor] = {}
        self.bn: dict[str, ad.BatchNormState] = {}
        for branch in ("cnn_opt", "cnn_static"):
            self._bn(f"{branch}.bn1", 3)
            self._conv(f"{branch}.conv1", 3, 20, rng)
            self._bn(f"{branch}.bn2", 20)
            self._conv(f"{branch}.conv2", 20, 1, rng)
        if n_features:
            self._bn("mlp.bn_in", n_features)
            self._affine("mlp.aff", n_features, n_features, rng)
            self._bn("mlp.bn_out", n_features)
        self._affine("head", 2 * CNN_OUT + n_features, 1, rng)

    def _conv(self, name, c_in, c_out, rng, k=2):
        fan = c_in * k * k
        self.params[f"{name}.w"] = ad.parameter(_uniform(rng, (c_out, c_in, k, k), fan))
        self.params[f"{name}.b"] = ad.parameter(_uniform(rng, (c_out,), fan))

    def _affine(self, name, n_in, n_out, rng):
        self.params[f"{name}.w"] = ad.parameter(_uniform(rng, (n_out, n_in), n_in))
        self.params[f"{name}.b"] = ad.parameter(_uniform(rng, (n_out,), n_in))

    def _bn(self, name, c):
        self.params[f"{name}.gamma"] = ad.parameter(np.ones(c))
        self.params[f"{name}.beta"] = ad.parameter(np.zeros(c))
        self.bn[name] = ad.BatchNormState.fresh(c)

    def _norm(self, name, x, train):
        p = self.params
        return ad.batch_norm(x, p[f"{name}.gamma"], p[f"{name}.beta"], self.bn[name], train)

    def cnn(self, branch: str, x: ad.Tensor, train: bool, rng=None) -> ad.Tensor:
        p = self.params
        h = self._norm(f"{branch}.bn1", x, train)
        h = ad.relu(ad.conv2d(h, p[f"{branch}.conv1.w"], p[f"{branch}.conv1.b"]))
        h = self._norm(f"{branch}.bn2", h, train)
        if train:
            h = ad.mul_mask(h, ad.dropout_mask(h.shape, DROPOUT, rng))
        h = ad.relu(ad.conv2d(h, p[f"{branch}.conv2.w"], p[f"{branch}.conv2.b"]))
        return ad.flatten(h)

    def mlp(self, x: ad.Tensor, train: bool) -> ad.Tensor:
        p = self.params
        h = self._norm("mlp.bn_in", x, train)
        h = ad.relu(ad.linear(h, p["mlp.aff.w"], p["mlp.aff.b"]))
        return self._norm("mlp.bn_out", h, train)

    def embed(self, opt_images, static_images, features, train: bool, rng=None) -> ad.Tensor:
        """Concatenated pre-head representation of width 484 + 484 + n."""
        opt_images = opt_images if isinstance(opt_images, ad.Tensor) else ad.constant(opt_images)
        parts = [
            self.cnn("cnn_opt", opt_images, train, rng),
            self.cnn("cnn_static", ad.constant(static_images), train, rng),
        ]
        if self.n_features:
            parts.append(self.mlp(ad.constant(features), train))
        return ad.concat(parts, axis=1)

    def forward(self, opt_images, static_images, features, train: bool, rng=None) -> ad.Tensor:
        h = self.embed(opt_images, static_images, features, train, rng)
        return ad.reshape(ad.linear(h, self.params["head.w"], self.params["head.b"]), (-1,))

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def state_arrays(self) -> dict:
        out = {f"param.{k}": v.data for k, v in self.params.items()}
        for k, s in self.bn.items():
            out[f"bn.{k}.mean"] = s.running_mean
            out[f"bn.{k}.var"] = s.running_var
        return out

    def load_arrays(self, arrays: dict):
        for k, v in self.params.items():
            v.data = np.array(arrays[f"param.{k}"])
        for k, s in self.bn.items():
            s.running_mean = np.array(arrays[f"bn.{k}.mean"])
            s.running_var = np.array(arrays[f"bn.{k}.var"])


class WaveletImages:
    """Differentiable map from coefficients to per-graph three-channel images.

    ``blocks[i]`` is the rows of the (reconditioned) parametrisation matrix
    belonging to graph ``i``.
    """

    def __init__(self, graphs: list[Graph], blocks: list[np.ndarray], rescale: AffineRescale):
        self.graphs = graphs
        self.blocks = blocks
        self.rescale = rescale
        self.nongeneric = 0

    def images(self, theta: np.ndarray, idx) -> np.ndarray:
        return np.stack([vectorise_diagram(extended_persistence(self.graphs[i], self.blocks[i] @ theta), self.rescale)[0] for i in idx])

    def __call__(self, theta: ad.Tensor, idx) -> ad.Tensor:
        imgs, records = [], []
        for i in idx:
            d = extended_persistence(self.graphs[i], self.blocks[i] @ theta.data)
            if not d.generic:
                self.nongeneric += 1
            ad.note_kink(d.attribution_key())
            img, back = vectorise_diagram(d, self.rescale)
            imgs.append(img)
            records.append((i, d, back))

        def vjp(g):
            total = np.zeros_like(theta.data)
            for (i, d, back), gi in zip(records, g):
                total += self.blocks[i].T @ diagram_gradient(d, back(gi))
            return (total,)

        return ad.external(np.stack(imgs), (theta,), vjp)


# -- checkpoints -----------------------------------------------------------------


def save_checkpoint(path, model: Classifier, theta, adam: ad.Adam, rng: np.random.Generator, meta=None):
    arrays = model.state_arrays()
    arrays["theta"] = np.asarray(theta)
    for k, v in adam.m.items():
        arrays[f"adam.m.{k}"] = v
    for k, v in adam.v.items():
        arrays[f"adam.v.{k}"] = v
    info = dict(meta or {})
    info["adam_step"] = adam.step_count
    info["adam_lr"] = adam.lr
    info["rng_state"] = json.loads(json.dumps(rng.bit_generator.state, default=int))
    info["n_features"] = model.n_features
    sidecar.save(path, arrays, info)


def load_checkpoint(path):
    """Return ``(model, theta, adam, rng, meta)`` restored exactly."""
    arrays, meta = sidecar.load(path)
    model = Classifier(meta["n_features"], np.random.default_rng(0))
    model.load_arrays(arrays)
    adam = ad.Adam(lr=meta["adam_lr"], step_count=meta["adam_step"])
    adam.m = {k[len("adam.m.") :]: v for k, v in arrays.items() if k.startswith("adam.m.")}
    adam.v = {k[len("adam.v.") :]: v for k, v in arrays.items() if k.startswith("adam.v.")}
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    return model, arrays["theta"], adam, rng, meta
