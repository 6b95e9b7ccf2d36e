"""
Versioned plain-text model files.

Layout (one record per line, floats written with ``repr`` so they round-trip
exactly)::

    cfmf-model 1
    kind <algorithm>
    param k <K>                 # 0 for models without factors
    param m <num users>
    param n <num items>
    param global_mean <mean>
    matrix P <M> <K>            # mf_als and cf_mf_* only, then M rows
    matrix Q <N> <K>            # then N rows
    ...                         # algorithm-specific blocks, see below
    ids users <M>               # external user IDs, one per line
    ids items <N>
    end

Blocks are ``param NAME VALUE``, ``vector NAME LEN`` (LEN values, one per
line), ``matrix NAME ROWS COLS`` (ROWS lines of COLS values) and ``links
NAME COUNT COLS`` (COUNT lines of ``entity neighbor score [weight]``).
Integrated models add ``vector bu``, ``vector bi``, ``matrix a`` (M x 3),
the ``neighbors`` links with their learned weights, the frozen bias model
(``param bias_literal``, ``vector user_offset``, ``vector item_offset``) and
the similarity parameters.  Neighbourhood CF models store the bias model,
the similarity parameters and the ``neighbors`` links.
"""

from __future__ import annotations

from os import PathLike
from typing import TextIO

import numpy as np

from .als import FactorModel
from .baseline import BiasModel
from .dataset import Dataset
from .errors import ConfigError
from .evaluation import Model, algorithm_of
from .integrated import IntegratedModel
from .neighborhood import CfPredictor
from .similarity import NeighborStore, SimilarityParams

MAGIC = "cfmf-model"
FORMAT_VERSION = 1


def _f(x) -> str:
    return repr(float(x))


class _Writer:
    def __init__(self, out: TextIO):
        self.out = out

    def line(self, *parts):
        self.out.write(" ".join(str(p) for p in parts) + "\n")

    def param(self, name, value):
        if isinstance(value, float):
            value = _f(value)
        self.line("param", name, value)

    def vector(self, name, v):
        v = np.asarray(v, dtype=np.float64)
        self.line("vector", name, len(v))
        self.out.writelines(_f(x) + "\n" for x in v.tolist())

    def matrix(self, name, a):
        a = np.asarray(a, dtype=np.float64)
        self.line("matrix", name, a.shape[0], a.shape[1])
        for row in a.tolist():
            self.out.write(" ".join(_f(x) for x in row) + "\n")

    def links(self, name, store: NeighborStore, weights=None):
        cols = 3 if weights is None else 4
        self.line("links", name, len(store), cols)
        for s, (e, n, score) in enumerate(store.pairs()):
            extra = "" if weights is None else " " + _f(weights[s])
            self.out.write(f"{e} {n} {_f(score)}{extra}\n")

    def ids(self, name, ids):
        self.line("ids", name, len(ids))
        self.out.writelines(f"{x}\n" for x in ids)


def _write_bias(w: _Writer, bias: BiasModel):
    w.param("bias_literal", int(bias.literal))
    w.vector("user_offset", bias.user_offset)
    w.vector("item_offset", bias.item_offset)


def _write_sim(w: _Writer, params: SimilarityParams):
    w.param("axis", params.axis)
    w.param("shrink", float(params.shrink))
    w.param("top_n", params.top_n)


def save_model(path: str | PathLike, model: Model, dataset: Dataset):
    """Write ``model`` (fitted on ``dataset``) to ``path``."""
    train = dataset.train
    kind = algorithm_of(model)
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        w = _Writer(out)
        w.line(MAGIC, FORMAT_VERSION)
        w.line("kind", kind)
        k = model.k if isinstance(model, (FactorModel, IntegratedModel)) else 0
        gm = model.bias.global_mean if isinstance(model, CfPredictor) else model.global_mean
        w.param("k", k)
        w.param("m", train.num_users)
        w.param("n", train.num_items)
        w.param("global_mean", float(gm))
        if isinstance(model, (FactorModel, IntegratedModel)):
            w.matrix("P", model.P)
            w.matrix("Q", model.Q)
        if isinstance(model, IntegratedModel):
            w.vector("bu", model.bu)
            w.vector("bi", model.bi)
            w.matrix("a", model.a)
            _write_sim(w, model.neighbor_store.params)
            w.links("neighbors", model.neighbor_store, model.w)
            _write_bias(w, model.bias)
        elif isinstance(model, CfPredictor):
            _write_sim(w, model.store.params)
            w.links("neighbors", model.store)
            _write_bias(w, model.bias)
        elif isinstance(model, BiasModel):
            _write_bias(w, model)
        w.ids("users", train.user_map.ids)
        w.ids("items", train.item_map.ids)
        w.line("end")


def _read_blocks(path) -> dict:
    blocks: dict = {}
    with open(path, encoding="utf-8") as f:
        lines = iter(f.read().split("\n"))

        def take(n):
            out = []
            for _ in range(n):
                try:
                    out.append(next(lines))
                except StopIteration:
                    raise ConfigError(f"{path}: truncated model file") from None
            return out

        header = next(lines, "").split()
        if len(header) != 2 or header[0] != MAGIC:
            raise ConfigError(f"{path}: not a model file")
        if int(header[1]) != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported model format version {header[1]}")
        for line in lines:
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "end":
                return blocks
            if tag == "kind":
                blocks["kind"] = parts[1]
            elif tag == "param":
                blocks[parts[1]] = parts[2]
            elif tag == "vector":
                blocks[parts[1]] = np.array([float(x) for x in take(int(parts[2]))])
            elif tag == "matrix":
                rows, cols = int(parts[2]), int(parts[3])
                a = np.array([[float(x) for x in r.split()] for r in take(rows)], dtype=np.float64)
                blocks[parts[1]] = a.reshape(rows, cols)
            elif tag == "links":
                blocks[parts[1]] = [r.split() for r in take(int(parts[2]))]
            elif tag == "ids":
                blocks["ids_" + parts[1]] = tuple(take(int(parts[2])))
            else:
                raise ConfigError(f"{path}: unknown record {tag!r}")
    raise ConfigError(f"{path}: missing end marker")


def _store_from(blocks) -> tuple[NeighborStore, np.ndarray | None]:
    params = SimilarityParams(float(blocks["shrink"]), int(blocks["top_n"]), blocks["axis"])
    rows = blocks["neighbors"]
    n_ent = int(blocks["n"] if params.axis == "item" else blocks["m"])
    ents = np.array([int(r[0]) for r in rows], dtype=np.int64)
    ptr = np.zeros(n_ent + 1, dtype=np.int64)
    np.cumsum(np.bincount(ents, minlength=n_ent), out=ptr[1:])
    store = NeighborStore(params, ptr, [int(r[1]) for r in rows], [float(r[2]) for r in rows])
    weights = np.array([float(r[3]) for r in rows]) if rows and len(rows[0]) == 4 else None
    return store, weights


def load_model(path: str | PathLike, dataset: Dataset) -> tuple[str, Model]:
    """
    Read a model file and bind it to ``dataset``, whose ID maps must equal
    the ones the model was trained with.
    """
    b = _read_blocks(path)
    kind = b.get("kind")
    train = dataset.train
    if b["ids_users"] != train.user_map.ids or b["ids_items"] != train.item_map.ids:
        raise ConfigError(f"{path}: model was trained on different users/items than this dataset")

    gm = float(b["global_mean"])
    bias = None
    if "user_offset" in b:
        bias = BiasModel(gm, b["user_offset"], b["item_offset"], bool(int(b["bias_literal"])))

    if kind == "baseline":
        model = bias
    elif kind in ("cf_user", "cf_item"):
        store, _ = _store_from(b)
        model = CfPredictor(store, bias, train, store.params.axis)
    elif kind == "mf_als":
        model = FactorModel(b["P"], b["Q"], gm)
    elif kind in ("cf_mf_v1", "cf_mf_v2"):
        store, weights = _store_from(b)
        if weights is None:
            weights = np.zeros(len(store))
        model = IntegratedModel(
            version=kind[-2:], bu=b["bu"], bi=b["bi"], P=b["P"], Q=b["Q"], w=weights,
            a=b["a"], global_mean=gm, neighbor_store=store, bias=bias, train=train,
        )
    else:
        raise ConfigError(f"{path}: unknown model kind {kind!r}")
    return kind, model
