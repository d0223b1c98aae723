"""
Reading and writing synthesis artifacts.

An artifact directory holds ``manifest.json`` plus the per-mode files listed there, so ``simulate`` and
``verify`` can re-ingest a ``synthesize`` run without further input.
"""

import json
import logging
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from ..duality import ControllerRealization, NodeController
from ..graphnet import AdjacencyMatrix, DelayMatrix
from ..kalman import FilterRealization
from ..models import hash_dictionary, recursive_normalizer
from ..series import MatrixSeries, membership

__all__ = [
    "MANIFEST", "write_json", "read_json", "write_manifest", "read_manifest", "write_delays", "write_series",
    "write_filters", "read_filters", "write_controller", "read_controller", "write_costs", "write_gain_schedule",
    "read_gain_schedule"
]

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def write_json(path: str, data: Any):
    with open(path, "w") as handle:
        json.dump(recursive_normalizer(data, digits=16), handle, indent=2)


def read_json(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise FileNotFoundError("Artifact {} not found.".format(path))
    with open(path, "r") as handle:
        return json.load(handle)


def write_manifest(out: str, manifest: Dict[str, Any], description: Dict[str, Any]):
    manifest = dict(manifest)
    manifest["description_hash"] = hash_dictionary(recursive_normalizer(description))
    write_json(os.path.join(out, MANIFEST), manifest)


def read_manifest(out: str) -> Dict[str, Any]:
    return read_json(os.path.join(out, MANIFEST))


def _labels(prefix: str, N: int) -> List[str]:
    return ["{}{}".format(prefix, i + 1) for i in range(N)]


def write_delays(out: str, delays: DelayMatrix):
    frame = pd.DataFrame(delays.to_table(), index=_labels("node ", delays.N), columns=_labels("node ", delays.N))
    frame.to_csv(os.path.join(out, "delays.csv"))


def write_series(out: str, G: MatrixSeries, law: AdjacencyMatrix, name: str = "series"):
    """
    One CSV per lag plus a manifest with the partitions, the sparsity law and the exact membership result.
    """
    folder = os.path.join(out, name)
    os.makedirs(folder, exist_ok=True)
    for s in range(G.T + 1):
        pd.DataFrame(G[s]).to_csv(os.path.join(folder, "lag_{}.csv".format(s)), index=False, header=False)

    write_json(
        os.path.join(folder, MANIFEST), {
            "horizon": G.T,
            "row_dims": list(G.row_dims),
            "col_dims": list(G.col_dims),
            "law": law.entries.tolist(),
            "membership": membership(G, law),
        })


def write_filters(out: str, filters: List[FilterRealization]):
    for f in filters:
        with open(os.path.join(out, "filter_{}.json".format(f.node + 1)), "w") as handle:
            handle.write(f.model_dump_json())


def read_filters(out: str, N: int) -> List[FilterRealization]:
    ret = []
    for i in range(N):
        path = os.path.join(out, "filter_{}.json".format(i + 1))
        if not os.path.isfile(path):
            raise FileNotFoundError("Artifact {} not found.".format(path))
        with open(path, "r") as handle:
            ret.append(FilterRealization.model_validate_json(handle.read()))
    return ret


def write_controller(out: str, controller: ControllerRealization):
    for ctrl in controller.nodes:
        with open(os.path.join(out, "controller_{}.json".format(ctrl.node + 1)), "w") as handle:
            handle.write(ctrl.model_dump_json())


def read_controller(out: str, manifest: Dict[str, Any]) -> ControllerRealization:
    nodes = []
    for i in range(len(manifest["u_dims"])):
        path = os.path.join(out, "controller_{}.json".format(i + 1))
        if not os.path.isfile(path):
            raise FileNotFoundError("Artifact {} not found.".format(path))
        with open(path, "r") as handle:
            nodes.append(NodeController.model_validate_json(handle.read()))

    return ControllerRealization(nodes=tuple(nodes),
                                 u_dims=manifest["u_dims"],
                                 w_dims=manifest["w_dims"],
                                 memory=manifest["memory"],
                                 law=AdjacencyMatrix(entries=manifest["law"]))


def write_costs(out: str, costs: Dict[str, List[float]]):
    N = len(next(iter(costs.values())))
    pd.DataFrame(costs, index=_labels("node ", N)).to_csv(os.path.join(out, "costs.csv"))


def write_gain_schedule(out: str, gains: List[np.ndarray], summary: Dict[str, Any]):
    folder = os.path.join(out, "gains")
    os.makedirs(folder, exist_ok=True)
    for t, K in enumerate(gains):
        pd.DataFrame(K).to_csv(os.path.join(folder, "K_{}.csv".format(t)), index=False, header=False)
    write_json(os.path.join(folder, "summary.json"), summary)


def read_gain_schedule(out: str) -> List[np.ndarray]:
    folder = os.path.join(out, "gains")
    summary = read_json(os.path.join(folder, "summary.json"))
    ret = []
    for t in range(len(summary["costs"]) - 1):
        path = os.path.join(folder, "K_{}.csv".format(t))
        if not os.path.isfile(path):
            raise FileNotFoundError("Artifact {} not found.".format(path))
        ret.append(pd.read_csv(path, header=None).to_numpy(dtype=float))
    return ret
