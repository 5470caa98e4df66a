"""Shared fixtures: synthetic benchmark-format files and toy datasets."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from pathconv import Dataset, encode_degree_features

from oracles import cycle_graph, path_graph

# Real benchmark datasets are optional; point this at a directory holding
# e.g. MUTAG/MUTAG_A.txt to enable the data-dependent acceptance tests.
DATA_DIR = Path(os.environ.get("PATHCONV_DATA_DIR", Path(__file__).parent.parent / "data"))


def write_tu_files(directory: Path, name: str, edges_1based, indicator,
                   graph_labels, node_labels=None) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{name}_A.txt").write_text(
        "".join(f"{u}, {v}\n" for u, v in edges_1based))
    (directory / f"{name}_graph_indicator.txt").write_text(
        "".join(f"{g}\n" for g in indicator))
    (directory / f"{name}_graph_labels.txt").write_text(
        "".join(f"{c}\n" for c in graph_labels))
    if node_labels is not None:
        (directory / f"{name}_node_labels.txt").write_text(
            "".join(f"{l}\n" for l in node_labels))
    return directory


@pytest.fixture
def tiny_tu_dir(tmp_path):
    """A 2-graph dataset: a 2-node single-edge graph and a triangle."""
    return write_tu_files(
        tmp_path, "TINY",
        edges_1based=[(1, 2), (2, 1), (3, 4), (4, 3), (4, 5), (5, 4), (3, 5), (5, 3)],
        indicator=[1, 1, 2, 2, 2],
        graph_labels=[-1, 1],
        node_labels=[0, 1, 0, 1, 1],
    )


def build_toy_dataset(n_graphs: int = 20, min_nodes: int = 10,
                      max_nodes: int = 16, seed: int = 0) -> Dataset:
    """Cycles (class 0) versus paths (class 1), separable by degree counts."""
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(n_graphs):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        if i % 2 == 0:
            graphs.append(cycle_graph(n, target=0))
        else:
            graphs.append(path_graph(n, target=1))
    dataset = Dataset(name="TOY", graphs=tuple(graphs), num_classes=2, feature_dim=1)
    return encode_degree_features(dataset)


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    return build_toy_dataset()


def find_benchmark(*names: str) -> tuple[Path, str] | None:
    """(data dir, dataset name) for the first candidate that exists, else None."""
    for name in names:
        if (DATA_DIR / name / f"{name}_A.txt").exists() or \
                (DATA_DIR / f"{name}_A.txt").exists():
            return DATA_DIR, name
    return None


def require_benchmark(*names: str) -> tuple[Path, str]:
    """Skip the calling test when none of the candidate datasets are present."""
    found = find_benchmark(*names)
    if found is None:
        pytest.skip(
            f"benchmark dataset {'/'.join(names)} not found under {DATA_DIR} "
            f"(set PATHCONV_DATA_DIR; see README)"
        )
    return found
