from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corpus import build_corpus  # noqa: E402

from sotverse import attributes, calibration, dataset, spaces  # noqa: E402

GOLDENS = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root)
    return root


@pytest.fixture(scope="session")
def fixture_env(corpus_root):
    return dataset.load_manifest(corpus_root / "manifest.json")


@pytest.fixture(scope="session")
def pipeline_dir(tmp_path_factory, fixture_env) -> Path:
    """Annotations, flags and mined spaces for the fixture corpus."""
    root = tmp_path_factory.mktemp("pipeline")
    attrs_dir = root / "attrs"
    thresholds = calibration.default_thresholds()
    tables = {}
    for seq in fixture_env.sequences:
        table = attributes.annotate_sequence(seq, mode="full")
        tables[seq.id] = table
        seq_dir = attrs_dir / seq.id
        seq_dir.mkdir(parents=True)
        attributes.write_table(table, seq_dir / "attributes.csv")
        calibration.write_flags(
            calibration.classify_table(table, thresholds), seq_dir / "flags.csv"
        )
    spaces_dir = root / "spaces"
    spaces_dir.mkdir()
    for name in attributes.ATTRIBUTE_NAMES:
        sub = spaces.construct_subspace(fixture_env, name, thresholds, tables)
        spaces.write_subspace(sub, spaces_dir / f"{name}.json")
    return root


@pytest.fixture(scope="session")
def goldens_dir() -> Path:
    return GOLDENS
