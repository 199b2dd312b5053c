"""Test configuration."""

import os

import numpy as np
import pytest

from src.core.models import BlockInference, DataBlock, SynthSpec
from src.services.joint_search import run_full_search
from src.services.noise_impute import impute_noise
from src.services.reconstruct import reconstruct_blocks
from src.services.rot_bootstrap import rotational_bootstrap
from src.services.signal_extract import extract_signal
from src.services.synth import generate

# Keep test runs independent of a developer's environment
for key in [k for k in os.environ if k.startswith("DIVAS_")]:
    del os.environ[key]

# Three blocks over 96 objects; sign-pattern scores, pinstripe loadings
SMALL_SPEC = SynthSpec(n=96, trait_dims=[48, 96, 240], seed=11)
SMALL_M = 60


def make_block(values, name="block", **flags) -> DataBlock:
    """Wrap a matrix as a DataBlock."""
    return DataBlock(values=np.asarray(values, dtype=float), block_name=name, **flags)


def infer_block(block: DataBlock, index: int, seed: int, M: int = SMALL_M) -> BlockInference:
    """Extraction, imputation and bootstrap for one block with fixed seeds."""
    est = extract_signal(block)
    noise = impute_noise(block, est, np.random.default_rng(seed))
    inference = BlockInference(index=index, block=block, estimate=est, noise=noise)
    if est.r_hat == 0:
        return inference
    boot = rotational_bootstrap(block, est, noise, M=M, rng=np.random.default_rng(seed + 1000))
    return inference.model_copy(update={"bootstrap": boot})


@pytest.fixture
def rng():
    """Seeded generator for a single test."""
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_synthetic():
    """Blocks and ground truth of the small three-block data set."""
    return generate(SMALL_SPEC)


@pytest.fixture(scope="session")
def small_inferences(small_synthetic):
    """Bootstrapped inferences of the small data set."""
    blocks, _ = small_synthetic
    return [infer_block(block, k, seed=100 + k) for k, block in enumerate(blocks)]


@pytest.fixture(scope="session")
def small_search(small_inferences):
    """Joint structures of the small data set and every searched collection."""
    history = []
    structures = run_full_search(small_inferences, history=history)
    return structures, history


@pytest.fixture(scope="session")
def small_decompositions(small_synthetic, small_search):
    """Per-block reconstructions of the small data set."""
    blocks, _ = small_synthetic
    structures, _ = small_search
    return reconstruct_blocks(blocks, structures)
