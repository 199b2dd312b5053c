"""Synthetic multi-block data with known partially-shared structure."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
import tomli_w

from ..core.errors import ConfigError, SynthesisError
from ..core.models import (
    BlockCollection,
    BlockInference,
    DataBlock,
    LoadingPattern,
    SynthSpec,
    SynthTruth,
    TruthComponent,
)
from .principal_angles import max_principal_angle, principal_angles, vector_subspace_angle

logger = logging.getLogger(__name__)

ANGLE_TOL = 1e-6

PRESETS: Dict[str, SynthSpec] = {
    "paper-fig3": SynthSpec(trait_dims=[200, 400, 10000]),
    "desk": SynthSpec(trait_dims=[200, 400, 2000]),
}

# Segment sign patterns over eight equal runs of objects: pairwise inner products of
# the pair patterns are 4/8 (60°) and the full pattern is orthogonal to all three.
_FULL_PATTERN = (1, -1, -1, 1, 1, 1, -1, -1)
_PAIR_PATTERNS = (
    (1, 1, 1, 1, 1, 1, 1, 1),
    (-1, -1, 1, 1, 1, 1, 1, 1),
    (-1, 1, -1, 1, 1, 1, 1, 1),
)


def preset(name: str, seed: int = 0) -> SynthSpec:
    """Named specification with the given seed."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown synthetic preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name].model_copy(update={"seed": seed})


def _nested(a: BlockCollection, b: BlockCollection) -> bool:
    return set(a.indices) <= set(b.indices) or set(b.indices) <= set(a.indices)


def _check_feasible(spec: SynthSpec, collections: List[Tuple[BlockCollection, int]]) -> None:
    n_blocks = len(spec.trait_dims)
    if not 0.0 < spec.pairwise_trait_angle <= 90.0:
        raise SynthesisError(f"pairwise angle must lie in (0, 90], got {spec.pairwise_trait_angle}")
    if spec.noise_scale < 0:
        raise SynthesisError("noise_scale must be nonnegative")
    for collection, _ in collections:
        if collection.indices[-1] >= n_blocks:
            raise SynthesisError(f"collection {collection.label} names a block beyond {n_blocks}")
    for k, d in enumerate(spec.trait_dims):
        total = sum(rank for c, rank in collections if c.contains(k))
        if total > min(d, spec.n):
            raise SynthesisError(f"block {k + 1} needs rank {total} but is only {d} x {spec.n}")
    if sum(rank for _, rank in collections) > spec.n:
        raise SynthesisError("total structure rank exceeds the number of objects")


def _sign_pattern_scores(
    spec: SynthSpec, collections: List[Tuple[BlockCollection, int]], rng: np.random.Generator
) -> Dict[BlockCollection, np.ndarray]:
    run = spec.n // 8
    signs = rng.choice([-1.0, 1.0], size=run)
    pairs = iter(_PAIR_PATTERNS)
    scores = {}
    for collection, _ in collections:
        pattern = _FULL_PATTERN if collection.size == len(spec.trait_dims) else next(pairs)
        scores[collection] = (np.concatenate([p * signs for p in pattern]) / np.sqrt(spec.n))[:, None]
    return scores


def _uses_sign_patterns(spec: SynthSpec, collections: List[Tuple[BlockCollection, int]]) -> bool:
    partial = [c for c, _ in collections if c.size < len(spec.trait_dims)]
    return (
        len(spec.trait_dims) == 3
        and spec.n % 8 == 0
        and abs(spec.pairwise_trait_angle - 60.0) < ANGLE_TOL
        and all(rank == 1 for _, rank in collections)
        and len(partial) <= len(_PAIR_PATTERNS)
        and all(c.size > 1 for c in partial)
    )


def _gram_mixed_scores(
    spec: SynthSpec, collections: List[Tuple[BlockCollection, int]], rng: np.random.Generator
) -> Dict[BlockCollection, np.ndarray]:
    """Mix an orthonormal frame so that non-nested collections meet at the target angle."""
    widths = [rank for _, rank in collections]
    offsets = np.cumsum([0] + widths)
    total = int(offsets[-1])
    cosine = np.cos(np.radians(spec.pairwise_trait_angle))

    gram = np.eye(total)
    for a, (ca, ra) in enumerate(collections):
        for b, (cb, rb) in enumerate(collections):
            if a == b or _nested(ca, cb):
                continue
            shared = min(ra, rb)
            gram[offsets[a]:offsets[a] + shared, offsets[b]:offsets[b] + shared] = cosine * np.eye(shared)
    eigvals, eigvecs = np.linalg.eigh(gram)
    if eigvals.min() <= 1e-10:
        raise SynthesisError(
            f"a {spec.pairwise_trait_angle}° angle between every non-nested pair is not realizable "
            f"for collections {[c.label for c, _ in collections]}"
        )
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T

    frame, _ = np.linalg.qr(rng.standard_normal((spec.n, total)))
    mixed = frame @ root
    return {c: mixed[:, offsets[i]:offsets[i + 1]] for i, (c, _) in enumerate(collections)}


def _pinstripe_loadings(d: int, widths: List[int], rng: np.random.Generator) -> List[np.ndarray]:
    """Equal-magnitude row bands: the first column takes the even stripes, the rest
    share the odd stripes round-robin."""
    stripe = max(1, d // 20)
    stripe_of_row = np.arange(d) // stripe
    n_stripes = int(stripe_of_row[-1]) + 1
    columns = sum(widths)
    owner = np.empty(n_stripes, dtype=int)
    owner[0::2] = 0
    odd = np.arange(1, n_stripes, 2)
    owner[odd] = 1 + np.arange(odd.size) % max(columns - 1, 1) if columns > 1 else 0
    signs = rng.choice([-1.0, 1.0], size=n_stripes)

    matrix = np.zeros((d, columns))
    for j in range(columns):
        rows = owner[stripe_of_row] == j
        if not rows.any():
            raise SynthesisError(f"{d} traits are too few for {columns} pinstripe loading columns")
        matrix[rows, j] = signs[stripe_of_row[rows]]
    matrix /= np.linalg.norm(matrix, axis=0)
    bounds = np.cumsum([0] + widths)
    return [matrix[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]


def _random_loadings(d: int, widths: List[int], rng: np.random.Generator) -> List[np.ndarray]:
    matrix = rng.standard_normal((d, sum(widths)))
    matrix /= np.linalg.norm(matrix, axis=0)
    bounds = np.cumsum([0] + widths)
    return [matrix[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]


def check_assumptions(truth: SynthTruth, spec: SynthSpec) -> None:
    """Verify the generated ground truth; raise SynthesisError on any violation."""
    labels = list(truth.scores)
    for label in labels:
        basis = truth.scores[label]
        if not np.allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-10):
            raise SynthesisError(f"scores of collection {label} are not orthonormal")
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            ca, cb = BlockCollection.from_label(a), BlockCollection.from_label(b)
            angles = principal_angles(truth.scores[a], truth.scores[b])
            target = 90.0 if _nested(ca, cb) else spec.pairwise_trait_angle
            if np.any(np.abs(angles - target) > ANGLE_TOL):
                raise SynthesisError(f"collections {a} and {b} meet at {angles} degrees, expected {target}")
    for k in range(len(spec.trait_dims)):
        parts = truth.components_of(k)
        if not parts:
            continue
        scores = np.hstack([c.scores for c in parts])
        loadings = np.hstack([c.loadings for c in parts])
        if np.linalg.matrix_rank(scores) < scores.shape[1]:
            raise SynthesisError(f"block {k + 1}: concatenated scores are rank deficient")
        if np.linalg.matrix_rank(loadings) < loadings.shape[1]:
            raise SynthesisError(f"block {k + 1}: concatenated loadings are rank deficient")


def generate(spec: SynthSpec) -> Tuple[List[DataBlock], SynthTruth]:
    """Blocks X_k = Σ_{𝐢∋k} L_{𝐢,k} V_𝐢ᵀ + E_k and their ground truth.

    Every loadings column has norm signal_strength·√(d_k ∨ n); E_k has iid
    N(0, noise_scale²) entries.
    """
    collections = spec.collections()
    _check_feasible(spec, collections)
    rng = np.random.default_rng(spec.seed)
    if _uses_sign_patterns(spec, collections):
        scores = _sign_pattern_scores(spec, collections, rng)
    else:
        scores = _gram_mixed_scores(spec, collections, rng)

    truth = SynthTruth(scores={c.label: basis for c, basis in scores.items()})
    blocks = []
    for k, d in enumerate(spec.trait_dims):
        involved = [(c, rank) for c, rank in collections if c.contains(k)]
        widths = [rank for _, rank in involved]
        if not involved:
            loadings = []
        elif spec.loading_pattern == LoadingPattern.PINSTRIPE:
            loadings = _pinstripe_loadings(d, widths, rng)
        else:
            loadings = _random_loadings(d, widths, rng)
        scale = spec.signal_strength * np.sqrt(max(d, spec.n))
        signal = np.zeros((d, spec.n))
        for (collection, _), load in zip(involved, loadings):
            load = scale * load
            matrix = load @ scores[collection].T
            signal += matrix
            truth.components.append(TruthComponent(
                collection=collection, block_index=k, loadings=load, scores=scores[collection], matrix=matrix,
            ))
        noise = spec.noise_scale * rng.standard_normal((d, spec.n))
        truth.noise.append(noise)
        blocks.append(DataBlock(values=signal + noise, block_name=f"block{k + 1}"))

    check_assumptions(truth, spec)
    logger.info("Generated %d blocks over n=%d with collections %s",
                len(blocks), spec.n, [f"{c.label}:{r}" for c, r in collections])
    return blocks, truth


def truth_angle_table(truth: SynthTruth, inferences: Sequence[BlockInference]) -> List[Dict[str, Any]]:
    """Angles between true and estimated structure, one row per (block, space, target).

    The 'signal' rows hold the largest principal angle between the true and the
    filtered estimated subspaces, next to the matching bootstrap bound.
    """
    rows = []
    for inf in inferences:
        bounds = inf.bounds
        for space, true_basis, estimated, bound in (
            ("trait", truth.trait_basis(inf.index), inf.V_check, None if bounds is None else bounds.phi_hat),
            ("object", truth.object_basis(inf.index), inf.U_check, None if bounds is None else bounds.psi_hat),
        ):
            rows.append({
                "block": inf.name, "space": space, "target": "signal",
                "angle": max_principal_angle(true_basis, estimated), "bound": bound,
            })
        for component in truth.components_of(inf.index):
            for j in range(component.scores.shape[1]):
                rows.append({
                    "block": inf.name, "space": "trait", "target": f"{component.collection.label}#{j + 1}",
                    "angle": vector_subspace_angle(component.scores[:, j], inf.V_check), "bound": None,
                })
                rows.append({
                    "block": inf.name, "space": "object", "target": f"{component.collection.label}#{j + 1}",
                    "angle": vector_subspace_angle(component.loadings[:, j], inf.U_check), "bound": None,
                })
    return rows


def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(matrix).to_csv(path, header=False, index=False, float_format="%.17g")


def write_synthetic(out_dir: str, spec: SynthSpec, blocks: Sequence[DataBlock], truth: SynthTruth) -> Path:
    """Write headerless block CSVs, truth CSVs, manifest.json and a ready run.toml."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest: Dict[str, Any] = {"spec": spec.model_dump(mode="json"), "blocks": [], "truth": {"scores": {}, "loadings": []}}

    for block in blocks:
        rel = f"data/{block.block_name}.csv"
        _write_matrix(root / rel, block.values)
        manifest["blocks"].append({"name": block.block_name, "path": rel, "d": block.d, "n": block.n})
    for label, basis in truth.scores.items():
        rel = f"truth/scores_{label.replace(',', '-')}.csv"
        _write_matrix(root / rel, basis)
        manifest["truth"]["scores"][label] = rel
    for component in truth.components:
        rel = f"truth/loadings_{component.collection.label.replace(',', '-')}_block{component.block_index + 1}.csv"
        _write_matrix(root / rel, component.loadings)
        manifest["truth"]["loadings"].append(
            {"collection": component.collection.label, "block": component.block_index, "path": rel}
        )

    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    run = {
        "seed": spec.seed,
        "output_dir": "out",
        "blocks": [{"path": entry["path"], "name": entry["name"]} for entry in manifest["blocks"]],
    }
    (root / "run.toml").write_text(tomli_w.dumps(run))
    logger.info("Wrote synthetic data set to %s", root)
    return root


def read_truth(manifest_path: Path) -> SynthTruth:
    """Ground truth from a synth manifest (noise is not stored)."""
    root = manifest_path.parent
    manifest = json.loads(manifest_path.read_text())
    scores = {
        label: pd.read_csv(root / rel, header=None, float_precision="round_trip").to_numpy(dtype=float)
        for label, rel in manifest["truth"]["scores"].items()
    }
    truth = SynthTruth(scores=scores)
    for entry in manifest["truth"]["loadings"]:
        collection = BlockCollection.from_label(entry["collection"])
        loadings = pd.read_csv(root / entry["path"], header=None, float_precision="round_trip").to_numpy(dtype=float)
        basis = scores[collection.label]
        truth.components.append(TruthComponent(
            collection=collection, block_index=entry["block"], loadings=loadings, scores=basis,
            matrix=loadings @ basis.T,
        ))
    return truth
