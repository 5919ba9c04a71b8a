"""Stratified fold assignment and deterministic seed derivation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class FoldAssignment:
    """Train/test index split for one fold of one repetition."""

    repetition: int
    fold: int
    train_indices: np.ndarray
    test_indices: np.ndarray


def derive_seed(master_seed: int, *stream: int) -> int:
    """Mix a master seed with stream identifiers into a new 32-bit seed.

    The fixed mixing function is numpy's ``SeedSequence``, keyed on the
    ordered tuple ``(master_seed, *stream)``, so derived streams are
    reproducible and independent of scheduling.
    """
    words = [int(master_seed), *(int(s) for s in stream)]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def stratified_kfold(
    labels, k: int, seed: int, repetition: int = 0
) -> list[FoldAssignment]:
    """Partition subjects into k disjoint folds preserving class balance.

    Each class is shuffled with its own seeded permutation and dealt to the
    folds round-robin, so per-fold class counts differ by at most one from
    perfect stratification. Index arrays are sorted ascending.

    Raises ``ValidationError`` when any class has fewer than k members.
    """
    labels = np.asarray(labels)
    if k < 1:
        raise ValidationError("k must be positive")
    rng = np.random.default_rng(seed)
    test_sets: list[list] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        class_indices = np.flatnonzero(labels == cls)
        if class_indices.size < k:
            raise ValidationError(
                f"class {cls!r} has {class_indices.size} members,"
                f" fewer than k={k} folds"
            )
        for position, index in enumerate(rng.permutation(class_indices)):
            test_sets[position % k].append(int(index))

    everything = np.arange(labels.size)
    folds = []
    for fold_index, test in enumerate(test_sets):
        test_indices = np.array(sorted(test), dtype=np.int64)
        train_mask = np.ones(labels.size, dtype=bool)
        train_mask[test_indices] = False
        folds.append(
            FoldAssignment(
                repetition=repetition,
                fold=fold_index,
                train_indices=everything[train_mask],
                test_indices=test_indices,
            )
        )
    return folds
