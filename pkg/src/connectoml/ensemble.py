"""Soft-voting ensemble of per-measure classifiers, plus the fusion baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import LABEL_HC, LABEL_MCI, LabeledCohort
from .connectome import MEASURE_FUSED, MEASURES, FeatureVector
from .errors import ValidationError
from .neuralnet import TrainConfig, predict_proba, train_classifier

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class EnsembleModel:
    """Exactly one trained classifier per single-measure feature set."""

    members: dict

    def __post_init__(self):
        missing = [m for m in MEASURES if m not in self.members]
        if missing:
            raise ValidationError(f"ensemble is missing members: {missing}")
        dims = {self.members[m].input_dim for m in MEASURES}
        if len(dims) != 1:
            raise ValidationError(
                f"ensemble members disagree on input dimension: {sorted(dims)}"
            )


def train_ensemble(cohort: LabeledCohort, cfg: TrainConfig) -> EnsembleModel:
    """Train one member per measure, all with the same hyper-parameters."""
    members = {
        measure: train_classifier(cohort.features[measure], cohort.labels, cfg)
        for measure in MEASURES
    }
    return EnsembleModel(members=members)


def soft_vote(model: EnsembleModel, features_by_measure):
    """Arithmetic mean of the member probabilities.

    ``features_by_measure`` maps each measure tag to the subject's raw
    feature vector (or a batch of rows); ``FeatureVector`` values are
    accepted as well.
    """
    missing = [m for m in MEASURES if m not in features_by_measure]
    if missing:
        raise ValidationError(f"subject is missing measures: {missing}")
    scores = []
    for measure in MEASURES:
        features = features_by_measure[measure]
        if isinstance(features, FeatureVector):
            features = features.values
        scores.append(predict_proba(model.members[measure], features))
    if np.isscalar(scores[0]):
        return float(sum(scores) / len(scores))
    return np.mean(scores, axis=0)


def fuse_features(*vectors: FeatureVector) -> FeatureVector:
    """Concatenate the three single-measure vectors into one fused vector.

    The output order is always (weights, shortest_path, communicability),
    regardless of the order the arguments are passed in.
    """
    by_measure = {}
    for vector in vectors:
        if vector.measure not in MEASURES:
            raise ValidationError(
                f"cannot fuse a vector tagged {vector.measure!r}"
            )
        if vector.measure in by_measure:
            raise ValidationError(
                f"duplicate measure {vector.measure!r} in fusion inputs"
            )
        by_measure[vector.measure] = vector
    missing = [m for m in MEASURES if m not in by_measure]
    if missing:
        raise ValidationError(f"fusion inputs are missing measures: {missing}")
    lengths = {len(by_measure[m]) for m in MEASURES}
    if len(lengths) != 1:
        raise ValidationError(
            f"fusion inputs have mismatched lengths: {sorted(lengths)}"
        )
    return FeatureVector(
        MEASURE_FUSED,
        np.concatenate([by_measure[m].values for m in MEASURES]),
    )


def predict_label(probability, threshold: float = DEFAULT_THRESHOLD):
    """Binary decision: MCI (1) iff probability >= threshold, ties to MCI."""
    arr = np.asarray(probability, dtype=np.float64)
    labels = np.where(arr >= threshold, LABEL_MCI, LABEL_HC)
    return int(labels) if arr.ndim == 0 else labels
