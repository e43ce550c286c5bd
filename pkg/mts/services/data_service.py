"""
Data Service for the MTS Domain Adaptation toolkit
Synthetic open-set domain shift generation and mini-batch sampling
"""

import logging
import math

import numpy as np

from mts.errors import ContractError, DataError
from mts.models.dataset import SOURCE, TARGET, Dataset, LabeledBatch, UnlabeledBatch
from mts.utils.random_streams import spawn_generators

logger = logging.getLogger(__name__)

CENTROID_RADIUS = 4.0


class DataService:
    """
    Service to build synthetic source/target datasets and draw mini-batches
    """

    def centroid_angles(self, num_known, num_unknown):
        """
        Angles in radians of the class centroids, index k-1 for class k

        Known classes are spread evenly around the circle starting at angle 0.
        Unknown classes fill the gaps between consecutive known classes, one
        gap after another, spaced evenly inside each gap.
        """
        gap = 2.0 * np.pi / num_known
        known = gap * np.arange(num_known)
        per_gap = [num_unknown // num_known + (1 if g < num_unknown % num_known else 0)
                   for g in range(num_known)]
        unknown = [known[g] + gap * (j + 1) / (count + 1)
                   for g, count in enumerate(per_gap) for j in range(count)]
        return np.concatenate([known, np.asarray(unknown, dtype=np.float64)])

    def centroids(self, config):
        """
        Class centroids on a circle of radius 4 in the first two dimensions

        Args:
            config (ShiftConfig): Shift parameters

        Returns:
            np.ndarray: (K+U) x d centroid matrix, row k-1 for class k
        """
        angles = self.centroid_angles(config.num_known, config.num_unknown)
        centers = np.zeros((angles.size, config.d))
        centers[:, 0] = CENTROID_RADIUS * np.cos(angles)
        centers[:, 1] = CENTROID_RADIUS * np.sin(angles)
        return centers

    def generate(self, config):
        """
        Generate a source/target pair

        Source draws the K known classes; target draws all K+U classes, is
        rotated about the origin in the first two dimensions and translated.
        Unknown target classes collapse to label K+1.

        Args:
            config (ShiftConfig): Shift parameters

        Returns:
            tuple: (source Dataset, target Dataset)
        """
        k, u = config.num_known, config.num_unknown
        if config.n_source < k:
            raise DataError(f"n_source={config.n_source} cannot cover {k} known classes")
        if config.n_target < k + u:
            raise DataError(f"n_target={config.n_target} cannot cover {k + u} classes")

        streams = spawn_generators(config.seed, ['source', 'target'])
        centers = self.centroids(config)

        source_rng = streams['source']
        source_classes = source_rng.permutation(np.arange(config.n_source) % k + 1)
        source_x = centers[source_classes - 1] + source_rng.normal(
            0.0, config.noise_sigma, size=(config.n_source, config.d))

        target_rng = streams['target']
        target_classes = target_rng.permutation(np.arange(config.n_target) % (k + u) + 1)
        target_x = centers[target_classes - 1] + target_rng.normal(
            0.0, config.noise_sigma, size=(config.n_target, config.d))
        theta = np.deg2rad(config.rotation_deg)
        rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        target_x[:, :2] = target_x[:, :2] @ rotation.T
        target_x = target_x + np.asarray(config.translation)
        target_labels = np.minimum(target_classes, k + 1)

        source = Dataset(source_x, source_classes, [SOURCE] * config.n_source, k)
        target = Dataset(target_x, target_labels, [TARGET] * config.n_target, k)
        logger.info(f"Generated {len(source)} source and {len(target)} target samples "
                    f"(K={k}, U={u}, rotation={config.rotation_deg} deg, seed={config.seed})")
        return source, target

    def _check_batch_size(self, source, target, batch_size):
        if batch_size < 2:
            raise ContractError(f"batch_size must be >= 2, got {batch_size}")
        if len(source) == 0 or len(target) == 0:
            raise DataError("Source and target datasets must be nonempty")
        if batch_size > len(source) or batch_size > len(target):
            raise DataError(f"batch_size {batch_size} exceeds dataset size "
                            f"(source {len(source)}, target {len(target)})")

    def _batch(self, source, target, source_idx, target_idx):
        return (LabeledBatch(x=source.x[source_idx], y=source.y[source_idx], indices=source_idx),
                UnlabeledBatch(x=target.x[target_idx], indices=target_idx))

    def sample_minibatch(self, source, target, batch_size, rng):
        """
        Draw one batch pair without replacement

        Args:
            source (Dataset): Labeled source data
            target (Dataset): Target data; labels are not passed on
            batch_size (int): Samples per domain
            rng (np.random.Generator): Sampling state

        Returns:
            tuple: (LabeledBatch, UnlabeledBatch)
        """
        self._check_batch_size(source, target, batch_size)
        source_idx = rng.choice(len(source), size=batch_size, replace=False)
        target_idx = rng.choice(len(target), size=batch_size, replace=False)
        return self._batch(source, target, source_idx, target_idx)

    def batch_sizes(self, n_source, n_target, batch_size):
        """
        Batch sizes for one epoch over the larger domain

        Every batch holds batch_size samples except the last, which holds the
        remainder. A remainder of one is raised to two so the triplet always
        has two target samples to pick from.
        """
        count = math.ceil(max(n_source, n_target) / batch_size)
        last = max(n_source, n_target) - (count - 1) * batch_size
        return [batch_size] * (count - 1) + [max(last, 2)]

    def _cycled(self, n, total, rng):
        """First `total` entries of back-to-back shuffles of range(n)"""
        shuffles = [rng.permutation(n) for _ in range(math.ceil(total / n))]
        return np.concatenate(shuffles)[:total]

    def epoch_batches(self, source, target, batch_size, rng):
        """
        Pair source and target batches for one epoch

        The epoch has ceil(max(n_s, n_t) / batch_size) batches. Each domain is
        read from back-to-back shuffles of its indices: the larger domain is
        covered once (one sample repeats when the last batch is topped up to
        two) and the smaller one cycles through fresh shuffles.

        Yields:
            tuple: (LabeledBatch, UnlabeledBatch)
        """
        self._check_batch_size(source, target, batch_size)
        sizes = self.batch_sizes(len(source), len(target), batch_size)
        bounds = np.cumsum([0] + sizes)
        source_order = self._cycled(len(source), bounds[-1], rng)
        target_order = self._cycled(len(target), bounds[-1], rng)
        for start, stop in zip(bounds[:-1], bounds[1:]):
            yield self._batch(source, target, source_order[start:stop], target_order[start:stop])


# Singleton instance
data_service = DataService()
