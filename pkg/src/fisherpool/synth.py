"""Seeded synthetic descriptor generators for benchmarks and acceptance runs."""

import numpy as np

from .gmm import GaussianMixture


def random_mixture(M, D, seed, mean_scale=2.0, var_low=0.5, var_high=1.5,
                   weight_concentration=5.0):
    """A valid random mixture; useful for benchmarks and property tests."""
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.full(M, weight_concentration))
    weights = np.maximum(weights, 1e-8)
    weights /= weights.sum()
    means = rng.normal(0.0, mean_scale, (M, D))
    variances = rng.uniform(var_low, var_high, (M, D))
    return GaussianMixture(weights, means, variances)


def descriptor_cloud(N, D, seed, scale=2.0):
    """A plain Gaussian descriptor cloud."""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale, (N, D))


def benchmark_sets(n_images, descriptors_per_image, D, seed, scale=2.0):
    """Identical-size descriptor sets for timing runs."""
    rng = np.random.default_rng(seed)
    return [rng.normal(0.0, scale, (descriptors_per_image, D))
            for _ in range(n_images)]


def blob_images(n_classes, images_per_class, descriptors_per_image, D, seed,
                center_scale=5.0, parts_per_class=8, part_spread=2.0,
                descriptor_noise=1.0, image_jitter=0.5, world_seed=0):
    """Gaussian-blob classification task: one descriptor set per image.

    Each class owns a fixed constellation of part centers; every image of
    the class scatters its descriptors across those parts (plus a small
    per-image shift), so image codes reflect the class's descriptor
    distribution rather than a single point. The constellation is drawn
    from `world_seed`, the per-image sampling from `seed`: batches that
    share a world_seed (e.g. train and test splits) share the classes.
    Returns (descriptor_sets, labels).
    """
    world = np.random.default_rng(world_seed)
    rng = np.random.default_rng(seed)
    centers = world.normal(0.0, center_scale, (n_classes, D))
    parts = centers[:, None, :] + world.normal(
        0.0, part_spread, (n_classes, parts_per_class, D))
    sets, labels = [], []
    for c in range(n_classes):
        for _ in range(images_per_class):
            shift = rng.normal(0.0, image_jitter, D)
            which = rng.integers(0, parts_per_class, descriptors_per_image)
            X = (parts[c, which] + shift
                 + rng.normal(0.0, descriptor_noise,
                              (descriptors_per_image, D)))
            sets.append(X)
            labels.append(c)
    return sets, np.array(labels)


def variance_contrast_images(images_per_class, descriptors_per_image, D, seed,
                             n_centers=6, center_scale=4.0, var_low=0.4,
                             var_high=2.0, world_seed=0):
    """Two classes sharing component means but differing in spread.

    Every image draws descriptors around the same shared centers; class 0
    uses standard deviation sqrt(var_low), class 1 sqrt(var_high). Hard
    assignment to the shared centers is therefore class-blind, while
    second-order (variance) statistics separate the classes. The centers
    come from `world_seed` so train and test batches generated with
    different sample seeds share them. Returns
    (descriptor_sets, labels, centers); the centers serve as the ideal
    codebook for a bag-of-words baseline.
    """
    world = np.random.default_rng(world_seed)
    rng = np.random.default_rng(seed)
    centers = world.normal(0.0, center_scale, (n_centers, D))
    sets, labels = [], []
    for label, var in ((0, var_low), (1, var_high)):
        std = np.sqrt(var)
        for _ in range(images_per_class):
            which = rng.integers(0, n_centers, descriptors_per_image)
            X = centers[which] + rng.normal(0.0, std,
                                            (descriptors_per_image, D))
            sets.append(X)
            labels.append(label)
    return sets, np.array(labels), centers


def ring_similarity_world(seed, n_descriptors=200, n_local=56, n_background=8,
                          ring_radius=3.0, local_sigma=1.0,
                          background_radius=12.0, background_sigma=3.0,
                          background_weight=0.3):
    """Descriptors on a planar ring scored against a ring-plus-background
    codebook; returns (mixture, descriptors).

    The mixture has n_local components evenly spaced on the ring (where
    the descriptors live) plus n_background broad components placed well
    off the ring. The background components hold a little posterior mass
    everywhere, so untruncated codes carry their gradient blocks as
    common-mode noise while top-k selection drops them. This is the
    sample used to study how truncation affects similarity preservation.
    """
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, n_descriptors)
    radius = ring_radius + rng.normal(0.0, 0.2, n_descriptors)
    descriptors = np.column_stack([radius * np.cos(theta),
                                   radius * np.sin(theta)])

    phis = np.linspace(0.0, 2.0 * np.pi, n_local, endpoint=False)
    local_means = ring_radius * np.column_stack([np.cos(phis), np.sin(phis)])
    bg_angles = rng.uniform(0.0, 2.0 * np.pi, n_background)
    bg_means = background_radius * np.column_stack([np.cos(bg_angles),
                                                    np.sin(bg_angles)])
    means = np.vstack([local_means, bg_means])
    variances = np.vstack([np.full((n_local, 2), local_sigma ** 2),
                           np.full((n_background, 2), background_sigma ** 2)])
    weights = np.concatenate([
        np.full(n_local, (1.0 - background_weight) / n_local),
        np.full(n_background, background_weight / n_background)])
    return GaussianMixture(weights, means, variances), descriptors
