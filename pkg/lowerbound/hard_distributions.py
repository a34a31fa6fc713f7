"""
Hard instances for non-adaptive estimation.

Two planted laws over defect sets: pick a size uniformly from the even
(resp. odd) class list, then a uniform set of that size. Every valid
α-estimate falls into exactly one window [s, αs], so an estimator
separates the two laws. The level coupling pairs a size-Lβ^{2j} set with
an independent size-Lβ^{2j-1} set for a uniform level j.

Author: Agent
Date: 2025-10-18
"""

import math

import numpy as np
from icecream import ic

from oracle.models import DefectSet
from oracle.sampling import uniform_defect_set

from .models import ClassSizeError, CouplingSample, NoClassesError, Parity, SizeClasses

ic.configureOutput(prefix='[LAB] ')


def build_size_classes(alpha: float, L: int, U: int) -> SizeClasses:
    """
    β = ⌊α⌋ + 1 and m = max{m : Lβ^{2m} <= U}.

    Raises:
        ValueError: α <= 1, L < 1 or L >= U
        NoClassesError: Lβ² > U
    """
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if L < 1 or L >= U:
        raise ValueError(f"need 1 <= L < U, got L={L}, U={U}")
    beta = math.floor(alpha) + 1
    if L * beta ** 2 > U:
        raise NoClassesError(f"L*beta^2 = {L * beta ** 2} exceeds U={U} (alpha={alpha}, beta={beta})")
    m = 1
    while L * beta ** (2 * (m + 1)) <= U:
        m += 1
    classes = SizeClasses(
        alpha=alpha,
        beta=beta,
        L=L,
        U=U,
        m=m,
        even_sizes=[L * beta ** (2 * j) for j in range(1, m + 1)],
        odd_sizes=[L * beta ** (2 * j - 1) for j in range(1, m + 1)],
    )
    ic("size classes", beta, m, classes.even_sizes, classes.odd_sizes)
    return classes


def check_fits(classes: SizeClasses, n: int) -> None:
    """
    Raises:
        ClassSizeError: the largest class does not fit in [n]
    """
    if classes.max_size > n:
        raise ClassSizeError(f"class size {classes.max_size} exceeds n={n}")


def sample_planted(classes: SizeClasses, parity: Parity, n: int, rng: np.random.Generator) -> DefectSet:
    """Uniform size from the parity's list, then a uniform set of that size."""
    check_fits(classes, n)
    sizes = classes.sizes(parity)
    size = sizes[int(rng.integers(len(sizes)))]
    return uniform_defect_set(n, size, rng)


def sample_coupling(classes: SizeClasses, n: int, rng: np.random.Generator) -> CouplingSample:
    """
    Uniform level j, then X and Y drawn independently at sizes Lβ^{2j} and Lβ^{2j-1}.

    X is distributed as the even law and Y as the odd law.
    """
    check_fits(classes, n)
    j = int(rng.integers(1, classes.m + 1))
    even_size, odd_size = classes.level_sizes(j)
    X = uniform_defect_set(n, even_size, rng)
    Y = uniform_defect_set(n, odd_size, rng)
    return CouplingSample(j=j, X=X, Y=Y)
