"""Statistical core: SP standardization, one-component PCA, logistic fit and
scoring, and goodness-of-fit diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .skin import SkinProportionVector

# Shipped default coefficients; the standardization statistics are deliberately
# not defaulted and must come from a calibration corpus or explicit config.
DEFAULT_LOADINGS = (0.362, 0.384, 0.349)
DEFAULT_ALPHA = -0.775
DEFAULT_BETA = 1.114
DEFAULT_BETA_SE = 0.16967

# Reference correlation structure of the three skin-proportion measures on a
# large production video-chat corpus. Not reproducible from this repository;
# kept as documentation and as a regression anchor for component extraction.
REFERENCE_SP_CORRELATIONS = ((1.0, 0.900, 0.765),
                             (0.900, 1.0, 0.855),
                             (0.765, 0.855, 1.0))


class DegenerateVarianceError(ValueError):
    """A predictor column has zero variance; correlations are undefined."""


class NoComponentRetainedError(ValueError):
    """No eigenvalue exceeded 1, so the Kaiser criterion retains nothing."""


class SingleClassError(ValueError):
    """Logistic fitting needs observations from both classes."""


class SeparationError(ValueError):
    """The classes are (quasi-)separable and the MLE diverges."""


class NonpositiveStandardErrorError(ValueError):
    pass


SpRows = Union[np.ndarray, Sequence[SkinProportionVector], Sequence[Sequence[float]]]


def _sp_matrix(rows: SpRows) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        mat = np.asarray(rows, dtype=np.float64)
    else:
        mat = np.array(
            [r.as_array() if isinstance(r, SkinProportionVector) else np.asarray(r, dtype=np.float64)
             for r in rows],
            dtype=np.float64,
        )
    if mat.ndim != 2 or mat.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) table of skin proportions, got {mat.shape}")
    return mat


@dataclass(frozen=True)
class SkcModel:
    """Everything needed to turn a skin-proportion triple into a probability:
    standardization statistics, component loadings, and logistic coefficients."""

    sp_mean: tuple[float, float, float]
    sp_stdev: tuple[float, float, float]
    loadings: tuple[float, float, float]
    alpha: float
    beta: float
    beta_se: float = DEFAULT_BETA_SE

    def __post_init__(self):
        if len(self.sp_mean) != 3 or len(self.sp_stdev) != 3 or len(self.loadings) != 3:
            raise ValueError("sp_mean, sp_stdev and loadings must have three entries")
        if any(s <= 0 for s in self.sp_stdev):
            raise ValueError("sp_stdev entries must be positive")
        if all(v == 0 for v in self.loadings):
            raise ValueError("loadings must not all be zero")
        for v in (self.alpha, self.beta, self.beta_se):
            if not math.isfinite(v):
                raise ValueError("model coefficients must be finite")


def default_skc_model(sp_mean: Sequence[float], sp_stdev: Sequence[float]) -> SkcModel:
    """Shipped default coefficients bound to caller-supplied standardization stats."""
    return SkcModel(sp_mean=tuple(float(v) for v in sp_mean),
                    sp_stdev=tuple(float(v) for v in sp_stdev),
                    loadings=DEFAULT_LOADINGS,
                    alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA, beta_se=DEFAULT_BETA_SE)


@dataclass(frozen=True)
class GoodnessOfFit:
    chi_square: float
    df: int
    p_value: float
    wald: Optional[float] = None

    def __post_init__(self):
        if self.chi_square < 0:
            raise ValueError("chi-square statistic must be nonnegative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")
        if self.df < 1:
            raise ValueError("degrees of freedom must be at least 1")


def correlations(sp_rows: SpRows) -> np.ndarray:
    """Pearson correlation matrix of the three skin-proportion predictors."""
    mat = _sp_matrix(sp_rows)
    if mat.shape[0] < 3:
        raise ValueError("need at least three rows to correlate")
    if np.any(mat.std(axis=0) == 0):
        raise DegenerateVarianceError("a predictor column has zero variance")
    corr = np.corrcoef(mat, rowvar=False)
    np.fill_diagonal(corr, 1.0)
    return corr


@dataclass(frozen=True)
class PcaFit:
    """Leading-component extraction: unit eigenvector, eigenvalues sorted
    descending, score-coefficient loadings, and how many components passed
    the eigenvalue > 1 rule."""

    loadings: tuple[float, float, float]
    eigenvalues: tuple[float, float, float]
    eigenvector: tuple[float, float, float]
    retained: int


def fit_pca(sp_rows: SpRows) -> PcaFit:
    """Extract the dominant component of the SP correlation matrix.

    Loadings are scaled as component-score coefficients (unit eigenvector
    times sqrt(eigenvalue), divided by the eigenvalue), which gives the
    resulting component unit variance on the training data. The sign is fixed
    so the loadings sum positive.
    """
    return pca_from_correlation(correlations(sp_rows))


def pca_from_correlation(corr: np.ndarray) -> PcaFit:
    corr = np.asarray(corr, dtype=np.float64)
    if corr.shape != (3, 3) or not np.allclose(corr, corr.T, atol=1e-9):
        raise ValueError("expected a symmetric 3x3 correlation matrix")
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    retained = int(np.sum(eigvals > 1.0))
    if retained == 0:
        raise NoComponentRetainedError("no eigenvalue exceeds 1")
    if retained > 1:
        warnings.warn(f"{retained} components exceed eigenvalue 1; using the first",
                      stacklevel=2)
    vec = eigvecs[:, 0]
    if vec.sum() < 0:
        vec = -vec
    lam = eigvals[0]
    loadings = vec * math.sqrt(lam) / lam
    return PcaFit(loadings=tuple(float(v) for v in loadings),
                  eigenvalues=tuple(float(v) for v in eigvals),
                  eigenvector=tuple(float(v) for v in vec),
                  retained=retained)


def standardize(sp: SkinProportionVector, model: SkcModel) -> np.ndarray:
    values = sp.as_array()
    return (values - np.asarray(model.sp_mean)) / np.asarray(model.sp_stdev)


def skc(sp: SkinProportionVector, model: SkcModel) -> float:
    """The skin-exposure component: loadings dotted with the standardized SPs."""
    return float(np.dot(standardize(sp, model), np.asarray(model.loadings)))


def misbehaving_probability(skc_value: float, model: SkcModel) -> float:
    """Logistic response on the component score; strictly inside (0, 1)."""
    return _sigmoid(model.alpha + model.beta * skc_value)


def _sigmoid(eta: float) -> float:
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def log_likelihood(alpha: float, beta: float, x: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood of the two-parameter logistic model."""
    eta = alpha + beta * x
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def log_likelihood_gradient(alpha: float, beta: float,
                            x: np.ndarray, y: np.ndarray) -> np.ndarray:
    eta = alpha + beta * x
    p = 1.0 / (1.0 + np.exp(-eta))
    resid = y - p
    return np.array([resid.sum(), (resid * x).sum()])


def fit_logistic(skc_values: Sequence[float], labels: Sequence[bool],
                 max_iter: int = 100, tol: float = 1e-8,
                 separation_limit: float = 50.0) -> tuple[float, float, float]:
    """Maximum-likelihood logistic fit by iteratively reweighted least squares.

    Returns (alpha, beta, beta_se). The slope's standard error comes from the
    inverse observed information at the optimum.
    """
    x = np.asarray(skc_values, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("skc_values and labels must be equal-length vectors")
    if y.min() == y.max():
        raise SingleClassError("labels contain a single class")

    alpha, beta = 0.0, 0.0
    info = None
    for _ in range(max_iter):
        eta = alpha + beta * x
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
        w = p * (1.0 - p)
        grad = np.array([(y - p).sum(), ((y - p) * x).sum()])
        info = np.array([[w.sum(), (w * x).sum()],
                         [(w * x).sum(), (w * x * x).sum()]])
        try:
            step = np.linalg.solve(info, grad)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.solve(info + 1e-8 * np.eye(2), grad)
        alpha += step[0]
        beta += step[1]
        if abs(beta) > separation_limit:
            raise SeparationError("coefficients diverged; data look separable")
        if np.max(np.abs(step)) < tol:
            break

    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.inv(info + 1e-8 * np.eye(2))
    beta_se = float(math.sqrt(max(cov[1, 1], 0.0)))
    return float(alpha), float(beta), beta_se


def wald(beta: float, beta_se: float) -> float:
    """Squared coefficient-to-stderr ratio; one degree of freedom."""
    if beta_se <= 0:
        raise NonpositiveStandardErrorError("standard error must be positive")
    return (beta / beta_se) ** 2


def hosmer_lemeshow(probs: Sequence[float], labels: Sequence[bool],
                    groups: int = 10) -> GoodnessOfFit:
    """Decile-of-risk chi-square test of calibration.

    Observations are sorted by predicted probability and split into
    equal-count groups, any remainder spread one observation at a time over
    the leading groups. Groups whose expected counts would vanish are merged
    into their successor; with probabilities strictly inside (0, 1) and at
    least ``groups`` observations this never triggers.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("probs and labels must be equal-length vectors")
    if p.size < groups:
        raise ValueError(f"need at least {groups} observations")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("probabilities must lie strictly inside (0, 1)")

    order = np.argsort(p, kind="stable")
    chunks = np.array_split(order, groups)

    chi_square = 0.0
    effective = 0
    carry_idx: list[np.ndarray] = []
    for i, chunk in enumerate(chunks):
        carry_idx.append(chunk)
        idx = np.concatenate(carry_idx)
        e1 = p[idx].sum()
        e0 = idx.size - e1
        if (e1 <= 0.0 or e0 <= 0.0) and i < len(chunks) - 1:
            continue  # merge into the next group
        o1 = y[idx].sum()
        o0 = idx.size - o1
        chi_square += (o1 - e1) ** 2 / e1 + (o0 - e0) ** 2 / e0
        effective += 1
        carry_idx = []

    df = max(effective - 2, 1)
    return GoodnessOfFit(chi_square=float(chi_square), df=df,
                         p_value=chi_square_sf(float(chi_square), df))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if x < 0:
        raise ValueError("chi-square statistic must be nonnegative")
    if df < 1:
        raise ValueError("df must be at least 1")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def regularized_gamma_q(a: float, x: float, tol: float = 1e-14,
                        max_iter: int = 1000) -> float:
    """Regularized upper incomplete gamma Q(a, x) via the classic split:
    a power series for x < a + 1, a Lentz continued fraction otherwise."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        term = 1.0 / a
        total = term
        denom = a
        for _ in range(max_iter):
            denom += 1.0
            term *= x / denom
            total += term
            if abs(term) < abs(total) * tol:
                break
        p = total * math.exp(log_prefactor)
        return min(max(1.0 - p, 0.0), 1.0)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return min(max(h * math.exp(log_prefactor), 0.0), 1.0)
