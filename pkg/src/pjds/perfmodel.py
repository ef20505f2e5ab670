"""Byte-counting model for GPU spMVM including PCIe transfers of the RHS and LHS vectors.

Per matrix row the kernel moves ``N_nzr * (value + index + alpha * value)``
bytes for the matrix and RHS plus ``2 * value`` bytes for loading and
storing the LHS element; it performs ``2 * N_nzr`` flops. PCIe has to
carry the RHS to the device and the LHS back, ``2 * value`` bytes per row.

``alpha`` in ``[1/N_nzr, 1]`` is the fraction of RHS loads that miss the
cache: 1 means every load goes to memory, ``1/N_nzr`` means each RHS
element is fetched once. Pass ``alpha="reciprocal"`` for the latter.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .formats import INDEX_BYTES, VALUE_BYTES
from .matrix import RowLengthHistogram

RECIPROCAL = "reciprocal"

# reference bandwidths, bytes/s
FERMI_ECC_BANDWIDTH = 91e9
FERMI_NO_ECC_BANDWIDTH = 120e9


class NoHeadroomError(ValueError):
    """PCIe is at least as fast as device memory, so no row length makes transfers dominate the kernel."""


@dataclass(frozen=True)
class ModelParams:
    n_nzr: float
    b_gpu: float = FERMI_ECC_BANDWIDTH
    b_pci: float = FERMI_ECC_BANDWIDTH / 10
    alpha: float | str = 1.0
    n_rows: int = 1
    precision: str = "DP"
    split_kernel: bool = False
    # fraction of the RHS/LHS vectors that actually cross PCIe each spMVM
    pci_residency: float = 1.0

    def __post_init__(self):
        if self.b_gpu <= 0 or self.b_pci <= 0:
            raise ValueError("bandwidths must be positive")
        if self.n_nzr < 1:
            raise ValueError("n_nzr must be >= 1")
        if self.precision not in VALUE_BYTES:
            raise ValueError(f"precision must be one of {sorted(VALUE_BYTES)}")
        if not 0.0 <= self.pci_residency <= 1.0:
            raise ValueError("pci_residency must lie in [0, 1]")
        if self.alpha != RECIPROCAL:
            lo = 1.0 / self.n_nzr
            if not (lo * (1 - 1e-12) <= self.alpha <= 1.0):
                raise ValueError(f"alpha must lie in [1/n_nzr, 1] = [{lo:.6g}, 1], got {self.alpha}")

    @property
    def alpha_value(self) -> float:
        return 1.0 / self.n_nzr if self.alpha == RECIPROCAL else float(self.alpha)

    @property
    def ratio(self) -> float:
        return self.b_gpu / self.b_pci


def _vector_terms(split_kernel: bool) -> int:
    # LHS load+store per row, in units of one value; the split kernel writes it twice
    return 4 if split_kernel else 2


def _nonzero_coeff(precision: str) -> float:
    """Matrix value + index bytes per non-zero, in units of one value width (3/2 in DP)."""
    return (VALUE_BYTES[precision] + INDEX_BYTES) / VALUE_BYTES[precision]


def bytes_per_row(n_nzr: float, alpha: float, precision: str = "DP",
                  split_kernel: bool = False) -> float:
    vb = VALUE_BYTES[precision]
    return vb * (n_nzr * (alpha + _nonzero_coeff(precision)) + _vector_terms(split_kernel))


def code_balance(p: ModelParams) -> float:
    """Worst-case bytes per flop of the ELLPACK/pJDS kernels; ``6 + 4 alpha + 8/N_nzr`` in DP."""
    return bytes_per_row(p.n_nzr, p.alpha_value, p.precision, p.split_kernel) / (2.0 * p.n_nzr)


def times(p: ModelParams) -> tuple[float, float]:
    """(t_mvm, t_pci) in seconds for one spMVM over ``p.n_rows`` rows."""
    t_mvm = p.n_rows * bytes_per_row(p.n_nzr, p.alpha_value, p.precision, p.split_kernel) / p.b_gpu
    t_pci = p.pci_residency * 2 * VALUE_BYTES[p.precision] * p.n_rows / p.b_pci
    return t_mvm, t_pci


def _threshold(ratio: float, alpha: float | str, factor: float, precision: str,
               split_kernel: bool) -> float:
    # solve N (alpha + c) + v = 2 * factor * ratio for N, with alpha = 1/N in reciprocal mode
    c = _nonzero_coeff(precision)
    v = _vector_terms(split_kernel)
    rhs = 2.0 * factor * ratio - v
    if alpha == RECIPROCAL:
        return (rhs - 1.0) / c
    return rhs / (float(alpha) + c)


def threshold_upper(ratio: float, alpha: float | str = 1.0, precision: str = "DP",
                    split_kernel: bool = False) -> float:
    """Largest N_nzr at which PCIe transfers take at least as long as the kernel (> 50% penalty).

    ``ratio`` is B_gpu / B_pci. Returns 0 when no N_nzr >= 0 qualifies.
    """
    if ratio <= 1.0:
        raise NoHeadroomError(f"bandwidth ratio {ratio} <= 1")
    return max(0.0, _threshold(ratio, alpha, 1.0, precision, split_kernel))


def threshold_lower(ratio: float, alpha: float | str = 1.0, precision: str = "DP",
                    split_kernel: bool = False) -> float:
    """Smallest N_nzr at which the kernel takes at least 10x the PCIe time (< 10% penalty), at least 1."""
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    return max(1.0, _threshold(ratio, alpha, 10.0, precision, split_kernel))


# values quoted alongside the exact thresholds, keyed by (bound, ratio, alpha)
QUOTED_THRESHOLDS = {
    ("upper", 20, RECIPROCAL): 25,
    ("upper", 10, 1.0): 7,
    ("lower", 10, 1.0): 80,
    ("lower", 20, RECIPROCAL): 266,
}


@dataclass(frozen=True)
class ModelReport:
    n_nzr: float
    alpha: float
    precision: str
    ratio: float
    balance: float
    t_mvm: float
    t_pci: float
    pci_penalty_fraction: float
    n_nzr_upper_50pct: float
    n_nzr_lower_10pct: float
    predicted_flops: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        rows = [
            ("N_nzr", f"{self.n_nzr:.4g}"),
            ("alpha", f"{self.alpha:.4g}"),
            ("precision", self.precision),
            ("B_gpu/B_pci", f"{self.ratio:.4g}"),
            ("code balance [B/flop]", f"{self.balance:.6g}"),
            ("t_mvm [s]", f"{self.t_mvm:.6g}"),
            ("t_pci [s]", f"{self.t_pci:.6g}"),
            ("PCIe penalty", f"{100 * self.pci_penalty_fraction:.2f} %"),
            ("N_nzr upper (>50% penalty)", f"{self.n_nzr_upper_50pct:.6g}"),
            ("N_nzr lower (<10% penalty)", f"{self.n_nzr_lower_10pct:.6g}"),
            ("predicted [GF/s]", f"{self.predicted_flops / 1e9:.4g}"),
            ("verdict", self.verdict),
        ]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{w}}  {v}" for k, v in rows)


def verdict(n_nzr: float, upper: float, lower: float) -> str:
    if n_nzr <= upper:
        return "unfavorable"
    if n_nzr >= lower:
        return "favorable"
    return "marginal"


def report(p: ModelParams, summary: RowLengthHistogram | None = None) -> ModelReport:
    """Evaluate the model; with a histogram, ``n_nzr`` and ``n_rows`` come from the matrix."""
    if summary is not None:
        p = ModelParams(
            n_nzr=summary.mean_len, b_gpu=p.b_gpu, b_pci=p.b_pci, alpha=p.alpha,
            n_rows=summary.n_rows, precision=p.precision, split_kernel=p.split_kernel,
            pci_residency=p.pci_residency,
        )
    t_mvm, t_pci = times(p)
    effective_ratio = p.ratio * p.pci_residency
    if effective_ratio <= 1.0:
        # PCIe never takes as long as the kernel
        upper = 0.0
    else:
        upper = threshold_upper(effective_ratio, p.alpha, p.precision, p.split_kernel)
    lower = (threshold_lower(effective_ratio, p.alpha, p.precision, p.split_kernel)
             if effective_ratio > 0 else 1.0)
    return ModelReport(
        n_nzr=p.n_nzr,
        alpha=p.alpha_value,
        precision=p.precision,
        ratio=p.ratio,
        balance=code_balance(p),
        t_mvm=t_mvm,
        t_pci=t_pci,
        pci_penalty_fraction=t_pci / (t_mvm + t_pci),
        n_nzr_upper_50pct=upper,
        n_nzr_lower_10pct=lower,
        predicted_flops=2.0 * p.n_rows * p.n_nzr / t_mvm,
        verdict=verdict(p.n_nzr, upper, lower),
    )
