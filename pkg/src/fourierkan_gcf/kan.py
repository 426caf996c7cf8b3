"""Feature transforms used inside message passing.

* :class:`FourierKan` - single-layer Fourier KAN, a truncated cosine/sine
  series per (output, input) pair with trainable coefficients.
* :class:`SplineKan` - single-layer B-spline KAN with a SiLU base term.
* :class:`Linear` - bias-free dense map ``x @ W.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grad as G
from .grad import ContractError, Parameter, ShapeError, Tensor


def _check_input(x: Tensor, d_in: int) -> None:
    if x.ndim != 2 or x.shape[1] != d_in:
        raise ShapeError(f"expected input of shape (batch, {d_in}), got {x.shape}")


# ---------------------------------------------------------------------------
# Fourier KAN


@dataclass
class FourierKan:
    coeff_a: Parameter  # (d_out, d_in, g), cosine terms
    coeff_b: Parameter  # (d_out, d_in, g), sine terms

    def __post_init__(self):
        if self.coeff_a.ndim != 3 or self.coeff_a.shape != self.coeff_b.shape:
            raise ShapeError("Fourier coefficients must both have shape (d_out, d_in, g)")
        if self.grid_size < 1:
            raise ContractError("grid size must be at least 1")

    @property
    def d_out(self) -> int:
        return self.coeff_a.shape[0]

    @property
    def d_in(self) -> int:
        return self.coeff_a.shape[1]

    @property
    def grid_size(self) -> int:
        return self.coeff_a.shape[2]

    @classmethod
    def init(cls, d_in: int, d_out: int, grid_size: int, rng: np.random.Generator, name: str = "fkan"):
        """Coefficients ~ N(0, std) with std = 1 / (sqrt(d_in) * g)."""
        if grid_size < 1:
            raise ContractError("grid size must be at least 1")
        std = 1.0 / (np.sqrt(d_in) * grid_size)
        shape = (d_out, d_in, grid_size)
        return cls(
            Parameter(rng.normal(0.0, std, shape), name=f"{name}.a"),
            Parameter(rng.normal(0.0, std, shape), name=f"{name}.b"),
        )

    def parameters(self) -> list[Parameter]:
        return [self.coeff_a, self.coeff_b]

    def __call__(self, x: Tensor) -> Tensor:
        return fourier_kan_forward(self, x)


def _frequency_expand(x: Tensor, g: int) -> Tensor:
    """(N, d) -> (N, d*g) with entry [n, i*g + k-1] = k * x[n, i]."""
    n, d = x.shape
    freqs = np.arange(1, g + 1, dtype=np.float64)
    value = (x.data[:, :, None] * freqs).reshape(n, d * g)
    return G.custom(value, [x], lambda gr: ((gr.reshape(n, d, g) * freqs).sum(axis=-1),))


def fourier_kan_forward(params: FourierKan, x) -> Tensor:
    x = G.as_tensor(x)
    _check_input(x, params.d_in)
    d_out, d_in, g = params.coeff_a.shape
    phase = _frequency_expand(x, g)
    a = G.transpose(G.reshape(params.coeff_a, (d_out, d_in * g)))
    b = G.transpose(G.reshape(params.coeff_b, (d_out, d_in * g)))
    return G.matmul(G.cos(phase), a) + G.matmul(G.sin(phase), b)


def fourier_kan_input_gradient(params: FourierKan, x) -> np.ndarray:
    """Closed-form d(sum_j out[:, j]) / d x, shape (batch, d_in)."""
    x = G.as_tensor(x)
    _check_input(x, params.d_in)
    g = params.grid_size
    k = np.arange(1, g + 1, dtype=np.float64)
    kx = x.data[:, :, None] * k  # (N, d_in, g)
    a = params.coeff_a.data.sum(axis=0)  # summed over outputs: (d_in, g)
    b = params.coeff_b.data.sum(axis=0)
    return np.sum(k * (-np.sin(kx) * a + np.cos(kx) * b), axis=-1)


# ---------------------------------------------------------------------------
# B-spline KAN


def clamped_knots(grid_min: float, grid_max: float, G_: int, k: int) -> np.ndarray:
    """Uniform knots on [grid_min, grid_max] with k+1-fold boundary knots."""
    inner = np.linspace(grid_min, grid_max, G_ + 1)
    return np.concatenate([np.full(k, float(grid_min)), inner, np.full(k, float(grid_max))])


def _basis_tables(x: np.ndarray, grid_min, grid_max, G_: int, k: int):
    """Basis values of degree k and k-1 at (already clamped) points x."""
    t = clamped_knots(grid_min, grid_max, G_, k)
    inner = t[k : k + G_ + 1]
    span = np.clip(np.searchsorted(inner, x, side="right") - 1, 0, G_ - 1)
    B = np.zeros(x.shape + (G_ + 2 * k,))
    np.put_along_axis(B, (span + k)[..., None], 1.0, axis=-1)
    prev = B
    for p in range(1, k + 1):
        prev = B
        n_p = G_ + 2 * k - p
        left_den = t[p : p + n_p] - t[:n_p]
        right_den = t[p + 1 : p + 1 + n_p] - t[1 : 1 + n_p]
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(left_den > 0, (x[..., None] - t[:n_p]) / left_den, 0.0)
            right = np.where(right_den > 0, (t[p + 1 : p + 1 + n_p] - x[..., None]) / right_den, 0.0)
        B = left * prev[..., :n_p] + right * prev[..., 1 : n_p + 1]
    return B, prev, t


def bspline_basis(x, grid_min: float, grid_max: float, G_: int, k: int) -> np.ndarray:
    """Evaluate the G+k clamped B-spline basis functions of degree k at x.

    Inputs outside the grid are clamped to the nearest boundary first.
    """
    if G_ < 1 or k < 1:
        raise ContractError("need G >= 1 intervals and order k >= 1")
    if not grid_min < grid_max:
        raise ContractError("grid_min must be below grid_max")
    x = np.clip(np.asarray(x, dtype=np.float64), grid_min, grid_max)
    B, _, _ = _basis_tables(x, grid_min, grid_max, G_, k)
    return B


def bspline_basis_derivative(x, grid_min: float, grid_max: float, G_: int, k: int) -> np.ndarray:
    """d/dx of :func:`bspline_basis`; zero where the input was clamped."""
    raw = np.asarray(x, dtype=np.float64)
    xc = np.clip(raw, grid_min, grid_max)
    _, lower, t = _basis_tables(xc, grid_min, grid_max, G_, k)
    n = G_ + k
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = t[k : k + n] - t[:n]
        d2 = t[k + 1 : k + 1 + n] - t[1 : 1 + n]
        c1 = np.where(d1 > 0, k / d1, 0.0)
        c2 = np.where(d2 > 0, k / d2, 0.0)
    dB = c1 * lower[..., :n] - c2 * lower[..., 1 : n + 1]
    inside = (raw > grid_min) & (raw < grid_max)
    return np.where(inside[..., None], dB, 0.0)


@dataclass
class SplineKan:
    weight: Parameter  # (d_out, d_in) outer weight w
    coeffs: Parameter  # (d_out, d_in, G + k)
    grid_min: float = -1.0
    grid_max: float = 1.0
    grid_intervals: int = 4
    order: int = 3

    def __post_init__(self):
        d_out, d_in = self.weight.shape
        if self.coeffs.shape != (d_out, d_in, self.grid_intervals + self.order):
            raise ShapeError(
                f"spline coefficients must be {(d_out, d_in, self.grid_intervals + self.order)}, "
                f"got {self.coeffs.shape}"
            )

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def init(
        cls,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        grid_intervals: int = 4,
        order: int = 3,
        grid_range: tuple[float, float] = (-1.0, 1.0),
        name: str = "skan",
    ):
        bound = np.sqrt(6.0 / (d_in + d_out))
        w = rng.uniform(-bound, bound, (d_out, d_in))
        c = rng.normal(0.0, 0.1, (d_out, d_in, grid_intervals + order))
        return cls(
            Parameter(w, name=f"{name}.w"),
            Parameter(c, name=f"{name}.c"),
            grid_range[0],
            grid_range[1],
            grid_intervals,
            order,
        )

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.coeffs]

    def __call__(self, x: Tensor) -> Tensor:
        return spline_kan_forward(self, x)


def _basis_op(x: Tensor, p: SplineKan) -> Tensor:
    n, d = x.shape
    m = p.grid_intervals + p.order
    args = (p.grid_min, p.grid_max, p.grid_intervals, p.order)
    B = bspline_basis(x.data, *args).reshape(n, d * m)
    dB = bspline_basis_derivative(x.data, *args)
    return G.custom(B, [x], lambda gr: ((gr.reshape(n, d, m) * dB).sum(axis=-1),))


def spline_kan_forward(params: SplineKan, x) -> Tensor:
    x = G.as_tensor(x)
    _check_input(x, params.d_in)
    d_out, d_in = params.weight.shape
    m = params.grid_intervals + params.order
    base = G.matmul(G.silu(x), G.transpose(params.weight))
    w3 = G.reshape(params.weight, (d_out, d_in, 1))
    eff = G.transpose(G.reshape(G.mul(w3, params.coeffs), (d_out, d_in * m)))
    return base + G.matmul(_basis_op(x, params), eff)


# ---------------------------------------------------------------------------
# plain linear map


@dataclass
class Linear:
    weight: Parameter  # (d_out, d_in)

    @classmethod
    def init(cls, d_in: int, d_out: int, rng: np.random.Generator, name: str = "W"):
        bound = np.sqrt(6.0 / (d_in + d_out))
        return cls(Parameter(rng.uniform(-bound, bound, (d_out, d_in)), name=name))

    def parameters(self) -> list[Parameter]:
        return [self.weight]

    def __call__(self, x: Tensor) -> Tensor:
        return linear_forward(self, x)


def linear_forward(params: Linear, x) -> Tensor:
    x = G.as_tensor(x)
    _check_input(x, params.weight.shape[1])
    return G.matmul(x, G.transpose(params.weight))
