"""
Decaying Taylor-Green vortex in vorticity-streamfunction form.

The vorticity is evolved; the stored channels are ``(u, v, p)`` with the
velocity recovered spectrally and the analytic pressure.
"""

import numpy as np

from ..core.state import FieldState
from ..errors import ShapeError
from .params import TaylorGreenParams
from .swe import ddx, ddy

TG_CHANNELS = ("u", "v", "p")


def grid(params: TaylorGreenParams) -> tuple[np.ndarray, np.ndarray]:
    """Node coordinates ``(x, y)``, each of shape ``(N, N)`` indexed ``[j, i]``."""
    coords = np.arange(params.N) * params.dx
    y, x = np.meshgrid(coords, coords, indexing="ij")
    return x, y


def _wavenumbers(n: int, dx: float) -> tuple[np.ndarray, np.ndarray]:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    ky, kx = np.meshgrid(k, k, indexing="ij")
    return kx, ky


def _check_grid(omega: np.ndarray) -> int:
    n = omega.shape[-1]
    if omega.shape[-2:] != (n, n) or n < 2 or n & (n - 1):
        raise ShapeError(
            f"spectral solve needs a square power-of-two grid, got {omega.shape[-2:]}"
        )
    return n


def streamfunction(params: TaylorGreenParams, omega: np.ndarray) -> np.ndarray:
    """Solve ``laplacian(psi) = -omega`` spectrally; the mean of ``psi`` is zero."""
    n = _check_grid(omega)
    kx, ky = _wavenumbers(n, params.dx)
    k2 = kx**2 + ky**2
    k2[0, 0] = 1.0
    psi_hat = np.fft.fft2(omega) / k2
    psi_hat[0, 0] = 0.0
    return np.real(np.fft.ifft2(psi_hat))


def taylor_green_velocity(
    params: TaylorGreenParams, omega: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """``(u, v) = (d_y psi, -d_x psi)`` with spectral derivatives."""
    n = _check_grid(omega)
    kx, ky = _wavenumbers(n, params.dx)
    psi_hat = np.fft.fft2(streamfunction(params, omega))
    u = np.real(np.fft.ifft2(1j * ky * psi_hat))
    v = np.real(np.fft.ifft2(-1j * kx * psi_hat))
    return u, v


def laplacian(f: np.ndarray, dx: float) -> np.ndarray:
    """Periodic 5-point Laplacian on a square grid."""
    neighbours = (
        np.roll(f, 1, axis=-1)
        + np.roll(f, -1, axis=-1)
        + np.roll(f, 1, axis=-2)
        + np.roll(f, -1, axis=-2)
    )
    return (neighbours - 4.0 * f) / dx**2


def taylor_green_rhs(params: TaylorGreenParams, omega: np.ndarray) -> np.ndarray:
    """
    ``d omega / dt = -(u d_x omega + v d_y omega) + nu laplacian(omega)``.

    Advection uses periodic centered differences, diffusion the 5-point stencil.

    Raises
    ------
    ShapeError
        If the grid is not square with a power-of-two side.
    """
    u, v = taylor_green_velocity(params, omega)
    advection = u * ddx(omega, params.dx) + v * ddy(omega, params.dx)
    return -advection + params.nu * laplacian(omega, params.dx)


def _decay(params: TaylorGreenParams, t: float, power: float) -> float:
    return float(np.exp(-power * params.nu * params.k**2 * t))


def taylor_green_analytic_velocity(
    params: TaylorGreenParams, t: float = 0.0, offset: tuple[float, float] = (0.0, 0.0)
) -> tuple[np.ndarray, np.ndarray]:
    x, y = grid(params)
    kx, ky = params.k * (x - offset[0]), params.k * (y - offset[1])
    scale = params.U0 * _decay(params, t, 2.0)
    return scale * np.sin(kx) * np.cos(ky), -scale * np.cos(kx) * np.sin(ky)


def taylor_green_vorticity(
    params: TaylorGreenParams, t: float = 0.0, offset: tuple[float, float] = (0.0, 0.0)
) -> np.ndarray:
    """Analytic ``2 U0 k sin(kx) sin(ky) exp(-2 nu k**2 t)``."""
    x, y = grid(params)
    kx, ky = params.k * (x - offset[0]), params.k * (y - offset[1])
    return 2.0 * params.U0 * params.k * np.sin(kx) * np.sin(ky) * _decay(params, t, 2.0)


def taylor_green_pressure(
    params: TaylorGreenParams, t: float = 0.0, offset: tuple[float, float] = (0.0, 0.0)
) -> np.ndarray:
    """Analytic ``(U0**2 / 4) (cos 2kx + cos 2ky) exp(-4 nu k**2 t)``."""
    x, y = grid(params)
    kx, ky = params.k * (x - offset[0]), params.k * (y - offset[1])
    return (
        0.25
        * params.U0**2
        * (np.cos(2.0 * kx) + np.cos(2.0 * ky))
        * _decay(params, t, 4.0)
    )


def taylor_green_init(
    params: TaylorGreenParams, offset: tuple[float, float] = (0.0, 0.0)
) -> np.ndarray:
    """Initial vorticity from centered differences of the analytic velocity."""
    u, v = taylor_green_analytic_velocity(params, 0.0, offset)
    return ddx(v, params.dx) - ddy(u, params.dx)


def taylor_green_fields(
    params: TaylorGreenParams,
    omega: np.ndarray,
    t: float,
    offset: tuple[float, float] = (0.0, 0.0),
) -> FieldState:
    """Stored ``(u, v, p)`` field for the vorticity ``omega`` at time ``t``."""
    u, v = taylor_green_velocity(params, omega)
    p = taylor_green_pressure(params, t, offset)
    return FieldState(
        values=np.stack([u, v, p]), dx=params.dx, dy=params.dx, channels=TG_CHANNELS
    )


def taylor_green_kinetic_energy(params: TaylorGreenParams, states: np.ndarray) -> np.ndarray:
    """``sum (u**2 + v**2) / 2 dA`` for stored ``(..., 3, N, N)`` states."""
    u, v = states[..., 0, :, :], states[..., 1, :, :]
    return 0.5 * np.sum(u**2 + v**2, axis=(-2, -1)) * params.dx**2


def taylor_green_enstrophy(params: TaylorGreenParams, omega: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(omega**2, axis=(-2, -1)) * params.dx**2
