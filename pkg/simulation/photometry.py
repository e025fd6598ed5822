"""
Photometry: illuminance at the sensing points and the min/mean uniformity ratio.
"""

from dataclasses import dataclass

import numpy as np

from simulation.channel import ChannelTensor


class PhotometryError(ValueError):
    """Raised when a lighting metric is undefined (e.g. every sensor is dark)."""


@dataclass(frozen=True, eq=False)
class IlluminationField:
    flux: np.ndarray  # lumens per sensor
    illuminance: np.ndarray  # lux per sensor
    luminous_efficacy: float

    @property
    def average(self) -> float:
        return float(np.mean(self.illuminance)) if self.illuminance.size else float("nan")

    @property
    def minimum(self) -> float:
        return float(np.min(self.illuminance)) if self.illuminance.size else float("nan")

    @property
    def uniformity(self) -> float:
        return uniformity_of(self.illuminance)


def sensor_flux(P, H: np.ndarray, alpha0: float) -> np.ndarray:
    """Received luminous flux alpha0 * sum_m P_m H_mn for every column n of H."""
    P = np.asarray(P, dtype=float).reshape(-1)
    if np.any(P < 0):
        raise PhotometryError("LED powers must be non-negative")
    return alpha0 * (P @ H)


def illumination_field(P, tensor: ChannelTensor, xi, alpha0: float, per_area: bool = True):
    sensors = tensor.sensor_indices()
    H = tensor.total(xi)[:, sensors]
    flux = sensor_flux(P, H, alpha0)
    # flux is lumens since H carries the PD area; dividing by it gives lux
    lux = flux / tensor.node_areas[sensors] if per_area else flux.copy()
    return IlluminationField(flux=flux, illuminance=lux, luminous_efficacy=float(alpha0))


def illumination_at(n: int, P, tensor: ChannelTensor, xi, alpha0: float, per_area: bool = True) -> float:
    """Illuminance at the n-th sensing point."""
    return float(illumination_field(P, tensor, xi, alpha0, per_area).illuminance[n])


def uniformity_of(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(values > 0):
        raise PhotometryError("Uniformity is undefined when no sensor receives light")
    return float(values.min() / values.mean())


def uniformity(P, tensor: ChannelTensor, xi, alpha0: float = 169.0, per_area: bool = True) -> float:
    return illumination_field(P, tensor, xi, alpha0, per_area).uniformity
