"""Aplicações de S³ que levam a fibra de referência sobre uma órbita periódica.

Duas etapas: uma unitária de C² (isometria exata de α_*) leva z_* = (1, 0) sobre γ(0);
em seguida, se γ não é um círculo de Hopf, um endireitamento de fibra Ψ suportado num tubo
em volta da fibra de referência leva essa fibra sobre a órbita.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.geometry.forms3d import (
    TWO_PI,
    ContactForm,
    GeometryError,
    as_batch,
    from_complex,
    to_complex,
)
from src.geometry.reebflow import DEFAULT_CONFIG, IntegratorConfig, PeriodicOrbit, trajectory

logger = logging.getLogger(__name__)

REFERENCE = np.array([1.0 + 0.0j, 0.0 + 0.0j])


class AlignmentFailure(GeometryError):
    """A órbita não pode ser alinhada com a fibra de referência"""
    pass


def align_unitary(seed: np.ndarray) -> np.ndarray:
    """Unitária especial [[a, −b̄], [b, ā]] com U·z_* = (a, b)"""
    z1, z2 = to_complex(seed)
    a, b = complex(z1[0]), complex(z2[0])
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]], dtype=complex)


class UnitaryMap:
    def __init__(self, unitary: np.ndarray):
        self.unitary = np.asarray(unitary, dtype=complex)

    def _act(self, v: np.ndarray) -> np.ndarray:
        z1, z2 = to_complex(v)
        z = self.unitary @ np.vstack([z1, z2])
        return from_complex(z[0], z[1])

    def apply(self, x):
        return self._act(x)

    def push(self, x, v):
        return self._act(v)

    def inverse(self) -> "UnitaryMap":
        return UnitaryMap(self.unitary.conj().T)


def _cutoff(m: np.ndarray, inner: float, outer: float):
    """χ de classe C³: 1 para m ≤ inner, 0 para m ≥ outer; retorna (χ, χ′)"""
    width = outer - inner
    t = np.clip((m - inner) / width, 0.0, 1.0)
    step = t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)
    slope = 140.0 * t ** 3 * (1.0 - t) ** 3 / width
    return 1.0 - step, -slope


class FiberStraightening:
    """Ψ(x) = (x + D(x))/|x + D(x)| com D = χ(|z₂|)·u·(g(s) − z_*).

    g é o interpolante trigonométrico de s ↦ e^{−2πis/p}·U⁻¹γ(Ts), u = z₁/|z₁| e
    s = p·arg(z₁)/2π. Na fibra de referência, Ψ(e^{2πis/p}z_*) = U⁻¹γ(Ts).

    Um campo de Reeb puxado por Ψ avalia apply/push várias vezes no mesmo lote de pontos;
    as peças do último lote ficam guardadas.
    """

    def __init__(self, coefficients: np.ndarray, frequencies: np.ndarray, lens_order: int = 1,
                 inner: float = 0.25, outer: float = 0.6):
        self.coefficients = np.asarray(coefficients, dtype=complex)
        self.frequencies = np.rint(np.asarray(frequencies, dtype=float)).astype(int)
        self.lens_order = lens_order
        self.inner, self.outer = inner, outer
        self._derivative = TWO_PI * 1j * self.frequencies[:, None] * self.coefficients
        self._last: Optional[np.ndarray] = None
        self._last_pieces = None

    @classmethod
    def from_orbit(cls, alpha: ContactForm, orbit: PeriodicOrbit, unitary: np.ndarray,
                   cfg: IntegratorConfig = DEFAULT_CONFIG, samples: int = 128,
                   cutoff: float = 1e-14) -> "FiberStraightening":
        p = alpha.lens_order
        s = np.arange(samples) / samples
        path = trajectory(alpha, orbit.seed, orbit.period * s, cfg)
        z1, z2 = to_complex(path)
        local = unitary.conj().T @ np.vstack([z1, z2])
        values = np.exp(-TWO_PI * 1j * s / p) * local
        coefficients = np.fft.fft(values, axis=1).T / samples
        frequencies = np.fft.fftfreq(samples, d=1.0 / samples)
        coefficients[samples // 2] = 0.0
        magnitude = np.max(np.abs(coefficients), axis=1)
        keep = magnitude > cutoff * magnitude.max()
        logger.debug(f"Endireitamento: {int(keep.sum())} de {samples} modos de Fourier mantidos")
        return cls(coefficients[keep], frequencies[keep], p)

    def _phases(self, s: np.ndarray) -> np.ndarray:
        """e^{2πiks} para as frequências mantidas, por potências de e^{2πis}"""
        s = np.atleast_1d(s)
        top = int(np.max(np.abs(self.frequencies))) if self.frequencies.size else 0
        base = np.exp(TWO_PI * 1j * s)
        table = np.ones((s.size, top + 1), dtype=complex)
        if top:
            table[:, 1:] = np.cumprod(np.repeat(base[:, None], top, axis=1), axis=1)
        k = self.frequencies
        return np.where(k >= 0, table[:, np.abs(k)], np.conj(table[:, np.abs(k)]))

    def curve(self, s: np.ndarray):
        """g(s) e g′(s), shape (n, 2)"""
        phases = self._phases(s)
        return phases @ self.coefficients, phases @ self._derivative

    def deviation(self, samples: int = 256) -> float:
        g, _ = self.curve(np.arange(samples) / samples)
        return float(np.max(np.abs(g - REFERENCE)))

    def _pieces(self, x: np.ndarray):
        if self._last is not None and self._last.shape == x.shape and np.array_equal(self._last, x):
            return self._last_pieces
        z1, z2 = to_complex(x)
        modulus = np.maximum(np.abs(z1), 1e-300)
        u = z1 / modulus
        s = self.lens_order * np.angle(z1) / TWO_PI
        chi, dchi = _cutoff(np.abs(z2), self.inner, self.outer)
        g, dg = self.curve(s)
        self._last, self._last_pieces = x.copy(), (z1, z2, modulus, u, chi, dchi, g - REFERENCE, dg)
        return self._last_pieces

    def apply(self, x):
        x = as_batch(x)
        _, _, _, u, chi, _, G, _ = self._pieces(x)
        D = (chi * u)[:, None] * G
        w = x + from_complex(D[:, 0], D[:, 1])
        return w / np.linalg.norm(w, axis=1, keepdims=True)

    def push(self, x, v):
        x, v = as_batch(x), as_batch(v)
        z1, z2, modulus, u, chi, dchi, G, dg = self._pieces(x)
        dz1, dz2 = to_complex(v)
        m = np.maximum(np.abs(z2), 1e-300)
        dm = np.real(np.conj(z2) * dz2) / m
        darg = np.imag(np.conj(z1) * dz1) / modulus ** 2
        ds = self.lens_order * darg / TWO_PI

        D = (chi * u)[:, None] * G
        dD = ((dchi * dm * u)[:, None] * G
              + (chi * 1j * u * darg)[:, None] * G
              + (chi * u * ds)[:, None] * dg)
        w = x + from_complex(D[:, 0], D[:, 1])
        dw = v + from_complex(dD[:, 0], dD[:, 1])
        norm = np.linalg.norm(w, axis=1, keepdims=True)
        y = w / norm
        return (dw - y * np.einsum("ij,ij->i", y, dw)[:, None]) / norm


@dataclass
class ComposedMap:
    """x ↦ U·Ψ(x) (Ψ opcional)"""

    unitary: UnitaryMap
    straightening: Optional[FiberStraightening] = None

    def apply(self, x):
        y = as_batch(x) if self.straightening is None else self.straightening.apply(x)
        return self.unitary.apply(y)

    def push(self, x, v):
        dv = as_batch(v) if self.straightening is None else self.straightening.push(x, v)
        return self.unitary.push(None, dv)


def alignment_map(alpha: ContactForm, orbit: PeriodicOrbit, cfg: IntegratorConfig = DEFAULT_CONFIG,
                  tol: float = 1e-8, max_deviation: float = 0.15, samples: int = 128) -> ComposedMap:
    """Unitária alinhada em fase e, se γ não for um círculo de Hopf, o endireitamento Ψ"""
    unitary = align_unitary(orbit.seed)
    straightening = FiberStraightening.from_orbit(alpha, orbit, unitary, cfg, samples)
    deviation = straightening.deviation()
    if deviation > max_deviation:
        raise AlignmentFailure(
            f"Órbita a {deviation:.3e} do círculo de Hopf mais próximo (limite {max_deviation})"
        )
    if deviation <= tol:
        logger.debug(f"Órbita circular (desvio {deviation:.2e}): apenas a unitária")
        return ComposedMap(UnitaryMap(unitary))
    logger.info(f"Órbita não circular (desvio {deviation:.3e}): endireitamento de fibra aplicado")
    return ComposedMap(UnitaryMap(unitary), straightening)
