"""Small numerical helpers shared across modules: quintic Hermite
interpolation on uniform grids, spectral periodic integration and smooth steps."""

import numpy as np


class QuinticHermite:
    """C2 piecewise-quintic interpolant on a uniform grid.

    Built from values, first and second derivatives at the nodes. When
    ``period`` is given, arguments are reduced modulo the period and the
    value is shifted by ``jump`` per period (for angle-like functions that
    grow by a constant over one period).
    """

    def __init__(self, x0, dx, y, dy, d2y, period=None, jump=0.0):
        self.x0 = float(x0)
        self.dx = float(dx)
        self.y = np.asarray(y)
        self.dy = np.asarray(dy)
        self.d2y = np.asarray(d2y)
        self.period = period
        self.jump = jump
        self.n = len(self.y) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shift = 0.0
        if self.period is not None:
            turns = np.floor((x - self.x0) / self.period)
            x = x - turns * self.period
            shift = turns * self.jump
        u = (x - self.x0) / self.dx
        i = np.clip(np.floor(u).astype(int), 0, self.n - 1)
        t = u - i
        t2 = t * t
        t3 = t2 * t
        t4 = t3 * t
        t5 = t4 * t
        h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
        h1 = t - 6 * t3 + 8 * t4 - 3 * t5
        h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
        h3 = 0.5 * (t3 - 2 * t4 + t5)
        h4 = -4 * t3 + 7 * t4 - 3 * t5
        h5 = 10 * t3 - 15 * t4 + 6 * t5
        d, d2 = self.dx, self.dx * self.dx
        out = (
            h0 * self.y[i]
            + h1 * d * self.dy[i]
            + h2 * d2 * self.d2y[i]
            + h3 * d2 * self.d2y[i + 1]
            + h4 * d * self.dy[i + 1]
            + h5 * self.y[i + 1]
        )
        return out + shift


def periodic_antiderivative(samples, length):
    """Antiderivative of a periodic function sampled on ``n`` uniform nodes.

    Returns ``(values, mean)`` where ``values[j]`` is the integral from 0 to
    the j-th node (j = 0..n, endpoint included) and ``mean`` is the average
    of the integrand, so the integral over a full period is ``mean * length``.
    """
    f = np.asarray(samples)
    n = len(f)
    coef = np.fft.fft(f) / n
    omega = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    mean = coef[0]
    pcoef = np.zeros_like(coef, dtype=complex)
    nz = omega != 0
    pcoef[nz] = coef[nz] / (1j * omega[nz])
    if n % 2 == 0:
        pcoef[n // 2] = 0.0
    periodic = np.fft.ifft(pcoef) * n
    if np.isrealobj(f):
        periodic = periodic.real
        mean = mean.real
    periodic = np.append(periodic, periodic[0])
    s = np.linspace(0.0, length, n + 1)
    return mean * s + periodic - periodic[0], mean


def periodic_derivative(samples, length):
    """Spectral derivative of a periodic function sampled on ``n`` uniform nodes."""
    f = np.asarray(samples)
    n = len(f)
    coef = np.fft.fft(f)
    omega = 2 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        coef[n // 2] = 0.0
    out = np.fft.ifft(1j * omega * coef)
    return out.real if np.isrealobj(f) else out


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    y = 1.0 - x
    b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


def plateau(x, lo, hi, width):
    """Smooth bump equal to 1 on [lo, hi] and 0 outside [lo - width, hi + width]."""
    x = np.asarray(x, dtype=float)
    return smooth_step((x - (lo - width)) / width) * smooth_step(((hi + width) - x) / width)
