"""Synthetic radar returns from vibrating (and rotating) targets.

The return from a vibrating plate is modelled as pure phase modulation,

    s(t) = a * exp(j * 4*pi/lambda * d(t)) + noise,

with d(t) a sum of harmonics of the drive frequency. For a single harmonic the
spectrum is a comb of lines at n*f_v whose amplitudes follow |J_n(beta)|,
beta = 4*pi*D/lambda.
"""

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .seeding import make_rng

SPEED_OF_LIGHT = 3.0e8
IQ_MAGIC = b"MDIQv001"
# seconds; sets how slowly the drive frequency wanders
JITTER_CORRELATION_TIME = 0.05


class Material(enum.IntEnum):
    BRASS = 0
    COPPER = 1
    ALUMINUM = 2

    @property
    def label(self):
        return self.name.capitalize()

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown material {name!r}") from None


CLASS_NAMES = [m.label for m in Material]


@dataclass(frozen=True)
class RadarParams:
    carrier_frequency: float = 2.45e9
    sample_rate: float = 8192.0
    target_range: float = 1.5
    propagation_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("carrier_frequency", "sample_rate", "target_range", "propagation_speed"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"RadarParams.{name} must be finite and > 0, got {value}")

    @property
    def wavelength(self):
        return self.propagation_speed / self.carrier_frequency


@dataclass(frozen=True)
class RotationSpec:
    angular_speed: float
    radius: float

    def __post_init__(self):
        if not math.isfinite(self.angular_speed):
            raise ValueError("angular_speed must be finite")
        if not (self.radius >= 0):
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class MaterialProfile:
    """Vibration and reflectivity parameters for one metal.

    ``harmonic_displacements`` holds ``(k, amplitude_m, phase_rad)`` triples.
    ``spectral_jitter`` is the standard deviation (Hz) of a slow random walk on
    the drive frequency; ``snr_db = inf`` disables noise.
    """

    name: Material
    vibration_frequency: float = 200.0
    harmonic_displacements: tuple = ((1, 1e-3, 0.0),)
    reflectivity: float = 1.0
    spectral_jitter: float = 0.0
    snr_db: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "name", Material.parse(self.name))
        harmonics = tuple((int(k), float(d), float(p)) for k, d, p in self.harmonic_displacements)
        object.__setattr__(self, "harmonic_displacements", harmonics)
        if not self.vibration_frequency > 0:
            raise ValueError("vibration_frequency must be > 0")
        indices = [k for k, _, _ in harmonics]
        if len(set(indices)) != len(indices) or any(k < 1 for k in indices):
            raise ValueError("harmonic indices must be unique and >= 1")
        if any(d < 0 for _, d, _ in harmonics):
            raise ValueError("harmonic displacements must be >= 0")
        if not self.reflectivity > 0:
            raise ValueError("reflectivity must be > 0")
        if not self.spectral_jitter >= 0:
            raise ValueError("spectral_jitter must be >= 0")

    def modulation_indices(self, wavelength):
        """Map harmonic index -> beta_k = 4*pi*D_k/lambda."""
        return {k: 4.0 * math.pi * d / wavelength for k, d, _ in self.harmonic_displacements}

    def max_excursion(self, wavelength):
        """Peak instantaneous micro-Doppler frequency (Hz), worst case over jitter."""
        f_peak = self.vibration_frequency + 3.0 * self.spectral_jitter
        return sum(beta * k * f_peak for k, beta in self.modulation_indices(wavelength).items())


@dataclass
class IQSignal:
    samples: np.ndarray
    sample_rate: float
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("IQSignal needs a nonempty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("IQSignal samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


def doppler_shift(radial_velocity, wavelength):
    """Two-way Doppler shift ``2*v_r/lambda`` in Hz."""
    if not wavelength > 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    return 2.0 * radial_velocity / wavelength


def rotational_micro_doppler(spec, wavelength):
    """Micro-Doppler of a scatterer at radius r rotating at omega: ``2*omega*r/lambda``."""
    return doppler_shift(spec.angular_speed * spec.radius, wavelength)


def vibration_displacement(profile, t):
    """Jitter-free plate displacement d(t) in meters; ``t`` may be a scalar or array."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    phase = 2.0 * np.pi * profile.vibration_frequency * t_arr
    d = np.zeros_like(t_arr)
    for k, amp, phi in profile.harmonic_displacements:
        d = d + amp * np.sin(k * phase + phi)
    return float(d) if d.ndim == 0 else d


def _vibration_phase(profile, n, fs, rng):
    t = np.arange(n) / fs
    if profile.spectral_jitter == 0:
        return 2.0 * np.pi * profile.vibration_frequency * t
    # Ornstein-Uhlenbeck walk on the instantaneous drive frequency, clamped at 3 sigma
    sigma = profile.spectral_jitter
    a = math.exp(-1.0 / (fs * JITTER_CORRELATION_TIME))
    innov = rng.standard_normal(n) * sigma * math.sqrt(1.0 - a * a)
    walk = np.empty(n)
    w = sigma * rng.standard_normal()
    for i in range(n):
        w = a * w + innov[i]
        w = min(max(w, -3.0 * sigma), 3.0 * sigma)
        walk[i] = w
    inst_freq = profile.vibration_frequency + walk
    phase = np.empty(n)
    phase[0] = 0.0
    np.cumsum(inst_freq[:-1], out=phase[1:])
    return 2.0 * np.pi * phase / fs


def synthesize_return(profile, radar, duration=2.0, seed=0):
    """Generate a seeded complex baseband return from a vibrating plate."""
    fs = radar.sample_rate
    if duration < 10.0 / profile.vibration_frequency:
        raise ValueError(
            f"duration {duration} s is shorter than 10 vibration periods "
            f"({10.0 / profile.vibration_frequency} s)"
        )
    n = int(round(duration * fs))
    if n < 256:
        raise ValueError(f"need at least 256 samples, got {n}")
    lam = radar.wavelength
    excursion = profile.max_excursion(lam)
    if not fs > 4.0 * excursion:
        raise ValueError(
            f"sample_rate {fs} Hz must exceed 4x the peak micro-Doppler excursion ({excursion:.1f} Hz)"
        )

    rng = make_rng(seed, "synth", int(profile.name))
    theta = _vibration_phase(profile, n, fs, rng)
    d = np.zeros(n)
    for k, amp, phi in profile.harmonic_displacements:
        d += amp * np.sin(k * theta + phi)
    samples = profile.reflectivity * np.exp(1j * (4.0 * np.pi / lam) * d)
    if math.isfinite(profile.snr_db):
        noise_power = profile.reflectivity**2 / 10.0 ** (profile.snr_db / 10.0)
        scale = math.sqrt(noise_power / 2.0)
        samples = samples + scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    meta = {"material": profile.name.label, "target_range_m": radar.target_range}
    return IQSignal(samples, fs, seed=int(seed), metadata=meta)


def bessel_j(n, x, tol=1e-12):
    """J_n(x) for integer n >= 0 from its power series."""
    if n < 0:
        raise ValueError("order must be >= 0")
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    m = 0
    while True:
        m += 1
        term *= -(half * half) / (m * (n + m))
        total += term
        if abs(term) < tol and m > half:
            return total


def sideband_amplitudes(beta, n_max):
    """``[|J_0(beta)|, ..., |J_n_max(beta)|]``: relative line strengths of a PM comb."""
    if n_max < 0 or beta < 0:
        raise ValueError("need n_max >= 0 and beta >= 0")
    return [abs(bessel_j(n, beta)) for n in range(n_max + 1)]


_PRESETS = {
    # a narrow comb at 0 and +-f_v, stable drive
    Material.BRASS: dict(
        harmonic_displacements=((1, 3.0e-3, 0.0),),
        reflectivity=1.0,
        spectral_jitter=0.2,
        snr_db=20.0,
    ),
    # deep modulation spreads energy over many sidebands; drive wanders
    Material.COPPER: dict(
        harmonic_displacements=((1, 8.0e-3, 0.0),),
        reflectivity=0.9,
        spectral_jitter=15.0,
        snr_db=18.0,
    ),
    # energy pushed to 2f_v and 3f_v, sharp lines
    Material.ALUMINUM: dict(
        harmonic_displacements=((1, 0.5e-3, 0.0), (2, 2.5e-3, 0.4), (3, 2.0e-3, 0.9)),
        reflectivity=1.0,
        spectral_jitter=0.0,
        snr_db=22.0,
    ),
}


def material_profile(name, vibration_frequency=200.0, **overrides):
    """Preset profile for ``"brass"``, ``"copper"`` or ``"aluminum"``."""
    material = Material.parse(name)
    params = dict(_PRESETS[material])
    params.update(overrides)
    return MaterialProfile(name=material, vibration_frequency=vibration_frequency, **params)


def write_iq(path, signal):
    """Write an ``MDIQv001`` file: magic, u32 rate, u64 count, interleaved f32 I/Q."""
    iq = np.empty(2 * len(signal), dtype="<f4")
    iq[0::2] = signal.samples.real
    iq[1::2] = signal.samples.imag
    with open(path, "wb") as fh:
        fh.write(IQ_MAGIC)
        fh.write(struct.pack("<IQ", int(round(signal.sample_rate)), len(signal)))
        fh.write(iq.tobytes())


def read_iq(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != IQ_MAGIC:
        raise ValueError(f"{path}: not an MDIQv001 file")
    rate, count = struct.unpack_from("<IQ", blob, 8)
    payload = np.frombuffer(blob, dtype="<f4", offset=20)
    if payload.size != 2 * count:
        raise ValueError(f"{path}: expected {count} samples, found {payload.size // 2}")
    samples = payload[0::2].astype(np.float64) + 1j * payload[1::2].astype(np.float64)
    return IQSignal(samples, float(rate))
