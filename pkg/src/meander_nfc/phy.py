# meander_nfc/phy.py
"""
NFC-A listening-mode physical layer at complex baseband.

The carrier sits at 0 Hz; the tag's 847.5 kHz subcarrier (fc/16) appears as
a square wave at the default 6.78 MHz sample rate, eight samples per cycle.
Bit periods follow ISO/IEC 14443 timing: 128, 64, 32 and 16 carrier cycles
for 106, 212, 424 and 848 kbps.

Receiver chain: DC removal, preamble sync, channel derotation, subcarrier
downconversion, Butterworth lowpass, integrate-and-dump, DD-LMS equalizer,
decision.
"""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.stats import norm

from .conf import setting
from .exceptions import InvalidSpec, SyncFailure, UnsupportedRate
from .export import sidecar_path, write_csv, write_json

logger = logging.getLogger(__name__)

PRBS15_PERIOD = 32767
PREAMBLE_SEED = 0x7FFF
CARRIER_CYCLES_PER_BIT = {106: 128, 212: 64, 424: 32, 848: 16}


class Keying(str, Enum):
    OOK = "ook"
    BPSK = "bpsk"


@dataclass(frozen=True)
class ModulationScheme:
    bitrate: int  # kbps
    keying: Keying

    def __post_init__(self):
        if self.bitrate not in CARRIER_CYCLES_PER_BIT:
            raise UnsupportedRate(f"unsupported bitrate {self.bitrate} kbps")
        keying = Keying(self.keying)
        if (self.bitrate == 106) != (keying is Keying.OOK):
            raise UnsupportedRate("NFC-A uses OOK at 106 kbps and BPSK at 212/424/848 kbps")
        object.__setattr__(self, "keying", keying)

    @classmethod
    def for_bitrate(cls, bitrate):
        bitrate = int(bitrate)
        return cls(bitrate, Keying.OOK if bitrate == 106 else Keying.BPSK)

    @classmethod
    def parse(cls, name):
        """'bpsk-212', 'ook-106' or a bare bitrate."""
        keying, _, rate = str(name).lower().rpartition("-")
        scheme = cls.for_bitrate(rate)
        if keying and keying != scheme.keying.value:
            raise UnsupportedRate(f"{name!r} is not an NFC-A scheme")
        return scheme

    @property
    def name(self):
        return f"{self.keying.value}-{self.bitrate}"

    @property
    def subcarrier(self):
        return setting("CARRIER_HZ") / setting("SUBCARRIER_DIVIDER")

    @property
    def bit_duration(self):
        return CARRIER_CYCLES_PER_BIT[self.bitrate] / setting("CARRIER_HZ")

    @property
    def symbol_rate(self):
        """Line-code rate: Manchester halves count separately."""
        chips = 2 if self.keying is Keying.OOK else 1
        return chips / self.bit_duration


ALL_SCHEMES = tuple(ModulationScheme.for_bitrate(r) for r in (106, 212, 424, 848))


def samples_per_cycle(sample_rate):
    spc = sample_rate * setting("SUBCARRIER_DIVIDER") / setting("CARRIER_HZ")
    if not math.isclose(spc, round(spc)) or round(spc) % 2 or round(spc) < 4:
        raise UnsupportedRate(f"sample rate {sample_rate} Hz gives {spc:g} samples per subcarrier cycle")
    return int(round(spc))


def samples_per_bit(scheme, sample_rate):
    n = sample_rate * scheme.bit_duration
    if not math.isclose(n, round(n)):
        raise UnsupportedRate(f"{scheme.name} has {n:g} samples per bit at {sample_rate} Hz")
    return int(round(n))


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: float
    epoch: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(samples)):
            raise InvalidSpec("waveform samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate

    def export_iq(self, path):
        """Interleaved little-endian float32 I/Q plus a JSON sidecar."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        iq = np.empty(2 * len(self.samples), dtype="<f4")
        iq[0::2] = self.samples.real
        iq[1::2] = self.samples.imag
        iq.tofile(path)
        write_json(
            sidecar_path(path),
            {"sample_rate": self.sample_rate, "epoch": self.epoch, "n_samples": len(self.samples), "format": "cf32_le"},
        )
        logger.info("Wrote %s", path)
        return path

    @classmethod
    def load_iq(cls, path):
        meta = json.loads(sidecar_path(path).read_text())
        iq = np.fromfile(path, dtype="<f4")
        return cls(iq[0::2] + 1j * iq[1::2], meta["sample_rate"], meta.get("epoch", 0))


@dataclass(frozen=True)
class ChannelConfig:
    link_gain: complex = 1.0
    carrier_leak: complex = 0.0
    noise_density: float = 0.0  # V^2/Hz
    seed: int = 0
    delay: int = 0  # samples of leak and noise ahead of the frame

    def __post_init__(self):
        if self.noise_density < 0:
            raise InvalidSpec("noise_density must be >= 0")
        if self.delay < 0:
            raise InvalidSpec("delay must be >= 0")


def _setting_field(name):
    return field(default_factory=lambda: setting(name))


@dataclass(frozen=True)
class ReceiverConfig:
    filter_order: int = _setting_field("BUTTERWORTH_ORDER")
    cutoff_factor: float = _setting_field("CUTOFF_FACTOR")
    eq_taps: int = _setting_field("EQUALIZER_TAPS")
    eq_step: float = _setting_field("EQUALIZER_STEP")
    preamble_bits: int = _setting_field("PREAMBLE_BITS")
    sync_threshold: float = _setting_field("SYNC_THRESHOLD")
    matched_filter: bool = False
    sync_search: int = None  # lags to try; one bit period when unset

    def __post_init__(self):
        if self.filter_order < 1 or self.cutoff_factor <= 0:
            raise InvalidSpec("filter order and cutoff factor must be positive")
        if self.eq_taps < 1 or self.eq_taps % 2 == 0:
            raise InvalidSpec("equalizer needs an odd, positive tap count")
        if not 0 < self.eq_step < 1:
            raise InvalidSpec("equalizer step must lie in (0, 1)")
        if self.preamble_bits < 8:
            raise InvalidSpec("preamble needs at least 8 bits")

    def preamble(self):
        return prbs15(PREAMBLE_SEED, self.preamble_bits)


@dataclass(frozen=True)
class BERPoint:
    P_in_dBm: float
    bits_sent: int
    bit_errors: int
    sync_failures: int = 0

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_sent:
            raise InvalidSpec("bit_errors must lie in [0, bits_sent]")

    @property
    def ber(self):
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0


def prbs15(seed, n_bits):
    """Fibonacci LFSR x^15 + x^14 + 1; output is the top stage."""
    if not 0 < seed <= PRBS15_PERIOD:
        raise InvalidSpec("PRBS15 seed must be a non-zero 15-bit state")
    if n_bits <= 0:
        raise InvalidSpec("n_bits must be positive")
    period = np.empty(min(n_bits, PRBS15_PERIOD), dtype=np.uint8)
    state = seed
    for i in range(len(period)):
        out = (state >> 14) & 1
        period[i] = out
        state = ((state << 1) | (out ^ ((state >> 13) & 1))) & 0x7FFF
    if n_bits <= PRBS15_PERIOD:
        return period
    return np.resize(period, n_bits)


def _square_subcarrier(n_samples, spc, start=0):
    n = np.arange(start, start + n_samples)
    return np.where((n % spc) < spc // 2, 1.0, -1.0)


def modulate(bits, scheme, sample_rate=None):
    """Tag load state in [0, 1]: 1 is the modulated load, 0 the idle one."""
    fs = setting("SAMPLE_RATE_HZ") if sample_rate is None else sample_rate
    if fs < 4 * scheme.subcarrier:
        raise UnsupportedRate("sample rate must be at least four times the subcarrier")
    spc = samples_per_cycle(fs)
    n_s = samples_per_bit(scheme, fs)
    bits = np.asarray(bits, dtype=np.int8)
    sq = _square_subcarrier(len(bits) * n_s, spc)
    per_sample = np.repeat(bits, n_s)
    if scheme.keying is Keying.BPSK:
        state = 0.5 * (1.0 + (2 * per_sample - 1) * sq)
    else:
        # Manchester: a one modulates the first half-bit, a zero the second
        first_half = (np.arange(len(sq)) % n_s) < n_s // 2
        active = (per_sample == 1) == first_half
        state = active * 0.5 * (1.0 + sq)
    return Waveform(state.astype(complex), fs)


def apply_channel(wf, cfg):
    """g x + leak + complex AWGN with per-sample variance N0 fs."""
    x = wf.samples
    if cfg.delay:
        x = np.concatenate([np.zeros(cfg.delay, dtype=complex), x])
    out = cfg.link_gain * x + cfg.carrier_leak
    if cfg.noise_density > 0:
        rng = np.random.default_rng(cfg.seed)
        sigma = math.sqrt(cfg.noise_density * wf.sample_rate / 2)
        out = out + sigma * (rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x)))
    return Waveform(out, wf.sample_rate, wf.epoch - cfg.delay)


def _acquire(x, template, search, threshold):
    """Best lag by normalized preamble correlation, and the channel estimate there."""
    n_t = len(template)
    lags = min(search, len(x) - n_t + 1)
    if lags < 1:
        raise SyncFailure("capture shorter than the preamble", correlation=0.0)
    energy_t = np.vdot(template, template).real
    windows = np.lib.stride_tricks.sliding_window_view(x[: lags - 1 + n_t], n_t)
    corr = windows @ np.conj(template)
    energy_x = np.sum(np.abs(windows) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(energy_x > 0, np.abs(corr) / np.sqrt(energy_x * energy_t), 0.0)
    lag = int(np.argmax(rho))
    if rho[lag] < threshold:
        logger.warning("preamble correlation %.3f below threshold %.3f", rho[lag], threshold)
        raise SyncFailure(f"preamble correlation {rho[lag]:.3f} below {threshold}", correlation=float(rho[lag]))
    return lag, corr[lag] / energy_t


def _bit_statistics(y, scheme, n_s):
    blocks = y.reshape(-1, n_s)
    if scheme.keying is Keying.BPSK:
        return blocks.mean(axis=1)
    half = n_s // 2
    return blocks[:, :half].mean(axis=1) - blocks[:, half:].mean(axis=1)


def dd_lms(symbols, training, taps, step):
    """
    Complex decision-directed LMS equalizer.

    The first ``len(training)`` outputs adapt toward the known +/-1 symbols,
    the rest toward their own sign decisions.
    """
    c = taps // 2
    padded = np.concatenate([np.zeros(c, dtype=complex), symbols, np.zeros(c, dtype=complex)])
    w = np.zeros(taps, dtype=complex)
    w[c] = 1.0
    out = np.empty(len(symbols), dtype=complex)
    n_train = len(training)
    for k in range(len(symbols)):
        window = padded[k:k + taps]
        y = w @ window
        ref = training[k] if k < n_train else (1.0 if y.real > 0 else -1.0)
        w += step * (ref - y) * np.conj(window)
        out[k] = y
    return out


def demodulate(rx, scheme, receiver=None, n_bits=None):
    """
    Recover the frame bits (preamble included) from a reader-side capture.
    Raises SyncFailure when the preamble is not found.
    """
    receiver = receiver or ReceiverConfig()
    fs = rx.sample_rate
    n_s = samples_per_bit(scheme, fs)
    spc = samples_per_cycle(fs)
    preamble = receiver.preamble()
    x = rx.samples - rx.samples.mean()
    template = modulate(preamble, scheme, fs).samples
    template = template - template.mean()
    search = receiver.sync_search or n_s
    lag, gain = _acquire(x, template, search, receiver.sync_threshold)
    if gain == 0:
        raise SyncFailure("zero channel estimate", correlation=0.0)
    available = (len(x) - lag) // n_s
    n_bits = available if n_bits is None else min(n_bits, available)
    y = (x[lag:lag + n_bits * n_s] * np.conj(gain) / abs(gain)).real
    d_pre = 2.0 * preamble.astype(float) - 1.0

    if receiver.matched_filter:
        ref = 0.5 * _square_subcarrier(len(y), spc)
        if scheme.keying is Keying.OOK:
            ref = ref * np.where((np.arange(len(y)) % n_s) < n_s // 2, 1.0, -1.0)
        stats = (y * ref).reshape(-1, n_s).sum(axis=1)
        return (stats > 0).astype(np.uint8)

    n = np.arange(len(y))
    mixed = y * np.exp(-2j * np.pi * n / spc)
    cutoff = receiver.cutoff_factor * scheme.symbol_rate
    sos = signal.butter(receiver.filter_order, cutoff, btype="low", fs=fs, output="sos")
    baseband = signal.sosfiltfilt(sos, mixed.real) + 1j * signal.sosfiltfilt(sos, mixed.imag)
    symbols = _bit_statistics(baseband, scheme, n_s)
    n_pre = min(len(preamble), len(symbols))
    c_bar = np.mean(symbols[:n_pre] * d_pre[:n_pre])
    if c_bar == 0:
        raise SyncFailure("preamble carries no subcarrier energy", correlation=0.0)
    symbols = symbols / c_bar
    equalized = dd_lms(symbols, d_pre[:n_pre], receiver.eq_taps, receiver.eq_step)
    return (equalized.real > 0).astype(np.uint8)


def energy_per_bit(link_gain, scheme, sample_rate=None):
    """Energy of the subcarrier modulation per bit, in V^2 s."""
    fs = setting("SAMPLE_RATE_HZ") if sample_rate is None else sample_rate
    n_s = samples_per_bit(scheme, fs)
    g2 = abs(link_gain) ** 2
    if scheme.keying is Keying.BPSK:
        return g2 / 4 * n_s / fs
    return g2 * n_s / (8 * fs)


def theoretical_ber(ebn0, scheme):
    """Coherent detection: Q(sqrt(2 Eb/N0)) for BPSK, Q(sqrt(Eb/N0)) for Manchester OOK."""
    ebn0 = np.asarray(ebn0, dtype=float)
    factor = 2.0 if scheme.keying is Keying.BPSK else 1.0
    return norm.sf(np.sqrt(factor * ebn0))


def required_ebn0(ber, scheme):
    factor = 2.0 if scheme.keying is Keying.BPSK else 1.0
    return norm.isf(ber) ** 2 / factor


def link_gain_from_bridge(cfg, z, dz):
    """First-order bridge output amplitude for an impedance step ``dz`` (R_amp V_in |dz| / |z|^2)."""
    return cfg.R_amp * cfg.V_in * abs(dz) / abs(z) ** 2


def carrier_leak_from_bridge(cfg, z1, z2=None):
    """Residual carrier at the amplifier output; ``z2=None`` is a single coil with no reference branch."""
    if z2 is None:
        return complex(-cfg.R_amp * cfg.V_in / z1)
    return complex(-cfg.R_amp * cfg.V_in * (1 / z1 - 1 / z2))


@dataclass(frozen=True)
class ChannelTemplate:
    """
    Power-dependent channel.

    The tag signal and carrier leak scale with input amplitude 10^(P/20).
    The front end normalizes the largest expected input (leak plus signal
    at ``p_max_dbm``) to ``full_scale`` and the noise is added after it, so a
    large leak costs usable gain.
    """

    link_gain: complex
    carrier_leak: complex = 0.0
    noise_density: float = 0.0
    full_scale: float = 1.0
    p_max_dbm: float = 10.0

    @property
    def front_end_gain(self):
        a_max = 10 ** (self.p_max_dbm / 20)
        return self.full_scale / (a_max * (abs(self.carrier_leak) + abs(self.link_gain)))

    def channel_at(self, p_dbm, seed=0):
        scale = self.front_end_gain * 10 ** (p_dbm / 20)
        return ChannelConfig(
            link_gain=complex(self.link_gain) * scale,
            carrier_leak=complex(self.carrier_leak) * scale,
            noise_density=self.noise_density,
            seed=seed,
        )


def calibrate_noise_density(template, scheme=None, p_ref_dbm=-10.0, ber_target=None, margin_db=None,
                            sample_rate=None):
    """Noise floor that puts ``scheme`` ``margin_db`` above the theoretical BER target at ``p_ref_dbm``."""
    scheme = scheme or ModulationScheme.for_bitrate(212)
    ber_target = setting("BER_TARGET") if ber_target is None else ber_target
    margin_db = setting("CALIBRATION_MARGIN_DB") if margin_db is None else margin_db
    ebn0 = required_ebn0(ber_target, scheme) * 10 ** (margin_db / 10)
    eb = energy_per_bit(template.channel_at(p_ref_dbm).link_gain, scheme, sample_rate)
    n0 = eb / ebn0
    logger.debug("noise density %.4g V^2/Hz gives Eb/N0 %.2f dB at %.1f dBm", n0, 10 * math.log10(ebn0), p_ref_dbm)
    return replace(template, noise_density=n0)


def calibrate_single_coil_leak(template, shift_db=13.0):
    """Carrier leak that costs ``shift_db`` of front-end gain relative to ``template``."""
    g = abs(template.link_gain)
    total = 10 ** (shift_db / 20) * (abs(template.carrier_leak) + g)
    phase = template.carrier_leak / abs(template.carrier_leak) if template.carrier_leak else 1.0
    return replace(template, carrier_leak=complex((total - g) * phase))


def _frame_errors(scheme, channel, payload, receiver, fs):
    preamble = receiver.preamble()
    frame = np.concatenate([preamble, payload])
    rx = apply_channel(modulate(frame, scheme, fs), channel)
    try:
        bits = demodulate(rx, scheme, receiver, n_bits=len(frame))
    except SyncFailure:
        return math.ceil(len(payload) / 2), True
    got = bits[len(preamble):]
    errors = int(np.count_nonzero(got != payload[: len(got)]))
    return errors + (len(payload) - len(got)), False


def simulate_ber(scheme, channel, n_bits, receiver=None, seed=0, frame_bits=2000, sample_rate=None, p_dbm=0.0):
    """
    Send ``n_bits`` of PRBS15 payload in preamble-led frames through
    ``channel`` (its seed is ignored; per-frame noise comes from ``seed``).
    A frame that fails sync counts half its payload bits as errors.
    """
    receiver = receiver or ReceiverConfig()
    fs = setting("SAMPLE_RATE_HZ") if sample_rate is None else sample_rate
    rng = np.random.default_rng(seed)
    errors = failures = sent = 0
    while sent < n_bits:
        size = min(frame_bits, n_bits - sent)
        payload = prbs15(int(rng.integers(1, PRBS15_PERIOD + 1)), size)
        frame_channel = replace(channel, seed=int(rng.integers(2**63)))
        e, failed = _frame_errors(scheme, frame_channel, payload, receiver, fs)
        errors += e
        failures += failed
        sent += size
    return BERPoint(p_dbm, sent, errors, failures)


def default_power_grid():
    """-30 to +10 dBm in 2 dB steps."""
    return [float(p) for p in np.arange(-30, 10 + 1e-9, 2)]


def ber_sweep(scheme, template, P_in_range=None, bits_per_point=None, receiver=None, seed=0,
              frame_bits=2000, sample_rate=None):
    """One BERPoint per input power; point i draws from SeedSequence([seed, i])."""
    P_in_range = default_power_grid() if P_in_range is None else list(P_in_range)
    if not P_in_range:
        raise InvalidSpec("P_in_range is empty")
    if bits_per_point is None:
        bits_per_point = 20 * int(round(1 / setting("BER_TARGET")))
    points = []
    for idx, p in enumerate(P_in_range):
        point_seed = np.random.SeedSequence([seed, idx])
        channel = template.channel_at(p)
        points.append(simulate_ber(scheme, channel, bits_per_point, receiver, point_seed, frame_bits, sample_rate, p))
    return points


def threshold_crossing(points, target=None):
    """Input power (dBm) where BER first falls to ``target``, log-interpolated; None if never."""
    target = setting("BER_TARGET") if target is None else target
    pts = sorted(points, key=lambda p: p.P_in_dBm)
    log_t = math.log10(target)

    def log_ber(p):
        return math.log10(max(p.ber, 0.5 / max(p.bits_sent, 1)))

    for prev, cur in zip(pts, pts[1:]):
        if cur.ber <= target < prev.ber:
            y0, y1 = log_ber(prev), log_ber(cur)
            if y0 == y1:
                return cur.P_in_dBm
            frac = (y0 - log_t) / (y0 - y1)
            return prev.P_in_dBm + frac * (cur.P_in_dBm - prev.P_in_dBm)
    if pts and pts[0].ber <= target:
        return pts[0].P_in_dBm
    return None


def export_ber_table(path, points, scheme, config_hash="", header=None):
    rows = ((p.P_in_dBm, p.bits_sent, p.bit_errors, p.ber, scheme.name, config_hash) for p in points)
    return write_csv(path, ["P_in_dBm", "bits", "errors", "ber", "scheme", "config_hash"], rows, header)
