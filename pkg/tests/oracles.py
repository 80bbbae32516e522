"""Independent reference computations.

Each oracle derives its value from first principles with a formulation
different from the library's, so a shared mistake cannot hide.
"""

import cmath
import math
from fractions import Fraction

C = 299_792_458.0
R_EARTH = 6_371_000.0


def meters_per_degree() -> float:
    # arc length of one degree on a sphere of radius R
    return 2.0 * math.pi * R_EARTH / 360.0


def friis_rx_dbm(p_tx_dbm, g_tx_dbi, g_rx_dbi, freq, d):
    """Received power from the linear Friis equation, converted to dBm at the end."""
    lam = C / freq
    p_tx_mw = 10.0 ** (p_tx_dbm / 10.0)
    g = 10.0 ** ((g_tx_dbi + g_rx_dbi) / 10.0)
    p_rx_mw = p_tx_mw * g * (lam / (4.0 * math.pi * d)) ** 2
    return 10.0 * math.log10(p_rx_mw)


def fspl_db(freq, d):
    return -friis_rx_dbm(0.0, 0.0, 0.0, freq, d)


def two_ray_loss_db(freq, d2d, ht, hr, gamma=-1.0):
    """Coherent sum of direct and mirror-image rays, written with image geometry."""
    k = 2.0 * math.pi * freq / C
    direct = math.hypot(d2d, ht - hr)
    image = math.hypot(d2d, ht + hr)
    field = cmath.exp(-1j * k * direct) / direct + gamma * cmath.exp(-1j * k * image) / image
    amp = abs(field) / (2.0 * k)  # lambda / (4 pi) == 1 / (2 k)
    return -20.0 * math.log10(amp)


def two_ray_far_field_db(d2d, ht, hr):
    """Far-field plane-earth law: PL = 40 log d - 20 log(ht hr)."""
    return 40.0 * math.log10(d2d) - 20.0 * math.log10(ht * hr)


def thermal_floor_dbm(bandwidth, nf_db):
    # -174 dBm/Hz reference density times bandwidth, in linear units
    density_mw = 10.0 ** (-174.0 / 10.0)
    return 10.0 * math.log10(density_mw * bandwidth) + nf_db


def ktb_dbm(bandwidth, temp_k=290.0):
    k_b = 1.380649e-23
    return 10.0 * math.log10(k_b * temp_k * bandwidth * 1000.0)


def rsrp_dbm(p_dbm, n_prb):
    # power per resource element: total over 12 subcarriers per PRB
    per_re_mw = 10.0 ** (p_dbm / 10.0) / (12 * n_prb)
    return 10.0 * math.log10(per_re_mw)


def band_contains(center, bw, low, high) -> bool:
    c, b = Fraction(center), Fraction(bw)
    return low <= c - b / 2 and c + b / 2 <= high


def hamilton(quotas, seats):
    """Textbook Hamilton apportionment by sorting remainders (ties: lower index)."""
    floors = [math.floor(q) for q in quotas]
    left = seats - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def shannon_prb_bps(snr_db, n_prb, kappa=0.75, se_max=170e6 / (100 * 180e3 * 2), streams=2):
    se = min(se_max, kappa * math.log2(1.0 + 10.0 ** (snr_db / 10.0)))
    return n_prb * 180e3 * se * streams


def point_in_polygon(x, y, poly) -> bool:
    """Winding-number test, boundary excluded (callers avoid the boundary)."""
    wn = 0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y < y1 and cross > 0:
            wn += 1
        elif y1 <= y < y0 and cross < 0:
            wn -= 1
    return wn != 0
