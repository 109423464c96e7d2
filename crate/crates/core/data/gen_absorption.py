#!/usr/bin/env python3
"""Regenerates absorption.csv.

Water-vapour absorption stand-in for a humid office (~10 g/m^3): a
quadratic continuum plus Lorentzian lines at the main H2O line centres.
Line strengths are rounded so the table reads as a coarse approximation,
not as a line-by-line database.
"""

CONTINUUM_K_AT_300 = 2.0e-3  # 1/m
HWHM_GHZ = 3.0

# (centre GHz, peak absorption coefficient 1/m)
LINES = [
    (183.31, 0.02), (325.15, 0.03), (380.20, 0.15), (448.00, 0.08),
    (556.94, 3.0), (752.03, 2.0), (987.93, 1.5), (1097.37, 2.5),
    (1113.34, 0.8), (1162.91, 2.0), (1208.64, 0.8), (1228.79, 1.2),
    (1410.62, 1.5), (1602.22, 1.0), (1661.01, 3.0), (1669.90, 3.5),
    (1716.77, 3.0), (1762.04, 1.5), (1794.79, 1.0), (1867.75, 1.5),
    (1919.36, 2.0), (2040.48, 1.5), (2074.43, 2.0), (2164.13, 1.2),
    (2196.35, 1.5), (2221.75, 2.0), (2264.15, 1.5), (2344.25, 1.0),
    (2391.57, 1.5), (2531.44, 1.0), (2640.47, 1.5), (2685.64, 2.0),
    (2773.98, 2.0), (2968.75, 1.5), (3013.20, 2.0), (3168.0, 2.0),
    (3331.0, 2.0),
]


def k_per_m(f_ghz):
    k = CONTINUUM_K_AT_300 * (f_ghz / 300.0) ** 2
    for centre, peak in LINES:
        k += peak * HWHM_GHZ**2 / ((f_ghz - centre) ** 2 + HWHM_GHZ**2)
    return k


def main():
    with open("absorption.csv", "w", newline="\n") as out:
        out.write("frequency_ghz,k_per_m\n")
        for f in range(50, 3501):
            out.write(f"{f},{k_per_m(float(f)):.6e}\n")


if __name__ == "__main__":
    main()
