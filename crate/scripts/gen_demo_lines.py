#!/usr/bin/env python3
"""Regenerates the bundled synthetic line lists in crates/core/data/.

The lines are synthetic: evenly spaced R-branch-like progressions with a
smooth intensity envelope. Intensities are chosen so that peak absorbances
land in a useful range for the bundled demo scenarios (3 mbar, 296 K).
"""
import math
import random

KB = 1.380649e-23
C = 299792458.0
AMU = 1.66053906660e-27
HEADER = "species,nu0_cm1,intensity_cm_per_moleccm2,molar_mass_amu\n"


def sigma(nu0, mass, t=296.0):
    return nu0 * math.sqrt(KB * t / (mass * AMU * C * C))


def strength_for_peak(alpha, nu0, mass, ppm, path_m, p_pa=300.0, t=296.0):
    n = ppm * 1e-6 * p_pa / (KB * t) * 1e-6
    g = 1.0 / (sigma(nu0, mass, t) * math.sqrt(2 * math.pi))
    return alpha / (n * path_m * 100.0 * g)


def branch(species, mass, ppm, path_m, start, spacing, count, peak_lo, peak_hi, rng):
    rows = []
    for j in range(count):
        nu0 = round(start + spacing * j + rng.uniform(-0.05, 0.05) * spacing, 4)
        x = j / max(count - 1, 1)
        shape = math.sin(math.pi * (0.15 + 0.7 * x))
        alpha = peak_lo + (peak_hi - peak_lo) * shape
        rows.append((species, nu0, strength_for_peak(alpha, nu0, mass, ppm, path_m), mass))
    return rows


def write(path, rows):
    with open(path, "w") as f:
        f.write(HEADER)
        for s, nu, i, m in sorted(rows, key=lambda r: (r[0], r[1])):
            f.write(f"{s},{nu},{i:.6e},{m}\n")


def main():
    rng = random.Random(20201)
    # Desk window 2200.0 .. 2262.2554 cm-1 (16384 points at 0.0038 cm-1).
    demo = branch("N2O", 44.0, 42.0, 10.0, 2207.46, 3.9, 14, 0.08, 0.7, rng)
    demo = [r for r in demo if abs(r[1] - 2238.36) > 0.5]
    demo.append(("N2O", 2238.36, strength_for_peak(0.35, 2238.36, 44.0, 42.0, 10.0), 44.0))
    demo += branch("CO", 28.0, 120.0, 10.0, 2203.1, 3.6, 6, 0.2, 0.8, rng)
    write("crates/core/data/demo_lines.csv", demo)

    species = [
        ("N2O", 44.0, 42.0), ("NO", 30.0, 420.0), ("CO", 28.0, 120.0),
        ("OCS", 60.0, 26.0), ("CH4", 16.0, 1500.0), ("C2H6", 30.0, 490.0),
        ("C2H4", 28.0, 540.0), ("C2H2", 26.0, 6600.0), ("CO2", 44.0, 280.0),
        ("H2O", 18.0, 2100.0),
    ]
    rows = []
    for idx, (name, mass, ppm) in enumerate(species):
        start = 2200.4 + 0.53 * idx
        spacing = 5.3 + 0.37 * idx
        count = int((2261.5 - start) / spacing)
        rows += branch(name, mass, ppm, 76.0, start, spacing, count, 0.05, 0.9, rng)
    write("crates/core/data/parallel10_lines.csv", rows)

    centers = {
        "N2O": (2224.0, 0.84), "NO": (2040.0, 3.4), "CO": (2143.3, 3.8),
        "OCS": (2062.0, 0.4), "CH4": (2950.0, 9.4), "C2H6": (2985.0, 2.6),
        "C2H4": (2870.0, 2.5), "C2H2": (2600.0, 2.3), "CO2": (2349.0, 1.56),
        "H2O": (2450.0, 11.0),
    }
    full = []
    for name, mass, ppm in species:
        c0, sp = centers[name]
        full += branch(name, mass, ppm, 76.0, c0, sp, 40, 0.05, 0.9, rng)
    full = [r for r in full if 2006.7 < r[1] < 3013.4]
    write("crates/core/data/fullscale_synthetic_lines.csv", full)


if __name__ == "__main__":
    main()
