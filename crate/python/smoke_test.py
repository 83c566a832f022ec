"""Smoke test for the hetnet extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml --release`.
"""

import csv
import io
import math

import hetnet


def main():
    assert abs(hetnet.kappa_from_bits(3) - 0.12599) < 1e-4
    assert abs(hetnet.atn_from_amplifier(2.0, 3, 1.0) - 1.6103) < 1e-3
    assert abs(hetnet.jakes_delta(0.1, 1.0) - 0.903713) < 1e-5
    assert abs(hetnet.los_probability(141.4, 1 / 141.4) - math.exp(-1)) < 1e-12

    cfg = hetnet.NetworkConfig.reference(1)
    round_trip = hetnet.NetworkConfig.from_json(cfg.to_json())
    assert round_trip.fingerprint() == cfg.fingerprint()

    pmf = cfg.directivity_pmf(0)
    assert abs(sum(p for _, p in pmf) - 1.0) < 1e-12

    cov = cfg.coverage()
    mc = cfg.run_coverage_mc(drops=4000)
    print(f"coverage at 0 dB: analytic {cov['clamped']:.4f}, MC {mc['estimate']:.4f} +- {mc['stderr']:.4f}")
    assert 0.0 < cov["clamped"] <= 1.0
    assert cov["clamped"] >= mc["estimate"] - 4 * mc["stderr"]

    aged = cfg.with_overrides({"tiers.*.aging.delta": 0.7})
    assert aged.coverage()["clamped"] < cov["clamped"]
    assert aged.ase() > 0.0

    try:
        cfg.with_overrides({"tiers.*.no_such_field": 1})
    except ValueError:
        pass
    else:
        raise AssertionError("bad override accepted")

    text = hetnet.run_preset("fig6", overrides=["tiers.*.target_sdinr_db=0"])
    lines = text.splitlines()
    assert lines[0] == "# schema=hetnet-curve-v1"
    rows = list(csv.DictReader(io.StringIO("\n".join(l for l in lines if not l.startswith("#")))))
    assert len(rows) == 3 * 21
    print(f"fig6 preset: {len(rows)} rows")
    print("smoke test passed")


if __name__ == "__main__":
    main()
