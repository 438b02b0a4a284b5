"""Rectangular vs polar trigonometric envelopes on a few angle windows."""
from rqcopf.experiments import envelope_report

LINE = (1.0, -5.0)   # g, b

for lo, hi, psi in [(-30, 30, 0), (-60, 0, 0), (-30, 30, 80), (-90, 90, 80)]:
    try:
        rep = envelope_report(lo, hi, *LINE, psi_deg=psi)
    except ValueError as exc:
        print(f"[{lo}, {hi}] psi={psi}: {exc}; retrying with fallback")
        rep = envelope_report(lo, hi, *LINE, psi_deg=psi, fallback=True)
    c = rep.comparison()
    print(f"[{lo:>4}, {hi:>3}] psi={psi:>3}  {rep.verdict.verdict:<22}"
          f" lower diff [{c['lower_min']:+.4f}, {c['lower_max']:+.4f}]"
          f" upper diff [{c['upper_min']:+.4f}, {c['upper_max']:+.4f}]")
