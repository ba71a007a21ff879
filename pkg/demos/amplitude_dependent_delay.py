"""
Saturation after an amplitude-dependent delay
=============================================

The operator delays its input by the largest amplitude seen so far and
then saturates it.  Its square-wave response depends on the period, so the
prediction is a fixed point in ``T``: freeze ``T``, intersect the loci, read
off the period where they meet, repeat.
"""

from squaredf.linsys import TransferFunction
from squaredf.nonlin import SquarePreservingOp
from squaredf.predict import adf_predict_T_dependent
from squaredf.simulate import LureLoop, SimConfig, detect_oscillation, onset_search, simulate_lure

op = SquarePreservingOp.sat_delay()
G = TransferFunction([1], [1, 1])

for k, T_init in ((11, 20.0), (15, 25.0)):
    p = adf_predict_T_dependent(G.scaled(k), op, T_init)
    print(f"k={k}: predicted T {p.T:.3f}  amplitude {p.alpha:.3f}  residual {p.residual:.1e}")

# The simulator keeps the running maximum of |y| as the delay, so the run
# starts from a unit output to get the delay going.
cfg = SimConfig(step=1e-3, horizon=2000.0, initial_output=1.0)
report = detect_oscillation(simulate_lure(G.scaled(15), op, cfg))
print("k=15 simulation:", ", ".join(report.lines()[:3]))

# The smallest gain that sustains an oscillation in simulation.
onset = onset_search(lambda k: LureLoop(G.scaled(k), op), 1.5, 3.0, cfg, iterations=8)
print(f"simulated onset k = {onset:.3f}")
