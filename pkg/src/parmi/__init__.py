"""Desk-scale closed-loop BCI simulator.

Pupil-constriction control and adaptive motor-imagery EEG classification on
the SPD manifold, driven by a ground-truth signal generator, with an
event-sourced session engine and a socket console protocol.
"""

__version__ = "0.1.0"
