"""Opcodes of the stack program a family compiles to.

Each row of ``code`` is ``(op, a, b, c, d)``:

ROT      a=offset poly
FOURIER  a=offset poly, b=first mode, c=mode count
FLOW     a=first mode, b=mode count, c=fdata slot of delta, d=RK4 steps
INVERSE  a=offset poly, b=first mode, c=mode count   (inverse of a FOURIER lift)
DUP      push a copy of the top
SWAP     exchange the two top entries
BLEND    a=weight poly; pops y1, y0 and pushes y0 + w*(y1 - y0)

``modes`` rows are ``(k, sin poly, cos poly)`` meaning
``sin_poly * sin(2 pi k y) + cos_poly * cos(2 pi k y)``.
"""
ROT = 0
FOURIER = 1
FLOW = 2
INVERSE = 3
DUP = 4
SWAP = 5
BLEND = 6

# jet workspace slots, relative to the end of the stack
T_U, T_U2, T_U3, T_SIN, T_COS, T_ARG, T_PROD = 0, 1, 2, 3, 4, 5, 6
T_Y, T_K, T_YT, T_V, T_Z, T_E = 7, 8, 9, 10, 11, 12
N_TEMPS = 13
