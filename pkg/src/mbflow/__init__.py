"""mbflow: exact cochain machinery for flow categories.

Modules
-------
linalg        exact rational matrices (rank / kernel / quotients)
complexes     graded cochain complexes, chain maps, cones, towers
hpl           homological perturbation engine
flowcat       flow-category models, sign calculus, operator assembly
oracles       pairing oracles: counts, tables, circle kernel, quadrature
products      product categories and Gysin sequences
morse_engine  gradient-flow front end on S^2 and T^2
spectral      action spectral sequence of the level filtration
cli           batch verification / computation interface
"""

__version__ = "0.1.0"
