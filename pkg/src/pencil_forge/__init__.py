"""pencil-forge: symbolic certification of first-order Hamiltonian operators
of hydrodynamic type, their nonlocal isometry extensions, and bi-Hamiltonian
pair compatibility, with a catalog of verified operator families and the
hierarchy machinery (Magri steps, recursion operators, commuting flows)
built on top of them."""

__version__ = "0.1.0"
