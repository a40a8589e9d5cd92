"""certitrack: certified path tracking and rigorous monodromy verification.

Computes the permutation triple of an algebraic map branched over
{0, 1, infinity} from exact equations over a number field, with every
numerical step backed by interval certificates, and compares the result
against a declared triple up to simultaneous conjugation and branch
point relabeling.
"""

__version__ = "0.1.0"
